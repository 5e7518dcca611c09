"""Momentum-space spin-wave analysis of the bilayer pair-creation instability.

For a fully filled periodic bilayer the quadratic excitation Hamiltonian
decouples into (k, -k) pairs with intra-layer dispersion

    eps_k   = sum_{j != 0} V_AA(0j) exp(-i k.r_j)
    omega_k = sum_j       V_AB(0j) exp(-i k.r_j)

shifted band eps~_k = eps_k - eta*(eps_0 - omega_0) + h, and quasi-energies
xi_k = sqrt(eps~_k^2 - |omega_k|^2).  Momenta with |omega_k| > |eps~_k| have
imaginary xi_k and their population grows as sinh^2; stable momenta
oscillate as sin^2.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .lattice import BilayerGeometry, FillingRealization, KGrid, LatticeSpec, build_bilayer, k_grid
from .couplings import ModelParams, bandwidth, bias_from_fraction, dipole_coupling, min_image

__all__ = [
    "DispersionField",
    "InstabilityReport",
    "dispersion_field",
    "epsilon_k",
    "omega_k",
    "xi_k",
    "pair_population",
    "mode_population",
    "excitation_density",
    "instability_report",
    "scan",
    "dispersion_infinite",
]

# relative window around the maximal growth rate counted as degenerate
KSTAR_REL_TOL = 1e-3


def _require_translation_invariant(geom: BilayerGeometry, fill: Optional[FillingRealization]):
    if not geom.spec.periodic:
        raise ValueError(
            "momentum-space dispersions require periodic boundaries; "
            "use the real-space BdG solver for open boundaries"
        )
    if fill is not None and (not fill.mask_a.all() or not fill.mask_b.all()):
        raise ValueError(
            "momentum-space dispersions require unit filling; "
            "use the real-space BdG solver for diluted lattices"
        )


def _reference_displacements(geom: BilayerGeometry, inter: bool) -> np.ndarray:
    """Min-imaged displacements from site 0 of layer A to all sites of the
    same layer (excluding 0) or of layer B (including the aligned site)."""
    L = geom.spec.L
    target = geom.positions_b if inter else geom.positions_a
    d = target - geom.positions_a[0]
    d[:, :2] = min_image(d[:, :2], L)
    if not inter:
        d = d[1:]
    return d


def epsilon_k(k, geom: BilayerGeometry, params: ModelParams, fill=None) -> float:
    """Intra-layer dispersion at one momentum (units of J)."""
    _require_translation_invariant(geom, fill)
    d = _reference_displacements(geom, inter=False)
    v = dipole_coupling(d, params)
    val = np.sum(v * np.exp(-1j * (d[:, :2] @ np.asarray(k, dtype=float))))
    assert abs(val.imag) <= 1e-10 * (1.0 + abs(val.real))
    return float(val.real)


def omega_k(k, geom: BilayerGeometry, params: ModelParams, fill=None) -> complex:
    """Inter-layer pair coupling at one momentum (complex, units of J)."""
    _require_translation_invariant(geom, fill)
    d = _reference_displacements(geom, inter=True)
    v = dipole_coupling(d, params)
    return complex(np.sum(v * np.exp(-1j * (d[:, :2] @ np.asarray(k, dtype=float)))))


def xi_k(eps_tilde, omega_abs):
    """Quasi-energy sqrt(eps~^2 - |omega|^2) on the Re >= 0, Im >= 0 branch."""
    arg = np.asarray(eps_tilde, dtype=float) ** 2 - np.asarray(omega_abs, dtype=float) ** 2
    return np.sqrt(arg.astype(complex))


@dataclass(frozen=True)
class DispersionField:
    """eps_k, omega_k, eps~_k and xi_k sampled on the full BZ grid."""

    spec: LatticeSpec
    params: ModelParams
    kgrid: KGrid
    eps: np.ndarray  # (L^2,) real
    omega: np.ndarray  # (L^2,) complex
    eps_tilde: np.ndarray  # (L^2,) real
    xi: np.ndarray  # (L^2,) complex, Re >= 0 and Im >= 0
    h: float  # resolved layer bias actually applied
    eps0: float
    omega0: float


def dispersion_field(spec: LatticeSpec, params: ModelParams) -> DispersionField:
    """Evaluate the dispersions on the L x L Brillouin-zone grid.

    Lattice sums run over the periodic L x L cell with minimum-image
    displacements, matching the real-space solvers on the same geometry.
    """
    geom = build_bilayer(spec)
    kg = k_grid(spec)
    _require_translation_invariant(geom, None)

    d_a = _reference_displacements(geom, inter=False)
    d_b = _reference_displacements(geom, inter=True)
    v_a = dipole_coupling(d_a, params)
    v_b = dipole_coupling(d_b, params)
    phase_a = np.exp(-1j * (kg.momenta @ d_a[:, :2].T))
    phase_b = np.exp(-1j * (kg.momenta @ d_b[:, :2].T))
    eps_c = phase_a @ v_a
    omega = phase_b @ v_b
    assert np.max(np.abs(eps_c.imag)) <= 1e-9 * (1.0 + np.max(np.abs(eps_c.real)))
    eps = eps_c.real

    i0 = int(np.flatnonzero((kg.indices == 0).all(axis=1))[0])
    eps0 = float(eps[i0])
    omega0 = float(omega[i0].real)
    shift = params.eta * (eps0 - omega0)
    if params.bias_x is not None:
        h = bias_from_fraction(params.bias_x, eps, eps0 - shift)
    else:
        h = params.bias_h or 0.0
    eps_tilde = eps - shift + h
    xi = xi_k(eps_tilde, np.abs(omega))
    return DispersionField(
        spec=spec, params=params, kgrid=kg, eps=eps, omega=omega,
        eps_tilde=eps_tilde, xi=xi, h=float(h), eps0=eps0, omega0=omega0,
    )


def _sin_over_z(z: np.ndarray) -> np.ndarray:
    """sin(z)/z for complex z, series-stabilized near zero."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-4
    zb = z[~small]
    out[~small] = np.sin(zb) / zb
    zs = z[small]
    out[small] = 1.0 - zs**2 / 6.0 + zs**4 / 120.0
    return out


def pair_population(omega, xi, t):
    """Mode population |omega|^2 * |sin(xi t)/xi|^2 grown from vacuum.

    Covers both branches: sin^2 for real xi, sinh^2 for imaginary xi, and is
    continuous (-> |omega|^2 t^2) across the threshold xi -> 0.
    """
    t = np.asarray(t, dtype=float)
    amp = np.abs(np.asarray(omega)) * t * np.abs(_sin_over_z(np.asarray(xi) * t))
    return amp * amp


def mode_population(field: DispersionField, t) -> np.ndarray:
    """N_k(t) over the full grid (flat, aligned with field.kgrid)."""
    return pair_population(field.omega, field.xi, t)


def excitation_density(field: DispersionField, t) -> float:
    """Excitations per site n(t)*a^2, the BZ integral of the mode populations."""
    return float(np.mean(mode_population(field, t)))


@dataclass(frozen=True)
class InstabilityReport:
    """Unstable manifold of one parameter point."""

    gamma: float  # max_k Im xi_k (units J/hbar)
    k_star: np.ndarray  # (m, 2) momenta within KSTAR_REL_TOL of gamma
    topology: str  # empty | points | ring | arcs | disks
    component_count: int
    unstable_mask: np.ndarray  # (L^2,) bool
    components: Tuple[np.ndarray, ...]  # flat-index arrays, one per component
    kgrid: KGrid

    @property
    def unstable_momenta(self) -> np.ndarray:
        return self.kgrid.momenta[self.unstable_mask]


def _connected_components(mask2d: np.ndarray, periodic: bool = True):
    """8-connected components; returns (flat indices, unwrapped (iy, ix)) pairs."""
    L = mask2d.shape[0]
    seen = np.zeros_like(mask2d, dtype=bool)
    comps = []
    steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    for sy, sx in zip(*np.nonzero(mask2d)):
        if seen[sy, sx]:
            continue
        stack = [(sy, sx, sy, sx)]  # wrapped and unwrapped coordinates
        seen[sy, sx] = True
        cells, unwrapped = [], []
        while stack:
            y, x, uy, ux = stack.pop()
            cells.append(y * L + x)
            unwrapped.append((uy, ux))
            for dy, dx in steps:
                ny, nx = y + dy, x + dx
                if periodic:
                    wy, wx = ny % L, nx % L
                elif not (0 <= ny < L and 0 <= nx < L):
                    continue
                else:
                    wy, wx = ny, nx
                if mask2d[wy, wx] and not seen[wy, wx]:
                    seen[wy, wx] = True
                    stack.append((wy, wx, uy + dy, ux + dx))
        comps.append((np.array(sorted(cells)), np.array(unwrapped)))
    return comps


def _winds_around_origin(flat_idx: np.ndarray, kgrid: KGrid) -> bool:
    """Ring test: angular coverage of the component leaves no gap larger
    than ~one grid cell seen from k = 0."""
    kk = kgrid.momenta[flat_idx]
    r = np.hypot(kk[:, 0], kk[:, 1])
    if np.any(r == 0):
        return False  # contains the origin, cannot wind around it
    cell = 2.0 * np.pi / kgrid.L
    gap_tol = 2.0 * cell / max(r.min(), cell)
    ang = np.sort(np.arctan2(kk[:, 1], kk[:, 0]))
    gaps = np.diff(ang, append=ang[0] + 2.0 * np.pi)
    return bool(gaps.max() <= gap_tol)


def _fill_ratio(unwrapped: np.ndarray) -> float:
    h = unwrapped[:, 0].max() - unwrapped[:, 0].min() + 1
    w = unwrapped[:, 1].max() - unwrapped[:, 1].min() + 1
    return len(unwrapped) / float(h * w)


def instability_report(
    field: DispersionField, tol: float = 1e-9, rel_tol: float = 0.0
) -> InstabilityReport:
    """Locate and classify the manifold of unstable modes (Im xi_k > tol).

    ``rel_tol`` additionally drops cells below that fraction of the maximal
    growth rate -- a visibility cutoff for figure-level topology statements;
    the default keeps every strictly unstable cell.
    """
    im = field.xi.imag
    gamma = float(max(im.max(), 0.0))
    mask = im > max(tol, rel_tol * gamma)
    kg = field.kgrid
    if not mask.any():
        return InstabilityReport(
            gamma=0.0 if gamma <= tol else gamma,
            k_star=np.empty((0, 2)), topology="empty", component_count=0,
            unstable_mask=mask, components=(), kgrid=kg,
        )
    k_star = kg.momenta[im >= (1.0 - KSTAR_REL_TOL) * gamma]
    comps = _connected_components(mask.reshape(kg.L, kg.L))
    if any(_winds_around_origin(ci, kg) for ci, _ in comps):
        topology = "ring"
    elif all(len(ci) <= 2 for ci, _ in comps):
        topology = "points"
    elif all(_fill_ratio(cu) > 0.6 for _, cu in comps):
        topology = "disks"
    else:
        topology = "arcs"
    return InstabilityReport(
        gamma=gamma, k_star=k_star, topology=topology, component_count=len(comps),
        unstable_mask=mask, components=tuple(ci for ci, _ in comps), kgrid=kg,
    )


def scan(
    spec: LatticeSpec,
    params: ModelParams,
    param_name: str,
    values: Sequence[float],
    tol: float = 1e-9,
    rel_tol: float = 0.0,
) -> List[Tuple[float, InstabilityReport]]:
    """Instability reports along a theta0 / bias_x / bias_h / eta grid."""
    if param_name not in ("theta0", "bias_x", "bias_h", "eta"):
        raise ValueError(f"unknown scan parameter {param_name!r}")
    if len(values) == 0:
        raise ValueError("empty scan grid")
    out = []
    for v in values:
        kw = {"theta0": params.theta0, "eta": params.eta, "J": params.J,
              "bias_h": params.bias_h, "bias_x": params.bias_x}
        kw[param_name] = float(v)
        if param_name == "bias_x":
            kw["bias_h"] = None
        if param_name == "bias_h":
            kw["bias_x"] = None
        field = dispersion_field(spec, ModelParams(**kw))
        out.append((float(v), instability_report(field, tol=tol, rel_tol=rel_tol)))
    return out


def _truncated_sum(k, params, a_Z, inter, r) -> complex:
    n = np.arange(-r, r + 1)
    xx, yy = np.meshgrid(n, n, indexing="ij")
    d = np.column_stack([xx.ravel(), yy.ravel()]).astype(float)
    d = d[(d[:, 0] ** 2 + d[:, 1] ** 2) <= r * r]
    if inter:
        d3 = np.column_stack([d, np.full(len(d), -a_Z)])
    else:
        d = d[~np.all(d == 0, axis=1)]
        d3 = np.column_stack([d, np.zeros(len(d))])
    v = dipole_coupling(d3, params)
    return complex(np.sum(v * np.exp(-1j * (d3[:, :2] @ np.asarray(k, dtype=float)))))


def dispersion_infinite(
    k,
    params: ModelParams,
    a_Z: float,
    inter: bool = False,
    tol: float = 1e-6,
    r_start: int = 64,
    r_max: int = 2048,
) -> complex:
    """Infinite-lattice dispersion sum, radius-truncated with Richardson
    extrapolation of the O(1/R) tail; converged when the extrapolant moves
    by less than ``tol`` (units J) under a radius doubling.

    Independent cross-check path; production code uses the finite
    periodic-cell sums in :func:`dispersion_field`.
    """
    prev_raw = _truncated_sum(k, params, a_Z, inter, r_start)
    prev_extrap = None
    r = 2 * r_start
    while r <= r_max:
        raw = _truncated_sum(k, params, a_Z, inter, r)
        extrap = 2.0 * raw - prev_raw  # cancels the c/R tail
        if prev_extrap is not None and abs(extrap - prev_extrap) < tol:
            return extrap
        prev_raw, prev_extrap = raw, extrap
        r *= 2
    raise RuntimeError(f"lattice sum did not converge to {tol} within radius {r_max}")
