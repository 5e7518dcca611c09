"""Dipolar coupling tensor and intra-/inter-layer coupling matrices.

The pair coupling is V(r) = J/|r|^3 * (1 - 3 (d.r)^2/|r|^2) with the dipole
axis d = (sin(theta0), 0, cos(theta0)) tilted in the x-z plane.  Energies are
in units of J (a = 1), times in hbar/J.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import BilayerGeometry, FillingRealization, LatticeError

__all__ = [
    "ModelParams",
    "CouplingMatrices",
    "dipole_coupling",
    "coupling_matrices",
    "pair_displacements",
    "min_image",
    "bandwidth",
    "bias_from_fraction",
]


@dataclass(frozen=True)
class ModelParams:
    """Exchange constant J, dipole tilt theta0, Ising ratio eta, layer bias.

    The bias is given either directly as ``bias_h`` (units of J) or as a
    bandwidth fraction ``bias_x`` (resolved against the dispersion later);
    at most one of the two may be set.
    """

    theta0: float = 0.0
    eta: float = 0.0
    J: float = 1.0
    bias_h: Optional[float] = None
    bias_x: Optional[float] = None

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.bias_h is not None and self.bias_x is not None:
            raise ValueError("bias_h and bias_x are mutually exclusive")

    @property
    def dipole_axis(self) -> np.ndarray:
        return np.array([np.sin(self.theta0), 0.0, np.cos(self.theta0)])


@dataclass(frozen=True)
class CouplingMatrices:
    """Dense coupling blocks over occupied sites (energy units of J)."""

    v_aa: np.ndarray  # (nA, nA), zero diagonal, symmetric
    v_bb: np.ndarray  # (nB, nB)
    v_ab: np.ndarray  # (nA, nB); V_BA = v_ab.T
    sites_a: np.ndarray  # occupied site indices into the full grid
    sites_b: np.ndarray


def dipole_coupling(r, params: ModelParams):
    """Dipolar energy for displacement(s) r, shape (..., 3), in units of J.

    Raises on zero displacement (self-interaction is excluded).
    """
    r = np.asarray(r, dtype=float)
    r2 = np.sum(r * r, axis=-1)
    if np.any(r2 == 0):
        raise ValueError("zero displacement: self-interaction has no dipolar coupling")
    proj = r @ params.dipole_axis
    return params.J * (1.0 - 3.0 * proj * proj / r2) / r2**1.5


def min_image(d_xy: np.ndarray, L: int) -> np.ndarray:
    """Map in-plane displacement components to [-L/2, L/2)."""
    return (d_xy + L / 2.0) % L - L / 2.0


def pair_displacements(
    geom: BilayerGeometry,
    sites_i: np.ndarray,
    sites_j: np.ndarray,
    layer_i: str,
    layer_j: str,
) -> np.ndarray:
    """Displacements r_j - r_i, (n_i, n_j, 3), minimum-imaged in-plane if PBC."""
    pos = {"A": geom.positions_a, "B": geom.positions_b}
    pi = pos[layer_i][sites_i]
    pj = pos[layer_j][sites_j]
    d = pj[None, :, :] - pi[:, None, :]
    if geom.spec.periodic:
        d[..., :2] = min_image(d[..., :2], geom.spec.L)
    return d


def coupling_matrices(
    geom: BilayerGeometry, fill: FillingRealization, params: ModelParams
) -> CouplingMatrices:
    """Assemble V_AA, V_BB, V_AB over the occupied sites of each layer."""
    sa, sb = fill.sites_a, fill.sites_b
    if len(sa) == 0 or len(sb) == 0:
        raise LatticeError("each layer must contain at least one occupied site")

    def intra(sites, layer):
        d = pair_displacements(geom, sites, sites, layer, layer)
        n = len(sites)
        v = np.zeros((n, n))
        off = ~np.eye(n, dtype=bool)
        v[off] = dipole_coupling(d[off], params)
        return v

    v_aa = intra(sa, "A")
    v_bb = intra(sb, "B")
    d_ab = pair_displacements(geom, sa, sb, "A", "B")
    v_ab = dipole_coupling(d_ab, params)
    return CouplingMatrices(v_aa=v_aa, v_bb=v_bb, v_ab=v_ab, sites_a=sa, sites_b=sb)


def bandwidth(eps: np.ndarray) -> float:
    """Total bandwidth W = max(eps) - min(eps) of a sampled dispersion."""
    eps = np.asarray(eps, dtype=float)
    if eps.size == 0:
        raise ValueError("bandwidth of empty sample")
    return float(eps.max() - eps.min())


def bias_from_fraction(x: float, eps: np.ndarray, eps0: float) -> float:
    """Layer bias h = x*W + h0 with h0 chosen so the shifted band has
    eps_tilde(0) = x*W (zero at x = 0).

    ``eps`` is the intra-layer dispersion sampled on the full grid and
    ``eps0`` its value at k = 0 including any Ising shift already applied.
    Positive x raises the k = 0 excitation energy, pushing the resonance
    toward the band minimum.
    """
    return x * bandwidth(eps) - float(eps0)
