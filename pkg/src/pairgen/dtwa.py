"""Discrete truncated Wigner spin dynamics for the dipolar bilayer.

Each trajectory carries one classical 3-vector per occupied site, sampled
from the discrete Wigner distribution of the layer-polarized product state:
s^z is +1/2 on layer A and -1/2 on layer B, s^x and s^y are independent
fair draws from {+1/2, -1/2}.  Trajectories precess in their instantaneous
local field,

    ds_i/dt = B_i x s_i,   B_i = sum_j V_ij (2 s_j^x, 2 s_j^y, 2 eta s_j^z),

which conserves |s_i|, the total z magnetization and the classical energy.
Structure factors use the symmetrized estimator for off-diagonal terms and
the exact operator identity (1/2 -+ s^z) on the diagonal.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import DOP853

from .lattice import (
    DOMAIN_TRAJECTORY,
    BilayerGeometry,
    FillingRealization,
    KGrid,
    k_grid,
    rng_stream,
)
from .couplings import CouplingMatrices, ModelParams

__all__ = [
    "SpinEnsemble",
    "ObservableSeries",
    "sample_initial",
    "evolve",
    "structure_factor",
    "real_space_correlations",
    "run_experiment",
    "classical_energy",
    "full_coupling_matrix",
]

# trajectories integrated per batch; fixed so results never depend on the
# thread count (accumulation runs in batch-index order)
DEFAULT_CHUNK = 512


@dataclass
class SpinEnsemble:
    """Classical spin configurations, (n_traj, n_spins, 3), A sites first."""

    spins: np.ndarray
    geom: BilayerGeometry
    fill: FillingRealization
    seed: int
    t: float = 0.0

    @property
    def n_traj(self) -> int:
        return self.spins.shape[0]


@dataclass
class ObservableSeries:
    """Time series of momentum distributions and derived observables."""

    times: np.ndarray
    nk_a: np.ndarray  # (n_t, L^2) ensemble means
    nk_b: np.ndarray
    nk_a_stderr: np.ndarray
    nk_b_stderr: np.ndarray
    pair_asym: np.ndarray  # (n_t, L^2) mean of N^A_k - N^B_{-k}
    pair_asym_stderr: np.ndarray
    npair: np.ndarray  # (n_t,) total pairs, mean of the two layer counts
    npair_stderr: np.ndarray
    kgrid: KGrid
    n_traj: int
    n_occ: float  # occupied sites per layer (mean of the two layers)
    t10: Optional[float] = None
    cpm_displacements: Optional[np.ndarray] = None  # (n_disp, 2) integer (dx, dy)
    cpm_a: Optional[np.ndarray] = None  # (n_t, n_disp) complex
    cpm_b: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


def sample_initial(
    geom: BilayerGeometry, fill: FillingRealization, n_traj: int, seed: int, offset: int = 0
) -> SpinEnsemble:
    """Draw the discrete Wigner ensemble of the layer-polarized state.

    Trajectory ``offset + i`` always uses the same counter-based stream, so
    ensembles may be built in chunks, in any order, with identical results.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    na = int(fill.mask_a.sum())
    nb = int(fill.mask_b.sum())
    n = na + nb
    spins = np.empty((n_traj, n, 3))
    for i in range(n_traj):
        rng = rng_stream(seed, DOMAIN_TRAJECTORY, offset + i)
        spins[i, :, :2] = rng.integers(0, 2, size=(n, 2)) - 0.5
    spins[:, :na, 2] = 0.5
    spins[:, na:, 2] = -0.5
    return SpinEnsemble(spins=spins, geom=geom, fill=fill, seed=seed)


def full_coupling_matrix(coup: CouplingMatrices) -> np.ndarray:
    """Symmetric pair-coupling matrix over all occupied sites (A block first)."""
    return np.block([[coup.v_aa, coup.v_ab], [coup.v_ab.T, coup.v_bb]])


def _make_rhs(w: np.ndarray, eta: float, n_traj: int):
    n = w.shape[0]

    def rhs(_t, y):
        s = y.reshape(n_traj, n, 3)
        flat = s.transpose(1, 2, 0).reshape(n, 3 * n_traj)
        b = (2.0 * (w @ flat)).reshape(n, 3, n_traj)
        if eta != 1.0:
            b[:, 2, :] *= eta
        b = b.transpose(2, 0, 1)
        ds = np.empty_like(s)
        ds[..., 0] = b[..., 1] * s[..., 2] - b[..., 2] * s[..., 1]
        ds[..., 1] = b[..., 2] * s[..., 0] - b[..., 0] * s[..., 2]
        ds[..., 2] = b[..., 0] * s[..., 1] - b[..., 1] * s[..., 0]
        return ds.reshape(-1)

    return rhs


def classical_energy(spins: np.ndarray, w: np.ndarray, eta: float) -> np.ndarray:
    """Classical XXZ energy per trajectory (units of J)."""
    s = spins if spins.ndim == 3 else spins[None]
    n = w.shape[0]
    flat = s.transpose(1, 2, 0).reshape(n, -1)
    b = (2.0 * (w @ flat)).reshape(n, 3, len(s))
    b[:, 2, :] *= eta
    e = 0.5 * np.einsum("tnc,nct->t", s, b)
    return e if spins.ndim == 3 else e[0]


def _integrate(y0, rhs, t_grid, rtol, atol, on_sample):
    """Adaptive DOP853 sweep calling ``on_sample(i, y)`` at each grid time."""
    t_grid = np.asarray(t_grid, dtype=float)
    i = 0
    if t_grid[0] == 0.0:
        on_sample(0, y0)
        i = 1
    if i >= len(t_grid):
        return
    stepper = DOP853(rhs, 0.0, y0, t_bound=float(t_grid[-1]), rtol=rtol, atol=atol)
    while i < len(t_grid):
        msg = stepper.step()
        if stepper.status == "failed":
            raise RuntimeError(f"integrator failed: {msg}")
        dense = None
        while i < len(t_grid) and t_grid[i] <= stepper.t + 1e-15:
            if dense is None:
                dense = stepper.dense_output()
            on_sample(i, dense(min(t_grid[i], stepper.t)))
            i += 1


def evolve(
    ens: SpinEnsemble,
    coup: CouplingMatrices,
    params: ModelParams,
    t_grid,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> np.ndarray:
    """Integrate every trajectory, returning spins at the sampled times,
    shape (n_t, n_traj, n_spins, 3).  Use :func:`run_experiment` for large
    ensembles where storing full trajectories is wasteful.
    """
    w = full_coupling_matrix(coup)
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((len(t_grid),) + ens.spins.shape)
    rhs = _make_rhs(w, params.eta, ens.n_traj)

    def on_sample(i, y):
        out[i] = y.reshape(ens.spins.shape)

    _integrate(ens.spins.reshape(-1).copy(), rhs, t_grid, rtol, atol, on_sample)
    return out


class _SpectralMaps:
    """Precomputed index maps for FFT-based structure factors."""

    def __init__(self, geom: BilayerGeometry, fill: FillingRealization):
        L = geom.spec.L
        self.L = L
        self.kgrid = k_grid(geom.spec)
        self.sites_a = fill.sites_a
        self.sites_b = fill.sites_b
        n = self.kgrid.indices
        n0 = L // 2
        # fft flat index holding G(k_n) = sum_i exp(+i k.r_i) g_i = fft2(g)[-n]
        self.pos_idx = (((-n[:, 1]) % L) * L + ((-n[:, 0]) % L)).astype(np.intp)
        # grid flat index of -k for each k
        self.neg_idx = ((((-n[:, 1]) + n0) % L) * L + (((-n[:, 0]) + n0) % L)).astype(np.intp)

    def mode_estimators(self, spins: np.ndarray):
        """Per-trajectory N^A_k, N^B_k (symmetrized off-diagonal + exact
        diagonal), shape (n_traj, L^2) each."""
        L, na = self.L, len(self.sites_a)
        nt = spins.shape[0]
        out = []
        for layer, sites, rows, sign in (
            ("A", self.sites_a, slice(0, na), -1.0),
            ("B", self.sites_b, slice(na, None), +1.0),
        ):
            s = spins[:, rows, :]
            # layer A pairs <s^- s^+>, layer B <s^+ s^->; both reduce to
            # |sum_i e^{ik r_i} (s^x -+ i s^y)_i|^2 classically
            g = np.zeros((nt, L * L), dtype=complex)
            g[:, sites] = s[..., 0] + 1j * sign * s[..., 1]
            f = np.fft.fft2(g.reshape(nt, L, L)).reshape(nt, L * L)
            q = np.abs(f[:, self.pos_idx]) ** 2
            diag_cl = np.sum(s[..., 0] ** 2 + s[..., 1] ** 2, axis=1)
            diag_ex = np.sum(0.5 + sign * s[..., 2], axis=1)
            q += (diag_ex - diag_cl)[:, None]
            out.append(q / (L * L))
        return out[0], out[1]


def structure_factor(ens: SpinEnsemble, geom: Optional[BilayerGeometry] = None):
    """Ensemble-averaged momentum distributions (N^A_k, N^B_k), flat over
    the BZ grid of the underlying lattice."""
    maps = _SpectralMaps(geom or ens.geom, ens.fill)
    qa, qb = maps.mode_estimators(ens.spins)
    return qa.mean(axis=0), qb.mean(axis=0)


class _CorrelationMaps:
    """Displacement-binned transverse correlations via padded FFTs."""

    def __init__(self, geom: BilayerGeometry, fill: FillingRealization):
        L = geom.spec.L
        self.L = L
        self.periodic = geom.spec.periodic
        self.sites_a = fill.sites_a
        self.sites_b = fill.sites_b
        self.P = L if self.periodic else 2 * L
        P = self.P
        if self.periodic:
            d = np.arange(L)
            d = (d + L // 2) % L - L // 2
        else:
            d = np.arange(P)
            d = (d + L) % P - L  # displacements -L .. L-1; -L row is empty
        dyy, dxx = np.meshgrid(d, d, indexing="ij")
        self.displacements = np.column_stack([dxx.ravel(), dyy.ravel()])
        self.counts = {}
        for name, sites in (("A", self.sites_a), ("B", self.sites_b)):
            occ = np.zeros((P, P))
            occ[sites // L, sites % L] = 1.0
            cnt = np.fft.ifft2(np.abs(np.fft.fft2(occ)) ** 2).real
            cnt = np.maximum(cnt, 0.0).round()
            cnt.reshape(-1)[0] = 0.0  # i = j excluded by convention
            self.counts[name] = cnt.ravel()

    def correlate(self, spins: np.ndarray):
        """Per-layer mean over trajectories of the pair-averaged s^+ s^-
        correlation at each displacement."""
        na = len(self.sites_a)
        L, P = self.L, self.P
        out = {}
        for name, sites, rows in (("A", self.sites_a, slice(0, na)),
                                  ("B", self.sites_b, slice(na, None))):
            s = spins[:, rows, :]
            g = np.zeros((spins.shape[0], P, P), dtype=complex)
            g[:, sites // L, sites % L] = s[..., 0] + 1j * s[..., 1]
            f = np.fft.fft2(g)
            corr = np.fft.ifft2(f * np.conj(f)).reshape(spins.shape[0], -1)
            corr = corr.mean(axis=0)
            corr[0] = 0.0
            cnt = self.counts[name]
            out[name] = np.where(cnt > 0, corr / np.maximum(cnt, 1.0), 0.0)
        return out["A"], out["B"]


def real_space_correlations(ens: SpinEnsemble, geom: Optional[BilayerGeometry] = None):
    """C^{+-}(r) per layer, binned by displacement r = r_i - r_j with the
    i = j term excluded.  Returns (displacements, C_A, C_B)."""
    maps = _CorrelationMaps(geom or ens.geom, ens.fill)
    ca, cb = maps.correlate(ens.spins)
    return maps.displacements, ca, cb


def _locate_threshold(times, values, threshold):
    """First crossing time by linear interpolation, None if never reached."""
    above = np.nonzero(values >= threshold)[0]
    if len(above) == 0:
        return None
    j = int(above[0])
    if j == 0:
        return float(times[0])
    t0, t1 = times[j - 1], times[j]
    v0, v1 = values[j - 1], values[j]
    if v1 == v0:
        return float(t1)
    return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))


def run_experiment(
    geom: BilayerGeometry,
    fill: FillingRealization,
    params: ModelParams,
    coup: CouplingMatrices,
    t_grid,
    n_traj: int,
    seed: int,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    chunk: int = DEFAULT_CHUNK,
    threads: int = 1,
    correlations: bool = False,
) -> ObservableSeries:
    """Full DTWA run with streaming observable accumulation.

    Trajectories are integrated in fixed-size batches; per-batch partial sums
    are reduced in batch-index order, so the result is independent of the
    thread count.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    n_t = len(t_grid)
    maps = _SpectralMaps(geom, fill)
    cmaps = _CorrelationMaps(geom, fill) if correlations else None
    w = full_coupling_matrix(coup)
    n_k = geom.spec.n_sites

    starts = list(range(0, n_traj, chunk))

    def run_chunk(start):
        m = min(chunk, n_traj - start)
        ens = sample_initial(geom, fill, m, seed, offset=start)
        acc = {
            "qa": np.zeros((n_t, n_k)), "qa2": np.zeros((n_t, n_k)),
            "qb": np.zeros((n_t, n_k)), "qb2": np.zeros((n_t, n_k)),
            "d": np.zeros((n_t, n_k)), "d2": np.zeros((n_t, n_k)),
            "np": np.zeros(n_t), "np2": np.zeros(n_t),
        }
        if correlations:
            acc["ca"] = np.zeros((n_t, cmaps.P * cmaps.P), dtype=complex)
            acc["cb"] = np.zeros_like(acc["ca"])

        def on_sample(i, y):
            spins = y.reshape(m, -1, 3)
            qa, qb = maps.mode_estimators(spins)
            d = qa - qb[:, maps.neg_idx]
            npair = 0.5 * (qa.sum(axis=1) + qb.sum(axis=1))
            acc["qa"][i] += qa.sum(axis=0)
            acc["qa2"][i] += (qa * qa).sum(axis=0)
            acc["qb"][i] += qb.sum(axis=0)
            acc["qb2"][i] += (qb * qb).sum(axis=0)
            acc["d"][i] += d.sum(axis=0)
            acc["d2"][i] += (d * d).sum(axis=0)
            acc["np"][i] += npair.sum()
            acc["np2"][i] += (npair * npair).sum()
            if correlations:
                ca, cb = cmaps.correlate(spins)
                acc["ca"][i] += m * ca
                acc["cb"][i] += m * cb

        rhs = _make_rhs(w, params.eta, m)
        _integrate(ens.spins.reshape(-1).copy(), rhs, t_grid, rtol, atol, on_sample)
        return acc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, starts))
    else:
        results = [run_chunk(s) for s in starts]

    total = results[0]
    for acc in results[1:]:
        for key in total:
            total[key] += acc[key]

    def mean_se(s, s2):
        mean = s / n_traj
        if n_traj > 1:
            var = np.maximum(s2 / n_traj - mean * mean, 0.0) * n_traj / (n_traj - 1)
            se = np.sqrt(var / n_traj)
        else:
            se = np.zeros_like(mean)
        return mean, se

    nk_a, se_a = mean_se(total["qa"], total["qa2"])
    nk_b, se_b = mean_se(total["qb"], total["qb2"])
    dmean, dse = mean_se(total["d"], total["d2"])
    npair, npair_se = mean_se(total["np"], total["np2"])
    n_occ = 0.5 * (len(maps.sites_a) + len(maps.sites_b))
    series = ObservableSeries(
        times=t_grid, nk_a=nk_a, nk_b=nk_b, nk_a_stderr=se_a, nk_b_stderr=se_b,
        pair_asym=dmean, pair_asym_stderr=dse,
        npair=npair, npair_stderr=npair_se,
        kgrid=maps.kgrid, n_traj=n_traj, n_occ=n_occ,
        t10=_locate_threshold(t_grid, npair, 0.1 * n_occ),
        meta={"seed": seed, "rtol": rtol, "atol": atol, "chunk": chunk},
    )
    if correlations:
        series.cpm_displacements = cmaps.displacements
        series.cpm_a = total["ca"] / n_traj
        series.cpm_b = total["cb"] / n_traj
    return series
