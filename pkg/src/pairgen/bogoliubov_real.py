"""Real-space Bogoliubov-de Gennes solver for arbitrary boundary and filling.

The linearized excitation dynamics couples layer-A annihilators to layer-B
creators.  Quasiparticle amplitudes obey xi (u; v) = M (u; v) with the block
matrix M = [[V_AA, -V_AB], [V_BA, -V_BB]], V_BA = V_AB^T.  Time evolution is
exact through the spectral decomposition of M, and occupation matrices are
obtained by inverting the Bogoliubov transformation from the excitation
vacuum.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .lattice import BilayerGeometry, KGrid, LatticeSpec, build_bilayer, k_grid, sample_filling
from .couplings import CouplingMatrices, ModelParams, coupling_matrices

__all__ = [
    "BdGSystem",
    "DefectiveMatrixError",
    "assemble_bdg",
    "evolve_occupations",
    "momentum_distribution",
    "occupation_total",
    "disorder_average",
    "disorder_average_series",
]

RCOND_MIN = 1e-13


class DefectiveMatrixError(np.linalg.LinAlgError):
    """Eigenvector matrix too ill-conditioned to invert reliably."""


@dataclass
class BdGSystem:
    """BdG block matrix over occupied sites, with cached eigendecomposition."""

    matrix: np.ndarray  # (2n, 2n) real
    n_a: int
    n_b: int
    sites_a: np.ndarray
    sites_b: np.ndarray
    geom: BilayerGeometry
    _eig: Optional[tuple] = field(default=None, repr=False)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._decomposition()[0]

    def _decomposition(self):
        if self._eig is None:
            lam, P = sla.eig(self.matrix)
            lu, piv = sla.lu_factor(P)
            gecon = sla.get_lapack_funcs("gecon", (P,))
            rcond = gecon(lu, np.linalg.norm(P, 1))[0]
            if not np.isfinite(rcond) or rcond < RCOND_MIN:
                raise DefectiveMatrixError(
                    f"BdG eigenvector matrix is numerically defective (rcond={rcond:.2e})"
                )
            Pinv = sla.lu_solve((lu, piv), np.eye(P.shape[0], dtype=P.dtype))
            self._eig = (lam, P, Pinv)
        return self._eig

    def propagator(self, t: float) -> np.ndarray:
        """E(t) = exp(-i M t) from the spectral decomposition."""
        lam, P, Pinv = self._decomposition()
        return (P * np.exp(-1j * lam * t)) @ Pinv


def assemble_bdg(coup: CouplingMatrices, geom: BilayerGeometry) -> BdGSystem:
    """Build M = [[V_AA, -V_AB], [V_BA, -V_BB]] over the occupied sites."""
    na, nb = coup.v_aa.shape[0], coup.v_bb.shape[0]
    m = np.block([[coup.v_aa, -coup.v_ab], [coup.v_ab.T, -coup.v_bb]])
    return BdGSystem(matrix=m, n_a=na, n_b=nb,
                     sites_a=coup.sites_a, sites_b=coup.sites_b, geom=geom)


def evolve_occupations(sys: BdGSystem, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Occupation matrices <a_i^dag a_j>(t), <b_i^dag b_j>(t) from the vacuum.

    The Heisenberg flow of (a; b^dag) is exp(-i K t) with K differing from M
    only by the sign of the off-diagonal blocks, which drops out of the
    occupations; both are Hermitian and positive semidefinite.
    """
    E = sys.propagator(t)
    e_ab = E[: sys.n_a, sys.n_a:]
    e_ba = E[sys.n_a:, : sys.n_a]
    occ_a = np.conj(e_ab) @ e_ab.T
    occ_b = e_ba @ np.conj(e_ba).T
    return occ_a, occ_b


def occupation_total(occ: np.ndarray) -> float:
    """Total excitation number of one layer (trace of the occupation matrix)."""
    return float(np.trace(occ).real)


def momentum_distribution(
    occ: np.ndarray, geom: BilayerGeometry, sites: np.ndarray, kgrid: KGrid, layer: str = "A"
) -> np.ndarray:
    """Quasi-momentum distribution (1/N_occ) sum_ij e^{ik(r_i - r_j)} occ_ij.

    Empty sites contribute nothing, as in a site-resolved measurement over
    the full grid.
    """
    pos = (geom.positions_a if layer == "A" else geom.positions_b)[sites, :2]
    phase = np.exp(1j * (kgrid.momenta @ pos.T))  # (n_k, n_occ)
    nk = np.einsum("ki,ik->k", phase, occ @ np.conj(phase).T).real
    return nk / len(sites)


def _single_realization_nk(spec, params, f, seed, realization, times, kgrid):
    geom = build_bilayer(spec)
    fill = sample_filling(geom, f, seed, realization=realization)
    coup = coupling_matrices(geom, fill, params)
    sys = assemble_bdg(coup, geom)
    # flat index of -k for each k on the periodic grid
    L = kgrid.L
    n0 = L // 2
    n = kgrid.indices
    neg = (((-n[:, 1]) + n0) % L) * L + (((-n[:, 0]) + n0) % L)
    nk_t = np.empty((len(times), L * L))
    npair_t = np.empty(len(times))
    for it, t in enumerate(times):
        occ_a, occ_b = evolve_occupations(sys, t)
        nk_a = momentum_distribution(occ_a, geom, sys.sites_a, kgrid, "A")
        nk_b = momentum_distribution(occ_b, geom, sys.sites_b, kgrid, "B")
        nk_t[it] = 0.5 * (nk_a + nk_b[neg])
        npair_t[it] = 0.5 * (occupation_total(occ_a) + occupation_total(occ_b))
    return nk_t, npair_t, fill.n_occupied


def disorder_average_series(
    spec: LatticeSpec,
    params: ModelParams,
    f: float,
    times,
    n_real: int,
    seed: int,
):
    """Disorder-averaged N_k(t) with standard errors over filling draws.

    Layer B enters at -k (pairs carry opposite momenta), so both layers
    contribute to the same distribution.  Returns (nk_mean, nk_stderr,
    npair_mean, mean occupied sites per layer pair).
    """
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    kgrid = k_grid(spec)
    s = np.zeros((len(times), spec.n_sites))
    s2 = np.zeros_like(s)
    npair = np.zeros(len(times))
    nocc = 0.0
    for r in range(n_real):
        nk_t, npair_t, n_occupied = _single_realization_nk(
            spec, params, f, seed, r, times, kgrid
        )
        s += nk_t
        s2 += nk_t * nk_t
        npair += npair_t
        nocc += n_occupied
    mean = s / n_real
    if n_real > 1:
        var = np.maximum(s2 / n_real - mean * mean, 0.0) * n_real / (n_real - 1)
        stderr = np.sqrt(var / n_real)
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr, npair / n_real, nocc / n_real


def disorder_average(
    spec: LatticeSpec,
    params: ModelParams,
    f: float,
    t: float,
    n_real: int,
    seed: int,
):
    """Averaged momentum distribution at a single time; see the series form."""
    mean, stderr, _, _ = disorder_average_series(spec, params, f, [t], n_real, seed)
    return mean[0], stderr[0]
