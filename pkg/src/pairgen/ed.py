"""Exact quantum evolution of small bilayers (<= 12 spins).

Validation harness for the semiclassical and linearized solvers.  The XXZ
Hamiltonian conserves total S^z, so the initial layer-polarized state is
propagated inside its magnetization sector with a dense matrix exponential;
correlation functions are evaluated on the full 2^n amplitude vector.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .lattice import BilayerGeometry, FillingRealization, k_grid
from .couplings import ModelParams, coupling_matrices
from .dtwa import full_coupling_matrix

__all__ = ["EDState", "EdSystem", "exact_evolve", "exact_structure_factor"]

MAX_SPINS = 12


@dataclass
class EDState:
    """Amplitudes over the 2^n site-major spin-z basis (bit i = occupied
    site i up, layer-A sites first)."""

    amplitudes: np.ndarray
    system: "EdSystem"
    t: float


class EdSystem:
    """Sector-resolved dense Hamiltonian for one occupied-site configuration."""

    def __init__(self, geom: BilayerGeometry, fill: FillingRealization, params: ModelParams):
        coup = coupling_matrices(geom, fill, params)
        self.geom = geom
        self.fill = fill
        self.params = params
        self.n_a = len(coup.sites_a)
        self.n_b = len(coup.sites_b)
        self.n = self.n_a + self.n_b
        if self.n > MAX_SPINS:
            raise ValueError(f"{self.n} spins exceeds the exact-solver limit of {MAX_SPINS}")
        self.w = full_coupling_matrix(coup)
        self.sites_a = coup.sites_a
        self.sites_b = coup.sites_b

        # initial state: layer A up, layer B down
        self.psi0_index = (1 << self.n_a) - 1
        sector = self.n_a
        states = np.arange(1 << self.n, dtype=np.int64)
        pop = np.array([bin(s).count("1") for s in states])
        self.basis = states[pop == sector]
        self.index_of = {int(s): i for i, s in enumerate(self.basis)}
        self.h = self._build_sector_hamiltonian()

    def _build_sector_hamiltonian(self) -> np.ndarray:
        dim = len(self.basis)
        h = np.zeros((dim, dim))
        bits = ((self.basis[:, None] >> np.arange(self.n)) & 1).astype(float)
        sz = bits - 0.5
        # Ising part: 2 eta sum_{i<j} V_ij sz_i sz_j, diagonal in this basis
        if self.params.eta != 0.0:
            h[np.diag_indices(dim)] = self.params.eta * np.einsum(
                "bi,ij,bj->b", sz, self.w, sz
            )  # eta * sum_{i != j} = 2 eta * sum_{i < j}
        for a in range(dim):
            s = int(self.basis[a])
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    bi, bj = (s >> i) & 1, (s >> j) & 1
                    if bi != bj:
                        s2 = s ^ ((1 << i) | (1 << j))
                        h[self.index_of[s2], a] += self.w[i, j]
        return h

    def evolve(self, t: float) -> EDState:
        """Propagate the layer-polarized state to time t (units hbar/J)."""
        dim = len(self.basis)
        psi_sec = np.zeros(dim, dtype=complex)
        psi_sec[self.index_of[self.psi0_index]] = 1.0
        psi_sec = sla.expm(-1j * self.h * t) @ psi_sec
        psi = np.zeros(1 << self.n, dtype=complex)
        psi[self.basis] = psi_sec
        return EDState(amplitudes=psi, system=self, t=float(t))

    def _lowering_applied(self, psi: np.ndarray, site: int) -> np.ndarray:
        """s^-_site |psi> on the full basis vector."""
        out = np.zeros_like(psi)
        idx = np.nonzero((np.arange(len(psi)) >> site) & 1)[0]
        out[idx ^ (1 << site)] = psi[idx]
        return out

    def _raising_applied(self, psi: np.ndarray, site: int) -> np.ndarray:
        out = np.zeros_like(psi)
        idx = np.nonzero(((np.arange(len(psi)) >> site) & 1) == 0)[0]
        out[idx | (1 << site)] = psi[idx]
        return out

    def correlation_matrices(self, state: EDState):
        """C^A_ij = <s^-_i s^+_j> over layer A, C^B_ij = <s^+_i s^-_j> over
        layer B: the boson correlation matrices of the excitations."""
        psi = state.amplitudes
        phi_a = np.column_stack(
            [self._raising_applied(psi, i) for i in range(self.n_a)]
        )
        phi_b = np.column_stack(
            [self._lowering_applied(psi, self.n_a + i) for i in range(self.n_b)]
        )
        return np.conj(phi_a).T @ phi_a, np.conj(phi_b).T @ phi_b

    def structure_factor(self, state: EDState):
        """(N^A_k, N^B_k) on the BZ grid, 1/N normalization with N = L^2."""
        c_a, c_b = self.correlation_matrices(state)
        kg = k_grid(self.geom.spec)
        out = []
        for c, sites, layer_pos in (
            (c_a, self.sites_a, self.geom.positions_a),
            (c_b, self.sites_b, self.geom.positions_b),
        ):
            pos = layer_pos[sites, :2]
            phase = np.exp(1j * (kg.momenta @ pos.T))
            nk = np.einsum("ki,ik->k", phase, c @ np.conj(phase).T).real
            out.append(nk / self.geom.spec.n_sites)
        return out[0], out[1]

    def excitation_counts(self, state: EDState):
        """Mean excitation number in each layer."""
        c_a, c_b = self.correlation_matrices(state)
        return float(np.trace(c_a).real), float(np.trace(c_b).real)


def exact_evolve(
    geom: BilayerGeometry, fill: FillingRealization, params: ModelParams, t: float
) -> EDState:
    return EdSystem(geom, fill, params).evolve(t)


def exact_structure_factor(state: EDState):
    return state.system.structure_factor(state)
