"""Bilayer square-lattice geometry, Brillouin-zone grids and random filling.

All lengths are in units of the in-plane spacing ``a``; layer A sits at
``z = a_Z`` and layer B at ``z = 0``.  Sites are ordered row-major by
(y, x) within each layer, with global indices running over layer A first.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatticeError",
    "LatticeSpec",
    "BilayerGeometry",
    "FillingRealization",
    "KGrid",
    "build_bilayer",
    "sample_filling",
    "k_grid",
    "rng_stream",
]

# rng_stream domain tags, so filling and trajectory streams never collide
DOMAIN_FILLING = 1
DOMAIN_TRAJECTORY = 2


class LatticeError(ValueError):
    """Invalid lattice specification or filling parameters."""


@dataclass(frozen=True)
class LatticeSpec:
    """Square bilayer: L sites per side, layer separation a_Z (units of a)."""

    L: int
    a_Z: float
    boundary: str = "periodic"
    a: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise LatticeError(f"L must be an integer >= 2, got {self.L}")
        if not self.a_Z > 0:
            raise LatticeError(f"a_Z must be positive, got {self.a_Z}")
        if not self.a > 0:
            raise LatticeError(f"a must be positive, got {self.a}")
        if self.boundary not in ("periodic", "open"):
            raise LatticeError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        """Sites per layer, N = L^2."""
        return self.L * self.L

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"


@dataclass(frozen=True)
class BilayerGeometry:
    """Site positions of both layers; index i = y*L + x within a layer."""

    spec: LatticeSpec
    positions_a: np.ndarray  # (N, 3), layer A at z = a_Z
    positions_b: np.ndarray  # (N, 3), layer B at z = 0

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites


@dataclass(frozen=True)
class FillingRealization:
    """Boolean occupancy masks for one random filling draw."""

    mask_a: np.ndarray  # (N,) bool
    mask_b: np.ndarray
    f: float
    seed: int
    realization: int = 0

    @property
    def sites_a(self) -> np.ndarray:
        return np.flatnonzero(self.mask_a)

    @property
    def sites_b(self) -> np.ndarray:
        return np.flatnonzero(self.mask_b)

    @property
    def n_occupied(self) -> int:
        """Occupied sites summed over both layers."""
        return int(self.mask_a.sum() + self.mask_b.sum())


@dataclass(frozen=True)
class KGrid:
    """First-Brillouin-zone grid k = 2*pi*n/L, n in {-floor(L/2), ..., ceil(L/2)-1}.

    ``momenta`` is (L^2, 2) with flat index iy*L + ix; ``indices`` holds the
    integer labels n = (nx, ny) in the same order.
    """

    L: int
    momenta: np.ndarray  # (L^2, 2) in units 1/a
    indices: np.ndarray  # (L^2, 2) integer n

    def grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape a flat per-k array to (L, L) indexed [iy, ix]."""
        return np.asarray(values).reshape(self.L, self.L)

    def fft_index(self) -> np.ndarray:
        """Flat index into numpy fft2 output for each grid point."""
        n = self.indices
        return ((n[:, 1] % self.L) * self.L + (n[:, 0] % self.L)).astype(np.intp)


def build_bilayer(spec: LatticeSpec) -> BilayerGeometry:
    """Deterministic bilayer geometry; positions in units of a."""
    L = spec.L
    y, x = np.divmod(np.arange(L * L), L)
    pos_a = np.column_stack([x, y, np.full(L * L, spec.a_Z)]).astype(float)
    pos_b = np.column_stack([x, y, np.zeros(L * L)]).astype(float)
    return BilayerGeometry(spec=spec, positions_a=pos_a, positions_b=pos_b)


def rng_stream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Counter-based (Philox) stream keyed by (seed, domain, index).

    Streams with distinct keys are statistically independent, so
    realizations/trajectories can be generated in any order or in parallel.
    """
    key = (int(seed) & (2**64 - 1)) | (int(index) << 64) | (int(domain) << 120)
    return np.random.Generator(np.random.Philox(key=key))


def sample_filling(
    geom: BilayerGeometry,
    f: float,
    seed: int,
    realization: int = 0,
    fixed_count: bool = False,
) -> FillingRealization:
    """Draw occupancy masks with per-site probability f, layers independent.

    ``fixed_count=True`` instead occupies exactly round(f*N) sites per layer
    (variance reduction for small-sample tests).
    """
    if not 0 < f <= 1:
        raise LatticeError(f"filling fraction must be in (0, 1], got {f}")
    N = geom.n_sites
    if f == 1.0:
        ones = np.ones(N, dtype=bool)
        return FillingRealization(ones, ones.copy(), f, seed, realization)
    rng = rng_stream(seed, DOMAIN_FILLING, realization)
    if fixed_count:
        n_occ = int(round(f * N))
        masks = []
        for _ in range(2):
            m = np.zeros(N, dtype=bool)
            m[rng.choice(N, size=n_occ, replace=False)] = True
            masks.append(m)
        mask_a, mask_b = masks
    else:
        mask_a = rng.random(N) < f
        mask_b = rng.random(N) < f
    return FillingRealization(mask_a, mask_b, f, seed, realization)


def k_grid(spec: LatticeSpec) -> KGrid:
    """Brillouin-zone grid of the L x L cell; exactly L^2 momenta."""
    L = spec.L
    n = np.arange(-(L // 2), (L + 1) // 2)
    ny, nx = np.meshgrid(n, n, indexing="ij")
    indices = np.column_stack([nx.ravel(), ny.ravel()])
    momenta = 2.0 * np.pi * indices / L
    return KGrid(L=L, momenta=momenta, indices=indices)
