"""Pair creation of spin excitations in dipolar bilayers.

Mutually validating solvers for the layer-polarized quench of the dipolar
XXZ bilayer: momentum-space spin-wave theory, real-space BdG with disorder,
discrete truncated Wigner dynamics, and exact diagonalization at desk scale.
"""

__version__ = "0.1.0"

from .lattice import LatticeSpec, BilayerGeometry, FillingRealization, KGrid  # noqa: F401
from .couplings import ModelParams, CouplingMatrices  # noqa: F401
