"""Derived quantities of the two-mode squeezed state and solver comparisons.

Evolving a single resonant pair mode from vacuum produces the state
(1/cosh r) sum_n tanh^n(r) |n, n> with squeezing parameter r = |omega| t.
Its single-mode marginal is exactly thermal, which fixes the effective
temperature, and matching the squeezing matrix to a Rindler transformation
fixes an equivalent frame acceleration.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TfdReport",
    "squeezing_parameter",
    "tfd_temperature",
    "thermal_weights",
    "tfd_report",
    "unruh_acceleration",
    "rindler_squeezing",
    "compare_solvers",
]


def squeezing_parameter(omega_abs: float, t: float) -> float:
    """r = |omega| t (hbar = 1)."""
    if t <= 0:
        raise ValueError("squeezing parameter requires t > 0")
    return float(abs(omega_abs) * t)


def _log_coth(r: float) -> float:
    # log(coth r) = log1p(2 / (e^{2r} - 1)): exact for large r where tanh
    # saturates to 1 in floating point
    return float(np.log1p(2.0 / np.expm1(2.0 * r)))


def tfd_temperature(omega_abs: float, t: float, energy: float = 1.0) -> float:
    """Effective temperature E / (2 kB log coth(|omega| t)), in units E/kB."""
    r = squeezing_parameter(omega_abs, t)
    return float(energy / (2.0 * _log_coth(r)))


def thermal_weights(r: float, m: int) -> np.ndarray:
    """First m pair-number weights tanh^{2n}(r)/cosh^2(r) of the state.

    The full set is normalized; the truncation tail equals tanh^{2m}(r).
    """
    n = np.arange(m)
    th = np.tanh(r)
    return th ** (2 * n) / np.cosh(r) ** 2


@dataclass(frozen=True)
class TfdReport:
    omega_abs: float
    t: float
    r: float
    t_eff: float  # units E/kB
    weights: np.ndarray
    tail: float  # exact weight beyond the truncation

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum() + self.tail)


def tfd_report(omega_abs: float, t: float, energy: float = 1.0, m: int = 32) -> TfdReport:
    r = squeezing_parameter(omega_abs, t)
    return TfdReport(
        omega_abs=float(abs(omega_abs)), t=float(t), r=r,
        t_eff=tfd_temperature(omega_abs, t, energy),
        weights=thermal_weights(r, m), tail=float(np.tanh(r) ** (2 * m)),
    )


def unruh_acceleration(omega_abs: float, t: float, omega_field: float = 1.0, c: float = 1.0) -> float:
    """Frame acceleration whose Rindler transformation matches the squeezing:
    a = -pi omega c / log(tanh(|omega| t))."""
    r = squeezing_parameter(omega_abs, t)
    return float(np.pi * omega_field * c / _log_coth(r))


def rindler_squeezing(a: float, omega_field: float = 1.0, c: float = 1.0) -> float:
    """Inverse map: squeezing parameter with tanh(r) = exp(-pi omega c / a)."""
    if a <= 0:
        raise ValueError("acceleration must be positive")
    return float(np.arctanh(np.exp(-np.pi * omega_field * c / a)))


def _resample(times, values, target):
    values = np.asarray(values)
    if values.ndim == 1:
        return np.interp(target, times, values)
    return np.column_stack([np.interp(target, times, col) for col in values.T])


def compare_solvers(
    reference: dict,
    candidate: dict,
    n_sites: int,
    window_frac: float = 0.02,
    peak_frac: float = 0.5,
    floor: float = 0.05,
) -> dict:
    """Compare two solvers' series of N_k(t) and N_pair(t).

    Each series is a dict with keys ``times`` (n_t,), ``nk`` (n_t, n_k) and
    ``npair`` (n_t,).  The candidate is resampled onto the reference grid
    restricted to the overlap.  Deviations are reported for modes above
    ``floor`` inside regime I, the window where N_pair <= window_frac *
    n_sites; the peak-set overlap (Jaccard) is taken at the last such time.
    """
    if reference["nk"].shape[1] != candidate["nk"].shape[1]:
        raise ValueError("mismatched mode grids between solvers")
    t_ref = np.asarray(reference["times"], dtype=float)
    lo = max(t_ref[0], candidate["times"][0])
    hi = min(t_ref[-1], candidate["times"][-1])
    times = t_ref[(t_ref >= lo) & (t_ref <= hi)]
    nk_r = _resample(reference["times"], reference["nk"], times)
    nk_c = _resample(candidate["times"], candidate["nk"], times)
    np_r = _resample(reference["times"], reference["npair"], times)

    in_window = np_r <= window_frac * n_sites
    regime1_end = float(times[in_window][-1]) if in_window.any() else None

    mask = in_window[:, None] & (nk_r >= floor)
    rel = np.zeros_like(nk_r)
    np.divide(np.abs(nk_c - nk_r), nk_r, out=rel, where=nk_r > 0)
    max_rel = float(rel[mask].max()) if mask.any() else 0.0

    overlap = None
    if in_window.any():
        i = int(np.nonzero(in_window)[0][-1])
        pa = set(np.flatnonzero(nk_r[i] >= peak_frac * nk_r[i].max()))
        pb = set(np.flatnonzero(nk_c[i] >= peak_frac * nk_c[i].max()))
        union = pa | pb
        overlap = float(len(pa & pb) / len(union)) if union else 1.0
    return {
        "times": times,
        "regime1_end": regime1_end,
        "max_rel_deviation": max_rel,
        "peak_overlap": overlap,
        "n_compared": int(mask.sum()),
    }
