import numpy as np
import pytest

from pairgen.lattice import FillingRealization, LatticeSpec, build_bilayer, sample_filling
from pairgen.couplings import ModelParams, coupling_matrices
from pairgen import dtwa
from pairgen.ed import EdSystem, exact_evolve, exact_structure_factor


def one_pair(theta0=0.0, eta=0.0):
    geom = build_bilayer(LatticeSpec(L=2, a_Z=2.0, boundary="open"))
    mask = np.zeros(4, dtype=bool)
    mask[0] = True
    fill = FillingRealization(mask, mask.copy(), f=0.25, seed=0)
    return geom, fill, ModelParams(theta0=theta0, eta=eta)


def bilayer_2x2(theta0=np.pi / 8, a_Z=1.0):
    geom = build_bilayer(LatticeSpec(L=2, a_Z=a_Z, boundary="open"))
    fill = sample_filling(geom, 1.0, seed=0)
    return geom, fill, ModelParams(theta0=theta0)


def test_two_level_rabi():
    geom, fill, params = one_pair()
    sys = EdSystem(geom, fill, params)
    v = coupling_matrices(geom, fill, params).v_ab[0, 0]
    for t in (0.2, 1.0, 3.0):
        state = sys.evolve(t)
        _, n_b = sys.excitation_counts(state)
        assert n_b == pytest.approx(np.sin(v * t) ** 2, abs=1e-12)


def test_ising_term_only_phases():
    # within the S^z sector of two spins the Ising term is a constant shift
    _, _, params0 = one_pair(eta=0.0)
    geom, fill, params1 = one_pair(eta=0.8)
    for t in (0.5, 1.7):
        n0 = EdSystem(geom, fill, params0).excitation_counts(exact_evolve(geom, fill, params0, t))
        n1 = EdSystem(geom, fill, params1).excitation_counts(exact_evolve(geom, fill, params1, t))
        assert n0[1] == pytest.approx(n1[1], abs=1e-12)


def test_norm_and_sector_conserved():
    geom, fill, params = bilayer_2x2()
    sys = EdSystem(geom, fill, params)
    state = sys.evolve(2.3)
    psi = state.amplitudes
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    # support stays in the initial magnetization sector
    outside = np.ones(len(psi), dtype=bool)
    outside[sys.basis] = False
    assert np.abs(psi[outside]).max() == 0.0


def test_spin_limit():
    geom = build_bilayer(LatticeSpec(L=3, a_Z=2.0, boundary="open"))
    fill = sample_filling(geom, 1.0, seed=0)  # 18 spins
    with pytest.raises(ValueError):
        EdSystem(geom, fill, ModelParams())


def test_structure_factor_single_pair():
    geom, fill, params = one_pair()
    sys = EdSystem(geom, fill, params)
    v = coupling_matrices(geom, fill, params).v_ab[0, 0]
    state = sys.evolve(1.2)
    nk_a, nk_b = exact_structure_factor(state)
    # single excitation spread over the N = L^2 normalization
    assert np.allclose(nk_b, np.sin(v * 1.2) ** 2 / 4.0, atol=1e-12)
    assert np.allclose(nk_a, nk_b, atol=1e-12)
    nk0_a, nk0_b = exact_structure_factor(sys.evolve(0.0))
    assert np.allclose(nk0_a, 0.0, atol=1e-14)
    assert np.allclose(nk0_b, 0.0, atol=1e-14)


def test_linearization_window_sinh_vs_sin():
    # Bogoliubov predicts sinh^2(|V| t) for a single pair where the exact
    # answer is sin^2(V t): they agree at O(t^2) and depart at O(t^4)
    geom, fill, params = one_pair()
    sys = EdSystem(geom, fill, params)
    v = abs(coupling_matrices(geom, fill, params).v_ab[0, 0])
    for t in (0.01, 0.05):
        exact = sys.excitation_counts(sys.evolve(t))[1]
        bogo = np.sinh(v * t) ** 2
        assert abs(bogo - exact) < 2.0 * (v * t) ** 4
    t_late = 2.0 / v
    exact = sys.excitation_counts(sys.evolve(t_late))[1]
    assert abs(np.sinh(v * t_late) ** 2 - exact) > 1.0


def test_short_time_law_series_oracle():
    # leading N_pair growth: per-site coefficient sum |V_AB|^2 / N
    geom, fill, params = bilayer_2x2()
    coup = coupling_matrices(geom, fill, params)
    target = np.sum(coup.v_ab**2) / geom.n_sites
    sys = EdSystem(geom, fill, params)
    ts = np.linspace(0.01, 0.05, 5)
    vals = []
    for t in ts:
        a, b = sys.excitation_counts(sys.evolve(t))
        vals.append(0.5 * (a + b) / geom.n_sites)
    coef = np.linalg.lstsq(
        np.column_stack([ts**2, ts**4]), np.array(vals), rcond=None
    )[0][0]
    assert coef == pytest.approx(target, rel=1e-4)


def test_ed_vs_dtwa_2x2():
    # semiclassical dynamics tracks the exact 8-spin solution to ~10%
    geom, fill, params = bilayer_2x2(theta0=3 * np.pi / 8)
    coup = coupling_matrices(geom, fill, params)
    sys = EdSystem(geom, fill, params)
    ts = np.linspace(0.0, 1.0, 5)
    series = dtwa.run_experiment(
        geom, fill, params, coup, ts, n_traj=10_000, seed=7, rtol=1e-8
    )
    for i, t in enumerate(ts[1:], start=1):
        a, b = sys.excitation_counts(sys.evolve(t))
        exact = 0.5 * (a + b)
        assert abs(series.npair[i] - exact) / exact < 0.10
