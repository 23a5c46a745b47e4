"""Forward simulation: preparation, quench evolution, shot synthesis."""

import math

import numpy as np
import pytest

from quenchlab.errors import ValidationError
from quenchlab.field import (
    FieldParameters,
    kg_hamiltonian,
    mode_basis,
    momentum_to_real,
)
from quenchlab.gaussian import mean_energy, von_neumann_entropy
from quenchlab.quench import (
    QuenchProtocol,
    ShotEnsemble,
    evolve_postquench,
    exact_referenced_correlations,
    prepare_prequench,
    referenced_phase_correlations,
    sample_phase_shots,
    simulate_protocol,
)


def test_protocol_validation(params):
    with pytest.raises(ValidationError):
        QuenchProtocol(params, (1.0, 2.0), 10, 0)  # must start at 0
    with pytest.raises(ValidationError):
        QuenchProtocol(params, (0.0, 2.0, 2.0), 10, 0)  # strictly ascending
    with pytest.raises(ValidationError):
        QuenchProtocol(params, (0.0, 2.0), 0, 0)  # shots >= 1


def test_prequench_cold_limit():
    p = FieldParameters(temperature_nk=1e-4)
    g = prepare_prequench(p)
    assert von_neumann_entropy(g) == pytest.approx(0.0, abs=1e-9)


def test_prequench_requires_coupling(params):
    with pytest.raises(ValidationError):
        prepare_prequench(FieldParameters(tunnel_hz=0.0))


def test_prequench_zero_mode_diverges_as_gap_closes(params, basis):
    # <phi_0^2> ~ T / gap^2: quartering J doubles nothing else
    g1 = prepare_prequench(params, basis)
    p_weak = FieldParameters(tunnel_hz=params.tunnel_hz / 4)
    g2 = prepare_prequench(p_weak, mode_basis(p_weak))
    ratio = g2.gamma[0, 0] / g1.gamma[0, 0]
    assert ratio == pytest.approx(4.0, rel=5e-3)


def test_evolution_identity_at_t0(params, basis):
    g0 = prepare_prequench(params, basis)
    gt = evolve_postquench(g0, params, 0.0, basis)
    assert np.array_equal(gt.gamma, g0.gamma)


def test_dirichlet_exact_recurrences(params_dirichlet):
    p = params_dirichlet
    basis = mode_basis(p)
    g0 = prepare_prequench(p, basis)
    period = p.length_um / p.sound_speed
    for t in (period, 2 * period):
        gt = evolve_postquench(g0, p, t, basis)
        assert np.max(np.abs(gt.gamma - g0.gamma)) < 1e-9


def test_neumann_zero_mode_growth(params, basis):
    g0 = prepare_prequench(params, basis)
    n = basis.n_modes
    a = g0.gamma[0, 0]
    b = g0.gamma[n, n]
    c = g0.gamma[0, n]
    for t in (5.0, 33.0, 65.0):
        gt = evolve_postquench(g0, params, t, basis)
        ut = basis.u * t
        assert gt.gamma[0, 0] == pytest.approx(
            a + 2 * ut * c + ut * ut * b, rel=1e-12
        )
        assert gt.gamma[n, n] == pytest.approx(b, rel=1e-12)


def test_global_conservation_on_truth_track(truth_run, params):
    ham = kg_hamiltonian(params, 0.0, truth_run.basis)
    s0 = von_neumann_entropy(truth_run.gamma_modes[0])
    e0 = mean_energy(truth_run.gamma_modes[0], ham)
    for g in truth_run.gamma_modes:
        assert abs(von_neumann_entropy(g) - s0) <= 1e-9 * abs(s0)
        assert abs(mean_energy(g, ham) - e0) <= 1e-9 * abs(e0)


def test_shot_sampling_zero_covariance(params):
    proto = QuenchProtocol(params, (0.0, 5.0), 50, seed=4)
    from quenchlab.gaussian import CovarianceMatrix

    n = params.n_pixels
    zero_qq = np.zeros((2 * n, 2 * n))
    zero_qq[n:, n:] = np.eye(n)
    g = CovarianceMatrix.from_matrix(zero_qq)
    shots = sample_phase_shots(g, proto, 0)
    assert shots.shape == (50, n)
    assert np.max(np.abs(shots)) == 0.0


def test_shot_sampling_deterministic(params):
    proto = QuenchProtocol(params, (0.0, 5.0), 64, seed=99)
    run1 = simulate_protocol(proto)
    run2 = simulate_protocol(proto)
    for a, b in zip(run1.ensemble.profiles, run2.ensemble.profiles):
        assert np.array_equal(a, b)
    # different seed changes the draw
    run3 = simulate_protocol(
        QuenchProtocol(params, (0.0, 5.0), 64, seed=100)
    )
    assert not np.array_equal(run1.ensemble.profiles[0], run3.ensemble.profiles[0])


def test_sample_covariance_within_wishart_error(params):
    """1e5 shots of a 2-pixel state: sample covariance within 3 SE."""
    from quenchlab.gaussian import CovarianceMatrix

    qq = np.array([[2.0, 0.6], [0.6, 1.0]])
    gamma = np.zeros((4, 4))
    gamma[:2, :2] = qq
    gamma[2:, 2:] = np.eye(2)
    g = CovarianceMatrix.from_matrix(gamma)
    p2 = FieldParameters(n_pixels=2)
    n_shots = 100_000
    proto = QuenchProtocol(p2, (0.0,), n_shots, seed=12)
    shots = sample_phase_shots(g, proto, 0)
    sample = shots.T @ shots / n_shots
    for i in range(2):
        for j in range(2):
            se = math.sqrt((qq[i, i] * qq[j, j] + qq[i, j] ** 2) / n_shots)
            assert abs(sample[i, j] - qq[i, j]) < 3 * se


def test_referenced_correlations_reference_row_zero():
    rng = np.random.default_rng(8)
    shots = rng.normal(size=(40, 5))
    phi2 = referenced_phase_correlations(shots, 2)
    assert np.array_equal(phi2[2, :], np.zeros(5))
    assert np.array_equal(phi2[:, 2], np.zeros(5))
    assert np.allclose(phi2, phi2.T)


def test_referenced_correlations_shift_invariance():
    rng = np.random.default_rng(9)
    shots = rng.normal(size=(30, 4))
    shifted = shots + rng.normal(size=(30, 1))  # common offset per shot
    a = referenced_phase_correlations(shots, 0)
    b = referenced_phase_correlations(shifted, 0)
    assert np.allclose(a, b, atol=1e-12)


def test_exact_referenced_expansion():
    rng = np.random.default_rng(10)
    m = rng.normal(size=(5, 5))
    gqq = m @ m.T
    z0 = 1
    phi2 = exact_referenced_correlations(gqq, z0)
    for i in range(5):
        for j in range(5):
            expected = gqq[i, j] - gqq[i, z0] - gqq[z0, j] + gqq[z0, z0]
            assert phi2[i, j] == pytest.approx(expected, abs=1e-12)


def test_exact_referenced_detection_noise_pattern():
    rng = np.random.default_rng(11)
    m = rng.normal(size=(4, 4))
    gqq = m @ m.T
    z0, sig = 0, 0.3
    clean = exact_referenced_correlations(gqq, z0)
    noisy = exact_referenced_correlations(gqq, z0, noise_sigma=sig)
    added = noisy - clean
    n = 4
    expected = sig**2 * (np.eye(n) + np.ones((n, n)))
    expected[z0, :] = 0
    expected[:, z0] = 0
    assert np.allclose(added, expected, atol=1e-12)


def test_referenced_sample_matches_exact_in_large_shot_limit(params):
    """Monte-Carlo consistency of the sampling + referencing chain."""
    proto = QuenchProtocol(params, (0.0,), 200_000, seed=21)
    run = simulate_protocol(proto)
    blurred = run.gamma_real_blurred(0)
    exact = exact_referenced_correlations(blurred.qq, 0)
    sampled = referenced_phase_correlations(run.ensemble.profiles[0], 0)
    scale = np.max(np.abs(exact))
    assert np.max(np.abs(sampled - exact)) < 0.02 * scale


def test_ensemble_validation():
    with pytest.raises(ValidationError):
        ShotEnsemble((0.0,), (np.full((3, 2), np.nan),), 0, True)
    with pytest.raises(ValidationError):
        referenced_phase_correlations(np.zeros((1, 4)), 0)
