"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Criterion 5 sweeps 20 seeds through the full statistical pipeline
and dominates the runtime (a few minutes); everything else is seconds.
"""

import math

import numpy as np
import pytest

from quenchlab.config import AnalysisSettings, ProtocolSettings, RunConfig
from quenchlab.field import (
    FieldParameters,
    PartitionSpec,
    derived_scales,
    effective_beta,
    env_thermo,
    environment_hamiltonian,
    g1d_from_scattering,
    gibbs_energy,
    mode_basis,
    momentum_to_real,
)
from quenchlab.gaussian import (
    mean_energy,
    restrict,
    symplectic_eigenvalues,
    thermal_covariance,
    von_neumann_entropy,
)
from quenchlab.landauer import bootstrap, landauer_quantities, subregion_scan, unitarity_report
from quenchlab.quench import (
    QuenchProtocol,
    evolve_postquench,
    prepare_prequench,
    simulate_protocol,
)
from quenchlab.tomography import (
    exact_correlation_dataset,
    fit_mode_positions,
    scan_reconstruction,
    temperature_fit,
)
from quenchlab.workflows import ReconstructionPipeline, run_forward
from quenchlab.field import relative_entropy_to_gibbs


def _report(num: int, ok: bool, detail: str) -> bool:
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_01_decomposition_identity(truth_run, params, default_times):
    reals = [truth_run.gamma_real(i) for i in range(len(default_times))]
    report = subregion_scan(reals, default_times, range(1, 7), params)
    assert len(report.entries) == 14 * 6
    worst = 0.0
    for e in report.entries:
        gap = abs(e.dSigma_left - e.dSigma_right) / max(1.0, abs(e.dSigma_left))
        worst = max(worst, gap)
    ok = worst <= 1e-9
    assert _report(1, ok, f"max relative decomposition gap {worst:.3e} over 14x6 grid")


def test_criterion_02_unitarity_both_boundaries():
    worst = 0.0
    for bc in ("neumann", "dirichlet"):
        p = FieldParameters(bc=bc)
        t_max = 1.2 * p.length_um / p.sound_speed
        times = tuple(np.linspace(0.0, t_max, 15))
        run = simulate_protocol(
            QuenchProtocol(p, times, 2, seed=0), with_shots=False
        )
        rep = unitarity_report(run.gamma_modes, times, p)
        worst = max(worst, rep.max_rel_drift)
    ok = worst <= 1e-9
    assert _report(2, ok, f"global S/E/D relative drift {worst:.3e} (ct/L up to 1.2)")


def test_criterion_03_dirichlet_recurrence(params_dirichlet):
    p = params_dirichlet
    basis = mode_basis(p)
    g0 = prepare_prequench(p, basis)
    t_rec = p.length_um / p.sound_speed
    gt = evolve_postquench(g0, p, t_rec, basis)
    gap = float(np.max(np.abs(gt.gamma - g0.gamma)))
    r0, rt = momentum_to_real(g0, basis), momentum_to_real(gt, basis)
    worst_delta = 0.0
    for ns in range(1, 7):
        e = landauer_quantities(r0, rt, PartitionSpec(ns, 7), p, t_ms=t_rec)
        for name in ("dS", "beta_dE", "dI", "dD"):
            worst_delta = max(worst_delta, abs(getattr(e, name)))
    ok = gap <= 1e-8 and worst_delta <= 1e-8
    assert _report(
        3, ok, f"|Gamma(L/c) - Gamma(0)|_max {gap:.3e}, worst delta {worst_delta:.3e}"
    )


def test_criterion_04_tomography_oracle(dense_config):
    run = run_forward(dense_config, with_shots=False)
    exact = exact_correlation_dataset(run)
    series = scan_reconstruction(exact, dense_config.field)
    assert not series.failures
    times = list(run.times_ms)
    starts = [t for t in times if t + 32.5 <= 65.0 + 1e-9]
    assert [e.t_ms for e in series.entries] == starts
    assert all(e.n_hold_times == 14 for e in series.entries)
    basis = run.basis
    cols = fit_mode_positions(basis, 6)
    worst = 0.0
    for e in series.entries:
        i = times.index(e.t_ms)
        truth = run.gamma_modes[i]
        for got, want in (
            (e.gamma_modes.qq, truth.qq),
            (e.gamma_modes.pp, truth.pp),
            (e.gamma_modes.qp, truth.qp),
        ):
            gb = got[np.ix_(cols, cols)]
            wb = want[np.ix_(cols, cols)]
            scale = max(1.0, float(np.max(np.abs(wb))))
            worst = max(worst, float(np.max(np.abs(gb - wb))) / scale)
    ok = worst <= 1e-6
    assert _report(
        4, ok,
        f"worst fitted-block relative error {worst:.3e} over {len(series.entries)} windows",
    )


def test_criterion_05_statistical_reconstruction():
    n_seeds = 20
    n_resamples = 299
    base = RunConfig(
        protocol=ProtocolSettings(n_times=27, shots_per_time=500),
        analysis=AnalysisSettings(splits=(3,)),
    ).validate()
    truth_run = run_forward(base, with_shots=False)
    truth_reals = [truth_run.gamma_real(i) for i in range(len(truth_run.times_ms))]
    times = list(truth_run.times_ms)
    truth_report = subregion_scan(truth_reals, times, (3,), base.field)
    truth_di = {e.t_ms: e.dI for e in truth_report.entries}

    di_hits = di_total = 0
    t_hits = 0
    for seed in range(n_seeds):
        cfg = RunConfig(
            protocol=ProtocolSettings(n_times=27, shots_per_time=500, seed=1000 + seed),
            analysis=AnalysisSettings(splits=(3,), bootstrap_seed=seed),
        ).validate()
        run = run_forward(cfg, with_shots=True)
        pipe = ReconstructionPipeline(cfg, quantities=("dI",), splits=(3,))
        out = bootstrap(run.ensemble, pipe, n_resamples=n_resamples, seed=seed)
        for key, br in out.items():
            if not key.startswith("dI|"):
                continue
            t = float(key.split("|")[1].split("=")[1])
            if t == 0.0:
                continue
            di_total += 1
            if br.low <= truth_di[t] <= br.high:
                di_hits += 1
        if out["temperature_nk"].contains(49.0):
            t_hits += 1
    di_frac = di_hits / di_total
    t_frac = t_hits / n_seeds
    ok = di_frac >= 0.5 and t_frac >= 0.5
    assert _report(
        5, ok,
        f"truth dI inside bootstrap band in {di_frac:.0%} of {di_total} cells; "
        f"T=49 nK inside band for {t_frac:.0%} of {n_seeds} seeds",
    )


def test_criterion_06_derived_constants():
    p = FieldParameters()
    s = derived_scales(p)
    checks = [
        ("c", s["c_um_per_ms"], 2.049, 1e-3),
        ("l_C", s["healing_length_um"], 6.21, 1e-2),
        ("lambda_T", s["phase_coherence_length_um"], 16.1, 1e-2),
        ("u", s["zero_mode_rate_rad_per_ms"], 3.33e-3, 1e-2),
        ("g1d", g1d_from_scattering(p), 8.594e-39, 1e-2),
    ]
    ok = True
    parts = []
    for name, got, want, tol in checks:
        rel = abs(got - want) / want
        ok &= rel <= tol
        parts.append(f"{name}={got:.4g} ({rel:.2e})")
    assert _report(6, ok, ", ".join(parts))


def test_criterion_07_quasiparticle_invariants():
    p = FieldParameters(n_pixels=128, bc="dirichlet")
    basis = mode_basis(p)
    g0 = prepare_prequench(p, basis)
    r0 = momentum_to_real(g0, basis)
    split = PartitionSpec(32, 128)  # L_S / L = 0.25
    c = p.sound_speed
    l_s = 32 * p.dz
    l_e = 96 * p.dz

    def di_at(t):
        gt = evolve_postquench(g0, p, t, basis)
        rt = momentum_to_real(gt, basis)
        return landauer_quantities(r0, rt, split, p, t_ms=t).dI

    rise_t = np.linspace(0.2 * l_s / c, 0.9 * l_s / c, 12)
    rise = np.array([di_at(t) for t in rise_t])
    coef = np.polyfit(rise_t, rise, 1)
    resid = rise - np.polyval(coef, rise_t)
    r2 = 1.0 - np.sum(resid**2) / np.sum((rise - rise.mean()) ** 2)

    plateau_t = np.linspace(1.1 * l_s / c, 0.9 * l_e / c, 12)
    plateau = np.array([di_at(t) for t in plateau_t])
    slope_plateau = np.polyfit(plateau_t, plateau, 1)[0]
    ratio = abs(slope_plateau) / abs(coef[0])
    ok = r2 >= 0.99 and ratio <= 0.05
    assert _report(
        7, ok, f"rise R^2 = {r2:.5f}, plateau/rise slope ratio = {ratio:.3f}"
    )


def test_criterion_08_zero_mode_law(params, basis):
    g0 = prepare_prequench(params, basis)
    n = basis.n_modes
    a, b, cc = g0.gamma[0, 0], g0.gamma[n, n], g0.gamma[0, n]
    u = basis.u
    worst = 0.0
    for t in np.linspace(0.0, 65.0, 27):
        gt = evolve_postquench(g0, params, t, basis)
        resid = gt.gamma[0, 0] - a - 2 * u * t * cc - u * u * t * t * b
        worst = max(worst, abs(resid))
    ok = worst <= 1e-10
    assert _report(8, ok, f"max zero-mode variance-law residual {worst:.3e}")


def test_criterion_09_thermodynamic_solvers(params, params_dirichlet):
    split = PartitionSpec(3, 7)
    worst_rt = 0.0
    for beta in np.logspace(-2, 2, 17) * params.beta:
        e = gibbs_energy(beta, split, params)
        worst_rt = max(
            worst_rt, abs(effective_beta(e, split, params) - beta) / beta
        )
    ham_d = environment_hamiltonian(params_dirichlet, split)
    gibbs_state = thermal_covariance(ham_d, params_dirichlet.beta)
    d_gibbs = relative_entropy_to_gibbs(
        gibbs_state, params_dirichlet.beta, split, params_dirichlet
    )
    th = env_thermo(params.beta, split, params)
    zm_rel = abs(th.zero_mode_energy - 1.0 / (2 * params.beta)) * 2 * params.beta
    ok = worst_rt <= 1e-9 and abs(d_gibbs) <= 1e-8 and zm_rel <= 1e-3
    assert _report(
        9, ok,
        f"beta round-trip {worst_rt:.2e}, D(Gibbs||Gibbs) {abs(d_gibbs):.2e}, "
        f"zero-mode energy vs 1/(2 beta) {zm_rel:.2e}",
    )


def test_criterion_10_energetic_term_smallness(params, basis):
    t_star = 0.19 * params.length_um / params.sound_speed
    g0 = prepare_prequench(params, basis)
    gt = evolve_postquench(g0, params, t_star, basis)
    e = landauer_quantities(
        momentum_to_real(g0, basis),
        momentum_to_real(gt, basis),
        PartitionSpec(1, 7),
        params,
        t_ms=t_star,
    )
    ratio = abs(e.beta_dE) / abs(e.dS)
    ok = ratio < 0.2
    assert _report(10, ok, f"|beta_E dE_E| / |dS| = {ratio:.3f} at ct/L = 0.19, L_S/L = 1/7")


def test_criterion_11_physicality_everywhere(dense_config):
    floor = 0.5 - 1e-8
    checked = 0
    worst = np.inf

    def check(cov):
        nonlocal checked, worst
        lam = symplectic_eigenvalues(cov)[-1]
        checked += 1
        worst = min(worst, lam)
        return lam >= floor

    ok = True
    # noiseless: truth track and oracle reconstruction, no projections expected
    run = run_forward(dense_config, with_shots=False)
    for i in range(len(run.times_ms)):
        ok &= check(run.gamma_modes[i])
        ok &= check(run.gamma_real(i))
    series = scan_reconstruction(
        exact_correlation_dataset(run), dense_config.field
    )
    projected = [e.projected for e in series.entries]
    ok &= sum(projected) < len(projected)
    noiseless_projected = sum(projected)
    for e in series.entries:
        ok &= check(e.gamma_modes)
        ok &= check(e.gamma_real)
    # statistical pipeline: every reconstructed state passes after projection
    noisy = run_forward(dense_config, with_shots=True)
    noisy_series = scan_reconstruction(noisy.ensemble, dense_config.field)
    for e in noisy_series.entries:
        ok &= check(e.gamma_modes)
        ok &= check(e.gamma_real)
    assert _report(
        11, ok,
        f"{checked} states, min lambda {worst:.12f}, "
        f"{noiseless_projected}/{len(projected)} noiseless windows projected",
    )
