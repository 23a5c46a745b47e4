"""End-to-end pipelines shared by the command-line entry points.

simulate -> dataset document -> reconstruct -> results bundle, plus the
bootstrap wrapper that reruns the reconstruction + analysis pipeline on
resampled shot ensembles with precomputed window designs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular

from . import __version__
from .config import RunConfig, config_from_dict, config_hash, resolved_dict
from .errors import UnderdeterminedFit, ValidationError
from .field import (
    FieldParameters,
    PartitionSpec,
    mode_basis,
    momentum_to_real,
)
from .gaussian import CovarianceMatrix
from .landauer import (
    bootstrap,
    extremality_report,
    partition_context,
    subregion_scan,
    unitarity_report,
)
from .quench import (
    ForwardRun,
    QuenchProtocol,
    ShotEnsemble,
    prepare_prequench,
    referenced_phase_correlations,
    simulate_protocol,
)
from .tomography import (
    ReconstructionSeries,
    blurred_phase_table,
    build_window_design,
    exact_correlation_dataset,
    project_physical,
    scan_reconstruction,
    sheared_zero_mode_block,
    temperature_fit,
    window_start_indices,
)

DATASET_SCHEMA = "quenchlab.dataset.v1"
RECONSTRUCTION_SCHEMA = "quenchlab.reconstruction.v1"
RESULTS_SCHEMA = "quenchlab.results.v1"
RESULTS_PAIR_SCHEMA = "quenchlab.results_pair.v1"


def protocol_from_config(config: RunConfig) -> QuenchProtocol:
    return QuenchProtocol(
        params=config.field,
        time_grid_ms=config.protocol.times_ms,
        shots_per_time=config.protocol.shots_per_time,
        seed=config.protocol.seed,
        detection_noise_sigma=config.protocol.detection_noise_sigma,
    )


def run_forward(config: RunConfig, with_shots: bool = True) -> ForwardRun:
    return simulate_protocol(protocol_from_config(config), with_shots=with_shots)


# --- documents ---------------------------------------------------------------


def dataset_document(run: ForwardRun, config: RunConfig) -> dict:
    doc = {
        "schema": DATASET_SCHEMA,
        "config": resolved_dict(config),
        "config_hash": config_hash(config),
        "code_version": __version__,
        "seed": config.protocol.seed,
        "times_ms": list(run.times_ms),
        "psf_applied": run.ensemble.psf_applied if run.ensemble else False,
        "detection_noise_sigma": config.protocol.detection_noise_sigma,
        "truth_gamma_modes": [np.asarray(g.gamma) for g in run.gamma_modes],
    }
    doc["shots"] = (
        [np.asarray(p) for p in run.ensemble.profiles] if run.ensemble else None
    )
    return doc


def dataset_from_document(doc: dict):
    """Returns (config, ensemble | None, truth mode-space states)."""
    if doc.get("schema") != DATASET_SCHEMA:
        raise ValidationError(f"not a dataset document: {doc.get('schema')!r}")
    config = config_from_dict(doc["config"])
    truth = [CovarianceMatrix.from_matrix(g) for g in doc["truth_gamma_modes"]]
    ensemble = None
    if doc.get("shots") is not None:
        ensemble = ShotEnsemble(
            times_ms=tuple(doc["times_ms"]),
            profiles=tuple(np.asarray(s) for s in doc["shots"]),
            seed=int(doc["seed"]),
            psf_applied=bool(doc["psf_applied"]),
            detection_noise_sigma=float(doc["detection_noise_sigma"]),
        )
    return config, ensemble, truth


def run_from_document(doc: dict) -> tuple[RunConfig, ForwardRun]:
    config, ensemble, truth = dataset_from_document(doc)
    run = ForwardRun(
        protocol=protocol_from_config(config),
        basis=mode_basis(config.field),
        gamma_modes=tuple(truth),
        ensemble=ensemble,
    )
    return config, run


def reconstruction_document(
    series: ReconstructionSeries, config: RunConfig, t_fit_nk: Optional[float]
) -> dict:
    return {
        "schema": RECONSTRUCTION_SCHEMA,
        "config": resolved_dict(config),
        "config_hash": config_hash(config),
        "code_version": __version__,
        "temperature_fit_nk": t_fit_nk,
        "entries": [
            {
                "t_ms": e.t_ms,
                "gamma_modes": np.asarray(e.gamma_modes.gamma),
                "gamma_real": np.asarray(e.gamma_real.gamma),
                "residual_norm": e.residual_norm,
                "condition_number": e.condition_number,
                "projected": e.projected,
                "n_hold_times": e.n_hold_times,
            }
            for e in series.entries
        ],
        "failures": [list(f) for f in series.failures],
    }


# --- reconstruction ----------------------------------------------------------


def run_reconstruction(
    config: RunConfig,
    ensemble: Optional[ShotEnsemble] = None,
    run: Optional[ForwardRun] = None,
    noiseless: bool = False,
) -> tuple[ReconstructionSeries, Optional[float]]:
    """Reconstruct from shots, or from exact correlations when noiseless.

    Returns the series and the fitted initial temperature (None if the
    grid's first window failed).
    """
    params = config.field
    if noiseless:
        if run is None:
            raise ValidationError("noiseless reconstruction needs the ground truth")
        dataset = exact_correlation_dataset(run, config.tomography.reference_pixel)
    else:
        if ensemble is None:
            raise ValidationError("reconstruction needs a shot ensemble")
        dataset = ensemble
    series = scan_reconstruction(
        dataset,
        params,
        window_length_ms=config.tomography.window_ms,
        n_modes_fit=config.tomography.n_modes_fit,
        z0=config.tomography.reference_pixel,
        ridge=config.tomography.ridge,
        zero_mode_source=config.tomography.zero_mode_source,
    )
    t_fit = None
    if series.entries and abs(series.entries[0].t_ms) < 1e-9:
        t_fit = temperature_fit(series.entries[0].gamma_modes, params).temperature_nk
    return series, t_fit


def theory_beta_map(
    params: FieldParameters, splits: Sequence[int], temperature_nk: Optional[float] = None
) -> dict:
    """beta_E per split from a theory thermal state at the given temperature."""
    if temperature_nk is not None:
        params = replace(params, temperature_nk=float(temperature_nk))
    basis = mode_basis(params)
    gamma0_real = momentum_to_real(prepare_prequench(params, basis), basis)
    out = {}
    for ns in splits:
        split = PartitionSpec(int(ns), params.n_pixels)
        ctx = partition_context(params, split, gamma0_real)
        out[int(ns)] = ctx.beta_env
    return out


# --- analysis ----------------------------------------------------------------


def _entry_dict(entry) -> dict:
    d = dataclasses.asdict(entry)
    if d.get("ci") is None:
        d.pop("ci", None)
    return d


def analyze_states(
    gammas_real: Sequence[CovarianceMatrix],
    gamma_modes: Optional[Sequence[CovarianceMatrix]],
    times_ms: Sequence[float],
    config: RunConfig,
    kind: str,
    temperature_fit_nk: Optional[float] = None,
    projected_fraction: Optional[float] = None,
) -> dict:
    """Results bundle: Landauer grid, conservation checks, diagnostics."""
    params = config.field
    splits = config.analysis.splits
    beta_ref = None
    if config.analysis.beta_source == "theory":
        beta_ref = theory_beta_map(params, splits, temperature_fit_nk)
    report = subregion_scan(gammas_real, times_ms, splits, params, beta_ref)
    bundle = {
        "schema": RESULTS_SCHEMA,
        "kind": kind,
        "metadata": {
            "config": resolved_dict(config),
            "config_hash": config_hash(config),
            "code_version": __version__,
            "seed": config.protocol.seed,
            "c_um_per_ms": params.sound_speed,
            "length_um": params.length_um,
            "boundary": params.bc,
            "temperature_fit_nk": temperature_fit_nk,
            "energy_unit": "hbar * rad/ms",
        },
        "landauer": {
            "times_ms": [float(t) for t in times_ms],
            "splits": [int(s) for s in splits],
            "entries": [_entry_dict(e) for e in report.entries],
            "failures": [list(f) for f in report.failures],
        },
        "diagnostics": {
            "decomposition_max_gap": report.max_decomposition_gap,
            "projected_fraction": projected_fraction,
        },
    }
    if gamma_modes is not None:
        ur = unitarity_report(gamma_modes, times_ms, params)
        bundle["unitarity"] = {
            "times_ms": [r.t_ms for r in ur.rows],
            "entropy": [r.entropy for r in ur.rows],
            "energy": [r.energy for r in ur.rows],
            "rel_entropy": [r.rel_entropy for r in ur.rows],
            "beta_reference": ur.beta_reference,
            "max_rel_drift": ur.max_rel_drift,
        }
        xr = extremality_report(
            gammas_real, times_ms, PartitionSpec(int(splits[0]), params.n_pixels), params
        )
        bundle["extremality"] = {
            "rows": [dataclasses.asdict(r) for r in xr.rows],
            "max_gap": xr.max_gap,
            "notes": list(xr.notes),
        }
    return bundle


def attach_bootstrap(
    bundle: dict,
    results: dict,
    config: RunConfig,
    n_resamples: int,
) -> dict:
    """Merge per-quantity bootstrap intervals into a results bundle."""
    n_failed = results.pop("__n_failed__", 0)
    by_cell: dict = {}
    for key, br in results.items():
        if key == "temperature_nk":
            bundle["metadata"]["temperature_fit_ci_nk"] = [br.low, br.high]
            continue
        name, t_s, ns_s = key.split("|")
        t = float(t_s.split("=")[1])
        ns = int(ns_s.split("=")[1])
        by_cell.setdefault((t, ns), {})[name] = [br.low, br.high]
    for entry in bundle["landauer"]["entries"]:
        cell = (entry["t_ms"], entry["n_system_pixels"])
        if cell in by_cell:
            entry["ci"] = by_cell[cell]
    bundle["bootstrap"] = {
        "n_resamples": n_resamples,
        "alpha": config.analysis.bootstrap_alpha,
        "seed": config.analysis.bootstrap_seed,
        "n_failed": n_failed,
    }
    return bundle


# --- resampling pipeline ------------------------------------------------------

_BETA_QUANTITIES = {"beta_dE", "dD", "dSigma_left", "dSigma_right"}


@dataclass
class _Window:
    t_ms: float
    members: tuple
    q_factor: np.ndarray
    r_factor: np.ndarray
    zm_block: Optional[np.ndarray]
    design: object


class ReconstructionPipeline:
    """Shot ensemble -> named scalars, built once and rerun per resample.

    Window designs are QR-factorized up front; each call only recomputes
    referenced correlations, triangular solves, physical projection and the
    requested Landauer quantities.
    """

    def __init__(
        self,
        config: RunConfig,
        quantities: Sequence[str] = ("dS", "beta_dE", "dI", "dD", "dSigma_left", "dSigma_right"),
        splits: Optional[Sequence[int]] = None,
        include_temperature: bool = True,
    ):
        self.config = config
        params = config.field
        self.params = params
        self.quantities = tuple(quantities)
        self.splits = tuple(int(s) for s in (splits or config.analysis.splits))
        self.include_temperature = include_temperature
        self.basis = mode_basis(params)
        self.z0 = config.tomography.reference_pixel
        self.f_table = blurred_phase_table(self.basis, params.psf_sigma_um)
        self.n_modes_fit = config.tomography.n_modes_fit or int(
            np.count_nonzero(self.basis.omega > 0)
        )
        times = np.asarray(config.protocol.times_ms)
        self.times = times
        self.windows = []
        for i in window_start_indices(times, config.tomography.window_ms):
            t0 = times[i]
            members = np.flatnonzero(
                (times >= t0 - 1e-9) & (times <= t0 + config.tomography.window_ms + 1e-9)
            )
            design = build_window_design(
                self.basis,
                [times[j] - t0 for j in members],
                self.n_modes_fit,
                self.z0,
                self.f_table,
            )
            q, r = qr(design.matrix, mode="economic")
            rdiag = np.abs(np.diag(r))
            if rdiag.min() < 1e-12 * rdiag.max():
                raise UnderdeterminedFit(
                    f"window at t={t0:g} ms has a rank-deficient design"
                )
            zm = None
            if np.any(self.basis.omega == 0):
                if config.tomography.zero_mode_source == "theory":
                    zm = sheared_zero_mode_block(params, self.basis, float(t0))
                else:
                    zm = 0.5 * np.eye(2)
            self.windows.append(
                _Window(
                    t_ms=float(t0), members=tuple(int(j) for j in members),
                    q_factor=q, r_factor=r, zm_block=zm, design=design,
                )
            )
        if not self.windows:
            raise ValidationError("no reconstruction window fits the time grid")
        self.needs_beta = bool(_BETA_QUANTITIES & set(self.quantities))
        self._iu = np.triu_indices(self.n_modes_fit)

    # -- internals -------------------------------------------------------

    def _fit_states(self, ensemble: ShotEnsemble):
        from .tomography import FitResult

        phi2 = [
            referenced_phase_correlations(s, self.z0) for s in ensemble.profiles
        ]
        states = []
        projected_flags = []
        for w in self.windows:
            b = w.design.rhs([phi2[j] for j in w.members])
            x = solve_triangular(w.r_factor, w.q_factor.T @ b)
            t = self._iu[0].size
            blocks = []
            for fam in range(3):
                mat = np.zeros((self.n_modes_fit, self.n_modes_fit))
                mat[self._iu] = x[fam * t : (fam + 1) * t]
                blocks.append(mat + mat.T - np.diag(np.diag(mat)))
            fit = FitResult(
                gamma_phiphi=blocks[0],
                gamma_rhorho=blocks[1],
                gamma_phirho=blocks[2],
                residual_norm=0.0,
                condition_number=0.0,
                n_equations=w.design.matrix.shape[0],
                n_unknowns=w.design.n_unknowns,
            )
            gm, projected = project_physical(fit, w.zm_block, self.basis)
            states.append(gm)
            projected_flags.append(projected)
        return states, projected_flags

    def __call__(self, ensemble: ShotEnsemble) -> dict:
        states, _ = self._fit_states(ensemble)
        reals = [momentum_to_real(g, self.basis) for g in states]
        out = {}
        t_fit = None
        if self.include_temperature or (
            self.needs_beta and self.config.analysis.beta_source == "theory"
        ):
            t_fit = temperature_fit(states[0], self.params, self.basis).temperature_nk
        if self.include_temperature:
            out["temperature_nk"] = t_fit
        beta_ref = None
        if self.needs_beta and self.config.analysis.beta_source == "theory":
            beta_ref = theory_beta_map(self.params, self.splits, t_fit)
        report = subregion_scan(
            reals,
            [w.t_ms for w in self.windows],
            self.splits,
            self.params,
            beta_ref,
        )
        for e in report.entries:
            for q in self.quantities:
                out[f"{q}|t={e.t_ms:g}|ns={e.n_system_pixels}"] = getattr(e, q)
        return out


def bootstrap_reconstruction(
    ensemble: ShotEnsemble,
    config: RunConfig,
    quantities: Sequence[str] = ("dS", "beta_dE", "dI", "dD", "dSigma_left", "dSigma_right"),
    splits: Optional[Sequence[int]] = None,
    n_resamples: Optional[int] = None,
    threads: Optional[int] = None,
) -> dict:
    pipeline = ReconstructionPipeline(config, quantities, splits)
    return bootstrap(
        ensemble,
        pipeline,
        n_resamples=n_resamples or config.analysis.bootstrap_resamples,
        alpha=config.analysis.bootstrap_alpha,
        seed=config.analysis.bootstrap_seed,
        threads=threads,
    )


# --- boundary-condition comparison -------------------------------------------


def compare_bc(config: RunConfig, n_pixels: Optional[int] = None) -> dict:
    """Noiseless theory bundles for both boundary conditions."""
    out = {"schema": RESULTS_PAIR_SCHEMA}
    for bc in ("neumann", "dirichlet"):
        params = replace(config.field, bc=bc)
        if n_pixels is not None:
            params = replace(params, n_pixels=int(n_pixels))
        splits = config.analysis.splits
        if n_pixels is not None:
            scale = int(n_pixels) / config.field.n_pixels
            splits = tuple(
                sorted({max(1, min(int(n_pixels) - 1, round(s * scale))) for s in splits})
            )
        cfg = replace(
            config,
            field=params,
            analysis=replace(config.analysis, splits=splits),
        )
        run = run_forward(cfg, with_shots=False)
        reals = [run.gamma_real(i) for i in range(len(run.times_ms))]
        out[bc] = analyze_states(
            reals, run.gamma_modes, run.times_ms, cfg, kind="theory",
            projected_fraction=0.0,
        )
    return out
