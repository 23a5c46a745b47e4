"""Command-line entry points.

Subcommands: simulate (forward run -> dataset), tomo (dataset ->
reconstruction), landauer (dataset or reconstruction -> results bundle),
compare-bc (noiseless theory pair for both boundary conditions), all (the
full pipeline).  Exit codes: 0 success, 2 validation, 3 numerical failure,
4 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .dataio import load_document, save_document
from .errors import QuenchLabError, ValidationError
from .gaussian import CovarianceMatrix
from . import workflows as wf

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(
            config,
            protocol=dataclasses.replace(config.protocol, seed=args.seed),
        )
    if getattr(args, "format", None):
        config = dataclasses.replace(
            config, output=dataclasses.replace(config.output, format=args.format)
        )
    if getattr(args, "output", None):
        config = dataclasses.replace(
            config,
            output=dataclasses.replace(config.output, directory=str(args.output)),
        )
    return config.validate()


def _outdir(config: RunConfig) -> Path:
    return Path(config.output.directory)


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    run = wf.run_forward(config, with_shots=not args.noiseless)
    path = save_document(
        wf.dataset_document(run, config),
        _outdir(config) / "dataset.json",
        config.output.format,
    )
    n_shots = 0 if run.ensemble is None else config.protocol.shots_per_time
    print(
        f"dataset: {len(run.times_ms)} hold times x {n_shots} shots "
        f"({config.field.bc}, N={config.field.n_pixels}) -> {path}"
    )
    return EXIT_OK


def _load_dataset(path: str):
    doc = load_document(path)
    return wf.run_from_document(doc)


def cmd_tomo(args) -> int:
    config, run = _load_dataset(args.input)
    config = _apply_overrides(config, args)
    series, t_fit = wf.run_reconstruction(
        config,
        ensemble=run.ensemble,
        run=run,
        noiseless=args.noiseless,
    )
    if not series.entries:
        msgs = "; ".join(m for _, m in series.failures)
        raise QuenchLabError(f"all reconstruction windows failed: {msgs}")
    path = save_document(
        wf.reconstruction_document(series, config, t_fit),
        _outdir(config) / "reconstruction.json",
        config.output.format,
    )
    t_txt = f"{t_fit:.3f} nK" if t_fit is not None else "n/a"
    print(
        f"reconstruction: {len(series.entries)} windows "
        f"({len(series.failures)} failed), T_fit = {t_txt} -> {path}"
    )
    return EXIT_OK


def cmd_landauer(args) -> int:
    doc = load_document(args.input)
    schema = doc.get("schema")
    if schema == wf.DATASET_SCHEMA:
        config, run = wf.run_from_document(doc)
        config = _apply_overrides(config, args)
        reals = [run.gamma_real(i) for i in range(len(run.times_ms))]
        bundle = wf.analyze_states(
            reals,
            run.gamma_modes,
            run.times_ms,
            config,
            kind="theory",
            projected_fraction=0.0,
        )
        ensemble = run.ensemble
    elif schema == wf.RECONSTRUCTION_SCHEMA:
        from .config import config_from_dict

        config = _apply_overrides(config_from_dict(doc["config"]), args)
        entries = doc["entries"]
        if not entries:
            raise ValidationError("reconstruction document has no entries")
        reals = [CovarianceMatrix.from_matrix(e["gamma_real"]) for e in entries]
        modes = [CovarianceMatrix.from_matrix(e["gamma_modes"]) for e in entries]
        times = [float(e["t_ms"]) for e in entries]
        n_proj = sum(1 for e in entries if e["projected"])
        bundle = wf.analyze_states(
            reals,
            modes,
            times,
            config,
            kind="reconstruction",
            temperature_fit_nk=doc.get("temperature_fit_nk"),
            projected_fraction=n_proj / len(entries),
        )
        ensemble = None
    else:
        raise ValidationError(f"unsupported input schema {schema!r}")

    if args.bootstrap:
        if ensemble is None:
            raise ValidationError(
                "bootstrap needs a dataset with shots as --input"
            )
        results = wf.bootstrap_reconstruction(
            ensemble, config, n_resamples=args.bootstrap, threads=args.threads
        )
        bundle = wf.attach_bootstrap(bundle, results, config, args.bootstrap)

    path = save_document(bundle, _outdir(config) / "results.json", "json")
    gap = bundle["diagnostics"]["decomposition_max_gap"]
    print(
        f"results: {len(bundle['landauer']['entries'])} entries, "
        f"decomposition gap {gap:.3e} -> {path}"
    )
    return EXIT_OK


def cmd_compare_bc(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    pair = wf.compare_bc(config, n_pixels=args.n_pixels)
    path = save_document(pair, _outdir(config) / "bc_pair.json", "json")
    for bc in ("neumann", "dirichlet"):
        drift = pair[bc]["unitarity"]["max_rel_drift"]
        print(f"{bc}: global drift {drift:.3e}")
    print(f"pair -> {path}")
    return EXIT_OK


def cmd_all(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    outdir = _outdir(config)
    run = wf.run_forward(config, with_shots=True)
    save_document(
        wf.dataset_document(run, config), outdir / "dataset.json", config.output.format
    )
    series, t_fit = wf.run_reconstruction(
        config, ensemble=run.ensemble, run=run, noiseless=args.noiseless
    )
    if not series.entries:
        raise QuenchLabError("all reconstruction windows failed")
    save_document(
        wf.reconstruction_document(series, config, t_fit),
        outdir / "reconstruction.json",
        config.output.format,
    )
    reals = [e.gamma_real for e in series.entries]
    modes = [e.gamma_modes for e in series.entries]
    times = [e.t_ms for e in series.entries]
    n_proj = sum(1 for e in series.entries if e.projected)
    bundle = wf.analyze_states(
        reals, modes, times, config,
        kind="reconstruction",
        temperature_fit_nk=t_fit,
        projected_fraction=n_proj / len(series.entries),
    )
    if args.bootstrap:
        results = wf.bootstrap_reconstruction(
            run.ensemble, config, n_resamples=args.bootstrap, threads=args.threads
        )
        bundle = wf.attach_bootstrap(bundle, results, config, args.bootstrap)
    # theory reference bundle from the same dataset
    truth_reals = [run.gamma_real(i) for i in range(len(run.times_ms))]
    theory = wf.analyze_states(
        truth_reals, run.gamma_modes, run.times_ms, config,
        kind="theory", projected_fraction=0.0,
    )
    save_document(bundle, outdir / "results.json", "json")
    save_document(theory, outdir / "results_theory.json", "json")
    print(f"pipeline complete -> {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quenchlab",
        description="Quench, measure, reconstruct and analyze a 1D Gaussian field.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--seed", type=int, help="override the protocol seed")
        p.add_argument("--threads", type=int, default=None, help="worker cap")
        p.add_argument("--output", help="override the output directory")
        p.add_argument(
            "--format", choices=("json", "binary"), help="array storage mode"
        )

    p = sub.add_parser("simulate", help="forward-run the quench, write a dataset")
    common(p)
    p.add_argument(
        "--noiseless", action="store_true", help="write ground truth only, no shots"
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomo", help="reconstruct covariance matrices from a dataset")
    common(p, needs_config=False)
    p.add_argument("--input", required=True, help="dataset.json path")
    p.add_argument(
        "--noiseless",
        action="store_true",
        help="fit exact (infinite-shot) correlations from the stored truth",
    )
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("landauer", help="entropy-production analysis")
    common(p, needs_config=False)
    p.add_argument("--input", required=True, help="dataset or reconstruction path")
    p.add_argument(
        "--bootstrap", type=int, default=0, metavar="N",
        help="attach N-resample confidence intervals (dataset input only)",
    )
    p.set_defaults(func=cmd_landauer)

    p = sub.add_parser("compare-bc", help="noiseless theory pair for both boundaries")
    common(p)
    p.add_argument("--n-pixels", type=int, default=None, help="grid override")
    p.set_defaults(func=cmd_compare_bc)

    p = sub.add_parser("all", help="simulate + tomo + landauer in one run")
    common(p)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_all)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QuenchLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
