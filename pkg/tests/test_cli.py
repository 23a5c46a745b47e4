"""Configuration, file formats, and the command-line pipeline."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from quenchlab.cli import main
from quenchlab.config import (
    ProtocolSettings,
    RunConfig,
    config_from_dict,
    config_hash,
    load_config,
    resolved_dict,
)
from quenchlab.dataio import load_document, read_array, save_document, write_array
from quenchlab.errors import ValidationError


def test_defaults_match_documented_values():
    cfg = load_config(None)
    assert cfg.field.length_um == 49.0
    assert cfg.field.density_per_um == 70.0
    assert cfg.field.tunnel_hz == 0.76
    assert cfg.field.temperature_nk == 49.0
    assert cfg.field.n_pixels == 7
    assert cfg.field.bc == "neumann"
    assert cfg.field.psf_sigma_um == 3.0
    assert cfg.protocol.t_max_ms == 65.0
    assert cfg.protocol.n_times == 14
    assert cfg.protocol.shots_per_time == 500
    assert cfg.tomography.window_ms == 32.5
    assert cfg.analysis.bootstrap_resamples == 999
    assert cfg.analysis.bootstrap_alpha == 0.68
    assert cfg.analysis.splits == (1, 2, 3, 4, 5, 6)


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown key"):
        config_from_dict({"field": {"lenght_um": 48.0}})
    with pytest.raises(ValidationError, match="unknown section"):
        config_from_dict({"fields": {}})


def test_validation_errors():
    with pytest.raises(ValidationError):
        config_from_dict({"protocol": {"shots_per_time": 0}})
    with pytest.raises(ValidationError):
        config_from_dict({"analysis": {"splits": []}})
    with pytest.raises(ValidationError):
        config_from_dict({"analysis": {"splits": [7]}})
    with pytest.raises(ValidationError):
        config_from_dict({"output": {"format": "xml"}})


def test_toml_round_trip(tmp_path):
    cfg_file = tmp_path / "run.toml"
    cfg_file.write_text(
        "[field]\nn_pixels = 5\ntemperature_nk = 60.0\n"
        "[protocol]\nn_times = 9\nshots_per_time = 17\nseed = 3\n"
        "[analysis]\nsplits = [1, 4]\n"
    )
    cfg = load_config(str(cfg_file))
    assert cfg.field.n_pixels == 5
    assert cfg.protocol.shots_per_time == 17
    assert cfg.analysis.splits == (1, 4)
    # hash is stable and sensitive
    assert config_hash(cfg) == config_hash(cfg)
    assert config_hash(cfg) != config_hash(load_config(None))
    rd = resolved_dict(cfg)
    assert rd["field"]["temperature_nk"] == 60.0


def test_binary_array_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(5, 3)) * 1e-7
    path = tmp_path / "x.bin"
    write_array(path, arr)
    back = read_array(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, arr)  # bit-exact


@pytest.mark.parametrize("fmt", ["json", "binary"])
def test_document_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(1)
    doc = {
        "schema": "x",
        "value": math.pi,
        "matrix": rng.normal(size=(4, 4)),
        "nested": {"times": [0.0, 1.5], "arr": rng.normal(size=3)},
    }
    path = save_document(doc, tmp_path / "doc.json", fmt)
    back = load_document(path)
    assert back["schema"] == "x"
    assert back["value"] == math.pi
    assert np.array_equal(back["matrix"], doc["matrix"])
    assert np.array_equal(back["nested"]["arr"], doc["nested"]["arr"])


@pytest.fixture(scope="module")
def small_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.toml"
    path.write_text(
        "[protocol]\nn_times = 27\nshots_per_time = 60\nseed = 21\n"
        "[analysis]\nsplits = [1, 3]\n"
    )
    return str(path)


def test_cli_pipeline_end_to_end(tmp_path, small_config):
    out = tmp_path / "run"
    assert main(["simulate", "--config", small_config, "--output", str(out)]) == 0
    assert (out / "dataset.json").exists()
    assert main(["tomo", "--input", str(out / "dataset.json"), "--output", str(out)]) == 0
    rec = load_document(out / "reconstruction.json")
    assert rec["schema"] == "quenchlab.reconstruction.v1"
    assert len(rec["entries"]) == 14
    assert main(
        ["landauer", "--input", str(out / "reconstruction.json"), "--output", str(out)]
    ) == 0
    res = load_document(out / "results.json")
    assert res["schema"] == "quenchlab.results.v1"
    assert res["kind"] == "reconstruction"
    assert len(res["landauer"]["entries"]) == 14 * 2
    assert {"dS", "beta_dE", "dI", "dD", "dSigma_left", "dSigma_right"} <= set(
        res["landauer"]["entries"][0]
    )


def test_cli_noiseless_tomo_matches_truth(tmp_path, small_config):
    out = tmp_path / "runnl"
    assert main(["simulate", "--config", small_config, "--output", str(out), "--noiseless"]) == 0
    data = load_document(out / "dataset.json")
    assert data["shots"] is None
    assert main(
        ["tomo", "--input", str(out / "dataset.json"), "--output", str(out), "--noiseless"]
    ) == 0
    rec = load_document(out / "reconstruction.json")
    truth = {i: g for i, g in enumerate(data["truth_gamma_modes"])}
    times = list(data["times_ms"])
    for entry in rec["entries"]:
        i = times.index(entry["t_ms"])
        scale = max(1.0, np.max(np.abs(truth[i])))
        assert np.max(np.abs(entry["gamma_modes"] - truth[i])) < 1e-6 * scale
        assert not entry["projected"]
    assert rec["temperature_fit_nk"] == pytest.approx(49.0, rel=1e-6)


def test_cli_dataset_determinism(tmp_path, small_config):
    # identical (config, seed) -> byte-identical document, rerun in place
    out = tmp_path / "a"
    args = ["simulate", "--config", small_config, "--output", str(out), "--format", "json"]
    assert main(args) == 0
    first = (out / "dataset.json").read_bytes()
    assert main(args) == 0
    assert (out / "dataset.json").read_bytes() == first
    assert main(args + ["--seed", "99"]) == 0
    assert (out / "dataset.json").read_bytes() != first


def test_cli_landauer_from_dataset_truth(tmp_path, small_config):
    out = tmp_path / "truth"
    assert main(["simulate", "--config", small_config, "--output", str(out)]) == 0
    assert main(
        ["landauer", "--input", str(out / "dataset.json"), "--output", str(out)]
    ) == 0
    res = load_document(out / "results.json")
    assert res["kind"] == "theory"
    assert res["diagnostics"]["decomposition_max_gap"] < 1e-9
    assert res["unitarity"]["max_rel_drift"] < 1e-9
    assert res["extremality"]["max_gap"] < 1e-9


def test_cli_exit_codes(tmp_path, small_config):
    # validation error -> 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[protocol]\nshots_per_time = 0\n")
    assert main(["simulate", "--config", str(bad), "--output", str(tmp_path)]) == 2
    # missing input -> 4
    assert main(["tomo", "--input", str(tmp_path / "nope.json")]) == 4
    # wrong schema -> 2
    stray = save_document({"schema": "other"}, tmp_path / "s.json", "json")
    assert main(["landauer", "--input", str(stray), "--output", str(tmp_path)]) == 2


def test_cli_bootstrap_attaches_intervals(tmp_path):
    cfg = tmp_path / "boot.toml"
    cfg.write_text(
        "[protocol]\nn_times = 27\nshots_per_time = 40\nseed = 8\n"
        "[analysis]\nsplits = [3]\nbootstrap_seed = 5\n"
    )
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--output", str(out)]) == 0
    assert main(
        ["landauer", "--input", str(out / "dataset.json"), "--output", str(out),
         "--bootstrap", "29"]
    ) == 0
    res = load_document(out / "results.json")
    assert res["bootstrap"]["n_resamples"] == 29
    with_ci = [e for e in res["landauer"]["entries"] if "ci" in e]
    # intervals exist at reconstruction times (window starts)
    assert with_ci
    entry = with_ci[0]
    for q in ("dS", "dI", "dSigma_left"):
        lo, hi = entry["ci"][q]
        assert lo <= hi
    assert "temperature_fit_ci_nk" in res["metadata"]


def test_cli_compare_bc(tmp_path):
    cfg = tmp_path / "bc.toml"
    cfg.write_text("[protocol]\nn_times = 12\nt_max_ms = 30.0\n[analysis]\nsplits = [2, 3]\n")
    out = tmp_path / "bc"
    assert main(
        ["compare-bc", "--config", str(cfg), "--output", str(out), "--n-pixels", "16"]
    ) == 0
    pair = load_document(out / "bc_pair.json")
    assert pair["schema"] == "quenchlab.results_pair.v1"
    for bc in ("neumann", "dirichlet"):
        assert pair[bc]["metadata"]["boundary"] == bc
        assert pair[bc]["unitarity"]["max_rel_drift"] < 1e-9
        assert pair[bc]["metadata"]["config"]["field"]["n_pixels"] == 16


def test_protocol_grid_shape():
    proto = ProtocolSettings()
    times = proto.times_ms
    assert len(times) == 14
    assert times[0] == 0.0 and times[-1] == 65.0
    assert np.allclose(np.diff(times), 5.0)
