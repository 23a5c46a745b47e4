"""Figure builders over the results-bundle JSON schema.

Five figure kinds: time_evolution (entropy-production terms vs ct/L per
partition), scaling (terms vs L_S/L at chosen times), bc_compare
(Neumann vs Dirichlet pair), conservation (global S, E, D vs ct/L) and
decomposition_check (the two decompositions overlaid, with the recorded
maximum gap quoted).  Everything is read from the JSON; nothing is
recomputed.  Reconstruction bundles draw as points with error bars,
theory bundles as lines with shaded bands where intervals exist.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figgen"  # deterministic SVG ids

import matplotlib.pyplot as plt
import numpy as np

KINDS = (
    "time_evolution",
    "scaling",
    "bc_compare",
    "conservation",
    "decomposition_check",
)

QUANTITY_STYLE = [
    ("dS", "tab:blue", r"$\Delta S$"),
    ("beta_dE", "tab:orange", r"$\beta_E \Delta E_E$"),
    ("dI", "tab:green", r"$\Delta I$"),
    ("dD", "tab:red", r"$\Delta D$"),
    ("dSigma_left", "black", r"$\Delta\Sigma$"),
]


class MissingQuantity(Exception):
    """The results file lacks a series the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    out_stem: str
    formats: tuple = ("png", "svg")
    splits: Optional[tuple] = None  # subset of n_system_pixels to show
    times_over_period: Optional[tuple] = None  # ct/L values for scaling panels

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MissingQuantity(f"unknown figure kind {self.kind!r}")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        object.__setattr__(self, "formats", tuple(self.formats))
        if self.splits is not None:
            object.__setattr__(self, "splits", tuple(int(s) for s in self.splits))
        if self.times_over_period is not None:
            object.__setattr__(
                self, "times_over_period", tuple(float(t) for t in self.times_over_period)
            )

    @classmethod
    def from_dict(cls, data: dict) -> "FigureSpec":
        known = {"kind", "inputs", "out_stem", "formats", "splits", "times_over_period"}
        unknown = set(data) - known
        if unknown:
            raise MissingQuantity(f"unknown spec key(s): {sorted(unknown)}")
        kwargs = dict(data)
        kwargs.setdefault("formats", ("png", "svg"))
        return cls(**kwargs)


def load_results(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") not in (
        "quenchlab.results.v1",
        "quenchlab.results_pair.v1",
    ):
        raise MissingQuantity(f"{path}: not a results bundle ({doc.get('schema')!r})")
    return doc


def _entries(bundle: dict) -> list:
    entries = bundle.get("landauer", {}).get("entries", [])
    if not entries:
        raise MissingQuantity("results bundle has no entries")
    return entries


def _ct_over_l(bundle: dict, t_ms) -> np.ndarray:
    meta = bundle["metadata"]
    return np.asarray(t_ms, dtype=float) * meta["c_um_per_ms"] / meta["length_um"]


def _series(bundle: dict, split: int, name: str):
    """(x, y, yerr or None) of one quantity vs ct/L for one partition."""
    rows = [e for e in _entries(bundle) if e["n_system_pixels"] == split]
    if not rows:
        raise MissingQuantity(f"no entries for n_system_pixels = {split}")
    rows.sort(key=lambda e: e["t_ms"])
    if name not in rows[0]:
        raise MissingQuantity(f"entries lack quantity {name!r}")
    x = _ct_over_l(bundle, [e["t_ms"] for e in rows])
    y = np.array([e[name] for e in rows])
    bands = None
    if all("ci" in e and name in e["ci"] for e in rows):
        lo = np.array([e["ci"][name][0] for e in rows])
        hi = np.array([e["ci"][name][1] for e in rows])
        bands = (lo, hi)
    return x, y, bands


def _draw_quantity(ax, bundle, split, name, color, label):
    x, y, bands = _series(bundle, split, name)
    reconstructed = bundle.get("kind") == "reconstruction"
    if bands is not None and reconstructed:
        # percentile intervals need not bracket the point estimate
        lo = np.clip(y - bands[0], 0.0, None)
        hi = np.clip(bands[1] - y, 0.0, None)
        ax.errorbar(
            x, y, yerr=np.vstack([lo, hi]),
            fmt="o", ms=3.5, lw=1, color=color, label=label, capsize=2,
        )
    else:
        ax.plot(x, y, "-", lw=1.4, color=color, label=label)
        if bands is not None:
            ax.fill_between(x, bands[0], bands[1], color=color, alpha=0.25, lw=0)


def _splits_of(bundle: dict) -> list:
    return sorted({e["n_system_pixels"] for e in _entries(bundle)})


def figure_time_evolution(bundle: dict, splits: Optional[Sequence[int]] = None):
    splits = list(splits) if splits else _splits_of(bundle)
    n_pix = bundle["metadata"]["config"]["field"]["n_pixels"]
    fig, axes = plt.subplots(
        1, len(splits), figsize=(4.2 * len(splits), 3.4), squeeze=False, sharex=True
    )
    for ax, split in zip(axes[0], splits):
        for name, color, label in QUANTITY_STYLE:
            _draw_quantity(ax, bundle, split, name, color, label)
        ax.axhline(0.0, color="gray", lw=0.6, zorder=0)
        ax.set_xlabel(r"$ct/L$")
        ax.set_title(f"$L_S/L = {split}/{n_pix}$")
    axes[0][0].set_ylabel("nats")
    axes[0][0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def figure_scaling(bundle: dict, times_over_period: Optional[Sequence[float]] = None):
    entries = _entries(bundle)
    n_pix = bundle["metadata"]["config"]["field"]["n_pixels"]
    all_t = sorted({e["t_ms"] for e in entries})
    x_all = _ct_over_l(bundle, all_t)
    if times_over_period:
        picks = [all_t[int(np.argmin(np.abs(x_all - q)))] for q in times_over_period]
    else:
        picks = [all_t[len(all_t) // 5], all_t[2 * len(all_t) // 5], all_t[3 * len(all_t) // 5]]
    picks = sorted(set(picks))
    fig, axes = plt.subplots(
        1, len(picks), figsize=(4.2 * len(picks), 3.4), squeeze=False, sharey=True
    )
    for ax, t in zip(axes[0], picks):
        rows = sorted(
            (e for e in entries if e["t_ms"] == t), key=lambda e: e["n_system_pixels"]
        )
        if not rows:
            raise MissingQuantity(f"no entries at t = {t}")
        frac = np.array([e["n_system_pixels"] / n_pix for e in rows])
        for name, color, label in QUANTITY_STYLE:
            y = np.array([e[name] for e in rows])
            if all("ci" in e and name in e["ci"] for e in rows):
                lo = np.array([e["ci"][name][0] for e in rows])
                hi = np.array([e["ci"][name][1] for e in rows])
                ax.errorbar(
                    frac, y,
                    yerr=np.vstack(
                        [np.clip(y - lo, 0.0, None), np.clip(hi - y, 0.0, None)]
                    ),
                    fmt="o-", ms=3.5, lw=1, color=color, label=label, capsize=2,
                )
            else:
                ax.plot(frac, y, "o-", ms=3, lw=1.2, color=color, label=label)
        ax.axhline(0.0, color="gray", lw=0.6, zorder=0)
        ax.set_xlabel(r"$L_S/L$")
        ax.set_title(rf"$ct/L = {float(_ct_over_l(bundle, t)):.2f}$")
    axes[0][0].set_ylabel("nats")
    axes[0][0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def figure_bc_compare(pair: dict, splits: Optional[Sequence[int]] = None):
    if not {"neumann", "dirichlet"} <= set(pair):
        raise MissingQuantity("boundary-condition pair needs both bundles")
    bundles = {bc: pair[bc] for bc in ("neumann", "dirichlet")}
    split_sets = {bc: _splits_of(b) for bc, b in bundles.items()}
    splits = list(splits) if splits else sorted(
        set(split_sets["neumann"]) & set(split_sets["dirichlet"])
    )
    if not splits:
        raise MissingQuantity("no common partition between the two bundles")
    split = splits[0]
    fig, axes = plt.subplots(1, 2, figsize=(8.6, 3.4), sharex=True)
    for ax, bc in zip(axes, ("neumann", "dirichlet")):
        for name, color, label in QUANTITY_STYLE:
            _draw_quantity(ax, bundles[bc], split, name, color, label)
        ax.axhline(0.0, color="gray", lw=0.6, zorder=0)
        ax.set_xlabel(r"$ct/L$")
        n_pix = bundles[bc]["metadata"]["config"]["field"]["n_pixels"]
        ax.set_title(f"{bc} ($L_S/L = {split}/{n_pix}$)")
    axes[0].set_ylabel("nats")
    axes[0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def figure_conservation(bundle: dict):
    block = bundle.get("unitarity")
    if not block:
        raise MissingQuantity("results bundle has no conservation block")
    x = _ct_over_l(bundle, block["times_ms"])
    fig, axes = plt.subplots(3, 1, figsize=(5.2, 6.4), sharex=True)
    for ax, key, label in zip(
        axes,
        ("entropy", "energy", "rel_entropy"),
        ("global $S$ (nats)", "global $E$", "global $D$ (nats)"),
    ):
        ax.plot(x, block[key], "-", lw=1.4, color="tab:blue")
        ax.set_ylabel(label)
    axes[-1].set_xlabel(r"$ct/L$")
    axes[0].set_title(f"max relative drift {block['max_rel_drift']:.2e}")
    fig.tight_layout()
    return fig


def figure_decomposition_check(bundle: dict, splits: Optional[Sequence[int]] = None):
    splits = list(splits) if splits else _splits_of(bundle)
    gap = bundle.get("diagnostics", {}).get("decomposition_max_gap")
    if gap is None:
        raise MissingQuantity("results bundle lacks the decomposition gap")
    n_pix = bundle["metadata"]["config"]["field"]["n_pixels"]
    fig, axes = plt.subplots(
        1, len(splits), figsize=(4.2 * len(splits), 3.4), squeeze=False, sharex=True
    )
    for ax, split in zip(axes[0], splits):
        for name, color, label in (
            ("dSigma_left", "tab:purple", r"$\beta_E \Delta E_E + \Delta S$"),
            ("dSigma_right", "tab:cyan", r"$\Delta I + \Delta D$"),
        ):
            _draw_quantity(ax, bundle, split, name, color, label)
        ax.axhline(0.0, color="gray", lw=0.6, zorder=0)
        ax.set_xlabel(r"$ct/L$")
        ax.set_title(f"$L_S/L = {split}/{n_pix}$")
    axes[0][0].set_ylabel("nats")
    axes[0][0].legend(fontsize=8, frameon=False)
    fig.suptitle(f"decomposition max gap = {gap:.3e}", fontsize=10)
    fig.tight_layout()
    return fig


def render_decomposition_check(bundle: dict, splits=None):
    """Overlay of both decompositions with the recorded gap in the title."""
    return figure_decomposition_check(bundle, splits)


def _save(fig, out_stem: str, formats: Sequence[str]) -> list:
    paths = []
    out = Path(out_stem)
    out.parent.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        path = out.with_suffix(f".{fmt}")
        metadata = {"Date": None} if fmt == "svg" else None
        fig.savefig(path, dpi=150, metadata=metadata)
        paths.append(path)
    plt.close(fig)
    return paths


def render(spec: FigureSpec, out_dir: Optional[str] = None) -> list:
    """Build one figure per spec and write every requested format."""
    docs = [load_results(p) for p in spec.inputs]
    if spec.kind == "time_evolution":
        fig = figure_time_evolution(docs[0], spec.splits)
    elif spec.kind == "scaling":
        fig = figure_scaling(docs[0], spec.times_over_period)
    elif spec.kind == "bc_compare":
        fig = figure_bc_compare(docs[0], spec.splits)
    elif spec.kind == "conservation":
        fig = figure_conservation(docs[0])
    else:
        fig = figure_decomposition_check(docs[0], spec.splits)
    stem = spec.out_stem
    if out_dir is not None:
        stem = str(Path(out_dir) / Path(stem).name)
    return _save(fig, stem, spec.formats)
