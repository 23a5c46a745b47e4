"""Entropy-production bookkeeping across system/environment partitions.

For a bipartition of the field and a reference inverse temperature beta_E
fixed by the environment's initial energy, the generalised entropy
production of the post-quench evolution admits two decompositions,

    dSigma = beta_E dE_E + dS            (thermodynamic form)
           = dI + dD                     (information form),

where dS is the system entropy change, dE_E the energy shed into the
environment, dI the change in mutual information across the cut and dD the
change of the environment's divergence from the fixed thermal reference.
Under unitary global dynamics both forms agree identically; the residual
gap is a numerical diagnostic.  The bootstrap layer propagates shot noise
through the complete reconstruction pipeline by resampling measured
profiles with replacement.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import QuenchLabError, TooManyFailedResamples, ValidationError
from .field import (
    FieldParameters,
    ModeBasis,
    PartitionSpec,
    _massless_segment_hamiltonian,
    beta_matching_energy,
    env_mode_frequencies,
    env_zero_mode_rate,
    kg_hamiltonian,
    mode_basis,
    segment_basis,
    thermo_from_spectrum,
)
from .gaussian import (
    CovarianceMatrix,
    QuadraticHamiltonian,
    mean_energy,
    mutual_information,
    restrict,
    von_neumann_entropy,
)
from .quench import ShotEnsemble

Array = NDArray[np.float64]

_BOOT_STREAM = 0x424F4F54


@dataclass(frozen=True)
class LandauerEntry:
    """All terms of both decompositions for one (time, partition) cell."""

    t_ms: float
    n_system_pixels: int
    beta_env: float
    dS: float
    beta_dE: float
    dI: float
    dD: float
    dSigma_left: float
    dSigma_right: float
    S_system_t: float
    S_system_0: float
    E_env_t: float
    E_env_0: float
    I_t: float
    I_0: float
    D_t: float
    D_0: float
    ci: Optional[dict] = None

    @property
    def decomposition_gap(self) -> float:
        return abs(self.dSigma_left - self.dSigma_right)


@dataclass(frozen=True)
class LandauerReport:
    entries: tuple
    failures: tuple = ()

    @property
    def max_decomposition_gap(self) -> float:
        return max((e.decomposition_gap for e in self.entries), default=0.0)

    def at(self, t_ms: float, n_system_pixels: int) -> LandauerEntry:
        for e in self.entries:
            if abs(e.t_ms - t_ms) < 1e-9 and e.n_system_pixels == n_system_pixels:
                return e
        raise KeyError(f"no entry at t={t_ms}, N_S={n_system_pixels}")


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    low: float
    high: float
    n_resamples: int
    seed: int

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True)
class PartitionContext:
    """Reusable per-partition data: Hamiltonian, spectrum, Gibbs reference."""

    split: PartitionSpec
    system_idx: tuple
    env_idx: tuple
    env_ham: QuadraticHamiltonian
    env_freqs: Array
    env_zero_mode_rate: Optional[float]
    beta_env: float
    log_z: float


def partition_context(
    params: FieldParameters,
    split: PartitionSpec,
    gamma0_real: CovarianceMatrix,
    swap_roles: bool = False,
    beta_env: Optional[float] = None,
) -> PartitionContext:
    """Fix beta_E from the initial environment energy and cache the rest.

    With `swap_roles` the left block is treated as the environment; the
    segment Hamiltonian depends only on the block's pixel count, so both
    orientations use the same construction.
    """
    if swap_roles:
        system_idx = tuple(split.env_pixels)
        env_idx = tuple(split.system_pixels)
    else:
        system_idx = tuple(split.system_pixels)
        env_idx = tuple(split.env_pixels)
    n_env = len(env_idx)
    env_ham = _massless_segment_hamiltonian(params, n_env)
    pseudo = PartitionSpec(split.n_total_pixels - n_env, split.n_total_pixels)
    freqs = env_mode_frequencies(params, pseudo)
    u_e = env_zero_mode_rate(params, pseudo)
    if beta_env is None:
        e0 = mean_energy(restrict(gamma0_real, env_idx), env_ham)
        beta_env = beta_matching_energy(e0, freqs, u_e)
    log_z = thermo_from_spectrum(beta_env, freqs, u_e).log_partition
    return PartitionContext(
        split=split,
        system_idx=system_idx,
        env_idx=env_idx,
        env_ham=env_ham,
        env_freqs=freqs,
        env_zero_mode_rate=u_e,
        beta_env=beta_env,
        log_z=log_z,
    )


def _entry_from_context(
    ctx: PartitionContext,
    gamma0_real: CovarianceMatrix,
    gamma_t_real: CovarianceMatrix,
    t_ms: float,
) -> LandauerEntry:
    s_sys_0 = von_neumann_entropy(restrict(gamma0_real, ctx.system_idx))
    s_sys_t = von_neumann_entropy(restrict(gamma_t_real, ctx.system_idx))
    ge0 = restrict(gamma0_real, ctx.env_idx)
    get = restrict(gamma_t_real, ctx.env_idx)
    e0 = mean_energy(ge0, ctx.env_ham)
    et = mean_energy(get, ctx.env_ham)
    s_all_0 = von_neumann_entropy(gamma0_real)
    s_all_t = von_neumann_entropy(gamma_t_real)
    s_env_0 = von_neumann_entropy(ge0)
    s_env_t = von_neumann_entropy(get)
    i0 = max(s_sys_0 + s_env_0 - s_all_0, 0.0)
    it = max(s_sys_t + s_env_t - s_all_t, 0.0)
    d0 = -s_env_0 + ctx.beta_env * e0 + ctx.log_z
    dt_ = -s_env_t + ctx.beta_env * et + ctx.log_z
    ds = s_sys_t - s_sys_0
    beta_de = ctx.beta_env * (et - e0)
    di = it - i0
    dd = dt_ - d0
    return LandauerEntry(
        t_ms=float(t_ms),
        n_system_pixels=len(ctx.system_idx),
        beta_env=ctx.beta_env,
        dS=ds,
        beta_dE=beta_de,
        dI=di,
        dD=dd,
        dSigma_left=beta_de + ds,
        dSigma_right=di + dd,
        S_system_t=s_sys_t,
        S_system_0=s_sys_0,
        E_env_t=et,
        E_env_0=e0,
        I_t=it,
        I_0=i0,
        D_t=dt_,
        D_0=d0,
    )


def landauer_quantities(
    gamma0_real: CovarianceMatrix,
    gamma_t_real: CovarianceMatrix,
    split: PartitionSpec,
    params: FieldParameters,
    t_ms: float = 0.0,
    beta_env: Optional[float] = None,
    swap_roles: bool = False,
) -> LandauerEntry:
    """Both decompositions for one partition at one hold time.

    beta_E defaults to the inverse temperature matching gamma0's environment
    energy under the subregion Hamiltonian; pass `beta_env` to reuse a
    reference computed elsewhere (e.g. from a theory state at a fitted
    temperature).
    """
    if gamma0_real.n != gamma_t_real.n:
        raise ValidationError("states live on different pixel grids")
    ctx = partition_context(params, split, gamma0_real, swap_roles, beta_env)
    return _entry_from_context(ctx, gamma0_real, gamma_t_real, t_ms)


def subregion_scan(
    gammas_real: Sequence[CovarianceMatrix],
    times_ms: Sequence[float],
    splits: Sequence[int],
    params: FieldParameters,
    beta_reference: Optional[Mapping[int, float]] = None,
) -> LandauerReport:
    """Full (time x partition) grid of entries, absolute values included."""
    if len(gammas_real) != len(times_ms):
        raise ValidationError("state series and time grid differ in length")
    entries = []
    failures = []
    for ns in splits:
        split = PartitionSpec(int(ns), params.n_pixels)
        try:
            beta = beta_reference.get(int(ns)) if beta_reference else None
            ctx = partition_context(params, split, gammas_real[0], beta_env=beta)
            for t, g in zip(times_ms, gammas_real):
                entries.append(_entry_from_context(ctx, gammas_real[0], g, t))
        except QuenchLabError as exc:
            failures.append((int(ns), f"{type(exc).__name__}: {exc}"))
    return LandauerReport(entries=tuple(entries), failures=tuple(failures))


@dataclass(frozen=True)
class UnitarityRow:
    t_ms: float
    entropy: float
    energy: float
    rel_entropy: float


@dataclass(frozen=True)
class UnitarityReport:
    rows: tuple
    beta_reference: float
    max_rel_drift: float


def unitarity_report(
    gamma_modes_series: Sequence[CovarianceMatrix],
    times_ms: Sequence[float],
    params: FieldParameters,
    basis: Optional[ModeBasis] = None,
) -> UnitarityReport:
    """Global entropy, energy and divergence from the initial-energy Gibbs
    state, per hold time, with the worst relative drift."""
    if len(gamma_modes_series) == 0:
        raise ValidationError("empty state series")
    basis = mode_basis(params) if basis is None else basis
    ham = kg_hamiltonian(params, 0.0, basis)
    freqs = basis.omega[basis.omega > 0]
    u = basis.u if np.any(basis.omega == 0) else None
    e0 = mean_energy(gamma_modes_series[0], ham)
    beta_ref = beta_matching_energy(e0, freqs, u)
    log_z = thermo_from_spectrum(beta_ref, freqs, u).log_partition
    rows = []
    for t, g in zip(times_ms, gamma_modes_series):
        s = von_neumann_entropy(g)
        e = mean_energy(g, ham)
        d = -s + beta_ref * e + log_z
        rows.append(UnitarityRow(t_ms=float(t), entropy=s, energy=e, rel_entropy=d))
    drift = 0.0
    for attr in ("entropy", "energy", "rel_entropy"):
        x0 = getattr(rows[0], attr)
        scale = max(abs(x0), 1e-12)
        for r in rows:
            drift = max(drift, abs(getattr(r, attr) - x0) / scale)
    return UnitarityReport(rows=tuple(rows), beta_reference=beta_ref, max_rel_drift=drift)


GAUSSIAN_SURROGATE_NOTES = (
    "The environment energy is a linear functional of the covariance matrix, "
    "so it coincides with the energy of the Gaussian surrogate sharing the "
    "same second moments.",
    "For a non-Gaussian state with the same second moments the surrogate "
    "upper-bounds the entropy change and the mutual-information change, and "
    "lower-bounds the divergence change; in this all-Gaussian pipeline both "
    "sides coincide.",
)


@dataclass(frozen=True)
class ExtremalityRow:
    t_ms: float
    energy_contraction: float
    energy_mode_sum: float

    @property
    def gap(self) -> float:
        return abs(self.energy_contraction - self.energy_mode_sum)


@dataclass(frozen=True)
class ExtremalityReport:
    rows: tuple
    notes: tuple = GAUSSIAN_SURROGATE_NOTES

    @property
    def max_gap(self) -> float:
        return max((r.gap for r in self.rows), default=0.0)


def extremality_report(
    gammas_real: Sequence[CovarianceMatrix],
    times_ms: Sequence[float],
    split: PartitionSpec,
    params: FieldParameters,
) -> ExtremalityReport:
    """Environment energy via two independent routes per time.

    Route one contracts the restricted covariance with the real-space
    subregion Hamiltonian; route two transforms to the subregion mode basis
    and sums per-mode occupations against the diagonal dispersion.
    """
    env_idx = tuple(split.env_pixels)
    env_ham = _massless_segment_hamiltonian(params, split.n_env_pixels)
    sb = segment_basis(params, split.n_env_pixels)
    t_inv = sb.to_modes()
    rows = []
    for t, g in zip(times_ms, gammas_real):
        ge = restrict(g, env_idx)
        e1 = mean_energy(ge, env_ham)
        gm = t_inv @ ge.gamma @ t_inv.T
        n = split.n_env_pixels
        e2 = 0.0
        for i, w in enumerate(sb.omega):
            if w > 0:
                e2 += 0.5 * w * (gm[i, i] + gm[n + i, n + i])
            else:
                e2 += 0.5 * sb.u * gm[n + i, n + i]
        rows.append(ExtremalityRow(t_ms=float(t), energy_contraction=e1, energy_mode_sum=e2))
    return ExtremalityReport(rows=tuple(rows))


def bootstrap(
    dataset: ShotEnsemble,
    pipeline: Callable[[ShotEnsemble], Mapping[str, float]],
    n_resamples: int = 999,
    alpha: float = 0.68,
    seed: int = 0,
    threads: Optional[int] = None,
    max_failed_fraction: float = 0.05,
) -> dict:
    """Percentile bootstrap of every scalar the pipeline reports.

    Shots are resampled with replacement independently at each hold time;
    each resample reruns the full pipeline.  Resamples are seeded by index
    from a counter-based generator, so results are identical whether run
    serially or on a thread pool.  Resamples whose pipeline raises a
    package error are dropped and counted; more than `max_failed_fraction`
    failures aborts.
    """
    if any(p.shape[0] < 2 for p in dataset.profiles):
        raise ValidationError("bootstrap needs at least two shots per hold time")
    point = dict(pipeline(dataset))

    def one(r: int):
        ss = np.random.SeedSequence(entropy=(int(seed), _BOOT_STREAM, int(r)))
        rng = np.random.Generator(np.random.Philox(ss))
        try:
            return dict(pipeline(dataset.resample(rng)))
        except QuenchLabError:
            return None

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(n_resamples)))
    else:
        results = [one(r) for r in range(n_resamples)]

    failed = sum(1 for r in results if r is None)
    if failed > max_failed_fraction * n_resamples:
        raise TooManyFailedResamples(
            f"{failed}/{n_resamples} bootstrap resamples failed"
        )
    kept = [r for r in results if r is not None]
    lo_q = 100.0 * (1.0 - alpha) / 2.0
    hi_q = 100.0 * (1.0 + alpha) / 2.0
    out = {}
    for key, value in point.items():
        samples = np.array([r[key] for r in kept])
        lo, hi = np.percentile(samples, [lo_q, hi_q])
        out[key] = BootstrapResult(
            point=float(value), low=float(lo), high=float(hi),
            n_resamples=n_resamples, seed=seed,
        )
    out["__n_failed__"] = failed
    return out
