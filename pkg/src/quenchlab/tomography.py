"""Dynamical reconstruction of the covariance matrix from phase correlations.

Only equal-time phase-phase correlations are measurable.  Because the
massless evolution rotates each mode between its phase and density
quadratures, referenced correlations collected across a sliding time window,

    P2[m, n](t + dt) = < (phi(z_m) - phi(z_0)) (phi(z_n) - phi(z_0)) >,

carry the full mode-space second-moment information of the state at the
window start t: expanding in eigenfunctions,

    P2[m, n](t + dt) = sum_{k,l} f_kl^mn cos(w_k dt) cos(w_l dt) Cqq[k, l]
                     + sum_{k,l} f_kl^mn sin(w_k dt) sin(w_l dt) Cpp[k, l]
                     + sum_{k,l} (f_kl^mn + f_lk^mn) cos(w_k dt) sin(w_l dt)
                       Cqp[k, l],

with f_kl^mn = (f_k(z_m) - f_k(z_0)) (f_l(z_n) - f_l(z_0)).  An ordinary
least-squares solve over all pixel pairs and window offsets recovers the
symmetric block matrices; the zero mode cancels from the reference
subtraction and is filled in separately.  Imaging blur is absorbed by
pre-blurring the eigenfunction tables, so fitted blocks refer to the
unblurred field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateFit,
    NonConvergence,
    QuenchLabError,
    UnderdeterminedFit,
    ValidationError,
)
from .field import (
    FieldParameters,
    ModeBasis,
    massive_thermal_mode_variances,
    mode_basis,
    momentum_to_real,
    psf_kernel,
)
from .gaussian import (
    CovarianceMatrix,
    PhaseSpaceLayout,
    symplectic_eigenvalues,
    williamson,
)
from .quench import ShotEnsemble, referenced_phase_correlations

Array = NDArray[np.float64]

_CONDITION_WARN = 1e8
_LAMBDA_FLOOR = 0.5 + 1e-10


@dataclass(frozen=True)
class ReconstructionWindow:
    """One sliding-window fit: start time plus hold-time offsets within it."""

    start_time_ms: float
    hold_offsets_ms: tuple
    window_length_ms: float = 32.5
    n_modes_fit: int = 6

    def __post_init__(self):
        offs = tuple(float(x) for x in self.hold_offsets_ms)
        if len(offs) == 0 or offs[0] != 0.0:
            raise ValidationError("window offsets must start at 0")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise ValidationError("window offsets must be strictly ascending")
        if offs[-1] > self.window_length_ms + 1e-9:
            raise ValidationError("window offsets exceed the window length")
        object.__setattr__(self, "hold_offsets_ms", offs)


@dataclass(frozen=True)
class FitResult:
    """Mode-space blocks over the fitted oscillating modes (k >= 1)."""

    gamma_phiphi: Array
    gamma_rhorho: Array
    gamma_phirho: Array
    residual_norm: float
    condition_number: float
    n_equations: int
    n_unknowns: int
    zero_mode_source: str = "external"
    projected: bool = False

    @property
    def n_modes_fit(self) -> int:
        return self.gamma_phiphi.shape[0]


def fit_mode_positions(basis: ModeBasis, n_modes_fit: int) -> Array:
    """Column indices of the fitted oscillating modes in the basis tables."""
    osc = np.flatnonzero(basis.omega > 0)
    if n_modes_fit < 1 or n_modes_fit > osc.size:
        raise ValidationError(
            f"n_modes_fit must be in 1..{osc.size}, got {n_modes_fit}"
        )
    return osc[:n_modes_fit]


def blurred_phase_table(basis: ModeBasis, sigma_um: float) -> Array:
    """Eigenfunction table seen through the imaging blur: B @ f_phi."""
    return psf_kernel(basis, sigma_um) @ basis.f_phi


def _pair_list(n_pixels: int, z0: int) -> list:
    return [
        (m, n)
        for m in range(n_pixels)
        for n in range(m, n_pixels)
        if m != z0 and n != z0
    ]


def _coeff_blocks(
    g_table: Array, omega: Array, dt: float, pairs: Sequence[tuple]
) -> Array:
    """Design rows for every pixel pair at one offset; shape (pairs, 3T)."""
    m_modes = omega.size
    iu = np.triu_indices(m_modes)
    diag_fac = np.where(iu[0] == iu[1], 0.5, 1.0)
    cos = np.cos(omega * dt)
    sin = np.sin(omega * dt)
    ang_qq = np.outer(cos, cos)
    ang_pp = np.outer(sin, sin)
    c = np.outer(cos, sin)
    ang_qp = c + c.T
    rows = np.empty((len(pairs), 3 * iu[0].size))
    for i, (m, n) in enumerate(pairs):
        w = np.outer(g_table[m], g_table[n])
        w = w + w.T
        rows[i, : iu[0].size] = (w * ang_qq)[iu] * diag_fac
        rows[i, iu[0].size : 2 * iu[0].size] = (w * ang_pp)[iu] * diag_fac
        rows[i, 2 * iu[0].size :] = (w * ang_qp)[iu] * diag_fac
    return rows


def design_row(
    basis: ModeBasis,
    m: int,
    n: int,
    z0: int,
    dt: float,
    n_modes_fit: int,
    f_phi_table: Optional[Array] = None,
) -> Array:
    """Coefficients of one referenced correlation against the block unknowns.

    Unknown ordering: upper triangles of the phase-phase, density-density
    and (symmetrized) phase-density blocks, in that order.
    """
    table = basis.f_phi if f_phi_table is None else f_phi_table
    cols = fit_mode_positions(basis, n_modes_fit)
    g = table[:, cols] - table[z0, cols]
    return _coeff_blocks(g, basis.omega[cols], dt, [(m, n)])[0]


@dataclass(frozen=True)
class WindowDesign:
    """Precomputed least-squares factorization reused across resamples."""

    pairs: tuple
    offsets: tuple
    matrix: Array
    n_unknowns: int
    mode_positions: Array
    z0: int

    def rhs(self, phi2_by_offset: Sequence[Array]) -> Array:
        b = np.empty(len(self.pairs) * len(self.offsets))
        for j, phi2 in enumerate(phi2_by_offset):
            base = j * len(self.pairs)
            for i, (m, n) in enumerate(self.pairs):
                b[base + i] = phi2[m, n]
        return b


def build_window_design(
    basis: ModeBasis,
    offsets_ms: Sequence[float],
    n_modes_fit: int,
    z0: int,
    f_phi_table: Optional[Array] = None,
) -> WindowDesign:
    table = basis.f_phi if f_phi_table is None else f_phi_table
    cols = fit_mode_positions(basis, n_modes_fit)
    omega = basis.omega[cols]
    g = table[:, cols] - table[z0, cols]
    pairs = _pair_list(basis.n_pixels, z0)
    span = (max(offsets_ms) - min(offsets_ms)) * float(np.min(omega))
    if span < math.pi / 2:
        warnings.warn(
            f"slowest fitted mode sweeps only {span:.3f} rad over the window "
            f"(< pi/2); the fit may be unstable",
            stacklevel=2,
        )
    blocks = [_coeff_blocks(g, omega, dt, pairs) for dt in offsets_ms]
    mat = np.vstack(blocks)
    t = cols.size * (cols.size + 1) // 2
    return WindowDesign(
        pairs=tuple(pairs),
        offsets=tuple(float(x) for x in offsets_ms),
        matrix=mat,
        n_unknowns=3 * t,
        mode_positions=cols,
        z0=z0,
    )


def _solve_design(design: WindowDesign, b: Array, ridge: float) -> tuple:
    a = design.matrix
    if ridge > 0:
        a = np.vstack([a, math.sqrt(ridge) * np.eye(design.n_unknowns)])
        b = np.concatenate([b, np.zeros(design.n_unknowns)])
    x, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if a.shape[0] < design.n_unknowns or rank < design.n_unknowns:
        raise UnderdeterminedFit(
            f"{a.shape[0]} equations and rank {rank} cannot determine "
            f"{design.n_unknowns} unknowns"
        )
    cond = float(sv[0] / sv[-1])
    if cond > _CONDITION_WARN:
        warnings.warn(f"ill-conditioned design (condition {cond:.3g})", stacklevel=2)
    residual = float(np.linalg.norm(design.matrix @ x - b[: design.matrix.shape[0]]))
    return x, residual, cond


def _blocks_from_solution(x: Array, m_modes: int) -> tuple:
    t = m_modes * (m_modes + 1) // 2
    iu = np.triu_indices(m_modes)
    out = []
    for fam in range(3):
        mat = np.zeros((m_modes, m_modes))
        mat[iu] = x[fam * t : (fam + 1) * t]
        mat = mat + mat.T - np.diag(np.diag(mat))
        out.append(mat)
    return tuple(out)


def fit_window(
    correlations: Mapping[float, Array],
    window: ReconstructionWindow,
    basis: ModeBasis,
    f_phi_table: Optional[Array] = None,
    z0: int = 0,
    ridge: float = 0.0,
) -> FitResult:
    """Least-squares recovery of the mode blocks at the window start time.

    `correlations` maps each hold offset dt (ms, relative to the window
    start) to its referenced correlation matrix.
    """
    offsets = sorted(correlations)
    if tuple(offsets) != window.hold_offsets_ms:
        raise ValidationError("correlation offsets do not match the window")
    design = build_window_design(
        basis, offsets, window.n_modes_fit, z0, f_phi_table
    )
    b = design.rhs([correlations[dt] for dt in offsets])
    x, residual, cond = _solve_design(design, b, ridge)
    qq, pp, qp = _blocks_from_solution(x, window.n_modes_fit)
    return FitResult(
        gamma_phiphi=qq,
        gamma_rhorho=pp,
        gamma_phirho=qp,
        residual_norm=residual,
        condition_number=cond,
        n_equations=design.matrix.shape[0],
        n_unknowns=design.n_unknowns,
    )


def sheared_zero_mode_block(
    params: FieldParameters, basis: ModeBasis, t_ms: float
) -> Array:
    """Thermal zero-mode 2x2 block propagated by the free shear to time t.

    The referenced correlations cannot see the uniform mode, so the
    reconstruction fills it in from the gapped thermal model evolved
    exactly: q(t) = q + u t p, p(t) = p.
    """
    phi_var, rho_var = massive_thermal_mode_variances(params, basis)
    zm = np.flatnonzero(basis.omega == 0)
    if zm.size != 1:
        raise ValidationError("no unique zero mode in this basis")
    a, b = phi_var[zm[0]], rho_var[zm[0]]
    ut = basis.u * t_ms
    return np.array([[a + ut * ut * b, ut * b], [ut * b, b]])


def project_physical(
    fit: FitResult,
    zero_mode_block: Optional[Array],
    basis: ModeBasis,
) -> tuple[CovarianceMatrix, bool]:
    """Assemble the full mode-space state and enforce physicality.

    Any normal-mode variance below the vacuum floor is raised to
    1/2 + 1e-10 in the state's own normal-mode frame (the minimal change
    that restores physicality); everything else is untouched.  Returns the
    state and whether the projection actually changed it.
    """
    m = fit.n_modes_fit
    cols = fit_mode_positions(basis, m)
    has_zm = bool(np.any(basis.omega == 0))
    if has_zm and zero_mode_block is None:
        raise ValidationError("this basis has a zero mode; its block is required")
    if not has_zm and zero_mode_block is not None:
        raise ValidationError("no zero mode in this basis")
    n = basis.n_modes
    if m + (1 if has_zm else 0) != n:
        raise ValidationError(
            f"{m} fitted modes (+{int(has_zm)} zero mode) cannot fill {n} modes"
        )
    gamma = np.zeros((2 * n, 2 * n))
    if has_zm:
        zb = np.asarray(zero_mode_block, dtype=float)
        zi = int(np.flatnonzero(basis.omega == 0)[0])
        gamma[zi, zi] = zb[0, 0]
        gamma[zi, n + zi] = gamma[n + zi, zi] = zb[0, 1]
        gamma[n + zi, n + zi] = zb[1, 1]
    gamma[np.ix_(cols, cols)] = 0.5 * (fit.gamma_phiphi + fit.gamma_phiphi.T)
    gamma[np.ix_(n + cols, n + cols)] = 0.5 * (fit.gamma_rhorho + fit.gamma_rhorho.T)
    sym_qp = 0.5 * (fit.gamma_phirho + fit.gamma_phirho.T)
    gamma[np.ix_(cols, n + cols)] = sym_qp
    gamma[np.ix_(n + cols, cols)] = sym_qp.T

    projected = False
    w, v = np.linalg.eigh(gamma)
    if w[0] < 1e-6:
        # indefinite fits (very noisy data) first get a matrix-eigenvalue
        # floor so the normal-form decomposition stays well conditioned;
        # every direction this touches is far below vacuum and gets raised
        # to the physical floor next anyway
        gamma = (v * np.clip(w, 1e-6, None)) @ v.T
        projected = True
    # One flooring pass suffices in exact arithmetic; ill-conditioned fits
    # can lose ~1e-6 through the normal-form round trip and another factor
    # through the pixel-space congruence, so verify both representations and
    # raise the floor until the physicality guarantee actually holds.
    floor = _LAMBDA_FLOOR
    for _ in range(10):
        dec = williamson(gamma)
        lam_min = float(dec.diag[-1])
        if lam_min >= floor:
            cov = CovarianceMatrix(PhaseSpaceLayout(n), gamma)
        else:
            d = np.clip(dec.diag, floor, None)
            gamma = (
                dec.symplectic @ np.diag(np.concatenate([d, d])) @ dec.symplectic.T
            )
            projected = True
            cov = CovarianceMatrix(PhaseSpaceLayout(n), gamma)
        achieved = min(
            symplectic_eigenvalues(cov)[-1],
            symplectic_eigenvalues(momentum_to_real(cov, basis))[-1],
        )
        if achieved >= 0.5 - 1e-9:
            return cov, projected
        floor = 0.5 + max(1e-10, 4.0 * (0.5 - achieved))
    raise NonConvergence("physicality projection did not converge")


@dataclass(frozen=True)
class ReconstructionEntry:
    t_ms: float
    gamma_modes: CovarianceMatrix
    gamma_real: CovarianceMatrix
    residual_norm: float
    condition_number: float
    projected: bool
    n_hold_times: int


@dataclass(frozen=True)
class ReconstructionSeries:
    entries: tuple
    failures: tuple  # (t_ms, message)

    @property
    def times_ms(self) -> tuple:
        return tuple(e.t_ms for e in self.entries)


@dataclass(frozen=True)
class ExactCorrelations:
    """Infinite-shot referenced correlations per hold time (oracle input)."""

    times_ms: tuple
    phi2: tuple  # one (N, N) matrix per hold time


def window_start_indices(times_ms: Sequence[float], window_ms: float) -> list:
    t = np.asarray(times_ms)
    return [i for i in range(t.size) if t[i] + window_ms <= t[-1] + 1e-9]


def _phi2_series(dataset, z0: int) -> tuple:
    if isinstance(dataset, ExactCorrelations):
        return dataset.times_ms, list(dataset.phi2)
    if isinstance(dataset, ShotEnsemble):
        mats = [referenced_phase_correlations(s, z0) for s in dataset.profiles]
        return dataset.times_ms, mats
    raise ValidationError(f"unsupported dataset type {type(dataset).__name__}")


def scan_reconstruction(
    dataset,
    params: FieldParameters,
    window_length_ms: float = 32.5,
    n_modes_fit: Optional[int] = None,
    z0: int = 0,
    ridge: float = 0.0,
    zero_mode_source: str = "theory",
    basis: Optional[ModeBasis] = None,
) -> ReconstructionSeries:
    """Reconstruct the state at every grid time whose window fits the grid.

    For each admissible start time t, the referenced correlations of all
    hold times in [t, t + window] are fitted jointly; the zero-mode block is
    filled from the sheared thermal model ("theory") or the vacuum
    ("vacuum"); the assembled state is projected to the physical cone and
    converted to pixel quadratures.  Failed windows are recorded and
    skipped.
    """
    basis = mode_basis(params) if basis is None else basis
    if n_modes_fit is None:
        n_modes_fit = int(np.count_nonzero(basis.omega > 0))
    times, phi2 = _phi2_series(dataset, z0)
    times_arr = np.asarray(times)
    f_table = blurred_phase_table(basis, params.psf_sigma_um)
    has_zm = bool(np.any(basis.omega == 0))

    entries = []
    failures = []
    for i in window_start_indices(times, window_length_ms):
        t0 = times_arr[i]
        members = np.flatnonzero(
            (times_arr >= t0 - 1e-9) & (times_arr <= t0 + window_length_ms + 1e-9)
        )
        offsets = tuple(times_arr[j] - t0 for j in members)
        try:
            window = ReconstructionWindow(
                start_time_ms=float(t0),
                hold_offsets_ms=offsets,
                window_length_ms=window_length_ms,
                n_modes_fit=n_modes_fit,
            )
            corr = {times_arr[j] - t0: phi2[j] for j in members}
            fit = fit_window(corr, window, basis, f_table, z0=z0, ridge=ridge)
            if has_zm:
                if zero_mode_source == "theory":
                    zm_block = sheared_zero_mode_block(params, basis, float(t0))
                elif zero_mode_source == "vacuum":
                    zm_block = 0.5 * np.eye(2)
                else:
                    raise ValidationError(
                        f"unknown zero_mode_source {zero_mode_source!r}"
                    )
            else:
                zm_block = None
            gamma_modes, projected = project_physical(fit, zm_block, basis)
            entries.append(
                ReconstructionEntry(
                    t_ms=float(t0),
                    gamma_modes=gamma_modes,
                    gamma_real=momentum_to_real(gamma_modes, basis),
                    residual_norm=fit.residual_norm,
                    condition_number=fit.condition_number,
                    projected=projected,
                    n_hold_times=len(offsets),
                )
            )
        except QuenchLabError as exc:
            failures.append((float(t0), f"{type(exc).__name__}: {exc}"))
    return ReconstructionSeries(entries=tuple(entries), failures=tuple(failures))


def exact_correlation_dataset(run, z0: int = 0) -> ExactCorrelations:
    """Infinite-shot correlations of a forward run's measurement track."""
    from .quench import exact_referenced_correlations

    mats = []
    for i in range(len(run.times_ms)):
        blurred = run.gamma_real_blurred(i)
        mats.append(
            exact_referenced_correlations(
                blurred.qq, z0, run.protocol.detection_noise_sigma
            )
        )
    return ExactCorrelations(times_ms=run.times_ms, phi2=tuple(mats))


@dataclass(frozen=True)
class TemperatureFit:
    temperature_nk: float
    residual: float


def temperature_fit(
    gamma_modes: CovarianceMatrix,
    params: FieldParameters,
    basis: Optional[ModeBasis] = None,
) -> TemperatureFit:
    """Single-parameter fit of the initial temperature to mode variances.

    Compares the oscillating-mode phase and density variances of a
    reconstructed t = 0 state against the gapped thermal model; the
    objective sums squared log-ratios, which is scale-free across the
    strongly squeezed mode hierarchy and tempers occasional badly-measured
    high modes.
    """
    basis = mode_basis(params) if basis is None else basis
    osc = np.flatnonzero(basis.omega > 0)
    n = gamma_modes.n
    obs = np.concatenate(
        [np.diag(gamma_modes.qq)[osc], np.diag(gamma_modes.pp)[osc]]
    )
    if np.any(obs <= 0):
        raise DegenerateFit("non-positive mode variance in temperature fit")

    hbar_over_kb_ms_per_nk = params.beta * params.temperature_nk

    def objective(t_nk: float) -> float:
        beta = hbar_over_kb_ms_per_nk / t_nk
        phi_var, rho_var = massive_thermal_mode_variances(
            params, basis, beta=beta
        )
        model = np.concatenate([phi_var[osc], rho_var[osc]])
        r = np.log(obs / model)
        return float(r @ r)

    res = minimize_scalar(
        objective, bounds=(0.05, 5000.0), method="bounded",
        options={"xatol": 1e-7},
    )
    return TemperatureFit(temperature_nk=float(res.x), residual=float(res.fun))
