"""Forward simulation of the mass quench and synthetic phase measurements.

The protocol: thermalize the gapped model (tunnelling J > 0), switch J to
zero instantaneously at t = 0, evolve every mode under the massless model
(rotations at omega_k, shear for the Neumann zero mode), and at each hold
time draw Gaussian phase profiles whose covariance is the imaging-blurred
phase block of the evolved state.  Two state tracks are kept: the unblurred
ground truth used for oracle comparisons, and the blurred measurement track
that feeds shot synthesis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import FactorizationFailure, ValidationError
from .field import (
    FieldParameters,
    ModeBasis,
    kg_hamiltonian,
    mode_basis,
    momentum_to_real,
    psf_blur,
)
from .gaussian import CovarianceMatrix, propagate, thermal_covariance

Array = NDArray[np.float64]

_SHOT_STREAM = 0x53484F54  # domain separator for shot sampling


@dataclass(frozen=True)
class QuenchProtocol:
    """Hold-time grid, statistics and seeding of one simulated experiment."""

    params: FieldParameters
    time_grid_ms: tuple
    shots_per_time: int
    seed: int
    detection_noise_sigma: float = 0.0

    def __post_init__(self):
        grid = tuple(float(t) for t in self.time_grid_ms)
        if len(grid) == 0 or grid[0] != 0.0:
            raise ValidationError("time grid must start at 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("time grid must be strictly ascending")
        if self.shots_per_time < 1:
            raise ValidationError(
                f"shots_per_time must be >= 1, got {self.shots_per_time}"
            )
        if self.detection_noise_sigma < 0:
            raise ValidationError("detection noise sigma must be >= 0")
        object.__setattr__(self, "time_grid_ms", grid)


@dataclass(frozen=True)
class ShotEnsemble:
    """Sampled relative-phase profiles phi(z_m) per hold time."""

    times_ms: tuple
    profiles: tuple  # one (n_shots, n_pixels) array per hold time
    seed: int
    psf_applied: bool
    detection_noise_sigma: float = 0.0

    def __post_init__(self):
        frozen = []
        for arr in self.profiles:
            arr = np.asarray(arr, dtype=float)
            if arr.ndim != 2:
                raise ValidationError("shot matrices must be 2D (shots x pixels)")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("shot matrices must be finite")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "profiles", tuple(frozen))
        object.__setattr__(self, "times_ms", tuple(float(t) for t in self.times_ms))

    @property
    def n_pixels(self) -> int:
        return self.profiles[0].shape[1]

    def resample(self, rng: np.random.Generator) -> "ShotEnsemble":
        """Bootstrap resample: draw shots with replacement at each hold time."""
        new = []
        for arr in self.profiles:
            idx = rng.integers(0, arr.shape[0], size=arr.shape[0])
            new.append(arr[idx])
        return ShotEnsemble(
            self.times_ms, tuple(new), self.seed, self.psf_applied,
            self.detection_noise_sigma,
        )


def prepare_prequench(
    params: FieldParameters, basis: Optional[ModeBasis] = None
) -> CovarianceMatrix:
    """Mode-space thermal state of the gapped (J > 0) model at temperature T."""
    if params.j_rad_per_ms <= 0:
        raise ValidationError("pre-quench preparation requires J > 0")
    basis = mode_basis(params) if basis is None else basis
    ham = kg_hamiltonian(params, params.j_rad_per_ms, basis)
    return thermal_covariance(ham, params.beta)


def evolve_postquench(
    gamma0_modes: CovarianceMatrix,
    params: FieldParameters,
    t_ms: float,
    basis: Optional[ModeBasis] = None,
) -> CovarianceMatrix:
    """Evolve a mode-space state under the massless (J = 0) model."""
    if t_ms < 0:
        raise ValidationError(f"hold time must be >= 0, got {t_ms}")
    basis = mode_basis(params) if basis is None else basis
    ham = kg_hamiltonian(params, 0.0, basis)
    return propagate(gamma0_modes, ham, t_ms)


def _shot_rng(seed: int, time_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(int(seed), _SHOT_STREAM, int(time_index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_phase_shots(
    gamma_t: CovarianceMatrix, protocol: QuenchProtocol, time_index: int
) -> Array:
    """Draw zero-mean Gaussian phase profiles from the phase block of gamma_t.

    gamma_t is the measurement-track (blurred) state at
    protocol.time_grid_ms[time_index]; detection noise adds an independent
    diagonal term.  Deterministic given (seed, time_index); the counter-based
    generator makes parallel and serial synthesis bit-identical.
    """
    cov = np.array(gamma_t.qq)
    sigma_d = protocol.detection_noise_sigma
    if sigma_d > 0:
        cov[np.diag_indices_from(cov)] += sigma_d**2
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -1e-10 * scale:
        raise FactorizationFailure(
            f"phase covariance indefinite (min eigenvalue {w[0]:.3g})"
        )
    if w[0] < 0:
        warnings.warn(
            f"clipping small negative phase-covariance eigenvalue {w[0]:.3g}",
            stacklevel=2,
        )
    root = v * np.sqrt(np.clip(w, 0.0, None))
    rng = _shot_rng(protocol.seed, time_index)
    z = rng.standard_normal((protocol.shots_per_time, cov.shape[0]))
    return z @ root.T


def referenced_phase_correlations(shots: Array, z0_index: int) -> Array:
    """Sample average of (phi_m - phi_z0)(phi_n - phi_z0) over shots."""
    shots = np.asarray(shots, dtype=float)
    if shots.shape[0] < 2:
        raise ValidationError("need at least two shots")
    ref = shots - shots[:, [z0_index]]
    return ref.T @ ref / shots.shape[0]


def exact_referenced_correlations(
    gamma_phiphi: Array, z0_index: int, noise_sigma: float = 0.0
) -> Array:
    """Infinite-shot limit of `referenced_phase_correlations`.

    Expanding the referenced product gives G[m,n] - G[m,z0] - G[z0,n]
    + G[z0,z0]; detection noise contributes sigma^2 (delta_mn + 1) off the
    reference row/column and zero on it.
    """
    g = np.asarray(gamma_phiphi, dtype=float)
    out = g - g[[z0_index], :] - g[:, [z0_index]] + g[z0_index, z0_index]
    if noise_sigma > 0:
        n = g.shape[0]
        noise = noise_sigma**2 * (np.eye(n) + np.ones((n, n)))
        noise[z0_index, :] = 0.0
        noise[:, z0_index] = 0.0
        out = out + noise
    return out


@dataclass(frozen=True)
class ForwardRun:
    """Ground-truth evolution plus the synthetic measurement record."""

    protocol: QuenchProtocol
    basis: ModeBasis
    gamma_modes: tuple  # unblurred mode-space CovarianceMatrix per hold time
    ensemble: Optional[ShotEnsemble]

    @property
    def times_ms(self) -> tuple:
        return self.protocol.time_grid_ms

    def gamma_real(self, i: int) -> CovarianceMatrix:
        return momentum_to_real(self.gamma_modes[i], self.basis)

    def gamma_real_blurred(self, i: int) -> CovarianceMatrix:
        return psf_blur(
            self.gamma_real(i), self.protocol.params.psf_sigma_um, self.basis
        )


def simulate_protocol(protocol: QuenchProtocol, with_shots: bool = True) -> ForwardRun:
    """Run the quench end to end on the protocol's hold-time grid."""
    params = protocol.params
    basis = mode_basis(params)
    gamma0 = prepare_prequench(params, basis)
    ham_free = kg_hamiltonian(params, 0.0, basis)
    gammas = tuple(propagate(gamma0, ham_free, t) for t in protocol.time_grid_ms)
    ensemble = None
    if with_shots:
        profiles = []
        for i, gm in enumerate(gammas):
            blurred = psf_blur(
                momentum_to_real(gm, basis), params.psf_sigma_um, basis
            )
            profiles.append(sample_phase_shots(blurred, protocol, i))
        ensemble = ShotEnsemble(
            times_ms=protocol.time_grid_ms,
            profiles=tuple(profiles),
            seed=protocol.seed,
            psf_applied=True,
            detection_noise_sigma=protocol.detection_noise_sigma,
        )
    return ForwardRun(protocol=protocol, basis=basis, gamma_modes=gammas, ensemble=ensemble)
