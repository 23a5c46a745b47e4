"""Klein-Gordon model of two tunnel-coupled 1D quasicondensates.

The relative phase phi(z) and relative density drho(z) of the pair obey
[phi(z), drho(z')] = i delta(z - z') and, for low-energy excitations, the
Hamiltonian

    H = int_0^L dz [ g1d drho^2 + (hbar^2 n1d / 4m) (d_z phi)^2
                     + hbar J n1d phi^2 ],

a massive Klein-Gordon model whose mass gap omega_m = sqrt(4 g1d n1d J / hbar)
vanishes when the tunnelling rate J is quenched to zero.  This module builds
the discrete N-pixel / N-mode representation: cosine (Neumann) or sine
(Dirichlet) eigenfunction tables, the diagonal mode-space Hamiltonians, the
effective real-space environment Hamiltonian for a subregion, and the Gibbs
thermodynamics (partition function, energy, effective inverse temperature)
of that environment.

Internal units: lengths in um, times in ms, energies in hbar * rad/ms
(i.e. hbar = 1), temperatures converted so that beta = hbar / (kB T) is in
ms.  SI values enter only through `FieldParameters`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .errors import (
    BelowZeroPoint,
    InvalidPartition,
    NonConvergence,
    ValidationError,
)
from .gaussian import (
    CovarianceMatrix,
    PhaseSpaceLayout,
    QuadraticHamiltonian,
)

Array = NDArray[np.float64]

HBAR_SI = 1.054571817e-34  # J s
KB_SI = 1.380649e-23  # J / K

_M_PER_S_TO_UM_PER_MS = 1e3
_M2_PER_S_TO_UM2_PER_MS = 1e9

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class FieldParameters:
    """Physical parameters in SI-facing units (um, nK, Hz, kg, m)."""

    length_um: float = 49.0
    density_per_um: float = 70.0
    atom_mass_kg: float = 1.433e-25
    g1d_si: float = 8.594e-39  # kg m^3 / s^2
    tunnel_hz: float = 0.76
    temperature_nk: float = 49.0
    n_pixels: int = 7
    bc: str = NEUMANN
    psf_sigma_um: float = 3.0
    omega_perp_hz: float = 1400.0
    scattering_length_nm: float = 5.2

    # --- internal-unit views -------------------------------------------------

    @property
    def g(self) -> float:
        """Interaction strength g1d / hbar in um * rad/ms."""
        return self.g1d_si / HBAR_SI * _M_PER_S_TO_UM_PER_MS

    @property
    def hbar_over_m(self) -> float:
        """hbar / m in um^2 / ms."""
        return HBAR_SI / self.atom_mass_kg * _M2_PER_S_TO_UM2_PER_MS

    @property
    def j_rad_per_ms(self) -> float:
        return 2.0 * math.pi * self.tunnel_hz * 1e-3

    @property
    def beta(self) -> float:
        """Inverse temperature hbar / (kB T) in ms."""
        t_kelvin = self.temperature_nk * 1e-9
        return HBAR_SI / (KB_SI * t_kelvin) * 1e3

    @property
    def sound_speed(self) -> float:
        """c = sqrt(g1d n1d / m) in um/ms."""
        return math.sqrt(self.g * self.density_per_um * self.hbar_over_m)

    @property
    def zero_mode_rate(self) -> float:
        """u = 2 g1d / (hbar L) in rad/ms."""
        return 2.0 * self.g / self.length_um

    @property
    def healing_length_um(self) -> float:
        """l_C = sqrt(hbar / (4 m J))."""
        return math.sqrt(self.hbar_over_m / (4.0 * self.j_rad_per_ms))

    @property
    def phase_coherence_length_um(self) -> float:
        """lambda_T = 2 hbar^2 n1d / (m kB T)."""
        return 2.0 * self.hbar_over_m * self.density_per_um * self.beta

    @property
    def dz(self) -> float:
        return self.length_um / self.n_pixels

    def mass_gap(self, tunnel_rate: Optional[float] = None) -> float:
        """omega_m = sqrt(4 g1d n1d J / hbar) in rad/ms."""
        j = self.j_rad_per_ms if tunnel_rate is None else tunnel_rate
        return math.sqrt(4.0 * self.g * self.density_per_um * j)

    def validate(self) -> "FieldParameters":
        positive_fields = {
            "length_um": self.length_um,
            "density_per_um": self.density_per_um,
            "atom_mass_kg": self.atom_mass_kg,
            "g1d_si": self.g1d_si,
            "tunnel_hz": self.tunnel_hz,
            "temperature_nk": self.temperature_nk,
            "psf_sigma_um": self.psf_sigma_um + 1.0,  # sigma = 0 allowed
            "omega_perp_hz": self.omega_perp_hz,
            "scattering_length_nm": self.scattering_length_nm,
        }
        for name, value in positive_fields.items():
            if not value > 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        if self.n_pixels < 2:
            raise ValidationError(f"n_pixels must be >= 2, got {self.n_pixels}")
        if self.bc not in (NEUMANN, DIRICHLET):
            raise ValidationError(f"bc must be 'neumann' or 'dirichlet', got {self.bc!r}")
        if self.phase_coherence_length_um <= self.healing_length_um:
            raise ValidationError(
                "outside the quadratic-model regime: phase coherence length "
                f"{self.phase_coherence_length_um:.3g} um does not exceed the "
                f"healing length {self.healing_length_um:.3g} um"
            )
        return self


def g1d_from_scattering(params: FieldParameters) -> float:
    """Interaction strength from the transverse trap and 3D scattering length.

    g1d = hbar w_perp a_s (2 + 3 a_s n1d) / (1 + 2 a_s n1d), returned in SI
    units (kg m^3 / s^2).
    """
    a_s = params.scattering_length_nm * 1e-9
    n_si = params.density_per_um * 1e6
    w_perp = 2.0 * math.pi * params.omega_perp_hz
    an = a_s * n_si
    return HBAR_SI * w_perp * a_s * (2.0 + 3.0 * an) / (1.0 + 2.0 * an)


def derived_scales(params: FieldParameters) -> dict:
    """Sound speed, healing length, phase-coherence length, zero-mode rate."""
    return {
        "c_um_per_ms": params.sound_speed,
        "healing_length_um": params.healing_length_um,
        "phase_coherence_length_um": params.phase_coherence_length_um,
        "zero_mode_rate_rad_per_ms": params.zero_mode_rate,
    }


@dataclass(frozen=True)
class PartitionSpec:
    """Left-edge system of N_S pixels against the remaining environment."""

    n_system_pixels: int
    n_total_pixels: int

    def __post_init__(self):
        if not 1 <= self.n_system_pixels <= self.n_total_pixels - 1:
            raise InvalidPartition(
                f"system must keep 1..{self.n_total_pixels - 1} pixels, "
                f"got {self.n_system_pixels}"
            )

    @property
    def n_env_pixels(self) -> int:
        return self.n_total_pixels - self.n_system_pixels

    @property
    def system_pixels(self) -> range:
        return range(self.n_system_pixels)

    @property
    def env_pixels(self) -> range:
        return range(self.n_system_pixels, self.n_total_pixels)

    def complement(self) -> "PartitionSpec":
        return PartitionSpec(self.n_env_pixels, self.n_total_pixels)


@dataclass(frozen=True)
class ModeBasis:
    """Eigenfunction tables on the pixel grid plus dispersion data.

    `f_phi[m, k]` and `f_rho[m, k]` tabulate the phase and density
    eigenfunctions at the cell centers z_m = (m + 1/2) dz.  The canonical
    pixel quadratures are (phi(z_m), dz * drho(z_m)); with that scaling the
    mode -> pixel map is exactly symplectic.
    """

    bc: str
    length_um: float
    z: Array
    dz: float
    k_index: Array
    omega: Array  # rad/ms, one entry per mode (0 for the Neumann zero mode)
    f_phi: Array  # (n_pixels, n_modes)
    f_rho: Array
    u: float  # zero-mode shear rate 2 g / (hbar L)
    c: float

    @property
    def n_pixels(self) -> int:
        return self.z.size

    @property
    def n_modes(self) -> int:
        return self.k_index.size

    def to_real(self) -> Array:
        """Symplectic mode -> pixel transform, block diag(f_phi, dz f_rho)."""
        n = self.n_pixels
        t = np.zeros((2 * n, 2 * n))
        t[:n, :n] = self.f_phi
        t[n:, n:] = self.dz * self.f_rho
        return t

    def to_modes(self) -> Array:
        """Inverse of `to_real` (exact by mixed-basis completeness)."""
        n = self.n_pixels
        t = np.zeros((2 * n, 2 * n))
        t[:n, :n] = self.dz * self.f_rho.T
        t[n:, n:] = self.f_phi.T
        return t


def mode_basis(
    params: FieldParameters,
    n_pixels: Optional[int] = None,
    length_um: Optional[float] = None,
) -> ModeBasis:
    """Build the eigenfunction tables for a box of given length and pixels.

    Neumann: cosine modes k = 0..N-1 including the uniform zero mode
    (f_0^phi = 1, f_0^rho = 1/L).  Dirichlet: sine modes k = 1..N with the
    top mode carrying weight 1/sqrt(2) so the discrete transform stays
    exactly canonical on the cell-centered grid.
    """
    n = int(params.n_pixels if n_pixels is None else n_pixels)
    if n < 1:
        raise ValidationError(f"need at least one pixel, got {n}")
    length = float(
        params.dz * n if length_um is None and n_pixels is not None
        else (params.length_um if length_um is None else length_um)
    )
    dz = length / n
    z = (np.arange(n) + 0.5) * dz
    c = params.sound_speed
    g = params.g
    hm_n = params.hbar_over_m * params.density_per_um
    # amp_phi * amp_rho = 2/L; the ratio encodes the phase/density scaling.
    squeeze = math.sqrt(g / hm_n)  # sqrt(m g1d / n1d) / hbar, dimensionless

    if params.bc == NEUMANN:
        k = np.arange(n)
        theta = np.pi * np.outer(z, k) / length
        shape = np.cos(theta)
        amp_phi = np.where(k > 0, 2.0 * np.sqrt(squeeze / (np.pi * np.maximum(k, 1))), 1.0)
        amp_rho = np.where(
            k > 0,
            np.sqrt(np.pi * np.maximum(k, 1) / squeeze) / length,
            1.0 / length,
        )
    else:
        k = np.arange(1, n + 1)
        theta = np.pi * np.outer(z, k) / length
        shape = np.sin(theta)
        half = np.where(k == n, 1.0 / math.sqrt(2.0), 1.0)
        amp_phi = 2.0 * np.sqrt(squeeze / (np.pi * k)) * half
        amp_rho = np.sqrt(np.pi * k / squeeze) / length * half
    omega = c * np.pi * k / length

    return ModeBasis(
        bc=params.bc,
        length_um=length,
        z=z,
        dz=dz,
        k_index=k.astype(float),
        omega=omega,
        f_phi=shape * amp_phi,
        f_rho=shape * amp_rho,
        u=2.0 * g / length,
        c=c,
    )


def kg_hamiltonian(
    params: FieldParameters, tunnel_rate: float, basis: ModeBasis
) -> QuadraticHamiltonian:
    """Mode-space Klein-Gordon Hamiltonian at tunnelling rate J (rad/ms).

    Oscillating modes carry phi^2 coefficient (omega_k^2 + omega_m^2) /
    (2 omega_k) and drho^2 coefficient omega_k / 2; the Neumann zero mode
    carries (u/2) drho_0^2 plus the mass term J n1d L phi_0^2, which closes
    the gap at exactly omega_m.  J = 0 gives the diagonal massless form.
    """
    if tunnel_rate < 0:
        raise ValidationError(f"tunnel rate must be >= 0, got {tunnel_rate}")
    n = basis.n_modes
    omega_m_sq = 4.0 * params.g * params.density_per_um * tunnel_rate
    h = np.zeros((2 * n, 2 * n))
    for i in range(n):
        w = basis.omega[i]
        if w > 0:
            h[i, i] = (w * w + omega_m_sq) / (2.0 * w)
            h[n + i, n + i] = 0.5 * w
        else:
            h[i, i] = tunnel_rate * params.density_per_um * basis.length_um
            h[n + i, n + i] = 0.5 * basis.u
    return QuadraticHamiltonian(PhaseSpaceLayout(n), h)


def _segment_params(params: FieldParameters, n_pix: int) -> FieldParameters:
    return replace(params, n_pixels=n_pix, length_um=n_pix * params.dz)


def segment_basis(params: FieldParameters, n_pix: int) -> ModeBasis:
    """Mode basis of an isolated sub-box of n_pix pixels (same pixel size)."""
    return mode_basis(params, n_pixels=n_pix, length_um=n_pix * params.dz)


def environment_hamiltonian(
    params: FieldParameters, split: PartitionSpec
) -> QuadraticHamiltonian:
    """Real-space massless Hamiltonian of the environment subregion.

    Truncating the continuum subregion Hamiltonian to its lowest N_E modes
    (linear dispersion omega_k = c k pi / L_E) and converting back to pixel
    operators yields a local density term plus a long-range phase coupling:

        H_E = g1d dz sum_n drho(z_n)^2
              + (hbar^2 n1d / 4 m dz) (2 pi^2 / N_E^3) sum_{n,m} kappa_nm
                phi(z_n) phi(z_m)

    with kappa the mode-number-weighted cosine (Neumann) or sine (Dirichlet)
    kernel over the subregion grid.  The Neumann zero-mode term
    (hbar u_E / 2) drho_0^2 is contained in the density sum.  Expressed here
    on canonical quadratures (phi_n, p_n = dz drho_n).
    """
    if split.n_total_pixels != params.n_pixels:
        raise InvalidPartition(
            f"split is over {split.n_total_pixels} pixels, field has {params.n_pixels}"
        )
    return _massless_segment_hamiltonian(params, split.n_env_pixels)


def _massless_segment_hamiltonian(
    params: FieldParameters, n_pix: int
) -> QuadraticHamiltonian:
    """Truncated massless Hamiltonian of an n_pix sub-box, pixel coordinates."""
    if not 1 <= n_pix <= params.n_pixels:
        raise InvalidPartition(f"subregion of {n_pix} pixels out of range")
    dz = params.dz
    local = np.arange(n_pix) + 0.5
    if params.bc == NEUMANN:
        ks = np.arange(1, n_pix)
        weights = np.ones(ks.size)
        tables = np.cos(np.pi * np.outer(ks, local) / n_pix)
    else:
        ks = np.arange(1, n_pix + 1)
        weights = np.where(ks == n_pix, 0.5, 1.0)
        tables = np.sin(np.pi * np.outer(ks, local) / n_pix)
    kappa = np.einsum("k,k,km,kn->mn", ks.astype(float) ** 2, weights, tables, tables)
    coeff = (params.hbar_over_m * params.density_per_um / (4.0 * dz)) * (
        2.0 * math.pi**2 / n_pix**3
    )
    h = np.zeros((2 * n_pix, 2 * n_pix))
    h[:n_pix, :n_pix] = coeff * 0.5 * (kappa + kappa.T)
    h[n_pix:, n_pix:] = (params.g / dz) * np.eye(n_pix)
    return QuadraticHamiltonian(PhaseSpaceLayout(n_pix), h)


def env_mode_frequencies(params: FieldParameters, split: PartitionSpec) -> Array:
    """Oscillating-mode frequencies omega_k = c k pi / L_E of the subregion."""
    length_e = split.n_env_pixels * params.dz
    if params.bc == NEUMANN:
        ks = np.arange(1, split.n_env_pixels)
    else:
        ks = np.arange(1, split.n_env_pixels + 1)
    return params.sound_speed * np.pi * ks / length_e


def env_zero_mode_rate(params: FieldParameters, split: PartitionSpec) -> Optional[float]:
    """u_E = 2 g / (hbar L_E) for Neumann subregions, None for Dirichlet."""
    if params.bc != NEUMANN:
        return None
    return 2.0 * params.g / (split.n_env_pixels * params.dz)


@dataclass(frozen=True)
class EnvThermo:
    """Gibbs-state thermodynamics of the truncated subregion Hamiltonian."""

    beta: float
    log_partition: float
    energy: float
    zero_mode_log_partition: float
    harmonic_log_partition: float
    zero_mode_energy: float
    harmonic_energy: float


def _log_z_harmonic(freqs: Array, beta: float) -> float:
    # log(2 sinh x) = x + log(1 - exp(-2x)), stable for every x > 0.
    x = 0.5 * beta * np.asarray(freqs)
    return float(-np.sum(x + np.log1p(-np.exp(-2.0 * x))))


def _energy_harmonic(freqs: Array, beta: float) -> float:
    freqs = np.asarray(freqs)
    return float(np.sum(0.5 * freqs / np.tanh(0.5 * beta * freqs)))


def _theta_sums(beta_u: float) -> tuple[float, float]:
    """(Z, sum n^2 exp(...)) for Z = sum_n exp(-beta u n^2 / 2) over n in Z.

    Terms below 1e-16 are dropped; the closed Gaussian-integral
    approximation sqrt(2 pi / beta u) is used only as a cross-check in the
    tests, never here.
    """
    if beta_u <= 0:
        raise ValidationError(f"beta * u must be positive, got {beta_u}")
    # exp(-x n^2 / 2) < 1e-16 once n^2 > 2 * 36.85 / x
    n_max = int(math.sqrt(73.7 / beta_u)) + 1
    if n_max > 20_000_000:  # pragma: no cover - guards absurd beta
        raise NonConvergence("zero-mode partition sum did not truncate")
    n = np.arange(1, n_max + 1)
    terms = np.exp(-0.5 * beta_u * n * n)
    z = 1.0 + 2.0 * float(np.sum(terms))
    zn2 = 2.0 * float(np.sum(n * n * terms))
    return z, zn2


def thermo_from_spectrum(
    beta: float, freqs: Array, zero_mode_rate: Optional[float] = None
) -> EnvThermo:
    """Partition function and energy of oscillating modes plus a free mode.

    The free (zero) mode lives on a compact phase, so its spectrum is
    (rate/2) n^2 over integers n and the partition sum is evaluated exactly
    as a truncated theta sum rather than by its Gaussian-integral
    approximation.
    """
    if beta <= 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    freqs = np.asarray(freqs, dtype=float)
    log_z_ho = _log_z_harmonic(freqs, beta) if freqs.size else 0.0
    e_ho = _energy_harmonic(freqs, beta) if freqs.size else 0.0
    if zero_mode_rate is None:
        log_z_zm, e_zm = 0.0, 0.0
    else:
        z, zn2 = _theta_sums(beta * zero_mode_rate)
        log_z_zm = math.log(z)
        e_zm = 0.5 * zero_mode_rate * zn2 / z
    return EnvThermo(
        beta=beta,
        log_partition=log_z_zm + log_z_ho,
        energy=e_zm + e_ho,
        zero_mode_log_partition=log_z_zm,
        harmonic_log_partition=log_z_ho,
        zero_mode_energy=e_zm,
        harmonic_energy=e_ho,
    )


def env_thermo(beta: float, split: PartitionSpec, params: FieldParameters) -> EnvThermo:
    """Exact partition function and energy at inverse temperature beta (ms)."""
    return thermo_from_spectrum(
        beta, env_mode_frequencies(params, split), env_zero_mode_rate(params, split)
    )


def gibbs_log_partition(beta: float, split: PartitionSpec, params: FieldParameters) -> float:
    return env_thermo(beta, split, params).log_partition


def gibbs_energy(beta: float, split: PartitionSpec, params: FieldParameters) -> float:
    return env_thermo(beta, split, params).energy


def env_zero_point_energy(params: FieldParameters, split: PartitionSpec) -> float:
    """Ground-state energy sum of the truncated subregion modes."""
    return float(0.5 * np.sum(env_mode_frequencies(params, split)))


def beta_matching_energy(
    e_target: float, freqs: Array, zero_mode_rate: Optional[float] = None
) -> float:
    """The unique beta whose Gibbs energy over this spectrum is `e_target`.

    Gibbs energy decreases strictly in beta, so a bracketing root solve is
    exact; the bracket expands geometrically on both sides.
    """
    freqs = np.asarray(freqs, dtype=float)
    e_zp = float(0.5 * np.sum(freqs))
    if not e_target > e_zp * (1.0 + 1e-14):
        raise BelowZeroPoint(
            f"target energy {e_target:.6g} does not exceed the zero-point "
            f"energy {e_zp:.6g}"
        )

    def gap(beta: float) -> float:
        return thermo_from_spectrum(beta, freqs, zero_mode_rate).energy - e_target

    lo = 1e-6
    while gap(lo) <= 0:
        lo /= 8.0
        if lo < 1e-300:
            raise NonConvergence("failed to bracket effective beta from below")
    hi = max(2.0 * lo, 1e-3)
    while gap(hi) >= 0:
        hi *= 8.0
        if hi > 1e300:
            raise NonConvergence("failed to bracket effective beta from above")
    return float(brentq(gap, lo, hi, rtol=1e-13, maxiter=400))


def effective_beta(
    e_target: float, split: PartitionSpec, params: FieldParameters
) -> float:
    """Inverse temperature whose subregion Gibbs state carries `e_target`."""
    return beta_matching_energy(
        e_target, env_mode_frequencies(params, split), env_zero_mode_rate(params, split)
    )


def relative_entropy_to_gibbs(
    gamma_env: CovarianceMatrix,
    beta: float,
    split: PartitionSpec,
    params: FieldParameters,
    env_ham: Optional[QuadraticHamiltonian] = None,
    log_z: Optional[float] = None,
) -> float:
    """-S(rho_E) + beta Tr[rho_E H_E] + log Z_E(beta), in nats."""
    from .gaussian import mean_energy, von_neumann_entropy

    ham = environment_hamiltonian(params, split) if env_ham is None else env_ham
    if log_z is None:
        log_z = gibbs_log_partition(beta, split, params)
    return -von_neumann_entropy(gamma_env) + beta * mean_energy(gamma_env, ham) + log_z


# --- mode <-> pixel conversion and imaging ----------------------------------


def momentum_to_real(gamma_modes: CovarianceMatrix, basis: ModeBasis) -> CovarianceMatrix:
    """Congruence transform of a mode-space state to pixel quadratures."""
    t = basis.to_real()
    return CovarianceMatrix(gamma_modes.layout, t @ gamma_modes.gamma @ t.T)


def real_to_momentum(gamma_real: CovarianceMatrix, basis: ModeBasis) -> CovarianceMatrix:
    t = basis.to_modes()
    return CovarianceMatrix(gamma_real.layout, t @ gamma_real.gamma @ t.T)


def psf_kernel(basis: ModeBasis, sigma_um: float) -> Array:
    """Row-normalized Gaussian blur matrix on the pixel grid (no wrap)."""
    if sigma_um < 0:
        raise ValidationError(f"PSF sigma must be >= 0, got {sigma_um}")
    if sigma_um == 0:
        return np.eye(basis.n_pixels)
    dist = basis.z[:, None] - basis.z[None, :]
    b = np.exp(-0.5 * (dist / sigma_um) ** 2)
    return b / b.sum(axis=1, keepdims=True)


def psf_blur(
    gamma_real: CovarianceMatrix, sigma_um: float, basis: ModeBasis
) -> CovarianceMatrix:
    """Apply imaging blur to the phase sector: phi -> B phi, density untouched."""
    b = psf_kernel(basis, sigma_um)
    n = gamma_real.n
    t = np.eye(2 * n)
    t[:n, :n] = b
    return CovarianceMatrix(gamma_real.layout, t @ gamma_real.gamma @ t.T)


# --- closed-form thermal mode variances (oracle for fits and tests) ---------


def massive_thermal_mode_variances(
    params: FieldParameters,
    basis: ModeBasis,
    tunnel_rate: Optional[float] = None,
    beta: Optional[float] = None,
) -> tuple[Array, Array]:
    """Per-mode (phi, drho) variances of the gapped thermal state.

    For an oscillating mode the quadratic form (a/2) q^2 + (b/2) p^2 with
    a = (omega^2 + omega_m^2)/omega, b = omega thermalizes to
    <q^2> = (omega / omega~)(1/2) coth(beta omega~ / 2) and
    <p^2> = (omega~ / omega)(1/2) coth(beta omega~ / 2), omega~^2 = omega^2
    + omega_m^2; the Neumann zero mode follows the same rule with b = u.
    """
    j = params.j_rad_per_ms if tunnel_rate is None else tunnel_rate
    b_inv = params.beta if beta is None else beta
    omega_m_sq = 4.0 * params.g * params.density_per_um * j
    phi_var = np.empty(basis.n_modes)
    rho_var = np.empty(basis.n_modes)
    for i, w in enumerate(basis.omega):
        if w > 0:
            a_c, b_c = (w * w + omega_m_sq) / w, w
        else:
            if j <= 0:
                raise ZeroDivisionError("massless zero mode has no thermal state")
            a_c, b_c = 2.0 * j * params.density_per_um * basis.length_um, basis.u
        nu = math.sqrt(a_c * b_c)
        occ = 0.5 / math.tanh(0.5 * b_inv * nu)
        phi_var[i] = occ * math.sqrt(b_c / a_c)
        rho_var[i] = occ * math.sqrt(a_c / b_c)
    return phi_var, rho_var
