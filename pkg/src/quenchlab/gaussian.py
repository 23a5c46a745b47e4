"""Gaussian-state linear algebra on canonical quadratures.

All states are zero-mean Gaussian states of N bosonic modes, described by the
2N x 2N covariance matrix of the quadrature vector

    X = (q_1, ..., q_N, p_1, ..., p_N),    [q_j, p_k] = i delta_jk,

in the convention where every pure normal mode has variance 1/2 (symplectic
eigenvalues satisfy lambda >= 1/2 for physical states).  Quadratic
Hamiltonians are stored as the symmetric matrix of the form H = X^T Hmat X
plus a scalar offset, with energies in units of hbar * rad/ms.

Everything here is boundary-condition and model agnostic; values are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg as sla

from .errors import (
    EmptyRegion,
    LayoutMismatch,
    NonConvergence,
    UnphysicalState,
    ZeroModeAtFiniteMass,
)

Array = NDArray[np.float64]

# Evaluate (lam - 1/2) ln(lam - 1/2) as 0 below this excess to avoid log(0).
_PURITY_EPS = 1e-12
_PHYSICALITY_TOL = 1e-8
_SYMPLECTIC_TOL = 1e-9


def symplectic_form(n_modes: int) -> Array:
    """Return Omega = [[0, 1], [-1, 0]] with N x N identity blocks."""
    n = int(n_modes)
    omega = np.zeros((2 * n, 2 * n))
    omega[:n, n:] = np.eye(n)
    omega[n:, :n] = -np.eye(n)
    return omega


def _frozen(arr: Array) -> Array:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PhaseSpaceLayout:
    """Mode count and canonical ordering (all q first, then all p)."""

    n_modes: int

    def __post_init__(self):
        if self.n_modes < 1:
            raise LayoutMismatch(f"need at least one mode, got {self.n_modes}")

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    @property
    def omega(self) -> Array:
        return symplectic_form(self.n_modes)


def _check_square(mat: Array, what: str) -> Array:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
        raise LayoutMismatch(f"{what} must be square 2N x 2N, got {mat.shape}")
    asym = np.max(np.abs(mat - mat.T))
    scale = max(1.0, float(np.max(np.abs(mat))))
    if asym > 1e-9 * scale:
        raise NonConvergence(f"{what} asymmetry {asym:.3g} exceeds tolerance")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric second-moment matrix with q/p blocks on a fixed layout."""

    layout: PhaseSpaceLayout
    gamma: Array

    def __post_init__(self):
        gamma = _check_square(self.gamma, "covariance matrix")
        if gamma.shape[0] != self.layout.dim:
            raise LayoutMismatch(
                f"covariance shape {gamma.shape} does not match layout "
                f"N={self.layout.n_modes}"
            )
        object.__setattr__(self, "gamma", _frozen(gamma))

    @classmethod
    def from_matrix(cls, gamma: Array) -> "CovarianceMatrix":
        gamma = np.asarray(gamma, dtype=float)
        return cls(PhaseSpaceLayout(gamma.shape[0] // 2), gamma)

    @property
    def n(self) -> int:
        return self.layout.n_modes

    @property
    def qq(self) -> Array:
        return self.gamma[: self.n, : self.n]

    @property
    def pp(self) -> Array:
        return self.gamma[self.n :, self.n :]

    @property
    def qp(self) -> Array:
        return self.gamma[: self.n, self.n :]


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Quadratic form H = X^T hmat X + offset (hmat symmetric, PSD here)."""

    layout: PhaseSpaceLayout
    hmat: Array
    offset: float = 0.0

    def __post_init__(self):
        hmat = _check_square(self.hmat, "hamiltonian matrix")
        if hmat.shape[0] != self.layout.dim:
            raise LayoutMismatch(
                f"hamiltonian shape {hmat.shape} does not match layout "
                f"N={self.layout.n_modes}"
            )
        object.__setattr__(self, "hmat", _frozen(hmat))

    @classmethod
    def from_matrix(cls, hmat: Array, offset: float = 0.0) -> "QuadraticHamiltonian":
        hmat = np.asarray(hmat, dtype=float)
        return cls(PhaseSpaceLayout(hmat.shape[0] // 2), hmat, float(offset))

    @property
    def n(self) -> int:
        return self.layout.n_modes


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """M = S diag(d, d) S^T with S symplectic and d_k > 0."""

    symplectic: Array
    diag: Array

    def matrix(self) -> Array:
        d2 = np.concatenate([self.diag, self.diag])
        return self.symplectic @ np.diag(d2) @ self.symplectic.T


@dataclass(frozen=True)
class PhysicalityReport:
    min_lambda: float
    passes: bool
    tol: float


def williamson(mat: Array) -> WilliamsonDecomposition:
    """Normal-form decomposition of a positive definite 2N x 2N matrix.

    Uses the square-root construction: with K = M^(1/2) Omega M^(1/2)
    (antisymmetric), an orthogonal congruence brings K to the canonical
    form, and S = M^(1/2) O D^(-1/2) is symplectic with M = S diag(d, d) S^T.

    A diagonal symplectic rescaling balances the q/p variance hierarchy
    first; without it the strongly sheared states of this problem (q/p
    ratios spanning ~1e5) lose symplecticity through the square root.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0] // 2
    qdiag = np.diag(mat)[:n]
    pdiag = np.diag(mat)[n:]
    if np.all(qdiag > 0) and np.all(pdiag > 0):
        scale = (pdiag / qdiag) ** 0.25
    else:
        scale = np.ones(n)
    bal = np.concatenate([scale, 1.0 / scale])
    mat_b = mat * np.outer(bal, bal)
    dec = _williamson_balanced(mat_b)
    s = dec.symplectic / bal[:, None]
    omega = symplectic_form(n)
    # Newton polish of the symplectic constraint: with E = S Omega S^T -
    # Omega, S <- (I + E Omega / 2) S cancels the defect to first order.
    for _ in range(3):
        defect = s @ omega @ s.T - omega
        if np.max(np.abs(defect)) < 0.1 * _SYMPLECTIC_TOL:
            break
        s = s + 0.5 * defect @ omega @ s
    dec = WilliamsonDecomposition(symplectic=_frozen(s), diag=dec.diag)
    sympl_err = np.max(np.abs(s @ omega @ s.T - omega))
    recon_err = np.max(np.abs(dec.matrix() - mat))
    scale_m = max(1.0, float(np.max(np.abs(mat))))
    if sympl_err > _SYMPLECTIC_TOL or recon_err > _SYMPLECTIC_TOL * scale_m:
        raise NonConvergence(
            f"williamson verification failed (symplectic {sympl_err:.3g}, "
            f"reconstruction {recon_err:.3g})"
        )
    return dec


def _williamson_balanced(mat: Array) -> WilliamsonDecomposition:
    n = mat.shape[0] // 2
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    if w[0] <= 0:
        raise NonConvergence(
            f"williamson input not positive definite (min eigenvalue {w[0]:.3g})"
        )
    sqrt_m = (v * np.sqrt(w)) @ v.T
    k = sqrt_m @ symplectic_form(n) @ sqrt_m
    k = 0.5 * (k - k.T)
    t, q = sla.schur(k, output="real")
    # Real Schur of a normal antisymmetric matrix is block diagonal with
    # 2 x 2 blocks [[0, d], [-d, 0]]; orient every block to d > 0.
    d = np.empty(n)
    for i in range(n):
        b = t[2 * i, 2 * i + 1]
        if b < 0:
            q[:, [2 * i, 2 * i + 1]] = q[:, [2 * i + 1, 2 * i]]
            b = -b
        d[i] = b
    if np.min(d) <= 1e-12 * max(np.max(d), 1.0):
        raise NonConvergence(
            f"vanishing normal-mode value in williamson (min {np.min(d):.3g})"
        )
    order = np.argsort(-d)
    d = d[order]
    cols = np.empty(2 * n, dtype=int)
    cols[:n] = 2 * order
    cols[n:] = 2 * order + 1
    o = q[:, cols]
    s = sqrt_m @ o / np.sqrt(np.concatenate([d, d]))
    return WilliamsonDecomposition(symplectic=_frozen(s), diag=_frozen(d))


def symplectic_eigenvalues(gamma: CovarianceMatrix) -> Array:
    """The N positive normal-mode variances, sorted descending.

    Computed as the magnitudes of the purely imaginary eigenvalue pairs of
    Omega @ Gamma; spurious real parts below 1e-9 are discarded.
    """
    omega = gamma.layout.omega
    try:
        vals = np.linalg.eigvals(omega @ gamma.gamma)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NonConvergence(
            f"eigensolve failed on Omega@Gamma "
            f"(cond(Gamma) ~ {np.linalg.cond(gamma.gamma):.3g}): {exc}"
        ) from exc
    max_real = float(np.max(np.abs(vals.real)))
    scale = max(1.0, float(np.max(np.abs(vals.imag))))
    if max_real > 1e-9 * scale:
        raise NonConvergence(
            f"Omega@Gamma eigenvalues have real parts up to {max_real:.3g}; "
            f"cond(Gamma) ~ {np.linalg.cond(gamma.gamma):.3g}"
        )
    lam = np.sort(np.abs(vals.imag))[::-1]
    pair_gap = np.max(np.abs(lam[::2] - lam[1::2]))
    if pair_gap > 1e-9 * scale:
        raise NonConvergence(f"symplectic spectrum pairing failed (gap {pair_gap:.3g})")
    return lam[::2].copy()


def _entropy_from_spectrum(lam: Array) -> float:
    up = lam + 0.5
    down = np.clip(lam - 0.5, 0.0, None)
    s = up * np.log(up)
    s -= np.where(down > _PURITY_EPS, down * np.log(np.where(down > 0, down, 1.0)), 0.0)
    return float(np.sum(s))


def von_neumann_entropy(gamma: CovarianceMatrix) -> float:
    """Entropy in nats from the symplectic spectrum."""
    lam = symplectic_eigenvalues(gamma)
    if lam[-1] < 0.5 - _PHYSICALITY_TOL:
        raise UnphysicalState(lam[-1], _PHYSICALITY_TOL)
    return _entropy_from_spectrum(lam)


def restrict(gamma: CovarianceMatrix, pixels: Sequence[int] | range) -> CovarianceMatrix:
    """Gaussian partial trace: keep q and p rows/columns of `pixels`."""
    idx = np.asarray(sorted(set(int(i) for i in pixels)), dtype=int)
    if idx.size == 0:
        raise EmptyRegion("restriction to an empty pixel set")
    n = gamma.n
    if idx[0] < 0 or idx[-1] >= n:
        raise EmptyRegion(f"pixel indices {idx.min()}..{idx.max()} outside [0, {n})")
    cols = np.concatenate([idx, idx + n])
    sub = gamma.gamma[np.ix_(cols, cols)]
    return CovarianceMatrix(PhaseSpaceLayout(idx.size), sub)


def _n_system(split) -> int:
    if hasattr(split, "n_system_pixels"):
        return int(split.n_system_pixels)
    return int(split)


def mutual_information(gamma: CovarianceMatrix, split) -> float:
    """S(Gamma_S) + S(Gamma_E) - S(Gamma_SE) across a left/right pixel cut."""
    ns = _n_system(split)
    n = gamma.n
    if not 1 <= ns <= n - 1:
        raise EmptyRegion(f"split {ns} invalid for {n} pixels")
    s_sys = von_neumann_entropy(restrict(gamma, range(ns)))
    s_env = von_neumann_entropy(restrict(gamma, range(ns, n)))
    s_all = von_neumann_entropy(gamma)
    val = s_sys + s_env - s_all
    if val < 0.0:
        if val < -1e-8:
            raise NonConvergence(f"mutual information {val:.3g} below -1e-8")
        val = 0.0
    return val


def mean_energy(gamma: CovarianceMatrix, ham: QuadraticHamiltonian) -> float:
    """Tr[Gamma Hmat] + offset."""
    if gamma.layout.n_modes != ham.layout.n_modes:
        raise LayoutMismatch(
            f"state has {gamma.layout.n_modes} modes, hamiltonian "
            f"{ham.layout.n_modes}"
        )
    return float(np.sum(gamma.gamma * ham.hmat)) + ham.offset


def thermal_covariance(ham: QuadraticHamiltonian, beta: float) -> CovarianceMatrix:
    """Gibbs-state covariance of a gapped quadratic Hamiltonian.

    Williamson-decomposes the quadratic form into normal modes nu_k and gives
    each the variance coth(beta nu_k / 2) / 2.  A free mode (no restoring
    term) has no normalizable Gibbs state and is rejected.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    try:
        dec = williamson(2.0 * ham.hmat)
    except NonConvergence as exc:
        raise ZeroModeAtFiniteMass(
            f"thermal state undefined: {exc}"
        ) from exc
    nu = dec.diag
    v = 0.5 / np.tanh(0.5 * beta * nu)
    s_inv = np.linalg.solve(dec.symplectic, np.eye(2 * ham.n))
    gamma = s_inv.T @ np.diag(np.concatenate([v, v])) @ s_inv
    return CovarianceMatrix(ham.layout, gamma)


def _is_mode_diagonal(hmat: Array, n: int) -> bool:
    qq = hmat[:n, :n]
    pp = hmat[n:, n:]
    qp = hmat[:n, n:]
    return (
        not np.any(qp)
        and not np.any(qq - np.diag(np.diag(qq)))
        and not np.any(pp - np.diag(np.diag(pp)))
    )


def hamiltonian_flow(ham: QuadraticHamiltonian, t: float) -> Array:
    """Symplectic propagator S(t) = exp(t Omega 2 Hmat).

    Mode-diagonal Hamiltonians take an exact per-mode path: rotation at
    nu = sqrt(ab) for H = (a/2) q^2 + (b/2) p^2, shear for a free mode.
    """
    n = ham.n
    hmat = ham.hmat
    if _is_mode_diagonal(hmat, n):
        a = 2.0 * np.diag(hmat[:n, :n])
        b = 2.0 * np.diag(hmat[n:, n:])
        s = np.zeros((2 * n, 2 * n))
        for k in range(n):
            if a[k] > 0 and b[k] > 0:
                nu = np.sqrt(a[k] * b[k])
                cos, sin = np.cos(nu * t), np.sin(nu * t)
                blk = [[cos, (b[k] / nu) * sin], [-(a[k] / nu) * sin, cos]]
            elif a[k] == 0 and b[k] > 0:
                blk = [[1.0, b[k] * t], [0.0, 1.0]]
            elif b[k] == 0 and a[k] > 0:
                blk = [[1.0, 0.0], [-a[k] * t, 1.0]]
            else:
                blk = [[1.0, 0.0], [0.0, 1.0]]
            s[k, k], s[k, n + k] = blk[0]
            s[n + k, k], s[n + k, n + k] = blk[1]
    else:
        omega = ham.layout.omega
        s = sla.expm(2.0 * t * omega @ hmat)
    omega = ham.layout.omega
    err = np.max(np.abs(s @ omega @ s.T - omega))
    if err > _SYMPLECTIC_TOL * max(1.0, float(np.max(np.abs(s))) ** 2):
        raise NonConvergence(f"propagator lost symplecticity ({err:.3g})")
    return s


def propagate(
    gamma0: CovarianceMatrix, ham: QuadraticHamiltonian, t: float
) -> CovarianceMatrix:
    """Evolve Gamma(t) = S(t) Gamma(0) S(t)^T under the quadratic flow."""
    if gamma0.layout.n_modes != ham.layout.n_modes:
        raise LayoutMismatch("state and hamiltonian layouts differ")
    s = hamiltonian_flow(ham, t)
    return CovarianceMatrix(gamma0.layout, s @ gamma0.gamma @ s.T)


def check_physicality(gamma: CovarianceMatrix, tol: float = _PHYSICALITY_TOL) -> PhysicalityReport:
    lam = symplectic_eigenvalues(gamma)
    min_lambda = float(lam[-1])
    return PhysicalityReport(min_lambda=min_lambda, passes=min_lambda >= 0.5 - tol, tol=tol)
