"""Dense linear solves and the filtered generalized eigenvalue problem."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import EigenSolverError, SingularMatrixError

DEFAULT_CUTOFF = 1e8
_EPS = np.finfo(float).eps


def lu_factor_checked(A: np.ndarray):
    """LU-factorize ``A``, raising if its reciprocal condition is below eps."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    with warnings.catch_warnings():
        # singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    anorm = np.linalg.norm(A, 1)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < _EPS:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise SingularMatrixError("matrix is numerically singular", condition=cond)
    return lu, piv


def solve_dense(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    rhs = np.asarray(rhs)
    if rhs.shape[0] != A.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match matrix size {A.shape[0]}")
    lu_piv = lu_factor_checked(A)
    return sla.lu_solve(lu_piv, rhs)


@dataclass(eq=False)
class DensePencil:
    """The pencil ``lhs - lambda * rhs_mass``; ``rhs_mass`` may be singular."""

    lhs: np.ndarray
    rhs_mass: np.ndarray

    def __post_init__(self):
        A, B = np.asarray(self.lhs), np.asarray(self.rhs_mass)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ValueError(f"pencil matrices must be square and equal-sized: {A.shape}, {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("pencil contains non-finite entries")
        self.lhs, self.rhs_mass = A, B

    @property
    def size(self) -> int:
        return self.lhs.shape[0]

    def conj(self) -> DensePencil:
        return DensePencil(np.conj(self.lhs), np.conj(self.rhs_mass))


@dataclass(eq=False)
class FilteredSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    discarded_count: int
    method: str = "qz"
    empty: bool = field(init=False)

    def __post_init__(self):
        self.empty = len(self.eigenvalues) == 0

    def __len__(self):
        return len(self.eigenvalues)


def _sorted_spectrum(lam, vecs, n_total, method):
    order = np.lexsort((-lam.imag, -lam.real))
    lam = lam[order]
    vecs = vecs[:, order]
    return FilteredSpectrum(lam, vecs, n_total - len(lam), method)


def _qz_eigs(p: DensePencil, cutoff: float) -> FilteredSpectrum:
    try:
        (alpha, beta), vecs = sla.eig(p.lhs, p.rhs_mass, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"QZ decomposition failed: {exc}") from exc
    finite = np.abs(beta) > 0
    lam = np.full(alpha.shape, np.inf, dtype=complex)
    lam[finite] = alpha[finite] / beta[finite]
    keep = np.isfinite(lam) & (np.abs(lam) < cutoff)
    return _sorted_spectrum(lam[keep], vecs[:, keep], p.size, "qz")


def _reduced_eigs(p: DensePencil, cutoff: float) -> FilteredSpectrum:
    # Rows/columns where the mass matrix vanishes are algebraic constraints;
    # eliminating them leaves a standard eigenproblem with the same finite spectrum.
    B = p.rhs_mass
    mass_rows = np.flatnonzero(np.any(B != 0, axis=1))
    mass_cols = np.flatnonzero(np.any(B != 0, axis=0))
    if len(mass_rows) != len(mass_cols) or len(mass_rows) == 0:
        raise EigenSolverError("mass matrix is not a square block; use method='qz'")
    n = p.size
    alg_rows = np.setdiff1d(np.arange(n), mass_rows)
    alg_cols = np.setdiff1d(np.arange(n), mass_cols)
    A = p.lhs
    if len(alg_rows) == 0:
        try:
            lam, vecs = sla.eig(A, B)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EigenSolverError(f"eigenproblem failed: {exc}") from exc
        keep = np.isfinite(lam) & (np.abs(lam) < cutoff)
        return _sorted_spectrum(lam[keep], vecs[:, keep], n, "reduced")
    A_cy = A[np.ix_(alg_rows, alg_cols)]
    A_ct = A[np.ix_(alg_rows, mass_cols)]
    A_ey = A[np.ix_(mass_rows, alg_cols)]
    A_et = A[np.ix_(mass_rows, mass_cols)]
    B_et = B[np.ix_(mass_rows, mass_cols)]
    try:
        lu_piv = lu_factor_checked(A_cy)
    except SingularMatrixError as exc:
        raise EigenSolverError(f"constraint block is singular: {exc}") from exc
    elim = sla.lu_solve(lu_piv, A_ct)
    S = A_et - A_ey @ elim
    if np.array_equal(B_et, np.eye(len(mass_rows))):
        K = S
    else:
        K = solve_dense(B_et, S)
    try:
        lam, theta = sla.eig(K)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"reduced eigenproblem failed: {exc}") from exc
    vecs = np.zeros((n, len(lam)), dtype=np.result_type(elim, theta, complex))
    vecs[mass_cols] = theta
    vecs[alg_cols] = -elim @ theta
    vecs /= np.linalg.norm(vecs, axis=0)
    keep = np.isfinite(lam) & (np.abs(lam) < cutoff)
    return _sorted_spectrum(lam[keep], vecs[:, keep], n, "reduced")


def generalized_eigs(p: DensePencil, cutoff: float = DEFAULT_CUTOFF, method: str = "qz") -> FilteredSpectrum:
    """Finite eigenvalues of ``lhs x = lambda rhs_mass x`` with ``|lambda| < cutoff``.

    ``method="qz"`` runs the full dense QZ decomposition.  ``method="reduced"``
    eliminates the zero-mass rows by a Schur complement first; it returns the
    same finite spectrum when the algebraic block is nonsingular and is much
    cheaper when the mass matrix has small rank.  Eigenvalues come back sorted
    by descending real part.
    """
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff!r}")
    if method == "qz":
        return _qz_eigs(p, cutoff)
    if method == "reduced":
        return _reduced_eigs(p, cutoff)
    raise ValueError(f"unknown eigensolver method {method!r}")


def eigenpair_residual(p: DensePencil, lam: complex, x: np.ndarray) -> float:
    """``||A x - lam B x|| / ||x||``."""
    r = p.lhs @ x - lam * (p.rhs_mass @ x)
    return float(np.linalg.norm(r) / np.linalg.norm(x))
