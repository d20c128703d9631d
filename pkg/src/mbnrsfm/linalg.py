"""Dense linear-algebra kernels used by every solver step.

Decompositions are delegated to LAPACK through numpy and scipy: SVD via
``numpy.linalg.svd``, the Sylvester solve via scipy's Bartels-Stewart
implementation (real Schur forms of both operands plus back-substitution).
This module owns the contracts the rest of the package relies on: validated
finite inputs, explicit failures instead of silent garbage, and a verified
residual on every Sylvester solve.

All functions are pure; nothing here holds state.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError, SingularPencilError

# Relative residual accepted from a Sylvester solve.
SYLVESTER_RTOL = 1e-8
# Eigenvalue-pair sums below this magnitude mean the pencil is singular.
SINGULAR_PENCIL_TOL = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a finite 2-D float64 array.

    Raises ValueError if the input is not two-dimensional, is empty, or
    contains NaN/Inf entries.
    """
    mat = np.asarray(values, dtype=float)
    if mat.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {mat.shape}")
    if mat.size == 0:
        raise ValueError(f"{name} must be non-empty, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} contains non-finite entries")
    return mat


def soft_threshold(x, tau: float):
    """Shrink ``x`` toward zero: sign(x) * max(|x| - tau, 0).

    Works elementwise on arrays and on plain scalars. ``tau`` must be
    nonnegative.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD of a finite matrix.

    Returns ``(u, sigma, v)`` with orthonormal-column ``u`` and ``v``,
    ``sigma`` sorted nonincreasing, and ``m = u @ diag(sigma) @ v.T``.

    Raises NumericalError if the underlying eigenroutine does not converge.
    """
    mat = as_matrix(m, "svd input")
    try:
        u, sigma, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge on a {mat.shape} matrix") from exc
    return u, sigma, vh.T


def svt(m, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal operator of the nuclear norm.

    Returns the unique minimizer of ``tau * ||X||_* + 0.5 * ||X - m||_F^2``,
    computed as ``u @ diag(soft_threshold(sigma, tau)) @ v.T``. A zero
    threshold is the identity and skips the decomposition.
    """
    if tau == 0:
        return as_matrix(m, "svt input").copy()
    u, sigma, v = svd(m)
    shrunk = soft_threshold(sigma, tau)
    return (u * shrunk) @ v.T


def solve_sylvester(a, b, q) -> np.ndarray:
    """Solve ``a @ x + x @ b = q`` for ``x``.

    ``a`` is n x n, ``b`` is m x m, ``q`` is n x m. Callers must make sure no
    eigenvalue of ``a`` sums to zero with an eigenvalue of ``b``; the solver
    paths in this package guarantee that by construction (a positive-definite
    left operand against a positive-semidefinite right one).

    The returned solution always satisfies
    ``||a x + x b - q||_F <= SYLVESTER_RTOL * (1 + ||q||_F)``. A violation
    raises SingularPencilError (naming the offending eigenvalue pair) when
    the pencil is singular, NumericalError otherwise.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    q = as_matrix(q, "right-hand side")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"left operand must be square, got {a.shape}")
    if b.shape[0] != b.shape[1]:
        raise ValueError(f"right operand must be square, got {b.shape}")
    if q.shape != (a.shape[0], b.shape[0]):
        raise ValueError(
            f"right-hand side shape {q.shape} does not match operands "
            f"({a.shape[0]} x {b.shape[0]})"
        )

    try:
        x = scipy.linalg.solve_sylvester(a, b, q)
    except (np.linalg.LinAlgError, ValueError) as exc:
        _raise_sylvester_failure(a, b, f"factorization failed: {exc}")

    residual = np.linalg.norm(a @ x + x @ b - q) if np.all(np.isfinite(x)) else np.inf
    bound = SYLVESTER_RTOL * (1.0 + np.linalg.norm(q))
    if not residual <= bound:
        _raise_sylvester_failure(
            a, b, f"residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return x


def _raise_sylvester_failure(a, b, detail: str):
    """Diagnose a failed Sylvester solve and raise the appropriate error."""
    try:
        eig_a = np.linalg.eigvals(a)
        eig_b = np.linalg.eigvals(b)
    except np.linalg.LinAlgError:
        raise NumericalError(f"Sylvester solve failed ({detail})") from None
    sums = eig_a[:, None] + eig_b[None, :]
    i, j = np.unravel_index(np.argmin(np.abs(sums)), sums.shape)
    if abs(sums[i, j]) <= SINGULAR_PENCIL_TOL:
        raise SingularPencilError(
            f"singular Sylvester pencil: eigenvalue {eig_a[i]} of the left "
            f"operand and {eig_b[j]} of the right operand sum to {sums[i, j]}"
        )
    raise NumericalError(f"Sylvester solve failed ({detail})")
