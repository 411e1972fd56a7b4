"""Small Krylov kernels: conjugate gradients, normal-equation least squares, Lanczos."""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


class ConvergenceError(RuntimeError):
    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


class InconsistentSystemError(ConvergenceError):
    """Right-hand side has a component along the kernel of a semidefinite operator."""


class RankDeficientError(ValueError):
    def __init__(self, msg, nullity):
        super().__init__(msg)
        self.nullity = nullity


def _matvec(A):
    if callable(A) and not hasattr(A, "shape"):
        return A
    return lambda x: A @ x


def solve_spd(A, b, tol: float = 1e-10, maxiter: int | None = None, x0=None,
              kernel: np.ndarray | None = None, jacobi: bool = True):
    """Conjugate gradients for ``A x = b`` with ``A`` symmetric positive (semi)definite.

    Parameters
    ----------
    A : sparse matrix, ndarray or callable
    tol : float
        Relative residual target ``|b - A x| <= tol |b|``.
    kernel : ndarray, optional
        Orthonormal columns spanning the kernel of a semidefinite ``A``.  ``b``
        must be orthogonal to it; iterates are kept orthogonal to it.
    jacobi : bool
        Diagonal scaling (only when ``A`` exposes a diagonal).

    Returns
    -------
    x : ndarray
    info : dict
        ``iterations`` and final relative ``residual``.

    Raises
    ------
    InconsistentSystemError
        ``b`` is not orthogonal to ``kernel``, or the residual stalls.
    ConvergenceError
        ``maxiter`` exhausted.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    mv = _matvec(A)
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    if kernel is not None:
        kernel = np.asarray(kernel, dtype=float).reshape(n, -1)
        along = np.linalg.norm(kernel.T @ b)
        if along > max(tol, 1e-12) * max(bnorm, 1e-300):
            raise InconsistentSystemError(
                f"right-hand side has a kernel component of relative size {along / bnorm:.3e}",
                0, along / bnorm)

        def project(v):
            return v - kernel @ (kernel.T @ v)
    else:
        def project(v):
            return v
    if bnorm == 0.0:
        return np.zeros(n), {"iterations": 0, "residual": 0.0}

    dinv = None
    if jacobi and hasattr(A, "diagonal"):
        d = np.asarray(A.diagonal(), dtype=float)
        if np.all(d > 0):
            dinv = 1.0 / d

    def precond(r):
        return project(r * dinv) if dinv is not None else r

    x = np.zeros(n) if x0 is None else project(np.array(x0, dtype=float))
    r = project(b - mv(x))
    z = precond(r)
    p = z.copy()
    rz = r @ z
    best = np.inf
    stall = 0
    for it in range(1, maxiter + 1):
        Ap = mv(p)
        pAp = p @ Ap
        if pAp <= 0:
            raise InconsistentSystemError("operator is not positive on the search direction", it,
                                          np.linalg.norm(r) / bnorm)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return project(x), {"iterations": it, "residual": float(res)}
        if res < 0.999 * best:
            best, stall = res, 0
        else:
            stall += 1
            if stall > max(200, n // 2):
                raise InconsistentSystemError("residual stalled; right-hand side likely not in the range",
                                              it, res)
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach tol={tol:g} in {maxiter} iterations", maxiter, res)


def solve_least_squares(A, b, tol: float = 1e-10, kernel_dim: int = 0, rcond: float = 1e-10):
    """Minimise ``|A x - b|_2`` through the normal equations.

    Dense problems (at most ``DENSE_LIMIT`` columns) are factorised with a
    small Tikhonov guard and one step of iterative refinement; larger ones go
    through CG on ``A^T A``.  When ``kernel_dim > 0`` the minimum-norm solution
    on the complement of the declared kernel is returned.

    Returns
    -------
    x : ndarray
    residual : float
        ``|A x - b|_2``.

    Raises
    ------
    RankDeficientError
        Detected nullity of ``A`` exceeds ``kernel_dim``.
    """
    b = np.asarray(b, dtype=float)
    ncol = A.shape[1]
    if ncol <= DENSE_LIMIT:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        N = Ad.T @ Ad
        rhs = Ad.T @ b
        lam, V = np.linalg.eigh(N)
        top = max(lam[-1], 0.0)
        # forming A^T A costs about eps * top in every eigenvalue
        floor = max(rcond**2, 64 * np.finfo(float).eps) * top
        null = lam <= floor if top > 0 else np.ones_like(lam, dtype=bool)
        nullity = int(null.sum())
        if nullity > kernel_dim:
            raise RankDeficientError(f"matrix has nullity {nullity} > declared {kernel_dim}", nullity)
        if kernel_dim:
            keep = np.arange(ncol) >= kernel_dim
            x = V[:, keep] @ ((V[:, keep].T @ rhs) / lam[keep])
        else:
            guard = np.finfo(float).eps * top
            c = sla.cho_factor(N + guard * np.eye(ncol))
            x = sla.cho_solve(c, rhs)
            x += sla.cho_solve(c, Ad.T @ (b - Ad @ x))
        return x, float(np.linalg.norm(Ad @ x - b))

    At = A.T.tocsr() if sp.issparse(A) else A.T
    x, _ = solve_spd(lambda v: At @ (A @ v), At @ b, tol=tol, jacobi=False)
    return x, float(np.linalg.norm(A @ x - b))


def _lanczos_lowest(mv, n, locked, rng, tol, kmax):
    """One Lanczos run, orthogonal to ``locked``; returns the lowest converged Ritz pair(s)."""
    def orth(v):
        for _ in range(2):
            if locked.shape[1]:
                v = v - locked @ (locked.T @ v)
            if Q:
                Qm = np.column_stack(Q)
                v = v - Qm @ (Qm.T @ v)
        return v

    Q = []
    q = orth(rng.standard_normal(n))
    q /= np.linalg.norm(q)
    Q.append(q)
    alphas, betas = [], []
    beta_prev = 0.0
    q_prev = np.zeros(n)
    kmax = min(kmax, n - locked.shape[1])
    for k in range(kmax):
        u = mv(Q[-1]) - beta_prev * q_prev
        a = Q[-1] @ u
        alphas.append(a)
        u = orth(u - a * Q[-1])
        beta = np.linalg.norm(u)
        last = k + 1 == kmax or beta < 1e-12
        if last or (k + 1) % 8 == 0:
            T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
            theta, S = np.linalg.eigh(T)
            res = np.abs(beta * S[-1, :])
            done = res <= tol
            if last or done[0]:
                stop = len(theta) if done.all() else max(int(np.argmin(done)), 1)
                return theta[:stop], np.column_stack(Q) @ S[:, :stop]
        betas.append(beta)
        q_prev = Q[-1]
        beta_prev = beta
        Q.append(u / beta)
    raise AssertionError("unreachable")


def eigen_smallest(A, m: int, tol: float = 1e-8, seed: int = 0, dense_limit: int = DENSE_LIMIT):
    """The ``m`` smallest eigenpairs of a symmetric matrix.

    Below ``dense_limit`` rows a dense symmetric eigensolver is used.  Above
    it, Lanczos with full reorthogonalisation runs repeatedly, locking the
    converged lowest Ritz pairs so that repeated eigenvalues are all found.

    Returns
    -------
    values : ndarray of shape (m,)
    vectors : ndarray of shape (n, m)

    Raises
    ------
    ConvergenceError
        Some residual ``|A v - lambda v|`` exceeds ``tol``.
    """
    n = A.shape[0]
    if m > n:
        raise ValueError("m exceeds the matrix dimension")
    if n <= dense_limit:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        vals, vecs = np.linalg.eigh(0.5 * (Ad + Ad.T))
        vals, vecs = vals[:m], vecs[:, :m]
    else:
        mv = _matvec(A)
        rng = np.random.default_rng(seed)
        locked = np.zeros((n, 0))
        found = []
        while locked.shape[1] < n:
            theta, vecs = _lanczos_lowest(mv, n, locked, rng, tol, kmax=min(n, 1500))
            # a single Krylov space sees one copy of a repeated eigenvalue, so keep
            # locking until a fresh run finds nothing below the m-th value found
            if len(found) >= m and theta[0] >= np.sort(found)[m - 1] - tol:
                break
            for th, v in zip(theta, vecs.T):
                v = v - locked @ (locked.T @ v)
                v /= np.linalg.norm(v)
                found.append(th)
                locked = np.column_stack([locked, v])
        order = np.argsort(found)
        vals = np.asarray(found)[order][:m]
        vecs = locked[:, order][:, :m]
    res = np.array([np.linalg.norm(A @ vecs[:, i] - vals[i] * vecs[:, i]) for i in range(m)])
    if np.any(res > tol):
        raise ConvergenceError(f"eigenpair residuals {res.max():.3e} exceed {tol:g}", residual=res)
    return vals, vecs
