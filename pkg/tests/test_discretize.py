from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from cylends.discretize import (ConvergenceError, RankDeficientError, WeightFunction, assemble_laplacian,
                                eigen_smallest, extend_rho, periodic_laplacian, solve_least_squares,
                                solve_spd, weighted_norm)
from cylends import oracles

from conftest import make_manifold


def _spd(n, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return Q @ Q.T + n * np.eye(n)


def test_cg_matches_dense_solve():
    A = _spd(40)
    b = np.arange(40.0)
    x, info = solve_spd(sp.csr_matrix(A), b, tol=1e-12)
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-9)
    assert info["residual"] <= 1e-12


def test_cg_with_kernel():
    A = periodic_laplacian((1.0,), 24)
    b = np.sin(np.arange(24) * 2 * np.pi / 24)
    ones = np.ones((24, 1)) / np.sqrt(24)
    x, _ = solve_spd(A, b, tol=1e-12, kernel=ones)
    assert np.allclose(A @ x, b, atol=1e-10)
    assert abs(x.sum()) < 1e-10


def test_cg_reports_nonconvergence():
    with pytest.raises(ConvergenceError):
        solve_spd(sp.csr_matrix(_spd(50)), np.ones(50), tol=1e-14, maxiter=2)


def test_least_squares_matches_pinv():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 6))
    b = rng.standard_normal(30)
    x, _ = solve_least_squares(A, b)
    assert np.allclose(x, np.linalg.pinv(A) @ b, atol=1e-10)


def test_least_squares_minimum_norm_with_kernel():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    x, _ = solve_least_squares(A, np.array([2.0, 4.0]), kernel_dim=1)
    assert np.allclose(x, [1.0, 1.0])


def test_least_squares_flags_undeclared_kernel():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(RankDeficientError):
        solve_least_squares(A, np.array([2.0, 4.0]))


@pytest.mark.parametrize("dense_limit", [10_000, 8])
def test_eigen_smallest_closed_form(dense_limit):
    A = periodic_laplacian((2.0,), 40)
    vals, vecs = eigen_smallest(A, 5, dense_limit=dense_limit, tol=1e-8)
    ref = np.sort(oracles.circle_difference_eigenvalues(2.0, 40))[:5]
    assert np.allclose(vals, ref, atol=1e-8)
    assert np.allclose(A @ vecs, vecs * vals, atol=1e-7)


@pytest.mark.parametrize("kind", ["flat", "warped", "cigar"])
def test_laplacian_symmetric_and_kills_constants(kind):
    m = make_manifold(kind, h=0.2, n=16)
    op = assemble_laplacian(m)
    A = op.stiffness
    assert abs(A - A.T).max() < 1e-12
    assert np.max(np.abs(op.apply(np.ones(op.shape)))) < 1e-10
    assert op.inner(np.ones(op.shape), np.ones(op.shape)) == pytest.approx(m.quadrature_weights().sum())


def test_laplacian_on_smooth_function_second_order():
    errs = []
    for h in (0.2, 0.1):
        m = make_manifold("warped", h=h, n=64)
        t, th = m.grid.mesh()
        w = m.warp(t)
        # -div grad in dt^2 + w^2 dth^2; the angle grid is fixed, so only the axial part refines
        exact = np.sin(t) - (m.warp(t, 1) / w) * np.cos(t)
        lap = assemble_laplacian(m).apply(np.sin(t) + 0 * th)
        errs.append(np.max(np.abs(lap - exact)[2:-2]))
    assert errs[0] / errs[1] > 3.5


def test_angular_part_matches_difference_symbol():
    m = make_manifold("warped", h=0.1, n=32)
    t, th = m.grid.mesh()
    lap = assemble_laplacian(m).apply(np.cos(2 * th))
    symbol = 4 * np.sin(np.pi * 2 / 32) ** 2 / (2 * np.pi / 32) ** 2
    exact = symbol * np.cos(2 * th) / m.warp(t) ** 2
    assert np.max(np.abs(lap - exact)[1:-1]) < 1e-10


def test_weighted_norm_of_exponential():
    m = make_manifold("flat", h=0.05, n=16)
    wt = WeightFunction(alpha=-0.5, rho=extend_rho(m, -0.5).rho)
    t = m.grid.mesh()[0]
    assert np.isfinite(weighted_norm(np.exp(-np.abs(t)), wt, 0, m))
    assert weighted_norm(np.zeros(m.grid.shape), wt, 2, m) == 0.0
