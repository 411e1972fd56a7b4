from __future__ import annotations

import numpy as np
import pytest

from cylends import oracles
from cylends.geometry import CrossSection, ManifoldSpec, WarpProfile, build_manifold
from cylends.harmonic import complete_offsets, prepare, solve_harmonic
from cylends.verify.bochner import bochner_identity, boundary_decay_scan, observed_decay_rate
from cylends.verify.flow import (CriticalPointError, flow_field, flow_many, gradient_flow, level_set,
                                 split_check)
from cylends.verify.forms import (analytic_test_forms, covariant_derivative, differential, random_test_form,
                                  sample_form, weitzenbock_residual)

from conftest import make_manifold


def _gamma(manifold, c=1.0):
    """``(c / w) dt``, the differential of the rotationally symmetric harmonic function."""
    return sample_form(manifold, lambda t, th: (c / manifold.warp(t), 0.0))


def test_differential_closed_form():
    m = make_manifold("warped", h=0.05, n=64)
    t, th = m.grid.mesh()
    df = differential(np.sin(t) * np.cos(th), m)
    assert np.max(np.abs(df.components[0] - np.cos(t) * np.cos(th))[1:-1]) < 2e-3
    assert np.max(np.abs(df.components[1] + np.sin(t) * np.sin(th))) < 2e-3


def test_hessian_of_function_is_symmetric(warped):
    t, th = warped.grid.mesh()
    T = covariant_derivative(differential(np.tanh(t) + np.sin(th) / np.cosh(t), warped))
    assert np.max(T.symmetry_defect()[2:-2]) < 1e-10


def test_bochner_terms_match_quadrature():
    # (1/w) dt is singular at a tip, so only the two-ended model is compared
    m = make_manifold("warped", h=0.025, n=16)
    R = 6.0
    rep = bochner_identity(_gamma(m), m, R)
    ref = oracles.bochner_terms(m.spec.warp, 1.0, R, two_ends=True)
    assert rep.interior_energy == pytest.approx(ref["interior_energy"], rel=2e-3)
    assert rep.ricci_term == pytest.approx(ref["ricci_term"], rel=2e-3)
    assert np.allclose(rep.boundary_terms, ref["boundary_terms"], rtol=2e-3, atol=1e-8)


def test_bochner_on_solution_converges():
    residuals = []
    for h in (0.1, 0.05):
        setup = prepare(make_manifold("warped", h=h, n=16))
        sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
        residuals.append(bochner_identity(differential(sol.f, setup.manifold), setup.manifold, 6.0).identity_residual)
    assert residuals[1] < residuals[0] / 3


def test_bochner_rejects_R_outside_grid(flat):
    with pytest.raises(ValueError):
        bochner_identity(_gamma(flat), flat, 8.0)


def test_boundary_decay_rate(warped):
    reps = boundary_decay_scan(_gamma(warped), warped, [4.0, 5.0, 6.0, 7.0])
    beta = warped.spec.warp.beta
    assert observed_decay_rate(reps) == pytest.approx(beta, abs=0.05)
    assert np.isnan(observed_decay_rate(boundary_decay_scan(_gamma(make_manifold("flat")), None, [4.0, 5.0, 6.0])))


@pytest.mark.parametrize("kind", ["warped", "cigar"])
def test_weitzenbock_second_order(kind):
    res = []
    for h in (0.1, 0.05):
        m = make_manifold(kind, h=h, n=128)
        res.append(max(weitzenbock_residual(xi) for xi in analytic_test_forms(m).values()))
    assert res[0] / res[1] > 3.0


def test_weitzenbock_exact_on_flat():
    m = make_manifold("flat", h=0.1, n=32)
    assert weitzenbock_residual(random_test_form(m, seed=4)) < 1e-10


def test_weitzenbock_on_torus_cross_section():
    spec = ManifoldSpec.make(CrossSection.flat_torus(1.0, 1.0, 24), WarpProfile.sech_bump(1.0, 0.3, 0.0, 1.0),
                             "two_end_cylinder", 6.0, 0.1)
    m = build_manifold(spec)
    assert weitzenbock_residual(random_test_form(m, seed=1)) < 100 * 0.1**2


@pytest.fixture(scope="module")
def warped_field():
    setup = prepare(make_manifold("warped", h=0.05, n=32))
    sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
    return flow_field(sol.f, setup.manifold)


def test_flat_flow_is_translation():
    m = make_manifold("flat", h=0.1, n=32)
    t = m.grid.mesh()[0]
    x = gradient_flow(t, m, (0.3, 1.0), 2.5)
    assert x == pytest.approx([2.8, 1.0], abs=1e-10)


def test_flow_semigroup_and_level(warped_field):
    x0 = np.array([0.2, 0.7])
    a, b = 0.8, -1.9
    once = gradient_flow(warped_field, None, x0, a + b)
    twice = gradient_flow(warped_field, None, gradient_flow(warped_field, None, x0, a), b)
    assert np.allclose(once, twice, atol=1e-8)
    assert warped_field.value(*gradient_flow(warped_field, None, x0, 2.0)) == pytest.approx(
        warped_field.value(*x0) + 2.0, abs=1e-8)


def test_flow_is_injective(warped_field):
    seeds = level_set(warped_field, np.linspace(0, 2 * np.pi, 12, endpoint=False))
    pts = flow_many(warped_field, seeds, np.array([0.0, 3.0]))[1]
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    assert np.min(d[~np.eye(len(pts), dtype=bool)]) > 1e-3


def test_level_not_attained(warped_field):
    with pytest.raises(CriticalPointError):
        level_set(warped_field, np.array([0.0]), level=1e3)


def test_split_flat_but_not_warped(warped_field):
    flat = make_manifold("flat", h=0.1, n=32)
    assert split_check(flat.grid.mesh()[0], flat, n_seeds=16).passed
    rep = split_check(warped_field, warped_field.manifold, n_seeds=16)
    assert not rep.passed
    assert rep.defects["g_ttheta"] < 1e-8
    assert rep.level_error < 1e-8


def test_flow_needs_surface():
    spec = ManifoldSpec.make(CrossSection.flat_torus(1.0, 1.0, 8), WarpProfile.constant(1.0),
                             "two_end_cylinder", 6.0, 0.2)
    m = build_manifold(spec)
    with pytest.raises(NotImplementedError):
        flow_field(np.zeros(m.grid.shape), m)
