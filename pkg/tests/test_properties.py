"""Property-based checks of invariants that hold for every admissible input."""
from __future__ import annotations

import json
import math
from functools import lru_cache

import numpy as np
from hypothesis import given, settings, strategies as st

from cylends.discretize import WeightFunction, assemble_laplacian, extend_rho, weighted_norm
from cylends.geometry import CrossSection, ManifoldSpec, WarpProfile, build_manifold, volume_form
from cylends.harmonic import AsymptoticData, complete_offsets, prepare, solve_harmonic
from cylends.report import dumps
from cylends.spectral import NotFredholmError, cross_section_spectrum, index_jump, indicial_set
from cylends.verify.flow import flow_field, gradient_flow

from conftest import make_manifold

finite = st.floats(-1e6, 1e6, allow_nan=False)


@lru_cache(maxsize=1)
def _warped_setup():
    return prepare(make_manifold("warped", h=0.1, n=16))


@lru_cache(maxsize=1)
def _warped_field():
    setup = _warped_setup()
    return flow_field(solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0))).f, setup.manifold)


@settings(max_examples=25, deadline=None)
@given(amp=st.floats(-0.5, 0.5), width=st.floats(0.5, 1.0), radius=st.floats(0.5, 2.0))
def test_laplacian_symmetric_and_annihilates_constants(amp, width, radius):
    spec = ManifoldSpec.make(CrossSection.circle(radius, 8), WarpProfile.sech_bump(1.0, amp, 0.0, width),
                             "two_end_cylinder", 8.0, 0.25)
    op = assemble_laplacian(build_manifold(spec))
    assert abs(op.stiffness - op.stiffness.T).max() < 1e-12 * abs(op.stiffness).max()
    assert np.max(np.abs(op.stiffness @ np.ones(op.n))) < 1e-10 * abs(op.stiffness).max()
    rng = np.random.default_rng(0)
    u = rng.standard_normal(op.n)
    assert u @ (op.stiffness @ u) >= -1e-10


@settings(max_examples=25, deadline=None)
@given(radius=st.floats(0.2, 5.0), R=st.floats(2.0, 10.0))
def test_flat_volume(radius, R):
    spec = ManifoldSpec.make(CrossSection.circle(radius, 8), WarpProfile.constant(1.0), "two_end_cylinder", R, R / 20)
    assert math.isclose(volume_form(build_manifold(spec)).total, 2 * math.pi * radius * 2 * R, rel_tol=1e-12)


@given(st.lists(finite, min_size=2, max_size=4).filter(lambda v: len(v) % 2 == 0))
def test_asymptotic_vector_roundtrip(v):
    assert np.array_equal(AsymptoticData.from_vector(v).vector(), np.asarray(v, dtype=float))


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=6), inner, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_canonical_json_roundtrip(obj):
    text = dumps(obj)
    assert json.loads(text) == obj
    assert dumps(json.loads(text)) == text


@given(a=st.floats(-2.9, 2.9), b=st.floats(-2.9, 2.9), c=st.floats(-2.9, 2.9))
def test_index_jump_additive(a, b, c):
    ind = indicial_set(cross_section_spectrum(CrossSection.circle(1.0), 4))
    lo, mid, hi = sorted((a, b, c))
    try:
        total = index_jump(ind, lo, hi)
        parts = index_jump(ind, lo, mid) + index_jump(ind, mid, hi)
    except NotFredholmError:
        return
    assert total == parts


@settings(max_examples=20, deadline=None)
@given(x=st.floats(-3.0, 3.0), y=st.floats(-3.0, 3.0))
def test_solution_linear_in_data(x, y):
    setup = _warped_setup()
    a = complete_offsets(setup, (1.0, -1.0))
    b = AsymptoticData((0.0, 0.0), (1.0, 1.0))
    combo = AsymptoticData.from_vector(x * a.vector() + y * b.vector())
    f = solve_harmonic(setup, combo).f
    ref = x * solve_harmonic(setup, a).f + y * solve_harmonic(setup, b).f
    assert np.max(np.abs(f - ref)) < 1e-8 * (1 + abs(x) + abs(y))


@settings(max_examples=15, deadline=None)
@given(t0=st.floats(-2.0, 2.0), th0=st.floats(0.0, 2 * math.pi), s=st.floats(-2.0, 2.0))
def test_flow_advances_level(t0, th0, s):
    field = _warped_field()
    x = gradient_flow(field, None, (t0, th0), s)
    assert abs(field.value(*x) - field.value(t0, th0) - s) < 1e-8


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-6, 100.0), sign=st.sampled_from([-1.0, 1.0]), k=st.sampled_from([0, 1, 2]))
def test_weighted_norm_homogeneous(scale, sign, k):
    m = make_manifold("warped", h=0.2, n=8)
    wt = WeightFunction(alpha=-0.5, rho=extend_rho(m, -0.5).rho)
    t, th = m.grid.mesh()
    f = np.exp(-np.abs(t)) * (1 + 0.1 * np.cos(th))
    assert math.isclose(weighted_norm(sign * scale * f, wt, k, m), scale * weighted_norm(f, wt, k, m),
                        rel_tol=1e-12, abs_tol=1e-300)
