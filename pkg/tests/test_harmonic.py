from __future__ import annotations

import numpy as np
import pytest

from cylends import oracles
from cylends.geometry import volume_form
from cylends.harmonic import (AsymptoticData, ObstructionError, build_f0, complete_offsets, obstruction_values,
                              prepare, smoothstep, solve_harmonic)

from conftest import make_manifold


@pytest.fixture(scope="module")
def setups():
    return {k: prepare(make_manifold(k, h=0.1, n=16)) for k in ("flat", "warped", "cigar")}


def test_smoothstep_is_c2_ramp():
    x = np.linspace(-0.5, 1.5, 9)
    s = smoothstep(x)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert np.all(np.diff(smoothstep(np.linspace(0, 1, 101))) >= 0)


@pytest.mark.parametrize("kind,nullity", [("flat", 2), ("warped", 2), ("cigar", 1)])
def test_phi_nullity(setups, kind, nullity):
    phi = setups[kind].phi
    assert phi.nullity == nullity == phi.expected_nullity
    assert phi.gap > 1e4
    assert np.allclose(phi.phi @ phi.nullspace, 0.0, atol=1e-8 * np.abs(phi.phi).max())


def test_flat_solution_is_linear(setups):
    setup = setups["flat"]
    data = complete_offsets(setup, (1.0, -1.0))
    assert np.allclose(data.D, 0.0, atol=1e-10)
    sol = solve_harmonic(setup, data)
    t = setup.manifold.grid.mesh()[0]
    assert np.max(np.abs(sol.f - t)) < 1e-9
    assert sol.achieved.C == pytest.approx((1.0, -1.0), abs=1e-9)


def test_constants_reproduced(setups):
    for kind in ("warped", "cigar"):
        setup = setups[kind]
        ell = setup.manifold.n_ends
        sol = solve_harmonic(setup, AsymptoticData((0.0,) * ell, (2.5,) * ell))
        assert np.ptp(sol.f) < 1e-8
        assert sol.f.flat[0] == pytest.approx(2.5, abs=1e-8)


def test_warped_solution_matches_ode(setups):
    setup = setups["warped"]
    sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
    t = setup.manifold.grid.t
    mean = sol.f.mean(axis=1)
    ref = oracles.dirichlet_profile(setup.manifold.spec.warp, t, mean[0], mean[-1])
    assert np.max(np.abs(mean - ref)) < 5e-3
    assert np.ptp(sol.f, axis=1).max() < 1e-8


def test_linearity(setups):
    setup = setups["warped"]
    a = complete_offsets(setup, (1.0, -1.0))
    b = AsymptoticData((0.0, 0.0), (1.0, 1.0))
    ab = AsymptoticData.from_vector(2 * a.vector() - 3 * b.vector())
    fa, fb, fab = (solve_harmonic(setup, d).f for d in (a, b, ab))
    assert np.max(np.abs(fab - (2 * fa - 3 * fb))) < 1e-8


def test_maximum_principle(setups):
    setup = setups["warped"]
    sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
    grid = setup.manifold.grid
    face = sol.f[grid.boundary_mask()]
    inner = sol.f[~grid.boundary_mask()]
    assert inner.max() <= face.max() + 1e-10 and inner.min() >= face.min() - 1e-10


def test_offsets_antisymmetric_for_symmetric_model(setups):
    data = complete_offsets(setups["warped"], (1.0, -1.0))
    assert data.D[0] == pytest.approx(-data.D[1], abs=1e-10)
    # slope matching approaches the asymptotic offset of the primitive of 1/w
    kappa = oracles.warp_offset(setups["warped"].manifold.spec.warp)
    assert abs(abs(data.D[0]) - kappa) < 0.01


def test_one_end_slope_is_obstructed(setups):
    setup = setups["cigar"]
    data = AsymptoticData((1.0,), (0.0,))
    with pytest.raises(ObstructionError) as exc:
        solve_harmonic(setup, data)
    face = volume_form(setup.manifold).face_volumes[0]
    assert exc.value.values[0] == pytest.approx(-face, rel=1e-6)
    assert obstruction_values(setup, data)[0] == pytest.approx(-face, rel=1e-6)
    sol = solve_harmonic(setup, data, auto_project=True)
    assert sol.projected and abs(sol.data.C[0]) < 1e-12


def test_two_end_same_sign_slopes_obstructed(setups):
    with pytest.raises(ObstructionError):
        solve_harmonic(setups["flat"], AsymptoticData((1.0, 1.0), (0.0, 0.0)))


def test_robin_closure_agrees_in_core(setups):
    setup = setups["warped"]
    data = complete_offsets(setup, (1.0, -1.0))
    fd = solve_harmonic(setup, data).f
    fr = solve_harmonic(setup, data, closure="robin").f
    core = np.abs(setup.manifold.grid.t) <= setup.manifold.spec.core_radius
    assert np.max(np.abs(fd - fr)[core]) < 0.05


def test_ramp_outside_core_rejected(setups):
    with pytest.raises(ValueError):
        build_f0(setups["flat"].manifold, AsymptoticData((1.0, -1.0), (0.0, 0.0)), ramp=(-1.0, 7.0))


def test_decay_of_correction(setups):
    setup = setups["warped"]
    sol = solve_harmonic(setup, complete_offsets(setup, (1.0, -1.0)))
    assert max(sol.decay) <= sol.decay_bound
    assert sol.residual_interior < 1e-8
