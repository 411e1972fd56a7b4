from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from cylends.geometry import (CrossSection, GeometryError, ManifoldSpec, WarpProfile, build_manifold,
                              end_coordinates, gaussian_curvature, volume_form)

from conftest import make_manifold


@pytest.mark.parametrize("warp", [WarpProfile.sech_bump(1.0, 0.3, 0.0, 1.0), WarpProfile.cigar(1.0),
                                  WarpProfile.compact_bump(1.0, 0.3, 0.0, 2.0)])
def test_warp_derivatives_match_finite_differences(warp):
    t = np.linspace(0.3, 6.0, 57)
    eps = 1e-5
    for k in range(2):
        fd = (warp(t + eps, k) - warp(t - eps, k)) / (2 * eps)
        assert np.allclose(fd, warp(t, k + 1), atol=1e-7)


def test_volume_matches_quadrature(warped):
    vol = volume_form(warped)
    ref, _ = integrate.quad(lambda s: 2 * np.pi * warped.warp(s), -8.0, 8.0)
    assert abs(vol.total - ref) / ref < 1e-3
    assert vol.face_volumes[0] == pytest.approx(2 * np.pi * warped.warp(8.0), rel=1e-12)
    assert vol.end_volumes[0] == pytest.approx(2 * np.pi)


def test_flat_volume_exact(flat):
    assert volume_form(flat).total == pytest.approx(2 * np.pi * 16.0, rel=1e-12)


def test_curvature_methods_agree(warped):
    Ka = gaussian_curvature(warped)
    Km = gaussian_curvature(warped, method="metric")
    assert np.max(np.abs(Ka - Km)) < 5e-3
    assert np.max(np.abs(gaussian_curvature(make_manifold("flat")))) == 0.0


def test_cigar_curvature_is_positive(cigar):
    K = gaussian_curvature(cigar)
    assert np.all(K > 0)
    # w = tanh t has K = 2 sech^2 t
    t = cigar.grid.t
    assert np.allclose(K[:, 0], 2 / np.cosh(t) ** 2, rtol=1e-10)


def test_end_coordinates():
    m = make_manifold("flat")
    p = end_coordinates(m, (-7.0, 7.0))
    assert p.region == "end" and p.end == 2 and p.t == 7.0
    assert 0 <= p.x[0] < 2 * np.pi
    assert end_coordinates(m, (0.5, 0.0)).region == "core"


@pytest.mark.parametrize("kwargs", [
    dict(warp=WarpProfile.cigar(1.0), topology="two_end_cylinder"),
    dict(warp=WarpProfile.constant(1.0), topology="one_end_capped"),
    dict(warp=WarpProfile.sech_bump(1.0, 0.3, 0.0, 1.0), topology="two_end_cylinder", truncation_R=2.0),
])
def test_invalid_models_rejected(kwargs):
    spec = ManifoldSpec.make(CrossSection.circle(1.0, 16), **kwargs)
    with pytest.raises(GeometryError):
        spec.validate()


def test_torus_cross_section():
    spec = ManifoldSpec.make(CrossSection.flat_torus(1.0, 2.0, 8), WarpProfile.constant(1.0), "two_end_cylinder",
                             6.0, 0.2)
    m = build_manifold(spec)
    assert m.grid.shape == (len(m.grid.t), 8, 8)
    assert volume_form(m).total == pytest.approx(4 * np.pi**2 * 2.0 * 12.0, rel=1e-12)
