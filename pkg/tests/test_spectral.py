from __future__ import annotations

import math

import numpy as np
import pytest

from cylends import oracles
from cylends.geometry import CrossSection, ManifoldSpec, WarpProfile
from cylends.spectral import (NotFredholmError, cross_section_spectrum, default_weight,
                              discrete_cross_section_spectrum, index_jump, indicial_set, predict_dims)


def test_circle_spectrum_multiplicities():
    s = cross_section_spectrum(CrossSection.circle(2.0), 4)
    assert s.eigenvalues == pytest.approx((0.0, 0.25, 1.0, 2.25))
    assert s.multiplicities == (1, 2, 2, 2)


def test_torus_spectrum_against_lattice_count():
    s = cross_section_spectrum(CrossSection.flat_torus(1.0, 1.0), 4)
    assert s.eigenvalues == pytest.approx((0.0, 1.0, 2.0, 4.0))
    assert s.multiplicities == (1, 4, 4, 4)


def test_indicial_roots_match_fourier_oracle():
    ind = indicial_set(cross_section_spectrum(CrossSection.flat_torus(1.0, 2.0), 6))
    ref = oracles.fourier_indicial_roots((1.0, 2.0), kmax=4)
    for r in ind.roots:
        match = [k for k in ref if abs(k - r) < 1e-9]
        assert match and ref[match[0]] == ind.multiplicity[r]
    assert ind.multiplicity[0.0] == 2


def test_discrete_spectrum_closed_form():
    X = CrossSection.circle(1.0, 32)
    s = discrete_cross_section_spectrum(X, 4)
    ref = np.unique(np.round(oracles.circle_difference_eigenvalues(1.0, 32), 12))[:4]
    assert np.allclose(s.eigenvalues, ref, atol=1e-9)
    assert s.multiplicities == (1, 2, 2, 2)


def test_index_jump_and_fredholm_guard():
    ind = indicial_set(cross_section_spectrum(CrossSection.circle(1.0), 3))
    assert index_jump(ind, -0.5, 0.5) == 2
    assert index_jump(ind, -1.5, 1.5) == 6
    with pytest.raises(NotFredholmError):
        index_jump(ind, -1.0, 0.5)


@pytest.mark.parametrize("topology,warp,ell", [("two_end_cylinder", WarpProfile.constant(1.0), 2),
                                               ("one_end_capped", WarpProfile.cigar(1.0), 1)])
def test_predicted_dimensions(topology, warp, ell):
    spec = ManifoldSpec.make(CrossSection.circle(1.0, 16), warp, topology, 8.0, 0.1)
    alpha = default_weight(spec)
    assert alpha == pytest.approx(-0.5)
    rec = predict_dims(spec, alpha)
    assert (rec.predicted_ker_dim, rec.predicted_coker_dim, rec.index) == (0, ell, -ell)
    dual = predict_dims(spec, -alpha)
    assert dual.index == -rec.index
    with pytest.raises(NotFredholmError):
        predict_dims(spec, -1.5)


def test_gap_scales_with_radius():
    s = cross_section_spectrum(CrossSection.circle(3.0), 2)
    assert s.gap == pytest.approx(1 / 3)
    assert math.isinf(cross_section_spectrum(CrossSection.circle(1.0), 1).gap)
