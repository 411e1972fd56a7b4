from __future__ import annotations

import pytest

from cylends.geometry import ONE_END, TWO_END, CrossSection, ManifoldSpec, WarpProfile, build_manifold


def make_manifold(kind: str = "flat", h: float = 0.1, R: float = 8.0, n: int = 32, radius: float = 1.0):
    warps = {
        "flat": (WarpProfile.constant(1.0), TWO_END),
        "warped": (WarpProfile.sech_bump(1.0, 0.3, 0.0, 1.0), TWO_END),
        "cigar": (WarpProfile.cigar(1.0), ONE_END),
    }
    w, topology = warps[kind]
    return build_manifold(ManifoldSpec.make(CrossSection.circle(radius, n), w, topology, R, h))


@pytest.fixture(scope="session")
def flat():
    return make_manifold("flat")


@pytest.fixture(scope="session")
def warped():
    return make_manifold("warped")


@pytest.fixture(scope="session")
def cigar():
    return make_manifold("cigar")
