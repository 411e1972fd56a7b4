"""Cross-section spectra, indicial roots and Fredholm index bookkeeping.

Sign convention: the Laplacian is ``-div grad`` (nonnegative spectrum), so a
translation-invariant solution ``exp(eps t) s`` of the cylindrical Laplacian
exists iff ``eps**2`` is an eigenvalue of the cross-section Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CrossSection, ManifoldSpec

EIG_TOL = 1e-9
ROOT_TOL = 1e-12


class NotFredholmError(ValueError):
    """Weight lies on (or too close to) the indicial set, or outside the table."""


@dataclass(frozen=True)
class SpectrumTable:
    eigenvalues: tuple
    multiplicities: tuple
    source: str = "analytic"

    def __post_init__(self):
        if len(self.eigenvalues) != len(self.multiplicities):
            raise ValueError("eigenvalues and multiplicities differ in length")

    @property
    def gap(self) -> float:
        """``sqrt(lambda_1)``, the distance from 0 to the nearest nonzero indicial root."""
        return math.sqrt(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else math.inf

    def expanded(self) -> np.ndarray:
        return np.repeat(np.asarray(self.eigenvalues), self.multiplicities)


def _group(values, tol) -> tuple:
    vals, mults = [], []
    for v in sorted(values):
        if vals and abs(v - vals[-1]) <= tol * max(1.0, abs(v)):
            mults[-1] += 1
        else:
            vals.append(float(v))
            mults.append(1)
    return vals, mults


def cross_section_spectrum(X: CrossSection, count: int) -> SpectrumTable:
    """The first ``count`` distinct eigenvalues of ``Delta_X`` with multiplicities.

    Circle of radius ``r``: ``k^2/r^2``; flat torus: ``m^2/r1^2 + n^2/r2^2``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    radii = X.radii
    kmax = count
    while True:
        axes = [np.arange(-kmax, kmax + 1)] * len(radii)
        modes = np.meshgrid(*axes, indexing="ij")
        lam = sum((m.ravel() / r) ** 2 for m, r in zip(modes, radii))
        vals, mults = _group(lam, EIG_TOL)
        # every mode with lambda <= vals[count-1] must be inside the box
        bound = min(((kmax + 1) / r) ** 2 for r in radii)
        if len(vals) >= count and vals[count - 1] < bound:
            return SpectrumTable(tuple(vals[:count]), tuple(mults[:count]), "analytic")
        kmax *= 2


def discrete_cross_section_spectrum(X: CrossSection, count: int, n_points: int | None = None,
                                    seed: int = 0) -> SpectrumTable:
    """Distinct eigenvalues of the periodic second-difference Laplacian on ``X``.

    Each circle factor with ``N`` points carries ``4 sin^2(pi k/N) / (r h)^2``.
    """
    from .discretize.linalg import eigen_smallest
    from .discretize.operator import periodic_laplacian

    n = X.mesh_points if n_points is None else n_points
    A = periodic_laplacian(X.radii, n)
    # enough eigenpairs to cover `count` distinct values on the lattice
    m = min(A.shape[0], (2 * count + 1) ** len(X.radii))
    vals, _ = eigen_smallest(A, m, seed=seed)
    grouped, mults = _group(vals, 1e-6)
    return SpectrumTable(tuple(grouped[:count]), tuple(mults[:count]), "discrete")


@dataclass(frozen=True)
class IndicialSet:
    roots: tuple
    multiplicity: dict = field(hash=False)
    b0: int = 1

    @property
    def gap(self) -> float:
        positive = [r for r in self.roots if r > 0]
        return min(positive) if positive else math.inf

    @property
    def max_root(self) -> float:
        return max(self.roots)

    def d(self, eps: float) -> int:
        for r in self.roots:
            if abs(r - eps) <= ROOT_TOL:
                return self.multiplicity[r]
        return 0

    def nearest_root_distance(self, x: float) -> float:
        return min(abs(x - r) for r in self.roots)


def indicial_set(spectrum: SpectrumTable, b0: int = 1) -> IndicialSet:
    """Roots ``+-sqrt(lambda)`` with ``d(+-sqrt(lambda)) = mult(lambda)`` and ``d(0) = 2 b0``.

    At ``eps = 0`` the translation-invariant solutions are ``1`` and ``t`` on
    every component of ``X``, hence ``2 b0``.
    """
    mult = {}
    for lam, m in zip(spectrum.eigenvalues, spectrum.multiplicities):
        if lam <= EIG_TOL:
            mult[0.0] = 2 * b0
            continue
        eps = math.sqrt(lam)
        mult[eps] = m
        mult[-eps] = m
    return IndicialSet(tuple(sorted(mult)), mult, b0)


def index_jump(indicial: IndicialSet, alpha: float, delta: float) -> int:
    """Sum of ``d(eps)`` over indicial roots strictly between ``alpha`` and ``delta``."""
    if alpha > delta:
        raise ValueError("index_jump needs alpha <= delta")
    for w in (alpha, delta):
        if indicial.nearest_root_distance(w) <= ROOT_TOL:
            raise NotFredholmError(f"weight {w} lies on the indicial set; the operator is not Fredholm")
    if max(abs(alpha), abs(delta)) > indicial.max_root:
        raise NotFredholmError("interval extends beyond the tabulated indicial roots")
    return int(sum(indicial.multiplicity[r] for r in indicial.roots if alpha < r < delta))


@dataclass(frozen=True)
class IndexRecord:
    weight: float
    fredholm: bool
    index: int
    predicted_ker_dim: int
    predicted_coker_dim: int

    def __post_init__(self):
        if self.index != self.predicted_ker_dim - self.predicted_coker_dim:
            raise ValueError("index must equal dim ker - dim coker")


def default_weight(spec: ManifoldSpec) -> float:
    """Midpoint of the spectral gap ``(-sqrt(lambda_1), 0)``."""
    spectrum = cross_section_spectrum(spec.asymptotic_cross_section(), 2)
    return -0.5 * spectrum.gap


def predict_dims(spec: ManifoldSpec, alpha: float, indicial: IndicialSet | None = None) -> IndexRecord:
    """Kernel/cokernel dimensions of the weighted Laplacian for ``alpha`` in the gap.

    For ``alpha < 0``: the maximum principle kills the kernel, and the jump
    across 0 (``2 b0`` per end) together with ``ind(-alpha) = -ind(alpha)``
    forces ``ind(alpha) = -l``.  Positive ``alpha`` in the gap gives the dual
    record (kernel ``l``: harmonic functions of at most linear growth).
    """
    if indicial is None:
        indicial = indicial_set(cross_section_spectrum(spec.asymptotic_cross_section(), 3))
    gap = indicial.gap
    if not (0 < abs(alpha) < gap) or indicial.nearest_root_distance(alpha) <= ROOT_TOL:
        raise NotFredholmError(f"alpha={alpha} is outside the spectral gap (-{gap:.6g}, 0) or its mirror")
    ell = spec.n_ends
    a = -abs(alpha)
    jump = ell * index_jump(indicial, a, -a)
    index_neg = -jump // 2  # ind(-a) - ind(a) = jump and ind(-a) = -ind(a)
    if alpha < 0:
        return IndexRecord(alpha, True, index_neg, 0, -index_neg)
    return IndexRecord(alpha, True, -index_neg, -index_neg, 0)
