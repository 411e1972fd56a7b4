"""Model asymptotically cylindrical manifolds.

The model family is the warped product ``dt^2 + w(t)^2 g_X`` where ``X`` is a
circle of radius ``r`` (surfaces) or a flat torus ``r1 x r2`` (3-manifolds).
Two topologies are supported: a two-ended cylinder over ``t in [-R, R]`` and a
one-ended cap (the cigar ``w = s tanh(t/s)``) over ``t in (0, R]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, capped_grid, two_end_grid

TWO_END = "two_end_cylinder"
ONE_END = "one_end_capped"


class GeometryError(ValueError):
    pass


def _sech(x):
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


@dataclass(frozen=True)
class CrossSection:
    kind: str = "circle"
    radii: tuple = (1.0,)
    mesh_points: int = 64

    @classmethod
    def circle(cls, radius: float = 1.0, mesh_points: int = 64) -> "CrossSection":
        return cls("circle", (float(radius),), int(mesh_points))

    @classmethod
    def flat_torus(cls, r1: float = 1.0, r2: float = 1.0, mesh_points: int = 32) -> "CrossSection":
        return cls("flat_torus", (float(r1), float(r2)), int(mesh_points))

    def __post_init__(self):
        expected = {"circle": 1, "flat_torus": 2}
        if self.kind not in expected:
            raise GeometryError(f"unknown cross-section kind {self.kind!r}")
        if len(self.radii) != expected[self.kind]:
            raise GeometryError(f"{self.kind} needs {expected[self.kind]} radii")
        if any(not r > 0 for r in self.radii):
            raise GeometryError("cross-section radii must be positive")
        if self.mesh_points < 8 or self.mesh_points % 2:
            raise GeometryError("mesh_points must be even and at least 8")

    @property
    def dim(self) -> int:
        return len(self.radii)

    @property
    def b0(self) -> int:
        return 1

    @property
    def volume(self) -> float:
        return float(np.prod([2.0 * np.pi * r for r in self.radii]))

    def scaled(self, factor: float) -> "CrossSection":
        return CrossSection(self.kind, tuple(r * factor for r in self.radii), self.mesh_points)


@dataclass(frozen=True)
class WarpProfile:
    """Warp function ``w(t) > 0`` with analytic first and second derivatives.

    Kinds and parameters:

    - ``constant``: ``c``
    - ``sech_bump``: ``base + amplitude * sech((t - center) / width)``
    - ``cigar``: ``scale * tanh(t / scale)``; only on ``t >= 0``
    - ``compact_bump``: ``base + amplitude * (1 - x^2)^4`` for ``|x| < 1``,
      ``x = (t - center) / width``; constant outside the bump
    """

    kind: str = "constant"
    params: tuple = (1.0,)

    @classmethod
    def constant(cls, c: float = 1.0) -> "WarpProfile":
        return cls("constant", (float(c),))

    @classmethod
    def sech_bump(cls, base=1.0, amplitude=0.3, center=0.0, width=1.0) -> "WarpProfile":
        return cls("sech_bump", (float(base), float(amplitude), float(center), float(width)))

    @classmethod
    def cigar(cls, scale: float = 1.0) -> "WarpProfile":
        return cls("cigar", (float(scale),))

    @classmethod
    def compact_bump(cls, base=1.0, amplitude=0.3, center=0.0, width=2.0) -> "WarpProfile":
        return cls("compact_bump", (float(base), float(amplitude), float(center), float(width)))

    def __post_init__(self):
        arity = {"constant": 1, "sech_bump": 4, "cigar": 1, "compact_bump": 4}
        if self.kind not in arity:
            raise GeometryError(f"unknown warp kind {self.kind!r}")
        if len(self.params) != arity[self.kind]:
            raise GeometryError(f"{self.kind} takes {arity[self.kind]} parameters")
        p = self.params
        if self.kind in ("constant", "cigar") and not p[0] > 0:
            raise GeometryError("warp constant/scale must be positive")
        if self.kind in ("sech_bump", "compact_bump"):
            if not p[3] > 0:
                raise GeometryError("bump width must be positive")
            if not p[0] + min(0.0, p[1]) > 0:
                raise GeometryError("warp must stay positive: base + min(amplitude, 0) <= 0")

    @property
    def beta(self) -> float:
        """Exponential rate of approach to the limiting cylinder (-inf if exact)."""
        if self.kind == "sech_bump":
            return -1.0 / self.params[3]
        if self.kind == "cigar":
            return -2.0 / self.params[0]
        return -math.inf

    def limit(self, side: int = 1) -> float:
        return self.params[0]

    @property
    def is_flat(self) -> bool:
        return self.kind == "constant" or (self.kind in ("sech_bump", "compact_bump") and self.params[1] == 0.0)

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(t, p[0]) if order == 0 else np.zeros_like(t)
        if self.kind == "sech_bump":
            base, amp, center, width = p
            x = (t - center) / width
            s = _sech(x)
            th = np.tanh(x)
            if order == 0:
                return base + amp * s
            if order == 1:
                return -amp * s * th / width
            return amp * s * (th * th - s * s) / width**2
        if self.kind == "cigar":
            sc = p[0]
            x = t / sc
            s = _sech(x)
            if order == 0:
                return sc * np.tanh(x)
            if order == 1:
                return s * s
            return -2.0 * s * s * np.tanh(x) / sc
        base, amp, center, width = p
        x = (t - center) / width
        inside = np.abs(x) < 1.0
        u = np.where(inside, 1.0 - x * x, 0.0)
        if order == 0:
            return base + amp * u**4
        if order == 1:
            return amp * (-8.0 * x * u**3) / width
        return amp * (-8.0 * u**3 + 48.0 * x * x * u**2) / width**2


@dataclass(frozen=True)
class EndSpec:
    cross_section: CrossSection
    orientation: int


@dataclass(frozen=True)
class ManifoldSpec:
    """A truncated model manifold.

    ``truncation_R`` is the end-coordinate value of every truncation face, so a
    two-ended model spans ``t in [-R, R]`` and a capped model ``t in (0, R]``.
    Points with ``t_i >= core_radius`` lie in end ``i``.
    """

    ends: tuple
    warp: WarpProfile
    topology: str
    truncation_R: float
    grid_h: float
    core_radius: float = 5.0

    @classmethod
    def make(cls, cross_section: CrossSection, warp: WarpProfile, topology: str = TWO_END,
             truncation_R: float = 8.0, grid_h: float = 0.05, core_radius: float | None = None) -> "ManifoldSpec":
        if topology == TWO_END:
            ends = (EndSpec(cross_section, 1), EndSpec(cross_section, -1))
        elif topology == ONE_END:
            ends = (EndSpec(cross_section, 1),)
        else:
            raise GeometryError(f"unknown topology {topology!r}")
        if core_radius is None:
            core_radius = min(5.0, 0.625 * truncation_R)
        return cls(ends, warp, topology, float(truncation_R), float(grid_h), float(core_radius))

    @property
    def n_ends(self) -> int:
        return len(self.ends)

    @property
    def cross_section(self) -> CrossSection:
        return self.ends[0].cross_section

    def asymptotic_cross_section(self) -> CrossSection:
        """The limiting cross-section ``(X, w(inf)^2 g_X)`` seen by the ends."""
        return self.cross_section.scaled(self.warp.limit())

    def validate(self) -> None:
        ell = len(self.ends)
        if ell not in (1, 2):
            raise GeometryError("the model family has one or two ends")
        if (self.topology == ONE_END) != (ell == 1):
            raise GeometryError("one_end_capped topology requires exactly one end")
        if self.topology not in (TWO_END, ONE_END):
            raise GeometryError(f"unknown topology {self.topology!r}")
        if len({e.cross_section for e in self.ends}) != 1:
            raise GeometryError("all ends must share one cross-section")
        if self.warp.kind == "cigar" and self.topology != ONE_END:
            raise GeometryError("the cigar profile caps a single end; it cannot have two ends")
        if self.topology == ONE_END and self.warp.kind != "cigar":
            raise GeometryError("one_end_capped needs a warp vanishing at the tip (cigar)")
        if not self.grid_h > 0 or not self.truncation_R > 0:
            raise GeometryError("grid_h and truncation_R must be positive")
        beta = self.warp.beta
        if math.isfinite(beta) and self.truncation_R < 5.0 / abs(beta):
            raise GeometryError(
                f"truncation_R={self.truncation_R} < 5/|beta|={5.0 / abs(beta):.4g}: truncation error too large")
        if not 0 < self.core_radius < self.truncation_R:
            raise GeometryError("core_radius must lie strictly inside (0, truncation_R)")


@dataclass(frozen=True)
class MetricField:
    """Metric data of ``dt^2 + W_c(t)^2 dtheta_c^2`` with ``W_c = r_c w``, as t-profiles.

    All components are independent of the angles, so they are stored as
    one-dimensional arrays over the axial nodes; ``sqrt_det_g_half`` holds the
    volume density at the axial cell faces ``t_{j+1/2}``.
    """

    g_tt: np.ndarray
    g_cc: tuple
    sqrt_det_g: np.ndarray
    sqrt_det_g_half: np.ndarray
    christoffels: dict
    christoffels_sampled: dict = field(repr=False, default=None)


@dataclass(frozen=True)
class Manifold:
    spec: ManifoldSpec
    grid: Grid
    metric: MetricField

    @property
    def n_ends(self) -> int:
        return self.spec.n_ends

    @property
    def radii(self) -> tuple:
        return self.spec.cross_section.radii

    def warp(self, t, order: int = 0):
        return self.spec.warp(t, order)

    def scale_factor(self, t, order: int = 0, axis: int = 0):
        """``W_c(t) = r_c w(t)`` and its derivatives."""
        return self.radii[axis] * self.warp(t, order)

    def density(self, t):
        """Volume density ``sqrt(det g)`` at arbitrary ``t``."""
        return float(np.prod(self.radii)) * self.warp(t) ** len(self.radii)

    def end_t(self, end: int, t):
        """Axial coordinate of end ``end`` as a function of the global ``t``."""
        return np.asarray(t) * self.spec.ends[end - 1].orientation

    def quadrature_weights(self) -> np.ndarray:
        """Node weights for the L2 pairing ``sum(weights * u * v)``."""
        cell = float(np.prod(self.grid.h_theta))
        return self.grid.broadcast_t(self.grid.t_weights * self.metric.sqrt_det_g * cell)


def _metric_field(spec: ManifoldSpec, grid: Grid) -> MetricField:
    t = grid.t
    radii = spec.cross_section.radii
    w = spec.warp(t)
    dw = spec.warp(t, 1)
    n = len(radii)
    g_cc = tuple((r * w) ** 2 for r in radii)
    rho = float(np.prod(radii))
    sqrt_g = rho * w**n
    t_half = 0.5 * (t[:-1] + t[1:])
    sqrt_g_half = rho * spec.warp(t_half) ** n
    christ = {}
    for c, r in enumerate(radii):
        christ[("t", c, c)] = -(r * w) * (r * dw)
        christ[(c, "t", c)] = dw / w
    sampled = {}
    for c, gc in enumerate(g_cc):
        dg = np.gradient(gc, grid.h_t, edge_order=2)
        sampled[("t", c, c)] = -0.5 * dg
        sampled[(c, "t", c)] = 0.5 * dg / gc
    return MetricField(np.ones_like(t), g_cc, sqrt_g, sqrt_g_half, christ, sampled)


def build_manifold(spec: ManifoldSpec) -> Manifold:
    """Sample the metric of ``spec`` on its grid.

    Raises
    ------
    GeometryError
        If the spec violates its invariants (too short a truncation for the
        decay rate, a cigar with two ends, ...).
    """
    spec.validate()
    mesh = (spec.cross_section.mesh_points,) * spec.cross_section.dim
    if spec.topology == TWO_END:
        grid = two_end_grid(spec.truncation_R, spec.grid_h, mesh)
    else:
        grid = capped_grid(spec.truncation_R, spec.grid_h, mesh)
    metric = _metric_field(spec, grid)
    if np.any(metric.sqrt_det_g <= 0):
        raise GeometryError("metric degenerates at a grid node")
    return Manifold(spec, grid, metric)


def gaussian_curvature(manifold: Manifold, method: str = "analytic") -> np.ndarray:
    """Gaussian curvature ``K = -w''/w`` of a surface, as a grid function.

    ``method="metric"`` differentiates the sampled ``g_thth`` instead
    (``K = -(sqrt g_thth)'' / sqrt g_thth``), second order in ``h``.
    """
    if manifold.spec.cross_section.dim != 1:
        raise GeometryError("Gaussian curvature is defined for surfaces only")
    t = manifold.grid.t
    if method == "analytic":
        K = -manifold.warp(t, 2) / manifold.warp(t)
    elif method == "metric":
        W = np.sqrt(manifold.metric.g_cc[0])
        h = manifold.grid.h_t
        d2 = np.empty_like(W)
        d2[1:-1] = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / h**2
        d2[0] = (2 * W[0] - 5 * W[1] + 4 * W[2] - W[3]) / h**2
        d2[-1] = (2 * W[-1] - 5 * W[-2] + 4 * W[-3] - W[-4]) / h**2
        K = -d2 / W
    else:
        raise ValueError(f"unknown method {method!r}")
    return manifold.grid.broadcast_t(K)


@dataclass(frozen=True)
class VolumeData:
    weights: np.ndarray
    end_volumes: tuple
    face_volumes: tuple
    total: float


def volume_form(manifold: Manifold) -> VolumeData:
    """Quadrature weights and cross-section volumes.

    ``end_volumes`` are the limiting ``vol(X_i) = vol(X) * w(+-inf)^dim``;
    ``face_volumes`` are the volumes of the truncation faces ``X_i x {R}``.
    """
    spec = manifold.spec
    cs = spec.cross_section
    limit = tuple(cs.volume * spec.warp.limit(e.orientation) ** cs.dim for e in spec.ends)
    faces = tuple(float(manifold.metric.sqrt_det_g[manifold.grid.boundary[i + 1]]) * (2 * np.pi) ** cs.dim
                  for i in range(spec.n_ends))
    weights = manifold.quadrature_weights()
    return VolumeData(weights, limit, faces, float(weights.sum()))


@dataclass(frozen=True)
class ChartPoint:
    region: str
    end: int | None
    t: float
    x: tuple


def end_coordinates(manifold_or_spec, point) -> ChartPoint:
    """Locate a global point ``(t, theta...)`` in an end chart or in the core."""
    spec = manifold_or_spec.spec if isinstance(manifold_or_spec, Manifold) else manifold_or_spec
    t = float(point[0])
    x = tuple(float(v) % (2 * np.pi) for v in point[1:])
    for i, e in enumerate(spec.ends, start=1):
        ti = e.orientation * t
        if ti >= spec.core_radius:
            return ChartPoint("end", i, ti, x)
    return ChartPoint("core", None, t, x)
