"""Integrated Bochner identity on the truncated core ``K_R``.

For harmonic ``f`` and ``gamma = df``,

    int_{K_R} |nabla gamma|^2 + int_{K_R} Ric(gamma, gamma)
        = sum_i int_{X_i x {R}} <gamma, nabla_eta gamma>,

with ``eta`` the outward unit normal ``+-d_t``.  Everything is evaluated from
grid samples: finite-difference ``nabla gamma``, trapezoid quadrature in ``t``
and the rectangle rule in the angles.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import Manifold
from .forms import OneForm, covariant_derivative, inverse_metric, ricci_factors


@dataclass(frozen=True)
class BochnerReport:
    R: float
    interior_energy: float
    ricci_term: float
    boundary_terms: tuple
    identity_residual: float

    @property
    def boundary_total(self) -> float:
        return float(sum(self.boundary_terms))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["boundary_terms"] = list(self.boundary_terms)
        return d


def _angular_sum(field: np.ndarray, manifold: Manifold) -> np.ndarray:
    """``int f dtheta`` at every axial node (rectangle rule, spectrally accurate)."""
    cell = float(np.prod(manifold.grid.h_theta))
    return field.reshape(field.shape[0], -1).sum(axis=1) * cell


def profile_integral(t: np.ndarray, y: np.ndarray, lo: float, hi: float, tip: bool = False) -> float:
    """Trapezoid integral of sampled ``y(t)`` over ``[lo, hi]`` with interpolated endpoints.

    With ``tip`` the samples start half a cell above ``t = 0`` and the segment
    ``[0, t_0]`` is closed with the constant value ``y_0``.
    """
    total = 0.0
    if tip and lo < t[0]:
        total += (t[0] - max(lo, 0.0)) * y[0]
        lo = t[0]
    inside = (t > lo) & (t < hi)
    ts = np.concatenate([[lo], t[inside], [hi]])
    ys = np.concatenate([[np.interp(lo, t, y)], y[inside], [np.interp(hi, t, y)]])
    return total + float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(ts)))


def bochner_identity(gamma: OneForm, manifold: Manifold | None, R: float) -> BochnerReport:
    """Interior energy, Ricci term and boundary fluxes of the Bochner identity on ``K_R``.

    Raises
    ------
    ValueError
        ``R`` lies beyond the truncation of the grid.
    """
    m = gamma.manifold if manifold is None else manifold
    spec, grid = m.spec, m.grid
    if not 0 < R <= spec.truncation_R - 2 * grid.h_t:
        raise ValueError(f"R={R} must lie inside the grid (truncation {spec.truncation_R})")
    lift = grid.broadcast_t
    ginv = inverse_metric(m)
    n = len(ginv)
    T = covariant_derivative(gamma, m).components
    g = gamma.components
    density = m.metric.sqrt_det_g
    energy_density = sum(lift(ginv[a] * ginv[b]) * T[a][b] ** 2 for a in range(n) for b in range(n))
    ricci_density = sum(lift(r * gi) * c * c for r, gi, c in zip(ricci_factors(m), ginv, g))
    t = grid.t
    lo = 0.0 if grid.tip else -R
    energy = profile_integral(t, _angular_sum(energy_density, m) * density, lo, R, grid.tip)
    ricci = profile_integral(t, _angular_sum(ricci_density, m) * density, lo, R, grid.tip)
    # <gamma, nabla_t gamma> integrated over each slice
    flux = _angular_sum(sum(lift(ginv[b]) * g[b] * T[0][b] for b in range(n)), m) * density
    boundary = []
    for e in spec.ends:
        boundary.append(float(e.orientation * np.interp(e.orientation * R, t, flux)))
    residual = abs(energy + ricci - sum(boundary))
    return BochnerReport(float(R), float(energy), float(ricci), tuple(boundary), float(residual))


def boundary_decay_scan(gamma: OneForm, manifold: Manifold | None, R_list) -> list:
    """Bochner reports for increasing ``R``."""
    R_list = [float(r) for r in R_list]
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("R values must increase")
    return [bochner_identity(gamma, manifold, R) for R in R_list]


def observed_decay_rate(reports: list) -> float:
    """Exponential rate of the increments of the total boundary term against ``R``.

    Fits ``log |B(R_{k+1}) - B(R_k)|`` linearly in ``R``; NaN when the
    increments vanish (the boundary terms are constant).
    """
    R = np.array([r.R for r in reports])
    B = np.array([r.boundary_total for r in reports])
    inc = np.abs(np.diff(B))
    if len(inc) < 2 or np.any(inc <= 1e-14 * max(np.abs(B).max(), 1e-300)):
        return math.nan
    return float(np.polyfit(0.5 * (R[1:] + R[:-1]), np.log(inc), 1)[0])
