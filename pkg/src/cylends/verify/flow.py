"""Normalized gradient flow of a harmonic function and the product-metric test.

The discrete ``f`` is replaced by a bicubic spline ``F`` on ``(t, theta)``;
the flow ``dx/ds = grad F / |grad F|^2`` then satisfies
``F(x(s)) = F(x(0)) + s`` up to integrator tolerance.  Flow coordinates
``(theta, s)`` seeded on the level set ``F = 0`` pull back the metric, which
is a product ``ds^2 + g_X`` exactly when ``g_ss = 1``, ``g_s theta = 0`` and
``g_theta theta`` does not depend on ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq

from ..geometry import Manifold

CRITICAL_TOL = 1e-8
PAD = 4


class CriticalPointError(ValueError):
    """``|df|`` fell below the critical-point threshold along the flow."""


@dataclass(frozen=True)
class FlowField:
    """Spline model of ``f`` with the metric needed to raise an index."""

    spline: RectBivariateSpline
    manifold: Manifold
    t_range: tuple

    def value(self, t, th):
        return self.spline.ev(t, np.mod(th, 2 * np.pi))

    def gradient(self, t, th):
        """Contravariant ``grad F = (F_t, F_theta / W^2)`` and ``|dF|^2``."""
        th = np.mod(th, 2 * np.pi)
        ft = self.spline.ev(t, th, dx=1)
        fth = self.spline.ev(t, th, dy=1)
        W2 = self.manifold.scale_factor(t) ** 2
        return ft, fth / W2, ft * ft + fth * fth / W2


def flow_field(f, manifold: Manifold) -> FlowField:
    """Bicubic spline of a surface grid function, periodic in the angle."""
    if len(manifold.grid.thetas) != 1:
        raise NotImplementedError("the gradient flow is implemented for surfaces")
    f = np.asarray(getattr(f, "f", f), dtype=float)
    th = manifold.grid.thetas[0]
    h = manifold.grid.h_theta[0]
    th_ext = np.concatenate([th[-PAD:] - 2 * np.pi, th, th[:PAD] + 2 * np.pi])
    f_ext = np.concatenate([f[:, -PAD:], f, f[:, :PAD]], axis=1)
    assert np.allclose(np.diff(th_ext), h)
    t = manifold.grid.t
    return FlowField(RectBivariateSpline(t, th_ext, f_ext, kx=3, ky=3, s=0), manifold, (float(t[0]), float(t[-1])))


def _rhs(field: FlowField):
    def rhs(_s, y):
        t, th = y[0::2], y[1::2]
        gt, gth, n2 = field.gradient(t, th)
        if np.any(n2 < CRITICAL_TOL**2):
            raise CriticalPointError(f"|df| = {math.sqrt(float(n2.min())):.3e} below {CRITICAL_TOL:g}")
        out = np.empty_like(y)
        out[0::2] = gt / n2
        out[1::2] = gth / n2
        return out
    return rhs


def flow_many(field: FlowField, seeds: np.ndarray, s_eval: np.ndarray, rtol: float = 1e-12,
              atol: float = 1e-13) -> np.ndarray:
    """Flow every seed ``(t, theta)`` to the times ``s_eval`` (which must include 0).

    Returns an array of shape ``(len(s_eval), n_seeds, 2)``.  Steps are capped
    at half the axial grid spacing: the spline is only C2 across its knots, and
    longer steps let the embedded error estimate miss the kinks.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    s_eval = np.asarray(s_eval, dtype=float)
    y0 = seeds.ravel()
    out = np.empty((len(s_eval), len(seeds), 2))
    for sign in (1.0, -1.0):
        sel = s_eval * sign >= 0
        times = s_eval[sel]
        if not np.any(times != 0):
            out[sel] = seeds
            continue
        order = np.argsort(np.abs(times))
        span = (0.0, float(times[order[-1]]))
        sol = solve_ivp(_rhs(field), span, y0, method="DOP853", t_eval=times[order], rtol=rtol, atol=atol,
                        max_step=0.5 * field.manifold.grid.h_t)
        if sol.status != 0:
            raise RuntimeError(f"gradient flow integration failed: {sol.message}")
        block = np.empty((len(times), len(seeds), 2))
        block[order] = sol.y.T.reshape(len(times), len(seeds), 2)
        out[sel] = block
    lo, hi = field.t_range
    if np.any(out[..., 0] < lo) or np.any(out[..., 0] > hi):
        raise ValueError("flow left the computational domain")
    return out


def gradient_flow(f, manifold: Manifold, x0, t: float) -> np.ndarray:
    """``upsilon_t(x0)``: follow ``grad f / |grad f|^2`` for time ``t``.

    Raises
    ------
    CriticalPointError
        ``|df|`` drops below ``1e-8`` on the way.
    """
    field = f if isinstance(f, FlowField) else flow_field(f, manifold)
    pts = flow_many(field, np.asarray(x0, dtype=float)[None, :], np.array([0.0, float(t)]))
    out = pts[1, 0].copy()
    out[1] = np.mod(out[1], 2 * np.pi)
    return out


def level_set(field: FlowField, thetas: np.ndarray, level: float = 0.0) -> np.ndarray:
    """Seeds ``(t, theta)`` on ``F = level``, one per angle, by bracketing along ``t``."""
    t = field.manifold.grid.t
    seeds = []
    for th in thetas:
        vals = field.value(t, np.full_like(t, th)) - level
        sign = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
        if sign.size == 0:
            raise CriticalPointError(f"level {level} not attained along theta={th:.4f}")
        j = sign[np.argmin(np.abs(t[sign]))]
        root = brentq(lambda x: float(field.value(x, th)) - level, t[j], t[j + 1], xtol=1e-14)
        seeds.append((root, th))
    return np.array(seeds)


@dataclass(frozen=True)
class SplitReport:
    s: np.ndarray
    points: np.ndarray
    g_ss: np.ndarray
    g_st: np.ndarray
    g_thth: np.ndarray
    level_error: float
    defect_g_ss: float
    defect_g_st: float
    defect_dg_thth: float
    tol: float

    @property
    def defects(self) -> dict:
        return {"g_tt_minus_1": self.defect_g_ss, "g_ttheta": self.defect_g_st, "dt_g_thetatheta": self.defect_dg_thth}

    @property
    def passed(self) -> bool:
        return max(self.defects.values()) <= self.tol

    def as_dict(self) -> dict:
        return {"defects": self.defects, "level_error": self.level_error, "tol": self.tol,
                "passed": self.passed, "n_seeds": int(self.points.shape[1]), "s": self.s.tolist()}


def split_check(f, manifold: Manifold, n_seeds: int = 32, s_max: float | None = None, n_s: int = 41,
                tol: float | None = None) -> SplitReport:
    """Pull back the metric along flow coordinates seeded on ``f = 0``.

    Defects reported: ``max |g_ss - 1|``, ``max |g_s theta|`` (normalized by
    ``sqrt(g_theta theta)``) and ``max |d_s g_theta theta|``.  The default
    tolerance is ``50 h^2``.
    """
    field = f if isinstance(f, FlowField) else flow_field(f, manifold)
    h = manifold.grid.h_t
    tol = 50.0 * h * h if tol is None else tol
    thetas = np.arange(n_seeds) * (2 * np.pi / n_seeds)
    seeds = level_set(field, thetas)
    if s_max is None:
        lo, hi = field.t_range
        room = min(seeds[:, 0].min() - lo, hi - seeds[:, 0].max())
        s_max = 0.5 * room
    s = np.linspace(-s_max, s_max, n_s)
    pts = flow_many(field, seeds, s)
    t, th = pts[..., 0], pts[..., 1]
    level_error = float(np.abs(field.value(t, th) - s[:, None]).max())
    gt, gth, n2 = field.gradient(t, th)
    W2 = manifold.scale_factor(t) ** 2
    # d/ds of the flow: grad F / |dF|^2
    vs = (gt / n2, gth / n2)
    # d/dtheta across seeds: periodic centred differences, angle unwrapped
    dth = 2 * np.pi / n_seeds
    dt_seed = (np.roll(t, -1, axis=1) - np.roll(t, 1, axis=1)) / (2 * dth)
    step = np.roll(th, -1, axis=1) - np.roll(th, 1, axis=1)
    step = np.mod(step + np.pi, 2 * np.pi) - np.pi
    vth = (dt_seed, step / (2 * dth))
    g_ss = vs[0] ** 2 + W2 * vs[1] ** 2
    g_st = vs[0] * vth[0] + W2 * vs[1] * vth[1]
    g_thth = vth[0] ** 2 + W2 * vth[1] ** 2
    dg = np.gradient(g_thth, s, axis=0, edge_order=2)
    return SplitReport(
        s=s, points=pts, g_ss=g_ss, g_st=g_st, g_thth=g_thth, level_error=level_error,
        defect_g_ss=float(np.abs(g_ss - 1.0).max()),
        defect_g_st=float((np.abs(g_st) / np.sqrt(g_thth)).max()),
        defect_dg_thth=float(np.abs(dg).max()), tol=float(tol),
    )
