"""The weight function rho and weighted Sobolev norms."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Manifold, ONE_END
from ..grid import subrange_weights

log = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e300


@dataclass(frozen=True)
class WeightFunction:
    rho: np.ndarray  # t-profile
    alpha: float
    p: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")


def _cosine_blend(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def extend_rho(manifold: Manifold, alpha: float = 0.0, p: float = 2.0,
               plateau: float | None = None, blend: float | None = None) -> WeightFunction:
    """``rho = t_i`` on every end, blended to a constant plateau over the core.

    With ``c`` the core radius and ``b`` the blend width,
    ``rho = s |t| + (1 - s) * plateau`` where ``s`` rises from 0 at
    ``|t| = c - b`` to 1 at ``|t| = c`` along a half cosine.  For the default
    plateau ``c`` this is C^1: the slope is 1 at the end and 0 on the plateau.
    """
    spec = manifold.spec
    c = spec.core_radius
    plateau = c if plateau is None else plateau
    blend = 0.5 * c if blend is None else blend
    t = manifold.grid.t
    if spec.topology == ONE_END:
        dist = t
    else:
        dist = np.abs(t)
    s = _cosine_blend((dist - (c - blend)) / blend)
    rho = np.where(dist >= c, dist, s * dist + (1.0 - s) * plateau)
    return WeightFunction(rho, float(alpha), float(p))


def _grad(f, manifold):
    grid = manifold.grid
    out = [np.gradient(f, grid.h_t, axis=0, edge_order=2)]
    for c, h in enumerate(grid.h_theta):
        ax = 1 + c
        out.append((np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h))
    return out


def _derivative_norms(f: np.ndarray, manifold: Manifold, k: int) -> list:
    """Pointwise ``|nabla^j f|`` for ``j = 0..k`` (metric norms, warped Christoffels)."""
    grid = manifold.grid
    out = [np.abs(f)]
    if k == 0:
        return out
    g_inv = [np.ones_like(grid.t)] + [1.0 / gc for gc in manifold.metric.g_cc]
    lift = grid.broadcast_t
    df = _grad(f, manifold)
    out.append(np.sqrt(sum(lift(gi) * d * d for gi, d in zip(g_inv, df))))
    if k == 1:
        return out
    n = len(df)
    hess = [[None] * n for _ in range(n)]
    for a in range(n):
        dda = _grad(df[a], manifold)
        for b in range(n):
            hess[a][b] = dda[b]
    # Christoffel corrections of dt^2 + sum W_c^2 dth_c^2
    for c in range(n - 1):
        gam_tcc = lift(manifold.metric.christoffels[("t", c, c)])
        gam_ctc = lift(manifold.metric.christoffels[(c, "t", c)])
        hess[1 + c][1 + c] = hess[1 + c][1 + c] - gam_tcc * df[0]
        hess[0][1 + c] = hess[0][1 + c] - gam_ctc * df[1 + c]
        hess[1 + c][0] = hess[1 + c][0] - gam_ctc * df[1 + c]
    sq = sum(lift(g_inv[a]) * lift(g_inv[b]) * hess[a][b] ** 2 for a in range(n) for b in range(n))
    out.append(np.sqrt(sq))
    return out


def weighted_norm(f: np.ndarray, wt: WeightFunction, k: int, manifold: Manifold,
                  t_range: tuple | None = None) -> float:
    """Quadrature of ``(sum_j int exp(-alpha rho) |nabla^j f|^p dV)^(1/p)``.

    Trapezoid in ``t`` (restricted to ``t_range`` if given), uniform in the
    angles.  Returns ``inf`` (and logs a warning) when the sum overflows.
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    grid = manifold.grid
    tw = grid.t_weights if t_range is None else subrange_weights(grid.t, *t_range)
    cell = float(np.prod(grid.h_theta))
    log_weight = -wt.alpha * np.asarray(wt.rho) + np.log(np.maximum(tw * manifold.metric.sqrt_det_g * cell, 1e-300))
    if np.max(log_weight[tw > 0], initial=-np.inf) > math.log(OVERFLOW_GUARD):
        log.warning("weighted norm overflows: exp(-alpha rho) exceeds the guard")
        return math.inf
    dv = grid.broadcast_t(np.where(tw > 0, np.exp(log_weight), 0.0))
    total = 0.0
    for d in _derivative_norms(np.asarray(f, dtype=float), manifold, k):
        total += float(np.sum(dv * d ** wt.p))
    if not math.isfinite(total) or total > OVERFLOW_GUARD:
        log.warning("weighted norm overflows")
        return math.inf
    return total ** (1.0 / wt.p)
