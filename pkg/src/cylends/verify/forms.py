"""One-forms on warped products ``dt^2 + sum_c W_c(t)^2 dtheta_c^2`` and their derivatives.

Axis 0 is ``t``, axes ``1..n-1`` are the angles.  Axial derivatives are
second-order finite differences (one-sided at the ends of the grid), angular
derivatives are centred periodic differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Manifold

# distance from a smooth tip excluded from interior sup-norms
TIP_MARGIN = 0.5


def partial(f: np.ndarray, axis: int, manifold: Manifold) -> np.ndarray:
    grid = manifold.grid
    if axis == 0:
        return np.gradient(f, grid.h_t, axis=0, edge_order=2)
    h = grid.h_theta[axis - 1]
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)


def _ndim(manifold: Manifold) -> int:
    return 1 + len(manifold.grid.thetas)


def inverse_metric(manifold: Manifold) -> list:
    """Diagonal of ``g^{ab}`` as t-profiles."""
    return [np.ones_like(manifold.grid.t)] + [1.0 / gc for gc in manifold.metric.g_cc]


def christoffel_table(manifold: Manifold) -> list:
    """``G[d][a][b] = Gamma^d_{ab}`` as t-profiles (zeros where the symbol vanishes)."""
    n = _ndim(manifold)
    zero = np.zeros_like(manifold.grid.t)
    G = [[[zero for _ in range(n)] for _ in range(n)] for _ in range(n)]
    ch = manifold.metric.christoffels
    for c in range(n - 1):
        G[0][1 + c][1 + c] = ch[("t", c, c)]
        G[1 + c][0][1 + c] = ch[(c, "t", c)]
        G[1 + c][1 + c][0] = ch[(c, "t", c)]
    return G


def ricci_factors(manifold: Manifold) -> list:
    """Mixed Ricci tensor ``Ric^a_a`` (diagonal) as t-profiles.

    For ``dt^2 + w^2 g_flat`` with a k-dimensional flat fibre,
    ``Ric^t_t = -k w''/w`` and ``Ric^c_c = -w''/w - (k-1) (w'/w)^2``.
    In dimension two both reduce to the Gaussian curvature.
    """
    t = manifold.grid.t
    w, dw, d2w = manifold.warp(t), manifold.warp(t, 1), manifold.warp(t, 2)
    k = len(manifold.grid.thetas)
    fibre = -d2w / w - (k - 1) * (dw / w) ** 2
    return [-k * d2w / w] + [fibre] * k


@dataclass(frozen=True)
class OneForm:
    components: tuple
    manifold: Manifold

    @property
    def norm(self) -> np.ndarray:
        """Pointwise ``|gamma| = sqrt(g^{ab} gamma_a gamma_b)``."""
        lift = self.manifold.grid.broadcast_t
        ginv = inverse_metric(self.manifold)
        return np.sqrt(sum(lift(gi) * c * c for gi, c in zip(ginv, self.components)))


def differential(f, manifold: Manifold) -> OneForm:
    """``gamma = df``; ``f`` may be a grid function or anything with an ``f`` attribute."""
    f = np.asarray(getattr(f, "f", f), dtype=float)
    return OneForm(tuple(partial(f, a, manifold) for a in range(_ndim(manifold))), manifold)


def sample_form(manifold: Manifold, fn) -> OneForm:
    """Sample ``fn(t, *thetas) -> components`` on the grid."""
    mesh = manifold.grid.mesh()
    return OneForm(tuple(np.broadcast_to(np.asarray(c, dtype=float), manifold.grid.shape).copy()
                         for c in fn(*mesh)), manifold)


@dataclass(frozen=True)
class CovariantDerivativeTensor:
    """``T[a][b] = nabla_a gamma_b``."""

    components: tuple
    manifold: Manifold

    @property
    def norm(self) -> np.ndarray:
        lift = self.manifold.grid.broadcast_t
        ginv = inverse_metric(self.manifold)
        n = len(ginv)
        return np.sqrt(sum(lift(ginv[a] * ginv[b]) * self.components[a][b] ** 2
                           for a in range(n) for b in range(n)))

    def symmetry_defect(self) -> np.ndarray:
        """Pointwise metric norm of the antisymmetric part ``T_ab - T_ba``."""
        lift = self.manifold.grid.broadcast_t
        ginv = inverse_metric(self.manifold)
        n = len(ginv)
        T = self.components
        return np.sqrt(sum(lift(ginv[a] * ginv[b]) * (T[a][b] - T[b][a]) ** 2
                           for a in range(n) for b in range(n)))


def covariant_derivative(gamma: OneForm, manifold: Manifold | None = None) -> CovariantDerivativeTensor:
    """``nabla_a gamma_b = d_a gamma_b - Gamma^c_ab gamma_c``."""
    manifold = gamma.manifold if manifold is None else manifold
    lift = manifold.grid.broadcast_t
    G = christoffel_table(manifold)
    n = _ndim(manifold)
    g = gamma.components
    T = tuple(tuple(partial(g[b], a, manifold) - sum(lift(G[d][a][b]) * g[d] for d in range(n))
                    for b in range(n)) for a in range(n))
    return CovariantDerivativeTensor(T, manifold)


def codifferential(xi: OneForm) -> np.ndarray:
    """``d* xi = -(1/sqrt g) d_a(sqrt g g^{aa} xi_a)``."""
    m = xi.manifold
    lift = m.grid.broadcast_t
    sg = m.metric.sqrt_det_g
    ginv = inverse_metric(m)
    div = sum(partial(lift(sg * ginv[a]) * xi.components[a], a, m) for a in range(len(ginv)))
    return -div / lift(sg)


def hodge_laplacian(xi: OneForm) -> tuple:
    """``(d d* + d* d) xi`` component-wise."""
    m = xi.manifold
    lift = m.grid.broadcast_t
    n = _ndim(m)
    sg = m.metric.sqrt_det_g
    ginv = inverse_metric(m)
    x = xi.components
    dds = codifferential(xi)
    omega = [[partial(x[b], a, m) - partial(x[a], b, m) for b in range(n)] for a in range(n)]
    out = []
    for b in range(n):
        # (d* omega)_b = -g_bb (1/sqrt g) d_a(sqrt g g^aa g^bb omega_ab)
        div = sum(partial(lift(sg * ginv[a] * ginv[b]) * omega[a][b], a, m) for a in range(n))
        out.append(partial(dds, b, m) - div / lift(sg * ginv[b]))
    return tuple(out)


def rough_laplacian(xi: OneForm) -> tuple:
    """``nabla* nabla xi = -g^{aa} (nabla_a nabla xi)_{a c}``."""
    m = xi.manifold
    lift = m.grid.broadcast_t
    n = _ndim(m)
    G = christoffel_table(m)
    ginv = inverse_metric(m)
    T = covariant_derivative(xi).components
    out = []
    for c in range(n):
        acc = 0.0
        for a in range(n):
            u = partial(T[a][c], a, m)
            u = u - sum(lift(G[d][a][a]) * T[d][c] + lift(G[d][a][c]) * T[a][d] for d in range(n))
            acc = acc - lift(ginv[a]) * u
        out.append(acc)
    return tuple(out)


def ricci_action(xi: OneForm) -> tuple:
    """``R_ab g^bc xi_c`` for the diagonal Ricci tensor."""
    lift = xi.manifold.grid.broadcast_t
    return tuple(lift(r) * c for r, c in zip(ricci_factors(xi.manifold), xi.components))


def interior_slice(manifold: Manifold, margin: int = 3, tip_margin: float = TIP_MARGIN) -> tuple:
    """Axial index range excluding ``margin`` nodes at each end of the grid.

    Next to a smooth tip the polar difference quotients lose their ``h^2``
    error constant (terms like ``h^2 / t^2`` appear), so nodes with
    ``t < tip_margin`` are also dropped there.
    """
    start = margin
    if manifold.grid.tip:
        start = max(start, int(np.searchsorted(manifold.grid.t, tip_margin)))
    return (slice(start, len(manifold.grid.t) - margin),)


def weitzenbock_residual(xi: OneForm, manifold: Manifold | None = None, margin: int = 3,
                         tip_margin: float = TIP_MARGIN) -> float:
    """``sup |(d d* + d* d) xi - nabla* nabla xi - Ric xi|`` over the interior.

    The size of the defect is measured with the metric; all three operators are
    evaluated by finite differences on the grid samples of ``xi``.
    """
    m = xi.manifold if manifold is None else manifold
    lift = m.grid.broadcast_t
    ginv = inverse_metric(m)
    hod = hodge_laplacian(xi)
    rough = rough_laplacian(xi)
    ric = ricci_action(xi)
    sq = sum(lift(gi) * (h - r - q) ** 2 for gi, h, r, q in zip(ginv, hod, rough, ric))
    return float(np.sqrt(sq[interior_slice(m, margin, tip_margin)]).max())


def analytic_test_forms(manifold: Manifold) -> dict:
    """Three smooth test one-forms with closed-form components.

    Profiles are centred at ``c = 0`` on two ends and ``c = R/2`` on a capped
    end; every component carries a ``W^2`` factor so that the forms stay
    smooth at the tip of a cap.
    """
    spec = manifold.spec
    c = 0.5 * spec.truncation_R if manifold.grid.tip else 0.0
    n_ang = len(manifold.grid.thetas)

    def sech(x):
        return 1.0 / np.cosh(x)

    def W2(t):
        return manifold.scale_factor(t) ** 2

    def radial(t, *th):
        return (sech(t - c) ** 2 * np.cos(th[0]) * W2(t),) + (0.0,) * n_ang

    def angular(t, *th):
        return (0.0, sech(t - c) ** 2 * np.sin(th[0]) * W2(t)) + (0.0,) * (n_ang - 1)

    def exact(t, *th):
        # d(u) for u = sech(t - c) W^2 cos 2 theta
        s = sech(t - c)
        ds = -s * np.tanh(t - c)
        dW2 = 2.0 * manifold.scale_factor(t) * manifold.scale_factor(t, 1)
        return ((ds * W2(t) + s * dW2) * np.cos(2 * th[0]),
                -2.0 * s * W2(t) * np.sin(2 * th[0])) + (0.0,) * (n_ang - 1)

    return {name: sample_form(manifold, fn) for name, fn in
            (("radial", radial), ("angular", angular), ("exact", exact))}


def random_test_form(manifold: Manifold, seed: int = 0, modes: int = 3) -> OneForm:
    """Random trigonometric one-form damped by ``sech^2`` along the axis."""
    rng = np.random.default_rng(seed)
    c = 0.5 * manifold.spec.truncation_R if manifold.grid.tip else 0.0
    n = _ndim(manifold)
    coef = rng.standard_normal((n, modes, 2))

    def fn(t, *th):
        damp = 1.0 / np.cosh(t - c) ** 2
        out = []
        for a in range(n):
            acc = 0.0
            for k in range(modes):
                acc = acc + coef[a, k, 0] * np.cos(k * th[0]) + coef[a, k, 1] * np.sin((k + 1) * th[0])
            out.append(damp * acc * manifold.scale_factor(t) ** 2)
        return tuple(out)

    return sample_form(manifold, fn)
