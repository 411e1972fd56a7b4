"""Reference values computed independently of the grid pipeline.

Each oracle reduces the problem by separation of variables (Fourier modes on
the cross-section, one ODE in ``t``) and evaluates it with scipy quadrature or
ODE integration, never through the finite-volume operator.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad, solve_ivp

from .geometry import WarpProfile


def fourier_indicial_roots(radii, kmax: int = 6) -> dict:
    """Exponents ``eps`` of separated solutions ``exp(eps t) e^{i k.theta}`` of the model Laplacian.

    Each Fourier mode ``k`` reduces ``Delta_0 u = 0`` to ``u'' = |k|_r^2 u``;
    its characteristic polynomial ``z^2 - |k|_r^2`` gives the exponents, with
    the double root at ``k = 0`` contributing both ``1`` and ``t``.  Returns
    ``{eps: multiplicity}`` for ``|k_c| <= kmax``.
    """
    roots = {}
    for k in itertools.product(range(-kmax, kmax + 1), repeat=len(radii)):
        lam = sum((kc / r) ** 2 for kc, r in zip(k, radii))
        for z in np.roots([1.0, 0.0, -lam]):
            z = float(np.real(z))
            key = round(z, 12) + 0.0
            roots[key] = roots.get(key, 0) + 1
    return dict(sorted(roots.items()))


def circle_difference_eigenvalues(radius: float, n: int) -> np.ndarray:
    """Exact spectrum of the periodic second difference on ``n`` points of a circle."""
    h = 2 * np.pi / n
    k = np.arange(n)
    return np.sort(4.0 * np.sin(np.pi * k / n) ** 2 / (radius * h) ** 2)


def inverse_warp_primitive(warp: WarpProfile, t: np.ndarray, t0: float = 0.0) -> np.ndarray:
    """``F(t) = int_{t0}^t ds / w(s)`` by ODE integration of ``F' = 1/w``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for side in (t > t0, t < t0):
        if not np.any(side):
            continue
        ts = t[side]
        order = np.argsort(np.abs(ts - t0))
        sol = solve_ivp(lambda s, y: 1.0 / warp(s), (t0, float(ts[order[-1]])), [0.0],
                        t_eval=ts[order], method="DOP853", rtol=1e-13, atol=1e-14)
        vals = np.empty(ts.size)
        vals[order] = sol.y[0]
        out[side] = vals
    return out


def warp_offset(warp: WarpProfile, upper: float = math.inf) -> float:
    """``kappa = int_0^upper (1 - w(inf)/w)`` so that ``w(inf) F(t) = t - kappa + o(1)``."""
    wl = warp.limit()
    val, _ = quad(lambda s: 1.0 - wl / float(warp(s)), 0.0, upper, epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(val)


def dirichlet_profile(warp: WarpProfile, t: np.ndarray, left: float, right: float) -> np.ndarray:
    """The rotationally symmetric harmonic function with boundary values ``left``, ``right``.

    ``(w f')' = 0`` on a surface of revolution, so ``f = a F + b`` with
    ``F = int ds / w`` fitted to the two end values.
    """
    t = np.asarray(t, dtype=float)
    F = inverse_warp_primitive(warp, t)
    a = (right - left) / (F[-1] - F[0])
    return left + a * (F - F[0])


def nabla_gamma_norm(warp: WarpProfile, t, c: float = 1.0) -> np.ndarray:
    """``|nabla df|`` for ``f' = c / w`` on a warped surface: ``sqrt 2 |c| |w'| / w^2``."""
    t = np.asarray(t, dtype=float)
    return math.sqrt(2.0) * abs(c) * np.abs(warp(t, 1)) / warp(t) ** 2


def sup_nabla_gamma(warp: WarpProfile, lo: float, hi: float, c: float = 1.0, samples: int = 200001) -> float:
    t = np.linspace(lo, hi, samples)
    return float(nabla_gamma_norm(warp, t, c).max())


def face_flux(warp: WarpProfile, radius: float, C, R: float) -> float:
    """``<Delta f0, 1>`` for ``Delta = -div grad``: ``-sum_i C_i vol(X_i x {R})``."""
    faces = [2 * math.pi * radius * float(warp(R))]
    if len(C) == 2:
        faces.append(2 * math.pi * radius * float(warp(-R)))
    return -float(sum(c * v for c, v in zip(C, faces)))


def bochner_terms(warp: WarpProfile, radius: float, R: float, c: float = 1.0, two_ends: bool = True) -> dict:
    """Every integral of the Bochner identity for ``f' = c / w``, by quadrature.

    With ``gamma = (c / w) dt``: ``|nabla gamma|^2 = 2 c^2 w'^2 / w^4``,
    ``Ric(gamma, gamma) = -c^2 w'' / w^3`` and the flux through ``t = +-R`` is
    ``-+2 pi r c^2 w' / w^2``.
    """
    lo = -R if two_ends else 0.0
    two_pi_r = 2 * math.pi * radius

    def w(s, k=0):
        return float(warp(s, k))

    energy = two_pi_r * quad(lambda s: 2 * c * c * w(s, 1) ** 2 / w(s) ** 3, lo, R, epsabs=1e-14, limit=200)[0]
    ricci = two_pi_r * quad(lambda s: -c * c * w(s, 2) / w(s) ** 2, lo, R, epsabs=1e-14, limit=200)[0]
    bnd = [-two_pi_r * c * c * w(R, 1) / w(R) ** 2]
    if two_ends:
        bnd.append(two_pi_r * c * c * w(-R, 1) / w(-R) ** 2)
    return {"interior_energy": energy, "ricci_term": ricci, "boundary_terms": bnd}
