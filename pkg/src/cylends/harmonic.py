"""Harmonic functions with prescribed linear asymptotics ``C_i t_i + D_i``.

Pipeline: an interpolant ``f0`` that is exactly ``C_i t_i + D_i`` on every end,
the obstruction map ``Phi(C, D)_j = <Delta f0, h_j>`` against a basis ``h_j`` of
harmonic functions of at most linear growth, and a decaying correction ``f'``
with ``Delta f' = -Delta f0`` whenever ``(C, D)`` lies in ``ker Phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import (WeightFunction, assemble_laplacian, dirichlet_split, extend_rho, solve_least_squares,
                         solve_spd, weighted_norm)
from .discretize.operator import SparseOperator
from .geometry import ONE_END, Manifold
from .spectral import default_weight

NULL_REL = 1e-6
CG_TOL = 1e-12


class ObstructionError(ValueError):
    """``Delta f0`` pairs nontrivially with the cokernel: ``(C, D)`` is not in ``ker Phi``."""

    def __init__(self, msg, values):
        super().__init__(msg)
        self.values = np.asarray(values, dtype=float)


class CokernelError(RuntimeError):
    pass


@dataclass(frozen=True)
class AsymptoticData:
    C: tuple
    D: tuple

    def __post_init__(self):
        if len(self.C) != len(self.D):
            raise ValueError("C and D need one entry per end")
        object.__setattr__(self, "C", tuple(float(c) for c in self.C))
        object.__setattr__(self, "D", tuple(float(d) for d in self.D))

    @property
    def n_ends(self) -> int:
        return len(self.C)

    def vector(self) -> np.ndarray:
        """``(C_1, D_1, ..., C_l, D_l)``."""
        return np.ravel(np.column_stack([self.C, self.D]))

    @classmethod
    def from_vector(cls, v) -> "AsymptoticData":
        v = np.asarray(v, dtype=float)
        return cls(tuple(v[0::2]), tuple(v[1::2]))


def smoothstep(x):
    """Quintic C^2 step, 0 for ``x <= 0`` and 1 for ``x >= 1``."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def default_ramp(manifold: Manifold) -> tuple:
    c = manifold.spec.core_radius
    if manifold.spec.topology == ONE_END:
        return (0.2 * c, 0.6 * c)
    return (-0.4 * c, 0.4 * c)


@dataclass(frozen=True)
class InterpolantF0:
    values: np.ndarray
    data: AsymptoticData
    ramp: tuple
    face_flux: np.ndarray = field(repr=False)


def build_f0(manifold: Manifold, data: AsymptoticData, ramp: tuple | None = None) -> InterpolantF0:
    """Smooth ``f0`` equal to ``C_i t_i + D_i`` beyond the ramp on every end.

    Two ends: ``f0 = s (C_1 t + D_1) + (1 - s)(-C_2 t + D_2)`` with ``s`` a
    quintic step over ``ramp``.  One capped end: ``f0 = s (C_1 t + D_1)``,
    vanishing near the tip.
    """
    spec, grid = manifold.spec, manifold.grid
    if data.n_ends != spec.n_ends:
        raise ValueError(f"expected data for {spec.n_ends} ends, got {data.n_ends}")
    lo, hi = default_ramp(manifold) if ramp is None else ramp
    floor = 0.0 if spec.topology == ONE_END else -spec.core_radius
    if not (floor <= lo < hi <= spec.core_radius):
        raise ValueError(f"ramp {(lo, hi)} does not fit inside the core [{floor}, {spec.core_radius}]: "
                         "it would be wider than the end allows")
    t = grid.t
    s = smoothstep((t - lo) / (hi - lo))
    C, D = data.C, data.D
    prof = s * (C[0] * t + D[0])
    if spec.n_ends == 2:
        prof = prof + (1.0 - s) * (-C[1] * t + D[1])
    flux = np.zeros(grid.shape)
    for i, j in grid.boundary.items():
        flux[j] = C[i - 1]
    return InterpolantF0(grid.broadcast_t(prof), data, (lo, hi), flux)


def outward_derivative(u: np.ndarray, grid, end: int) -> np.ndarray:
    """Second-order one-sided outward normal derivative on the face of ``end``."""
    j = grid.boundary[end]
    step = -1 if j == len(grid.t) - 1 else 1
    return (3.0 * u[j] - 4.0 * u[j + step] + u[j + 2 * step]) / (2.0 * grid.h_t)


@dataclass(frozen=True)
class CokernelBasis:
    functions: np.ndarray
    asymptotics: np.ndarray
    residuals: np.ndarray
    matching_singular_values: np.ndarray
    nullity: int
    ls_residual: float
    gram_min_singular_value: float

    @property
    def gap(self) -> float:
        s = self.matching_singular_values
        k = self.nullity
        null = s[len(s) - k:]
        return float(s[len(s) - k - 1] / max(null.max(initial=0.0), np.finfo(float).eps * s[0]))


def _dirichlet_units(manifold: Manifold, op: SparseOperator) -> list:
    grid = manifold.grid
    mask = grid.boundary_mask()
    inn, bnd, A_II, A_IB = dirichlet_split(op, mask)
    units = []
    for end in sorted(grid.boundary):
        ub = np.ravel(grid.boundary_mask(end))[bnd].astype(float)
        x, _ = solve_spd(A_II, -(A_IB @ ub), tol=CG_TOL)
        u = np.empty(op.n)
        u[inn] = x
        u[bnd] = ub
        units.append(u.reshape(grid.shape))
    return units


def cokernel_basis(manifold: Manifold, op: SparseOperator, alpha: float, margin: float = 10.0) -> CokernelBasis:
    """Harmonic functions of at most linear growth (the dual of the cokernel at weight ``alpha``).

    Unknowns are the asymptotic pairs ``(a_i, b_i)``.  Face values
    ``f = a_i R + b_i`` are imposed exactly through Dirichlet solves and the
    face slopes ``d_t f = a_i`` in least squares; the kernel of that matching
    system is the basis.  ``h_1 = 1``; for two ends the second element is
    L2-orthogonal to constants and scaled to slope ``a_1 = 1``.
    """
    spec, grid = manifold.spec, manifold.grid
    ell = spec.n_ends
    R = spec.truncation_R
    units = _dirichlet_units(manifold, op)
    rows = []
    for i in range(1, ell + 1):
        block = np.zeros((grid.size // grid.shape[0], 2 * ell))
        for j, u in enumerate(units):
            du = np.ravel(outward_derivative(u, grid, i))
            block[:, 2 * j] = R * du
            block[:, 2 * j + 1] = du
        block[:, 2 * (i - 1)] -= 1.0
        rows.append(block)
    match = np.vstack(rows)
    _, sv, vt = np.linalg.svd(match, full_matrices=False)
    nullity = int(np.sum(sv <= NULL_REL * sv[0]))
    ls_residual = float(sv[-ell:].max() / sv[0])
    if ls_residual > math.exp(alpha * R) * margin:
        raise CokernelError(f"asymptotic matching residual {ls_residual:.3e} exceeds exp(alpha R) x margin; "
                            "truncation too short")
    if nullity != ell:
        raise CokernelError(f"matching system has nullity {nullity}, expected {ell}")
    null = vt[-ell:].T

    def realise(v):
        return sum((v[2 * j] * R + v[2 * j + 1]) * u for j, u in enumerate(units))

    const = np.zeros(2 * ell)
    const[1::2] = 1.0
    y, res = solve_least_squares(null, const)
    if res > 1e-8:
        raise CokernelError("constants are not in the computed kernel")
    functions = [np.ones(grid.shape)]
    asym = [const]
    if ell == 2:
        e = const / np.linalg.norm(const)
        cand = null - np.outer(e, e @ null)
        v = cand[:, int(np.argmax(np.linalg.norm(cand, axis=0)))]
        h = realise(v)
        shift = op.inner(h, 1.0) / op.inner(np.ones(grid.shape), 1.0)
        h = h - shift
        a = v.copy()
        a[1::2] -= shift
        if abs(a[0]) < 1e-12:
            raise CokernelError("second basis element has no slope on end 1")
        functions.append(h / a[0])
        asym.append(a / a[0])
    functions = np.array(functions)
    mask = ~grid.boundary_mask()
    residuals = np.array([np.abs(op.apply(h)[mask]).max() for h in functions])
    gram = np.array([[op.inner(u, v) for v in functions] for u in functions])
    d = np.sqrt(np.diag(gram))
    gram_sv = float(np.linalg.svd(gram / np.outer(d, d), compute_uv=False).min())
    return CokernelBasis(functions, np.array(asym), residuals, sv, nullity, ls_residual, gram_sv)


@dataclass(frozen=True)
class ObstructionMatrix:
    phi: np.ndarray
    singular_values: np.ndarray
    nullspace: np.ndarray
    nullity: int
    expected_nullity: int

    @property
    def consistent(self) -> bool:
        return self.nullity == self.expected_nullity

    @property
    def rank(self) -> int:
        return self.phi.shape[1] - self.nullity

    @property
    def gap(self) -> float:
        s = self.singular_values
        keep = s[: self.rank]
        null = s[self.rank:]
        floor = np.finfo(float).eps * s[0]
        return float(keep.min(initial=np.inf) / max(null.max(initial=0.0), floor))


def pair_with_basis(op: SparseOperator, f0: InterpolantF0, basis: CokernelBasis) -> np.ndarray:
    lap = op.apply(f0.values, face_flux=f0.face_flux)
    return np.array([op.inner(lap, h) for h in basis.functions])


def assemble_phi(manifold: Manifold, op: SparseOperator, basis: CokernelBasis,
                 ramp: tuple | None = None) -> ObstructionMatrix:
    """Columns of ``Phi`` from the ``2l`` unit asymptotic vectors.

    ``Delta f0`` is closed at the truncation faces with its exact outward
    slope ``C_i``, so the pairing with ``h = 1`` is the discrete flux
    ``-sum_i C_i vol(X_i x {R})``.
    """
    ell = manifold.n_ends
    cols = []
    for m in range(2 * ell):
        e = np.zeros(2 * ell)
        e[m] = 1.0
        f0 = build_f0(manifold, AsymptoticData.from_vector(e), ramp)
        cols.append(pair_with_basis(op, f0, basis))
    phi = np.column_stack(cols)
    _, s, vt = np.linalg.svd(phi, full_matrices=True)
    padded = np.zeros(2 * ell)
    padded[: s.size] = s
    null = padded <= NULL_REL * padded[0]
    return ObstructionMatrix(phi, padded, vt[null].T, int(null.sum()), ell)


@dataclass(frozen=True)
class HarmonicSetup:
    manifold: Manifold
    op: SparseOperator
    alpha: float
    basis: CokernelBasis
    phi: ObstructionMatrix
    ramp: tuple


def prepare(manifold: Manifold, alpha: float | None = None, ramp: tuple | None = None) -> HarmonicSetup:
    alpha = default_weight(manifold.spec) if alpha is None else float(alpha)
    op = assemble_laplacian(manifold)
    basis = cokernel_basis(manifold, op, alpha)
    ramp = default_ramp(manifold) if ramp is None else ramp
    phi = assemble_phi(manifold, op, basis, ramp)
    return HarmonicSetup(manifold, op, alpha, basis, phi, ramp)


def phi_nullity(setup: HarmonicSetup) -> int:
    return setup.phi.nullity


def obstruction_values(setup: HarmonicSetup, data: AsymptoticData) -> np.ndarray:
    return setup.phi.phi @ data.vector()


def complete_offsets(setup: HarmonicSetup, C) -> AsymptoticData:
    """Offsets ``D`` (minimum norm) putting ``(C, D)`` in ``ker Phi``."""
    phi = setup.phi.phi
    C = np.asarray(C, dtype=float)
    phi_c, phi_d = phi[:, 0::2], phi[:, 1::2]
    rank = np.linalg.matrix_rank(phi_d, tol=NULL_REL * max(np.abs(phi).max(), 1e-300))
    D, res = solve_least_squares(phi_d, -phi_c @ C, kernel_dim=phi_d.shape[1] - rank)
    scale = max(np.abs(phi).max() * (np.linalg.norm(C) + np.linalg.norm(D)), 1e-300)
    if res > 1e-8 * scale:
        raise ObstructionError(f"no offsets D make slopes C={tuple(C)} admissible", phi @ np.ravel(
            np.column_stack([C, D])))
    return AsymptoticData(tuple(C), tuple(D))


def solve_correction(setup: HarmonicSetup, f0: InterpolantF0, closure: str = "dirichlet",
                     ortho_tol: float = 1e-6, tol: float = CG_TOL):
    """Solve ``Delta f' = -Delta f0`` for a correction that decays along the ends.

    ``closure="dirichlet"`` sets ``f' = 0`` on the truncation faces;
    ``closure="robin"`` imposes ``d_t f' = alpha f'`` there instead.

    Raises
    ------
    ObstructionError
        ``Delta f0`` is not L2-orthogonal to the cokernel basis.
    """
    op, basis = setup.op, setup.basis
    lap = op.apply(f0.values, face_flux=f0.face_flux)
    pairs = np.array([op.inner(lap, h) for h in basis.functions])
    n_lap = math.sqrt(op.inner(lap, lap))
    n_h = np.sqrt([op.inner(h, h) for h in basis.functions])
    scale = n_lap * n_h + np.linalg.norm(setup.phi.phi) * np.linalg.norm(f0.data.vector())
    if np.any(np.abs(pairs) > ortho_tol * scale + 1e-14):
        raise ObstructionError(f"Delta f0 is not orthogonal to the cokernel: pairings {pairs.tolist()}", pairs)
    grid = setup.manifold.grid
    A = op.stiffness
    if closure == "dirichlet":
        inn, bnd, A_II, _ = dirichlet_split(op, grid.boundary_mask())
        rhs = -(A @ np.ravel(f0.values))[inn]
        x, info = solve_spd(A_II, rhs, tol=tol)
        fp = np.zeros(op.n)
        fp[inn] = x
    elif closure == "robin":
        import scipy.sparse as sp
        Ar = (A - sp.diags(op.face_area * setup.alpha)).tocsr()
        rhs = -(A @ np.ravel(f0.values) - op.face_area * np.ravel(f0.face_flux))
        fp, info = solve_spd(Ar, rhs, tol=tol)
    else:
        raise ValueError(f"unknown closure {closure!r}")
    return fp.reshape(grid.shape), info


@dataclass(frozen=True)
class HarmonicSolution:
    f: np.ndarray
    f0: np.ndarray
    fprime: np.ndarray
    data: AsymptoticData
    requested: AsymptoticData
    projected: bool
    achieved: AsymptoticData
    residual_interior: float
    fprime_weighted_norm: float
    decay: tuple
    decay_bound: float
    iterations: int

    def summary(self) -> dict:
        return {
            "C": list(self.data.C), "D": list(self.data.D),
            "requested_C": list(self.requested.C), "requested_D": list(self.requested.D),
            "projected": self.projected,
            "achieved_C": list(self.achieved.C), "achieved_D": list(self.achieved.D),
            "residual_interior": self.residual_interior,
            "fprime_weighted_norm": self.fprime_weighted_norm,
            "decay": list(self.decay), "decay_bound": self.decay_bound,
            "iterations": self.iterations,
        }


def _outer_quarter(manifold: Manifold, end: int) -> np.ndarray:
    spec = manifold.spec
    ti = manifold.end_t(end, manifold.grid.t)
    lo = spec.truncation_R - 0.25 * (spec.truncation_R - spec.core_radius)
    return ti >= lo - 1e-12


def solve_harmonic(setup: HarmonicSetup, data: AsymptoticData, auto_project: bool = False,
                   closure: str = "dirichlet", proj_tol: float = 1e-6) -> HarmonicSolution:
    """Harmonic ``f = C_i t_i + D_i + O(exp(alpha t_i))`` on every end.

    ``(C, D)`` must lie in ``ker Phi`` (up to ``proj_tol``); otherwise an
    :class:`ObstructionError` carrying ``Phi (C, D)`` is raised, unless
    ``auto_project`` replaces the data by its orthogonal projection onto the
    kernel.
    """
    manifold = setup.manifold
    v = data.vector()
    N = setup.phi.nullspace
    pv = N @ (N.T @ v)
    moved = float(np.linalg.norm(v - pv))
    projected = False
    if moved > proj_tol * max(np.linalg.norm(v), 1.0):
        values = setup.phi.phi @ v
        if not auto_project:
            if manifold.n_ends == 1 and any(c != 0 for c in data.C):
                raise ObstructionError("a single end admits no nonzero slope: flux "
                                       f"<Delta f0, 1> = {values[0]:.12g} must vanish", values)
            raise ObstructionError(f"(C, D) is not in ker Phi; obstruction values {values.tolist()}", values)
        v = pv
        projected = True
    used = AsymptoticData.from_vector(v)
    f0 = build_f0(manifold, used, setup.ramp)
    fp, info = solve_correction(setup, f0, closure=closure)
    f = f0.values + fp
    grid = manifold.grid
    interior = ~grid.boundary_mask()
    residual = float(np.abs(setup.op.apply(f)[interior]).max())
    wt = extend_rho(manifold, setup.alpha, 2.0)
    fp_norm = weighted_norm(fp, wt, 1, manifold)
    mean_f = f.reshape(grid.shape[0], -1).mean(axis=1)
    fitted_C, fitted_D, decay = [], [], []
    for i in range(1, manifold.n_ends + 1):
        sel = _outer_quarter(manifold, i)
        ti = manifold.end_t(i, grid.t)[sel]
        a, b = np.polyfit(ti, mean_f[sel], 1)
        fitted_C.append(float(a))
        fitted_D.append(float(b))
        target = used.C[i - 1] * grid.broadcast_t(manifold.end_t(i, grid.t)) + used.D[i - 1]
        decay.append(float(np.abs((f - target)[sel]).max()))
    R = manifold.spec.truncation_R
    return HarmonicSolution(
        f=f, f0=f0.values, fprime=fp, data=used, requested=data, projected=projected,
        achieved=AsymptoticData(tuple(fitted_C), tuple(fitted_D)), residual_interior=residual,
        fprime_weighted_norm=float(fp_norm), decay=tuple(decay), decay_bound=math.exp(setup.alpha * 0.75 * R),
        iterations=int(info["iterations"]),
    )
