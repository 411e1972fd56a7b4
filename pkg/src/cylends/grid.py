"""Tensor-product grids on truncated cylinders and capped ends."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INTERIOR = 0
END_BOUNDARY = 1
TIP_RING = 2


@dataclass(frozen=True)
class Grid:
    """Uniform grid in the axial coordinate ``t`` times periodic angle grids.

    Grid functions are arrays of shape :attr:`shape`, axis 0 being ``t`` and the
    remaining axes the circle factors of the cross-section.  Nodes are
    flattened in C order.

    Attributes
    ----------
    t : ndarray
        Axial nodes, strictly increasing with uniform spacing ``h_t``.
    thetas : tuple of ndarray
        One uniform periodic node set per circle factor, ``theta_k = k*2pi/N``.
    t_weights : ndarray
        One-dimensional quadrature weights in ``t`` (trapezoid at truncation
        faces, full cells next to a tip).
    boundary : dict
        End index (1-based) -> axial index of that end's truncation face.
    tip : bool
        True when the first axial node is the ring next to a smooth tip at
        ``t = 0`` (the tip itself carries no node).
    """

    t: np.ndarray
    h_t: float
    thetas: tuple
    t_weights: np.ndarray
    boundary: dict
    tip: bool = False
    node_kind: np.ndarray = field(default=None, repr=False)

    @property
    def h_theta(self) -> tuple:
        return tuple(2.0 * np.pi / len(th) for th in self.thetas)

    @property
    def shape(self) -> tuple:
        return (len(self.t),) + tuple(len(th) for th in self.thetas)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return 1 + len(self.thetas)

    def broadcast_t(self, profile: np.ndarray) -> np.ndarray:
        """Lift a t-profile to a full grid function."""
        profile = np.asarray(profile, dtype=float)
        return np.broadcast_to(profile.reshape((-1,) + (1,) * len(self.thetas)), self.shape).copy()

    def mesh(self) -> tuple:
        return np.meshgrid(self.t, *self.thetas, indexing="ij")

    def boundary_mask(self, end: int | None = None) -> np.ndarray:
        """Boolean grid mask of truncation-face nodes (optionally of one end)."""
        mask = np.zeros(self.shape, dtype=bool)
        ends = self.boundary if end is None else {end: self.boundary[end]}
        for j in ends.values():
            mask[j] = True
        return mask

    def t_index(self, value: float, tol: float | None = None) -> int:
        """Axial index of the node at ``value`` (within ``tol``, default h/10)."""
        tol = self.h_t * 0.1 if tol is None else tol
        j = int(np.argmin(np.abs(self.t - value)))
        if abs(self.t[j] - value) > tol:
            raise ValueError(f"t={value} is not a grid node (nearest {self.t[j]:.6g})")
        return j


def two_end_grid(R: float, h: float, mesh_points: tuple) -> Grid:
    n = max(2, int(round(2.0 * R / h)))
    t = np.linspace(-R, R, n + 1)
    h_t = 2.0 * R / n
    weights = np.full(n + 1, h_t)
    weights[[0, -1]] = 0.5 * h_t
    kind = np.full(n + 1, INTERIOR)
    kind[[0, -1]] = END_BOUNDARY
    thetas = tuple(np.arange(m) * (2.0 * np.pi / m) for m in mesh_points)
    return Grid(t, h_t, thetas, weights, {1: n, 2: 0}, tip=False, node_kind=kind)


def capped_grid(R: float, h: float, mesh_points: tuple) -> Grid:
    """Cell-centred axial grid ``t_j = (j + 1/2) h`` whose last node sits at ``R``.

    The tip ``t = 0`` is a cell face, so no angular ring collapses onto it.
    """
    n = max(2, int(round(R / h - 0.5)))
    h_t = R / (n + 0.5)
    t = (np.arange(n + 1) + 0.5) * h_t
    weights = np.full(n + 1, h_t)
    weights[-1] = 0.5 * h_t
    kind = np.full(n + 1, INTERIOR)
    kind[0] = TIP_RING
    kind[-1] = END_BOUNDARY
    thetas = tuple(np.arange(m) * (2.0 * np.pi / m) for m in mesh_points)
    return Grid(t, h_t, thetas, weights, {1: n}, tip=True, node_kind=kind)


def subrange_weights(t: np.ndarray, lo: float, hi: float, tol: float = 1e-9) -> np.ndarray:
    """Trapezoid weights for nodes of ``t`` inside ``[lo, hi]``; zero elsewhere."""
    inside = (t >= lo - tol) & (t <= hi + tol)
    idx = np.flatnonzero(inside)
    w = np.zeros_like(t, dtype=float)
    if idx.size < 2:
        return w
    dt = np.diff(t[idx])
    w[idx[:-1]] += 0.5 * dt
    w[idx[1:]] += 0.5 * dt
    return w
