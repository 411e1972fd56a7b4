"""Conservative finite-volume Laplace-Beltrami operator on warped-product grids."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..geometry import Manifold

SYMMETRY_TOL = 1e-13


class SingularMetricError(ValueError):
    pass


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric stiffness ``A`` and diagonal mass ``m`` with ``Delta f = A f / m``.

    ``f @ A @ g`` is the quadrature of ``<grad f, grad g>``; ``m`` holds the L2
    quadrature weights.  Rows at truncation faces carry the half-cell balance
    without the face flux: callers add a flux (Neumann data) or eliminate the
    face nodes (Dirichlet data).
    """

    stiffness: sp.csr_matrix
    mass: np.ndarray
    shape: tuple
    face_area: np.ndarray
    symmetric: bool = True

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    def apply(self, f: np.ndarray, face_flux: np.ndarray | None = None) -> np.ndarray:
        """``Delta f`` as a grid function.

        ``face_flux`` is the outward normal derivative at truncation-face nodes
        (a grid-shaped array, read only on face nodes); without it the faces
        are treated as insulated.
        """
        r = self.stiffness @ np.ravel(f)
        if face_flux is not None:
            r = r - self.face_area * np.ravel(face_flux)
        return (r / self.mass).reshape(self.shape)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.mass * np.ravel(u) * np.ravel(v)))

    def dump_csv(self, path) -> None:
        coo = self.stiffness.tocoo()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            for i, j, v in zip(coo.row, coo.col, coo.data):
                w.writerow([int(i), int(j), repr(float(v))])


def _edges(rows, cols, weights, n):
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    wts = np.concatenate(weights)
    diag = np.bincount(rows, weights=wts, minlength=n) + np.bincount(cols, weights=wts, minlength=n)
    A = sp.coo_matrix(
        (np.concatenate([-wts, -wts, diag]),
         (np.concatenate([rows, cols, np.arange(n)]), np.concatenate([cols, rows, np.arange(n)]))),
        shape=(n, n),
    )
    return A.tocsr()


def assemble_laplacian(manifold: Manifold) -> SparseOperator:
    """Assemble ``Delta f = -(1/sqrt g) d_a(sqrt g g^ab d_b f)`` in flux form.

    Axial fluxes use the density at cell faces ``t_{j+1/2}`` and angular fluxes
    the density at nodes, which keeps the stiffness symmetric and makes every
    row sum vanish (constants are harmonic).
    """
    grid, metric = manifold.grid, manifold.metric
    if np.any(metric.sqrt_det_g <= 0):
        raise SingularMetricError("volume density vanishes at a grid node")
    if np.any(metric.sqrt_det_g_half[1 if grid.tip else 0:] <= 0):
        raise SingularMetricError("volume density vanishes at an interior cell face")
    shape = grid.shape
    n = grid.size
    idx = np.arange(n).reshape(shape)
    h_t = grid.h_t
    h_th = grid.h_theta
    cell = float(np.prod(h_th))
    nth = len(grid.thetas)
    expand = (slice(None),) + (None,) * nth

    rows, cols, wts = [], [], []
    # axial edges j -- j+1
    w_t = (metric.sqrt_det_g_half * cell / h_t)[expand] * np.ones(shape[1:])
    rows.append(idx[:-1].ravel())
    cols.append(idx[1:].ravel())
    wts.append(np.broadcast_to(w_t, idx[:-1].shape).ravel())
    # angular edges k -- k+1 (periodic) on every circle factor
    for c in range(nth):
        others = cell / h_th[c]
        coef = grid.t_weights * others * metric.sqrt_det_g / metric.g_cc[c] / h_th[c]
        nxt = np.roll(idx, -1, axis=1 + c)
        rows.append(idx.ravel())
        cols.append(nxt.ravel())
        wts.append(np.broadcast_to(coef[expand], shape).ravel())
    A = _edges(rows, cols, wts, n)

    asym = abs(A - A.T).max() if A.nnz else 0.0
    if asym > SYMMETRY_TOL * max(1.0, abs(A).max()):
        raise AssertionError(f"assembled stiffness is not symmetric: {asym:.3e}")
    mass = grid.broadcast_t(grid.t_weights * metric.sqrt_det_g * cell).ravel()
    face = np.zeros(shape)
    for j in grid.boundary.values():
        face[j] = metric.sqrt_det_g[j] * cell
    return SparseOperator(A, mass, shape, face.ravel())


def periodic_laplacian(radii: tuple, n: int) -> sp.csr_matrix:
    """Second-difference Laplacian on a product of circles of the given radii."""
    mats = []
    for r in radii:
        h = 2.0 * np.pi / n
        e = np.ones(n)
        L = sp.diags([2 * e, -e[:-1], -e[:-1]], [0, 1, -1], format="lil")
        L[0, n - 1] = -1
        L[n - 1, 0] = -1
        mats.append(sp.csr_matrix(L) / (r * h) ** 2)
    A = mats[0]
    for M in mats[1:]:
        A = sp.kron(A, sp.identity(M.shape[0])) + sp.kron(sp.identity(A.shape[0]), M)
    return sp.csr_matrix(A)


def dirichlet_split(op: SparseOperator, boundary_mask: np.ndarray):
    """Interior/boundary index sets and the blocks ``A_II``, ``A_IB``."""
    bnd = np.flatnonzero(np.ravel(boundary_mask))
    inn = np.flatnonzero(~np.ravel(boundary_mask))
    A = op.stiffness
    return inn, bnd, A[inn][:, inn].tocsr(), A[inn][:, bnd].tocsr()
