"""Structured cell-centred grids with homogeneous Neumann boundary.

Scalar fields are numpy arrays of shape ``grid.shape``; vector fields carry a
leading component axis, shape ``(grid.dim, *grid.shape)``.  The gradient uses
forward differences with mirrored ghost cells, so the last difference along
each axis is exactly zero.  ``divergence`` is the negative adjoint of
``gradient`` under the cell-volume inner products.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box ``[0, L_1] x ... x [0, L_dim]``."""

    cells: tuple
    spacing: tuple

    def __post_init__(self):
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        spacing = tuple(float(h) for h in np.atleast_1d(self.spacing))
        if len(cells) not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {len(cells)}")
        if len(spacing) != len(cells):
            raise ValueError("spacing must have one entry per axis")
        if any(n < 1 for n in cells):
            raise ValueError(f"cells_per_axis must be >= 1, got {cells}")
        if any(not np.isfinite(h) or h <= 0 for h in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def uniform(cls, cells, extents):
        cells = tuple(int(n) for n in np.atleast_1d(cells))
        extents = tuple(float(x) for x in np.atleast_1d(extents))
        if len(extents) != len(cells):
            raise ValueError("extents must have one entry per axis")
        return cls(cells, tuple(x / n for x, n in zip(extents, cells)))

    @property
    def dim(self):
        return len(self.cells)

    @property
    def shape(self):
        return self.cells

    @property
    def size(self):
        return int(np.prod(self.cells))

    @property
    def extents(self):
        return tuple(n * h for n, h in zip(self.cells, self.spacing))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def measure(self):
        return float(np.prod(self.extents))

    def centers(self):
        """Cell-centre coordinates, one array of ``shape`` per axis."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def zeros(self):
        return np.zeros(self.shape)

    @cached_property
    def gradient_matrix(self):
        """Sparse ``(dim*size, size)`` matrix of :func:`gradient` on C-ordered fields."""
        blocks = []
        for axis, (n, h) in enumerate(zip(self.cells, self.spacing)):
            d = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
            d[n - 1, n - 1] = 0.0
            d = d.tocsr() / h
            factors = [sp.identity(m, format="csr") for m in self.cells]
            factors[axis] = d
            op = factors[0]
            for f in factors[1:]:
                op = sp.kron(op, f, format="csr")
            blocks.append(op)
        return sp.vstack(blocks, format="csr")

    def __hash__(self):
        return hash((self.cells, self.spacing))


def check_scalar(grid, f, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"{name} has shape {f.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} has non-finite values")
    return f


def check_vector(grid, w, name="vector field"):
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.dim, *grid.shape):
        raise ValueError(f"{name} has shape {w.shape}, grid expects {(grid.dim, *grid.shape)}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} has non-finite values")
    return w


def gradient(grid, f):
    f = check_scalar(grid, f)
    out = np.zeros((grid.dim, *grid.shape))
    for axis, h in enumerate(grid.spacing):
        # ghost cell mirrors the last cell, so the final difference vanishes
        diff = np.diff(f, axis=axis) / h
        index = [slice(None)] * grid.dim
        index[axis] = slice(0, f.shape[axis] - 1)
        out[axis][tuple(index)] = diff
    return out


def divergence(grid, w):
    w = check_vector(grid, w)
    out = np.zeros(grid.shape)
    for axis, h in enumerate(grid.spacing):
        n = grid.cells[axis]
        comp = np.moveaxis(w[axis], axis, 0).copy()
        comp[n - 1] = 0.0
        padded = np.concatenate([np.zeros((1, *comp.shape[1:])), comp], axis=0)
        out += np.moveaxis(np.diff(padded, axis=0), 0, axis) / h
    return out


def inner_product(grid, f, g):
    f = check_scalar(grid, f, "f")
    g = check_scalar(grid, g, "g")
    return float(np.sum(f * g) * grid.cell_volume)


def inner_vec(grid, w, z):
    w = check_vector(grid, w, "w")
    z = check_vector(grid, z, "z")
    return float(np.sum(w * z) * grid.cell_volume)


def norm(grid, f):
    """Discrete L2 norm."""
    return float(np.sqrt(inner_product(grid, f, f)))


def grad_norm_sq(grid, f):
    """``|grad f|^2`` summed over cells with cell volume."""
    g = gradient(grid, f)
    return inner_vec(grid, g, g)


def pointwise_grad_norm(grid, f):
    """Euclidean norm of the cell gradient, one value per cell."""
    return np.sqrt(np.sum(gradient(grid, f) ** 2, axis=0))


def total_variation(grid, theta):
    return float(np.sum(pointwise_grad_norm(grid, theta)) * grid.cell_volume)


def weighted_tv(grid, beta, theta):
    beta = check_scalar(grid, beta, "beta")
    if np.any(beta < 0):
        raise ValueError("weighted_tv requires a nonnegative weight")
    return float(np.sum(beta * pointwise_grad_norm(grid, theta)) * grid.cell_volume)


def signed_weighted_tv(grid, beta, theta):
    """Weighted variation against a signed weight: positive part minus negative part."""
    beta = check_scalar(grid, beta, "beta")
    return weighted_tv(grid, np.maximum(beta, 0.0), theta) - weighted_tv(
        grid, np.maximum(-beta, 0.0), theta
    )
