"""Chebyshev Gauss-Lobatto grids, differentiation matrices and 2-D nodal fields.

Fields are stored by their values at the tensor grid nodes, indexed
``values[i, j]`` with ``i`` the radial node and ``j`` the vertical node, both
in ascending coordinate order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True, eq=False)
class GaussLobattoGrid:
    n: int
    points: np.ndarray

    def __len__(self):
        return self.n + 1


def gauss_lobatto(n: int) -> GaussLobattoGrid:
    """Chebyshev extrema ``cos(pi*(1 - j/n))`` for ``j = 0..n``, ascending."""
    if int(n) != n or n < 1:
        raise ConfigurationError(f"polynomial order must be an integer >= 1, got {n!r}")
    n = int(n)
    j = np.arange(n + 1)
    # sin form is exactly antisymmetric about 0, unlike cos(pi*(1 - j/n))
    x = np.sin(np.pi * (2 * j - n) / (2 * n))
    x[0], x[-1] = -1.0, 1.0
    x.setflags(write=False)
    return GaussLobattoGrid(n, x)


def barycentric_weights(n: int) -> np.ndarray:
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True, eq=False)
class DiffMatrix:
    order: int
    entries: np.ndarray

    def __matmul__(self, other):
        return self.entries @ other


def diff_matrix(grid: GaussLobattoGrid) -> DiffMatrix:
    """First-derivative collocation matrix on ``grid``.

    Off-diagonal entries use the barycentric formula; the diagonal is the
    negative row sum so that constants are differentiated exactly.
    """
    x = grid.points
    w = barycentric_weights(grid.n)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    D.setflags(write=False)
    return DiffMatrix(grid.n, D)


def interpolation_row(grid: GaussLobattoGrid, x: float) -> np.ndarray:
    """Lagrange basis values at ``x`` (barycentric form, exact at nodes)."""
    pts = grid.points
    diff = x - pts
    hit = np.flatnonzero(diff == 0.0)
    row = np.zeros(len(pts))
    if hit.size:
        row[hit[0]] = 1.0
        return row
    with np.errstate(divide="ignore", over="ignore"):
        w = barycentric_weights(grid.n) / diff
    if not np.all(np.isfinite(w)):
        # x is closer to a node than 1/max_float; the interpolant equals that nodal value
        row[np.argmin(np.abs(diff))] = 1.0
        return row
    return w / w.sum()


@dataclass(eq=False)
class SpectralField2D:
    nr: int
    nz: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.nr + 1, self.nz + 1):
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match orders ({self.nr}, {self.nz})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("field contains non-finite values")

    @classmethod
    def from_function(cls, func, rgrid: GaussLobattoGrid, zgrid: GaussLobattoGrid):
        R, Z = np.meshgrid(rgrid.points, zgrid.points, indexing="ij")
        return cls(rgrid.n, zgrid.n, func(R, Z))

    @property
    def real(self) -> SpectralField2D:
        return SpectralField2D(self.nr, self.nz, self.values.real.copy())


def eval_field(f: SpectralField2D, r: float, z: float):
    """Evaluate the degree-(nr, nz) interpolant of ``f`` at ``(r, z)``."""
    if not (-1.0 <= r <= 1.0 and -1.0 <= z <= 1.0):
        raise DomainError(f"point ({r!r}, {z!r}) outside [-1, 1]^2")
    lr = interpolation_row(gauss_lobatto(f.nr), r)
    lz = interpolation_row(gauss_lobatto(f.nz), z)
    return lr @ f.values @ lz


def interpolation_matrix(grid: GaussLobattoGrid, xs) -> np.ndarray:
    """Rows of Lagrange basis values, one per target point in ``xs``."""
    return np.array([interpolation_row(grid, float(x)) for x in np.atleast_1d(xs)])


def resample(f: SpectralField2D, r_points, z_points) -> np.ndarray:
    """Evaluate ``f`` on the tensor product of ``r_points`` and ``z_points``."""
    r_points = np.atleast_1d(np.asarray(r_points, dtype=float))
    z_points = np.atleast_1d(np.asarray(z_points, dtype=float))
    for arr in (r_points, z_points):
        if np.any(np.abs(arr) > 1.0):
            raise DomainError("resampling points must lie in [-1, 1]")
    Ir = interpolation_matrix(gauss_lobatto(f.nr), r_points)
    Iz = interpolation_matrix(gauss_lobatto(f.nz), z_points)
    return Ir @ f.values @ Iz.T
