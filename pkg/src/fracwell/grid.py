"""Uniform 1-D grids, nodal samples, forward-difference derivatives and quadrature."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray


class InvalidDomainError(ValueError):
    """Raised for an empty interval or a grid with fewer than two nodes."""


class OrderTooHighError(ValueError):
    """Raised when a derivative order leaves fewer than two samples."""


class GridMismatchError(ValueError):
    """Raised when samples live on a different grid than the operator expects."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[a, b]`` with ``n`` nodes."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise InvalidDomainError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidDomainError(f"need n >= 2 nodes, got n={self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def nodes(self) -> NDArray[np.float64]:
        return self.a + self.h * np.arange(self.n)

    def staggered(self, order: int) -> "Grid1D":
        """Grid carrying ``order``-th differences: offset ``order*h/2``, ``n-order`` nodes."""
        shift = 0.5 * order * self.h
        return Grid1D(self.a + shift, self.b - shift, self.n - order)

    def trapezoid_weights(self) -> NDArray[np.float64]:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def matches(self, other: "Grid1D", rtol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        scale = max(abs(self.a), abs(self.b), self.length)
        return abs(self.a - other.a) <= rtol * scale and abs(self.b - other.b) <= rtol * scale


def make_grid(a: float, b: float, n: int) -> Grid1D:
    return Grid1D(a, b, n)


@dataclass(frozen=True)
class GridFunction:
    """Nodal samples of a function on a grid."""

    grid: Grid1D
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        if values.shape != (self.grid.n,):
            raise GridMismatchError(
                f"expected {self.grid.n} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: Grid1D, f) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.nodes), dtype=float))

    @property
    def x(self) -> NDArray[np.float64]:
        return self.grid.nodes

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        """Piecewise-linear interpolant, held constant outside the grid."""
        return np.interp(t, self.grid.nodes, self.values)


@dataclass(frozen=True)
class DerivativeSamples(GridFunction):
    """Scaled ``order``-fold forward differences, carried by a staggered grid."""

    order: int = 0


def difference_matrix(n: int, h: float, order: int) -> NDArray[np.float64]:
    """Dense ``(n-order) x n`` matrix of the scaled forward difference ``h**-order * Delta**order``."""
    D = np.eye(n)
    for _ in range(order):
        D = D[1:] - D[:-1]
    return D / h**order


def derivative(u: GridFunction, ell: int) -> DerivativeSamples:
    """``ell``-th derivative by forward differences on the staggered grid.

    ``derivative(u, 0)`` returns the samples of ``u`` unchanged.
    """
    if ell < 0:
        raise ValueError("derivative order must be nonnegative")
    n = u.grid.n
    if ell > n - 2:
        raise OrderTooHighError(f"order {ell} needs at least {ell + 2} nodes, grid has {n}")
    vals = np.diff(u.values, n=ell) / u.grid.h**ell if ell else u.values
    return DerivativeSamples(u.grid.staggered(ell), vals, order=ell)


def derivative_adjoint(g: NDArray[np.float64], grid: Grid1D, ell: int) -> NDArray[np.float64]:
    """Apply the transpose of the scaled difference operator to ``g`` (length ``n-ell``)."""
    out = np.asarray(g, dtype=float)
    for _ in range(ell):
        padded = np.concatenate(([0.0], out, [0.0]))
        out = padded[:-1] - padded[1:]
    return out / grid.h**ell


def integrate(f: GridFunction) -> float:
    """Trapezoidal rule over the grid carrying ``f``."""
    return float(np.dot(f.grid.trapezoid_weights(), f.values))


def write_csv(u: GridFunction, path: str | Path) -> None:
    """Write ``x,value`` rows; 17 significant digits round-trip doubles exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for x, v in zip(u.grid.nodes, u.values):
            writer.writerow([f"{x:.17g}", f"{v:.17g}"])


def read_csv(path: str | Path) -> GridFunction:
    """Read a two-column ``x,value`` file written by :func:`write_csv`.

    The nodes must be uniformly spaced; the grid is rebuilt from the first and
    last abscissae.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["x", "value"]:
            raise ValueError(f"{path}: expected header 'x,value', got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    xs = np.array([r[0] for r in rows])
    vals = np.array([r[1] for r in rows])
    grid = Grid1D(xs[0], xs[-1], len(xs))
    if not np.allclose(xs, grid.nodes, rtol=0, atol=1e-9 * max(1.0, grid.length)):
        raise InvalidDomainError(f"{path}: nodes are not uniformly spaced")
    return GridFunction(grid, vals)
