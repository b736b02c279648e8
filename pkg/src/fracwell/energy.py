"""Singularly perturbed double-well energies and their exact discrete gradients.

For ``r = k + s`` the energy on a grid function ``u`` is

    F(u) = (1/eps) int W(u) + c * eps^(2r - 1) * [D^k u]_s^2 - int f u

with ``c = s(1-s) / 2^(1-s)`` for the normalized family and ``c = 1``
otherwise. ``s = 0`` selects the integer-order term ``eps^(2k-1) int |D^k u|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from .gagliardo import (
    SeminormForm,
    assemble_form,
    seminorm,
    seminorm_and_gradient,
    seminorm_gradient,
)
from .grid import (
    Grid1D,
    GridFunction,
    GridMismatchError,
    OrderTooHighError,
    derivative,
    derivative_adjoint,
)
from .potential import DoubleWell, quartic_well


@dataclass(frozen=True)
class FractionalOrder:
    k: int
    s: float = 0.0

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a nonnegative integer, got {self.k}")
        if not (0.0 <= self.s < 1.0):
            raise ValueError(f"s must lie in [0, 1), got {self.s}")
        if self.k + self.s <= 0.5:
            raise ValueError(
                f"order k + s = {self.k + self.s} must exceed 1/2 for a singular perturbation"
            )
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "s", float(self.s))

    @property
    def r(self) -> float:
        return self.k + self.s

    @property
    def is_integer(self) -> bool:
        return self.s == 0.0


def norm_factor(s: float) -> float:
    """``s(1-s) / 2^(1-s)``."""
    if not (0.0 < s < 1.0):
        raise ValueError(f"normalization needs s in (0, 1), got {s}")
    return s * (1.0 - s) / 2.0 ** (1.0 - s)


@dataclass(frozen=True)
class EnergyBreakdown:
    well_term: float
    seminorm_term: float
    forcing_term: float = 0.0

    @property
    def total(self) -> float:
        return self.well_term + self.seminorm_term + self.forcing_term

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "well": self.well_term,
            "seminorm": self.seminorm_term,
            "forcing": self.forcing_term,
        }


@dataclass(frozen=True, eq=False)
class EnergyConfig:
    """Everything needed to evaluate one energy on one grid.

    The seminorm form is assembled on first use and kept on the instance, so
    reuse one config across evaluations on the same grid.
    """

    order: FractionalOrder
    eps: float
    grid: Grid1D
    well: DoubleWell = field(default_factory=quartic_well)
    normalized: bool = False
    tail_T: float | tuple[float, float] | None = None
    forcing: GridFunction | None = None

    def __post_init__(self) -> None:
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.normalized and self.order.is_integer:
            raise ValueError("the normalized family needs 0 < s < 1")
        if self.order.k > self.grid.n - 2:
            raise OrderTooHighError(
                f"derivative order {self.order.k} needs at least {self.order.k + 2} nodes"
            )
        if self.forcing is not None and not self.grid.matches(self.forcing.grid):
            raise GridMismatchError("forcing lives on a different grid")

    @property
    def coefficient(self) -> float:
        """Prefactor of the seminorm term."""
        k, s = self.order.k, self.order.s
        c = norm_factor(s) if self.normalized else 1.0
        return c * self.eps ** (2.0 * (k + s) - 1.0)

    @property
    def derivative_grid(self) -> Grid1D:
        return self.grid.staggered(self.order.k)

    @cached_property
    def form(self) -> SeminormForm | None:
        if self.order.is_integer:
            return None
        tail = None
        if self.tail_T is not None:
            left, right = (-self.tail_T, self.tail_T) if np.isscalar(self.tail_T) else self.tail_T
            # the derivative grid is shifted inward by k*h/2; shift the truncation with it
            shift = 0.5 * self.order.k * self.grid.h
            tail = (left + shift, right - shift)
        return assemble_form(self.derivative_grid, self.order.s, tail)

    @cached_property
    def weights(self) -> NDArray[np.float64]:
        return self.grid.trapezoid_weights()

    def values(self, u) -> NDArray[np.float64]:
        if isinstance(u, GridFunction):
            if not self.grid.matches(u.grid):
                raise GridMismatchError("u lives on a different grid than the energy")
            return u.values
        arr = np.asarray(u, dtype=float)
        if arr.shape != (self.grid.n,):
            raise GridMismatchError(f"expected {self.grid.n} values, got {arr.shape}")
        return arr


def _dk(cfg: EnergyConfig, x: NDArray) -> NDArray:
    k = cfg.order.k
    return np.diff(x, n=k) / cfg.grid.h**k if k else x


def energy(cfg: EnergyConfig, u) -> EnergyBreakdown:
    x = cfg.values(u)
    well = float(np.dot(cfg.weights, cfg.well.eval(x))) / cfg.eps
    v = _dk(cfg, x)
    if cfg.order.is_integer:
        semi = cfg.coefficient * float(np.dot(cfg.derivative_grid.trapezoid_weights(), v * v))
    else:
        semi = cfg.coefficient * seminorm(cfg.form, v)
    forcing = 0.0
    if cfg.forcing is not None:
        forcing = -float(np.dot(cfg.weights, cfg.forcing.values * x))
    return EnergyBreakdown(well, semi, forcing)


def gradient(cfg: EnergyConfig, u) -> NDArray[np.float64]:
    """Exact gradient of :func:`energy` with respect to the nodal values."""
    x = cfg.values(u)
    g = cfg.weights * cfg.well.deriv(x) / cfg.eps
    v = _dk(cfg, x)
    if cfg.order.is_integer:
        gv = 2.0 * cfg.derivative_grid.trapezoid_weights() * v
    else:
        gv = seminorm_gradient(cfg.form, v)
    g = g + cfg.coefficient * derivative_adjoint(gv, cfg.grid, cfg.order.k)
    if cfg.forcing is not None:
        g = g - cfg.weights * cfg.forcing.values
    return g


def energy_and_gradient(cfg: EnergyConfig, u) -> tuple[EnergyBreakdown, NDArray[np.float64]]:
    """Both at once; the fractional branch does a single dense product."""
    x = cfg.values(u)
    well = float(np.dot(cfg.weights, cfg.well.eval(x))) / cfg.eps
    g = cfg.weights * cfg.well.deriv(x) / cfg.eps
    v = _dk(cfg, x)
    if cfg.order.is_integer:
        wd = cfg.derivative_grid.trapezoid_weights()
        semi = float(np.dot(wd, v * v))
        gv = 2.0 * wd * v
    else:
        semi, gv = seminorm_and_gradient(cfg.form, v)
    coef = cfg.coefficient
    g = g + coef * derivative_adjoint(gv, cfg.grid, cfg.order.k)
    forcing = 0.0
    if cfg.forcing is not None:
        forcing = -float(np.dot(cfg.weights, cfg.forcing.values * x))
        g = g - cfg.weights * cfg.forcing.values
    return EnergyBreakdown(well, coef * semi, forcing), g


def local_seminorm(u: GridFunction, order: FractionalOrder, form: SeminormForm | None = None) -> float:
    """``[u]_{k+s}^2`` on the grid of ``u`` (``int |u^(k)|^2`` when ``s = 0``)."""
    v = derivative(u, order.k)
    if order.is_integer:
        return float(np.dot(v.grid.trapezoid_weights(), v.values**2))
    if form is None:
        form = assemble_form(v.grid, order.s)
    return seminorm(form, v.values)
