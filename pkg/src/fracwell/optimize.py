"""Projected Barzilai-Borwein descent for discrete energies.

Pad nodes are held at fixed values, an optional mass constraint
``int u = m`` is kept by a constant shift of the free nodes, and every accepted
step satisfies an Armijo decrease, so the energy trace is non-increasing.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .energy import EnergyBreakdown, EnergyConfig, energy_and_gradient
from .grid import GridFunction

log = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 40

Objective = Callable[[NDArray[np.float64]], tuple[EnergyBreakdown, NDArray[np.float64]]]


class NonFiniteEnergyError(FloatingPointError):
    def __init__(self, message: str, iterate: NDArray[np.float64], iteration: int):
        super().__init__(message)
        self.iterate = iterate
        self.iteration = iteration


@dataclass(frozen=True)
class Constraints:
    pad_nodes: int = 0
    left_value: float = -1.0
    right_value: float = 1.0
    mass: float | None = None
    max_iters: int = 20_000
    grad_tol: float = 1e-7

    def __post_init__(self) -> None:
        if self.pad_nodes < 0:
            raise ValueError("pad_nodes must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


@dataclass
class MinimizeResult:
    u: GridFunction
    breakdown: EnergyBreakdown
    grad_inf_norm: float
    iterations: int
    converged: bool
    message: str = ""
    trace: list[dict] = field(default_factory=list)

    def write_trace(self, path: str | Path) -> None:
        """CSV with columns ``iter,total,well,seminorm,grad_inf,step``."""
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["iter", "total", "well", "seminorm", "grad_inf", "step"])
            writer.writeheader()
            for row in self.trace:
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})


def minimize(
    cfg: EnergyConfig,
    u0: GridFunction | NDArray,
    c: Constraints = Constraints(),
    objective: Objective | None = None,
    record_trace: bool = True,
) -> MinimizeResult:
    """Minimize the energy of ``cfg`` from ``u0`` under pads, mass and forcing.

    ``objective`` replaces the energy of ``cfg`` (it must return a breakdown
    and the gradient); the grid, quadrature weights and constraints still come
    from ``cfg`` and ``c``.
    """
    grid = cfg.grid
    n = grid.n
    if 2 * c.pad_nodes >= n:
        raise ValueError(f"{c.pad_nodes} pad nodes per side leave no free nodes on {n} nodes")
    fun = objective if objective is not None else (lambda x: energy_and_gradient(cfg, x))

    x = np.array(u0.values if isinstance(u0, GridFunction) else u0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"initial guess has shape {x.shape}, grid has {n} nodes")
    free = np.ones(n, dtype=bool)
    P = c.pad_nodes
    if P:
        free[:P] = False
        free[n - P :] = False
        x[:P] = c.left_value
        x[n - P :] = c.right_value
    w = cfg.weights
    wf = w[free]
    wf_norm2 = float(wf @ wf)

    def enforce_mass(y: NDArray) -> None:
        if c.mass is None:
            return
        shift = (float(w @ y) - c.mass) / float(wf.sum())
        y[free] -= shift

    def direction(g: NDArray) -> NDArray:
        d = np.zeros(n)
        gf = g[free]
        if c.mass is not None:
            gf = gf - (gf @ wf) / wf_norm2 * wf
        d[free] = gf
        return d

    enforce_mass(x)
    br, g = fun(x)
    if not np.isfinite(br.total):
        raise NonFiniteEnergyError("non-finite energy at the initial guess", x.copy(), 0)
    d = direction(g)
    gnorm = float(np.max(np.abs(d))) if d.any() else 0.0
    trace: list[dict] = []
    if record_trace:
        trace.append(_row(0, br, gnorm, 0.0))

    alpha = 1.0 / max(gnorm, 1e-300)
    alpha = min(alpha, 1.0)
    it = 0
    message = "max_iters reached"
    converged = gnorm <= c.grad_tol
    if converged:
        message = "initial guess is stationary"
    while not converged and it < c.max_iters:
        it += 1
        dd = float(d @ d)
        step = alpha
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            x_new = x - step * d
            enforce_mass(x_new)
            br_new, g_new = fun(x_new)
            # strict decrease as well: at roundoff level the Armijo bound alone is vacuous
            new = br_new.total
            if np.isfinite(new) and new < br.total and new <= br.total - ARMIJO * step * dd:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "line search failed"
            log.debug("line search failed at iteration %d", it)
            break
        d_new = direction(g_new)
        sv = x_new - x
        yv = d_new - d
        sy = float(sv @ yv)
        alpha = float(sv @ sv) / sy if sy > 0 else 2.0 * step
        alpha = min(max(alpha, 1e-14), 1e14)
        x, br, g, d = x_new, br_new, g_new, d_new
        gnorm = float(np.max(np.abs(d)))
        if record_trace:
            trace.append(_row(it, br, gnorm, step))
        if gnorm <= c.grad_tol:
            converged = True
            message = "gradient tolerance reached"

    return MinimizeResult(
        u=GridFunction(grid, x),
        breakdown=br,
        grad_inf_norm=gnorm,
        iterations=it,
        converged=converged,
        message=message,
        trace=trace,
    )


def _row(it: int, br: EnergyBreakdown, gnorm: float, step: float) -> dict:
    return {
        "iter": it,
        "total": br.total,
        "well": br.well_term,
        "seminorm": br.seminorm_term,
        "grad_inf": gnorm,
        "step": step,
    }
