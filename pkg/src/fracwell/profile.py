"""Optimal transition profiles and the interfacial constant.

The constant is the least unscaled energy (``eps = 1``) of a transition from
-1 to +1. On a grid this is computed for the class of profiles pinned to -1
for ``x <= -T`` and to +1 for ``x >= T``; the nonlocal interaction with the
constant states beyond the grid is added through the analytic tail weights of
the seminorm form.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .energy import EnergyBreakdown, EnergyConfig, FractionalOrder
from .grid import Grid1D, GridFunction
from .optimize import Constraints, NonFiniteEnergyError, minimize
from .potential import DoubleWell, quartic_well

log = logging.getLogger(__name__)

START_WIDTHS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ProfileProblem:
    """One truncated profile problem.

    ``domain_half_width`` defaults to ``T`` plus ``k + 2`` grid cells, so that
    at least ``k + 2`` pinned nodes sit on each side and the ``k``-th
    differences vanish at the grid ends. Without ``n`` the spacing is ``T/500``.
    """

    order: FractionalOrder
    well: DoubleWell = field(default_factory=quartic_well)
    T: float = 20.0
    domain_half_width: float | None = None
    n: int | None = None
    normalized: bool = False
    start_widths: tuple[float, ...] = START_WIDTHS
    max_iters: int = 20_000
    grad_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n is None:
            object.__setattr__(self, "n", 1001 + 2 * (self.order.k + 2))
        if self.n < 3:
            raise ValueError("need at least 3 nodes")
        if self.domain_half_width is None:
            cells = self.order.k + 2
            L = self.T * (self.n - 1) / (self.n - 1 - 2 * cells)
            object.__setattr__(self, "domain_half_width", L)
        if self.domain_half_width < self.T:
            raise ValueError("the domain must cover [-T, T]")
        if self.h > self.T / 50 * (1 + 1e-12):
            raise ValueError(f"grid spacing {self.h:.3g} exceeds T/50; increase n")
        if not self.start_widths:
            raise ValueError("need at least one start width")

    @property
    def h(self) -> float:
        return 2.0 * self.domain_half_width / (self.n - 1)

    @property
    def grid(self) -> Grid1D:
        L = self.domain_half_width
        return Grid1D(-L, L, self.n)

    def config(self) -> EnergyConfig:
        L = self.domain_half_width
        return EnergyConfig(
            order=self.order,
            eps=1.0,
            grid=self.grid,
            well=self.well,
            normalized=self.normalized,
            tail_T=None if self.order.is_integer else L,
        )

    def pad_nodes(self) -> int:
        x = self.grid.nodes
        # tolerance so that a node sitting on -T counts as pinned
        P = int(np.count_nonzero(x <= -self.T + 1e-9 * self.h))
        if P < self.order.k + 1:
            raise ValueError(
                f"only {P} pinned nodes per side; widen the domain beyond T for k = {self.order.k}"
            )
        return P


@dataclass
class ProfileResult:
    m_hat: float
    profile: GridFunction
    breakdown: EnergyBreakdown
    T: float
    n: int
    converged: bool
    start_width: float = 1.0
    starts: list[dict] = field(default_factory=list)


def initial_profile(grid: Grid1D, T: float, width: float) -> np.ndarray:
    """Odd start ``tanh(x/width)`` pinned to -+1 outside ``[-T, T]``."""
    x = grid.nodes
    u = np.tanh(x / width)
    u[x <= -T] = -1.0
    u[x >= T] = 1.0
    return u


def solve_profile(p: ProfileProblem, cfg: EnergyConfig | None = None) -> ProfileResult:
    """Minimize the unscaled energy from each start width; keep the lowest.

    ``cfg`` may be passed to reuse an assembled seminorm form across calls on
    the same grid.
    """
    cfg = cfg or p.config()
    P = p.pad_nodes()
    cons = Constraints(
        pad_nodes=P, left_value=-1.0, right_value=1.0, max_iters=p.max_iters, grad_tol=p.grad_tol
    )
    best = None
    starts = []
    for w in p.start_widths:
        u0 = initial_profile(cfg.grid, p.T, w)
        try:
            res = minimize(cfg, u0, cons, record_trace=False)
        except NonFiniteEnergyError as err:
            log.warning("start width %g: %s", w, err)
            starts.append({"width": w, "m_hat": math.nan, "converged": False})
            continue
        starts.append({"width": w, "m_hat": res.breakdown.total, "converged": res.converged})
        if best is None or res.breakdown.total < best[1].breakdown.total:
            best = (w, res)
    if best is None:
        raise FloatingPointError("every start produced a non-finite energy")
    w, res = best
    return ProfileResult(
        m_hat=res.breakdown.total,
        profile=res.u,
        breakdown=res.breakdown,
        T=p.T,
        n=p.n,
        converged=res.converged,
        start_width=w,
        starts=starts,
    )


def _row(key: str, value: float, p: ProfileProblem, res: ProfileResult | None, error: str = "") -> dict:
    row = {key: value} if key == "T" else {"s": value, "T": p.T}
    row["n"] = p.n
    if res is None:
        row.update(m_hat=math.nan, well=math.nan, seminorm=math.nan, converged=False, error=error)
    else:
        row.update(
            m_hat=res.m_hat,
            well=res.breakdown.well_term,
            seminorm=res.breakdown.seminorm_term,
            converged=res.converged,
            error="",
        )
    return row


def _solve_row(key: str, value: float, p: ProfileProblem) -> dict:
    try:
        return _row(key, value, p, solve_profile(p))
    except (ValueError, FloatingPointError) as err:
        log.warning("%s=%g failed: %s", key, value, err)
        return _row(key, value, p, None, str(err))


def sweep_s(
    k: int,
    s_list: Sequence[float],
    normalized: bool = False,
    T: float = 20.0,
    n: int | None = None,
    well: DoubleWell | None = None,
    refine_near_integers: bool = True,
    **problem_kwargs,
) -> list[dict]:
    """One profile solve per ``s``, rows in input order.

    With ``refine_near_integers`` each ``s`` within 0.1 of an integer is
    solved a second time with ``2n - 1`` nodes and both rows are reported, so
    that resolution drift is visible.
    """
    rows = []
    for s in s_list:
        try:
            p = ProfileProblem(
                order=FractionalOrder(k, s),
                well=well or quartic_well(),
                T=T,
                n=n,
                normalized=normalized,
                **problem_kwargs,
            )
        except ValueError as err:
            rows.append({"s": s, "T": T, "n": n, "m_hat": math.nan, "well": math.nan,
                         "seminorm": math.nan, "converged": False, "error": str(err)})
            continue
        rows.append(_solve_row("s", s, p))
        if refine_near_integers and (s < 0.1 or s > 0.9):
            rows.append(_solve_row("s", s, replace(p, n=2 * p.n - 1, domain_half_width=None)))
    return rows


def sweep_T(p: ProfileProblem, T_list: Sequence[float]) -> list[dict]:
    """Solve for each truncation ``T`` at the grid spacing of ``p``."""
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be strictly increasing")
    h = p.h
    rows = []
    for T in T_list:
        L = T + (p.domain_half_width - p.T)
        n = int(round(2 * L / h)) + 1
        rows.append(_solve_row("T", T, replace(p, T=T, n=n, domain_half_width=(n - 1) * h / 2)))
    return rows


SWEEP_FIELDS = ["T", "n", "m_hat", "well", "seminorm", "converged"]


def write_sweep_csv(rows: list[dict], path: str | Path, key: str = "s") -> None:
    """``s,T,n,m_hat,well,seminorm,converged`` (or ``T,n,...`` for ``key='T'``)."""
    fields = (["s"] if key == "s" else []) + SWEEP_FIELDS
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
