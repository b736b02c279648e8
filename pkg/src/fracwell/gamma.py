"""Sharp-interface diagnostics: recovery sequences, cross terms, transition
counts, epsilon sweeps and empirical constants of the functional inequalities.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .energy import EnergyConfig, FractionalOrder
from .gagliardo import assemble_form, pair_block_sums, seminorm
from .grid import Grid1D, GridFunction, derivative
from .optimize import Constraints, NonFiniteEnergyError, minimize
from .profile import ProfileResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant +-1 function jumping at ``jump_points``."""

    jump_points: tuple[float, ...]
    left_value: float = -1.0

    def __post_init__(self) -> None:
        pts = tuple(float(t) for t in self.jump_points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("jump points must be strictly increasing")
        if self.left_value not in (-1.0, 1.0):
            raise ValueError("left_value must be -1 or +1")
        object.__setattr__(self, "jump_points", pts)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_points)

    @property
    def right_value(self) -> float:
        return self.left_value * (-1.0) ** self.n_jumps

    def __call__(self, x) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        flips = np.searchsorted(np.asarray(self.jump_points), x, side="right")
        return self.left_value * (-1.0) ** flips

    def jump_signs(self) -> list[float]:
        """+1 for an upward jump, -1 for a downward one."""
        return [-self.left_value * (-1.0) ** i for i in range(self.n_jumps)]


def build_recovery(u: StepFunction, profile: ProfileResult, eps: float, grid: Grid1D) -> GridFunction:
    """Glue ``v((t - t_i)/eps)`` into each jump, reflected for downward jumps.

    The windows ``|t - t_i| <= eps*T`` must be disjoint and inside the grid;
    outside them the result is exactly +-1.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    half = eps * profile.T
    t = np.asarray(u.jump_points)
    if np.any(t - half < grid.a) or np.any(t + half > grid.b):
        raise ValueError(f"a window of half-width {half:g} leaves [{grid.a}, {grid.b}]")
    if np.any(np.diff(t) < 2 * half):
        raise ValueError(f"windows of half-width {half:g} overlap")
    x = grid.nodes
    out = u(x).astype(float)
    prof = profile.profile
    for ti, sign in zip(t, u.jump_signs()):
        # nodes on the window edge up to rounding belong to the constant part
        inside = np.abs(x - ti) < half * (1.0 - 1e-12)
        y = (x[inside] - ti) / eps
        out[inside] = prof(sign * y)
    return GridFunction(grid, out)


def _blocks_of(points: NDArray, cuts: NDArray) -> NDArray[np.int64]:
    return np.clip(np.searchsorted(cuts, points, side="right") - 1, 0, cuts.size - 2)


def cross_term(u_eps: GridFunction, cfg: EnergyConfig, cut_points: Sequence[float]) -> NDArray[np.float64]:
    """Seminorm term split over the blocks ``cut_points[i] < x < cut_points[i+1]``.

    ``I[i, j]`` is the scaled double integral over block ``i`` times block
    ``j``; elements are assigned to blocks by their midpoints. Interactions
    with the constant extensions outside the grid are booked on the first and
    last diagonal blocks, and the far left-right term is split between the two
    corner blocks, so the matrix always sums to the seminorm term of
    :func:`energy`.
    """
    cuts = np.asarray(cut_points, dtype=float)
    g = cfg.grid
    tol = 1e-12 * max(1.0, abs(g.a), abs(g.b))
    if cuts.size < 2 or np.any(np.diff(cuts) <= 0):
        raise ValueError("cut points must be strictly increasing, at least two")
    if abs(cuts[0] - g.a) > tol or abs(cuts[-1] - g.b) > tol:
        raise ValueError(f"cut points must run from {g.a} to {g.b}")
    x = cfg.values(u_eps)
    nb = cuts.size - 1
    dgrid = cfg.derivative_grid
    v = derivative(GridFunction(g, x), cfg.order.k).values
    coef = cfg.coefficient
    if cfg.order.is_integer:
        w = dgrid.trapezoid_weights()
        blk = _blocks_of(dgrid.nodes, cuts)
        out = np.zeros((nb, nb))
        out[np.diag_indices(nb)] = np.bincount(blk, weights=w * v * v, minlength=nb)
        return coef * out
    form = cfg.form
    mids = dgrid.nodes[:-1] + 0.5 * dgrid.h
    out = pair_block_sums(form, v, _blocks_of(mids, cuts), nb)
    left, right, far = form.tail_parts(v)
    out[0, 0] += left
    out[-1, -1] += right
    out[0, -1] += 0.5 * far
    out[-1, 0] += 0.5 * far
    return coef * out


@dataclass
class TransitionReport:
    lambda1: float
    lambda2: float
    intervals: list[tuple[float, float]] = field(default_factory=list)
    count: int = 0


def count_transitions(u: GridFunction, lambda1: float, lambda2: float) -> TransitionReport:
    """Maximal intervals where the interpolant lies strictly between the
    thresholds and touches one threshold at each end, the two ends different.

    Interval ends are the sub-grid crossing points of the piecewise-linear
    interpolant.
    """
    if not lambda1 < lambda2:
        raise ValueError("need lambda1 < lambda2")
    x = u.grid.nodes
    y = u.values
    # classify nodes: -1 at or below lambda1, +1 at or above lambda2, 0 strictly inside
    state = np.where(y <= lambda1, -1, np.where(y >= lambda2, 1, 0))
    intervals: list[tuple[float, float]] = []
    last_side = 0
    last_exit = math.nan
    for i in range(len(x) - 1):
        a, b = state[i], state[i + 1]
        if a != 0:
            last_side = a
            last_exit = _crossing(x[i], x[i + 1], y[i], y[i + 1], lambda1 if a < 0 else lambda2)
        if b != 0 and last_side != 0 and b != last_side:
            # every node since the last touch of the other threshold was strictly inside
            end = _crossing(x[i], x[i + 1], y[i], y[i + 1], lambda1 if b < 0 else lambda2)
            intervals.append((float(last_exit), float(end)))
    return TransitionReport(lambda1, lambda2, intervals, len(intervals))


def _crossing(x0, x1, y0, y1, level):
    if y1 == y0:
        return x0
    t = (level - y0) / (y1 - y0)
    return x0 + min(max(t, 0.0), 1.0) * (x1 - x0)


def l1_distance(u: GridFunction, step: StepFunction) -> float:
    """Trapezoidal ``int |u - step|`` on the grid of ``u``."""
    return float(np.dot(u.grid.trapezoid_weights(), np.abs(u.values - step(u.grid.nodes))))


def gamma_experiment(
    u: StepFunction,
    template: EnergyConfig,
    eps_list: Sequence[float],
    profile: ProfileResult,
    cells_per_eps: float = 25.0,
    eta: float = 0.5,
    max_iters: int = 20_000,
    grad_tol: float = 1e-7,
) -> list[dict]:
    """Minimize ``F_eps`` from the recovery sequence for each ``eps``.

    The grid keeps the interval of ``template`` and takes
    ``cells_per_eps / eps`` cells, so the transition layer is resolved equally
    at every scale. Pads of ``k + 1`` nodes hold the outer values of ``u``.
    """
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    g0 = template.grid
    rows = []
    for eps in eps_list:
        row = {"eps": eps}
        try:
            n = int(math.ceil(cells_per_eps * g0.length / eps)) + 1
            grid = Grid1D(g0.a, g0.b, n)
            cfg = replace(template, eps=eps, grid=grid, forcing=None)
            u0 = build_recovery(u, profile, eps, grid)
            P = template.order.k + 1
            cons = Constraints(P, u.left_value, u.right_value, max_iters=max_iters, grad_tol=grad_tol)
            res = minimize(cfg, u0, cons, record_trace=False)
            tr = count_transitions(res.u, -1.0 + eta, 1.0 - eta)
            row.update(
                n=n,
                total=res.breakdown.total,
                per_jump=res.breakdown.total / max(u.n_jumps, 1),
                l1_dist=l1_distance(res.u, u),
                transitions=tr.count,
                converged=res.converged,
            )
        except (ValueError, NonFiniteEnergyError) as err:
            log.warning("eps=%g failed: %s", eps, err)
            row.update(n=0, total=math.nan, per_jump=math.nan, l1_dist=math.nan,
                       transitions=-1, converged=False, error=str(err))
        rows.append(row)
    return rows


def write_experiment_csv(rows: list[dict], path: str | Path) -> None:
    fields = ["eps", "total", "per_jump", "l1_dist", "transitions", "converged"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})


# --- empirical constants ----------------------------------------------------------

MAX_DEGREE = 12


def random_trig_polynomial(rng: np.random.Generator, x: NDArray, length: float) -> NDArray:
    """``sum_j a_j cos(2 pi j x/L) + b_j sin(2 pi j x/L)`` with random degree
    ``<= 12`` and coefficients uniform in ``[-1, 1]``."""
    deg = int(rng.integers(1, MAX_DEGREE + 1))
    a = rng.uniform(-1.0, 1.0, deg + 1)
    b = rng.uniform(-1.0, 1.0, deg + 1)
    j = np.arange(deg + 1)[:, None]
    phase = 2.0 * np.pi * j * x[None, :] / length
    return a @ np.cos(phase) + b @ np.sin(phase)


def _l2(u: GridFunction) -> float:
    return math.sqrt(float(np.dot(u.grid.trapezoid_weights(), u.values**2)))


def _seminorm_sq(u: GridFunction, order: FractionalOrder, form) -> float:
    v = derivative(u, order.k)
    if order.is_integer:
        return float(np.dot(v.grid.trapezoid_weights(), v.values**2))
    return seminorm(form, v.values)


def interpolation_ratio(u: GridFunction, order: FractionalOrder, ell: int, form=None) -> float:
    """``||u^(l)|| / (|I|^-l ||u|| + ||u||^theta [u]^(1-theta))`` with
    ``theta = 1 - l/(k+s)``; 0 when the numerator vanishes."""
    if not 1 <= ell <= order.k:
        raise ValueError(f"need 1 <= ell <= k, got ell={ell}, k={order.k}")
    if form is None and not order.is_integer:
        form = assemble_form(u.grid.staggered(order.k), order.s)
    lhs = _l2(derivative(u, ell))
    if lhs == 0.0:
        return 0.0
    theta = 1.0 - ell / order.r
    norm = _l2(u)
    semi = math.sqrt(_seminorm_sq(u, order, form))
    rhs = u.grid.length ** (-ell) * norm + norm**theta * semi ** (1.0 - theta)
    return lhs / rhs if rhs > 0 else math.inf


def _l2_bound_parts(u: GridFunction, s: float, form) -> tuple[float, float, float, float]:
    """``(int u^2, int u, int_J u, |I|^s [u]_s)`` with ``J`` the middle half."""
    g = u.grid
    x = g.nodes
    lo, hi = g.a + 0.25 * g.length, g.b - 0.25 * g.length
    mask = (x >= lo - 1e-12 * g.length) & (x <= hi + 1e-12 * g.length)
    w = g.trapezoid_weights()
    mean_j = float(np.trapezoid(u.values[mask], x[mask]))
    semi = g.length**s * math.sqrt(seminorm(form, u.values))
    return float(w @ u.values**2), float(w @ u.values), mean_j, semi


def l2_bound_ratio(u: GridFunction, s: float, form=None) -> float:
    """``||u|| / (|I|^-1/2 |int_J u| + |I|^s [u]_s)`` with ``J`` the middle half."""
    if form is None:
        form = assemble_form(u.grid, s)
    A, _, m, C = _l2_bound_parts(u, s, form)
    if A == 0.0:
        return 0.0
    rhs = u.grid.length**-0.5 * abs(m) + C
    return math.sqrt(A) / rhs if rhs > 0 else math.inf


def l2_bound_ratio_shifted(u: GridFunction, s: float, form=None) -> float:
    """Supremum of :func:`l2_bound_ratio` over ``u + t`` for all constants ``t``.

    The seminorm ignores constants, so along ``t`` the ratio is
    ``sqrt(A + 2Bt + |I|t^2) / (alpha |m + beta t| + C)``; its supremum is
    taken over the kink, the one stationary point of each linear branch and
    the limit ``|I|/|J| = 2`` at infinity.
    """
    if form is None:
        form = assemble_form(u.grid, s)
    A, B, m, C = _l2_bound_parts(u, s, form)
    length = u.grid.length
    alpha, beta = length**-0.5, 0.5 * length

    def ratio(t: float) -> float:
        num = math.sqrt(max(A + 2 * B * t + length * t * t, 0.0))
        den = alpha * abs(m + beta * t) + C
        return num / den if den > 0 else (math.inf if num > 0 else 0.0)

    candidates = [-m / beta]
    for sign in (1.0, -1.0):
        p, q = sign * alpha * m + C, sign * alpha * beta
        den = length * p - B * q
        if den != 0.0:
            t = (A * q - B * p) / den
            if sign * (m + beta * t) > 0:
                candidates.append(t)
    return max(2.0, *(ratio(t) for t in candidates))


@dataclass
class ConstantReport:
    order: dict
    ell: int | None
    samples: int
    seed: int
    max_ratio: float
    raw_max_ratio: float | None = None

    def as_dict(self) -> dict:
        out = {"order": self.order, "ell": self.ell, "samples": self.samples, "seed": self.seed,
               "max_ratio": self.max_ratio}
        if self.raw_max_ratio is not None:
            out["raw_max_ratio"] = self.raw_max_ratio
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def check_interpolation(
    order: FractionalOrder, ell: int, samples: int, seed: int = 0, n: int = 1025
) -> ConstantReport:
    """Largest interpolation ratio over ``samples`` random trigonometric
    polynomials on ``(0, 1)``: an empirical lower bound for the constant."""
    if order.k < 1:
        raise ValueError("the interpolation check needs k >= 1")
    if not 1 <= ell <= order.k:
        raise ValueError(f"need 1 <= ell <= k, got ell={ell}")
    grid = Grid1D(0.0, 1.0, n)
    form = None if order.is_integer else assemble_form(grid.staggered(order.k), order.s)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        u = GridFunction(grid, random_trig_polynomial(rng, grid.nodes, grid.length))
        best = max(best, interpolation_ratio(u, order, ell, form))
    return ConstantReport({"k": order.k, "s": order.s}, ell, samples, seed, best)


def check_l2_bound(s: float, samples: int, seed: int = 0, n: int = 1025) -> ConstantReport:
    """Largest ratio of the L2 bound by the mean on the middle half plus the
    ``s``-seminorm, over random trigonometric polynomials on ``(0, 1)``.

    ``max_ratio`` maximizes each draw over added constants (see
    :func:`l2_bound_ratio_shifted`); the plain maximum over the draws is kept
    as ``raw_max_ratio``. The plain maximum creeps up through rare nearly
    constant draws and does not settle at practical sample counts.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"need 0 < s < 1, got {s}")
    grid = Grid1D(0.0, 1.0, n)
    form = assemble_form(grid, s)
    rng = np.random.default_rng(seed)
    best = raw = 0.0
    for _ in range(samples):
        u = GridFunction(grid, random_trig_polynomial(rng, grid.nodes, grid.length))
        raw = max(raw, l2_bound_ratio(u, s, form))
        best = max(best, l2_bound_ratio_shifted(u, s, form))
    return ConstantReport({"k": 0, "s": s}, None, samples, seed, best, raw)
