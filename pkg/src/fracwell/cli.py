"""Command-line front end.

Every subcommand writes its table to ``--out`` (CSV or JSON). Without
``--out`` the file goes to ``$FRACWELL_OUTPUT_DIR/<command>.<format>`` when
that variable is set, and to stdout otherwise. A one-line JSON summary is
printed to stderr.

Exit codes: 0 success, 1 invalid input (the message names the flag),
2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .energy import EnergyConfig, FractionalOrder, energy, local_seminorm
from .gamma import (
    StepFunction,
    build_recovery,
    check_interpolation,
    check_l2_bound,
    count_transitions,
)
from .grid import Grid1D, GridFunction, read_csv
from .optimize import Constraints, NonFiniteEnergyError, minimize
from .potential import HypothesisViolation, quartic_well, read_well_csv
from .profile import ProfileProblem, solve_profile, sweep_s, sweep_T

log = logging.getLogger("fracwell")

OUTPUT_DIR_ENV = "FRACWELL_OUTPUT_DIR"
COMMANDS = (
    "seminorm",
    "energy",
    "minimize",
    "profile",
    "sweep-s",
    "sweep-T",
    "recovery",
    "transitions",
    "check-interp",
    "check-l2",
)


class UsageError(Exception):
    """Invalid input; ``flag`` names the offending option."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default; invalid input is 1 here
        raise UsageError("usage", message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("problem")
    g.add_argument("--k", type=int, default=0, help="integer derivative order")
    g.add_argument("--s", type=float, default=0.0, help="fractional order in [0, 1)")
    g.add_argument("--eps", type=float, default=1.0)
    g.add_argument("--T", type=float, default=None, help="profile truncation (pads outside [-T, T])")
    g.add_argument("--eta", type=float, default=0.5, help="transition threshold distance from the wells")
    g.add_argument("--grid-a", type=float, default=0.0)
    g.add_argument("--grid-b", type=float, default=1.0)
    g.add_argument("--grid-n", type=int, default=None)
    g.add_argument("--well", default="quartic", help="'quartic' or a z,W,dW CSV file")
    g.add_argument("--normalized", action="store_true", default=False)
    g.add_argument("--tail-T", type=float, default=None, help="add constant-extension tails up to +-tail-T")
    g.add_argument("--input", default=None, help="x,value CSV with a grid function")
    g.add_argument("--pads", type=int, default=0, help="pinned nodes per side for minimize")
    g.add_argument("--left-value", type=float, default=-1.0)
    g.add_argument("--right-value", type=float, default=1.0)
    g.add_argument("--mass", type=float, default=None)
    g.add_argument("--max-iters", type=int, default=20_000)
    g.add_argument("--grad-tol", type=float, default=1e-7)
    g.add_argument("--s-list", type=_float_list, default=None)
    g.add_argument("--T-list", type=_float_list, default=None)
    g.add_argument("--jumps", type=_float_list, default=None, help="jump points of the step function")
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=True,
                   help="sweep-s: re-solve near integers with doubled resolution")
    g.add_argument("--ell", type=int, default=1)
    g.add_argument("--samples", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    o = p.add_argument_group("output")
    o.add_argument("--out", default=None)
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--config", default=None, help="JSON file of defaults; flags override")
    o.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="fracwell", description="Fractional double-well energies and their sharp-interface limits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "seminorm": "seminorm [u]^2_{k+s} of an input grid function",
        "energy": "energy breakdown of an input grid function",
        "minimize": "minimize the energy from an input grid function",
        "profile": "optimal transition profile and its energy m_hat",
        "sweep-s": "m_hat over a list of s",
        "sweep-T": "m_hat over a list of truncations T",
        "recovery": "recovery sequence for a step function and its energy",
        "transitions": "transition intervals of an input grid function",
        "check-interp": "empirical constant of the interpolation inequality",
        "check-l2": "empirical constant of the L2 bound by mean and seminorm",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _config_defaults(argv: list[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return {}
    try:
        with open(known.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError("--config", str(err))
    if not isinstance(data, dict):
        raise UsageError("--config", "expected a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def parse_args(argv: list[str]) -> argparse.Namespace:
    defaults = _config_defaults(argv)
    command = defaults.pop("command", None)
    if command is not None and not any(a in COMMANDS for a in argv):
        argv = [command, *argv]
    parser = build_parser()
    for sp in parser._subparsers._group_actions[0].choices.values():
        known = {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            raise UsageError("--config", f"unknown keys {sorted(unknown)}")
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


# --- helpers ----------------------------------------------------------------------


def _order(args, s: float | None = None) -> FractionalOrder:
    try:
        return FractionalOrder(args.k, args.s if s is None else s)
    except ValueError as err:
        raise UsageError("--k/--s", str(err))


def _well(args):
    if args.well == "quartic":
        return quartic_well()
    try:
        return read_well_csv(args.well)
    except (OSError, ValueError, IndexError) as err:
        raise UsageError("--well", str(err))


def _input(args) -> GridFunction:
    if args.input is None:
        raise UsageError("--input", f"required for '{args.command}'")
    try:
        return read_csv(args.input)
    except (OSError, ValueError, IndexError) as err:
        raise UsageError("--input", str(err))


def _grid(args, default_n: int = 1025) -> Grid1D:
    try:
        return Grid1D(args.grid_a, args.grid_b, args.grid_n or default_n)
    except ValueError as err:
        raise UsageError("--grid-a/--grid-b/--grid-n", str(err))


def _energy_config(args, grid: Grid1D) -> EnergyConfig:
    order = _order(args)
    try:
        return EnergyConfig(order, args.eps, grid, _well(args), args.normalized, args.tail_T)
    except ValueError as err:
        flag = "--normalized" if "normalized" in str(err) else "--eps"
        raise UsageError(flag, str(err))


def _profile_problem(args, s: float | None = None) -> ProfileProblem:
    try:
        return ProfileProblem(
            order=_order(args, s),
            well=_well(args),
            T=args.T if args.T is not None else 20.0,
            n=args.grid_n,
            normalized=args.normalized,
        )
    except UsageError:
        raise
    except ValueError as err:
        raise UsageError("--T/--grid-n", str(err))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, np.floating):
        return f"{float(v):.17g}"
    return v


def render(rows: list[dict], fields: list[str], fmt: str) -> str:
    if fmt == "json":
        clean = [{f: (None if isinstance(r.get(f), float) and math.isnan(r[f]) else r.get(f)) for f in fields} for r in rows]
        return json.dumps(clean, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _destination(args) -> Path | None:
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env) / f"{args.command}.{args.format}"
    return None


def _emit(args, rows: list[dict], fields: list[str]) -> None:
    text = render(rows, fields, args.format)
    dest = _destination(args)
    if dest is None:
        sys.stdout.write(text)
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text)


def _function_rows(u: GridFunction) -> list[dict]:
    return [{"x": float(x), "value": float(v)} for x, v in zip(u.grid.nodes, u.values)]


# --- commands ---------------------------------------------------------------------


def cmd_seminorm(args) -> dict:
    u = _input(args)
    order = _order(args)
    value = local_seminorm(u, order)
    _emit(args, [{"k": order.k, "s": order.s, "n": u.grid.n, "seminorm": value}], ["k", "s", "n", "seminorm"])
    return {"seminorm": value}


def cmd_energy(args) -> dict:
    u = _input(args)
    cfg = _energy_config(args, u.grid)
    br = energy(cfg, u)
    row = {"eps": args.eps, **br.as_dict()}
    _emit(args, [row], ["eps", "total", "well", "seminorm", "forcing"])
    return br.as_dict()


def cmd_minimize(args) -> dict:
    u0 = _input(args)
    cfg = _energy_config(args, u0.grid)
    try:
        cons = Constraints(args.pads, args.left_value, args.right_value, args.mass, args.max_iters, args.grad_tol)
    except ValueError as err:
        raise UsageError("--pads/--max-iters/--grad-tol", str(err))
    if 2 * cons.pad_nodes >= u0.grid.n:
        raise UsageError("--pads", f"{cons.pad_nodes} pads per side leave no free node")
    res = minimize(cfg, u0, cons)
    _emit(args, _function_rows(res.u), ["x", "value"])
    return {**res.breakdown.as_dict(), "grad_inf": res.grad_inf_norm, "iterations": res.iterations,
            "converged": res.converged, "message": res.message}


PROFILE_FIELDS = ["s", "T", "n", "m_hat", "well", "seminorm", "converged"]


def cmd_profile(args) -> dict:
    p = _profile_problem(args)
    res = solve_profile(p)
    row = {"s": p.order.s, "T": p.T, "n": p.n, "m_hat": res.m_hat, "well": res.breakdown.well_term,
           "seminorm": res.breakdown.seminorm_term, "converged": res.converged}
    _emit(args, [row], PROFILE_FIELDS)
    return {"m_hat": res.m_hat, "converged": res.converged, "start_width": res.start_width}


def cmd_sweep_s(args) -> dict:
    if args.s_list is None:
        raise UsageError("--s-list", "required for 'sweep-s'")
    for s in args.s_list:
        _order(args, s)
    rows = sweep_s(args.k, args.s_list, normalized=args.normalized, T=args.T if args.T is not None else 20.0,
                   n=args.grid_n, well=_well(args), refine_near_integers=args.refine)
    _emit(args, rows, PROFILE_FIELDS)
    return {"rows": len(rows), "failed": sum(1 for r in rows if r.get("error"))}


def cmd_sweep_T(args) -> dict:
    if not args.T_list:
        raise UsageError("--T-list", "required for 'sweep-T'")
    if any(b <= a for a, b in zip(args.T_list, args.T_list[1:])):
        raise UsageError("--T-list", "must be strictly increasing")
    if args.T is None:
        args.T = args.T_list[0]
    rows = sweep_T(_profile_problem(args), args.T_list)
    _emit(args, rows, PROFILE_FIELDS[1:])
    return {"rows": len(rows), "failed": sum(1 for r in rows if r.get("error"))}


def cmd_recovery(args) -> dict:
    if not args.jumps:
        raise UsageError("--jumps", "required for 'recovery'")
    try:
        step = StepFunction(tuple(args.jumps), args.left_value)
    except ValueError as err:
        raise UsageError("--jumps", str(err))
    order = _order(args)
    T = args.T if args.T is not None else 2.0
    try:
        prof = solve_profile(ProfileProblem(order, _well(args), T=T, normalized=args.normalized, start_widths=(1.0,)))
    except ValueError as err:
        raise UsageError("--T", str(err))
    grid = _grid(args, 4001)
    cfg = _energy_config(args, grid)
    try:
        u = build_recovery(step, prof, args.eps, grid)
    except ValueError as err:
        raise UsageError("--eps/--T/--jumps", str(err))
    br = energy(cfg, u)
    _emit(args, _function_rows(u), ["x", "value"])
    return {**br.as_dict(), "m_hat": prof.m_hat, "jumps": step.n_jumps}


def cmd_transitions(args) -> dict:
    u = _input(args)
    if not 0 < args.eta < 1:
        raise UsageError("--eta", "must lie in (0, 1)")
    rep = count_transitions(u, -1.0 + args.eta, 1.0 - args.eta)
    rows = [{"start": a, "end": b} for a, b in rep.intervals]
    _emit(args, rows, ["start", "end"])
    return {"count": rep.count, "lambda1": rep.lambda1, "lambda2": rep.lambda2}


def _report(args, rep) -> dict:
    d = rep.as_dict()
    if args.format == "json":
        dest = _destination(args)
        text = json.dumps(d, indent=2) + "\n"
        if dest is None:
            sys.stdout.write(text)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text)
    else:
        row = {"k": d["order"]["k"], "s": d["order"]["s"], "ell": d["ell"], "samples": d["samples"],
               "seed": d["seed"], "max_ratio": d["max_ratio"]}
        _emit(args, [row], ["k", "s", "ell", "samples", "seed", "max_ratio"])
    return d


def cmd_check_interp(args) -> dict:
    order = _order(args)
    if order.k < 1:
        raise UsageError("--k", "the interpolation check needs k >= 1")
    if not 1 <= args.ell <= order.k:
        raise UsageError("--ell", f"need 1 <= ell <= k = {order.k}")
    if args.samples < 1:
        raise UsageError("--samples", "must be positive")
    return _report(args, check_interpolation(order, args.ell, args.samples, args.seed, n=args.grid_n or 1025))


def cmd_check_l2(args) -> dict:
    if not 0 < args.s < 1:
        raise UsageError("--s", "need 0 < s < 1")
    if args.samples < 1:
        raise UsageError("--samples", "must be positive")
    return _report(args, check_l2_bound(args.s, args.samples, args.seed, n=args.grid_n or 1025))


HANDLERS = {
    "seminorm": cmd_seminorm,
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "profile": cmd_profile,
    "sweep-s": cmd_sweep_s,
    "sweep-T": cmd_sweep_T,
    "recovery": cmd_recovery,
    "transitions": cmd_transitions,
    "check-interp": cmd_check_interp,
    "check-l2": cmd_check_l2,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        summary = HANDLERS[args.command](args)
    except UsageError as err:
        print(f"fracwell: error: {err}", file=sys.stderr)
        return 1
    except HypothesisViolation as err:
        print(f"fracwell: error: --well: {err}", file=sys.stderr)
        return 1
    except (FloatingPointError, np.linalg.LinAlgError) as err:
        note = ""
        if isinstance(err, NonFiniteEnergyError):
            note = f" (iterate at iteration {err.iteration} has non-finite energy; no output written)"
        print(f"fracwell: numerical failure: {err}{note}", file=sys.stderr)
        return 2
    print(json.dumps({"command": args.command, **summary}, default=float), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
