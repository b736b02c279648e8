"""Double-well potentials and numerical checks of the growth hypotheses.

The two hypotheses checked here are the lower bound

    W(z) >= alpha_W * min{(z+1)^2, (z-1)^2, beta_W}     for all z,

and the local upper bound

    W(z) <= gamma_W * min{(z+1)^2, (z-1)^2}             for ||z|-1| <= eta_bar.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicHermiteSpline


class HypothesisViolation(ValueError):
    """A stored constant fails one of the growth hypotheses at ``witness``."""

    def __init__(self, message: str, witness: float, report: "HypothesisReport"):
        super().__init__(message)
        self.witness = witness
        self.report = report


@dataclass(frozen=True)
class DoubleWell:
    eval: Callable[[ArrayLike], NDArray]
    deriv: Callable[[ArrayLike], NDArray]
    alpha_W: float
    beta_W: float
    gamma_W: float
    eta_bar: float
    name: str = "custom"

    def __call__(self, z: ArrayLike) -> NDArray:
        return self.eval(z)

    def scaled(self, factor: float) -> "DoubleWell":
        """The well ``factor * W``; hypothesis constants scale accordingly."""
        return DoubleWell(
            eval=lambda z: factor * self.eval(z),
            deriv=lambda z: factor * self.deriv(z),
            alpha_W=factor * self.alpha_W,
            beta_W=self.beta_W,
            gamma_W=factor * self.gamma_W,
            eta_bar=self.eta_bar,
            name=f"{factor:g}*{self.name}",
        )


def _quartic(z):
    z = np.asarray(z, dtype=float)
    return (1.0 - z * z) ** 2


def _quartic_prime(z):
    z = np.asarray(z, dtype=float)
    return -4.0 * z * (1.0 - z * z)


def quartic_well() -> DoubleWell:
    """``W(z) = (1 - z^2)^2``.

    With ``beta_W = 1`` the tightest lower constant is ``alpha_W = 1`` (the
    ratio ``(1+z)^2`` is smallest at the wells), and on ``||z|-1| <= 1/2`` the
    upper ratio ``(1+|z|)^2`` peaks at ``|z| = 3/2``, giving ``gamma_W = 25/4``.
    """
    return DoubleWell(
        eval=_quartic,
        deriv=_quartic_prime,
        alpha_W=1.0,
        beta_W=1.0,
        gamma_W=6.25,
        eta_bar=0.5,
        name="quartic",
    )


@dataclass
class HypothesisReport:
    passed: bool
    h1_passed: bool
    h2_passed: bool
    fitted_alpha_W: float
    fitted_gamma_W: float
    h1_witness: float | None = None
    h2_witness: float | None = None
    z_range: tuple[float, float] = (0.0, 0.0)
    n_samples: int = 0
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "h1_passed": self.h1_passed,
            "h2_passed": self.h2_passed,
            "fitted_alpha_W": self.fitted_alpha_W,
            "fitted_gamma_W": self.fitted_gamma_W,
            "h1_witness": self.h1_witness,
            "h2_witness": self.h2_witness,
            "z_range": list(self.z_range),
            "n_samples": self.n_samples,
        }


def _closest_to_wells(zs: NDArray) -> float:
    # the hypotheses are local statements at +-1, so report the violation nearest a well
    return float(zs[np.argmin(np.abs(np.abs(zs) - 1.0))])


def check_hypotheses(
    w: DoubleWell,
    z_min: float = -3.0,
    z_max: float = 3.0,
    n_samples: int = 10_000,
    raise_on_failure: bool = True,
) -> HypothesisReport:
    """Evaluate both growth hypotheses on a uniform sample of ``[z_min, z_max]``.

    The sample always includes the wells and the points ``+-1 +- eta_bar``.
    Returns the largest ``alpha_W`` and smallest ``gamma_W`` consistent with the
    samples. With ``raise_on_failure`` a :class:`HypothesisViolation` carrying
    the offending ``z`` nearest a well is raised when a stored constant fails.
    """
    eta = w.eta_bar
    if not (z_min < -1 - eta and z_max > 1 + eta):
        raise ValueError("sample range must cover [-1-eta_bar, 1+eta_bar]")
    if n_samples < 100:
        raise ValueError("need at least 100 samples")

    special = [-1 - eta, -1.0, -1 + eta, 1 - eta, 1.0, 1 + eta]
    z = np.unique(np.concatenate([np.linspace(z_min, z_max, n_samples), special]))
    W = np.asarray(w.eval(z), dtype=float)
    notes: list[str] = []
    if not np.all(np.isfinite(W)):
        raise ValueError("well produced non-finite values")
    if np.any(W < 0):
        notes.append("negative values sampled")

    dist2 = np.minimum((z + 1) ** 2, (z - 1) ** 2)

    lower = np.minimum(dist2, w.beta_W)
    off_wells = lower > 0
    ratio1 = W[off_wells] / lower[off_wells]
    fitted_alpha = float(ratio1.min()) if ratio1.size else np.inf
    bad1 = W[off_wells] < w.alpha_W * lower[off_wells] * (1 - 1e-12)
    h1_ok = not bool(np.any(bad1))
    h1_witness = None if h1_ok else _closest_to_wells(z[off_wells][bad1])
    # at the wells themselves W must vanish
    at_wells = ~off_wells
    if np.any(W[at_wells] > 1e-14):
        notes.append("W does not vanish at the wells")

    near = (np.abs(np.abs(z) - 1.0) <= eta) & (dist2 > 0)
    ratio2 = W[near] / dist2[near]
    fitted_gamma = float(ratio2.max())
    bad2 = W[near] > w.gamma_W * dist2[near] * (1 + 1e-12)
    h2_ok = not bool(np.any(bad2))
    h2_witness = None if h2_ok else _closest_to_wells(z[near][bad2])

    report = HypothesisReport(
        passed=h1_ok and h2_ok and fitted_alpha > 0,
        h1_passed=h1_ok and fitted_alpha > 0,
        h2_passed=h2_ok,
        fitted_alpha_W=fitted_alpha,
        fitted_gamma_W=fitted_gamma,
        h1_witness=h1_witness,
        h2_witness=h2_witness,
        z_range=(z_min, z_max),
        n_samples=int(z.size),
        notes=notes,
    )
    if fitted_alpha <= 0 and report.h1_witness is None:
        report.h1_witness = _closest_to_wells(z[off_wells][ratio1 <= 0])
    if raise_on_failure and not report.passed:
        if not report.h1_passed:
            raise HypothesisViolation(
                f"lower bound fails with alpha_W={w.alpha_W} at z={report.h1_witness}",
                report.h1_witness,
                report,
            )
        raise HypothesisViolation(
            f"upper bound fails with gamma_W={w.gamma_W} at z={report.h2_witness}",
            report.h2_witness,
            report,
        )
    return report


def tabulated_well(
    z: ArrayLike,
    W: ArrayLike,
    dW: ArrayLike,
    beta_W: float = 1.0,
    eta_bar: float = 0.5,
    z_range: tuple[float, float] | None = None,
) -> DoubleWell:
    """Build a well from ``(z, W, W')`` samples by cubic Hermite interpolation.

    Hypothesis constants are fitted on the table and then checked; an
    unusable table raises :class:`HypothesisViolation`.
    """
    z = np.asarray(z, dtype=float)
    W = np.asarray(W, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if z.ndim != 1 or z.size < 4 or np.any(np.diff(z) <= 0):
        raise ValueError("tabulated well needs at least 4 strictly increasing z values")
    spline = CubicHermiteSpline(z, W, dW, extrapolate=False)
    dspline = spline.derivative()
    lo, hi = z[0], z[-1]

    def ev(t):
        t = np.asarray(t, dtype=float)
        out = spline(np.clip(t, lo, hi))
        return np.where(t < lo, W[0], np.where(t > hi, W[-1], out))

    def dev(t):
        t = np.asarray(t, dtype=float)
        out = dspline(np.clip(t, lo, hi))
        return np.where((t < lo) | (t > hi), 0.0, out)

    provisional = DoubleWell(ev, dev, 1.0, beta_W, 1.0, eta_bar, name="tabulated")
    z_min, z_max = z_range if z_range is not None else (lo, hi)
    rep = check_hypotheses(provisional, z_min, z_max, n_samples=10_000, raise_on_failure=False)
    well = DoubleWell(
        ev,
        dev,
        alpha_W=rep.fitted_alpha_W,
        beta_W=beta_W,
        gamma_W=rep.fitted_gamma_W,
        eta_bar=eta_bar,
        name="tabulated",
    )
    check_hypotheses(well, z_min, z_max, n_samples=10_000)
    return well


def read_well_csv(path: str | Path, **kwargs) -> DoubleWell:
    """Load a ``z,W,dW`` table (header plus rows, strictly increasing ``z``)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["z", "W", "dW"]:
            raise ValueError(f"{path}: expected header 'z,W,dW', got {header}")
        rows = np.array([[float(c) for c in r] for r in reader if r])
    return tabulated_well(rows[:, 0], rows[:, 1], rows[:, 2], **kwargs)


def write_well_csv(w: DoubleWell, z: ArrayLike, path: str | Path) -> None:
    z = np.asarray(z, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "W", "dW"])
        for zi, wi, di in zip(z, w.eval(z), w.deriv(z)):
            writer.writerow([f"{zi:.17g}", f"{wi:.17g}", f"{di:.17g}"])
