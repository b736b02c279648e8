"""Fractional Gagliardo seminorm as a quadratic form on piecewise-linear samples.

For ``v`` piecewise linear on a uniform grid the double integral

    [v]_s^2 = int_I int_I |v(x) - v(y)|^2 / |x - y|^(1+2s) dx dy

is a quadratic form ``v^T A v``. Element pairs are integrated as follows:

* same element: exact, ``(v1 - v0)^2 h^(1-2s) * 2 / ((2-2s)(3-2s))``;
* adjacent elements: exact, through the moments
  ``G(a, b, p) = int_0^1 int_0^1 u^a t^b (u + t)^-p du dt``;
* separated elements: tensor Gauss-Legendre of order 4.

On a uniform grid every pair contribution depends only on the element gap,
so the matrix is assembled diagonal by diagonal. All dimensionless pieces are
multiplied by ``h^(1-2s)`` last, which makes the discrete form obey the
continuous scaling law exactly up to rounding.

Optional tails extend ``v`` by its end values beyond ``tail_T``; the cross
terms with the constant extension are exact weights
``2 int_I |v(x) - v_end|^2 (T - x)^(-2s) / (2s) dx``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import integrate as spi
from scipy.special import gamma as gamma_fn

from .grid import GridFunction, Grid1D, GridMismatchError

LOG_SWITCH = 1e-9
_GL4 = np.polynomial.legendre.leggauss(4)
_GL_TAIL = np.polynomial.legendre.leggauss(10)


def _check_s(s: float) -> None:
    if not (0.0 < s < 1.0):
        raise ValueError(f"fractional order s must lie in (0, 1), got {s}")


def _power_integral_1_2(q: float) -> float:
    """``int_1^2 w^q dw``, with the logarithmic branch at ``q = -1``."""
    e = q + 1.0
    if abs(e) < LOG_SWITCH:
        return math.log(2.0)
    return math.expm1(e * math.log(2.0)) / e


def _pow_int_01(e: float, r: float) -> float:
    """``int_0^1 (r + t)^(e-1) dt`` for ``r >= 0``."""
    if abs(e) < LOG_SWITCH:
        return math.log1p(1.0 / r) if r > 0 else math.inf
    if r == 0.0:
        return 1.0 / e if e > 0 else math.inf
    return ((1.0 + r) ** e - r**e) / e


def _beta_int(i: int, j: int) -> float:
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 1)


def corner_moment(a: int, b: int, p: float) -> float:
    """``int_0^1 int_0^1 u^a t^b (u + t)^-p du dt`` in closed form.

    The square is cut along ``u + t = 1``. The lower triangle is a Beta
    integral times ``1 / (a + b + 2 - p)``; the upper triangle, reflected to
    the origin, reduces to sums of ``int_1^2 w^q dw``.
    """
    if a + b + 2 - p <= 0:
        return math.inf
    lower = _beta_int(a, b) / (a + b + 2 - p)
    upper = 0.0
    for i in range(a + 1):
        for j in range(b + 1):
            coef = math.comb(a, i) * math.comb(b, j) * (-1) ** (i + j) * _beta_int(i, j)
            m = i + j + 1
            inner = 0.0
            for l in range(m + 1):
                inner += math.comb(m, l) * 2.0 ** (m - l) * (-1) ** l * _power_integral_1_2(l - p)
            upper += coef * inner
    return lower + upper


def same_element_constant(s: float) -> float:
    """``int_0^1 int_0^1 |x - y|^(1-2s) dx dy = 2 / ((2-2s)(3-2s))``."""
    return 2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))


def adjacent_block(s: float) -> NDArray[np.float64]:
    """Dimensionless 3x3 form on ``(v0, v_shared, v2)`` for two neighbouring elements.

    Both orderings of the pair are included.
    """
    p = 1.0 + 2.0 * s
    j20 = corner_moment(2, 0, p)
    j11 = corner_moment(1, 1, p)
    a = np.array([-1.0, 1.0, 0.0])
    b = np.array([0.0, -1.0, 1.0])
    return 2.0 * (j20 * (np.outer(a, a) + np.outer(b, b)) + j11 * (np.outer(a, b) + np.outer(b, a)))


def separated_blocks(s: float, gaps: NDArray) -> NDArray[np.float64]:
    """Dimensionless 4x4 forms on ``(v_e0, v_e1, v_f0, v_f1)`` for element offsets ``gaps >= 2``.

    Both orderings included; tensor Gauss-Legendre of order 4.
    """
    x, w = _GL4
    xi = 0.5 * (x + 1.0)
    wq = 0.5 * w
    XI, ETA = np.meshgrid(xi, xi, indexing="ij")
    WW = np.outer(wq, wq)
    c = np.stack([1.0 - XI, XI, -(1.0 - ETA), -ETA])  # (4, q, q)
    dist = np.asarray(gaps, dtype=float)[:, None, None] + ETA - XI
    K = WW * dist ** (-1.0 - 2.0 * s)  # (D, q, q)
    return 2.0 * np.einsum("aqr,bqr,dqr->dab", c, c, K)


def _add_block_diagonals(A: NDArray, offsets: Sequence[int], block: NDArray, count: int) -> None:
    """Add ``block[i, j]`` at ``(e + offsets[i], e + offsets[j])`` for ``e < count``."""
    if count <= 0:
        return
    n = A.shape[0]
    flat = A.reshape(-1)
    for i, oi in enumerate(offsets):
        for j, oj in enumerate(offsets):
            start = oi * n + oj
            flat[start : start + count * (n + 1) : n + 1] += block[i, j]


@dataclass(frozen=True)
class TailWeights:
    """Exact cross terms with constant extensions beyond ``left_T`` and ``right_T``.

    ``left`` and ``right`` are the node weights ``2 int phi_i(x) w(x) dx``;
    ``*_band`` hold the tridiagonal mass matrices ``2 int phi_i phi_j w dx``
    (main diagonal, first off-diagonal). ``far`` multiplies
    ``(v_right - v_left)^2`` and is infinite for ``s <= 1/2``.
    """

    left_T: float
    right_T: float
    left: NDArray[np.float64]
    right: NDArray[np.float64]
    left_band: tuple[NDArray[np.float64], NDArray[np.float64]]
    right_band: tuple[NDArray[np.float64], NDArray[np.float64]]
    far: float


def _tail_side(grid: Grid1D, s: float, dist0: NDArray) -> tuple:
    """Weighted mass pieces for ``w(x) = dist(x)^(-2s) / (2s)`` on each element.

    ``dist0[e]`` is the distance from the element end closest to the
    truncation point. Returns node weights, diagonal and off-diagonal of the
    mass matrix, all multiplied by 2 (both orderings), in the element's local
    orientation: index 0 is the node nearest the truncation point.
    """
    h = grid.h
    r = dist0 / h
    # moments mu_m = int_0^1 tau^m (r + tau)^(-2s) dtau, tau measured from the near node
    mu = np.empty((3, r.size))
    near = r < 1.0
    if np.any(~near):
        x, w = _GL_TAIL
        tau = 0.5 * (x + 1.0)
        wq = 0.5 * w
        kern = (r[~near, None] + tau[None, :]) ** (-2.0 * s) * wq
        for m in range(3):
            mu[m, ~near] = kern @ tau**m
    for idx in np.nonzero(near)[0]:
        ri = float(r[idx])
        for m in range(3):
            acc = 0.0
            for j in range(m + 1):
                term = _pow_int_01(j + 1.0 - 2.0 * s, ri)
                if ri == 0.0 and j < m:
                    continue  # multiplied by r^(m-j) = 0
                acc += math.comb(m, j) * (-ri) ** (m - j) * term
            mu[m, idx] = acc
    scale = h ** (1.0 - 2.0 * s) / (2.0 * s) * 2.0
    # shape functions: near node 1 - tau, far node tau
    near_w = scale * (mu[0] - mu[1])
    far_w = scale * mu[1]
    nn = scale * (mu[0] - 2.0 * mu[1] + mu[2])
    ff = scale * mu[2]
    nf = scale * (mu[1] - mu[2])
    return near_w, far_w, nn, ff, nf


def _tail_weights(grid: Grid1D, s: float, left_T: float, right_T: float) -> TailWeights:
    n = grid.n
    ne = n - 1
    h = grid.h
    e = np.arange(ne)
    # right side: near node of element e is e+1
    d_right = np.maximum(right_T - (grid.a + (e + 1) * h), 0.0)
    d_right[-1] = right_T - grid.b
    near_w, far_w, nn, ff, nf = _tail_side(grid, s, d_right)
    right = np.zeros(n)
    np.add.at(right, e + 1, near_w)
    np.add.at(right, e, far_w)
    rdiag = np.zeros(n)
    np.add.at(rdiag, e + 1, nn)
    np.add.at(rdiag, e, ff)
    roff = nf.copy()

    d_left = np.maximum((grid.a + e * h) - left_T, 0.0)
    d_left[0] = grid.a - left_T
    near_w, far_w, nn, ff, nf = _tail_side(grid, s, d_left)
    left = np.zeros(n)
    np.add.at(left, e, near_w)
    np.add.at(left, e + 1, far_w)
    ldiag = np.zeros(n)
    np.add.at(ldiag, e, nn)
    np.add.at(ldiag, e + 1, ff)
    loff = nf.copy()

    span = right_T - left_T
    far = span ** (1.0 - 2.0 * s) / (s * (2.0 * s - 1.0)) if s > 0.5 else math.inf
    return TailWeights(left_T, right_T, left, right, (ldiag, loff), (rdiag, roff), far)


def _band_quad(band: tuple[NDArray, NDArray], x: NDArray) -> float:
    diag, off = band
    return float(np.dot(diag * x, x) + 2.0 * np.dot(off * x[:-1], x[1:]))


def _band_apply(band: tuple[NDArray, NDArray], x: NDArray) -> NDArray:
    diag, off = band
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


@dataclass(frozen=True)
class SeminormForm:
    """Assembled quadratic form for ``[.]_s^2`` on the grid ``grid``."""

    grid: Grid1D
    s: float
    matrix: NDArray[np.float64]
    tail: TailWeights | None = None

    def _values(self, v) -> NDArray[np.float64]:
        if isinstance(v, GridFunction):
            if not self.grid.matches(v.grid):
                raise GridMismatchError("samples and form live on different grids")
            return v.values
        arr = np.asarray(v, dtype=float)
        if arr.shape != (self.grid.n,):
            raise GridMismatchError(f"expected {self.grid.n} samples, got {arr.shape}")
        return arr

    def interior(self, v) -> float:
        # constants are in the kernel; measuring from x[0] keeps them exactly at 0
        x = self._values(v)
        d = x - x[0]
        return float(d @ (self.matrix @ d))

    def tail_parts(self, v) -> tuple[float, float, float]:
        """Left tail, right tail and far left-right interaction."""
        if self.tail is None:
            return 0.0, 0.0, 0.0
        x = self._values(v)
        t = self.tail
        left = _band_quad(_clean_band(t.left_band, 0), x - x[0])
        right = _band_quad(_clean_band(t.right_band, -1), x - x[-1])
        jump = x[-1] - x[0]
        far = t.far * jump * jump if jump != 0.0 else 0.0
        return left, right, far

    def tail_energy(self, v) -> float:
        return float(sum(self.tail_parts(v)))


def _clean_band(band, end: int):
    diag, off = band
    if np.isfinite(diag[end]) and np.isfinite(off[end if end == 0 else -1]):
        return band
    diag = diag.copy()
    off = off.copy()
    diag[end] = 0.0
    if end == 0:
        off[0] = off[0] if np.isfinite(off[0]) else 0.0
    else:
        off[-1] = off[-1] if np.isfinite(off[-1]) else 0.0
    return (diag, off)


def assemble_form(
    grid: Grid1D,
    s: float,
    tail_T: float | tuple[float, float] | None = None,
) -> SeminormForm:
    """Assemble the seminorm form on ``grid``.

    ``tail_T`` (a radius, or an explicit ``(left, right)`` pair) switches on
    the constant extension of ``v`` by its end values outside
    ``[left, right]``; it must not cut into the grid. When it lies strictly
    outside the grid, the gap between grid end and truncation point is left
    out of the integral.
    """
    _check_s(s)
    n = grid.n
    ne = n - 1
    A = np.zeros((n, n))

    c0 = same_element_constant(s)
    _add_block_diagonals(A, (0, 1), c0 * np.array([[1.0, -1.0], [-1.0, 1.0]]), ne)

    if ne >= 2:
        _add_block_diagonals(A, (0, 1, 2), adjacent_block(s), ne - 1)

    if ne >= 3:
        gaps = np.arange(2, ne)
        L = separated_blocks(s, gaps)  # (D, 4, 4)
        flat = A.reshape(-1)
        for k, d in enumerate(gaps):
            count = ne - d
            blk = L[k]
            # cross entries (e + i, e + d + j) and their mirror images
            for i in range(2):
                for j in range(2):
                    val = blk[i, 2 + j]
                    start = i * n + (d + j)
                    flat[start : start + count * (n + 1) : n + 1] += val
                    start = (d + j) * n + i
                    flat[start : start + count * (n + 1) : n + 1] += val
        # self entries: element e collects blk[:2,:2] from partners on its right
        # and blk[2:,2:] from partners on its left
        right_self = np.cumsum(L[:, :2, :2], axis=0)  # sum over gaps 2..2+k
        left_self = np.cumsum(L[:, 2:, 2:], axis=0)
        S = np.zeros((ne, 2, 2))
        e = np.arange(ne)
        kr = ne - 1 - e - 2  # index into cumsum for max gap ne-1-e
        ok = kr >= 0
        S[ok] += right_self[kr[ok]]
        kl = e - 2
        ok = kl >= 0
        S[ok] += left_self[kl[ok]]
        for i in range(2):
            for j in range(2):
                start = i * n + j
                flat[start : start + ne * (n + 1) : n + 1] += S[:, i, j]

    A *= grid.h ** (1.0 - 2.0 * s)
    A = 0.5 * (A + A.T)

    tail = _make_tail(grid, s, tail_T)
    return SeminormForm(grid, float(s), A, tail)


def _make_tail(grid: Grid1D, s: float, tail_T) -> TailWeights | None:
    if tail_T is None:
        return None
    if np.isscalar(tail_T):
        left_T, right_T = -float(tail_T), float(tail_T)
    else:
        left_T, right_T = map(float, tail_T)
    scale = max(1.0, abs(grid.a), abs(grid.b))
    if left_T > grid.a + 1e-12 * scale or right_T < grid.b - 1e-12 * scale:
        raise ValueError(
            f"tail truncation [{left_T}, {right_T}] cuts into the domain [{grid.a}, {grid.b}]"
        )
    return _tail_weights(grid, s, min(left_T, grid.a), max(right_T, grid.b))


def seminorm(form: SeminormForm, v) -> float:
    """``v^T A v`` plus tail terms, with tiny negative rounding clamped to zero."""
    val = form.interior(v) + form.tail_energy(v)
    return max(val, 0.0)


def seminorm_gradient(form: SeminormForm, v) -> NDArray[np.float64]:
    """Gradient of :func:`seminorm` with respect to the samples."""
    return seminorm_and_gradient(form, v)[1]


def seminorm_and_gradient(form: SeminormForm, v) -> tuple[float, NDArray[np.float64]]:
    """Value and gradient sharing one matrix-vector product."""
    x = form._values(v)
    d0 = x - x[0]
    Ax = form.matrix @ d0
    val = float(d0 @ Ax)
    g = 2.0 * Ax
    t = form.tail
    if t is not None:
        val += form.tail_energy(x)
        for band, end in ((t.left_band, 0), (t.right_band, -1)):
            d = x - x[end]
            gb = 2.0 * _band_apply(_clean_band(band, end), d)
            g += gb
            g[end] -= gb.sum()
        jump = x[-1] - x[0]
        if jump != 0.0:
            g[-1] += 2.0 * t.far * jump
            g[0] -= 2.0 * t.far * jump
    return max(val, 0.0), g


def pair_block_sums(form: SeminormForm, v, element_blocks: NDArray[np.int64], n_blocks: int) -> NDArray:
    """Split ``v^T A v`` by element pairs into an ``n_blocks x n_blocks`` matrix.

    ``element_blocks[e]`` names the block that element ``e`` belongs to. Each
    unordered pair's energy is shared equally between ``(i, j)`` and
    ``(j, i)``, so the result is symmetric and sums to the interior seminorm.
    """
    x = form._values(v)
    grid = form.grid
    s = form.s
    ne = grid.n - 1
    blk = np.asarray(element_blocks, dtype=np.int64)
    if blk.shape != (ne,):
        raise ValueError("need one block index per element")
    out = np.zeros(n_blocks * n_blocks)
    scale = grid.h ** (1.0 - 2.0 * s)

    def add(e_idx, f_idx, energy):
        out[:] += np.bincount(blk[e_idx] * n_blocks + blk[f_idx], weights=0.5 * energy, minlength=n_blocks**2)
        out[:] += np.bincount(blk[f_idx] * n_blocks + blk[e_idx], weights=0.5 * energy, minlength=n_blocks**2)

    e = np.arange(ne)
    add(e, e, scale * same_element_constant(s) * np.diff(x) ** 2)
    if ne >= 2:
        M = adjacent_block(s)
        V = np.stack([x[:-2], x[1:-1], x[2:]])
        add(e[:-1], e[1:], scale * np.einsum("ae,ab,be->e", V, M, V))
    if ne >= 3:
        gaps = np.arange(2, ne)
        L = separated_blocks(s, gaps)
        for k, d in enumerate(gaps):
            ee = np.arange(ne - d)
            V = np.stack([x[ee], x[ee + 1], x[ee + d], x[ee + d + 1]])
            add(ee, ee + d, scale * np.einsum("ae,ab,be->e", V, L[k], V))
    return out.reshape(n_blocks, n_blocks)


# --- independent check through the Fourier side ---------------------------------


def fourier_constant(s: float) -> float:
    """``2 int_R (1 - cos t) |t|^(-1-2s) dt = 2 pi / (Gamma(1+2s) sin(pi s))``."""
    _check_s(s)
    return 2.0 * math.pi / (gamma_fn(1.0 + 2.0 * s) * math.sin(math.pi * s))


def fourier_constant_quad(s: float) -> float:
    """The same constant by direct quadrature (algebraic weight near 0, Fourier weight on the tail)."""
    _check_s(s)
    # (1 - cos t) / t^2 = 2 sinc^2 stays smooth at 0; the algebraic weight carries t^(1-2s)
    near, _ = spi.quad(
        lambda t: 2.0 * (math.sin(0.5 * t) / t) ** 2 if t > 0 else 0.5,
        0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=0, epsrel=1e-12, limit=200,
    )
    # int_1^inf cos(t) t^-p dt, integrated by parts twice so the Fourier tail decays like t^-(p+2)
    p = 1.0 + 2.0 * s
    rest, _ = spi.quad(lambda t: t ** (-p - 2.0), 1.0, np.inf, weight="cos", wvar=1.0, epsabs=1e-13, limlst=200)
    osc = -math.sin(1.0) + p * (math.cos(1.0) - (p + 1.0) * rest)
    tail = 1.0 / (2.0 * s) - osc
    return 4.0 * (near + tail)


def fourier_oracle(s: float, f_hat: Callable[[float], float], decay_check: Sequence[float] = (50.0, 100.0, 200.0)) -> float:
    """``A(s) int_R |xi|^(2s) |f_hat(xi)|^2 dxi`` for a unitary transform ``f_hat``.

    ``f_hat`` must decay faster than any power; this is probed on
    ``decay_check`` and a :class:`ValueError` is raised otherwise.
    """
    _check_s(s)
    probes = [abs(f_hat(x)) ** 2 * x ** (2 * s + 2) + abs(f_hat(-x)) ** 2 * x ** (2 * s + 2) for x in decay_check]
    if not (probes[-1] < 1e-12 or (probes[-1] < probes[0] * 1e-6)):
        raise ValueError("f_hat does not decay fast enough for the Fourier oracle")

    def integrand(x):
        return abs(x) ** (2 * s) * abs(f_hat(x)) ** 2

    pos, _ = spi.quad(integrand, 0.0, np.inf, epsabs=0, epsrel=1e-10, limit=400)
    neg, _ = spi.quad(lambda x: integrand(-x), 0.0, np.inf, epsabs=0, epsrel=1e-10, limit=400)
    return fourier_constant(s) * (pos + neg)


# --- matrix cache --------------------------------------------------------------

_HEADER = struct.Struct("<qddd")


def save_matrix(form: SeminormForm, path: str | Path) -> None:
    """Binary dump: little-endian header ``(n, s, h, a)`` then the row-major matrix."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(form.grid.n, form.s, form.grid.h, form.grid.a))
        fh.write(np.ascontiguousarray(form.matrix, dtype="<f8").tobytes())


def load_matrix(path: str | Path, grid: Grid1D, s: float) -> NDArray[np.float64] | None:
    """Return the cached matrix, or ``None`` if missing or the header disagrees."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER.size)
            if len(raw) != _HEADER.size:
                return None
            n, s_c, h_c, a_c = _HEADER.unpack(raw)
            if n != grid.n or s_c != s or h_c != grid.h or a_c != grid.a:
                return None
            data = np.frombuffer(fh.read(), dtype="<f8")
    except FileNotFoundError:
        return None
    if data.size != n * n:
        return None
    return data.reshape(n, n).astype(float)


def assemble_cached(grid: Grid1D, s: float, path: str | Path, tail_T=None) -> SeminormForm:
    """Assemble, reusing the matrix dumped at ``path`` when its header matches."""
    cached = load_matrix(path, grid, s)
    if cached is None:
        form = assemble_form(grid, s, tail_T)
        save_matrix(form, path)
        return form
    return SeminormForm(grid, float(s), cached, _make_tail(grid, s, tail_T))
