"""t-quantized and Weyl operators on a grid, Weyl products and change of quantization.

The discrete kernel is

    K[i, j] = (dxi / 2 pi) sum_k exp(i (x_i - x_j) xi_k) a(t x_i + (1 - t) x_j, xi_k),

applied as ``(Au)_i = sum_j K[i, j] u_j dx``. For symbols polynomial in xi the
sum over the dual grid is spectral differentiation. The kernel depends
on i - j modulo n through the dual grid, so only pairs with |i - j| < n/2 are
kept; the wrapped pairs would couple the two box edges. That cut drops the
long-range tail of the spectral derivative, so :func:`quantize` applies
polynomial symbols through their ordering expansion instead of a kernel.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import sparse

from .errors import GridError, OrderTooHigh, UnsupportedSymbol
from .grid import AxisSpec, SampledSignal, multi_indices, spectral_derivative
from .symbols import DilatedSymbol, SymbolExpr, differentiate_symbol

# direct O(n^3) build for general t is limited to small grids
MAX_GENERAL_T_N = 512
MIDPOINT_CHUNK = 128


@dataclass
class OperatorKernel:
    axis: AxisSpec
    t: float
    K: object  # dense ndarray or scipy sparse matrix
    symbol_id: str = ""

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.K)

    def apply(self, u):
        """Apply to a SampledSignal, or to an (n, m) array of column signals."""
        if isinstance(u, SampledSignal):
            if u.axis != self.axis:
                raise GridError("signal axis differs from kernel axis")
            return u.with_values(self.K @ u.values * self.axis.dx, label=f"op[{u.label}]")
        return self.K @ np.asarray(u) * self.axis.dx

    def dense(self) -> np.ndarray:
        return self.K.toarray() if self.is_sparse else np.asarray(self.K)


def _check_symbol(a):
    if not isinstance(a, (SymbolExpr, DilatedSymbol)):
        raise UnsupportedSymbol(f"cannot quantize {type(a).__name__}; expected a SymbolExpr")
    if a.d != 1:
        raise UnsupportedSymbol("operator kernels are implemented for d = 1")


def _coeff(axis: AxisSpec) -> float:
    return axis.dxi / (2 * np.pi)


def _sign(q):
    return np.where(np.asarray(q) % 2, -1.0, 1.0)


def _columns(a, mids: np.ndarray, axis: AxisSpec) -> np.ndarray:
    """G[p, q] = (dxi/2pi) (-1)^q sum_k a(m_p, xi_k) exp(2 pi i q k / n), q = 0..n-1."""
    A = a(mids[:, None], axis.dual_grid[None, :])
    G = np.fft.ifft(A, axis=1) * (axis.n * _coeff(axis))
    return G * _sign(np.arange(axis.n))[None, :]


def _weyl_dense(a, axis: AxisSpec) -> np.ndarray:
    n = axis.n
    K = np.zeros((n, n), dtype=complex)
    for s in range(0, 2 * n - 1, MIDPOINT_CHUNK):
        p = np.arange(s, min(2 * n - 1, s + MIDPOINT_CHUNK))
        G = _columns(a, -axis.half_width + p * axis.dx / 2, axis)
        for r, pp in enumerate(p):
            i = _pairs(pp, n)
            K[i, pp - i] = G[r, (2 * i - pp) % n]
    return K


def _pairs(p: int, n: int) -> np.ndarray:
    """Rows i with j = p - i on the grid and |i - j| < n/2."""
    i = np.arange(max(0, p - n + 1), min(p, n - 1) + 1)
    return i[np.abs(2 * i - p) < n // 2]


def _unwrapped(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]) < n // 2


def _reach(G: np.ndarray, drop_tol: float) -> int:
    """Smallest Q with |G[:, q]| <= drop_tol * max|G| for all wrapped offsets |q| > Q."""
    n = G.shape[1]
    if drop_tol <= 0:
        return n // 2 - 1
    col = np.abs(G).max(axis=0)
    big = col > drop_tol * col.max()
    off = np.minimum(np.arange(n), n - np.arange(n))
    return int(off[big].max()) if np.any(big) else 0


def _weyl_banded(a, axis: AxisSpec, box, drop_tol: float = 0.0) -> sparse.csr_matrix:
    """Weyl kernel restricted to midpoints inside the symbol's x-support.

    With ``drop_tol > 0`` the offsets q = i - j are cut where every column of
    the chunk has fallen below ``drop_tol`` times its largest entry.
    """
    n = axis.n
    (xlo, xhi), (klo, khi) = box
    p_lo = max(0, math.floor((xlo + axis.half_width) / (axis.dx / 2)))
    p_hi = min(2 * n - 2, math.ceil((xhi + axis.half_width) / (axis.dx / 2)))
    kk = np.nonzero((axis.dual_grid >= klo) & (axis.dual_grid <= khi))[0]
    rows, cols, vals = [], [], []
    if p_hi < p_lo or kk.size == 0:
        return sparse.csr_matrix((n, n), dtype=complex)
    sign = _sign(np.arange(n))[None, :] * (n * _coeff(axis))
    for s in range(p_lo, p_hi + 1, MIDPOINT_CHUNK):
        p = np.arange(s, min(p_hi + 1, s + MIDPOINT_CHUNK))
        mids = -axis.half_width + p * axis.dx / 2
        A = np.zeros((p.size, n), dtype=complex)
        A[:, kk] = a(mids[:, None], axis.dual_grid[None, kk])
        G = np.fft.ifft(A, axis=1) * sign
        Q = min(_reach(G, drop_tol), n // 2 - 1)
        q = np.arange(-Q, Q + 1)
        P = p[:, None]
        i2 = P + q[None, :]
        ok = (i2 % 2 == 0) & (i2 >= 0) & (i2 <= 2 * n - 2)
        i = i2 // 2
        j = i - q[None, :]
        ok &= (i < n) & (j >= 0) & (j < n)
        r_idx = np.broadcast_to(np.arange(p.size)[:, None], ok.shape)[ok]
        q_idx = np.broadcast_to(q[None, :] % n, ok.shape)[ok]
        rows.append(i[ok])
        cols.append(j[ok])
        vals.append(G[r_idx, q_idx])
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _left_or_right(a, axis: AxisSpec, t: float) -> np.ndarray:
    """t = 1 (symbol at x_i, one FFT per row) or t = 0 (at x_j, per column)."""
    n = axis.n
    G = _columns(a, axis.grid, axis)  # G[p, q] for p = the frozen grid point
    idx = np.arange(n)
    q = (idx[:, None] - idx[None, :]) % n  # q[i, j] = i - j mod n
    K = G[idx[:, None], q] if t == 1.0 else G[idx[None, :], q]
    return np.where(_unwrapped(n), K, 0.0)


def _general_t(a, axis: AxisSpec, t: float) -> np.ndarray:
    n = axis.n
    if n > MAX_GENERAL_T_N:
        raise GridError(f"general t-quantization is limited to n <= {MAX_GENERAL_T_N}")
    x, xi = axis.grid, axis.dual_grid
    K = np.empty((n, n), dtype=complex)
    j = np.arange(n)
    for i in range(n):
        mids = t * x[i] + (1 - t) * x[j]
        A = a(mids[:, None], xi[None, :])
        phase = np.exp(1j * np.outer((i - j) * axis.dx, xi))
        K[i] = _coeff(axis) * np.sum(phase * A, axis=1)
    return np.where(_unwrapped(n), K, 0.0)


def build_kernel(a, t: float, axis: AxisSpec, banded: bool = False, drop_tol: float = 0.0) -> OperatorKernel:
    """Kernel of the t-quantization of ``a`` on ``axis``.

    ``banded=True`` (Weyl only) keeps just the midpoints inside the symbol's
    support box and returns a sparse kernel; it needs a compactly supported
    symbol. ``drop_tol`` then trims off-diagonal offsets whose entries are all
    below that fraction of the largest entry.
    """
    _check_symbol(a)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    sid = symbol_id(a)
    if banded:
        box = a.support_box()
        if box is None or t != 0.5:
            raise UnsupportedSymbol("banded kernels need a compactly supported Weyl symbol")
        return OperatorKernel(axis, t, _weyl_banded(a, axis, box, drop_tol), sid)
    if t == 0.5:
        K = _weyl_dense(a, axis)
    elif t in (0.0, 1.0):
        K = _left_or_right(a, axis, t)
    else:
        K = _general_t(a, axis, t)
    return OperatorKernel(axis, t, K, sid)


def symbol_id(a) -> str:
    if isinstance(a, DilatedSymbol):
        return f"dilate({symbol_id(a.base)},h={a.h:.17g})"
    return a.name or f"symbol{abs(hash(a)) % 10**10:010d}"


class KernelCache:
    """LRU cache of kernels keyed by (symbol, t, axis, banded); thread-safe."""

    def __init__(self, maxsize: int = 16):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, a, t: float, axis: AxisSpec, banded: bool = False) -> OperatorKernel:
        key = (a, float(t), axis, banded)
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
        kern = build_kernel(a, t, axis, banded)
        with self._lock:
            self.misses += 1
            self._data[key] = kern
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return kern

    def clear(self):
        with self._lock:
            self._data.clear()


CACHE = KernelCache()


def apply_polynomial(a, t: float, u: SampledSignal) -> SampledSignal:
    """a^t(x, D) u for a polynomial symbol, without a kernel.

    x^p xi^m quantizes to sum_l C(p, l) t^l (1 - t)^(p - l) x^l D^m x^(p - l)
    with D = -i d/dx applied spectrally on the periodic grid.
    """
    _check_symbol(a)
    a = _as_expr(a)
    if not a.is_polynomial:
        raise UnsupportedSymbol("apply_polynomial needs a polynomial symbol")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    x = u.axis.grid
    out = np.zeros(u.axis.shape, dtype=complex)
    for term in a.terms:
        p, m = term.powers
        for l in range(p + 1):
            w = math.comb(p, l) * t**l * (1.0 - t) ** (p - l)
            if w == 0.0:
                continue
            v = spectral_derivative(x ** (p - l) * u.values, u.axis, (m,)) * (-1j) ** m
            out += term.coeff * w * x**l * v
    return u.with_values(out, label=f"op[{u.label}]")


def quantize(a, t: float, u: SampledSignal, cache: KernelCache | None = CACHE) -> SampledSignal:
    """a^t(x, D) u; polynomial symbols skip the kernel (see the module notes)."""
    if isinstance(a, (SymbolExpr, DilatedSymbol)) and a.d == 1 and a.is_polynomial:
        return apply_polynomial(a, t, u)
    kern = cache.get(a, t, u.axis) if cache is not None else build_kernel(a, t, u.axis)
    return kern.apply(u)


def apply_weyl(a, u: SampledSignal, cache: KernelCache | None = CACHE) -> SampledSignal:
    """a^w(x, D) u; compactly supported symbols use the banded sparse kernel."""
    if isinstance(a, (SymbolExpr, DilatedSymbol)) and a.d == 1 and a.is_polynomial:
        return apply_polynomial(a, 0.5, u)
    banded = a.support_box() is not None
    kern = cache.get(a, 0.5, u.axis, banded) if cache is not None else build_kernel(a, 0.5, u.axis, banded)
    return kern.apply(u)


# ---------------------------------------------------------------------------
# symbolic expansions


def _exact(a: SymbolExpr, alpha) -> SymbolExpr:
    da = differentiate_symbol(a, alpha)
    if not isinstance(da, SymbolExpr):
        raise OrderTooHigh(f"derivative {tuple(alpha)} exceeds the exact order of the taper")
    return da


def _as_expr(a) -> SymbolExpr:
    if isinstance(a, DilatedSymbol):
        return a.materialize()
    if not isinstance(a, SymbolExpr):
        raise UnsupportedSymbol(f"expected a SymbolExpr, got {type(a).__name__}")
    return a


def weyl_product_term(a: SymbolExpr, b: SymbolExpr, j: int) -> SymbolExpr:
    """(i sigma(D)/2)^j / j! (a (x) b) on the diagonal, at h = 1.

    sigma(D)^j = sum_{|beta|+|gamma|=j} j!/(beta! gamma!) (-1)^|gamma|
    d_x^beta d_xi^gamma a * d_x^gamma d_xi^beta b.
    """
    d = a.d
    out = SymbolExpr((), d)
    for beta in multi_indices(j, d):
        k = j - sum(beta)
        for gamma in multi_indices(k, d):
            if sum(gamma) != k:
                continue
            mult = factorial(j) / (_mfact(beta) * _mfact(gamma)) * (-1) ** k
            da = _exact(a, beta + gamma)
            db = _exact(b, gamma + beta)
            out = out + (da * db) * mult
    return out * ((0.5j) ** j / factorial(j))


def _mfact(alpha) -> int:
    return math.prod(factorial(v) for v in alpha)


def weyl_product_expand(a, b, N: int, h: float = 1.0) -> SymbolExpr:
    """sum_{j<N} h^{2j} [(i sigma(D)/2)^j/j! (a (x) b)](h z) as a symbol in z."""
    a, b = _as_expr(a), _as_expr(b)
    if a.d != b.d:
        raise UnsupportedSymbol("symbols of different dimension")
    if N < 1:
        raise ValueError("N must be >= 1")
    total = SymbolExpr((), a.d)
    for j in range(N):
        term = weyl_product_term(a, b, j)
        if h != 1.0:
            term = DilatedSymbol(term, h).materialize() * h ** (2 * j)
        total = total + term
    return SymbolExpr(total.terms, a.d, a.declared_order + b.declared_order, f"({a.name})#({b.name})")


def kn_to_weyl(a, N: int, h: float = 1.0) -> SymbolExpr:
    """Weyl symbol of the Kohn-Nirenberg (t = 1) operator a_h(x, D), truncated after N terms.

    b = sum_{j<N} ((i/2) d_x . d_xi)^j / j! a_h, with each term scaling as h^{2j}.
    """
    a = _as_expr(a)
    if N < 1:
        raise ValueError("N must be >= 1")
    d = a.d
    total = SymbolExpr((), d)
    for j in range(N):
        term = SymbolExpr((), d)
        for beta in multi_indices(j, d):
            if sum(beta) != j:
                continue
            term = term + _exact(a, beta + beta) * (1.0 / _mfact(beta))
        term = term * ((0.5j) ** j)
        if h != 1.0:
            term = DilatedSymbol(term, h).materialize() * h ** (2 * j)
        total = total + term
    return SymbolExpr(total.terms, d, a.declared_order, f"kn2w({a.name})")


def composition_residual(a, b, N: int, u: SampledSignal) -> float:
    """||(a#b)^w u - a^w b^w u|| / ||u|| with the N-term product expansion."""
    ab = weyl_product_expand(a, b, N)
    lhs = quantize(ab, 0.5, u).values
    rhs = quantize(a, 0.5, quantize(b, 0.5, u)).values
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(u.values))

