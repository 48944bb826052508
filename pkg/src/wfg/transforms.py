"""FFT approximations of the continuous Fourier transform, STFT, hSTFT and Wigner distribution.

Conventions: ``Fu(xi) = int u(x) exp(-i x xi) dx`` and
``V_phi u(x, xi) = int u(y) exp(-i y xi) conj(phi(y - x)) dy``. The window is
wrapped periodically on the box, which makes the discrete Moyal identity exact.
Phase-space transforms are implemented for d = 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, KindError, RegionTooLarge
from .grid import EPS_BOUNDARY, AxisSpec, PolarIndex, SampledSignal

# rows of the phase grid processed per FFT batch
CHUNK = 256
MAX_N = 1 << 15


class Normalization(str, enum.Enum):
    UNIT_L2 = "UNIT_L2"  # pi^{-d/4} exp(-|y|^2/2)
    PLAIN = "PLAIN"  # exp(-|y|^2/2)
    UNIT_PEAK = "UNIT_PEAK"  # pi^{-d/2} exp(-|y|^2/2); |V_phi phi| has peak 1


@dataclass(frozen=True)
class GaussWindow:
    normalization: Normalization = Normalization.UNIT_L2
    d: int = 1

    @property
    def constant(self) -> float:
        return {
            Normalization.UNIT_L2: math.pi ** (-self.d / 4),
            Normalization.PLAIN: 1.0,
            Normalization.UNIT_PEAK: math.pi ** (-self.d / 2),
        }[Normalization(self.normalization)]

    @property
    def l2_norm(self) -> float:
        return self.constant * math.pi ** (self.d / 4)

    @property
    def window_id(self) -> str:
        return f"gauss-{Normalization(self.normalization).value.lower()}"

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.constant * np.exp(-0.5 * y * y)


UNIT_L2 = GaussWindow(Normalization.UNIT_L2)
PLAIN = GaussWindow(Normalization.PLAIN)
UNIT_PEAK = GaussWindow(Normalization.UNIT_PEAK)


class FieldKind(str, enum.Enum):
    STFT = "STFT"
    HSTFT = "HSTFT"
    WIGNER = "WIGNER"


@dataclass(frozen=True)
class PhaseGrid:
    """Selection of phase-grid points: every ``x_stride``-th sample with
    ``|x| <= x_max`` and every ``xi_stride``-th dual sample with ``|xi| <= xi_max``.
    Strides are anchored at the origin so x = 0 and xi = 0 are always included.
    """

    x_stride: int = 1
    xi_stride: int = 1
    x_max: float | None = None
    xi_max: float | None = None

    def x_indices(self, axis: AxisSpec) -> np.ndarray:
        return _select(axis.grid, axis.n, self.x_stride, self.x_max)

    def xi_indices(self, axis: AxisSpec) -> np.ndarray:
        if self.xi_max is not None and self.xi_max > axis.xi_max * (1 + 1e-12):
            raise GridError(f"xi_max={self.xi_max:g} beyond Nyquist {axis.xi_max:g}")
        return _select(axis.dual_grid, axis.n, self.xi_stride, self.xi_max)

    @property
    def is_full(self) -> bool:
        return self.x_stride == 1 and self.xi_stride == 1 and self.x_max is None and self.xi_max is None


FULL = PhaseGrid()


def _select(coords, n, stride, cmax):
    idx = np.arange(n)
    keep = (idx - n // 2) % stride == 0
    if cmax is not None:
        keep &= np.abs(coords) <= cmax * (1 + 1e-12)
    return idx[keep]


@dataclass
class PhaseField:
    """Samples of a function on a rectangular phase grid ``x (rows) x xi (cols)``."""

    axis: AxisSpec
    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    kind: FieldKind = FieldKind.STFT
    h: float = 1.0
    window: GaussWindow | None = UNIT_L2
    cell: float = 0.0
    _points: tuple | None = field(default=None, repr=False)
    _polar: PolarIndex | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.x.size, self.xi.size):
            raise GridError("phase field values do not match its coordinate arrays")
        if not self.cell:
            dx = self.x[1] - self.x[0] if self.x.size > 1 else 1.0
            dxi = self.xi[1] - self.xi[0] if self.xi.size > 1 else 1.0
            self.cell = float(dx * dxi)

    @property
    def window_id(self) -> str:
        return self.window.window_id if self.window else "none"

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.cell)

    def points(self):
        """Flat (x, xi, |F|) arrays, cached."""
        if self._points is None:
            X, XI = np.meshgrid(self.x, self.xi, indexing="ij")
            self._points = (X.ravel(), XI.ravel(), np.abs(self.values).ravel())
        return self._points

    def polar(self) -> PolarIndex:
        """Angle-sorted index of the nonzero phase points, cached."""
        if self._polar is None:
            self._polar = PolarIndex(*self.points())
        return self._polar

    @property
    def radius(self) -> float:
        """Radius of the largest centred disc covered by the grid."""
        return float(min(np.abs(self.x).max(), np.abs(self.xi).max()))


# ---------------------------------------------------------------------------
# Fourier transform


def _cft_last(g: np.ndarray, axis: AxisSpec) -> np.ndarray:
    """Continuous-convention transform of the last array axis onto the dual grid."""
    n = axis.n
    sign = np.where(np.arange(n) % 2, -1.0, 1.0)
    post = axis.dx * np.exp(1j * axis.half_width * axis.dual_grid)
    return np.fft.fft(g * sign, axis=-1) * post


def _icft_last(G: np.ndarray, axis: AxisSpec) -> np.ndarray:
    """Inverse of :func:`_cft_last`: (2 pi)^{-1} sum_k G_k exp(i y xi_k) dxi."""
    n = axis.n
    sign = np.where(np.arange(n) % 2, -1.0, 1.0)
    pre = np.exp(-1j * axis.half_width * axis.dual_grid)
    return np.fft.ifft(G * pre, axis=-1) * (n * axis.dxi / (2 * np.pi)) * sign


def fourier(u: SampledSignal, eps: float = EPS_BOUNDARY) -> SampledSignal:
    """Samples of ``int u(x) exp(-i x.xi) dx`` on the dual grid."""
    u.check_boundary(eps, "fourier")
    v = u.values
    for ax in range(u.axis.d):
        v = np.moveaxis(_cft_last(np.moveaxis(v, ax, -1), u.axis), -1, ax)
    return SampledSignal(u.axis.dual(), v, f"F[{u.label}]", {"transform": "fourier"})


def inverse_fourier(U: SampledSignal, axis: AxisSpec | None = None) -> SampledSignal:
    """Inverse of :func:`fourier`; ``U`` lives on the dual of ``axis``."""
    if axis is None:
        axis = AxisSpec(math.pi * U.axis.n / (2 * U.axis.half_width), U.axis.n, U.axis.d)
    if axis.dual() != U.axis:
        raise GridError("spectrum does not live on the dual of the requested axis")
    v = U.values
    for ax in range(axis.d):
        v = np.moveaxis(_icft_last(np.moveaxis(v, ax, -1), axis), -1, ax)
    return SampledSignal(axis, v, f"Finv[{U.label}]")


# ---------------------------------------------------------------------------
# STFT


def _require_1d(u: SampledSignal, what: str):
    if u.axis.d != 1:
        raise GridError(f"{what} is implemented for d = 1 only")


def _window_rows(axis: AxisSpec, window: GaussWindow, rows: np.ndarray) -> np.ndarray:
    """conj(phi(y - x_i)) for the given row indices, wrapped periodically."""
    n = axis.n
    w0 = window(axis.grid)  # centred at index n/2
    j = np.arange(n)
    return w0[(j[None, :] - rows[:, None] + n // 2) % n]


def stft(u: SampledSignal, window: GaussWindow = UNIT_L2, grid: PhaseGrid = FULL) -> PhaseField:
    """V_phi u on the selected phase grid, one FFT per x-slice."""
    _require_1d(u, "stft")
    axis = u.axis
    if window(axis.half_width) > EPS_BOUNDARY * window.constant:
        raise GridError(f"box half-width {axis.half_width:g} too small for the Gaussian window")
    ix = grid.x_indices(axis)
    ik = grid.xi_indices(axis)
    out = np.empty((ix.size, ik.size), dtype=complex)
    for s in range(0, ix.size, CHUNK):
        rows = ix[s : s + CHUNK]
        g = u.values[None, :] * _window_rows(axis, window, rows)
        out[s : s + CHUNK] = _cft_last(g, axis)[:, ik]
    return PhaseField(axis, axis.grid[ix], axis.dual_grid[ik], out, FieldKind.STFT, 1.0, window)


def stft_points(u: SampledSignal, x, xi, window: GaussWindow = UNIT_L2) -> np.ndarray:
    """Direct quadrature of V_phi u at arbitrary phase points (x_m, xi_m)."""
    _require_1d(u, "stft_points")
    axis = u.axis
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    y = axis.grid
    out = np.empty(x.size, dtype=complex)
    step = max(1, (1 << 22) // axis.n)
    two_l = 2 * axis.half_width
    for s in range(0, x.size, step):
        xs, ks = x[s : s + step, None], xi[s : s + step, None]
        d = (y[None, :] - xs + axis.half_width) % two_l - axis.half_width
        ker = np.exp(-1j * y[None, :] * ks) * window(d)
        out[s : s + step] = ker @ u.values * axis.dx
    return out


def moyal_reconstruct(F: PhaseField, window: GaussWindow | None = None) -> SampledSignal:
    """u(y) = (2 pi)^{-1} sum_{x, xi} V(x, xi) exp(i y xi) phi(y - x) dx dxi (full grid only)."""
    if F.kind != FieldKind.STFT:
        raise KindError(f"moyal_reconstruct needs an STFT field, got {F.kind.value}")
    window = window or F.window
    if abs(window.l2_norm - 1.0) > 1e-12:
        raise KindError("moyal_reconstruct needs a unit-L2 window")
    axis = F.axis
    if F.x.size != axis.n or F.xi.size != axis.n:
        raise GridError("moyal_reconstruct needs the full phase grid")
    acc = np.zeros(axis.n, dtype=complex)
    rows_all = np.arange(axis.n)
    for s in range(0, axis.n, CHUNK):
        rows = rows_all[s : s + CHUNK]
        g = _icft_last(F.values[s : s + CHUNK], axis)  # u(y) conj(phi(y - x)) per row
        acc += np.sum(g * _window_rows(axis, window, rows), axis=0)
    return SampledSignal(axis, acc * axis.dx, "moyal")


# ---------------------------------------------------------------------------
# hSTFT


def _enlarge(u: SampledSignal, x_need: float, xi_need: float, max_n: int, h: float) -> SampledSignal:
    """Zero-pad in x and spectrally upsample so the grid covers |x| <= x_need, |xi| <= xi_need."""
    axis = u.axis
    L, n = axis.half_width, axis.n
    # the window must also fit: 9 is where exp(-s^2/2) < 1e-17
    L_new = max(L, x_need + 9.0)
    dx_new = min(axis.dx, math.pi / xi_need) if xi_need > 0 else axis.dx
    n_new = 1 << max(4, math.ceil(math.log2(2 * L_new / dx_new - 1e-9)))
    if n_new > max_n:
        raise RegionTooLarge(h)
    if L_new > L:
        u.check_boundary(EPS_BOUNDARY, "hstft enlargement")
        # grow the box in whole samples of the old step
        pad = math.ceil((L_new - L) / axis.dx)
        m = n + 2 * pad
        m2 = 1 << math.ceil(math.log2(m))
        pad = (m2 - n) // 2
        vals = np.pad(u.values, (pad, m2 - n - pad))
        u = SampledSignal(AxisSpec(L + pad * axis.dx, m2), vals, u.label, u.meta)
    if u.axis.n < n_new and u.axis.dx > math.pi / max(xi_need, 1e-300):
        u = spectral_resample(u, u.axis.n * (1 << math.ceil(math.log2(u.axis.dx * xi_need / math.pi))))
    if u.axis.n > max_n:
        raise RegionTooLarge(h)
    return u


def spectral_resample(u: SampledSignal, n_new: int) -> SampledSignal:
    """Trigonometric interpolation of u onto ``n_new >= n`` samples of the same box."""
    n = u.axis.n
    if n_new < n:
        raise GridError("spectral_resample only refines the grid")
    U = np.fft.fftshift(np.fft.fft(u.values))
    pad = (n_new - n) // 2
    U2 = np.zeros(n_new, dtype=complex)
    U2[pad : pad + n] = U
    if n_new > n:
        # split the Nyquist bin symmetrically so real input stays real
        U2[pad] *= 0.5
        U2[pad + n] = U2[pad]
    vals = np.fft.ifft(np.fft.ifftshift(U2)) * (n_new / n)
    return SampledSignal(AxisSpec(u.axis.half_width, n_new, u.axis.d), vals, u.label, u.meta)


def hstft(
    u: SampledSignal,
    h: float,
    region: PhaseGrid | None = None,
    window: GaussWindow = UNIT_L2,
    max_n: int = MAX_N,
) -> PhaseField:
    """T_h u(x, xi) = (2 pi)^{-1/2} h^{-1} exp(i x xi / h^2) V_phi u(x/h, xi/h).

    Sampled at the h-scaled STFT points (h x_j, h xi_k). ``region`` bounds are
    in the scaled coordinates; when the dilated region leaves the grid the STFT
    is recomputed on an enlarged grid (zero padding and spectral upsampling).
    """
    if not 0 < h <= 1:
        raise ValueError(f"h must be in (0, 1], got {h}")
    _require_1d(u, "hstft")
    region = region or FULL
    x_need = (region.x_max / h) if region.x_max is not None else 0.0
    xi_need = (region.xi_max / h) if region.xi_max is not None else 0.0
    if x_need > u.axis.half_width or xi_need > u.axis.xi_max:
        u = _enlarge(u, x_need, xi_need, max_n, h)
    sel = PhaseGrid(
        region.x_stride,
        region.xi_stride,
        None if region.x_max is None else region.x_max / h,
        None if region.xi_max is None else region.xi_max / h,
    )
    V = stft(u, window, sel)
    phase = np.exp(1j * np.outer(V.x, V.xi))
    vals = V.values * phase / (math.sqrt(2 * math.pi) * h)
    return PhaseField(u.axis, h * V.x, h * V.xi, vals, FieldKind.HSTFT, h, window, V.cell * h * h)


def hstft_points(u: SampledSignal, h: float, x, xi, window: GaussWindow = UNIT_L2) -> np.ndarray:
    """T_h u at arbitrary phase points by direct quadrature."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    V = stft_points(u, x / h, xi / h, window)
    return V * np.exp(1j * x * xi / h**2) / (math.sqrt(2 * math.pi) * h)


# ---------------------------------------------------------------------------
# Wigner distribution


def wigner(f: SampledSignal, g: SampledSignal | None = None, eps: float = EPS_BOUNDARY) -> PhaseField:
    """W(f, g)(x, xi) = int f(x + y/2) conj(g(x - y/2)) exp(-i y xi) dy on the full grid.

    Half-step samples come from spectral upsampling by two; the y-integral is an
    FFT over y_j = j dx with periodic wrap.
    """
    g = f if g is None else g
    if f.axis != g.axis:
        raise GridError("wigner needs signals on a shared axis")
    _require_1d(f, "wigner")
    f.check_boundary(eps, "wigner")
    if g is not f:
        g.check_boundary(eps, "wigner")
    axis = f.axis
    n = axis.n
    f2 = spectral_resample(f, 2 * n).values
    g2 = f2 if g is f else spectral_resample(g, 2 * n).values
    j = np.arange(n)
    sign = np.where(j % 2, -1.0, 1.0)
    # signed lag index; exp(-i y xi_k) is n-periodic in j on the dual grid
    j = np.where(j < n // 2, j, j - n)
    out = np.empty((n, n), dtype=complex)
    for s in range(0, n, CHUNK):
        i = np.arange(s, min(n, s + CHUNK))[:, None]
        c = f2[(2 * i + j) % (2 * n)] * np.conj(g2[(2 * i - j) % (2 * n)])
        out[s : s + CHUNK] = np.fft.fft(c * sign, axis=-1) * axis.dx
    return PhaseField(axis, axis.grid, axis.dual_grid, out, FieldKind.WIGNER, 1.0, None)
