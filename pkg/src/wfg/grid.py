"""Grids, quadrature, Schwartz seminorms, conic geometry and decay fits."""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasWarning, EmptyShell, GridError, InvalidSignal

# aliasing guard, relative to max|u|
EPS_BOUNDARY = 1e-8


@dataclass(frozen=True)
class AxisSpec:
    """Uniform grid ``x_j = -L + j*dx`` on ``[-L, L)^d`` with ``dx = 2L/n``."""

    half_width: float
    n: int
    d: int = 1

    def __post_init__(self):
        if not self.half_width > 0:
            raise GridError(f"half_width must be positive, got {self.half_width}")
        if self.n < 16 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two >= 16, got {self.n}")
        if self.d not in (1, 2):
            raise GridError(f"only d in (1, 2) is supported, got {self.d}")

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def xi_max(self) -> float:
        return math.pi / self.dx

    @property
    def dxi(self) -> float:
        return math.pi / self.half_width

    @property
    def grid(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    @property
    def dual_grid(self) -> np.ndarray:
        return -self.xi_max + self.dxi * np.arange(self.n)

    @property
    def cell(self) -> float:
        return self.dx**self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    def dual(self) -> "AxisSpec":
        """Axis on which Fourier transforms of signals on this axis live."""
        return AxisSpec(self.xi_max, self.n, self.d)

    def mesh(self) -> list[np.ndarray]:
        g = self.grid
        if self.d == 1:
            return [g]
        return list(np.meshgrid(g, g, indexing="ij"))

    def to_dict(self) -> dict:
        return {"L": self.half_width, "n": self.n, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "AxisSpec":
        return cls(float(data["L"]), int(data["n"]), int(data.get("d", 1)))


@dataclass
class SampledSignal:
    axis: AxisSpec
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size == self.axis.n**self.axis.d and v.shape != self.axis.shape:
            v = v.reshape(self.axis.shape)
        if v.shape != self.axis.shape:
            raise InvalidSignal(f"values of shape {v.shape} do not match axis {self.axis.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidSignal(f"signal {self.label!r} has non-finite samples")
        self.values = v

    @property
    def boundary_mass(self) -> float:
        """max |u| over the grid faces |x_i| = L (first and last sample per axis)."""
        v = np.abs(self.values)
        faces = []
        for ax in range(self.axis.d):
            faces.append(np.take(v, 0, axis=ax).max())
            faces.append(np.take(v, -1, axis=ax).max())
        return float(max(faces))

    @property
    def boundary_ratio(self) -> float:
        peak = float(np.abs(self.values).max())
        return 0.0 if peak == 0.0 else self.boundary_mass / peak

    def aliasing_ok(self, eps: float = EPS_BOUNDARY) -> bool:
        return self.boundary_ratio <= eps

    def check_boundary(self, eps: float = EPS_BOUNDARY, what: str = "operation") -> bool:
        if self.aliasing_ok(eps):
            return True
        warnings.warn(
            f"{what}: boundary mass of {self.label or 'signal'} is "
            f"{self.boundary_ratio:.2e} of its peak (guard {eps:.0e})",
            AliasWarning,
            stacklevel=3,
        )
        return False

    def with_values(self, values, label=None, **meta) -> "SampledSignal":
        new_meta = dict(self.meta)
        new_meta.update(meta)
        return SampledSignal(self.axis, values, self.label if label is None else label, new_meta)

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        if other.axis != self.axis:
            raise GridError("cannot add signals on different axes")
        return SampledSignal(self.axis, self.values + other.values, f"{self.label}+{other.label}")

    def __mul__(self, c) -> "SampledSignal":
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def l2_norm(u: SampledSignal) -> float:
    return math.sqrt(float(np.sum(np.abs(u.values) ** 2)) * u.axis.cell)


def inner(u: SampledSignal, v: SampledSignal) -> complex:
    """L^2 inner product, conjugate linear in the second slot."""
    if u.axis != v.axis:
        raise GridError("inner product of signals on different axes")
    return complex(np.vdot(v.values, u.values) * u.axis.cell)


def wavenumbers(axis: AxisSpec) -> np.ndarray:
    """Angular frequencies in numpy FFT order."""
    return 2.0 * np.pi * np.fft.fftfreq(axis.n, d=axis.dx)


def spectral_derivative(values: np.ndarray, axis: AxisSpec, alpha) -> np.ndarray:
    """``partial^alpha`` of periodic samples by FFT multiplication with ``(i xi)^alpha``.

    The unpaired Nyquist mode is dropped for odd orders so real input stays real.
    """
    alpha = tuple(alpha) if np.iterable(alpha) else (int(alpha),)
    if not any(alpha):
        return np.asarray(values, dtype=complex)
    U = np.fft.fftn(values)
    k = wavenumbers(axis)
    for ax, a in enumerate(alpha):
        if a == 0:
            continue
        mult = (1j * k) ** a
        if a % 2:
            mult[axis.n // 2] = 0.0
        shape = [1] * axis.d
        shape[ax] = axis.n
        U = U * mult.reshape(shape)
    return np.fft.ifftn(U)


def multi_indices(order: int, d: int):
    """All multi-indices alpha in N^d with |alpha| <= order, sorted by total degree."""
    out = [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) <= order]
    return sorted(out, key=lambda a: (sum(a), a))


def schwartz_seminorm(u: SampledSignal, m: int, k: int, eps: float = EPS_BOUNDARY) -> float:
    """sum_{|alpha| <= m} sup_y <y>^k |d^alpha u(y)| on the grid."""
    if m < 0 or k < 0:
        raise ValueError("m and k must be non-negative")
    u.check_boundary(eps, "schwartz_seminorm")
    r2 = sum(c**2 for c in u.axis.mesh())
    weight = (1.0 + r2) ** (k / 2.0)
    total = 0.0
    for alpha in multi_indices(m, u.axis.d):
        if any(alpha):
            du = spectral_derivative(u.values, u.axis, alpha)
        else:
            du = u.values
        total += float(np.max(weight * np.abs(du)))
    return total


# ---------------------------------------------------------------------------
# conic geometry


@dataclass(frozen=True)
class Direction:
    w: tuple

    def __post_init__(self):
        w = tuple(float(c) for c in self.w)
        nrm = math.sqrt(sum(c * c for c in w))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"direction {w} is not a unit vector (norm {nrm})")
        object.__setattr__(self, "w", w)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("zero vector has no direction")
        return cls(tuple(v / nrm))

    @classmethod
    def from_angle(cls, degrees: float) -> "Direction":
        t = math.radians(degrees)
        return cls((math.cos(t), math.sin(t)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.w)

    @property
    def angle_deg(self) -> float:
        """Polar angle in [0, 360) for phase-space dimension 2."""
        if len(self.w) != 2:
            raise ValueError("polar angle only defined in R^2")
        return math.degrees(math.atan2(self.w[1], self.w[0])) % 360.0


def angle_between(a, b) -> float:
    """Angle in radians between two nonzero vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.acos(min(1.0, max(-1.0, c)))


def angular_gap_deg(a_deg: float, b_deg: float) -> float:
    d = abs(a_deg - b_deg) % 360.0
    return min(d, 360.0 - d)


def sphere_directions(count: int, offset_deg: float = 0.0) -> list[Direction]:
    """``count`` equally spaced directions on the unit circle of R^2."""
    return [Direction.from_angle(offset_deg + 360.0 * i / count) for i in range(count)]


@dataclass(frozen=True)
class ConicRegion:
    cones: tuple = ()

    def __post_init__(self):
        cones = tuple((c if isinstance(c, Direction) else Direction(tuple(c)), float(t)) for c, t in self.cones)
        for _, theta in cones:
            if not 0.0 < theta < math.pi / 2:
                raise ValueError(f"cone half-angle {theta} outside (0, pi/2)")
        object.__setattr__(self, "cones", cones)

    def __len__(self):
        return len(self.cones)

    @property
    def is_empty(self) -> bool:
        return not self.cones

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        if not np.any(z):
            return False
        return any(angle_between(z, w.array) <= theta for w, theta in self.cones)

    def distance_deg(self, z) -> float:
        """Angle from z to the region (0 inside); inf for the empty region."""
        if not self.cones:
            return math.inf
        gaps = [math.degrees(max(0.0, angle_between(z, w.array) - theta)) for w, theta in self.cones]
        return min(gaps)

    def to_list(self) -> list:
        return [{"w": list(w.w), "theta": theta} for w, theta in self.cones]

    @classmethod
    def from_list(cls, data) -> "ConicRegion":
        return cls(tuple((Direction(tuple(c["w"])), float(c["theta"])) for c in data))


# ---------------------------------------------------------------------------
# shells


def geometric_radii(r_min: float = 4.0, rho: float = 1.25, r_max: float = 40.0) -> np.ndarray:
    """Shell edges r_min * rho^i with every full shell inside r_max."""
    if r_max < r_min * rho:
        return np.array([r_min])
    count = int(math.floor(math.log(r_max / r_min) / math.log(rho) + 1e-12))
    return r_min * rho ** np.arange(count + 1)


def _edges(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a non-empty 1-d list")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    ratio = radii[-1] / radii[-2] if radii.size > 1 else 1.25
    return np.append(radii, radii[-1] * ratio)


def cone_mask(px, pxi, w: Direction, theta: float, r=None) -> np.ndarray:
    if r is None:
        r = np.hypot(px, pxi)
    dot = px * w.w[0] + pxi * w.w[1]
    return (dot >= r * math.cos(theta)) & (r > 0)


class PolarIndex:
    """Phase points of a 2-d field sorted by polar angle, for fast cone queries."""

    def __init__(self, px, pxi, mag, r_lo: float = 0.0, r_hi: float = math.inf):
        px = np.asarray(px, dtype=float).ravel()
        pxi = np.asarray(pxi, dtype=float).ravel()
        mag = np.asarray(mag, dtype=float).ravel()
        r = np.hypot(px, pxi)
        keep = (r > 0) & (r >= r_lo) & (r < r_hi)
        px, pxi, mag, r = px[keep], pxi[keep], mag[keep], r[keep]
        ang = np.arctan2(pxi, px) % (2 * math.pi)
        order = np.argsort(ang, kind="stable")
        self.px, self.pxi, self.mag, self.r, self.ang = px[order], pxi[order], mag[order], r[order], ang[order]

    def __len__(self):
        return self.r.size

    def cone(self, w: Direction, theta: float) -> np.ndarray:
        """Indices of points z with angle(z, w) <= theta."""
        phi = math.atan2(w.w[1], w.w[0]) % (2 * math.pi)
        pad = theta + 1e-9
        lo, hi = phi - pad, phi + pad
        spans = []
        for a, b in ((lo, hi), (lo + 2 * math.pi, hi + 2 * math.pi), (lo - 2 * math.pi, hi - 2 * math.pi)):
            a, b = max(a, 0.0), min(b, 2 * math.pi)
            if a < b:
                i0, i1 = np.searchsorted(self.ang, [a, b])
                spans.append(np.arange(i0, i1))
        idx = np.concatenate(spans) if spans else np.zeros(0, dtype=int)
        dot = self.px[idx] * w.w[0] + self.pxi[idx] * w.w[1]
        return idx[dot >= self.r[idx] * math.cos(theta)]

    def shell_sups(self, w: Direction, theta: float, radii):
        """Per-shell sup of the magnitudes in cone(w, theta) and the point count per shell."""
        edges = _edges(radii)
        idx = self.cone(w, theta)
        rs = self.r[idx]
        sel = (rs >= edges[0]) & (rs < edges[-1])
        rs, vs = rs[sel], self.mag[idx][sel]
        shell = np.searchsorted(edges, rs, side="right") - 1
        nshell = edges.size - 1
        sups = np.zeros(nshell)
        counts = np.bincount(shell, minlength=nshell)[:nshell]
        if vs.size:
            np.maximum.at(sups, shell, vs)
        return sups, counts


def shell_scan(px, pxi, mag, w: Direction, theta: float, radii):
    """Per-shell sup of ``mag`` over cone(w, theta) and the point count per shell.

    Shell i is ``radii[i] <= |z| < radii[i+1]``; the last shell continues the
    geometric ratio of the final two radii.
    """
    return PolarIndex(px, pxi, mag).shell_sups(w, theta, radii)


def shell_supremum(F, w: Direction, theta: float, radii, min_points: int = 4) -> list[float]:
    """sup |F| over {angle(z, w) <= theta, r_i <= |z| < r_{i+1}} for every shell.

    ``F`` is a PhaseField (anything with a ``polar()`` index or ``points()``).
    """
    index = F.polar() if hasattr(F, "polar") else PolarIndex(*F.points())
    sups, counts = index.shell_sups(w, theta, radii)
    for i, c in enumerate(counts):
        if c < min_points:
            raise EmptyShell(i, float(np.asarray(radii)[i]))
    return [float(s) for s in sups]


# ---------------------------------------------------------------------------
# decay fits


class DecayClass(str, enum.Enum):
    RAPID = "RAPID"
    SLOW = "SLOW"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class FitParams:
    n_thr: float = 5.0
    q_min: float = 0.9
    min_points: int = 4
    # regression uses the last `window` usable points (tail slope)
    window: int = 5
    # spread (in e-folds) below which log-sups count as flat, not as noise
    noise_scale: float = 1.0
    # fit the running sup over everything further out (exterior envelope)
    envelope: bool = True

    def to_dict(self) -> dict:
        return {
            "n_thr": self.n_thr,
            "q_min": self.q_min,
            "min_points": self.min_points,
            "window": self.window,
            "noise_scale": self.noise_scale,
            "envelope": self.envelope,
        }


@dataclass
class DecayFit:
    abscissae: list
    sup_values: list
    fitted_order: float
    r_squared: float
    classification: DecayClass
    variable: str = "radius"
    n_used: int = 0
    floor_hit: bool = False

    def __post_init__(self):
        a = np.asarray(self.abscissae, dtype=float)
        if a.size > 1:
            da = np.diff(a)
            if not (np.all(da > 0) or np.all(da < 0)):
                raise ValueError("abscissae must be strictly monotone")

    def to_dict(self) -> dict:
        return {
            "abscissae": [float(a) for a in self.abscissae],
            "sups": [float(s) for s in self.sup_values],
            "order": _enc(self.fitted_order),
            "r2": _enc(self.r_squared),
            "class": self.classification.value,
            "variable": self.variable,
            "n_used": self.n_used,
            "floor_hit": self.floor_hit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecayFit":
        return cls(
            list(data["abscissae"]),
            list(data["sups"]),
            _dec(data["order"]),
            _dec(data["r2"]),
            DecayClass(data["class"]),
            data.get("variable", "radius"),
            int(data.get("n_used", 0)),
            bool(data.get("floor_hit", False)),
        )


def _enc(x: float):
    if math.isfinite(x):
        return float(x)
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _dec(x) -> float:
    return float(x)


def fit_decay(abscissae, sups, variable: str = "radius", floor: float = 0.0, params: FitParams = FitParams()) -> DecayFit:
    """Log-log decay fit of sup values.

    ``variable='radius'``: order is the slope of -log sup against log r.
    ``variable='h'``: abscissae are dilation parameters and the order is the
    slope against log(1/h), so sup ~ h^N gives order N.

    Points are taken in order of increasing log-abscissa. With
    ``params.envelope`` each value is first replaced by the largest value at
    or beyond it (sup over the rest of the cone), which decays at the same
    rate but has no dips between isolated peaks. The sequence is cut
    at the first value at or below ``floor``; that point enters the fit with
    value ``floor`` (an upper bound). A sequence at the floor from the start
    is RAPID by convention (zero field). A sequence that reaches the floor
    before ``min_points`` values is RAPID when the mean slope from its first
    value down to the floor already exceeds ``n_thr``.
    """
    a = np.asarray(abscissae, dtype=float)
    s = np.asarray(sups, dtype=float)
    if a.shape != s.shape:
        raise ValueError("abscissae and sups differ in length")
    if variable not in ("radius", "h"):
        raise ValueError(f"unknown fit variable {variable!r}")
    t = np.log(a) if variable == "radius" else -np.log(a)
    order_idx = np.argsort(t)
    t, s_sorted = t[order_idx], s[order_idx]
    if params.envelope:
        s_sorted = np.maximum.accumulate(s_sorted[::-1])[::-1]
    fl = max(float(floor), 1e-300)

    ts, ys = [], []
    floor_hit = False
    for ti, si in zip(t, s_sorted):
        if si <= fl:
            ts.append(ti)
            ys.append(-math.log(fl))
            floor_hit = True
            break
        ts.append(ti)
        ys.append(-math.log(si))

    make = lambda order, q, cls, used: DecayFit(  # noqa: E731
        list(map(float, a)), list(map(float, s)), order, q, cls, variable, used, floor_hit
    )
    if floor_hit and len(ts) == 1:
        return make(math.inf, 1.0, DecayClass.RAPID, 1)
    if len(ts) < params.min_points:
        if floor_hit:
            # the drop from the first sup to the floor bounds the mean order from below
            bound = (ys[-1] - ys[0]) / (ts[-1] - ts[0])
            if bound >= params.n_thr:
                return make(float(bound), 1.0, DecayClass.RAPID, len(ts))
        order = _slope(ts, ys)[0] if len(ts) >= 2 else math.nan
        return make(order, 0.0, DecayClass.INDETERMINATE, len(ts))

    w = max(params.min_points, params.window)
    tw, yw = np.asarray(ts[-w:]), np.asarray(ys[-w:])
    order, q = _slope(tw, yw, params.noise_scale)
    if q < params.q_min:
        cls = DecayClass.INDETERMINATE
    elif order >= params.n_thr:
        cls = DecayClass.RAPID
    else:
        cls = DecayClass.SLOW
    return make(order, q, cls, len(tw))


def _slope(t, y, noise_scale: float = 0.0):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tc = t - t.mean()
    yc = y - y.mean()
    slope = float(np.dot(tc, yc) / np.dot(tc, tc))
    res = yc - slope * tc
    ss_res = float(np.dot(res, res))
    ss_tot = max(float(np.dot(yc, yc)), t.size * noise_scale**2)
    q = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, q
