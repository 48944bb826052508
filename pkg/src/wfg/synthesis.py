"""Test signals: prescribed wave front sets, coherent states and the standard corpus."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridError, OutOfBox
from .grid import AxisSpec, Direction, SampledSignal

# Gaussian factors are negligible (< 4e-6) five standard deviations out
MARGIN = 5.0


def _split(w, d: int):
    w = np.asarray(w.w if isinstance(w, Direction) else w, dtype=float)
    if w.size != 2 * d:
        raise ValueError(f"phase-space vector of length {w.size} for d={d}")
    return w[:d], w[d:]


def synth_fk(y, eta, k: int, axis: AxisSpec) -> SampledSignal:
    """f_k(x) = exp(-|x - k^2 y|^2 / 2 + i k^2 x.eta)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (np.any(y) or np.any(eta)):
        raise ValueError("(y, eta) must be nonzero")
    k2 = k * k
    if k2 * np.linalg.norm(y) + MARGIN > axis.half_width:
        raise OutOfBox(f"f_{k} centre {k2 * np.linalg.norm(y):g} + {MARGIN:g} escapes box L={axis.half_width:g}")
    if k2 * np.linalg.norm(eta) + MARGIN > axis.xi_max:
        raise OutOfBox(f"f_{k} frequency {k2 * np.linalg.norm(eta):g} + {MARGIN:g} beyond Nyquist {axis.xi_max:g}")
    mesh = axis.mesh()
    r2 = sum((c - k2 * yc) ** 2 for c, yc in zip(mesh, y))
    phase = sum(c * ec for c, ec in zip(mesh, eta)) * k2
    vals = np.exp(-0.5 * r2 + 1j * phase)
    return SampledSignal(axis, vals, f"f_{k}", {"y": y.tolist(), "eta": eta.tolist(), "k": k})


def valid_radius(k_max: int) -> float:
    return 0.8 * (k_max - 1) ** 2


def max_k(axis: AxisSpec, w: Direction | None = None) -> int:
    """Largest k for which f_k(.; w) fits the box (every unit w if w is None)."""
    if w is None:
        reach = min(axis.half_width, axis.xi_max) - MARGIN
    else:
        y, eta = _split(w, axis.d)
        ny, ne = np.linalg.norm(y), np.linalg.norm(eta)
        reach = min((axis.half_width - MARGIN) / ny if ny else math.inf, (axis.xi_max - MARGIN) / ne if ne else math.inf)
    return int(math.floor(math.sqrt(max(reach, 0.0))))


@dataclass(frozen=True)
class PrescribedSpec:
    directions: tuple
    axis: AxisSpec
    K_max: int
    J_max: int | None = None

    def __post_init__(self):
        dirs = tuple(d if isinstance(d, Direction) else Direction(tuple(d)) for d in self.directions)
        object.__setattr__(self, "directions", dirs)
        if self.J_max is None:
            object.__setattr__(self, "J_max", max(1, len(dirs)))
        if self.J_max < 1:
            raise ConfigError("J_max must be >= 1")
        if self.K_max < 2:
            raise ConfigError("K_max must be >= 2")
        for d in dirs:
            if len(d.w) != 2 * self.axis.d:
                raise ConfigError(f"direction {d.w} does not live in R^{2 * self.axis.d}")

    @property
    def valid_radius(self) -> float:
        return valid_radius(self.K_max)

    @classmethod
    def from_angles(cls, angles_deg, axis: AxisSpec, K_max: int | None = None, J_max: int | None = None):
        dirs = tuple(Direction.from_angle(a) for a in angles_deg)
        if K_max is None:
            K_max = min((max_k(axis, d) for d in dirs), default=max_k(axis))
        return cls(dirs, axis, K_max, J_max)


def synth_prescribed(spec: PrescribedSpec) -> SampledSignal:
    """u = sum_{j < J_max} 2^{-j} sum_{k=1}^{K_max} f_k(.; w_j)."""
    axis = spec.axis
    meta = {
        "J_max": spec.J_max,
        "K_max": spec.K_max,
        "valid_radius": spec.valid_radius,
        "prescribed": [list(d.w) for d in spec.directions],
    }
    vals = np.zeros(axis.shape, dtype=complex)
    if not spec.directions:
        warnings.warn("no prescribed directions: returning the zero signal", UserWarning, stacklevel=2)
        return SampledSignal(axis, vals, "prescribed[]", meta)
    for j, w in enumerate(spec.directions[: spec.J_max]):
        y, eta = _split(w, axis.d)
        for k in range(1, spec.K_max + 1):
            vals += 2.0**-j * synth_fk(y, eta, k, axis).values
    angles = ",".join(f"{d.angle_deg:g}" for d in spec.directions) if axis.d == 1 else str(len(spec.directions))
    return SampledSignal(axis, vals, f"prescribed[{angles}]", meta)


@dataclass(frozen=True)
class CoherentStateSpec:
    x0: tuple
    xi0: tuple
    h: float = 1.0

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise ValueError(f"h must be in (0, 1], got {self.h}")
        object.__setattr__(self, "x0", tuple(np.atleast_1d(np.asarray(self.x0, dtype=float))))
        object.__setattr__(self, "xi0", tuple(np.atleast_1d(np.asarray(self.xi0, dtype=float))))


def coherent_state(spec: CoherentStateSpec, axis: AxisSpec) -> SampledSignal:
    """phi(y - x0/h) exp(i y.xi0/h) with the plain Gaussian phi(y) = exp(-|y|^2/2)."""
    c = np.asarray(spec.x0) / spec.h
    f = np.asarray(spec.xi0) / spec.h
    if c.size != axis.d or f.size != axis.d:
        raise ValueError("coherent state centre has the wrong dimension")
    if np.linalg.norm(c) + MARGIN > axis.half_width:
        raise OutOfBox(f"coherent state centre x0/h={np.linalg.norm(c):g} too close to the box edge")
    if np.linalg.norm(f) + MARGIN > axis.xi_max:
        raise OutOfBox(f"coherent state frequency xi0/h={np.linalg.norm(f):g} too close to Nyquist")
    mesh = axis.mesh()
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    phase = sum(m * fi for m, fi in zip(mesh, f))
    return SampledSignal(axis, np.exp(-0.5 * r2 + 1j * phase), "coherent", {"x0": spec.x0, "xi0": spec.xi0, "h": spec.h})


# ---------------------------------------------------------------------------
# standard corpus


class SignalKind(str, enum.Enum):
    GAUSSIAN = "GAUSSIAN"
    HERMITE = "HERMITE"
    CHIRP = "CHIRP"
    PLANE_WAVE = "PLANE_WAVE"
    NARROW_GAUSS = "NARROW_GAUSS"
    PRESCRIBED = "PRESCRIBED"


def hermite_function(n: int, x: np.ndarray) -> np.ndarray:
    """L2-normalized Hermite function h_n via the stable three-term recurrence."""
    prev = np.zeros_like(x)
    cur = math.pi**-0.25 * np.exp(-0.5 * x * x)
    for m in range(n):
        prev, cur = cur, math.sqrt(2.0 / (m + 1)) * x * cur - math.sqrt(m / (m + 1)) * prev
    return cur


def standard_signal(kind, params: dict | None = None, axis: AxisSpec | None = None) -> SampledSignal:
    """Closed-form corpus members.

    GAUSSIAN: pi^{-d/4} exp(-|x|^2/2). HERMITE(n): tensor Hermite function.
    CHIRP(c): exp(i c |x|^2 / 2), no taper. PLANE_WAVE(xi0): exp(i x.xi0).
    NARROW_GAUSS(sigma): unit-mass Gaussian of width sigma (delta surrogate,
    default sigma = dx). PRESCRIBED(angles, K_max): see synth_prescribed.
    """
    try:
        kind = kind if isinstance(kind, SignalKind) else SignalKind(str(kind).upper())
    except ValueError:
        raise ConfigError(f"unknown signal kind {kind!r}") from None
    params = dict(params or {})
    if axis is None:
        raise ConfigError("standard_signal needs an axis")
    mesh = axis.mesh()
    r2 = sum(c * c for c in mesh)
    meta: dict = {"kind": kind.value, "params": params}
    if kind is SignalKind.GAUSSIAN:
        vals = math.pi ** (-axis.d / 4) * np.exp(-0.5 * r2)
        label = "gaussian"
    elif kind is SignalKind.HERMITE:
        order = int(params.get("n", 3))
        vals = np.ones(axis.shape)
        for c in mesh:
            vals = vals * hermite_function(order, c)
        label = f"hermite{order}"
    elif kind is SignalKind.CHIRP:
        c = float(params.get("c", 1.0))
        if abs(c) * axis.half_width > axis.xi_max:
            raise GridError(f"chirp rate {c:g} aliases on this grid (|c| L > xi_max)")
        vals = np.exp(0.5j * c * r2)
        label = f"chirp{c:g}"
        meta["non_decaying"] = True
    elif kind is SignalKind.PLANE_WAVE:
        xi0 = np.atleast_1d(np.asarray(params.get("xi0", 0.0), dtype=float))
        if xi0.size == 1:
            xi0 = np.repeat(xi0, axis.d)
        vals = np.exp(1j * sum(c * f for c, f in zip(mesh, xi0)))
        label = "plane" + ",".join(f"{f:g}" for f in xi0)
        meta["non_decaying"] = True
    elif kind is SignalKind.NARROW_GAUSS:
        sigma = float(params.get("sigma", axis.dx))
        vals = (2 * math.pi * sigma**2) ** (-axis.d / 2) * np.exp(-0.5 * r2 / sigma**2)
        label = f"narrow{sigma:.3g}"
    else:
        spec = PrescribedSpec.from_angles(params.get("angles", [0.0]), axis, params.get("K_max"), params.get("J_max"))
        u = synth_prescribed(spec)
        u.meta.update(meta)
        return u
    return SampledSignal(axis, vals, label, meta)


CORPUS = (
    ("GAUSSIAN", {}),
    ("HERMITE", {"n": 3}),
    ("CHIRP", {"c": 1.0}),
    ("PLANE_WAVE", {"xi0": 0.0}),
    ("NARROW_GAUSS", {}),
    ("PRESCRIBED", {"angles": [0.0, 90.0]}),
)


def corpus(axis: AxisSpec, members=CORPUS) -> list[SampledSignal]:
    """The six standard test signals on ``axis``."""
    return [standard_signal(k, p, axis) for k, p in members]

