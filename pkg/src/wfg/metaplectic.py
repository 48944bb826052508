"""Linear symplectic maps and their metaplectic (unitary) implementations.

Words are products of three generators acting on phase space (x, xi):

* FOURIER     (x, xi) -> (xi, -x)
* CHIRP(c)    (x, xi) -> (x, xi + c x)
* DILATE(l)   (x, xi) -> (l x, xi / l)

A word ``[g1, g2, ...]`` applies g1 first. For d > 1 every generator acts
on all coordinates at once (tensor product of the d = 1 generators).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import czt

from .errors import ConfigError, OutOfBox
from .grid import EPS_BOUNDARY, AxisSpec, ConicRegion, Direction, SampledSignal, l2_norm
from .transforms import fourier

# fraction of the Nyquist frequency a chirped signal may reach
CHIRP_NYQUIST_FRAC = 0.8
# relative L2 energy a dilation may push outside the box or band
DILATE_LOSS = 1e-13


class Generator(str, enum.Enum):
    FOURIER = "fourier"
    CHIRP = "chirp"
    DILATE = "dilate"


@dataclass(frozen=True)
class Step:
    kind: Generator
    value: float = 0.0

    def __post_init__(self):
        if self.kind is Generator.DILATE and not self.value > 0:
            raise ConfigError(f"dilation factor must be positive, got {self.value}")
        if not math.isfinite(self.value):
            raise ConfigError("generator parameter must be finite")

    def matrix(self, d: int = 1) -> np.ndarray:
        eye = np.eye(d)
        zero = np.zeros((d, d))
        if self.kind is Generator.FOURIER:
            return np.block([[zero, eye], [-eye, zero]])
        if self.kind is Generator.CHIRP:
            return np.block([[eye, zero], [self.value * eye, eye]])
        lam = self.value
        return np.block([[lam * eye, zero], [zero, eye / lam]])

    def to_json(self):
        return "fourier" if self.kind is Generator.FOURIER else {self.kind.value: self.value}


def _step(item) -> Step:
    if isinstance(item, Step):
        return item
    if isinstance(item, str):
        if item.lower() != "fourier":
            raise ConfigError(f"generator {item!r} needs a parameter")
        return Step(Generator.FOURIER)
    if isinstance(item, dict) and len(item) == 1:
        (key, val), = item.items()
        try:
            kind = Generator(str(key).lower())
        except ValueError:
            raise ConfigError(f"unknown generator {key!r}") from None
        if kind is Generator.FOURIER:
            return Step(kind)
        return Step(kind, float(val))
    if isinstance(item, (tuple, list)) and len(item) in (1, 2):
        return _step({item[0]: item[1] if len(item) == 2 else 0.0})
    raise ConfigError(f"cannot parse generator {item!r}")


@dataclass(frozen=True)
class SymplecticWord:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(_step(s) for s in self.steps))

    @classmethod
    def parse(cls, data) -> "SymplecticWord":
        """From the config syntax ``["fourier", {"chirp": 1.0}, {"dilate": 2.0}]``."""
        if isinstance(data, SymplecticWord):
            return data
        if not isinstance(data, (list, tuple)):
            raise ConfigError("a symplectic word is a list of generators")
        return cls(tuple(data))

    @classmethod
    def fourier(cls) -> "SymplecticWord":
        return cls((Step(Generator.FOURIER),))

    @classmethod
    def chirp(cls, c: float) -> "SymplecticWord":
        return cls((Step(Generator.CHIRP, c),))

    @classmethod
    def dilate(cls, lam: float) -> "SymplecticWord":
        return cls((Step(Generator.DILATE, lam),))

    def __add__(self, other: "SymplecticWord") -> "SymplecticWord":
        return SymplecticWord(self.steps + other.steps)

    def __len__(self):
        return len(self.steps)

    def matrix(self, d: int = 1) -> np.ndarray:
        chi = np.eye(2 * d)
        for s in self.steps:
            chi = s.matrix(d) @ chi
        return chi

    def to_list(self) -> list:
        return [s.to_json() for s in self.steps]


def symplectic_form(d: int = 1) -> np.ndarray:
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, eye], [-eye, zero]])


def is_symplectic(chi, tol: float = 1e-12) -> bool:
    chi = np.asarray(chi, dtype=float)
    J = symplectic_form(chi.shape[0] // 2)
    return bool(np.max(np.abs(chi.T @ J @ chi - J)) <= tol)


# ---------------------------------------------------------------------------
# unitary implementations


def _fourier_unitary(u: SampledSignal) -> SampledSignal:
    d = u.axis.d
    v = fourier(u)
    return v.with_values(v.values * (2 * math.pi) ** (-d / 2))


def _chirp_unitary(u: SampledSignal, c: float) -> SampledSignal:
    axis = u.axis
    if abs(c) * axis.half_width > CHIRP_NYQUIST_FRAC * axis.xi_max:
        raise OutOfBox(
            f"chirp rate {c:g} on L={axis.half_width:g} exceeds {CHIRP_NYQUIST_FRAC:g} of Nyquist {axis.xi_max:g}"
        )
    r2 = sum(m * m for m in axis.mesh())
    return u.with_values(u.values * np.exp(0.5j * c * r2))


def _energy_outside(values: np.ndarray, coord: np.ndarray, limit: float) -> float:
    mask = np.abs(coord) > limit
    tot = float(np.sum(np.abs(values) ** 2))
    return float(np.sum(np.abs(values[..., mask]) ** 2)) / tot if tot else 0.0


def _dilate_last(v: np.ndarray, axis: AxisSpec, lam: float) -> np.ndarray:
    """lam^{-1/2} v(x / lam) along the last axis from the trigonometric interpolant."""
    n, L = axis.n, axis.half_width
    x, xi = axis.grid, axis.dual_grid
    # v(y) = (1/n) sum_k C_k exp(i xi_k (y + L))
    C = np.fft.fftshift(np.fft.fft(v, axis=-1), axes=-1)
    # at y_j = x_j / lam the sum over k is a chirp-z transform with ratio exp(i dx dxi / lam)
    pre = C * np.exp(1j * xi * L * (1.0 - 1.0 / lam)) / n
    out = czt(pre, m=n, w=np.exp(1j * axis.dx * axis.dxi / lam), a=1.0, axis=-1)
    out = out * np.exp(1j * xi[0] * (x + L) / lam)
    out[..., np.abs(x / lam) > L] = 0.0
    return out / math.sqrt(lam)


def _dilate_unitary(u: SampledSignal, lam: float) -> SampledSignal:
    axis = u.axis
    if lam == 1.0:
        return u.with_values(u.values.copy())
    v = u.values
    for ax in range(axis.d):
        w = np.moveaxis(v, ax, -1)
        spec = np.fft.fftshift(np.fft.fft(w, axis=-1), axes=-1)
        lost_x = _energy_outside(w, axis.grid, axis.half_width / lam)
        lost_xi = _energy_outside(spec, axis.dual_grid, axis.xi_max * lam)
        if max(lost_x, lost_xi) > DILATE_LOSS:
            raise OutOfBox(
                f"dilation by {lam:g} loses {max(lost_x, lost_xi):.2e} of the energy outside the grid"
            )
        v = np.moveaxis(_dilate_last(w, axis, lam), -1, ax)
    return u.with_values(v)


def _transport_meta(meta: dict, chi: np.ndarray, d: int) -> dict:
    """Carry prescribed directions and their valid radius through chi."""
    out = {k: v for k, v in meta.items() if k not in ("prescribed", "valid_radius")}
    if "prescribed" in meta:
        dirs = [np.asarray(w, dtype=float) for w in meta["prescribed"]]
        images = [chi @ w for w in dirs]
        out["prescribed"] = [list(im / np.linalg.norm(im)) for im in images]
        if "valid_radius" in meta:
            scale = min((float(np.linalg.norm(im)) for im in images), default=1.0)
            out["valid_radius"] = float(meta["valid_radius"]) * scale
    elif "valid_radius" in meta:
        out["valid_radius"] = float(meta["valid_radius"]) * float(np.linalg.svd(chi, compute_uv=False)[-1])
    return out


def apply_unitary(word, u: SampledSignal, eps: float = EPS_BOUNDARY) -> SampledSignal:
    """U_chi u for the word's generators, applied left to right.

    FOURIER is (2 pi)^{-d/2} times the continuous Fourier transform and lands on
    the dual axis; CHIRP(c) multiplies by exp(i c |x|^2 / 2); DILATE(l) maps
    u(x) to l^{-d/2} u(x / l) by band-limited resampling.
    """
    word = SymplecticWord.parse(word)
    v = u
    for s in word.steps:
        if s.kind is Generator.FOURIER:
            v = _fourier_unitary(v)
        elif s.kind is Generator.CHIRP:
            v = _chirp_unitary(v, s.value)
        else:
            v.check_boundary(eps, "dilate")
            v = _dilate_unitary(v, s.value)
    chi = word.matrix(u.axis.d)
    meta = _transport_meta(dict(u.meta), chi, u.axis.d)
    meta["word"] = word.to_list()
    label = u.label if not len(word) else f"U{word.to_list()}[{u.label}]"
    return SampledSignal(v.axis, v.values, label, meta)


def unitarity_error(word, u: SampledSignal) -> float:
    n0 = l2_norm(u)
    return abs(l2_norm(apply_unitary(word, u)) - n0) / n0


# ---------------------------------------------------------------------------
# conic regions


def map_direction(word, w) -> Direction:
    w = w if isinstance(w, Direction) else Direction.from_vector(w)
    chi = SymplecticWord.parse(word).matrix(len(w.w) // 2)
    return Direction.from_vector(chi @ w.array)


def _boundary_rays(w: np.ndarray, theta: float) -> list[np.ndarray]:
    """Rays at angle theta from w: exact pair for d = 1, +-basis sample for d > 1."""
    n = w.size
    basis = np.linalg.svd(w[None, :])[2][1:]
    rays = []
    for v in basis:
        for sgn in (1.0, -1.0):
            rays.append(math.cos(theta) * w + sgn * math.sin(theta) * v)
    if n > 2:
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        v = (si * basis[i] + sj * basis[j]) / math.sqrt(2)
                        rays.append(math.cos(theta) * w + math.sin(theta) * v)
    return rays


def map_region(word, region: ConicRegion) -> ConicRegion:
    """chi applied to every cone; the new half-angle is the widest boundary-ray image."""
    word = SymplecticWord.parse(word)
    cones = []
    for w, theta in region.cones:
        chi = word.matrix(len(w.w) // 2)
        centre = chi @ w.array
        centre = centre / np.linalg.norm(centre)
        half = 0.0
        for ray in _boundary_rays(w.array, theta):
            im = chi @ ray
            cosang = float(np.clip(np.dot(centre, im) / np.linalg.norm(im), -1.0, 1.0))
            half = max(half, math.acos(cosang))
        half = min(max(half, 1e-12), math.pi / 2 - 1e-9)
        cones.append((Direction.from_vector(centre), half))
    return ConicRegion(tuple(cones))
