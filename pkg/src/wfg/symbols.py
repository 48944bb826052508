"""Closed-form phase-space symbols: monomial x Gaussian x polynomial-taper terms.

A term is ``c * z^alpha * prod_g exp(-sum_i w_i (z_i - g_i)^2) * prod_b q_b(z)^p_b``
with ``q_b(z) = 1 - |z - c_b|^2 / R_b^2`` cut to zero outside the ball. The
variables are ordered ``z = (x_1..x_d, xi_1..xi_d)``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# finite-difference fallback
FD_STEP = 1e-4


@dataclass(frozen=True)
class Gauss:
    center: tuple
    widths: tuple  # diagonal inverse widths w_i >= 0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if len(self.center) != len(self.widths):
            raise ConfigError("gauss center and widths differ in length")
        if any(w < 0 for w in self.widths):
            raise ConfigError("gauss widths must be non-negative")

    def __call__(self, z) -> np.ndarray:
        e = sum(w * (zi - c) ** 2 for w, zi, c in zip(self.widths, z, self.center) if w)
        return np.exp(-e) if not isinstance(e, int) else np.ones_like(z[0], dtype=float)

    def dilate(self, h: float) -> "Gauss":
        return Gauss(tuple(c / h for c in self.center), tuple(w * h * h for w in self.widths))


@dataclass(frozen=True)
class Bump:
    """(1 - |z - c|^2 / R^2)^power inside the closed ball of radius R, else 0."""

    center: tuple
    radius: float
    power: int = 8

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ConfigError("bump radius must be positive")
        if self.power < 0:
            raise ConfigError("bump power must be non-negative")

    def q(self, z):
        return 1.0 - sum((zi - c) ** 2 for zi, c in zip(z, self.center)) / self.radius**2

    def __call__(self, z) -> np.ndarray:
        q = np.asarray(self.q(z), dtype=float)
        return np.where(q > 0, np.maximum(q, 0.0) ** self.power, 0.0)

    def dilate(self, h: float) -> "Bump":
        return Bump(tuple(c / h for c in self.center), self.radius / h, self.power)

    def box(self):
        return [(c - self.radius, c + self.radius) for c in self.center]


@dataclass(frozen=True)
class Term:
    coeff: complex
    powers: tuple
    gauss: tuple = ()
    bumps: tuple = ()

    @property
    def key(self):
        return (self.powers, self.gauss, self.bumps)

    def __call__(self, z):
        out = self.coeff * np.ones(np.broadcast(*z).shape)
        for zi, a in zip(z, self.powers):
            if a:
                out = out * zi**a
        for g in self.gauss:
            out = out * g(z)
        for b in self.bumps:
            out = out * b(z)
        return out

    def times(self, other: "Term") -> "Term":
        powers = tuple(a + b for a, b in zip(self.powers, other.powers))
        return Term(self.coeff * other.coeff, powers, _sorted(self.gauss + other.gauss), _sorted(self.bumps + other.bumps))

    def dilate(self, h: float) -> "Term":
        return Term(
            self.coeff * h ** sum(self.powers),
            self.powers,
            tuple(g.dilate(h) for g in self.gauss),
            tuple(b.dilate(h) for b in self.bumps),
        )

    def derivative(self, i: int) -> list["Term"]:
        """Exact partial derivative in z_i (valid where every bump power stays >= 1)."""
        out = []
        a = self.powers[i]
        if a:
            p = list(self.powers)
            p[i] -= 1
            out.append(Term(self.coeff * a, tuple(p), self.gauss, self.bumps))
        for g in self.gauss:
            w = g.widths[i]
            if not w:
                continue
            # d/dz_i exp(-w (z_i - c)^2) = (-2w z_i + 2w c) exp(...)
            p = list(self.powers)
            p[i] += 1
            out.append(Term(-2 * w * self.coeff, tuple(p), self.gauss, self.bumps))
            if g.center[i]:
                out.append(Term(2 * w * g.center[i] * self.coeff, self.powers, self.gauss, self.bumps))
        for k, b in enumerate(self.bumps):
            if b.power == 0:
                continue
            # d/dz_i q^p = p q^{p-1} * (-2 (z_i - c_i) / R^2)
            lowered = self.bumps[:k] + (Bump(b.center, b.radius, b.power - 1),) + self.bumps[k + 1 :]
            lowered = _sorted(lowered)
            f = -2.0 * b.power / b.radius**2
            p = list(self.powers)
            p[i] += 1
            out.append(Term(f * self.coeff, tuple(p), self.gauss, lowered))
            if b.center[i]:
                out.append(Term(-f * b.center[i] * self.coeff, self.powers, self.gauss, lowered))
        return out

    def to_dict(self) -> dict:
        d = {"coeff_re": float(np.real(self.coeff)), "coeff_im": float(np.imag(self.coeff)), "powers": list(self.powers)}
        if self.gauss:
            d["gauss"] = [{"center": list(g.center), "widths": list(g.widths)} for g in self.gauss]
        if self.bumps:
            d["bump"] = [{"center": list(b.center), "radius": b.radius, "p": b.power} for b in self.bumps]
        return d


def _sorted(items: tuple) -> tuple:
    return tuple(sorted(items, key=repr))


def _collect(terms, tol: float = 0.0) -> tuple:
    acc: dict = defaultdict(complex)
    for t in terms:
        acc[t.key] += t.coeff
    out = [Term(c, *k) for k, c in acc.items() if abs(c) > tol]
    return tuple(sorted(out, key=lambda t: repr(t.key)))


@dataclass(frozen=True)
class SymbolExpr:
    terms: tuple
    d: int = 1
    declared_order: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for t in self.terms:
            if len(t.powers) != 2 * self.d:
                raise ConfigError(f"term powers {t.powers} do not match phase dimension {2 * self.d}")

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, c: complex = 1.0, d: int = 1) -> "SymbolExpr":
        return cls((Term(complex(c), (0,) * 2 * d),), d, 0.0, f"{c}")

    @classmethod
    def monomial(cls, powers, coeff: complex = 1.0) -> "SymbolExpr":
        powers = tuple(int(p) for p in powers)
        return cls((Term(complex(coeff), powers),), len(powers) // 2, float(sum(powers)))

    @classmethod
    def gaussian(cls, center, widths, coeff: complex = 1.0) -> "SymbolExpr":
        g = Gauss(tuple(center), tuple(widths))
        return cls((Term(complex(coeff), (0,) * len(g.center), (g,)),), len(g.center) // 2, 0.0)

    @classmethod
    def bump(cls, center, radius: float, p: int = 8, coeff: complex = 1.0) -> "SymbolExpr":
        b = Bump(tuple(center), radius, p)
        return cls((Term(complex(coeff), (0,) * len(b.center), (), (b,)),), len(b.center) // 2, 0.0)

    # -- algebra --------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, SymbolExpr):
            if other.d != self.d:
                raise ConfigError("symbols of different dimension")
            return other
        return SymbolExpr.constant(other, self.d)

    def __add__(self, other):
        other = self._coerce(other)
        return SymbolExpr(_collect(self.terms + other.terms), self.d, max(self.declared_order, other.declared_order))

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        terms = [s.times(o) for s in self.terms for o in other.terms]
        return SymbolExpr(_collect(terms), self.d, self.declared_order + other.declared_order)

    __rmul__ = __mul__

    # -- evaluation -----------------------------------------------------
    def __call__(self, *z):
        if len(z) != 2 * self.d:
            raise ValueError(f"expected {2 * self.d} phase coordinates, got {len(z)}")
        z = [np.asarray(c, dtype=float) for c in z]
        out = np.zeros(np.broadcast(*z).shape, dtype=complex)
        for t in self.terms:
            out = out + t(z)
        return out

    def eval(self, z) -> complex:
        return complex(self(*np.asarray(z, dtype=float)))

    # -- structure ------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return all(not t.gauss and not t.bumps for t in self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(t.powers) for t in self.terms if not t.gauss and not t.bumps), default=0)

    def support_box(self):
        """Bounding box of the support, or None when some term is not compactly supported."""
        if not self.terms:
            return [(0.0, 0.0)] * (2 * self.d)
        boxes = []
        for t in self.terms:
            if not t.bumps:
                return None
            box = [(-math.inf, math.inf)] * (2 * self.d)
            for b in t.bumps:
                box = [(max(lo, blo), min(hi, bhi)) for (lo, hi), (blo, bhi) in zip(box, b.box())]
            boxes.append(box)
        return [(min(b[i][0] for b in boxes), max(b[i][1] for b in boxes)) for i in range(2 * self.d)]

    def min_bump_power(self) -> int | None:
        powers = [b.power for t in self.terms for b in t.bumps]
        return min(powers) if powers else None

    def dilate(self, h: float) -> "DilatedSymbol":
        return DilatedSymbol(self, h)

    def differentiate(self, alpha):
        """Exact derivative when every bump keeps power >= 2, else a NumericDerivative."""
        return differentiate_symbol(self, alpha)

    def exact_derivative(self, alpha) -> "SymbolExpr":
        terms = self.terms
        for i, a in enumerate(alpha):
            for _ in range(a):
                terms = _collect([s for t in terms for s in t.derivative(i)])
        order = self.declared_order - sum(alpha)
        return SymbolExpr(terms, self.d, order)

    def to_list(self) -> list:
        return [t.to_dict() for t in self.terms]

    @classmethod
    def from_list(cls, data, declared_order: float = 0.0) -> "SymbolExpr":
        return parse_symbol(data, declared_order)


def parse_symbol(data, declared_order: float | None = None) -> SymbolExpr:
    """Symbol from the JSON literal: a list of terms with coeff_re, coeff_im, powers, gauss, bump."""
    if isinstance(data, dict) and "terms" in data:
        declared_order = data.get("order", declared_order)
        data = data["terms"]
    if not isinstance(data, list) or not data:
        raise ConfigError("symbol literal must be a non-empty list of terms")
    terms = []
    dims = set()
    for k, t in enumerate(data):
        try:
            powers = tuple(int(p) for p in t["powers"])
            coeff = complex(float(t.get("coeff_re", 0.0)), float(t.get("coeff_im", 0.0)))
            gs = t.get("gauss") or []
            bs = t.get("bump") or []
            gs = [gs] if isinstance(gs, dict) else gs
            bs = [bs] if isinstance(bs, dict) else bs
            gauss = tuple(Gauss(tuple(g["center"]), tuple(g["widths"])) for g in gs)
            bumps = tuple(Bump(tuple(b["center"]), float(b["radius"]), int(b.get("p", 8))) for b in bs)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"symbol term {k}: {exc}") from None
        for f in gauss + bumps:
            if len(f.center) != len(powers):
                raise ConfigError(f"symbol term {k}: factor dimension differs from powers")
        dims.add(len(powers))
        terms.append(Term(coeff, powers, _sorted(gauss), _sorted(bumps)))
    if len(dims) != 1 or next(iter(dims)) % 2:
        raise ConfigError("symbol terms must share an even phase dimension")
    d = dims.pop() // 2
    if declared_order is None:
        declared_order = max((sum(t.powers) for t in terms if not t.gauss and not t.bumps), default=0)
    return SymbolExpr(_collect(terms), d, float(declared_order))


@dataclass(frozen=True)
class DilatedSymbol:
    """a_h(z) = a(h z)."""

    base: SymbolExpr
    h: float

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise ValueError(f"h must be in (0, 1], got {self.h}")

    @property
    def d(self) -> int:
        return self.base.d

    def __call__(self, *z):
        return self.base(*(self.h * np.asarray(c, dtype=float) for c in z))

    def eval(self, z) -> complex:
        return self.base.eval(self.h * np.asarray(z, dtype=float))

    def materialize(self) -> SymbolExpr:
        """Equivalent SymbolExpr in z (centres and radii scaled by 1/h)."""
        terms = _collect([t.dilate(self.h) for t in self.base.terms])
        return SymbolExpr(terms, self.base.d, self.base.declared_order)

    def support_box(self):
        box = self.base.support_box()
        if box is None:
            return None
        return [(lo / self.h, hi / self.h) for lo, hi in box]

    @property
    def is_polynomial(self) -> bool:
        return self.base.is_polynomial

    def differentiate(self, alpha):
        return differentiate_symbol(self.materialize(), alpha)


@dataclass(frozen=True)
class NumericDerivative:
    """Derivative that is exact up to ``exact_alpha`` then finite differences for ``beta``."""

    base: SymbolExpr
    beta: tuple
    exact: bool = False

    @property
    def d(self) -> int:
        return self.base.d

    def __call__(self, *z):
        z = [np.asarray(c, dtype=float) for c in z]
        return _fd(self.base, list(self.beta), z)

    def eval(self, z) -> complex:
        return complex(self(*np.asarray(z, dtype=float)))


def _fd(f, beta, z):
    """Nested central differences with one Richardson step, step FD_STEP*(1+|z|)."""
    i = next((k for k, b in enumerate(beta) if b), None)
    if i is None:
        return f(*z)
    rest = list(beta)
    rest[i] -= 1
    r = np.sqrt(sum(c * c for c in z))
    step = FD_STEP * (1.0 + r)

    def central(hs):
        zp = list(z)
        zm = list(z)
        zp[i] = z[i] + hs
        zm[i] = z[i] - hs
        return (_fd(f, rest, zp) - _fd(f, rest, zm)) / (2 * hs)

    return (4.0 * central(step / 2) - central(step)) / 3.0


def differentiate_symbol(a, alpha):
    """partial^alpha a. Exact for polynomial x Gaussian terms and for bump terms
    while every taper power stays >= 2 (|alpha| <= p - 2); otherwise the exact
    part is taken as far as allowed and the remainder is done numerically
    (``NumericDerivative`` with ``exact=False``).
    """
    if isinstance(a, DilatedSymbol):
        a = a.materialize()
    alpha = tuple(int(v) for v in alpha)
    if len(alpha) != 2 * a.d:
        raise ValueError("multi-index length must equal the phase dimension")
    pmin = a.min_bump_power()
    budget = sum(alpha) if pmin is None else max(0, pmin - 2)
    if sum(alpha) <= budget:
        return a.exact_derivative(alpha)
    exact, rest = [], []
    left = budget
    for v in alpha:
        take = min(v, left)
        exact.append(take)
        rest.append(v - take)
        left -= take
    return NumericDerivative(a.exact_derivative(exact), tuple(rest))


def is_exact(expr) -> bool:
    return isinstance(expr, SymbolExpr) or (isinstance(expr, NumericDerivative) and expr.exact)


def eval_symbol(a, z) -> complex:
    return a.eval(z)


def japanese(*z):
    """<z> = (1 + |z|^2)^(1/2)."""
    return np.sqrt(1.0 + sum(np.asarray(c, dtype=float) ** 2 for c in z))


def shubin_seminorm_probe(a, m: float, alpha, grid) -> float:
    """sup over grid of |d^alpha a(z)| <z>^{|alpha| - m}; ``grid`` is a tuple of coordinate arrays."""
    da = differentiate_symbol(a, alpha) if any(alpha) else a
    vals = np.abs(da(*grid)) * japanese(*grid) ** (sum(alpha) - m)
    return float(np.max(vals))


def shubin_probe_h(a: SymbolExpr, m: float, alpha, grid, h_ladder) -> float:
    """h-uniform probe: max over h of sup h^{-|alpha|} <hz>^{|alpha| - m} |d^alpha a_h(z)|."""
    out = 0.0
    k = sum(alpha)
    for h in h_ladder:
        ah = DilatedSymbol(a, h).materialize()
        da = differentiate_symbol(ah, alpha) if k else ah
        hz = [h * np.asarray(c, dtype=float) for c in grid]
        vals = np.abs(da(*grid)) * h**-k * japanese(*hz) ** (k - m)
        out = max(out, float(np.max(vals)))
    return out


# shorthand constructors for d = 1
X = SymbolExpr.monomial((1, 0))
XI = SymbolExpr.monomial((0, 1))
ONE = SymbolExpr.constant(1.0)
