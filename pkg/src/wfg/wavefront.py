"""Wave front set estimators: conic STFT decay, Gabor lattice, local hSTFT and homogeneous.

Every estimator produces one DecayFit per sampled direction. Radial estimators
take sups over cone shells ``r_i <= |z| < r_i * rho``; the h-based estimators take
sups over ladder bins ``h_{k+1} < h <= h_k``, which is the same geometry read
through z -> z / h.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, EstimatorError
from .grid import (
    ConicRegion,
    DecayClass,
    DecayFit,
    Direction,
    FitParams,
    PolarIndex,
    SampledSignal,
    angular_gap_deg,
    fit_decay,
    geometric_radii,
    l2_norm,
    sphere_directions,
)
from .quantize import build_kernel
from .symbols import DilatedSymbol, SymbolExpr
from .transforms import UNIT_L2, PhaseGrid, stft, stft_points


class Method(str, enum.Enum):
    GABOR_CONE = "GABOR_CONE"
    GABOR_LATTICE = "GABOR_LATTICE"
    HSTFT_LOCAL = "HSTFT_LOCAL"
    HOMOGENEOUS = "HOMOGENEOUS"


def default_ladder(count: int = 17, ratio: float = 0.8) -> tuple:
    return tuple(ratio**k for k in range(count))


@dataclass(frozen=True)
class EstimatorParams:
    n_dirs: int = 32
    theta_deg: float = 3.0
    r_min: float = 4.0
    rho: float = 1.25
    r_max_frac: float = 0.8
    nondecay_frac: float = 0.6
    floor_rel: float = 1e-10
    phase_step: float = 0.1
    shell_min_pts: int = 4
    fit: FitParams = FitParams()
    h_ladder: tuple = default_ladder()
    bump_radius: float = 0.15
    bump_p: int = 8
    lattice: tuple = (1.0, 1.0)
    u_radius: float | None = None
    # sub-samples per ladder bin relative to the probe size; None picks automatically
    bin_substeps: int | None = None
    refine_step_deg: float = 0.25
    refine_theta_deg: float = 1.0
    # banded Weyl kernels drop offsets whose entries are all below this fraction of the peak
    kernel_drop_tol: float = 1e-13
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.theta_deg < 90:
            raise ConfigError("theta_deg must be in (0, 90)")
        if self.n_dirs < 4:
            raise ConfigError("n_dirs must be >= 4")
        if self.rho <= 1:
            raise ConfigError("rho must exceed 1")
        h = np.asarray(self.h_ladder, dtype=float)
        if h.size < 2 or np.any(h <= 0) or np.any(h > 1) or np.any(np.diff(h) >= 0):
            raise ConfigError("h_ladder must be strictly decreasing in (0, 1]")
        a, b = self.lattice
        if not (a > 0 and b > 0 and a * b < 2 * math.pi):
            raise ConfigError("lattice (alpha, beta) must satisfy alpha*beta < 2 pi")

    @property
    def theta(self) -> float:
        return math.radians(self.theta_deg)

    @property
    def probe_radius(self) -> float:
        """Radius of the local hSTFT ball around a unit z0 (matches the cone aperture)."""
        return self.u_radius if self.u_radius is not None else math.sin(self.theta)

    @property
    def resolution(self) -> float:
        """Half the angular spacing of the sampled directions (radians)."""
        return math.pi / self.n_dirs

    def directions(self) -> list[Direction]:
        return sphere_directions(self.n_dirs)

    def to_dict(self) -> dict:
        return {
            "n_dirs": self.n_dirs,
            "theta_deg": self.theta_deg,
            "r_min": self.r_min,
            "rho": self.rho,
            "r_max_frac": self.r_max_frac,
            "nondecay_frac": self.nondecay_frac,
            "floor_rel": self.floor_rel,
            "phase_step": self.phase_step,
            "shell_min_pts": self.shell_min_pts,
            "fit": self.fit.to_dict(),
            "h_ladder": list(self.h_ladder),
            "bump_radius": self.bump_radius,
            "bump_p": self.bump_p,
            "lattice": list(self.lattice),
            "u_radius": self.probe_radius,
            "bin_substeps": self.bin_substeps,
            "refine_step_deg": self.refine_step_deg,
            "refine_theta_deg": self.refine_theta_deg,
            "kernel_drop_tol": self.kernel_drop_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimatorParams":
        data = dict(data)
        data.pop("threads", None)
        if "fit" in data and isinstance(data["fit"], dict):
            data["fit"] = FitParams(**data["fit"])
        if "h_ladder" in data:
            data["h_ladder"] = tuple(data["h_ladder"])
        if "lattice" in data:
            data["lattice"] = tuple(data["lattice"])
        return cls(**data)


# ---------------------------------------------------------------------------
# reports


@dataclass
class DirectionResult:
    w: Direction
    theta: float
    fit: DecayFit

    @property
    def classification(self) -> DecayClass:
        return self.fit.classification

    @property
    def angle_deg(self) -> float:
        return self.w.angle_deg

    def to_dict(self) -> dict:
        return {"w": list(self.w.w), "theta": self.theta, "fit": self.fit.to_dict(), "class": self.classification.value}

    @classmethod
    def from_dict(cls, data: dict) -> "DirectionResult":
        return cls(Direction(tuple(data["w"])), float(data["theta"]), DecayFit.from_dict(data["fit"]))


@dataclass
class WaveFrontReport:
    signal_id: str
    method: Method
    directions: list
    flagged: ConicRegion
    params: dict = field(default_factory=dict)
    principal: list = field(default_factory=list)  # refined directions (degrees), one per flagged component

    def classes(self) -> list[DecayClass]:
        return [d.classification for d in self.directions]

    def flagged_angles(self) -> list[float]:
        return [d.angle_deg for d in self.directions if d.classification is DecayClass.SLOW]

    def to_dict(self) -> dict:
        return {
            "signal_id": self.signal_id,
            "method": self.method.value,
            "params": self.params,
            "directions": [d.to_dict() for d in self.directions],
            "flagged": self.flagged.to_list(),
            "principal": list(self.principal),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WaveFrontReport":
        return cls(
            data["signal_id"],
            Method(data["method"]),
            [DirectionResult.from_dict(d) for d in data["directions"]],
            ConicRegion.from_list(data["flagged"]),
            data.get("params", {}),
            list(data.get("principal", [])),
        )


def _flagged_region(results, params: EstimatorParams) -> ConicRegion:
    cones = [(r.w, params.resolution) for r in results if r.classification is DecayClass.SLOW]
    return ConicRegion(tuple(cones))


def flagged_components(results) -> list[list[int]]:
    """Runs of consecutive SLOW directions on the sampled circle (index lists)."""
    n = len(results)
    slow = [r.classification is DecayClass.SLOW for r in results]
    if not any(slow):
        return []
    if all(slow):
        return [list(range(n))]
    start = next(i for i in range(n) if not slow[i])
    comps, cur = [], []
    for k in range(1, n + 1):
        i = (start + k) % n
        if slow[i]:
            cur.append(i)
        elif cur:
            comps.append(cur)
            cur = []
    if cur:
        comps.append(cur)
    return comps


def _circular_mean_deg(angles) -> float:
    a = np.radians(angles)
    return math.degrees(math.atan2(np.sin(a).mean(), np.cos(a).mean())) % 360.0


# ---------------------------------------------------------------------------
# radial limits


def analysis_radius(u: SampledSignal, params: EstimatorParams) -> float:
    """Largest phase radius the decay analysis of ``u`` may use."""
    axis = u.axis
    lim = params.r_max_frac * min(axis.half_width, axis.xi_max)
    if u.meta.get("non_decaying"):
        lim = min(lim, params.nondecay_frac * axis.half_width)
    if "valid_radius" in u.meta:
        lim = min(lim, float(u.meta["valid_radius"]))
    return lim


def shell_radii(u: SampledSignal, params: EstimatorParams) -> np.ndarray:
    return geometric_radii(params.r_min, params.rho, analysis_radius(u, params))


def _map(fn, items, threads: int):
    threads = max(1, int(threads or 1))
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def resolve_threads(threads: int | None = None) -> int:
    if threads:
        return int(threads)
    env = os.environ.get("WFG_THREADS")
    return int(env) if env and env.isdigit() and int(env) > 0 else 1


# ---------------------------------------------------------------------------
# Gabor (conic STFT decay)


def _stride(step: float, spacing: float) -> int:
    return max(1, int(math.floor(step / spacing + 1e-9)))


def analysis_field(u: SampledSignal, params: EstimatorParams, r_out: float):
    """STFT on the disc-enclosing box |x|, |xi| <= r_out, thinned to ``phase_step``."""
    axis = u.axis
    grid = PhaseGrid(
        _stride(params.phase_step, axis.dx),
        _stride(params.phase_step, axis.dxi),
        min(r_out, axis.half_width),
        min(r_out, axis.xi_max),
    )
    return stft(u, UNIT_L2, grid)


def gabor_wf(
    u: SampledSignal,
    dirs: list[Direction] | None = None,
    theta: float | None = None,
    shells=None,
    params: EstimatorParams = EstimatorParams(),
    field_=None,
) -> WaveFrontReport:
    """Per direction: cone-shell sups of |V_phi u|, log-log fit in r, classification."""
    dirs = params.directions() if dirs is None else list(dirs)
    theta = params.theta if theta is None else theta
    radii = shell_radii(u, params) if shells is None else np.asarray(shells, dtype=float)
    if radii.size < 2:
        raise EstimatorError(f"{u.label}: analysis radius too small for two shells")
    r_out = radii[-1] * radii[-1] / radii[-2]
    F = field_ if field_ is not None else analysis_field(u, params, r_out)
    index = PolarIndex(*F.points(), r_lo=radii[0], r_hi=r_out)
    peak = float(np.abs(F.values).max()) if F.values.size else 0.0
    floor = params.floor_rel * peak

    def one(w):
        sups, counts = index.shell_sups(w, theta, radii)
        if not np.any(counts >= params.shell_min_pts):
            raise EstimatorError(f"{u.label}: every shell of direction {w.angle_deg:.2f} deg is empty")
        ok = counts >= params.shell_min_pts
        fit = fit_decay(radii[ok], sups[ok], "radius", floor, params.fit)
        return DirectionResult(w, theta, fit)

    results = _map(one, dirs, params.threads)
    report = WaveFrontReport(
        u.label,
        Method.GABOR_CONE,
        results,
        _flagged_region(results, params),
        _snapshot(params, theta, radii, u),
    )
    report.principal = refine_principal(index, results, radii, params)
    return report


def refine_principal(index: PolarIndex, results, radii, params: EstimatorParams) -> list[float]:
    """Fine angular scan inside each flagged component; returns the best angle per component.

    The score of an angle is the mean log-sup over the outer shells of a narrow
    cone around it, so the maximiser tracks the slowest-decaying ray.
    """
    comps = flagged_components(results)
    if not comps or len(comps) == 1 and len(comps[0]) == len(results):
        return [_circular_mean_deg([results[i].angle_deg for i in c]) for c in comps]
    spacing = 360.0 / len(results)
    narrow = math.radians(params.refine_theta_deg)
    tail = radii[-min(len(radii), params.fit.window) :]
    out = []
    for comp in comps:
        a0 = results[comp[0]].angle_deg - spacing / 2
        span = spacing * len(comp)
        grid = a0 + np.arange(0.0, span + 1e-9, params.refine_step_deg)
        scores = []
        for a in grid:
            sups, counts = index.shell_sups(Direction.from_angle(a), narrow, tail)
            sups = np.where(counts > 0, sups, np.nan)
            with np.errstate(divide="ignore"):
                scores.append(np.nanmean(np.log(np.maximum(sups, 1e-300))) if np.any(counts) else -np.inf)
        scores = np.asarray(scores)
        k = int(np.argmax(scores))
        # a narrow cone sees the same peak over a plateau of angles; take its midpoint
        near = scores >= scores[k] - 1e-3
        lo, hi = k, k
        while lo > 0 and near[lo - 1]:
            lo -= 1
        while hi < len(grid) - 1 and near[hi + 1]:
            hi += 1
        if hi > lo:
            best = 0.5 * (grid[lo] + grid[hi])
        else:
            best = grid[k]
            if 0 < k < len(grid) - 1 and np.all(np.isfinite(scores[k - 1 : k + 2])):
                y0, y1, y2 = scores[k - 1 : k + 2]
                den = y0 - 2 * y1 + y2
                if den < 0:
                    best += 0.5 * (y0 - y2) / den * params.refine_step_deg
        out.append(float(best % 360.0))
    return out


def _snapshot(params: EstimatorParams, theta: float, radii, u: SampledSignal, **extra) -> dict:
    snap = params.to_dict()
    snap["theta"] = theta
    snap["radii"] = [float(r) for r in radii]
    snap["analysis_radius"] = analysis_radius(u, params)
    snap["axis"] = u.axis.to_dict()
    snap.update(extra)
    return snap


# ---------------------------------------------------------------------------
# Gabor lattice


def lattice_points(alpha: float, beta: float, r_out: float):
    m = np.arange(-math.floor(r_out / alpha), math.floor(r_out / alpha) + 1) * alpha
    k = np.arange(-math.floor(r_out / beta), math.floor(r_out / beta) + 1) * beta
    X, K = np.meshgrid(m, k, indexing="ij")
    keep = np.hypot(X, K) < r_out
    return X[keep], K[keep]


def gabor_wf_lattice(
    u: SampledSignal,
    lattice: tuple | None = None,
    dirs: list[Direction] | None = None,
    theta: float | None = None,
    params: EstimatorParams = EstimatorParams(),
) -> WaveFrontReport:
    """Cone-shell sups of |V_phi u| restricted to the lattice alpha Z x beta Z."""
    alpha, beta = lattice or params.lattice
    if not alpha * beta < 2 * math.pi:
        raise ConfigError("lattice must satisfy alpha*beta < 2 pi")
    dirs = params.directions() if dirs is None else list(dirs)
    theta = params.theta if theta is None else theta
    radii = shell_radii(u, params)
    if radii.size < 2:
        raise EstimatorError(f"{u.label}: analysis radius too small for two shells")
    r_out = radii[-1] * radii[-1] / radii[-2]
    x, xi = lattice_points(alpha, beta, r_out)
    mag = np.abs(stft_points(u, x, xi, UNIT_L2))
    index = PolarIndex(x, xi, mag, r_lo=radii[0], r_hi=r_out)
    floor = params.floor_rel * float(mag.max(initial=0.0))

    def one(w):
        sups, counts = index.shell_sups(w, theta, radii)
        ok = counts > 0
        fit = fit_decay(radii[ok], sups[ok], "radius", floor, params.fit)
        return DirectionResult(w, theta, fit)

    results = _map(one, dirs, params.threads)
    return WaveFrontReport(
        u.label,
        Method.GABOR_LATTICE,
        results,
        _flagged_region(results, params),
        _snapshot(params, theta, radii, u, lattice_size=int(x.size)),
    )


# ---------------------------------------------------------------------------
# h-ladders


def truncated_ladder(ladder, reach: float, r_lim: float) -> np.ndarray:
    """Ladder values with reach / h <= r_lim (never extrapolate beyond the valid range)."""
    h = np.asarray(ladder, dtype=float)
    return h[reach / h <= r_lim * (1 + 1e-12)]


def _bin_subs(h_hi: float, h_lo: float, rel: float, fixed: int | None) -> np.ndarray:
    m = fixed or max(1, math.ceil(math.log(h_hi / h_lo) / math.log1p(rel)))
    return h_hi * (h_lo / h_hi) ** (np.arange(m) / m)


def _ladder_bins(hs: np.ndarray, rel: float, fixed: int | None):
    """For consecutive ladder values: (h_k, sub-samples of (h_{k+1}, h_k])."""
    return [(hs[k], _bin_subs(hs[k], hs[k + 1], rel, fixed)) for k in range(hs.size - 1)]


# ---------------------------------------------------------------------------
# local hSTFT


def hstft_local(
    u: SampledSignal,
    z0: Direction,
    U_radius: float | None = None,
    h_ladder=None,
    params: EstimatorParams = EstimatorParams(),
    index: PolarIndex | None = None,
    norm: float | None = None,
) -> DecayFit:
    """sup over B_U(z0) of |T_h u| per ladder bin, fitted against h.

    |T_h u(z)| = (2 pi)^{-1/2} h^{-1} |V_phi u(z / h)|, so the ball sup is read
    off the STFT on the disc of radius U/h around z0/h.
    """
    rad = params.probe_radius if U_radius is None else U_radius
    ladder = params.h_ladder if h_ladder is None else h_ladder
    r_lim = analysis_radius(u, params)
    hs = truncated_ladder(ladder, 1.0 + rad, r_lim)
    if hs.size < 2:
        raise EstimatorError(f"{u.label}: h-ladder leaves the valid radius {r_lim:g}")
    if index is None:
        F = analysis_field(u, params, r_lim)
        index = PolarIndex(*F.points(), r_hi=r_lim)
    norm = l2_norm(u) if norm is None else norm
    cand = index.cone(z0, math.asin(min(rad, 0.999)))
    px, pxi, mag = index.px[cand], index.pxi[cand], index.mag[cand]
    w0, w1 = z0.w
    abscissae, sups = [], []
    for h_k, subs in _ladder_bins(hs, rad / 2, params.bin_substeps):
        best = 0.0
        for h in subs:
            inside = (px - w0 / h) ** 2 + (pxi - w1 / h) ** 2 <= (rad / h) ** 2
            if np.any(inside):
                best = max(best, float(mag[inside].max()) / (math.sqrt(2 * math.pi) * h))
        abscissae.append(h_k)
        sups.append(best)
    return fit_decay(abscissae, sups, "h", params.floor_rel * norm, params.fit)


def hstft_local_report(u: SampledSignal, dirs=None, params: EstimatorParams = EstimatorParams()) -> WaveFrontReport:
    dirs = params.directions() if dirs is None else list(dirs)
    r_lim = analysis_radius(u, params)
    F = analysis_field(u, params, r_lim)
    index = PolarIndex(*F.points(), r_hi=r_lim)
    norm = l2_norm(u)
    results = _map(
        lambda w: DirectionResult(w, params.theta, hstft_local(u, w, params=params, index=index, norm=norm)),
        dirs,
        params.threads,
    )
    return WaveFrontReport(
        u.label, Method.HSTFT_LOCAL, results, _flagged_region(results, params), _snapshot(params, params.theta, [], u)
    )


# ---------------------------------------------------------------------------
# homogeneous wave front set


def test_symbol(w: Direction, radius: float, p: int = 8) -> SymbolExpr:
    """Taper bump centred at the unit vector w with a(w) = 1."""
    return SymbolExpr.bump(w.w, radius, p)


def hwf_estimate_many(
    signals: list[SampledSignal],
    dirs=None,
    bump_radius: float | None = None,
    h_ladder=None,
    params: EstimatorParams = EstimatorParams(),
) -> list[WaveFrontReport]:
    """HWF reports for several signals sharing one axis; each dilated kernel is built once.

    Per direction and ladder bin: sup of ||a_h^w u||_{L2} over the bin's
    sub-samples, with a a taper bump of radius R_b at w.
    """
    if not signals:
        return []
    axis = signals[0].axis
    if any(s.axis != axis for s in signals):
        raise ConfigError("hwf_estimate_many needs signals on one axis")
    dirs = params.directions() if dirs is None else list(dirs)
    R_b = params.bump_radius if bump_radius is None else bump_radius
    ladder = params.h_ladder if h_ladder is None else h_ladder
    U = np.stack([s.values for s in signals], axis=1)
    norms = np.array([l2_norm(s) for s in signals])
    lims = [analysis_radius(s, params) for s in signals]
    ladders = [truncated_ladder(ladder, 1.0 + R_b, r) for r in lims]
    for s, hs in zip(signals, ladders):
        if hs.size < 2:
            raise EstimatorError(f"{s.label}: h-ladder leaves the valid radius")
    longest = max(ladders, key=len)

    def one(w):
        a = test_symbol(w, R_b, params.bump_p)
        table = []  # per bin: array of sups over signals
        for h_k, subs in _ladder_bins(longest, R_b / 2, params.bin_substeps):
            best = np.zeros(len(signals))
            for h in subs:
                kern = build_kernel(DilatedSymbol(a, h), 0.5, axis, banded=True, drop_tol=params.kernel_drop_tol)
                out = kern.apply(U)
                best = np.maximum(best, np.sqrt(np.sum(np.abs(out) ** 2, axis=0) * axis.dx))
            table.append((h_k, best))
        fits = []
        for s_i, hs in enumerate(ladders):
            rows = [(h, b[s_i]) for h, b in table if h > hs[-1] * (1 + 1e-12)]
            fits.append(
                fit_decay([r[0] for r in rows], [r[1] for r in rows], "h", params.floor_rel * norms[s_i], params.fit)
            )
        return fits

    per_dir = _map(one, dirs, params.threads)
    reports = []
    for s_i, s in enumerate(signals):
        results = [DirectionResult(w, R_b, fits[s_i]) for w, fits in zip(dirs, per_dir)]
        reports.append(
            WaveFrontReport(
                s.label,
                Method.HOMOGENEOUS,
                results,
                _flagged_region(results, params),
                _snapshot(params, params.theta, [], s, bump_radius=R_b),
            )
        )
    return reports


def hwf_estimate(u: SampledSignal, dirs=None, bump_radius=None, h_ladder=None, params=EstimatorParams()) -> WaveFrontReport:
    return hwf_estimate_many([u], dirs, bump_radius, h_ladder, params)[0]


# ---------------------------------------------------------------------------
# comparison


@dataclass
class AgreementMatrix:
    method_a: str
    method_b: str
    pairs: list  # (signal_id, angle_deg, class_a, class_b)

    @property
    def compared(self) -> list:
        return [p for p in self.pairs if DecayClass.INDETERMINATE not in (p[2], p[3])]

    @property
    def agreement(self) -> float:
        c = self.compared
        return 1.0 if not c else sum(p[2] == p[3] for p in c) / len(c)

    @property
    def indeterminate_fraction(self) -> float:
        return 0.0 if not self.pairs else 1.0 - len(self.compared) / len(self.pairs)

    def disagreements(self) -> list:
        return [p for p in self.compared if p[2] != p[3]]

    def __add__(self, other: "AgreementMatrix") -> "AgreementMatrix":
        return AgreementMatrix(self.method_a, self.method_b, self.pairs + other.pairs)

    def to_dict(self) -> dict:
        return {
            "method_a": self.method_a,
            "method_b": self.method_b,
            "agreement": self.agreement,
            "indeterminate_fraction": self.indeterminate_fraction,
            "pairs": [[s, a, ca.value, cb.value] for s, a, ca, cb in self.pairs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AgreementMatrix":
        pairs = [(s, a, DecayClass(ca), DecayClass(cb)) for s, a, ca, cb in data["pairs"]]
        return cls(data["method_a"], data["method_b"], pairs)


def compare_reports(A: WaveFrontReport, B: WaveFrontReport) -> AgreementMatrix:
    if len(A.directions) != len(B.directions) or any(
        max(abs(p - q) for p, q in zip(a.w.w, b.w.w)) > 1e-9 for a, b in zip(A.directions, B.directions)
    ):
        raise ConfigError("reports sample different direction sets")
    pairs = [(A.signal_id, a.angle_deg, a.classification, b.classification) for a, b in zip(A.directions, B.directions)]
    return AgreementMatrix(A.method.value, B.method.value, pairs)


def compare_many(As, Bs) -> AgreementMatrix:
    if len(As) != len(Bs):
        raise ConfigError("report lists differ in length")
    out = None
    for a, b in zip(As, Bs):
        m = compare_reports(a, b)
        out = m if out is None else out + m
    return out


def principal_match(found, expected, tol_deg: float) -> bool:
    """Every expected direction has a found principal direction within tol, and vice versa."""
    if len(found) != len(expected):
        return False
    return all(min(angular_gap_deg(e, f) for f in found) <= tol_deg for e in expected) and all(
        min(angular_gap_deg(e, f) for e in expected) <= tol_deg for f in found
    )


def with_params(params: EstimatorParams, **changes) -> EstimatorParams:
    return replace(params, **changes)
