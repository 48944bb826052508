"""Acceptance experiments, one function per criterion.

Each check returns a CriterionResult with a pass flag, the measured numbers
and the wall time. ``run_all`` drives them in order and is shared by the test
suite and ``wfg selftest``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasWarning
from .grid import AxisSpec, Direction, fit_decay, l2_norm, schwartz_seminorm
from .metaplectic import SymplecticWord, apply_unitary, map_direction, unitarity_error
from .quantize import build_kernel, composition_residual, kn_to_weyl, quantize, weyl_product_expand
from .symbols import XI, DilatedSymbol, SymbolExpr, X
from .synthesis import CoherentStateSpec, coherent_state, corpus, standard_signal, synth_fk
from .transforms import PLAIN, UNIT_L2, UNIT_PEAK, hstft, moyal_reconstruct, stft
from .wavefront import (
    EstimatorParams,
    compare_many,
    gabor_wf,
    gabor_wf_lattice,
    hstft_local_report,
    hwf_estimate_many,
    with_params,
)

# shared grids
CORPUS_AXIS = AxisSpec(76.0, 4096)
STFT_AXIS = AxisSpec(40.0, 2048)
LEMMA_AXIS = AxisSpec(40.0, 2048)
COVARIANCE_AXIS = AxisSpec(100.0, 8192)
# prescribed-signal experiments sample 72 directions so that 30 deg is on the grid
FINE_DIRS = 72


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number}: {self.name} ({self.seconds:.1f} s) {self.detail}"


class _Context:
    """Caches reports shared between criteria 4, 5 and 9."""

    def __init__(self, params: EstimatorParams = EstimatorParams()):
        self.params = params
        self._signals = None
        self._reports: dict = {}

    @property
    def signals(self):
        if self._signals is None:
            self._signals = corpus(CORPUS_AXIS)
        return self._signals

    def reports(self, key: str):
        if key not in self._reports:
            p, sig = self.params, self.signals
            if key == "gabor":
                self._reports[key] = [gabor_wf(u, params=p) for u in sig]
            elif key == "lattice":
                self._reports[key] = [gabor_wf_lattice(u, params=p) for u in sig]
            elif key == "hstft":
                self._reports[key] = [hstft_local_report(u, params=p) for u in sig]
            elif key.startswith("hwf"):
                rb = float(key[3:]) if len(key) > 3 else p.bump_radius
                self._reports[key] = hwf_estimate_many(sig, bump_radius=rb, params=p)
            else:
                raise KeyError(key)
        return self._reports[key]


def _timed(number: int, name: str, fn, *args) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail, metrics = fn(*args)
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0, metrics)


# ---------------------------------------------------------------------------
# 1. STFT closed form


def _stft_oracle():
    worst = 0.0
    dirs = [(1.0, 0.0), (0.0, 1.0), (2**-0.5, 2**-0.5)]
    for k in (1, 2, 3, 4):
        for y, eta in dirs:
            f = synth_fk(y, eta, k, STFT_AXIS)
            F = stft(f, UNIT_PEAK)
            X_, XI_ = np.meshgrid(F.x, F.xi, indexing="ij")
            exact = np.exp(-((X_ - k * k * y) ** 2 + (XI_ - k * k * eta) ** 2) / 4.0)
            worst = max(worst, float(np.max(np.abs(np.abs(F.values) - exact))))
    return worst < 1e-6, f"max error {worst:.2e} (< 1e-6)", {"max_error": worst}


def criterion_1(ctx=None) -> CriterionResult:
    res = _timed(1, "STFT modulus of f_k against the closed form", _stft_oracle)
    if res.seconds >= 30:
        res.passed = False
        res.detail += f"; runtime {res.seconds:.1f} s exceeds 30 s"
    return res


# ---------------------------------------------------------------------------
# 2. Moyal identities


def _moyal(ctx: _Context):
    iso, rec, hiso = 0.0, 0.0, 0.0
    for u in ctx.signals:
        n2 = l2_norm(u) ** 2
        F = stft(u, UNIT_L2)
        iso = max(iso, abs(F.l2_norm() ** 2 - 2 * math.pi * n2) / (2 * math.pi * n2))
        back = moyal_reconstruct(F)
        rec = max(rec, l2_norm(back.with_values(back.values - u.values)) / math.sqrt(n2))
        del F, back
    for u in corpus(STFT_AXIS):
        n2 = l2_norm(u) ** 2
        for h in (1.0, 0.5, 0.25, 0.125):
            T = hstft(u, h)
            hiso = max(hiso, abs(T.l2_norm() ** 2 - n2) / n2)
    ok = iso < 1e-5 and rec < 1e-5 and hiso < 1e-5
    detail = f"STFT isometry {iso:.1e}, reconstruction {rec:.1e}, hSTFT isometry {hiso:.1e} (each < 1e-5)"
    return ok, detail, {"stft_isometry": iso, "reconstruction": rec, "hstft_isometry": hiso}


def criterion_2(ctx=None) -> CriterionResult:
    return _timed(2, "Moyal isometry and reconstruction", _moyal, ctx or _Context())


# ---------------------------------------------------------------------------
# 3. prescribed wave front recovery


def _recovery(angles, params):
    u = standard_signal("PRESCRIBED", {"angles": list(angles)}, CORPUS_AXIS)
    rep = gabor_wf(u, params=params)
    flagged = rep.flagged_angles()

    def gap(a, b):
        d = abs(a - b) % 360.0
        return min(d, 360.0 - d)

    hit = all(any(gap(f, a) <= 3.0 for f in flagged) for a in angles)
    principal_ok = all(any(gap(p, a) <= 3.0 for p in rep.principal) for a in angles)
    stray = [f for f in flagged if min(gap(f, a) for a in angles) > 10.0]
    return hit and principal_ok and not stray, flagged, rep.principal, stray


def _prescribed(params):
    out, metrics, ok_all = [], {}, True
    for angles in ([30.0], [0.0, 90.0]):
        t0 = time.perf_counter()
        ok, flagged, principal, stray = _recovery(angles, params)
        dt = time.perf_counter() - t0
        ok = ok and dt < 120
        ok_all &= ok
        key = "+".join(f"{a:g}" for a in angles)
        metrics[key] = {"flagged": flagged, "principal": principal, "stray": stray, "seconds": dt}
        out.append(f"{key}: flagged {[round(f, 2) for f in flagged]} principal {[round(p, 2) for p in principal]}")
    return ok_all, "; ".join(out), metrics


def criterion_3(ctx=None) -> CriterionResult:
    params = with_params((ctx or _Context()).params, n_dirs=FINE_DIRS)
    return _timed(3, "prescribed wave front recovery", _prescribed, params)


# ---------------------------------------------------------------------------
# 4, 5. estimator agreement


def _agreement(ctx: _Context):
    t0 = time.perf_counter()
    m = compare_many(ctx.reports("gabor"), ctx.reports("hwf"))
    dt = time.perf_counter() - t0
    ok = m.agreement >= 0.95 and m.indeterminate_fraction <= 0.10 and dt < 900
    detail = f"agreement {m.agreement:.3f} (>= 0.95), INDETERMINATE {m.indeterminate_fraction:.3f} (<= 0.10)"
    return ok, detail, {"agreement": m.agreement, "indeterminate": m.indeterminate_fraction, "pairs": len(m.pairs)}


def criterion_4(ctx=None) -> CriterionResult:
    return _timed(4, "Gabor cone vs homogeneous wave front", _agreement, ctx or _Context())


def _equivalences(ctx: _Context):
    g = ctx.reports("gabor")
    ml = compare_many(g, ctx.reports("lattice"))
    mh = compare_many(g, ctx.reports("hstft"))
    ok = ml.agreement >= 0.98 and mh.agreement >= 0.95
    detail = f"lattice {ml.agreement:.3f} (>= 0.98), hSTFT {mh.agreement:.3f} (>= 0.95)"
    return ok, detail, {"lattice": ml.agreement, "hstft": mh.agreement}


def criterion_5(ctx=None) -> CriterionResult:
    return _timed(5, "characterization equivalences", _equivalences, ctx or _Context())


# ---------------------------------------------------------------------------
# 6. decay lemmas

LEMMA_LADDER = tuple(0.8**k for k in range(15))


def _lemma_vanishing():
    """Left-quantized bump vanishing on B_0.3(z0) against coherent states near z0."""
    axis = LEMMA_AXIS
    z0 = np.array([0.6, 0.8])
    perp = np.array([-0.8, 0.6])
    a = SymbolExpr.bump(tuple(z0 + 0.6 * perp), 0.3, 8)
    kernels = [build_kernel(DilatedSymbol(a, h).materialize(), 0.0, axis) for h in LEMMA_LADDER]
    probes = [z0, z0 + 0.099 * perp, z0 - 0.099 * z0 / np.linalg.norm(z0)]
    fits = []
    for z in probes:
        vals = []
        for K, h in zip(kernels, LEMMA_LADDER):
            u = coherent_state(CoherentStateSpec((z[0],), (z[1],), h), axis)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AliasWarning)
                vals.append(schwartz_seminorm(K.apply(u), 2, 2))
        fits.append(fit_decay(LEMMA_LADDER, vals, "h", 1e-12 * max(vals)))
    ok = all(f.fitted_order >= 5 and f.r_squared >= 0.9 for f in fits)
    return ok, [(f.fitted_order, f.r_squared) for f in fits]


def _lemma_support(R: float = 0.4):
    """Weyl bump inside B_{R/4}(z0) against coherent states at distance >= R along a ray."""
    axis = LEMMA_AXIS
    z0 = np.array([0.6, 0.8])
    a = SymbolExpr.bump(tuple(z0), R / 4, 8)
    kernels = [build_kernel(DilatedSymbol(a, h).materialize(), 0.5, axis, banded=True) for h in LEMMA_LADDER]
    rows, fits = [], []
    for s in (1.0, 1.5, 2.0, 3.0):
        z = z0 * (1.0 + s * R / np.linalg.norm(z0))
        vals = []
        for K, h in zip(kernels, LEMMA_LADDER):
            u = coherent_state(CoherentStateSpec((z[0],), (z[1],), h), axis)
            vals.append(l2_norm(K.apply(u)))
        rows.append(vals)
        fits.append(fit_decay(LEMMA_LADDER, vals, "h", 1e-13))
    A = np.maximum(np.array(rows), 1e-13)
    monotone = bool(np.all(np.diff(A, axis=0) <= 1e-12 * A[:-1]))
    ok = monotone and all(f.fitted_order >= 5 and f.r_squared >= 0.9 for f in fits)
    return ok, [(f.fitted_order, f.r_squared) for f in fits], monotone


def _lemmas():
    ok_a, fa = _lemma_vanishing()
    ok_b, fb, mono = _lemma_support()
    fmt = lambda fs: ", ".join(f"{o:.1f}/{q:.3f}" for o, q in fs)  # noqa: E731
    detail = f"(a) slope/r2 {fmt(fa)}; (b) slope/r2 {fmt(fb)}, monotone along ray {mono}"
    return ok_a and ok_b, detail, {"vanishing": fa, "support": fb, "monotone": mono}


def criterion_6(ctx=None) -> CriterionResult:
    return _timed(6, "decay lemmas for coherent states", _lemmas)


# ---------------------------------------------------------------------------
# 7. Weyl calculus


def _calculus():
    axis = AxisSpec(16.0, 1024)
    prod = weyl_product_expand(X, XI, 2)
    target = X * XI + SymbolExpr.constant(0.5j)
    pts = np.linspace(-3, 3, 7)
    Z = np.meshgrid(pts, pts, indexing="ij")
    exact_err = float(np.max(np.abs(prod(*Z) - target(*Z))))
    u = standard_signal("HERMITE", {"n": 2}, axis)
    pairs = [(X, XI), (X * X, XI * XI), (XI * XI + X * X, X * XI), (X + XI, X * X)]
    # degree <= 2 pairs: the expansion terminates after the j = 2 term
    comp = max(composition_residual(a, b, 3, u) for a, b in pairs)
    a = X * XI
    # Kohn-Nirenberg: x to the left of D, i.e. t = 1
    left = quantize(a, 1.0, u)
    weyl = quantize(kn_to_weyl(a, 2), 0.5, u)
    kn = l2_norm(left.with_values(left.values - weyl.values)) / l2_norm(left)
    ok = exact_err == 0.0 and comp < 1e-4 and kn < 1e-6
    detail = f"x#xi - (x xi + i/2) = {exact_err:.1e}, composition {comp:.1e} (< 1e-4), KN-to-Weyl {kn:.1e} (< 1e-6)"
    return ok, detail, {"product_error": exact_err, "composition": comp, "kn_to_weyl": kn}


def criterion_7(ctx=None) -> CriterionResult:
    return _timed(7, "Weyl calculus", _calculus)


# ---------------------------------------------------------------------------
# 8. symplectic covariance


def _hausdorff_deg(A, B) -> float:
    if not A and not B:
        return 0.0
    if not A or not B:
        return math.inf

    def gap(a, b):
        d = abs(a - b) % 360.0
        return min(d, 360.0 - d)

    return max(max(min(gap(a, b) for b in B) for a in A), max(min(gap(a, b) for a in A) for b in B))


def _covariance(params):
    u = standard_signal("PRESCRIBED", {"angles": [30.0], "K_max": 7}, COVARIANCE_AXIS)
    base = gabor_wf(u, params=params)
    words = {"FOURIER": ["fourier"], "CHIRP(1)": [{"chirp": 1.0}], "DILATE(2)": [{"dilate": 2.0}]}
    ok, parts, metrics = True, [], {}
    for name, word in words.items():
        word = SymplecticWord.parse(word)
        v = apply_unitary(word, u)
        unit = unitarity_error(word, u)
        rep = gabor_wf(v, params=params)
        image = [map_direction(word, Direction.from_angle(a)).angle_deg for a in base.flagged_angles()]
        image_p = [map_direction(word, Direction.from_angle(a)).angle_deg for a in base.principal]
        dist = _hausdorff_deg(rep.flagged_angles(), image)
        pdist = _hausdorff_deg(rep.principal, image_p)
        good = dist <= 3.0 and pdist <= 3.0 and unit < 1e-6
        ok &= good
        metrics[name] = {"set_distance": dist, "principal_distance": pdist, "unitarity": unit}
        parts.append(f"{name}: set {dist:.2f} deg, principal {pdist:.2f} deg, unitarity {unit:.1e}")
    return ok, "; ".join(parts), metrics


def criterion_8(ctx=None) -> CriterionResult:
    params = with_params((ctx or _Context()).params, n_dirs=FINE_DIRS)
    return _timed(8, "symplectic covariance", _covariance, params)


# ---------------------------------------------------------------------------
# 9. test-symbol invariance

BUMP_RADII = (0.15, 0.075, 0.0375)


def _invariance(ctx: _Context):
    classes = {}
    for rb in BUMP_RADII:
        reps = ctx.reports("hwf") if rb == ctx.params.bump_radius else ctx.reports(f"hwf{rb}")
        classes[rb] = [[c.value for c in r.classes()] for r in reps]
    ref = classes[BUMP_RADII[0]]
    diffs = []
    for rb in BUMP_RADII[1:]:
        for s, (a, b) in enumerate(zip(ref, classes[rb])):
            diffs += [(ctx.signals[s].label, i, rb, x, y) for i, (x, y) in enumerate(zip(a, b)) if x != y]
    detail = f"{len(diffs)} differing classifications over radii {list(BUMP_RADII)}"
    if diffs:
        detail += ": " + ", ".join(f"{lab}[{i}]@{rb}:{x[0]}->{y[0]}" for lab, i, rb, x, y in diffs[:8])
    return not diffs, detail, {"differences": diffs}


def criterion_9(ctx=None) -> CriterionResult:
    return _timed(9, "test-symbol invariance of the homogeneous estimator", _invariance, ctx or _Context())


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(which=None, emit=print) -> list[CriterionResult]:
    ctx = _Context()
    out = []
    for k in which or sorted(CRITERIA):
        res = CRITERIA[k](ctx)
        if emit is not None:
            emit(res.line())
        out.append(res)
    return out
