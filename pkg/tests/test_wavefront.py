import math

import numpy as np
import pytest

import wfg.wavefront as wf
from wfg.errors import ConfigError
from wfg.grid import AxisSpec, DecayClass, DecayFit, Direction
from wfg.synthesis import standard_signal
from wfg.wavefront import (
    AgreementMatrix,
    EstimatorParams,
    Method,
    WaveFrontReport,
    analysis_radius,
    compare_many,
    compare_reports,
    default_ladder,
    flagged_components,
    gabor_wf,
    gabor_wf_lattice,
    hstft_local_report,
    hwf_estimate,
    principal_match,
    resolve_threads,
    truncated_ladder,
    with_params,
)

AX = AxisSpec(40.0, 2048)
P = EstimatorParams(n_dirs=16)
R, S, I = DecayClass.RAPID, DecayClass.SLOW, DecayClass.INDETERMINATE


@pytest.fixture(scope="module")
def gaussian():
    return standard_signal("GAUSSIAN", {}, AX)


@pytest.fixture(scope="module")
def plane():
    return standard_signal("PLANE_WAVE", {"xi0": 0.0}, AX)


@pytest.fixture(scope="module")
def prescribed():
    return standard_signal("PRESCRIBED", {"angles": [45.0]}, AX)


def flagged(rep):
    return sorted(round(a, 6) for a in rep.flagged_angles())


class TestGabor:
    def test_gaussian_is_rapid_everywhere(self, gaussian):
        rep = gabor_wf(gaussian, params=P)
        assert rep.method is Method.GABOR_CONE
        assert set(rep.classes()) == {R}
        assert rep.principal == []

    def test_plane_wave_flags_the_x_axis(self, plane):
        rep = gabor_wf(plane, params=P)
        assert flagged(rep) == [0.0, 180.0]

    def test_prescribed_direction(self, prescribed):
        rep = gabor_wf(prescribed, params=with_params(P, n_dirs=72))
        assert 45.0 in flagged(rep)
        assert all(abs(a - 45.0) <= 10.0 for a in rep.flagged_angles())
        assert principal_match(rep.principal, [45.0], 3.0)

    def test_threads_do_not_change_results(self, prescribed):
        a = gabor_wf(prescribed, params=P).to_dict()
        b = gabor_wf(prescribed, params=with_params(P, threads=3)).to_dict()
        assert a == b

    def test_lattice_agrees(self, plane, gaussian):
        for u in (plane, gaussian):
            m = compare_reports(gabor_wf(u, params=P), gabor_wf_lattice(u, params=P))
            assert m.agreement == 1.0

    def test_lattice_density_guard(self, plane):
        with pytest.raises(ConfigError):
            gabor_wf_lattice(plane, lattice=(3.0, 3.0), params=P)


def test_hstft_local(plane, gaussian):
    assert set(hstft_local_report(gaussian, params=P).classes()) <= {R, I}
    rep = hstft_local_report(plane, params=P)
    assert {0.0, 180.0} <= set(flagged(rep))


class TestHomogeneous:
    DIRS = [Direction.from_angle(a) for a in (0.0, 45.0, 90.0, 180.0)]

    def test_gaussian_rapid(self, gaussian):
        rep = hwf_estimate(gaussian, self.DIRS, params=P)
        assert rep.method is Method.HOMOGENEOUS
        assert set(rep.classes()) == {R}

    def test_plane_wave(self, plane):
        rep = hwf_estimate(plane, self.DIRS, params=P)
        assert rep.classes() == [S, R, R, S]

    def test_test_symbol_peaks_at_direction(self):
        w = Direction.from_angle(30.0)
        a = wf.test_symbol(w, 0.15)
        assert a.eval(w.w) == 1.0
        assert a.eval((2 * w.w[0], 2 * w.w[1])) == 0.0


def test_analysis_radius(plane, prescribed, gaussian):
    assert analysis_radius(gaussian, P) == pytest.approx(0.8 * 40.0)
    assert analysis_radius(plane, P) == pytest.approx(0.6 * 40.0)
    assert analysis_radius(prescribed, P) == prescribed.meta["valid_radius"]


def test_truncated_ladder():
    h = default_ladder(10, 0.5)
    assert h[0] == 1.0 and math.isclose(h[-1], 0.5**9)
    assert truncated_ladder(h, 1.0, 4.0).tolist() == [1.0, 0.5, 0.25]


def test_flagged_components_wrap():
    def res(classes):
        return [wf.DirectionResult(Direction.from_angle(i * 45.0), 0.1, DecayFit([1, 2], [1, 1], 0.0, 1.0, c)) for i, c in enumerate(classes)]

    assert flagged_components(res([S, S, R, R, S, R, R, S])) == [[4], [7, 0, 1]]
    assert flagged_components(res([R] * 8)) == []
    assert flagged_components(res([S] * 8)) == [list(range(8))]


class TestAgreement:
    def report(self, classes, method=Method.GABOR_CONE, n=None):
        dirs = [Direction.from_angle(360.0 * i / (n or len(classes))) for i in range(len(classes))]
        res = [wf.DirectionResult(d, 0.1, DecayFit([1, 2], [1, 1], 0.0, 1.0, c)) for d, c in zip(dirs, classes)]
        return WaveFrontReport("s", method, res, wf.ConicRegion())

    def test_fractions(self):
        m = compare_reports(self.report([R, S, I, R]), self.report([R, R, S, I], Method.HOMOGENEOUS))
        assert m.indeterminate_fraction == 0.5
        assert m.agreement == 0.5
        assert len(m.disagreements()) == 1
        back = AgreementMatrix.from_dict(m.to_dict())
        assert back.pairs == m.pairs

    def test_self_agreement_and_empty(self):
        r = self.report([R, S, S, R])
        assert compare_reports(r, r).agreement == 1.0
        allind = compare_reports(self.report([I, I]), self.report([I, I]))
        assert allind.agreement == 1.0 and allind.indeterminate_fraction == 1.0
        assert compare_many([r, r], [r, r]).agreement == 1.0

    def test_mismatched_directions(self):
        with pytest.raises(ConfigError):
            compare_reports(self.report([R, R, R, R]), self.report([R, R, R, R, R]))
        with pytest.raises(ConfigError):
            compare_many([self.report([R])], [])

    def test_report_round_trip(self):
        r = self.report([R, S, I, R])
        r.principal = [12.5]
        assert WaveFrontReport.from_dict(r.to_dict()).to_dict() == r.to_dict()


def test_principal_match():
    assert principal_match([359.0], [1.0], 3.0)
    assert not principal_match([359.0], [5.0], 3.0)
    assert not principal_match([], [5.0], 3.0)


class TestParams:
    @pytest.mark.parametrize(
        "bad", [{"theta_deg": 0.0}, {"n_dirs": 2}, {"rho": 1.0}, {"h_ladder": (1.0, 1.0)}, {"lattice": (3.0, 3.0)}]
    )
    def test_validation(self, bad):
        with pytest.raises(ConfigError):
            EstimatorParams(**bad)

    def test_round_trip(self):
        # the snapshot resolves defaults (e.g. u_radius), so compare snapshots
        p = with_params(P, theta_deg=5.0, kernel_drop_tol=0.0)
        assert EstimatorParams.from_dict(p.to_dict()).to_dict() == p.to_dict()

    def test_threads(self, monkeypatch):
        monkeypatch.setenv("WFG_THREADS", "3")
        assert resolve_threads() == 3 and resolve_threads(2) == 2
        monkeypatch.setenv("WFG_THREADS", "x")
        assert resolve_threads() == 1
