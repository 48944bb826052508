import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfg.errors import ConfigError, GridError
from wfg.grid import AxisSpec, ConicRegion, Direction, SampledSignal, l2_norm
from wfg.metaplectic import (
    Generator,
    Step,
    SymplecticWord,
    apply_unitary,
    is_symplectic,
    map_direction,
    map_region,
    symplectic_form,
    unitarity_error,
)
from wfg.synthesis import standard_signal

AX = AxisSpec(20.0, 1024)

steps = st.one_of(
    st.just("fourier"),
    # after a Fourier step the box is the dual axis (L ~ 80), which bounds |c|
    st.floats(-0.15, 0.15).map(lambda c: {"chirp": c}),
    st.floats(0.7, 1.4).map(lambda l: {"dilate": l}),
)


def coherent(axis, x0, xi0):
    x = axis.grid
    return SampledSignal(axis, math.pi**-0.25 * np.exp(-0.5 * (x - x0) ** 2 + 1j * xi0 * x))


@given(st.lists(steps, max_size=6), st.sampled_from([1, 2]))
def test_words_are_symplectic(word, d):
    w = SymplecticWord.parse(word)
    assert is_symplectic(w.matrix(d), tol=1e-9)
    assert w.matrix(d).shape == (2 * d, 2 * d)


@given(st.lists(steps, max_size=3), st.lists(steps, max_size=3))
def test_concatenation_multiplies(a, b):
    A, B = SymplecticWord.parse(a), SymplecticWord.parse(b)
    assert np.allclose((A + B).matrix(), B.matrix() @ A.matrix())


def test_generator_matrices():
    assert np.array_equal(SymplecticWord.fourier().matrix(), symplectic_form(1))
    assert np.array_equal(SymplecticWord.chirp(2.0).matrix(), [[1, 0], [2, 1]])
    assert np.array_equal(SymplecticWord.dilate(2.0).matrix(), [[2, 0], [0, 0.5]])


def test_parse_forms_and_errors():
    w = SymplecticWord.parse(["fourier", {"chirp": 1.5}, ("dilate", 2.0), {"FOURIER": None}])
    assert [s.kind for s in w.steps] == [Generator.FOURIER, Generator.CHIRP, Generator.DILATE, Generator.FOURIER]
    assert SymplecticWord.parse(w.to_list()) == w
    for bad in (["rotate"], [{"chirp": 1, "dilate": 2}], "fourier", [{"shear": 1.0}], [{"dilate": -1.0}], [42]):
        with pytest.raises(ConfigError):
            SymplecticWord.parse(bad)
    with pytest.raises(ConfigError):
        Step(Generator.CHIRP, math.inf)


class TestUnitaries:
    @given(st.floats(-4, 4), st.floats(-4, 4))
    def test_fourier_moves_coherent_states(self, x0, xi0):
        out = apply_unitary(["fourier"], coherent(AX, x0, xi0))
        target = coherent(out.axis, xi0, -x0)
        # equal up to a global phase
        assert abs(abs(np.vdot(target.values, out.values)) * out.axis.dx - 1) < 1e-10

    def test_fourier_fixes_the_gaussian(self):
        g = standard_signal("GAUSSIAN", {}, AX)
        out = apply_unitary(["fourier"], g)
        assert np.max(np.abs(out.values - math.pi**-0.25 * np.exp(-0.5 * out.axis.grid**2))) < 1e-13

    @given(st.floats(-1.0, 1.0), st.floats(-3, 3), st.floats(-3, 3))
    def test_chirp_moves_coherent_states(self, c, x0, xi0):
        out = apply_unitary([{"chirp": c}], coherent(AX, x0, xi0))
        z = SymplecticWord.chirp(c).matrix() @ [x0, xi0]
        # |.| of a chirped Gaussian is unchanged; the local frequency at x0 is xi0 + c x0
        assert np.allclose(np.abs(out.values), np.abs(coherent(AX, *z).values))
        assert math.isclose(z[1], xi0 + c * x0)

    @given(st.floats(0.5, 2.0))
    def test_dilation_closed_form(self, lam):
        g = SampledSignal(AX, np.exp(-0.5 * AX.grid**2))
        out = apply_unitary([{"dilate": lam}], g)
        exact = np.exp(-0.5 * (AX.grid / lam) ** 2) / math.sqrt(lam)
        assert np.max(np.abs(out.values - exact)) < 1e-10

    @given(st.lists(steps, min_size=1, max_size=4))
    def test_unitary(self, word):
        u = coherent(AX, 1.0, -0.5)
        assert unitarity_error(word, u) < 1e-9

    def test_inverse_words_return_the_signal(self):
        u = coherent(AX, 1.0, 2.0)
        back = apply_unitary([{"dilate": 1.3}, {"chirp": 0.4}, {"chirp": -0.4}, {"dilate": 1 / 1.3}], u)
        assert l2_norm(back.with_values(back.values - u.values)) < 1e-10
        four = apply_unitary(["fourier"] * 4, u)
        assert np.max(np.abs(four.values - u.values)) < 1e-10

    def test_two_dimensional(self):
        ax = AxisSpec(10.0, 64, 2)
        u = standard_signal("GAUSSIAN", {}, ax)
        for word in (["fourier"], [{"chirp": 0.5}], [{"dilate": 1.2}]):
            assert unitarity_error(word, u) < 1e-10

    def test_guards(self):
        u = coherent(AX, 0.0, 0.0)
        with pytest.raises(GridError):
            apply_unitary([{"chirp": 10.0}], u)  # |c| L beyond the Nyquist budget
        with pytest.raises(GridError):
            apply_unitary([{"dilate": 30.0}], coherent(AX, 2.0, 0.0))  # pushed out of the box

    def test_meta_transport(self):
        u = standard_signal("PRESCRIBED", {"angles": [0.0], "K_max": 2}, AX)
        out = apply_unitary([{"dilate": 2.0}], u)
        assert np.allclose(out.meta["prescribed"], [[1.0, 0.0]])
        assert out.meta["valid_radius"] == pytest.approx(2.0 * u.meta["valid_radius"])
        assert out.meta["word"] == [{"dilate": 2.0}]
        g = apply_unitary([{"dilate": 2.0}], standard_signal("GAUSSIAN", {}, AX))
        assert "valid_radius" not in g.meta


class TestConicMaps:
    def test_directions(self):
        assert np.allclose(map_direction(["fourier"], Direction.from_angle(0)).w, (0, -1))
        assert np.allclose(map_direction([{"chirp": 1.0}], (1.0, 0.0)).w, (1 / math.sqrt(2),) * 2)
        d = map_direction([{"dilate": 2.0}], Direction.from_angle(45.0))
        assert np.allclose(d.w, np.array([2.0, 0.5]) / math.hypot(2.0, 0.5))

    @given(st.lists(steps, min_size=1, max_size=3), st.floats(0, 360), st.floats(1, 20), st.floats(-1, 1))
    def test_region_contains_images(self, word, angle, theta_deg, frac):
        region = ConicRegion(((Direction.from_angle(angle), math.radians(theta_deg)),))
        image = map_region(word, region)
        inside = Direction.from_angle(angle + frac * theta_deg * 0.999)
        chi = SymplecticWord.parse(word).matrix()
        assert image.contains(chi @ inside.array)
