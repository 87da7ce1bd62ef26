import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzwindow.gaussian import GaussianState, SqueezedSource, make_coherent, make_squeezed_vacuum
from mzwindow.intensity import (
    SCHEMES,
    best_caves_sensitivity,
    caves_sensitivity,
    degradation_table,
    intensity_stats,
    photon_number_fringe,
)
from mzwindow.metrology import best_sensitivity
from mzwindow.noise import (
    DetectorNoise,
    LossChannel,
    apply_detector_noise,
    apply_loss,
    loss_cov,
    pure_loss_mapping,
)
from mzwindow.response import InterferometerScenario

S = InterferometerScenario.make


def test_channel_validation():
    for eta in (0.0, 1.5, math.nan):
        with pytest.raises(ValueError):
            LossChannel(eta)
    with pytest.raises(ValueError):
        DetectorNoise(-1.0)


def test_loss_identity_and_vacuum_limit():
    src = SqueezedSource(0.47, 0.58)
    same = apply_loss(src, 1.0)
    assert same.varsigma == pytest.approx(src.varsigma)
    assert same.purity == pytest.approx(src.purity)
    dark = apply_loss(src, 1e-12)
    assert dark.varsigma == pytest.approx(1.0, abs=1e-6)
    assert dark.purity == pytest.approx(1.0, abs=1e-5)


def test_loss_example():
    out = apply_loss(SqueezedSource(0.47), 0.5)
    assert out.varsigma == pytest.approx(0.7813, abs=1e-4)
    assert out.purity == pytest.approx(0.7699, abs=1e-4)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_loss_matches_pure_closed_form(vs, eta):
    out = apply_loss(SqueezedSource(vs), eta)
    np.testing.assert_allclose((out.varsigma, out.purity), pure_loss_mapping(vs, eta), rtol=1e-10)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_loss_composes(vs, p, e1, e2):
    src = SqueezedSource(vs, max(vs, p))
    two = apply_loss(apply_loss(src, e1), e2)
    one = apply_loss(src, e1 * e2)
    np.testing.assert_allclose((two.varsigma, two.purity), (one.varsigma, one.purity), rtol=1e-10)


def test_loss_on_covariance():
    cov = make_squeezed_vacuum(SqueezedSource(0.5)).cov
    np.testing.assert_allclose(loss_cov(cov, 1.0), cov)
    np.testing.assert_allclose(loss_cov(cov, 0.5), 0.5 * cov + 0.125 * np.eye(2))


@given(st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 2))
def test_detector_noise_adds_in_quadrature(v, w1, w2):
    once = apply_detector_noise(v, DetectorNoise(math.hypot(w1, w2)))
    twice = apply_detector_noise(apply_detector_noise(v, w1), w2)
    assert once == pytest.approx(twice, rel=1e-12)
    assert once == pytest.approx(v + w1**2 + w2**2)


def test_intensity_of_standard_states():
    assert intensity_stats(make_coherent(0.0)) == pytest.approx((0.0, 0.0), abs=1e-15)
    n, var = intensity_stats(make_coherent(3.0))
    assert (n, var) == pytest.approx((9.0, 9.0))
    src = SqueezedSource.from_r(0.8)
    n, var = intensity_stats(make_squeezed_vacuum(src))
    assert n == pytest.approx(math.sinh(0.8) ** 2)
    assert var == pytest.approx(2 * math.sinh(0.8) ** 2 * math.cosh(0.8) ** 2)
    nbar = 2.5
    thermal = GaussianState([0, 0], (2 * nbar + 1) / 4 * np.eye(2))
    assert intensity_stats(thermal) == pytest.approx((nbar, nbar**2 + nbar))
    with pytest.raises(IndexError):
        intensity_stats(thermal, 1)


def test_photon_number_fringe():
    s = S(10, 1)
    phi = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(photon_number_fringe(s, phi + 2 * math.pi), photon_number_fringe(s, phi),
                               rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(photon_number_fringe(s, phi), 100 * np.sin(phi / 2) ** 2, atol=1e-9)


def test_caves_classical_reaches_coherent_limit():
    sig, _ = best_caves_sensitivity(S(10, 1))
    assert sig == pytest.approx(0.1, rel=1e-3)
    assert caves_sensitivity(S(10, 1), math.pi) == math.inf


@pytest.mark.parametrize("reader", ["binned", "caves"])
def test_noise_never_helps(reader):
    sigmas = []
    for w in (0.0, 0.5, 1.0, 2.0):
        s = S(5, 0.5, 1, 0.5, noise_w=w or None)
        f = best_sensitivity if reader == "binned" else best_caves_sensitivity
        sigmas.append(f(s)[0])
    assert np.all(np.diff(sigmas) >= -1e-12)


def test_noiseless_table_is_unity():
    table = degradation_table(w=0.0)
    np.testing.assert_array_equal(table.ratios, 1.0)
    assert table.schemes == SCHEMES
    assert table.cell("binned_classical", 5.0) == 1.0
    with pytest.raises(ValueError):
        degradation_table(w=-1.0)


def test_table_ratios_exceed_one():
    table = degradation_table(alphas=(5.0,), schemes=("binned_classical", "intensity_classical"))
    assert table.cell("binned_classical", 5.0) == pytest.approx(2.29, abs=0.01)
    assert table.cell("intensity_classical", 5.0) == pytest.approx(2.04, abs=0.01)
    assert not table.ratios.flags.writeable
