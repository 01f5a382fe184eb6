import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sliceloc.errors import DegenerateFit, InsufficientSamples, InvalidConfig
from sliceloc.nullmodel import (
    DEFAULT_PARAMS,
    PRINTED_PARAMS,
    NullModelParams,
    calibrate,
    q_cdf,
    q_density,
    sample_errors,
)

P = DEFAULT_PARAMS


@st.composite
def valid_params(draw):
    t1 = draw(st.floats(5, 90))
    t2 = draw(st.floats(t1 + 5, 180))
    A = -draw(st.floats(1e-7, 1e-3))
    B = -A * t2 * draw(st.floats(1.0, 3.0))
    return NullModelParams.from_line(t1, t2, A, B)


def test_default_values():
    assert P.B == pytest.approx(8.844e-3, rel=1e-12)
    assert P.C == pytest.approx(5.494e-3, rel=1e-12)
    assert P.K == pytest.approx(0.49995, abs=1e-5)
    assert P.is_valid


def test_printed_params_are_invalid():
    assert PRINTED_PARAMS.B == 8.8e-4
    assert not PRINTED_PARAMS.is_valid
    with pytest.raises(InvalidConfig):
        PRINTED_PARAMS.validate()


def test_q_density_branches():
    assert q_density(P.t2) == 0.0
    assert q_density(0.0) == pytest.approx(5.494e-3, rel=1e-12)
    assert q_density(P.t1 - 1e-12) == pytest.approx(q_density(P.t1), abs=1e-12)
    assert q_density(200.0) == 0.0


def test_q_cdf_anchors():
    assert q_cdf(0.0) == 0.0
    assert q_cdf(P.t2) == 1.0
    assert q_cdf(179.0) == 1.0
    assert q_cdf(50.0) == pytest.approx(0.5494, abs=1e-3)


def test_q_cdf_vectorised():
    t = np.array([0.0, 25.0, 50.0, 132.0])
    np.testing.assert_allclose(q_cdf(t), [q_cdf(x) for x in t])


@settings(max_examples=50, deadline=None)
@given(valid_params())
def test_k_matches_quadrature(p):
    pts = [p.t1]
    num, _ = integrate.quad(lambda t: q_density(t, p), 0, p.t2, points=pts, epsabs=1e-14, epsrel=1e-12)
    assert p.K == pytest.approx(num, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(valid_params())
def test_cdf_matches_trapezoid(p):
    grid = np.linspace(0.0, p.t2, 200_001)
    cum = integrate.cumulative_trapezoid(q_density(grid, p), grid, initial=0.0) / p.K
    idx = np.linspace(0, grid.size - 2, 50).astype(int)
    np.testing.assert_allclose(q_cdf(grid[idx], p), cum[idx], atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(valid_params(), st.lists(st.floats(0, 200), min_size=2, max_size=50))
def test_cdf_monotone(p, thetas):
    vals = q_cdf(np.sort(thetas), p)
    assert np.all(np.diff(vals) >= 0)
    assert np.all((vals >= 0) & (vals <= 1))


def test_sampler_matches_cdf():
    rng = np.random.default_rng(0)
    s = sample_errors(P, 200_000, rng)
    for t in (10.0, 50.0, 100.0, 131.0):
        assert np.mean(s < t) == pytest.approx(q_cdf(t) * P.K, abs=5e-3)
    assert np.all((s >= 0) & (s <= 180))


def test_calibrate_round_trip():
    rng = np.random.default_rng(1)
    fit = calibrate(sample_errors(P, 1_000_000, rng))
    for name in ("A", "B", "C"):
        assert getattr(fit, name) == pytest.approx(getattr(P, name), rel=0.05), name
    assert fit.is_valid


def test_calibrate_keeps_density_nonnegative():
    # rising histogram on [t1, t2): the line is lifted to stay >= 0
    rng = np.random.default_rng(2)
    s = np.concatenate([rng.uniform(0, 50, 20_000), rng.triangular(50, 132, 132, 20_000)])
    fit = calibrate(s)
    assert fit.A > 0
    assert fit.A * fit.t1 + fit.B >= -1e-15
    assert fit.is_valid


def test_calibrate_errors():
    with pytest.raises(InsufficientSamples):
        calibrate(np.ones(100))
    with pytest.raises(DegenerateFit):
        calibrate(np.zeros(20_000))
    with pytest.raises(DegenerateFit):
        calibrate(np.random.default_rng(3).uniform(0, 50, 20_000))


def test_params_validation():
    with pytest.raises(InvalidConfig):
        NullModelParams.from_line(60, 50, -1e-5, 1e-2).validate()
    bad_c = NullModelParams(50, 132, -6.7e-5, 8.844e-3, 1.0, 0.5)
    with pytest.raises(InvalidConfig):
        bad_c.validate()
    assert math.isfinite(P.K)
