import math

import numpy as np
import pytest
from scipy.optimize import brentq

from servicediff import (INFINITY, AssumptionViolation, IllConditionedError,
                         InvalidParameterError, canonical_quality, derive_virtual_functions,
                         inverse_congestion_quality, make_distribution, make_power_distribution,
                         make_quality, payg_transform)

E1 = math.exp(-1.0)


def test_power_distribution_closed_forms():
    u = make_power_distribution(1.0)
    assert u.cdf(np.array([0.5]))[0] == 0.5 and u.pdf(np.array([0.5]))[0] == 1.0
    sq = make_power_distribution(2.0)
    assert sq.cdf(np.array([0.5]))[0] == 0.25 and sq.pdf(np.array([0.5]))[0] == 1.0
    assert sq.cdf(np.array([0.0, 1.0])).tolist() == [0.0, 1.0]


def test_power_distribution_half_blows_up_at_zero():
    d = make_power_distribution(0.5)
    f = d.pdf(np.array([1e-6, 1e-3, 1.0]))
    assert f[0] == pytest.approx(0.5 / math.sqrt(1e-6)) and f[0] > f[1] > f[2]
    vf = derive_virtual_functions(d, canonical_quality())
    assert vf.theta0 == pytest.approx(1.5 ** -2, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_power_distribution_rejects_nonpositive(alpha):
    with pytest.raises(InvalidParameterError):
        make_power_distribution(alpha)


def test_uniform_virtual_valuation():
    vf = derive_virtual_functions(make_power_distribution(1.0), canonical_quality())
    t = np.linspace(0.01, 1.0, 50)
    assert np.allclose(vf.G(t), 2 * t - 1, atol=1e-14)
    assert vf.theta0 == pytest.approx(0.5, abs=1e-10)


def test_alpha_two_zero_matches_algebra():
    # G = (3t^2 - 1) / (2t); its root found independently by brentq
    ref = brentq(lambda t: (3 * t * t - 1) / (2 * t), 0.1, 1.0, xtol=1e-15)
    vf = derive_virtual_functions(make_power_distribution(2.0), canonical_quality())
    assert ref == pytest.approx(1 / math.sqrt(3), abs=1e-14)
    assert vf.theta0 == pytest.approx(ref, abs=1e-10)


def test_canonical_virtual_capacity_endpoints():
    vf = derive_virtual_functions(make_power_distribution(1.0), canonical_quality())

    def symbolic(q):
        return 2 * (1 - q) * (1 - E1) * math.exp(q)

    assert vf.h_at_1 == 0.0
    assert vf.h_at_0 == pytest.approx(2 * (1 - E1), abs=1e-12)
    for q in (1e-8, 1 - 1e-8, 0.3):
        assert vf.h(np.array([q]))[0] == pytest.approx(symbolic(q), rel=1e-9, abs=1e-15)


def test_unbounded_capacity_model():
    vf = derive_virtual_functions(make_power_distribution(1.0), inverse_congestion_quality())
    assert vf.h_at_0 == INFINITY and vf.w_at_0 == INFINITY
    assert vf.h_at_1 == pytest.approx(math.e * (1 - E1), rel=1e-9)


def test_payg_transform_values():
    base = canonical_quality()
    p = payg_transform(base)
    assert p.kind == "payg-transformed"
    assert p.w(np.array([1.0]))[0] == 0.0
    assert p.w(np.array([0.0]))[0] == 1.0
    v_half = (math.exp(-0.5) - E1) / (1 - E1)
    assert v_half == pytest.approx(0.377541, abs=1e-6)
    assert p.w(np.array([0.5]))[0] == pytest.approx(0.25 * v_half, abs=1e-15)


@pytest.mark.parametrize("model", [canonical_quality(), payg_transform(canonical_quality())])
def test_derivatives_agree_with_differences(model):
    eps = 1e-5
    q = np.linspace(0.0, 1.0, 258)[1:-1]
    for f, df in ((model.v, model.dv), (model.w, model.dw)):
        fd = (f(q + eps) - f(q - eps)) / (2 * eps)
        assert np.max(np.abs(fd - df(q))) <= 10 * eps


def test_make_quality_fills_derivatives():
    model = make_quality(lambda q: 1 - q, lambda q: (1 - q) ** 2)
    q = np.array([0.2, 0.7])
    assert np.allclose(model.dv(q), -1.0, atol=1e-8)
    assert np.allclose(model.dw(q), -2 * (1 - q), atol=1e-8)


def test_make_quality_rejects_bad_normalisation():
    with pytest.raises(InvalidParameterError):
        make_quality(lambda q: 0.9 - q, lambda q: 1 - q)
    with pytest.raises(InvalidParameterError):
        make_quality(lambda q: 1 - q, lambda q: 0.5 + 0 * q)


def test_increasing_virtual_capacity_is_rejected():
    # v = 1 - q and w = 1 - q^2 give h = 2q, increasing
    model = make_quality(lambda q: 1 - q, lambda q: 1 - q ** 2,
                         dv=lambda q: -np.ones_like(q), dw=lambda q: -2 * q)
    with pytest.raises(AssumptionViolation) as err:
        derive_virtual_functions(make_power_distribution(1.0), model)
    assert err.value.assumption == "virtual capacity"


def test_bimodal_distribution_is_rejected():
    s = 0.05

    def pdf(t):
        t = np.asarray(t, dtype=float)
        return (np.exp(-((t - 0.2) / s) ** 2) + np.exp(-((t - 0.9) / s) ** 2)
                + 1e-3) / norm

    from scipy.special import erf
    norm = s * math.sqrt(math.pi) / 2 * (erf(0.8 / s) + erf(0.2 / s) + erf(0.1 / s)
                                         + erf(0.9 / s)) + 1e-3

    def cdf(t):
        t = np.asarray(t, dtype=float)
        c = s * math.sqrt(math.pi) / 2
        return (c * (erf((t - 0.2) / s) + erf(0.2 / s) + erf((t - 0.9) / s) + erf(0.9 / s))
                + 1e-3 * t) / norm

    dist = make_distribution(pdf, cdf)
    with pytest.raises(AssumptionViolation) as err:
        derive_virtual_functions(dist, canonical_quality())
    assert err.value.assumption == "virtual valuation"


def test_tiny_density_is_ill_conditioned():
    vf = derive_virtual_functions(make_power_distribution(2.0), canonical_quality())
    with pytest.raises(IllConditionedError):
        vf.G(np.array([0.0]))


def test_inverse_round_trips(uniform):
    y = np.linspace(0.0, 1.0, 101)
    assert np.max(np.abs(uniform.G(uniform.G_inv(y)) - y)) <= 1e-8
    z = np.linspace(uniform.h_at_1, uniform.h_at_0, 101)
    assert np.max(np.abs(uniform.h(uniform.h_inv(z)) - z)) <= 1e-8
    assert abs(uniform.G(np.array([uniform.theta0]))[0]) <= 1e-9


def test_extended_inverse_shape(uniform):
    z = np.linspace(-0.5, 3.0, 1024)
    q = uniform.h_inv(z)
    assert np.all(np.diff(q) <= 0)
    assert np.all(q[z > uniform.h_at_0] == 0.0) and np.all(q[z <= uniform.h_at_1] == 1.0)
