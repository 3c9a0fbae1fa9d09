import math

import numpy as np
import pytest

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.domain.types import QualityScheme, Tau
from prc_studio.errors.errors import InvalidInputError, OutOfRegimeError
from prc_studio.prc.base import (
    PrcQuery,
    draw_variates,
    poisson_upper_tail,
    prc_exact_fixed_effects,
    prc_posterior,
    prc_quadrature,
    prc_star,
    prc_unconditional,
    prc_unconditional_estimate,
    prc_values,
    summarize_values,
)

SCHEME = QualityScheme.categorical(3)


def _query(w=12, m1=38, m2=38, q1=2, q2=3) -> PrcQuery:
    return PrcQuery(w, m1, m2, q1, q2, SCHEME)


def test_prc_star_hand_value():
    # rate = 10 * 10 * exp(2 beta0) = 1, P(S >= 3) = 1 - 2.5 / e
    beta0 = 0.5 * math.log(0.01)

    assert prc_star(3, 0.0, 0.0, 10, 10, beta0) == pytest.approx(1 - 2.5 / math.e, rel=1e-12)
    assert prc_star(0, 0.0, 0.0, 10, 10, beta0) == 1.0


def test_poisson_upper_tail():
    assert poisson_upper_tail(0, 3.0) == 1.0
    assert poisson_upper_tail(1, 2.0) == pytest.approx(1 - math.exp(-2.0))
    assert np.all(np.diff(poisson_upper_tail(np.arange(10), 2.0)) <= 0)


def test_prc_star_out_of_regime():
    with pytest.raises(OutOfRegimeError):
        prc_star(3, 0.0, 0.0, 38, 38, 15.0)


def test_zero_matches_give_certainty(tau3):
    variates = draw_variates(0, 100)

    assert np.all(prc_values(_query(w=0), tau3, variates) == 1.0)
    assert prc_quadrature(_query(w=0), tau3) == 1.0


def test_prc_is_nonincreasing_in_w(tau3):
    variates = draw_variates(7, 5000)

    values = [prc_unconditional(_query(w=w), tau3, variates=variates) for w in range(20)]

    assert values[0] == 1.0
    assert np.all(np.diff(values) <= 1e-12)


def test_prc_is_symmetric_in_the_quality_pair(tau3):
    variates = draw_variates(1, 2000)

    assert prc_quadrature(_query(q1=1, q2=3), tau3) == prc_quadrature(_query(q1=3, q2=1), tau3)
    assert prc_unconditional(_query(q1=1, q2=3), tau3, variates=variates) == pytest.approx(
        prc_unconditional(_query(q1=3, q2=1), tau3, variates=variates), rel=1e-12
    )


def test_monte_carlo_matches_exact_without_random_effects(tau3):
    tau = tau3.with_log_sigma2(-30.0)
    query = _query(w=8)

    estimate, se = prc_unconditional_estimate(query, tau, mc_draws=200_000, seed=3)

    assert estimate == pytest.approx(prc_exact_fixed_effects(query, tau), abs=4 * se + 1e-9)


def test_monte_carlo_matches_quadrature(tau3):
    query = _query(w=10)

    estimate, se = prc_unconditional_estimate(query, tau3, mc_draws=200_000, seed=4)

    assert estimate == pytest.approx(prc_quadrature(query, tau3), abs=4 * se + 1e-6)


def test_variates_are_deterministic():
    first = draw_variates(3, 70_000)
    again = draw_variates(3, 70_000)

    assert np.array_equal(first.z1, again.z1)
    assert np.array_equal(first.u, again.u)
    assert first.size == 70_000
    # The first chunk doesn't depend on the total size.
    assert np.array_equal(draw_variates(3, 10).z1, first.z1[:10])


def test_prc_posterior_with_identical_draws(tau3):
    samples = PosteriorSamples(
        draws=np.tile(tau3.to_vector(), (3, 1)),
        weights_diagnostic=np.full(3, 1 / 3),
        seed=0,
        scheme=SCHEME,
        ess=3.0,
        proposals=3,
    )

    report = prc_posterior(_query(), samples, mc_draws=1000, seed=2)

    assert report.sd == 0.0
    assert report.ci_low == report.mean == report.ci_high
    assert report.r_samples == 3
    assert report.mc_draws == 1000
    assert report.mean == pytest.approx(
        prc_unconditional(_query(), tau3, mc_draws=1000, seed=2), rel=1e-12
    )


def test_summarize_values_clips_to_unit_interval():
    report = summarize_values(np.array([0.001, 0.002, 0.9]), alpha=0.001, mc_draws=10)

    assert 0.0 <= report.ci_low <= report.mean <= report.ci_high <= 1.0
    assert report.ci_low == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param(dict(w=-1), id="negative w"),
        pytest.param(dict(m1=0), id="no minutiae"),
        pytest.param(dict(q1=4), id="invalid label"),
    ],
)
def test_invalid_queries(kwargs):
    with pytest.raises(InvalidInputError):
        _query(**kwargs)


def test_continuous_quadrature_is_a_probability():
    scheme = QualityScheme.continuous()
    tau = Tau.from_vector([-1.2801, -5.8520, -2.9047, -4.9518], scheme)

    value = prc_quadrature(PrcQuery(12, 38, 38, 0.5, 0.5, scheme), tau)

    assert 0.0 < value < 1.0
