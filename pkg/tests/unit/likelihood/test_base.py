import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import poisson

from prc_studio.dataset_handler.matches import build_dataset
from prc_studio.dataset_handler.pairs import enumerate_impostor_pairs
from prc_studio.domain.types import Tau
from prc_studio.errors.errors import InvalidInputError, ModeNotFoundError
from prc_studio.likelihood.base import (
    clamp_log_sigma2,
    find_mode,
    g_objective,
    gradient_b,
    hessian_b,
    laplace_loglik,
    neg_log_complete,
    neg_log_observed,
)
from prc_studio.model.base import type_etas


def _central_difference(func, x, h=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (func(x + step) - func(x - step)) / (2 * h)
    return grad


def test_observed_likelihood_collapses_to_one_poisson_per_pair(small_dataset, tau3):
    b = np.array([0.1, -0.2, 0.05])
    data = small_dataset
    rates = np.array(
        [
            data.m_a[k]
            * data.m_b[k]
            * np.exp(b[data.finger_a[k]] + b[data.finger_b[k]])
            * np.exp(type_etas(tau3.fixed, data.q_a[k], data.q_b[k], data.scheme)[0]).sum()
            for k in range(data.n_pairs)
        ]
    )

    expected = -poisson.logpmf(data.y, rates).sum()
    assert neg_log_observed(tau3, b, data) == pytest.approx(expected, rel=1e-10)


def test_complete_likelihood_requires_counts_adding_up_to_y(small_dataset, tau3):
    b = np.zeros(3)
    counts = np.zeros((small_dataset.n_pairs, 4))
    counts[:, 0] = small_dataset.y
    neg_log_complete(tau3, b, counts, small_dataset)

    counts[0, 1] += 1.0
    with pytest.raises(InvalidInputError):
        neg_log_complete(tau3, b, counts, small_dataset)


def test_gradient_b_matches_finite_differences(small_dataset, tau3):
    b = np.array([0.2, -0.1, 0.3])

    numeric = _central_difference(lambda x: g_objective(tau3, x, small_dataset), b)
    assert np.allclose(gradient_b(tau3, b, small_dataset), numeric, rtol=1e-5, atol=1e-5)


def test_hessian_b_matches_finite_differences(small_dataset, tau3):
    b = np.array([0.2, -0.1, 0.3])
    hessian = hessian_b(tau3, b, small_dataset)

    for i in range(3):
        numeric = _central_difference(lambda x: gradient_b(tau3, x, small_dataset)[i], b)
        assert np.allclose(hessian[i], numeric, rtol=1e-5, atol=1e-5)
    assert np.allclose(hessian, hessian.T)


def test_find_mode_converges(simulated, tau3):
    data = simulated.dataset
    mode = find_mode(tau3, data)

    assert mode.iterations > 0
    assert np.max(np.abs(gradient_b(tau3, mode.b_hat, data))) < 1e-5
    assert np.all(np.linalg.eigvalsh(mode.hessian) > 0)
    assert g_objective(tau3, mode.b_hat, data) <= g_objective(tau3, np.zeros(3), data)


def test_find_mode_warm_start_agrees(simulated, tau3):
    data = simulated.dataset
    cold = find_mode(tau3, data)
    warm = find_mode(tau3, data, b0=cold.b_hat + 0.05)

    assert np.allclose(cold.b_hat, warm.b_hat, atol=1e-6)


def test_find_mode_iteration_limit(simulated, tau3):
    with pytest.raises(ModeNotFoundError) as e:
        find_mode(tau3, simulated.dataset, max_iter=0)

    assert e.value.iterations == 0


def test_laplace_terms_add_up(simulated, tau3):
    result = laplace_loglik(tau3, simulated.dataset)

    assert result.loglik == pytest.approx(result.term_a + result.term_b)
    assert result.term_a == pytest.approx(-g_objective(tau3, result.mode.b_hat, simulated.dataset))


def test_clamp_log_sigma2_warns(msg_handler, tau3):
    tiny = tau3.with_log_sigma2(-40.0)

    clamped = clamp_log_sigma2(tiny, floor=-30.0, msg_handler=msg_handler)

    assert clamped.log_sigma2 == -30.0
    msg_handler.send_message.assert_called_once()
    event = msg_handler.send_message.call_args.args[0]
    assert event.name == "log_sigma2_clamped"

    msg_handler.reset_mock()
    assert clamp_log_sigma2(tau3, msg_handler=msg_handler) is tau3
    msg_handler.send_message.assert_not_called()


def test_random_effects_length_checked(small_dataset, tau3):
    with pytest.raises(InvalidInputError):
        neg_log_observed(tau3, np.zeros(2), small_dataset)


def _splits(y: int):
    """Every way of writing y as an ordered sum of four nonnegative counts."""
    for a in range(y + 1):
        for b in range(y - a + 1):
            for c in range(y - a - b + 1):
                yield (a, b, c, y - a - b - c)


def test_observed_likelihood_is_the_sum_over_every_split(scheme3, tau3):
    data = build_dataset(
        finger_a=[1, 1, 2],
        impr_a=[1, 1, 1],
        finger_b=[2, 3, 3],
        impr_b=[1, 1, 1],
        m_a=[5, 4, 6],
        m_b=[6, 7, 4],
        q_a=[1, 3, 2],
        q_b=[2, 3, 1],
        y=[4, 2, 3],
        scheme=scheme3,
    )
    b = np.array([0.3, -0.2, 0.1])

    log_terms = [
        -neg_log_complete(tau3, b, np.array(split, dtype=float), data)
        for split in itertools.product(*(_splits(int(y)) for y in data.y))
    ]

    assert len(log_terms) == 35 * 10 * 20
    assert logsumexp(log_terms) == pytest.approx(-neg_log_observed(tau3, b, data), rel=1e-10)


def test_find_mode_is_the_minimum_over_a_grid(small_dataset, tau3):
    data = small_dataset
    mode = find_mode(tau3, data)
    assert np.all(np.abs(mode.b_hat) < 0.9)

    coarse = np.linspace(-1.0, 1.0, 21)
    best = min(
        itertools.product(coarse, repeat=3),
        key=lambda b: g_objective(tau3, np.array(b), data, threads=1),
    )
    assert np.all(np.abs(np.array(best) - mode.b_hat) <= 0.1 + 1e-12)

    # No neighbour at resolution 1e-3 improves on the mode.
    offsets = np.array(list(itertools.product((-1e-3, 0.0, 1e-3), repeat=3)))
    values = [g_objective(tau3, mode.b_hat + offset, data, threads=1) for offset in offsets]
    assert np.argmin(values) == 13


def test_laplace_ignores_finger_labels(simulated, tau3):
    data = simulated.dataset
    relabel = np.random.default_rng(8).permutation(data.n_fingers)
    permuted = build_dataset(
        finger_a=[f"f{relabel[f]}" for f in data.finger_a],
        impr_a=data.impr_a,
        finger_b=[f"f{relabel[f]}" for f in data.finger_b],
        impr_b=data.impr_b,
        m_a=data.m_a,
        m_b=data.m_b,
        q_a=data.q_a,
        q_b=data.q_b,
        y=data.y,
        scheme=data.scheme,
    )

    original = laplace_loglik(tau3, data)
    again = laplace_loglik(tau3, permuted)

    assert again.loglik == pytest.approx(original.loglik, rel=1e-10)
    assert again.term_b == pytest.approx(original.term_b, rel=1e-10)


@pytest.mark.parametrize("f", [10, 30])
def test_log_det_term_grows_like_f_log_f(scheme3, f):
    # Every pair has rate exactly 1 at b = 0 and one match, so the mode sits at b = 0.
    tau = Tau.from_vector([math.log(0.5), 0.0, 0.0, math.log(0.5), -2.0], scheme3)
    pairs = enumerate_impostor_pairs(f, 1)
    n = pairs.shape[0]
    data = build_dataset(
        finger_a=pairs[:, 0] + 1,
        impr_a=pairs[:, 1] + 1,
        finger_b=pairs[:, 2] + 1,
        impr_b=pairs[:, 3] + 1,
        m_a=np.ones(n),
        m_b=np.ones(n),
        q_a=np.ones(n),
        q_b=np.ones(n),
        y=np.ones(n),
        scheme=scheme3,
    )

    result = laplace_loglik(tau, data)

    assert np.allclose(result.mode.b_hat, 0.0, atol=1e-10)
    expected = -0.5 * f * math.log((f - 1 + 1.0 / tau.sigma2) / (2.0 * math.pi))
    assert result.term_b == pytest.approx(expected, rel=0.2)
