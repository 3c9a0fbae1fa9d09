import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from prc_studio.errors.errors import QuadratureRefusedError
from prc_studio.likelihood.base import find_mode, g_objective, laplace_loglik, neg_log_observed
from prc_studio.likelihood.quadrature import quadrature_loglik
from tests.unit.conftest import make_dataset


def test_laplace_agrees_with_quadrature(simulated, tau3):
    laplace = laplace_loglik(tau3, simulated.dataset).loglik
    exact = quadrature_loglik(tau3, simulated.dataset, nodes=61)

    assert abs(laplace - exact) <= 0.01 * abs(exact)
    assert laplace == pytest.approx(exact, abs=0.01)


def test_quadrature_is_stable_in_the_grid(simulated, tau3):
    coarse = quadrature_loglik(tau3, simulated.dataset, nodes=41)
    fine = quadrature_loglik(tau3, simulated.dataset, nodes=61)

    assert coarse == pytest.approx(fine, abs=1e-6)


def test_two_fingers_match_iterated_integration(scheme3, tau3):
    data = make_dataset(2, 2, scheme3)
    mode = find_mode(tau3, data)
    b_hat = mode.b_hat
    sds = np.sqrt(np.diag(np.linalg.inv(mode.hessian)))
    peak = g_objective(tau3, b_hat, data, threads=1)

    integral, _ = dblquad(
        lambda b1, b0: math.exp(peak - g_objective(tau3, np.array([b0, b1]), data, threads=1)),
        b_hat[0] - 10 * sds[0],
        b_hat[0] + 10 * sds[0],
        b_hat[1] - 10 * sds[1],
        b_hat[1] + 10 * sds[1],
        epsabs=1e-12,
        epsrel=1e-10,
    )

    assert quadrature_loglik(tau3, data) == pytest.approx(math.log(integral) - peak, abs=1e-6)


def test_vanishing_variance_leaves_the_fixed_effects_likelihood(simulated, tau3):
    data = simulated.dataset
    pinned = tau3.with_log_sigma2(-20.0)

    exact = quadrature_loglik(pinned, data)

    assert exact == pytest.approx(-neg_log_observed(pinned, np.zeros(data.n_fingers), data), abs=1e-3)


def test_quadrature_refuses_many_fingers(scheme3, tau3):
    data = make_dataset(5, 1, scheme3)

    with pytest.raises(QuadratureRefusedError) as e:
        quadrature_loglik(tau3, data)
    assert e.value.f == 5
