import itertools

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from prc_studio.domain.types import MatchDataset, Tau
from prc_studio.errors.errors import QuadratureRefusedError
from prc_studio.likelihood.base import LOG_2PI, find_mode, pair_arrays

MAX_QUADRATURE_FINGERS = 4
GRID_CHUNK = 20000


def _neg_g_batch(tau: Tau, b_batch: np.ndarray, data: MatchDataset) -> np.ndarray:
    """-g(tau, b) for a batch of random effect vectors, shape (P, F)."""
    arrays = pair_arrays(data)
    lin = arrays.design @ tau.fixed.to_vector()
    base = logsumexp(lin, axis=1) + arrays.log_mm
    log_total = base[None, :] + b_batch[:, arrays.finger_a] + b_batch[:, arrays.finger_b]
    h = -np.sum(
        log_total * arrays.y - np.exp(log_total) - arrays.log_y_factorial, axis=1
    )
    f = data.n_fingers
    prior = (
        np.sum(b_batch**2, axis=1) / (2.0 * tau.sigma2)
        + 0.5 * f * tau.log_sigma2
        + 0.5 * f * LOG_2PI
    )
    return -(h + prior)


def quadrature_loglik(
    tau: Tau, data: MatchDataset, nodes: int = 81, span: float = 8.0
) -> float:
    """
    log of the integral of exp(-g(tau, b)) over b, on a tensor grid.
    The grid lives in whitened coordinates z, with b = b_hat + L^{-T} z and H = L L' the mode's Hessian,
    so each axis spans +-span posterior standard deviations.
    """
    f = data.n_fingers
    if f > MAX_QUADRATURE_FINGERS:
        raise QuadratureRefusedError(f, MAX_QUADRATURE_FINGERS)

    mode = find_mode(tau, data)
    lower = np.linalg.cholesky(mode.hessian)
    axis = np.linspace(-span, span, nodes)
    log_weights_axis = np.full(nodes, np.log(axis[1] - axis[0]))
    log_weights_axis[[0, -1]] += np.log(0.5)

    total = []
    grid = itertools.product(range(nodes), repeat=f)
    while True:
        block = np.array(list(itertools.islice(grid, GRID_CHUNK)), dtype=int)
        if block.size == 0:
            break
        z = axis[block]
        b = mode.b_hat[None, :] + solve_triangular(lower, z.T, lower=True, trans="T").T
        total.append(
            logsumexp(_neg_g_batch(tau, b, data) + log_weights_axis[block].sum(axis=1))
        )

    # Jacobian of z -> b.
    return float(logsumexp(total) - 0.5 * mode.log_det_hessian)
