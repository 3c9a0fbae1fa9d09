from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import gammaln, logsumexp

from prc_studio.configuration import ModeControls
from prc_studio.domain.types import MatchDataset, Tau
from prc_studio.errors.errors import (
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
)
from prc_studio.message_handler.base import MessageHandler, warn
from prc_studio.message_handler.types import EventScope
from prc_studio.model.base import design_matrix
from prc_studio.parallel import chunks, ordered_map

LOG_2PI = math.log(2.0 * math.pi)
PAIR_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class PairArrays:
    """Dense per-pair arrays every likelihood evaluation needs."""

    design: np.ndarray  # (N, 4, p)
    log_mm: np.ndarray  # (N,)
    finger_a: np.ndarray
    finger_b: np.ndarray
    y: np.ndarray
    log_y_factorial: np.ndarray
    n_fingers: int
    # Largest total count touching a single finger, used to scale gradient tolerances.
    data_scale: float


@lru_cache(maxsize=16)
def pair_arrays(data: MatchDataset) -> PairArrays:
    per_finger = np.bincount(data.finger_a, data.y, data.n_fingers) + np.bincount(
        data.finger_b, data.y, data.n_fingers
    )
    return PairArrays(
        design=design_matrix(data.q_a, data.q_b, data.scheme),
        log_mm=data.log_mm,
        finger_a=data.finger_a,
        finger_b=data.finger_b,
        y=data.y,
        log_y_factorial=gammaln(data.y + 1.0),
        n_fingers=data.n_fingers,
        data_scale=max(1.0, float(per_finger.max(initial=0.0))),
    )


@dataclass(frozen=True)
class ModeResult:
    b_hat: np.ndarray
    hessian: np.ndarray
    grad_norm: float
    iterations: int
    log_det_hessian: float


@dataclass(frozen=True)
class LaplaceResult:
    loglik: float
    term_a: float
    term_b: float
    mode: ModeResult


def _check_b(b, arrays: PairArrays) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (arrays.n_fingers,):
        raise InvalidInputError(
            "b", b.shape, f"Random effects must have length F = {arrays.n_fingers}."
        )
    return b


def _log_rate_total(fixed_vector: np.ndarray, b: np.ndarray, arrays: PairArrays, rows=slice(None)):
    """log of the summed Poisson rate over the four types, per pair."""
    lin = arrays.design[rows] @ fixed_vector
    zb = b[arrays.finger_a[rows]] + b[arrays.finger_b[rows]]
    return logsumexp(lin, axis=1) + zb + arrays.log_mm[rows]


def _finger_sums(values: np.ndarray, arrays: PairArrays) -> np.ndarray:
    """Z' values: adds each pair's value to both of its fingers."""
    return np.bincount(arrays.finger_a, values, arrays.n_fingers) + np.bincount(
        arrays.finger_b, values, arrays.n_fingers
    )


def neg_log_complete(tau_or_fixed, b, counts, data: MatchDataset) -> float:
    """
    Negative complete-data log-likelihood of the per-type counts (N, 4), summed over pairs and types.
    Counts may be expected (non-integer) counts; their per-pair sums must equal y.
    """
    arrays = pair_arrays(data)
    b = _check_b(b, arrays)
    fixed = getattr(tau_or_fixed, "fixed", tau_or_fixed)
    fixed.check(data.scheme)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (data.n_pairs, 4):
        raise InvalidInputError(
            "counts", counts.shape, f"Counts must have shape ({data.n_pairs}, 4)."
        )
    if np.any(counts < 0):
        raise InvalidInputError("counts", "negative", "Counts must be nonnegative.")
    if not np.allclose(counts.sum(axis=1), arrays.y, rtol=1e-10, atol=1e-8):
        raise InvalidInputError(
            "counts", "row sums", "Per-pair type counts must add up to y."
        )
    zb = b[arrays.finger_a] + b[arrays.finger_b]
    log_rates = arrays.design @ fixed.to_vector() + (zb + arrays.log_mm)[:, None]
    return float(
        -np.sum(counts * log_rates - np.exp(log_rates) - gammaln(counts + 1.0))
    )


def _neg_log_observed_rows(fixed_vector, b, arrays: PairArrays, rows: slice) -> np.ndarray:
    log_total = _log_rate_total(fixed_vector, b, arrays, rows)
    return -(
        log_total * arrays.y[rows] - np.exp(log_total) - arrays.log_y_factorial[rows]
    )


def neg_log_observed(
    tau_or_fixed, b, data: MatchDataset, threads: int | None = None
) -> float:
    """h(theta, b): the multinomial split over types collapses to one Poisson per pair."""
    arrays = pair_arrays(data)
    b = _check_b(b, arrays)
    fixed = getattr(tau_or_fixed, "fixed", tau_or_fixed)
    fixed.check(data.scheme)
    fixed_vector = fixed.to_vector()
    terms = ordered_map(
        lambda rows: _neg_log_observed_rows(fixed_vector, b, arrays, rows),
        chunks(data.n_pairs, PAIR_CHUNK),
        threads,
    )
    if not terms:
        return 0.0
    return float(np.sum(np.concatenate(terms)))


def g_objective(tau: Tau, b, data: MatchDataset, threads: int | None = None) -> float:
    b = np.asarray(b, dtype=float)
    f = data.n_fingers
    return (
        neg_log_observed(tau, b, data, threads)
        + float(b @ b) / (2.0 * tau.sigma2)
        + 0.5 * f * tau.log_sigma2
        + 0.5 * f * LOG_2PI
    )


def gradient_b(tau: Tau, b, data: MatchDataset) -> np.ndarray:
    arrays = pair_arrays(data)
    b = _check_b(b, arrays)
    rates = np.exp(_log_rate_total(tau.fixed.to_vector(), b, arrays))
    return -_finger_sums(arrays.y - rates, arrays) + b / tau.sigma2


def hessian_b(tau: Tau, b, data: MatchDataset) -> np.ndarray:
    arrays = pair_arrays(data)
    b = _check_b(b, arrays)
    rates = np.exp(_log_rate_total(tau.fixed.to_vector(), b, arrays))
    hessian = np.diag(_finger_sums(rates, arrays) + 1.0 / tau.sigma2)
    np.add.at(hessian, (arrays.finger_a, arrays.finger_b), rates)
    np.add.at(hessian, (arrays.finger_b, arrays.finger_a), rates)
    return hessian


def clamp_log_sigma2(
    tau: Tau, floor: float = -30.0, msg_handler: MessageHandler | None = None
) -> Tau:
    if tau.log_sigma2 >= floor:
        return tau
    warn(
        msg_handler,
        EventScope.LIKELIHOOD,
        "log_sigma2_clamped",
        f"log sigma2 = {tau.log_sigma2:.4g} clamped to {floor}",
        {"log_sigma2": tau.log_sigma2, "floor": floor},
    )
    return tau.with_log_sigma2(floor)


def _cholesky(hessian: np.ndarray, b: np.ndarray, grad_norm: float):
    try:
        return cho_factor(hessian, lower=True)
    except LinAlgError as e:
        raise NumericalError(
            f"Hessian in b is not positive-definite: {e}",
            {"b": b.tolist(), "grad_norm": grad_norm, "diagonal": np.diag(hessian).tolist()},
        )


def find_mode(
    tau: Tau,
    data: MatchDataset,
    tol: float | None = None,
    max_iter: int | None = None,
    b0=None,
    controls: ModeControls | None = None,
    msg_handler: MessageHandler | None = None,
) -> ModeResult:
    """
    Newton iterations on g(tau, .) from b = 0 (or a warm start), with step halving.
    Converged when the sup-norm of the gradient is below tol, scaled by the largest per-finger total count.
    """
    controls = controls or ModeControls()
    tol = controls.tol if tol is None else tol
    max_iter = controls.max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise InvalidInputError("tol", tol, "Tolerance must be positive.")

    arrays = pair_arrays(data)
    tau = clamp_log_sigma2(tau, controls.log_sigma2_floor, msg_handler)
    threshold = tol * arrays.data_scale

    b = np.zeros(arrays.n_fingers) if b0 is None else _check_b(b0, arrays).copy()
    objective = g_objective(tau, b, data, threads=1)
    grad = gradient_b(tau, b, data)
    grad_norm = float(np.max(np.abs(grad), initial=0.0))

    iteration = 0
    while grad_norm > threshold:
        if iteration >= max_iter:
            raise ModeNotFoundError(iteration, grad_norm, b)
        iteration += 1

        factor = _cholesky(hessian_b(tau, b, data), b, grad_norm)
        step = cho_solve(factor, grad)

        scale = 1.0
        for _ in range(controls.max_halvings + 1):
            candidate = b - scale * step
            candidate_objective = g_objective(tau, candidate, data, threads=1)
            if candidate_objective <= objective:
                break
            scale *= 0.5
        else:
            # No decrease left at rounding level; accept only if the gradient is already tiny.
            if grad_norm > 1e3 * threshold:
                raise ModeNotFoundError(iteration, grad_norm, b)
            break

        b, objective = candidate, candidate_objective
        grad = gradient_b(tau, b, data)
        grad_norm = float(np.max(np.abs(grad), initial=0.0))

    hessian = hessian_b(tau, b, data)
    factor = _cholesky(hessian, b, grad_norm)
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return ModeResult(
        b_hat=b,
        hessian=hessian,
        grad_norm=grad_norm,
        iterations=iteration,
        log_det_hessian=log_det,
    )


def laplace_loglik(
    tau: Tau,
    data: MatchDataset,
    controls: ModeControls | None = None,
    b0=None,
    msg_handler: MessageHandler | None = None,
) -> LaplaceResult:
    """
    Laplace approximation of the marginal log-likelihood:
    -g(tau, b_hat) - 1/2 log det(H / 2 pi), split into the mode term and the log-det term.
    """
    if data.n_pairs == 0 or data.n_fingers < 2:
        raise InvalidInputError(
            "data", data.n_pairs, "The dataset has no impostor pairs to fit."
        )
    controls = controls or ModeControls()
    tau = clamp_log_sigma2(tau, controls.log_sigma2_floor, msg_handler)
    mode = find_mode(tau, data, controls=controls, b0=b0, msg_handler=msg_handler)
    term_a = -g_objective(tau, mode.b_hat, data)
    term_b = -0.5 * (mode.log_det_hessian - data.n_fingers * LOG_2PI)
    return LaplaceResult(
        loglik=term_a + term_b, term_a=term_a, term_b=term_b, mode=mode
    )
