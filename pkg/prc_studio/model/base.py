"""
Per-pair formulas of the quality-dependent Poisson mixed model.

For a pair of impressions (a, b) and match type (u, v), u = 0 meaning the minutia of
impression a is genuine and u = 1 meaning it is spurious, the linear predictor is

    eta(u, v) = (1 - u) * beta0 + (1 - v) * beta0 + u * s(q_a) + v * s(q_b)

where s(q) = theta0 + theta1 * q for continuous quality and
s(Q) = theta0 + theta1 + ... + theta_{Q-1} for categorical labels (the sum is empty for Q = 1).

The summed rate factorizes as (exp(beta0) + exp(s(q_a))) * (exp(beta0) + exp(s(q_b))), so the
observed counts only see c(q) = log(exp(beta0) + exp(s(q))). Under a categorical scheme that is
one value per label, one fewer than the fixed effects: beta0 and theta can move together along a
curve that keeps every c(Q), and the likelihood with them. Split-dependent quantities such as
the probability of the genuine-genuine type are not pinned down by the counts there.
"""

import numpy as np
from scipy.special import logsumexp, softmax

from prc_studio.domain.types import (
    TYPE_ORDER,
    FixedEffects,
    PairCovariates,
    QualityScheme,
    Tau,
)
from prc_studio.errors.errors import InvalidInputError


def _check_qualities(scheme: QualityScheme, *qualities):
    for q in qualities:
        scheme.validate_quality(q)


def _quality_term(theta: np.ndarray, q: float, scheme: QualityScheme) -> float:
    if scheme.is_categorical:
        return float(theta[0] + theta[1 : int(q)].sum())
    return float(theta[0] + theta[1] * q)


def eta_component(
    fixed: FixedEffects, q_a, q_b, u: int, v: int, scheme: QualityScheme
) -> float:
    fixed.check(scheme)
    _check_qualities(scheme, q_a, q_b)
    if u not in (0, 1) or v not in (0, 1):
        raise InvalidInputError("type", (u, v), "Match types take values in {0, 1}.")
    return (
        (2 - u - v) * fixed.beta0
        + u * _quality_term(fixed.theta, q_a, scheme)
        + v * _quality_term(fixed.theta, q_b, scheme)
    )


def theta_features(q, scheme: QualityScheme) -> np.ndarray:
    """Per-impression coefficients on theta, shape (n, n_theta)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if scheme.is_categorical:
        thresholds = np.arange(1, scheme.qmax)
        cumulative = (thresholds[None, :] <= (q[:, None] - 1)).astype(float)
        return np.column_stack([np.ones_like(q), cumulative])
    return np.column_stack([np.ones_like(q), q])


def design_matrix(q_a, q_b, scheme: QualityScheme) -> np.ndarray:
    """Design rows for every pair and type in TYPE_ORDER, shape (n, 4, n_fixed)."""
    s_a = theta_features(q_a, scheme)
    s_b = theta_features(q_b, scheme)
    n = s_a.shape[0]
    design = np.zeros((n, len(TYPE_ORDER), scheme.n_fixed))
    for t, (u, v) in enumerate(TYPE_ORDER):
        design[:, t, :-1] = u * s_a + v * s_b
        design[:, t, -1] = (1 - u) + (1 - v)
    return design


def design_row(q_a, q_b, u: int, v: int, scheme: QualityScheme) -> np.ndarray:
    _check_qualities(scheme, q_a, q_b)
    return design_matrix(q_a, q_b, scheme)[0, TYPE_ORDER.index((u, v))]


def type_etas(fixed: FixedEffects, q_a, q_b, scheme: QualityScheme) -> np.ndarray:
    fixed.check(scheme)
    return design_matrix(q_a, q_b, scheme) @ fixed.to_vector()


def log_sum_eta(fixed: FixedEffects, q_a, q_b, scheme: QualityScheme) -> float:
    _check_qualities(scheme, q_a, q_b)
    return float(logsumexp(type_etas(fixed, q_a, q_b, scheme)[0]))


def match_type_probs(
    fixed: FixedEffects, q_a, q_b, scheme: QualityScheme
) -> np.ndarray:
    """Probabilities of the four match types in TYPE_ORDER."""
    _check_qualities(scheme, q_a, q_b)
    return softmax(type_etas(fixed, q_a, q_b, scheme)[0])


def pair_rate(
    tau: Tau,
    pair: PairCovariates,
    b_a: float,
    b_b: float,
    u: int,
    v: int,
    scheme: QualityScheme,
) -> float:
    eta = eta_component(tau.fixed, pair.q_a, pair.q_b, u, v, scheme)
    return float(np.exp(pair.log_mm + b_a + b_b + eta))


def identified_names(scheme: QualityScheme) -> list[str]:
    if scheme.is_categorical:
        return [f"c{q}" for q in scheme.labels()] + ["log_sigma2"]
    return scheme.tau_names()


def identified_functionals(tau: Tau, scheme: QualityScheme) -> np.ndarray:
    """
    The parameters the counts pin down, named by identified_names. For categorical schemes
    c(Q) = log(exp(beta0) + exp(s(Q))) per label, then log sigma2. Continuous tau is returned as is.
    """
    tau.check(scheme)
    if not scheme.is_categorical:
        return tau.to_vector()
    s = theta_features(scheme.labels(), scheme) @ tau.fixed.theta
    return np.append(np.logaddexp(tau.fixed.beta0, s), tau.log_sigma2)


def move_along_ridge(tau: Tau, scheme: QualityScheme, delta: float) -> Tau:
    """Shifts beta0 by delta and re-solves theta so every c(Q) stays put."""
    if not scheme.is_categorical:
        raise InvalidInputError(
            "scheme", str(scheme), "Only categorical schemes have a flat direction."
        )
    c = identified_functionals(tau, scheme)[:-1]
    beta0 = tau.fixed.beta0 + delta
    if beta0 >= float(np.min(c)):
        raise InvalidInputError(
            "delta", delta, "beta0 must stay below log(exp(beta0) + exp(s(Q))) for every label."
        )
    s = c + np.log1p(-np.exp(beta0 - c))
    theta = np.append(s[0], np.diff(s))
    return Tau(fixed=FixedEffects(theta=theta, beta0=beta0), log_sigma2=tau.log_sigma2)
