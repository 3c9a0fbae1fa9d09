"""
Probability of a random correspondence.

Given w observed matches between impressions with m1 and m2 minutiae, the conditional PRC is the
Poisson upper tail P(S >= Y00) with S ~ Poisson(m1 m2 exp(2 beta0 + b1 + b2)), where Y00 counts the
matches between genuine minutiae. The unconditional PRC averages it over Y00 ~ Binomial(w, p00)
and b1, b2 ~ N(0, sigma2), symmetrized over the two orderings of the quality pair.

Monte Carlo variates are drawn once per (seed, chunk) and shared by every posterior draw, both
orderings and every w, so PRC estimates are exactly nonincreasing in w.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import pdtrc
from scipy.stats import binom, norm

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.domain.types import QualityScheme, Tau
from prc_studio.errors.errors import InvalidInputError, OutOfRegimeError
from prc_studio.model.base import match_type_probs
from prc_studio.parallel import chunks, ordered_map, stream

MAX_RATE = 1e9
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class PrcQuery:
    w: int
    m1: int
    m2: int
    q1: float
    q2: float
    scheme: QualityScheme

    def __post_init__(self):
        if self.w < 0:
            raise InvalidInputError("w", self.w, "w must be nonnegative.")
        if self.m1 < 1 or self.m2 < 1:
            raise InvalidInputError("m", (self.m1, self.m2), "Minutia counts must be at least 1.")
        self.scheme.validate_quality(self.q1, "q1")
        self.scheme.validate_quality(self.q2, "q2")

    def with_w(self, w: int) -> "PrcQuery":
        return PrcQuery(w, self.m1, self.m2, self.q1, self.q2, self.scheme)


@dataclass(frozen=True)
class PrcReport:
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    alpha: float
    mc_draws: int
    r_samples: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "alpha": self.alpha,
            "mc_draws": self.mc_draws,
            "r_samples": self.r_samples,
        }


@dataclass(frozen=True)
class MonteCarloVariates:
    # Standard normals for b1, b2 and uniforms for the binomial inverse CDF.
    z1: np.ndarray
    z2: np.ndarray
    u: np.ndarray

    @property
    def size(self) -> int:
        return int(self.u.shape[0])


def draw_variates(seed: int, mc_draws: int) -> MonteCarloVariates:
    if mc_draws < 1:
        raise InvalidInputError("mc_draws", mc_draws, "Need at least one Monte Carlo draw.")
    parts = []
    for index, rows in enumerate(chunks(mc_draws, MC_CHUNK)):
        rng = stream(seed, "prc", index)
        n = rows.stop - rows.start
        parts.append((rng.standard_normal(n), rng.standard_normal(n), rng.random(n)))
    z1, z2, u = (np.concatenate(column) for column in zip(*parts))
    return MonteCarloVariates(z1=z1, z2=z2, u=u)


def poisson_upper_tail(y, rate) -> np.ndarray:
    """P(S >= y) for S ~ Poisson(rate), exact through the regularized incomplete gamma function."""
    y = np.asarray(y)
    rate = np.asarray(rate, dtype=float)
    return np.where(y <= 0, 1.0, pdtrc(np.maximum(y - 1, 0), rate))


def _check_rate(rate):
    largest = float(np.max(rate))
    if largest > MAX_RATE:
        raise OutOfRegimeError(largest)


def prc_star(y00: int, b1: float, b2: float, m1: int, m2: int, beta0: float) -> float:
    if m1 < 1 or m2 < 1:
        raise InvalidInputError("m", (m1, m2), "Minutia counts must be at least 1.")
    if y00 <= 0:
        return 1.0
    rate = math.exp(math.log(m1) + math.log(m2) + 2.0 * beta0 + b1 + b2)
    _check_rate(rate)
    return float(poisson_upper_tail(y00, rate))


def _genuine_genuine_prob(query: PrcQuery, tau: Tau, q1, q2) -> float:
    return float(match_type_probs(tau.fixed, q1, q2, query.scheme)[0])


def _ordered_values(
    query: PrcQuery, tau: Tau, q1, q2, variates: MonteCarloVariates
) -> np.ndarray:
    p00 = _genuine_genuine_prob(query, tau, q1, q2)
    cdf = binom.cdf(np.arange(query.w + 1), query.w, p00)
    y00 = np.minimum(np.searchsorted(cdf, variates.u, side="left"), query.w)
    rate = np.exp(
        math.log(query.m1)
        + math.log(query.m2)
        + 2.0 * tau.fixed.beta0
        + tau.sigma * (variates.z1 + variates.z2)
    )
    _check_rate(rate)
    return poisson_upper_tail(y00, rate)


def prc_values(query: PrcQuery, tau: Tau, variates: MonteCarloVariates) -> np.ndarray:
    """Per-variate PRC* values, averaged over both orderings of the quality pair."""
    tau.check(query.scheme)
    if query.w == 0:
        return np.ones(variates.size)
    forward = _ordered_values(query, tau, query.q1, query.q2, variates)
    backward = _ordered_values(query, tau, query.q2, query.q1, variates)
    return 0.5 * (forward + backward)


def prc_unconditional_estimate(
    query: PrcQuery,
    tau: Tau,
    mc_draws: int = 100_000,
    seed: int = 0,
    variates: MonteCarloVariates | None = None,
) -> tuple[float, float]:
    """Monte Carlo PRC and its standard error."""
    variates = variates or draw_variates(seed, mc_draws)
    values = prc_values(query, tau, variates)
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), se


def prc_unconditional(
    query: PrcQuery,
    tau: Tau,
    mc_draws: int = 100_000,
    seed: int = 0,
    variates: MonteCarloVariates | None = None,
) -> float:
    return prc_unconditional_estimate(query, tau, mc_draws, seed, variates)[0]


def prc_exact_fixed_effects(query: PrcQuery, tau: Tau) -> float:
    """PRC with sigma2 = 0: sum over k of Binomial(k; w, p00) * P(S >= k)."""
    return prc_quadrature(query, tau, nodes=1, ignore_random_effects=True)


def prc_quadrature(
    query: PrcQuery, tau: Tau, nodes: int = 64, ignore_random_effects: bool = False
) -> float:
    """
    Deterministic PRC: exact binomial enumeration over Y00 and Gauss-Hermite quadrature over
    b1 + b2 ~ N(0, 2 sigma2).
    """
    tau.check(query.scheme)
    if query.w == 0:
        return 1.0
    if ignore_random_effects:
        points, weights = np.zeros(1), np.ones(1)
    else:
        points, weights = np.polynomial.hermite_e.hermegauss(nodes)
        weights = weights / math.sqrt(2.0 * math.pi)
    rate = np.exp(
        math.log(query.m1)
        + math.log(query.m2)
        + 2.0 * tau.fixed.beta0
        + math.sqrt(2.0) * tau.sigma * points
    )
    _check_rate(rate)
    k = np.arange(query.w + 1)
    tails = weights @ poisson_upper_tail(k[None, :], rate[:, None])

    total = 0.0
    for q1, q2 in ((query.q1, query.q2), (query.q2, query.q1)):
        p00 = _genuine_genuine_prob(query, tau, q1, q2)
        total += float(binom.pmf(k, query.w, p00) @ tails)
    return 0.5 * total


def prc_posterior(
    query: PrcQuery,
    samples: PosteriorSamples,
    mc_draws: int = 100_000,
    alpha: float = 0.001,
    seed: int = 0,
    variates: MonteCarloVariates | None = None,
    threads: int | None = None,
) -> PrcReport:
    """Posterior mean, SD and mean +- z sd interval of the PRC over the posterior draws."""
    variates = variates or draw_variates(seed, mc_draws)
    values = np.array(
        ordered_map(
            lambda tau: float(prc_values(query, tau, variates).mean()),
            samples.taus(),
            threads,
        )
    )
    return summarize_values(values, alpha, variates.size)


def summarize_values(values: np.ndarray, alpha: float, mc_draws: int) -> PrcReport:
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 and np.ptp(values) > 0 else 0.0
    z = float(norm.ppf(1.0 - alpha / 2.0))
    return PrcReport(
        mean=mean,
        sd=sd,
        ci_low=min(max(mean - z * sd, 0.0), mean),
        ci_high=max(min(mean + z * sd, 1.0), mean),
        alpha=alpha,
        mc_draws=mc_draws,
        r_samples=int(values.size),
    )
