from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from prc_studio.bayes.proposal import ProposalSpec
from prc_studio.domain.types import MatchDataset, QualityScheme, Tau
from prc_studio.errors.errors import (
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
    OutOfRegimeError,
)
from prc_studio.likelihood.base import laplace_loglik
from prc_studio.message_handler.base import MessageHandler, get_message_handler, warn
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.model.base import identified_functionals, identified_names
from prc_studio.parallel import ordered_map, stream

LOW_ESS_FRACTION = 0.1


@dataclass(frozen=True)
class PosteriorSamples:
    draws: np.ndarray  # (R, P)
    # (H,) importance weights of the pass that drew them; empty when that pass is unknown.
    weights_diagnostic: np.ndarray
    seed: int
    scheme: QualityScheme
    ess: float
    proposals: int
    failed: int = 0

    @property
    def r(self) -> int:
        return int(self.draws.shape[0])

    def taus(self) -> list[Tau]:
        return [Tau.from_vector(row, self.scheme) for row in self.draws]


def log_unnormalized_posterior(tau: Tau, data: MatchDataset) -> float:
    """
    Laplace log-likelihood plus log prior. The prior is flat in theta and beta0 and proportional to
    1 / sigma2 in sigma2, which is flat in log sigma2 (the Jacobian sigma2 cancels it).
    """
    return laplace_loglik(tau, data).loglik


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights**2))


def importance_resample(
    data: MatchDataset,
    proposal: ProposalSpec,
    H: int = 2000,
    R: int = 200,
    seed: int = 0,
    log_target: Callable[[np.ndarray], float] | None = None,
    msg_handler: MessageHandler | None = None,
    threads: int | None = None,
) -> PosteriorSamples:
    if not H >= R >= 1:
        raise InvalidInputError("H, R", (H, R), "Need H >= R >= 1.")
    msg_handler = msg_handler or get_message_handler()
    scheme = proposal.scheme
    log_target = log_target or (
        lambda vector: log_unnormalized_posterior(
            Tau.from_vector(vector, scheme), data
        )
    )

    candidates, log_proposal = proposal.draw(H, stream(seed, "proposal"))

    def evaluate(vector: np.ndarray) -> float:
        try:
            return float(log_target(vector))
        except (ModeNotFoundError, NumericalError, OutOfRegimeError, FloatingPointError):
            return -np.inf

    log_posterior = np.array(ordered_map(evaluate, candidates, threads))
    failed = int(np.sum(~np.isfinite(log_posterior)))
    log_weights = log_posterior - log_proposal
    log_weights[~np.isfinite(log_weights)] = -np.inf
    if not np.any(np.isfinite(log_weights)):
        raise NumericalError(
            "Every importance weight is zero; the proposal doesn't cover the posterior.",
            {"proposals": H, "failed": failed},
        )
    if failed:
        warn(
            msg_handler,
            EventScope.BAYES,
            "failed_proposals",
            f"{failed} of {H} proposals failed to evaluate and got weight 0",
        )

    weights = np.exp(log_weights - np.max(log_weights))
    weights /= weights.sum()
    ess = effective_sample_size(weights)
    if ess < LOW_ESS_FRACTION * H:
        warn(
            msg_handler,
            EventScope.BAYES,
            "low_ess",
            f"Effective sample size {ess:.1f} is below {LOW_ESS_FRACTION:.0%} of {H} proposals",
            {"ess": ess, "proposals": H},
        )

    indices = stream(seed, "resample").choice(H, size=R, replace=True, p=weights)
    msg_handler.send_message(
        LogEvent(
            "posterior_sampled",
            EventType.SUCCESS,
            EventScope.BAYES,
            f"Resampled {R} draws from {H} proposals (ESS {ess:.1f})",
            {"ess": ess, "failed": failed, "seed": seed},
        )
    )
    return PosteriorSamples(
        draws=candidates[indices],
        weights_diagnostic=weights,
        seed=seed,
        scheme=scheme,
        ess=ess,
        proposals=H,
        failed=failed,
    )


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    ci_low: float
    ci_high: float


def _summaries(names: list[str], draws: np.ndarray, alpha: float) -> list[ParameterSummary]:
    z = norm.ppf(1.0 - alpha / 2.0)
    means = draws.mean(axis=0)
    sds = draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(draws.shape[1])
    return [
        ParameterSummary(name, float(mean), float(sd), float(mean - z * sd), float(mean + z * sd))
        for name, mean, sd in zip(names, means, sds)
    ]


def summarize_posterior(
    samples: PosteriorSamples, alpha: float = 0.001
) -> list[ParameterSummary]:
    """Posterior mean, SD and mean +- z sd interval per tau component."""
    return _summaries(samples.scheme.tau_names(), samples.draws, alpha)


def summarize_identified(
    samples: PosteriorSamples, alpha: float = 0.001
) -> list[ParameterSummary]:
    """Same summaries for the parameters the counts identify, see identified_functionals."""
    scheme = samples.scheme
    draws = np.array([identified_functionals(tau, scheme) for tau in samples.taus()])
    return _summaries(identified_names(scheme), draws.reshape(samples.r, -1), alpha)
