from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.stats import norm

from prc_studio.domain.types import QualityScheme
from prc_studio.errors.errors import NumericalError
from prc_studio.estimation.curvature import NULL_TOLERANCE, decompose_curvature
from prc_studio.estimation.em import FitResult
from prc_studio.message_handler.base import MessageHandler, warn
from prc_studio.message_handler.types import EventScope


@dataclass(frozen=True)
class ProposalSpec:
    """
    Gaussian proposal over the stacked tau vector (theta..., beta0, log_sigma2).
    The covariance may be singular: draws then stay on the affine subspace through the mean that
    the covariance spans, and densities are taken on that subspace.
    """

    mean: np.ndarray
    covariance: np.ndarray
    scheme: QualityScheme

    @property
    def sds(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def _basis(self) -> tuple[np.ndarray, np.ndarray]:
        values, vectors = eigh(0.5 * (self.covariance + self.covariance.T))
        kept = values > NULL_TOLERANCE * float(np.max(values, initial=0.0))
        return vectors[:, kept], values[kept]

    def draw(self, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """`size` draws and their log densities."""
        vectors, values = self._basis()
        z = rng.standard_normal((size, values.size))
        draws = self.mean + (z * np.sqrt(values)) @ vectors.T
        log_density = norm.logpdf(z).sum(axis=1) - 0.5 * float(np.sum(np.log(values)))
        return draws, log_density


def build_proposal(
    fit: FitResult, msg_handler: MessageHandler | None = None
) -> ProposalSpec:
    """
    The proposal covariance is the INVERSE of the curvature of g at tau_hat:
    a second-order expansion of a negative log-density gives a Gaussian with precision equal to the Hessian.

    Flat directions of the curvature get zero proposal variance, so every draw keeps the
    position of tau_hat along them.
    """
    curvature = decompose_curvature(fit.tau_hessian)
    if np.all(curvature.null) or np.any(curvature.negative):
        raise NumericalError(
            "tau curvature is not positive semi-definite; tau_hat is not a maximum. "
            "Re-fit from another starting point.",
            {"eigenvalues": curvature.eigenvalues.tolist()},
        )
    if np.any(curvature.null):
        directions = curvature.null_directions
        warn(
            msg_handler,
            EventScope.BAYES,
            "proposal_null_directions",
            f"tau curvature is flat along {directions.shape[0]} direction(s); "
            "the proposal keeps tau_hat along them",
            {
                "directions": [
                    dict(zip(fit.scheme.tau_names(), direction.tolist()))
                    for direction in directions
                ],
            },
        )
    covariance = curvature.pseudo_inverse()
    return ProposalSpec(
        mean=fit.tau_hat.to_vector(),
        covariance=0.5 * (covariance + covariance.T),
        scheme=fit.scheme,
    )
