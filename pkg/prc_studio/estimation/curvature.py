"""
Eigen-decomposition of profile curvature matrices.

Categorical schemes leave one flat direction in tau: the likelihood depends on beta0 and theta
only through c(Q) = log(exp(beta0) + exp(s(Q))) per label, so shifting along the curve that
keeps every c(Q) fixed changes nothing. Its eigenvalue is zero up to finite-difference noise.
Directions whose eigenvalue is that small relative to the largest are treated as null.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from prc_studio.errors.errors import NumericalError

NULL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Curvature:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    null: np.ndarray  # bool per eigenvalue

    @property
    def null_directions(self) -> np.ndarray:
        """Unit vectors spanning the flat directions, shape (k, P)."""
        return self.eigenvectors[:, self.null].T

    @property
    def negative(self) -> np.ndarray:
        return (self.eigenvalues < 0) & ~self.null

    def pseudo_inverse(self) -> np.ndarray:
        kept = ~self.null
        vectors = self.eigenvectors[:, kept]
        return (vectors / self.eigenvalues[kept]) @ vectors.T

    def newton_step(self, grad: np.ndarray) -> np.ndarray:
        """H^+ grad with |lambda| in place of lambda, so the step descends even where H is indefinite."""
        kept = ~self.null
        vectors = self.eigenvectors[:, kept]
        return vectors @ ((vectors.T @ grad) / np.abs(self.eigenvalues[kept]))


def decompose_curvature(
    hessian: np.ndarray, null_tolerance: float = NULL_TOLERANCE
) -> Curvature:
    hessian = np.asarray(hessian, dtype=float)
    if not np.all(np.isfinite(hessian)):
        raise NumericalError("Curvature matrix has non-finite entries.", {})
    eigenvalues, eigenvectors = eigh(0.5 * (hessian + hessian.T))
    largest = float(np.max(np.abs(eigenvalues), initial=0.0))
    null = np.abs(eigenvalues) <= null_tolerance * largest
    return Curvature(eigenvalues=eigenvalues, eigenvectors=eigenvectors, null=null)
