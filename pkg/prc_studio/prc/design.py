import numpy as np

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.domain.types import QualityScheme
from prc_studio.errors.errors import InvalidInputError
from prc_studio.parallel import ordered_map
from prc_studio.prc.base import MonteCarloVariates, PrcQuery, draw_variates, prc_values


def posterior_mean_prc(
    query: PrcQuery,
    samples: PosteriorSamples,
    variates: MonteCarloVariates,
    threads: int | None = None,
) -> float:
    values = ordered_map(
        lambda tau: float(prc_values(query, tau, variates).mean()),
        samples.taus(),
        threads,
    )
    return float(np.mean(values))


def design_w(
    m1: int,
    m2: int,
    q1,
    q2,
    samples: PosteriorSamples,
    target: float,
    mc_draws: int = 100_000,
    seed: int = 0,
    variates: MonteCarloVariates | None = None,
    threads: int | None = None,
) -> int | None:
    """
    Smallest w in {0, ..., min(m1, m2)} whose posterior-mean PRC is at most `target`, or None.
    Binary search; shared variates keep the estimate nonincreasing in w.
    """
    if not 0.0 < target <= 1.0:
        raise InvalidInputError("target", target, "Target must lie in (0, 1].")
    variates = variates or draw_variates(seed, mc_draws)
    query = PrcQuery(0, m1, m2, q1, q2, samples.scheme)

    def prc_at(w: int) -> float:
        return posterior_mean_prc(query.with_w(w), samples, variates, threads)

    low, high = 0, min(m1, m2)
    if prc_at(high) > target:
        return None
    while low < high:
        middle = (low + high) // 2
        if prc_at(middle) <= target:
            high = middle
        else:
            low = middle + 1
    return low


def design_w_scan(
    m1: int,
    m2: int,
    q1,
    q2,
    samples: PosteriorSamples,
    target: float,
    variates: MonteCarloVariates,
    threads: int | None = None,
) -> int | None:
    """Linear scan counterpart of design_w, for cross-checks."""
    query = PrcQuery(0, m1, m2, q1, q2, samples.scheme)
    for w in range(min(m1, m2) + 1):
        if posterior_mean_prc(query.with_w(w), samples, variates, threads) <= target:
            return w
    return None


def design_w_grid(
    m1: int,
    m2: int,
    labels: list,
    samples: PosteriorSamples,
    target: float,
    mc_draws: int = 100_000,
    seed: int = 0,
    threads: int | None = None,
) -> list[list[int | None]]:
    variates = draw_variates(seed, mc_draws)
    size = len(labels)
    grid: list[list[int | None]] = [[None] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            grid[i][j] = grid[j][i] = design_w(
                m1,
                m2,
                labels[i],
                labels[j],
                samples,
                target,
                variates=variates,
                threads=threads,
            )
    return grid


def check_labels(labels: list, scheme: QualityScheme):
    for label in labels:
        scheme.validate_quality(label, "label")
