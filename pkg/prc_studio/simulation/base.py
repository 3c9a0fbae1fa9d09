"""
Synthetic impostor datasets drawn from the mixed model with known parameters.

Quality labels and minutia counts are assigned per impression, so every pair an impression takes
part in shares them. Per-type counts are drawn as independent Poissons and summed into Y.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from prc_studio.dataset_handler.matches import build_dataset
from prc_studio.dataset_handler.pairs import enumerate_impostor_pairs
from prc_studio.domain.types import MatchDataset, QualityScheme, Tau
from prc_studio.errors.errors import InvalidInputError
from prc_studio.message_handler.base import MessageHandler, get_message_handler, warn
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.model.base import design_matrix
from prc_studio.parallel import stream

MAX_REDRAWS = 1000


class SimConfig(BaseModel):
    tau_true: list[float]
    scheme: str = "categorical:3"
    f: int = Field(default=50, ge=2)
    l: int = Field(default=4, ge=1)
    quality_rule: Literal["fixed", "labels", "uniform"] = "labels"
    # fixed: values cycled over impressions; labels: the label set to draw from.
    quality_values: list[float] | None = None
    quality_weights: list[float] | None = None
    quality_range: tuple[float, float] = (0.0, 1.0)
    m_rule: Literal["fixed", "by_quality"] = "fixed"
    m_fixed: int = Field(default=38, ge=1)
    # (quality, mean minutia count) knots, interpolated linearly between knots.
    m_by_quality: list[tuple[float, float]] | None = None
    seed: int = 0

    @model_validator(mode="after")
    def check_assignments(self) -> "SimConfig":
        scheme = self.quality_scheme()
        if len(self.tau_true) != scheme.n_tau:
            raise ValueError(
                f"tau_true has {len(self.tau_true)} components, scheme {scheme} needs {scheme.n_tau}"
            )
        if self.quality_rule == "fixed" and not self.quality_values:
            raise ValueError("the fixed quality rule needs quality_values")
        if self.quality_rule == "labels" and not scheme.is_categorical:
            raise ValueError("the labels quality rule needs a categorical scheme")
        if self.quality_rule == "uniform":
            low, high = self.quality_range
            if scheme.is_categorical or not 0.0 <= low <= high <= 1.0:
                raise ValueError("the uniform quality rule needs a continuous scheme and 0 <= a <= b <= 1")
        for value in self.quality_values or []:
            if not scheme.is_valid_quality(value):
                raise ValueError(f"quality value {value} is not valid under {scheme}")
        if self.quality_weights is not None:
            values = self.quality_values or (scheme.labels() if scheme.is_categorical else [])
            if len(self.quality_weights) != len(values) or min(self.quality_weights) < 0:
                raise ValueError("quality_weights must be nonnegative, one per quality value")
            if sum(self.quality_weights) <= 0:
                raise ValueError("quality_weights must not all be zero")
        if self.m_rule == "by_quality":
            if not self.m_by_quality:
                raise ValueError("the by_quality minutia rule needs m_by_quality knots")
            if min(mean for _, mean in self.m_by_quality) <= 0:
                raise ValueError("mean minutia counts must be positive")
        return self

    def quality_scheme(self) -> QualityScheme:
        try:
            return QualityScheme.parse(self.scheme)
        except InvalidInputError as e:
            raise ValueError(e.message)

    def tau(self) -> Tau:
        return Tau.from_vector(self.tau_true, self.quality_scheme())


@dataclass(frozen=True)
class SimulationTruth:
    tau: Tau
    b: np.ndarray  # (F,)
    type_counts: np.ndarray  # (N, 4) in TYPE_ORDER
    redraws: int


@dataclass(frozen=True)
class SimulatedDataset:
    dataset: MatchDataset
    truth: SimulationTruth


def assign_qualities(cfg: SimConfig, n_impressions: int) -> np.ndarray:
    scheme = cfg.quality_scheme()
    rng = stream(cfg.seed, "quality")
    if cfg.quality_rule == "fixed":
        return np.resize(np.asarray(cfg.quality_values, dtype=float), n_impressions)
    if cfg.quality_rule == "uniform":
        low, high = cfg.quality_range
        return rng.uniform(low, high, size=n_impressions)
    values = np.asarray(cfg.quality_values or scheme.labels(), dtype=float)
    weights = None
    if cfg.quality_weights is not None:
        weights = np.asarray(cfg.quality_weights, dtype=float)
        weights = weights / weights.sum()
    return rng.choice(values, size=n_impressions, replace=True, p=weights)


def assign_minutia_counts(cfg: SimConfig, qualities: np.ndarray) -> np.ndarray:
    if cfg.m_rule == "fixed":
        return np.full(qualities.shape, cfg.m_fixed, dtype=np.int64)
    knots = sorted(cfg.m_by_quality)
    means = np.interp(qualities, [q for q, _ in knots], [mean for _, mean in knots])
    counts = stream(cfg.seed, "minutiae").poisson(means)
    return np.maximum(counts, 1).astype(np.int64)


def simulate_dataset(
    cfg: SimConfig, msg_handler: MessageHandler | None = None
) -> SimulatedDataset:
    """
    Draws b_f ~ N(0, sigma2), then Y_ij(u, v) ~ Poisson(m_i m_j exp(b_fi + b_fj + eta(u, v))) for every
    impostor pair. Pairs whose total exceeds min(m_i, m_j) are redrawn.
    """
    msg_handler = msg_handler or get_message_handler()
    scheme = cfg.quality_scheme()
    tau = cfg.tau()

    b = stream(cfg.seed, "random_effects").normal(0.0, tau.sigma, size=cfg.f)
    qualities = assign_qualities(cfg, cfg.f * cfg.l)
    minutiae = assign_minutia_counts(cfg, qualities)

    pairs = enumerate_impostor_pairs(cfg.f, cfg.l)
    impression_a = pairs[:, 0] * cfg.l + pairs[:, 1]
    impression_b = pairs[:, 2] * cfg.l + pairs[:, 3]
    m_a, m_b = minutiae[impression_a], minutiae[impression_b]
    q_a, q_b = qualities[impression_a], qualities[impression_b]

    log_rates = design_matrix(q_a, q_b, scheme) @ tau.fixed.to_vector() + (
        np.log(m_a) + np.log(m_b) + b[pairs[:, 0]] + b[pairs[:, 2]]
    )[:, None]
    rates = np.exp(log_rates)

    rng = stream(cfg.seed, "counts")
    counts = rng.poisson(rates)
    limit = np.minimum(m_a, m_b)
    redraws = 0
    for attempt in range(MAX_REDRAWS + 1):
        exceeded = np.flatnonzero(counts.sum(axis=1) > limit)
        if exceeded.size == 0:
            break
        if attempt < MAX_REDRAWS:
            redraws += exceeded.size
            counts[exceeded] = rng.poisson(rates[exceeded])
            continue
        raise InvalidInputError(
            "tau_true",
            cfg.tau_true,
            f"Simulated counts keep exceeding min(m_a, m_b) after {MAX_REDRAWS} redraws; "
            "the rates are too large for the minutia counts.",
        )
    if redraws:
        warn(
            msg_handler,
            EventScope.SIMULATION,
            "simulation_redraws",
            f"Redrew {redraws} pair counts that exceeded min(m_a, m_b)",
        )

    dataset = build_dataset(
        finger_a=pairs[:, 0] + 1,
        impr_a=pairs[:, 1] + 1,
        finger_b=pairs[:, 2] + 1,
        impr_b=pairs[:, 3] + 1,
        m_a=m_a,
        m_b=m_b,
        q_a=q_a,
        q_b=q_b,
        y=counts.sum(axis=1),
        scheme=scheme,
    )
    msg_handler.send_message(
        LogEvent(
            "dataset_simulated",
            EventType.INFO,
            EventScope.SIMULATION,
            f"Simulated {dataset.n_pairs} impostor pairs over {cfg.f} fingers",
            {"seed": cfg.seed, "mean_y": float(np.mean(dataset.y)), "redraws": redraws},
        )
    )
    return SimulatedDataset(
        dataset=dataset,
        truth=SimulationTruth(tau=tau, b=b, type_counts=counts.astype(np.int64), redraws=redraws),
    )
