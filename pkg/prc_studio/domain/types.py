# Types from our domain
# These types should not depend on any other layer except errors.

from dataclasses import dataclass, replace
from enum import Enum
import math

import numpy as np

from prc_studio.errors.errors import ConfigurationError, InvalidInputError

# Order of the four match types (u, v) used by every array with a type axis.
TYPE_ORDER: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


class QualityKind(Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class QualityScheme:
    kind: QualityKind
    qmax: int | None = None

    def __post_init__(self):
        if self.kind == QualityKind.CATEGORICAL and (
            self.qmax is None or self.qmax < 1
        ):
            raise InvalidInputError(
                "qmax", self.qmax, "Categorical schemes need a maximum label >= 1."
            )
        if self.kind == QualityKind.CONTINUOUS and self.qmax is not None:
            raise InvalidInputError(
                "qmax", self.qmax, "Continuous schemes don't take a maximum label."
            )

    @staticmethod
    def continuous() -> "QualityScheme":
        return QualityScheme(QualityKind.CONTINUOUS)

    @staticmethod
    def categorical(qmax: int) -> "QualityScheme":
        return QualityScheme(QualityKind.CATEGORICAL, qmax)

    @staticmethod
    def parse(text: str) -> "QualityScheme":
        """Parses `continuous` or `categorical:<qmax>`."""
        kind, _, qmax = text.strip().partition(":")
        if kind == QualityKind.CONTINUOUS.value and not qmax:
            return QualityScheme.continuous()
        if kind == QualityKind.CATEGORICAL.value and qmax.isdigit():
            return QualityScheme.categorical(int(qmax))
        raise InvalidInputError(
            "scheme", text, "Scheme must be `continuous` or `categorical:<qmax>`."
        )

    def __str__(self) -> str:
        if self.kind == QualityKind.CATEGORICAL:
            return f"categorical:{self.qmax}"
        return "continuous"

    @property
    def is_categorical(self) -> bool:
        return self.kind == QualityKind.CATEGORICAL

    @property
    def n_theta(self) -> int:
        return self.qmax if self.is_categorical else 2

    @property
    def n_fixed(self) -> int:
        return self.n_theta + 1

    @property
    def n_tau(self) -> int:
        return self.n_fixed + 1

    def tau_names(self) -> list[str]:
        return [f"theta{k}" for k in range(self.n_theta)] + ["beta0", "log_sigma2"]

    def labels(self) -> list[int]:
        if not self.is_categorical:
            raise InvalidInputError(
                "scheme", str(self), "Continuous schemes have no label set."
            )
        return list(range(1, self.qmax + 1))

    def is_valid_quality(self, q) -> bool:
        q = float(q)
        if not math.isfinite(q):
            return False
        if self.is_categorical:
            return q == int(q) and 1 <= q <= self.qmax
        return 0.0 <= q <= 1.0

    def validate_quality(self, q, name: str = "quality"):
        if not self.is_valid_quality(q):
            raise InvalidInputError(name, q, f"Quality {q} is not valid under {self}.")


@dataclass(frozen=True, eq=False)
class FixedEffects:
    theta: np.ndarray
    beta0: float

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "beta0", float(self.beta0))

    def check(self, scheme: QualityScheme):
        if self.theta.shape != (scheme.n_theta,):
            raise ConfigurationError(scheme.n_fixed, self.theta.size + 1)

    def to_vector(self) -> np.ndarray:
        return np.append(self.theta, self.beta0)

    @staticmethod
    def from_vector(vector) -> "FixedEffects":
        vector = np.asarray(vector, dtype=float)
        return FixedEffects(theta=vector[:-1], beta0=vector[-1])


@dataclass(frozen=True, eq=False)
class Tau:
    fixed: FixedEffects
    log_sigma2: float

    @property
    def sigma2(self) -> float:
        return math.exp(self.log_sigma2)

    @property
    def sigma(self) -> float:
        return math.exp(0.5 * self.log_sigma2)

    def check(self, scheme: QualityScheme):
        self.fixed.check(scheme)

    def to_vector(self) -> np.ndarray:
        return np.append(self.fixed.to_vector(), self.log_sigma2)

    @staticmethod
    def from_vector(vector, scheme: QualityScheme | None = None) -> "Tau":
        vector = np.asarray(vector, dtype=float)
        if scheme is not None and vector.shape != (scheme.n_tau,):
            raise ConfigurationError(scheme.n_tau, vector.size)
        return Tau(
            fixed=FixedEffects.from_vector(vector[:-1]),
            log_sigma2=float(vector[-1]),
        )

    def with_log_sigma2(self, log_sigma2: float) -> "Tau":
        return replace(self, log_sigma2=float(log_sigma2))

    def to_dict(self, scheme: QualityScheme) -> dict:
        return dict(zip(scheme.tau_names(), self.to_vector().tolist()))


@dataclass(frozen=True)
class PairCovariates:
    finger_a: int
    finger_b: int
    m_a: int
    m_b: int
    q_a: float
    q_b: float

    def __post_init__(self):
        if self.finger_a == self.finger_b:
            raise InvalidInputError(
                "finger_b", self.finger_b, "Impostor pairs need two different fingers."
            )
        if self.m_a < 1 or self.m_b < 1:
            raise InvalidInputError(
                "m", (self.m_a, self.m_b), "Minutia counts must be at least 1."
            )

    @property
    def log_mm(self) -> float:
        return math.log(self.m_a) + math.log(self.m_b)


@dataclass(frozen=True)
class RandomEffects:
    b: np.ndarray

    def check(self, f: int):
        if np.shape(self.b) != (f,):
            raise InvalidInputError(
                "b", np.shape(self.b), f"Random effects must have length F = {f}."
            )


@dataclass(frozen=True)
class Minutia:
    x: float
    y: float
    direction: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError("location", (self.x, self.y), "Coordinates must be finite.")
        if not 0.0 < self.direction <= 2.0 * math.pi:
            raise InvalidInputError(
                "direction", self.direction, "Directions must lie in (0, 2*pi]."
            )


MinutiaSet = list[Minutia]


@dataclass(frozen=True)
class MatchConfig:
    r0: float
    u0: float
    anchor_search: bool = True

    def __post_init__(self):
        if not self.r0 > 0:
            raise InvalidInputError("r0", self.r0, "r0 must be positive.")
        if not 0 < self.u0 <= math.pi:
            raise InvalidInputError("u0", self.u0, "u0 must lie in (0, pi].")


@dataclass(frozen=True, eq=False)
class MatchDataset:
    """
    Impostor pairs with their match counts, stored column-wise.
    Fingers are indices into `finger_labels`; `y` is integer-valued when loaded from disk.
    """

    finger_a: np.ndarray
    impr_a: np.ndarray
    finger_b: np.ndarray
    impr_b: np.ndarray
    m_a: np.ndarray
    m_b: np.ndarray
    q_a: np.ndarray
    q_b: np.ndarray
    y: np.ndarray
    scheme: QualityScheme
    finger_labels: tuple[str, ...]
    n_impressions: int = 0

    def __post_init__(self):
        for name, dtype in (
            ("finger_a", np.int64),
            ("impr_a", np.int64),
            ("finger_b", np.int64),
            ("impr_b", np.int64),
            ("m_a", np.int64),
            ("m_b", np.int64),
            ("q_a", float),
            ("q_b", float),
            ("y", float),
        ):
            array = np.array(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "finger_labels", tuple(self.finger_labels))
        lengths = {
            getattr(self, name).shape
            for name in ("finger_a", "finger_b", "m_a", "m_b", "q_a", "q_b", "y")
        }
        if len(lengths) != 1:
            raise InvalidInputError("pairs", lengths, "Pair columns differ in length.")

    @property
    def n_pairs(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_fingers(self) -> int:
        return len(self.finger_labels)

    @property
    def log_mm(self) -> np.ndarray:
        return np.log(self.m_a) + np.log(self.m_b)

    def pair(self, index: int) -> PairCovariates:
        return PairCovariates(
            finger_a=int(self.finger_a[index]),
            finger_b=int(self.finger_b[index]),
            m_a=int(self.m_a[index]),
            m_b=int(self.m_b[index]),
            q_a=float(self.q_a[index]),
            q_b=float(self.q_b[index]),
        )

    def with_y(self, y) -> "MatchDataset":
        return replace(self, y=np.asarray(y, dtype=float))

    def take(self, order) -> "MatchDataset":
        order = np.asarray(order)
        return replace(
            self,
            **{
                name: getattr(self, name)[order]
                for name in (
                    "finger_a",
                    "impr_a",
                    "finger_b",
                    "impr_b",
                    "m_a",
                    "m_b",
                    "q_a",
                    "q_b",
                    "y",
                )
            },
        )

    def relabel_fingers(self, permutation) -> "MatchDataset":
        """Renumbers finger f as permutation[f]; labels follow their fingers."""
        permutation = np.asarray(permutation)
        labels = [""] * self.n_fingers
        for old, new in enumerate(permutation):
            labels[new] = self.finger_labels[old]
        return replace(
            self,
            finger_a=permutation[self.finger_a],
            finger_b=permutation[self.finger_b],
            finger_labels=tuple(labels),
        )
