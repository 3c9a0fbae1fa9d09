from unittest.mock import Mock

import numpy as np
import pytest

from prc_studio.dataset_handler.matches import build_dataset
from prc_studio.dataset_handler.pairs import enumerate_impostor_pairs
from prc_studio.domain.types import QualityScheme, Tau
from prc_studio.message_handler.base import MessageHandler
from prc_studio.simulation.base import SimConfig, simulate_dataset

# theta0..theta2, beta0, log sigma2 close to the fitted values of an optical-sensor database.
TAU_CATEGORICAL = [-3.4857, -0.7429, -1.6144, -2.7297, -2.0]


@pytest.fixture
def msg_handler():
    return Mock(spec=MessageHandler)


@pytest.fixture
def scheme3() -> QualityScheme:
    return QualityScheme.categorical(3)


@pytest.fixture
def tau3(scheme3) -> Tau:
    return Tau.from_vector(TAU_CATEGORICAL, scheme3)


def make_dataset(f: int, l: int, scheme: QualityScheme, m: int = 20, seed: int = 0):
    """Every impostor pair of F fingers with L impressions, with small random counts."""
    rng = np.random.default_rng(seed)
    pairs = enumerate_impostor_pairs(f, l)
    n = pairs.shape[0]
    if scheme.is_categorical:
        qualities = rng.integers(1, scheme.qmax + 1, size=f * l)
    else:
        qualities = rng.uniform(0.0, 1.0, size=f * l)
    impression_a = pairs[:, 0] * l + pairs[:, 1]
    impression_b = pairs[:, 2] * l + pairs[:, 3]
    return build_dataset(
        finger_a=pairs[:, 0] + 1,
        impr_a=pairs[:, 1] + 1,
        finger_b=pairs[:, 2] + 1,
        impr_b=pairs[:, 3] + 1,
        m_a=np.full(n, m),
        m_b=np.full(n, m),
        q_a=qualities[impression_a],
        q_b=qualities[impression_b],
        y=rng.integers(0, 6, size=n),
        scheme=scheme,
    )


@pytest.fixture
def small_dataset(scheme3):
    return make_dataset(3, 2, scheme3)


@pytest.fixture
def simulated(msg_handler):
    cfg = SimConfig(
        tau_true=TAU_CATEGORICAL,
        scheme="categorical:3",
        f=3,
        l=4,
        quality_rule="labels",
        m_rule="fixed",
        m_fixed=38,
        seed=11,
    )
    return simulate_dataset(cfg, msg_handler)
