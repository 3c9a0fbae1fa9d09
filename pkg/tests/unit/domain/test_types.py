import math

import numpy as np
import pytest

from prc_studio.domain.types import (
    MatchConfig,
    Minutia,
    PairCovariates,
    QualityScheme,
    Tau,
)
from prc_studio.errors.errors import ConfigurationError, InvalidInputError
from tests.unit.conftest import make_dataset


def test_parse_categorical_scheme():
    scheme = QualityScheme.parse("categorical:3")

    assert scheme.is_categorical
    assert scheme.n_theta == 3
    assert scheme.n_tau == 5
    assert scheme.tau_names() == ["theta0", "theta1", "theta2", "beta0", "log_sigma2"]
    assert scheme.labels() == [1, 2, 3]
    assert str(scheme) == "categorical:3"


def test_parse_continuous_scheme():
    scheme = QualityScheme.parse("continuous")

    assert not scheme.is_categorical
    assert scheme.n_tau == 4
    assert scheme.tau_names() == ["theta0", "theta1", "beta0", "log_sigma2"]
    with pytest.raises(InvalidInputError):
        scheme.labels()


@pytest.mark.parametrize(
    "text",
    [
        pytest.param("categorical", id="missing qmax"),
        pytest.param("categorical:x", id="non-numeric qmax"),
        pytest.param("categorical:0", id="zero qmax"),
        pytest.param("continuous:3", id="continuous with qmax"),
        pytest.param("discrete", id="unknown kind"),
    ],
)
def test_parse_invalid_scheme(text):
    with pytest.raises(InvalidInputError):
        QualityScheme.parse(text)


@pytest.mark.parametrize(
    "scheme,q,valid",
    [
        pytest.param("categorical:3", 1, True, id="lowest label"),
        pytest.param("categorical:3", 3, True, id="highest label"),
        pytest.param("categorical:3", 0, False, id="below range"),
        pytest.param("categorical:3", 4, False, id="above range"),
        pytest.param("categorical:3", 2.5, False, id="fractional label"),
        pytest.param("continuous", 0.0, True, id="zero quality"),
        pytest.param("continuous", 1.0, True, id="unit quality"),
        pytest.param("continuous", -0.1, False, id="negative quality"),
        pytest.param("continuous", 1.1, False, id="quality above one"),
        pytest.param("continuous", math.nan, False, id="nan quality"),
    ],
)
def test_quality_validity(scheme, q, valid):
    assert QualityScheme.parse(scheme).is_valid_quality(q) is valid


def test_tau_vector_layout(scheme3):
    tau = Tau.from_vector([-1.0, -2.0, -3.0, -4.0, math.log(0.25)], scheme3)

    assert tau.fixed.theta.tolist() == [-1.0, -2.0, -3.0]
    assert tau.fixed.beta0 == -4.0
    assert tau.sigma2 == pytest.approx(0.25)
    assert tau.sigma == pytest.approx(0.5)
    assert tau.to_dict(scheme3)["beta0"] == -4.0


def test_tau_dimension_mismatch(scheme3):
    with pytest.raises(ConfigurationError):
        Tau.from_vector([-1.0, -2.0, -3.0, -4.0], scheme3)

    with pytest.raises(ConfigurationError):
        Tau.from_vector([-1.0, -2.0, -3.0], None).check(scheme3)


@pytest.mark.parametrize(
    "direction,valid",
    [
        pytest.param(0.0, False, id="zero excluded"),
        pytest.param(2 * math.pi, True, id="full turn included"),
        pytest.param(1.0, True, id="interior"),
        pytest.param(7.0, False, id="above full turn"),
    ],
)
def test_minutia_direction_range(direction, valid):
    if valid:
        Minutia(0.0, 0.0, direction)
    else:
        with pytest.raises(InvalidInputError):
            Minutia(0.0, 0.0, direction)


def test_match_config_ranges():
    MatchConfig(15.0, math.pi)
    with pytest.raises(InvalidInputError):
        MatchConfig(0.0, 0.3)
    with pytest.raises(InvalidInputError):
        MatchConfig(15.0, 3.2)


def test_pair_covariates_reject_genuine_pairs():
    with pytest.raises(InvalidInputError):
        PairCovariates(finger_a=1, finger_b=1, m_a=10, m_b=10, q_a=1, q_b=1)

    pair = PairCovariates(finger_a=0, finger_b=1, m_a=10, m_b=20, q_a=1, q_b=2)
    assert pair.log_mm == pytest.approx(math.log(200))


def test_dataset_is_read_only(small_dataset):
    with pytest.raises(ValueError):
        small_dataset.y[0] = 1.0


def test_relabel_fingers_moves_labels_with_fingers(scheme3):
    dataset = make_dataset(3, 1, scheme3)
    relabelled = dataset.relabel_fingers([2, 0, 1])

    for k in range(dataset.n_pairs):
        assert (
            relabelled.finger_labels[relabelled.finger_a[k]]
            == dataset.finger_labels[dataset.finger_a[k]]
        )
        assert (
            relabelled.finger_labels[relabelled.finger_b[k]]
            == dataset.finger_labels[dataset.finger_b[k]]
        )
    assert np.array_equal(relabelled.y, dataset.y)
