import numpy as np
import pytest

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.bayes.storage import load_samples, read_metadata, save_samples
from prc_studio.errors.errors import DatasetValidationError


def test_saved_samples_load_back_exactly(tmp_path, scheme3):
    rng = np.random.default_rng(0)
    samples = PosteriorSamples(
        draws=rng.normal(size=(7, 5)),
        weights_diagnostic=rng.dirichlet(np.ones(20)),
        seed=9,
        scheme=scheme3,
        ess=12.5,
        proposals=20,
        failed=1,
    )
    path = tmp_path / "samples.csv"

    save_samples(str(path), samples, {"manifest": "abc"})
    loaded = load_samples(str(path))

    assert np.array_equal(loaded.draws, samples.draws)
    assert np.array_equal(loaded.weights_diagnostic, samples.weights_diagnostic)
    assert loaded.ess == 12.5
    assert loaded.scheme == scheme3
    assert loaded.seed == 9
    assert loaded.proposals == 20
    assert loaded.failed == 1
    assert read_metadata(str(path))["manifest"] == "abc"


def test_load_requires_scheme(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("theta0,theta1,beta0,log_sigma2\n1,2,3,4\n")

    with pytest.raises(DatasetValidationError):
        load_samples(str(path))


def test_load_checks_columns(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("# scheme: continuous\ntheta0,beta0,log_sigma2\n1,2,3\n")

    with pytest.raises(DatasetValidationError):
        load_samples(str(path))


def test_samples_without_weights_load_with_none(tmp_path, scheme3):
    samples = PosteriorSamples(
        draws=np.full((2, 5), -1.0 / 3.0),
        weights_diagnostic=np.zeros(0),
        seed=0,
        scheme=scheme3,
        ess=2.0,
        proposals=2,
    )
    path = str(tmp_path / "samples.csv")

    save_samples(path, samples)
    loaded = load_samples(path)

    assert "weights" not in read_metadata(path)
    assert loaded.weights_diagnostic.size == 0
    assert np.array_equal(loaded.draws, samples.draws)
