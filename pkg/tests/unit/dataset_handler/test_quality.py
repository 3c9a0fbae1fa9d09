import pytest

from prc_studio.dataset_handler.quality import bin_labels, quality_bins, relabel_categorical
from prc_studio.errors.errors import InvalidInputError


def test_relabel_categorical():
    assert [relabel_categorical(q, 5) for q in range(1, 6)] == [5, 4, 3, 2, 1]
    with pytest.raises(InvalidInputError):
        relabel_categorical(6, 5)


def test_quality_bins():
    assert quality_bins([0.0, 0.05, 0.1, 0.95, 1.0]).tolist() == [0, 0, 1, 9, 9]
    assert bin_labels(0.5) == ["0-0.5", "0.5-1"]
    with pytest.raises(InvalidInputError):
        quality_bins([0.5], width=0.0)
