import numpy as np
import pytest

from prc_studio.errors.errors import InvalidInputError
from prc_studio.prc.tables import (
    format_label,
    prc_grid,
    reference_comparison,
    render_matrix_text,
    render_prc_grid_csv,
    render_prc_grid_text,
)
from prc_studio.presets.presets import samples_from_summary


def test_prc_grid_is_symmetric():
    samples = samples_from_summary("db1_categorical", R=4, seed=0)

    grid = prc_grid(samples, 12, 38, 38, [1, 2, 3], mc_draws=1000)

    means = grid.means()
    assert means.shape == (3, 3)
    assert np.array_equal(means, means.T)
    # Better quality makes a random correspondence less likely.
    assert means[2, 2] < means[0, 0]

    text = render_prc_grid_text(grid)
    assert text.startswith("PRC(12 | 38,38)")
    lines = render_prc_grid_csv(grid).splitlines()
    assert lines[0].startswith("q1,q2,w,m1,m2,mean")
    assert len(lines) == 1 + 9


def test_labels_are_validated():
    samples = samples_from_summary("db1_categorical", R=2, seed=0)

    with pytest.raises(InvalidInputError):
        prc_grid(samples, 12, 38, 38, [1, 4], mc_draws=10)


def test_reference_comparison():
    ratios = reference_comparison(np.array([[0.2, 0.1], [0.1, 0.05]]), [[0.1, 0.1], [0.1, 0.1]])

    assert ratios.tolist() == [[2.0, 1.0], [1.0, 0.5]]
    with pytest.raises(InvalidInputError):
        reference_comparison(np.ones((2, 2)), [[1.0]])


def test_render_matrix_text():
    text = render_matrix_text(np.array([[0.123456]]), [0.3], "t", digits=3)

    assert text.splitlines() == ["t", "Q1\\Q2    0.3", "  0.3  0.123"]
    assert format_label(3) == "3"
    assert format_label(0.5) == "0.5"
