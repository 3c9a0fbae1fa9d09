import numpy as np
import pytest

from prc_studio.dataset_handler.minutiae import (
    build_matches_from_minutiae,
    load_minutia_set,
    load_qualities,
)
from prc_studio.domain.types import MatchConfig, QualityScheme
from prc_studio.errors.errors import DatasetValidationError, InvalidInputError
from prc_studio.formatting import format_float

CFG = MatchConfig(15.0, 0.3927)
SCHEME = QualityScheme.categorical(3)
POINTS = [(10.0, 10.0, 1.0), (60.0, 20.0, 2.0), (30.0, 90.0, 3.0)]


def _minutia_rows(finger, impression, points):
    return [f"{finger},{impression},{x},{y},{d}" for x, y, d in points]


@pytest.fixture
def database(tmp_path):
    minutiae = tmp_path / "minutiae.csv"
    rows = ["finger,impression,x,y,direction"]
    rows += _minutia_rows("A", 1, POINTS)
    rows += _minutia_rows("B", 1, POINTS)
    rows += _minutia_rows("C", 1, POINTS[:2])
    minutiae.write_text("\n".join(rows) + "\n")

    qualities = tmp_path / "qualities.csv"
    qualities.write_text("finger,impression,quality\nA,1,1\nB,1,2\nC,1,3\n")
    return str(minutiae), str(qualities)


def test_build_matches_from_minutiae(database, msg_handler):
    minutiae, qualities = database

    dataset = build_matches_from_minutiae([minutiae], qualities, CFG, SCHEME, msg_handler=msg_handler)

    assert dataset.n_pairs == 3
    assert dataset.finger_labels == ("A", "B", "C")
    # Copies of the same impression match everywhere; C holds two of the three minutiae.
    assert dataset.y.tolist() == [3.0, 2.0, 2.0]
    assert dataset.m_b.tolist() == [3, 2, 2]
    assert msg_handler.send_message.call_args.args[0].name == "matches_counted"


def test_relabelled_qualities(database):
    _, qualities = database

    assert load_qualities(qualities, SCHEME, relabel_qmax=3) == {
        ("A", 1): 3.0,
        ("B", 1): 2.0,
        ("C", 1): 1.0,
    }


def test_impression_without_quality(tmp_path, database, msg_handler):
    minutiae, _ = database
    qualities = tmp_path / "partial.csv"
    qualities.write_text("finger,impression,quality\nA,1,1\nB,1,2\n")

    with pytest.raises(InvalidInputError):
        build_matches_from_minutiae([minutiae], str(qualities), CFG, SCHEME, msg_handler=msg_handler)


def test_direction_out_of_range(tmp_path):
    path = tmp_path / "set.csv"
    path.write_text("x,y,direction\n1,2,0.5\n3,4,0\n")

    with pytest.raises(DatasetValidationError) as e:
        load_minutia_set(str(path))
    assert e.value.diagnostics[0].startswith("line 3:")


def test_load_minutia_set(tmp_path):
    path = tmp_path / "set.csv"
    path.write_text("x,y,direction,kind\n1,2,0.5,ending\n3,4,1.5,bifurcation\n")

    minutiae = load_minutia_set(str(path))

    assert [(m.x, m.y, m.direction) for m in minutiae] == [(1.0, 2.0, 0.5), (3.0, 4.0, 1.5)]


def test_minutia_coordinates_load_back_exactly(tmp_path):
    rng = np.random.default_rng(2)
    rows = np.column_stack(
        [rng.uniform(0, 500, 40), rng.uniform(0, 500, 40), rng.uniform(0.01, 6.28, 40)]
    )
    path = tmp_path / "set.csv"
    path.write_text(
        "x,y,direction\n"
        + "".join(",".join(format_float(v) for v in row) + "\n" for row in rows)
    )

    minutiae = load_minutia_set(str(path))

    assert np.array_equal([(m.x, m.y, m.direction) for m in minutiae], rows)
