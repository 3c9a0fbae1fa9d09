import numpy as np
import pandas as pd

from prc_studio.formatting import format_float, parse_floats


def test_format_float_round_trips():
    value = 0.1 + 0.2
    assert float(format_float(value)) == value


def test_formatted_floats_parse_back_bit_for_bit():
    rng = np.random.default_rng(4)
    values = np.concatenate(
        [rng.uniform(0.0, 1.0, 500), rng.normal(0.0, 1e6, 250), rng.normal(0.0, 1e-9, 250)]
    )

    parsed = parse_floats(pd.Series([format_float(v) for v in values]))

    assert np.array_equal(parsed.to_numpy(), values)


def test_unparsable_cells_become_nan():
    parsed = parse_floats(pd.Series([" 1.5 ", "abc", "", "2e-3"]))

    assert parsed[0] == 1.5
    assert parsed[[1, 2]].isna().all()
    assert parsed[3] == 0.002
