"""Text forms of floats shared by every file the package reads or writes."""

import numpy as np
import pandas as pd


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(value), ".17g")


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def parse_floats(texts: pd.Series) -> pd.Series:
    """
    Correctly rounded conversion of each cell, so format_float output reads back bit for bit.
    Cells that aren't numbers become NaN.
    """
    return texts.astype(str).str.strip().map(_to_float).astype(float)
