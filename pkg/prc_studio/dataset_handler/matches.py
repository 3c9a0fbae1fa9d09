import io

import numpy as np
import pandas as pd

from prc_studio.domain.types import MatchDataset, QualityScheme
from prc_studio.errors.errors import DatasetValidationError, InvalidInputError
from prc_studio.formatting import format_float, parse_floats

COLUMNS = ["finger_a", "impr_a", "finger_b", "impr_b", "m_a", "m_b", "q_a", "q_b", "y"]
INTEGER_COLUMNS = ["impr_a", "impr_b", "m_a", "m_b", "y"]
MAX_DIAGNOSTICS = 50


def finger_sort_key(label: str):
    label = str(label)
    if label.lstrip("-").isdigit():
        return (0, int(label), "")
    return (1, 0, label)


def build_dataset(
    finger_a,
    impr_a,
    finger_b,
    impr_b,
    m_a,
    m_b,
    q_a,
    q_b,
    y,
    scheme: QualityScheme,
) -> MatchDataset:
    """
    Builds a dataset from raw finger labels, putting every pair in canonical order
    (finger_a, impr_a) < (finger_b, impr_b).
    """
    finger_a = np.asarray(finger_a).astype(str)
    finger_b = np.asarray(finger_b).astype(str)
    labels = sorted(set(finger_a) | set(finger_b), key=finger_sort_key)
    index = {label: k for k, label in enumerate(labels)}

    columns = {
        "finger_a": np.array([index[f] for f in finger_a], dtype=np.int64),
        "finger_b": np.array([index[f] for f in finger_b], dtype=np.int64),
        "impr_a": np.asarray(impr_a, dtype=np.int64),
        "impr_b": np.asarray(impr_b, dtype=np.int64),
        "m_a": np.asarray(m_a, dtype=np.int64),
        "m_b": np.asarray(m_b, dtype=np.int64),
        "q_a": np.asarray(q_a, dtype=float),
        "q_b": np.asarray(q_b, dtype=float),
    }
    y = np.asarray(y, dtype=float)

    if np.any(columns["finger_a"] == columns["finger_b"]):
        raise InvalidInputError("finger_b", "genuine", "Impostor pairs need two different fingers.")
    if np.any(columns["m_a"] < 1) or np.any(columns["m_b"] < 1):
        raise InvalidInputError("m", "< 1", "Minutia counts must be at least 1.")
    if np.any(y < 0) or np.any(y > np.minimum(columns["m_a"], columns["m_b"])):
        raise InvalidInputError("y", "out of range", "Match counts must lie in 0..min(m_a, m_b).")
    for q in np.concatenate([columns["q_a"], columns["q_b"]]):
        scheme.validate_quality(q)

    swap = (columns["finger_a"] > columns["finger_b"]) | (
        (columns["finger_a"] == columns["finger_b"]) & (columns["impr_a"] > columns["impr_b"])
    )
    for left, right in (("finger_a", "finger_b"), ("impr_a", "impr_b"), ("m_a", "m_b"), ("q_a", "q_b")):
        a, b = columns[left].copy(), columns[right].copy()
        columns[left] = np.where(swap, b, a)
        columns[right] = np.where(swap, a, b)

    impressions = pd.DataFrame(
        {
            "finger": np.concatenate([columns["finger_a"], columns["finger_b"]]),
            "impr": np.concatenate([columns["impr_a"], columns["impr_b"]]),
        }
    ).drop_duplicates()
    n_impressions = int(impressions.groupby("finger").size().max()) if len(impressions) else 0

    return MatchDataset(
        **columns,
        y=y,
        scheme=scheme,
        finger_labels=tuple(labels),
        n_impressions=n_impressions,
    )


def _read_data_lines(path: str) -> list[tuple[int, str]]:
    """Non-blank, non-comment lines with their 1-based line numbers."""
    with open(path, "r", encoding="utf-8") as f:
        return [
            (number, line)
            for number, line in enumerate(f.read().splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]


def read_table(path: str, columns: list[str]) -> tuple[pd.DataFrame, list[int]]:
    """Reads a CSV as strings, failing fast when the header lacks a required column."""
    lines = _read_data_lines(path)
    if not lines:
        raise DatasetValidationError(path, ["file has no header"])
    header_number, header = lines[0]
    present = [column.strip() for column in header.split(",")]
    missing = [column for column in columns if column not in present]
    if missing:
        raise DatasetValidationError(
            path, [f"line {header_number}: missing columns {', '.join(missing)}"]
        )
    try:
        frame = pd.read_csv(
            io.StringIO("\n".join(line for _, line in lines)),
            dtype=str,
            skipinitialspace=True,
            keep_default_na=False,
        )
    except pd.errors.ParserError as e:
        raise DatasetValidationError(path, [f"malformed CSV: {e}"])
    frame.columns = [column.strip() for column in frame.columns]
    return frame, [number for number, _ in lines[1:]]


def _canonical_pair(a: tuple, b: tuple) -> tuple:
    def key(k):
        return (finger_sort_key(k[0]), k[1])

    return (a, b) if key(a) <= key(b) else (b, a)


def load_matches(
    path: str, scheme: QualityScheme, relabel_qmax: int | None = None
) -> MatchDataset:
    frame, line_numbers = read_table(path, COLUMNS)
    diagnostics: list[str] = []

    def flag(mask, message: str):
        for position in np.flatnonzero(np.asarray(mask)):
            diagnostics.append(f"line {line_numbers[position]}: {message}")

    values = {
        column: parse_floats(frame[column])
        for column in COLUMNS
        if column not in ("finger_a", "finger_b")
    }
    for column, series in values.items():
        flag(series.isna(), f"non-numeric value in column {column}")
    for column in INTEGER_COLUMNS:
        series = values[column]
        flag(series.notna() & (series != np.floor(series)), f"non-integer value in column {column}")

    finger_a = frame["finger_a"].str.strip()
    finger_b = frame["finger_b"].str.strip()
    flag(finger_a == finger_b, "genuine pair (finger_a == finger_b); only impostor pairs are allowed")
    flag((finger_a == "") | (finger_b == ""), "missing finger label")

    m_a, m_b, y = values["m_a"], values["m_b"], values["y"]
    flag((m_a < 1) | (m_b < 1), "minutia counts must be at least 1")
    flag(y < 0, "negative match count")
    flag(y > np.minimum(m_a, m_b), "match count exceeds min(m_a, m_b)")

    for column in ("q_a", "q_b"):
        q = values[column]
        if relabel_qmax is not None:
            raw_valid = q.notna() & (q >= 1) & (q <= relabel_qmax) & (q == np.floor(q))
            flag(q.notna() & ~raw_valid, f"raw label in column {column} outside 1..{relabel_qmax}")
            q = relabel_qmax + 1 - q
            values[column] = q
        valid = q.map(lambda v: bool(pd.notna(v)) and scheme.is_valid_quality(v))
        flag(q.notna() & ~valid, f"quality in column {column} not valid under {scheme}")

    canonical = pd.Series(
        [
            _canonical_pair((fa, ia), (fb, ib))
            for fa, ia, fb, ib in zip(finger_a, values["impr_a"], finger_b, values["impr_b"])
        ],
        dtype=object,
    )
    flag(canonical.duplicated(keep="first"), "duplicate unordered pair")

    if diagnostics:
        shown = diagnostics[:MAX_DIAGNOSTICS]
        if len(diagnostics) > MAX_DIAGNOSTICS:
            shown.append(f"... and {len(diagnostics) - MAX_DIAGNOSTICS} more")
        raise DatasetValidationError(path, shown)

    return build_dataset(
        finger_a,
        values["impr_a"].astype(np.int64),
        finger_b,
        values["impr_b"].astype(np.int64),
        m_a.astype(np.int64),
        m_b.astype(np.int64),
        values["q_a"].astype(float),
        values["q_b"].astype(float),
        y.astype(float),
        scheme,
    )


def _format_quality(q: float, scheme: QualityScheme) -> str:
    return str(int(q)) if scheme.is_categorical else format_float(q)


def _format_count(y: float) -> str:
    return str(int(y)) if float(y).is_integer() else format_float(y)


def save_matches(path: str, dataset: MatchDataset, comments: list[str] | None = None):
    labels = dataset.finger_labels
    lines = [f"# {comment}" for comment in comments or []]
    lines.append(",".join(COLUMNS))
    for k in range(dataset.n_pairs):
        lines.append(
            ",".join(
                [
                    labels[dataset.finger_a[k]],
                    str(dataset.impr_a[k]),
                    labels[dataset.finger_b[k]],
                    str(dataset.impr_b[k]),
                    str(dataset.m_a[k]),
                    str(dataset.m_b[k]),
                    _format_quality(dataset.q_a[k], dataset.scheme),
                    _format_quality(dataset.q_b[k], dataset.scheme),
                    _format_count(dataset.y[k]),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
