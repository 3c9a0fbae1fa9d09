import numpy as np

from prc_studio.dataset_handler.matches import (
    build_dataset,
    finger_sort_key,
    read_table,
)
from prc_studio.domain.types import MatchConfig, MatchDataset, Minutia, QualityScheme
from prc_studio.errors.errors import DatasetValidationError, InvalidInputError
from prc_studio.formatting import parse_floats
from prc_studio.matcher.base import count_matches
from prc_studio.message_handler.base import MessageHandler, get_message_handler
from prc_studio.message_handler.types import EventScope, EventType, LogEvent
from prc_studio.parallel import ordered_map

MINUTIA_COLUMNS = ["finger", "impression", "x", "y", "direction"]
QUALITY_COLUMNS = ["finger", "impression", "quality"]

ImpressionKey = tuple[str, int]


def _numeric_column(frame, column, line_numbers, diagnostics, integer=False) -> np.ndarray:
    values = parse_floats(frame[column]).to_numpy()
    for number, value in zip(line_numbers, values):
        if np.isnan(value):
            diagnostics.append(f"line {number}: non-numeric value in column {column}")
        elif integer and not float(value).is_integer():
            diagnostics.append(f"line {number}: non-integer value in column {column}")
    return values


def load_minutiae(paths: list[str]) -> dict[ImpressionKey, list[Minutia]]:
    """Reads one or more minutia files; rows of the same impression may span files."""
    minutiae: dict[ImpressionKey, list[Minutia]] = {}
    for path in paths:
        frame, line_numbers = read_table(path, MINUTIA_COLUMNS)
        diagnostics: list[str] = []
        impressions = _numeric_column(frame, "impression", line_numbers, diagnostics, True)
        xs = _numeric_column(frame, "x", line_numbers, diagnostics)
        ys = _numeric_column(frame, "y", line_numbers, diagnostics)
        directions = _numeric_column(frame, "direction", line_numbers, diagnostics)
        rows = []
        for number, finger, impression, x, y, direction in zip(
            line_numbers, frame["finger"].str.strip(), impressions, xs, ys, directions
        ):
            if np.isnan([impression, x, y, direction]).any():
                continue
            try:
                rows.append(((finger, int(impression)), Minutia(x, y, direction)))
            except InvalidInputError as e:
                diagnostics.append(f"line {number}: {e.message}")
        if diagnostics:
            raise DatasetValidationError(path, diagnostics)
        for key, minutia in rows:
            minutiae.setdefault(key, []).append(minutia)
    return minutiae


def load_minutia_set(path: str) -> list[Minutia]:
    """A single impression: every row of the file is one minutia; other columns are ignored."""
    frame, line_numbers = read_table(path, ["x", "y", "direction"])
    diagnostics: list[str] = []
    xs = _numeric_column(frame, "x", line_numbers, diagnostics)
    ys = _numeric_column(frame, "y", line_numbers, diagnostics)
    directions = _numeric_column(frame, "direction", line_numbers, diagnostics)
    minutiae = []
    for number, x, y, direction in zip(line_numbers, xs, ys, directions):
        if np.isnan([x, y, direction]).any():
            continue
        try:
            minutiae.append(Minutia(x, y, direction))
        except InvalidInputError as e:
            diagnostics.append(f"line {number}: {e.message}")
    if diagnostics:
        raise DatasetValidationError(path, diagnostics)
    return minutiae


def load_qualities(
    path: str, scheme: QualityScheme, relabel_qmax: int | None = None
) -> dict[ImpressionKey, float]:
    frame, line_numbers = read_table(path, QUALITY_COLUMNS)
    diagnostics: list[str] = []
    impressions = _numeric_column(frame, "impression", line_numbers, diagnostics, True)
    qualities = _numeric_column(frame, "quality", line_numbers, diagnostics)
    result: dict[ImpressionKey, float] = {}
    for number, finger, impression, quality in zip(
        line_numbers, frame["finger"].str.strip(), impressions, qualities
    ):
        if np.isnan(impression) or np.isnan(quality):
            continue
        if relabel_qmax is not None:
            if not (1 <= quality <= relabel_qmax and quality.is_integer()):
                diagnostics.append(f"line {number}: raw label outside 1..{relabel_qmax}")
                continue
            quality = relabel_qmax + 1 - quality
        if not scheme.is_valid_quality(quality):
            diagnostics.append(f"line {number}: quality {quality} not valid under {scheme}")
            continue
        key = (finger, int(impression))
        if key in result:
            diagnostics.append(f"line {number}: duplicate quality for {finger}/{int(impression)}")
        result[key] = float(quality)
    if diagnostics:
        raise DatasetValidationError(path, diagnostics)
    return result


def build_matches_from_minutiae(
    minutia_paths: list[str],
    quality_path: str,
    cfg: MatchConfig,
    scheme: QualityScheme,
    relabel_qmax: int | None = None,
    msg_handler: MessageHandler | None = None,
    threads: int | None = None,
) -> MatchDataset:
    """Counts matches for every impostor pair of impressions; m is the size of each minutia list."""
    msg_handler = msg_handler or get_message_handler()
    minutiae = load_minutiae(minutia_paths)
    qualities = load_qualities(quality_path, scheme, relabel_qmax)

    for key in sorted(set(minutiae) | set(qualities), key=lambda k: (finger_sort_key(k[0]), k[1])):
        if key not in minutiae:
            raise InvalidInputError(
                "impression", key, f"Impression {key[0]}/{key[1]} has no minutiae."
            )
        if key not in qualities:
            raise InvalidInputError(
                "impression", key, f"Impression {key[0]}/{key[1]} has no quality value."
            )

    keys = sorted(minutiae, key=lambda k: (finger_sort_key(k[0]), k[1]))
    pairs = [
        (a, b)
        for i, a in enumerate(keys)
        for b in keys[i + 1 :]
        if a[0] != b[0]
    ]
    if not pairs:
        raise InvalidInputError(
            "minutiae", len(keys), "Need impressions of at least two fingers."
        )
    counts = ordered_map(
        lambda pair: count_matches(minutiae[pair[0]], minutiae[pair[1]], cfg),
        pairs,
        threads,
    )
    msg_handler.send_message(
        LogEvent(
            "matches_counted",
            EventType.INFO,
            EventScope.MATCHER,
            f"Counted matches for {len(pairs)} impostor pairs",
            {"impressions": len(keys), "r0": cfg.r0, "u0": cfg.u0},
        )
    )
    return build_dataset(
        finger_a=[a[0] for a, _ in pairs],
        impr_a=[a[1] for a, _ in pairs],
        finger_b=[b[0] for _, b in pairs],
        impr_b=[b[1] for _, b in pairs],
        m_a=[len(minutiae[a]) for a, _ in pairs],
        m_b=[len(minutiae[b]) for _, b in pairs],
        q_a=[qualities[a] for a, _ in pairs],
        q_b=[qualities[b] for _, b in pairs],
        y=counts,
        scheme=scheme,
    )
