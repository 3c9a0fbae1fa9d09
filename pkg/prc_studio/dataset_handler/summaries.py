from dataclasses import dataclass
from enum import Enum

import numpy as np

from prc_studio.dataset_handler.quality import bin_labels, quality_bins
from prc_studio.domain.types import MatchDataset
from prc_studio.errors.errors import InvalidInputError
from prc_studio.formatting import format_float


class Statistic(Enum):
    Y = "y_mean_sd"
    MM = "mm_mean_sd"
    RATIO = "ratio_mean_sd"


STATISTIC_TITLES = {
    Statistic.Y: "Mean (SD) of Y",
    Statistic.MM: "Mean (SD) of m1*m2",
    Statistic.RATIO: "Mean (SD) of Y/(m1*m2)",
}


@dataclass
class SummaryTable:
    """
    Cell means and SDs of a per-pair statistic indexed by quality cells.
    Empty cells hold NaN; cells with one value report SD 0 and count 1.
    """

    statistic: Statistic
    labels: list[str]
    mean: np.ndarray
    sd: np.ndarray
    count: np.ndarray


def _statistic_values(dataset: MatchDataset, statistic: Statistic) -> np.ndarray:
    mm = dataset.m_a.astype(float) * dataset.m_b
    if statistic == Statistic.Y:
        return dataset.y.astype(float)
    if statistic == Statistic.MM:
        return mm
    return dataset.y / mm


def summarize(
    dataset: MatchDataset, statistic: Statistic | str, bin_width: float = 0.1
) -> SummaryTable:
    """Per quality cell mean and SD, pooling (q1, q2) with (q2, q1) so the table is symmetric."""
    statistic = Statistic(statistic)
    if dataset.n_pairs == 0:
        raise InvalidInputError("dataset", 0, "Cannot summarize an empty dataset.")

    if dataset.scheme.is_categorical:
        labels = [str(label) for label in dataset.scheme.labels()]
        cell_a = dataset.q_a.astype(int) - 1
        cell_b = dataset.q_b.astype(int) - 1
    else:
        labels = bin_labels(bin_width)
        cell_a = quality_bins(dataset.q_a, bin_width)
        cell_b = quality_bins(dataset.q_b, bin_width)

    values = _statistic_values(dataset, statistic)
    size = len(labels)
    mean = np.full((size, size), np.nan)
    sd = np.full((size, size), np.nan)
    count = np.zeros((size, size), dtype=int)
    for i in range(size):
        for j in range(i, size):
            mask = ((cell_a == i) & (cell_b == j)) | ((cell_a == j) & (cell_b == i))
            # Sorting first makes the sums independent of row order.
            cell = np.sort(values[mask])
            if cell.size == 0:
                continue
            count[i, j] = count[j, i] = cell.size
            mean[i, j] = mean[j, i] = cell.mean()
            sd[i, j] = sd[j, i] = cell.std(ddof=1) if cell.size > 1 else 0.0
    return SummaryTable(statistic=statistic, labels=labels, mean=mean, sd=sd, count=count)


def render_summary_text(table: SummaryTable) -> str:
    rows = [["Q1\\Q2"] + table.labels]
    for i, label in enumerate(table.labels):
        cells = []
        for j in range(len(table.labels)):
            if table.count[i, j] == 0:
                cells.append("-")
            else:
                cells.append(f"{table.mean[i, j]:.4g} ({table.sd[i, j]:.3g})")
        rows.append([label] + cells)
    widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
    body = "\n".join(
        "  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in rows
    )
    return f"{STATISTIC_TITLES[table.statistic]}\n{body}"


def render_summary_csv(table: SummaryTable) -> str:
    lines = ["q1,q2,mean,sd,count"]
    for i, label_i in enumerate(table.labels):
        for j, label_j in enumerate(table.labels):
            if table.count[i, j] == 0:
                lines.append(f"{label_i},{label_j},,,0")
            else:
                lines.append(
                    f"{label_i},{label_j},{format_float(table.mean[i, j])},"
                    f"{format_float(table.sd[i, j])},{table.count[i, j]}"
                )
    return "\n".join(lines) + "\n"
