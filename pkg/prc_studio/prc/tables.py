from dataclasses import dataclass

import numpy as np

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.errors.errors import InvalidInputError
from prc_studio.formatting import format_float
from prc_studio.prc.base import PrcQuery, PrcReport, draw_variates, prc_posterior
from prc_studio.prc.design import check_labels

INFEASIBLE = "*"


def format_label(label) -> str:
    return f"{label:g}" if isinstance(label, float) else str(label)


@dataclass
class PrcGrid:
    w: int
    m1: int
    m2: int
    labels: list
    reports: list[list[PrcReport]]

    def means(self) -> np.ndarray:
        return np.array([[report.mean for report in row] for row in self.reports])


def prc_grid(
    samples: PosteriorSamples,
    w: int,
    m1: int,
    m2: int,
    labels: list,
    mc_draws: int = 100_000,
    alpha: float = 0.001,
    seed: int = 0,
    threads: int | None = None,
) -> PrcGrid:
    """PRC reports over every pair of quality labels; the grid is symmetric."""
    check_labels(labels, samples.scheme)
    variates = draw_variates(seed, mc_draws)
    size = len(labels)
    reports: list[list[PrcReport | None]] = [[None] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            query = PrcQuery(w, m1, m2, labels[i], labels[j], samples.scheme)
            reports[i][j] = reports[j][i] = prc_posterior(
                query, samples, alpha=alpha, variates=variates, threads=threads
            )
    return PrcGrid(w=w, m1=m1, m2=m2, labels=list(labels), reports=reports)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in rows
    )


def render_prc_grid_text(grid: PrcGrid) -> str:
    header = ["Q1\\Q2"] + [format_label(label) for label in grid.labels]
    rows = [header]
    for label, reports in zip(grid.labels, grid.reports):
        rows.append(
            [format_label(label)]
            + [
                f"{r.mean:.4f} [{r.ci_low:.4f}, {r.ci_high:.4f}]"
                for r in reports
            ]
        )
    title = f"PRC({grid.w} | {grid.m1},{grid.m2}), mean [CI]"
    return title + "\n" + _align(rows)


def render_prc_grid_csv(grid: PrcGrid) -> str:
    lines = ["q1,q2,w,m1,m2,mean,sd,ci_low,ci_high,alpha,mc_draws,r_samples"]
    for i, label_i in enumerate(grid.labels):
        for j, label_j in enumerate(grid.labels):
            r = grid.reports[i][j]
            lines.append(
                ",".join(
                    [
                        format_label(label_i),
                        format_label(label_j),
                        str(grid.w),
                        str(grid.m1),
                        str(grid.m2),
                        format_float(r.mean),
                        format_float(r.sd),
                        format_float(r.ci_low),
                        format_float(r.ci_high),
                        format_float(r.alpha),
                        str(r.mc_draws),
                        str(r.r_samples),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def render_design_text(grid: list[list[int | None]], labels: list, title: str = "") -> str:
    rows = [["Q1\\Q2"] + [format_label(label) for label in labels]]
    for label, row in zip(labels, grid):
        rows.append(
            [format_label(label)]
            + [INFEASIBLE if w is None else str(w) for w in row]
        )
    return (title + "\n" if title else "") + _align(rows)


def render_design_csv(grid: list[list[int | None]], labels: list) -> str:
    lines = ["q1,q2,w"]
    for label_i, row in zip(labels, grid):
        for label_j, w in zip(labels, row):
            lines.append(
                f"{format_label(label_i)},{format_label(label_j)},"
                f"{INFEASIBLE if w is None else w}"
            )
    return "\n".join(lines) + "\n"


def reference_comparison(means: np.ndarray, reference) -> np.ndarray:
    """Ratio of computed PRC means to a reference table, cell by cell."""
    reference = np.asarray(reference, dtype=float)
    if reference.shape != np.shape(means):
        raise InvalidInputError(
            "reference", reference.shape, f"Reference table doesn't match shape {np.shape(means)}."
        )
    return np.asarray(means, dtype=float) / reference


def render_matrix_text(values: np.ndarray, labels: list, title: str = "", digits: int = 4) -> str:
    rows = [["Q1\\Q2"] + [format_label(label) for label in labels]]
    for label, row in zip(labels, values):
        rows.append([format_label(label)] + [f"{value:.{digits}f}" for value in row])
    return (title + "\n" if title else "") + _align(rows)


def render_ratio_text(ratios: np.ndarray, labels: list, title: str = "") -> str:
    return render_matrix_text(ratios, labels, title, digits=3)
