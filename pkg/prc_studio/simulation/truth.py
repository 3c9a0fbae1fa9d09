from prc_studio.domain.types import TYPE_ORDER, MatchDataset
from prc_studio.formatting import format_float
from prc_studio.simulation.base import SimulatedDataset


def truth_rows(simulated: SimulatedDataset) -> list[tuple[str, str, str]]:
    """(section, name, value) rows: tau, one b per finger label and the per-type counts of every pair."""
    dataset: MatchDataset = simulated.dataset
    truth = simulated.truth
    rows = [
        ("tau", name, format_float(value))
        for name, value in truth.tau.to_dict(dataset.scheme).items()
    ]
    rows += [
        ("b", label, format_float(truth.b[index]))
        for index, label in enumerate(dataset.finger_labels)
    ]
    rows.append(("meta", "redraws", str(truth.redraws)))
    for k in range(dataset.n_pairs):
        pair = (
            f"{dataset.finger_labels[dataset.finger_a[k]]}/{dataset.impr_a[k]}"
            f"-{dataset.finger_labels[dataset.finger_b[k]]}/{dataset.impr_b[k]}"
        )
        rows += [
            ("count", f"{pair}:{u}{v}", str(int(truth.type_counts[k, t])))
            for t, (u, v) in enumerate(TYPE_ORDER)
        ]
    return rows


def write_truth(path: str, simulated: SimulatedDataset):
    lines = ["section,name,value"] + [",".join(row) for row in truth_rows(simulated)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
