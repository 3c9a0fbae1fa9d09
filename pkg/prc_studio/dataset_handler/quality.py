import numpy as np

from prc_studio.errors.errors import InvalidInputError


def relabel_categorical(q0: int, qmax: int) -> int:
    """Turns a raw label where 1 is best into a model label where larger is better."""
    if not 1 <= q0 <= qmax or int(q0) != q0:
        raise InvalidInputError("q0", q0, f"Raw labels must lie in 1..{qmax}.")
    return qmax + 1 - int(q0)


def quality_bins(values, width: float = 0.1) -> np.ndarray:
    """Equal-width bin index over [0, 1]; 1.0 falls into the last bin."""
    if not 0.0 < width <= 1.0:
        raise InvalidInputError("width", width, "Bin width must lie in (0, 1].")
    n_bins = int(np.ceil(1.0 / width - 1e-9))
    values = np.asarray(values, dtype=float)
    return np.minimum(np.floor(values / width + 1e-9).astype(int), n_bins - 1)


def bin_labels(width: float = 0.1) -> list[str]:
    n_bins = int(np.ceil(1.0 / width - 1e-9))
    edges = [round(k * width, 10) for k in range(n_bins)] + [1.0]
    return [f"{edges[k]:g}-{edges[k + 1]:g}" for k in range(n_bins)]
