import numpy as np

from prc_studio.errors.errors import InvalidInputError


def impostor_pair_count(f: int, l: int) -> int:
    return f * (f - 1) * l * l // 2


def enumerate_impostor_pairs(f: int, l: int) -> np.ndarray:
    """
    Every unordered cross-finger pair of impressions exactly once, as rows
    (finger_a, impr_a, finger_b, impr_b) with finger_a < finger_b and impressions numbered from 0.
    """
    if f < 2 or l < 1:
        raise InvalidInputError("f, l", (f, l), "Need F >= 2 fingers and L >= 1 impressions.")
    finger_a, finger_b = np.triu_indices(f, k=1)
    impr_a, impr_b = (grid.ravel() for grid in np.indices((l, l)))
    n_finger_pairs = finger_a.size
    n_impr_pairs = impr_a.size
    return np.column_stack(
        [
            np.repeat(finger_a, n_impr_pairs),
            np.tile(impr_a, n_finger_pairs),
            np.repeat(finger_b, n_impr_pairs),
            np.tile(impr_b, n_finger_pairs),
        ]
    ).astype(np.int64)
