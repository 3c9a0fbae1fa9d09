import math

import numpy as np

from prc_studio.domain.types import MatchConfig, Minutia, MinutiaSet
from prc_studio.errors.errors import InvalidInputError

TWO_PI = 2.0 * math.pi


def normalize_direction(u):
    """Maps angles into (0, 2 pi]."""
    r = np.mod(u, TWO_PI)
    return np.where(r <= 0.0, r + TWO_PI, r)


def _angular(u, v):
    d = np.abs(np.asarray(u) - np.asarray(v))
    return np.minimum(d, TWO_PI - d)


def angular_distance(u: float, v: float) -> float:
    for name, value in (("u", u), ("v", v)):
        if not 0.0 < value <= TWO_PI:
            raise InvalidInputError(name, value, "Directions must lie in (0, 2*pi].")
    return float(_angular(u, v))


def is_match(a: Minutia, b: Minutia, cfg: MatchConfig) -> bool:
    return (
        math.hypot(a.x - b.x, a.y - b.y) < cfg.r0
        and angular_distance(a.direction, b.direction) < cfg.u0
    )


def _as_arrays(minutiae: MinutiaSet) -> tuple[np.ndarray, np.ndarray]:
    points = np.array([[m.x, m.y] for m in minutiae], dtype=float).reshape(-1, 2)
    directions = np.array([m.direction for m in minutiae], dtype=float)
    return points, directions


def greedy_assignment(distances: np.ndarray, angles: np.ndarray, cfg: MatchConfig) -> int:
    """
    One-to-one matching of candidate pairs (distance < r0 and angle < u0), taken greedily by
    ascending d / r0 + a / u0 with ties broken by (i, j).
    """
    candidate_i, candidate_j = np.nonzero((distances < cfg.r0) & (angles < cfg.u0))
    if candidate_i.size == 0:
        return 0
    scores = distances[candidate_i, candidate_j] / cfg.r0 + angles[candidate_i, candidate_j] / cfg.u0
    order = np.lexsort((candidate_j, candidate_i, scores))
    used_a: set[int] = set()
    used_b: set[int] = set()
    for k in order:
        i, j = int(candidate_i[k]), int(candidate_j[k])
        if i not in used_a and j not in used_b:
            used_a.add(i)
            used_b.add(j)
    return len(used_a)


def aligned_count(
    points_a: np.ndarray,
    directions_a: np.ndarray,
    points_b: np.ndarray,
    directions_b: np.ndarray,
    anchor_a: int,
    anchor_b: int,
    cfg: MatchConfig,
) -> int:
    """Count after the rigid motion of set A that puts its anchor exactly on B's anchor."""
    phi = directions_b[anchor_b] - directions_a[anchor_a]
    rotation = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    moved = (points_a - points_a[anchor_a]) @ rotation.T + points_b[anchor_b]
    moved_directions = normalize_direction(directions_a + phi)
    distances = np.linalg.norm(moved[:, None, :] - points_b[None, :, :], axis=2)
    angles = _angular(moved_directions[:, None], directions_b[None, :])
    return greedy_assignment(distances, angles, cfg)


def count_matches(set_a: MinutiaSet, set_b: MinutiaSet, cfg: MatchConfig) -> int:
    """Largest one-to-one match count over all anchor alignments of A onto B."""
    if not set_a or not set_b:
        return 0
    points_a, directions_a = _as_arrays(set_a)
    points_b, directions_b = _as_arrays(set_b)

    if not cfg.anchor_search:
        distances = np.linalg.norm(points_a[:, None, :] - points_b[None, :, :], axis=2)
        return greedy_assignment(
            distances, _angular(directions_a[:, None], directions_b[None, :]), cfg
        )

    best = 0
    limit = min(len(set_a), len(set_b))
    for anchor_a in range(len(set_a)):
        for anchor_b in range(len(set_b)):
            best = max(
                best,
                aligned_count(
                    points_a, directions_a, points_b, directions_b, anchor_a, anchor_b, cfg
                ),
            )
            if best == limit:
                return best
    return best
