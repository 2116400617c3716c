"""
One-dimensional nearest-neighbor matching on propensity scores.

Units are 0-based row positions. Candidates are ranked by the pair
(|score difference|, unit index), so every query returns exactly the
requested number of units, nearest first, even when scores tie.

Each arm keeps its units sorted by (score, unit index). A query finds its
insertion point by binary search and widens a window outward from it. When an
arm holds no duplicate scores the m nearest units always lie within m sorted
positions on either side, so all queries of one arm are answered together
from a fixed (n, 2m) candidate block. Arms with duplicate scores fall back
to a per-query two-pointer walk that consumes whole tie groups at a time.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BoundError, DegenerateArmError, ShapeError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class _SortedArm:
    units: np.ndarray
    scores: np.ndarray
    group_start: np.ndarray
    group_end: np.ndarray
    has_ties: bool

    @classmethod
    def build(cls, scores: np.ndarray, units: np.ndarray) -> "_SortedArm":
        order = np.lexsort((units, scores[units]))
        units = units[order]
        arm_scores = scores[units]
        size = units.shape[0]
        new_group = np.ones(size, dtype=bool)
        new_group[1:] = arm_scores[1:] != arm_scores[:-1]
        starts = np.flatnonzero(new_group)
        lengths = np.diff(np.append(starts, size))
        group_start = np.repeat(starts, lengths)
        group_end = np.repeat(starts + lengths, lengths)
        return cls(
            units=_frozen(units),
            scores=_frozen(arm_scores),
            group_start=_frozen(group_start),
            group_end=_frozen(group_end),
            has_ties=bool(starts.shape[0] < size),
        )

    def __len__(self):
        return int(self.units.shape[0])


@dataclass(frozen=True)
class ScoreIndex:
    scores: np.ndarray
    arm: np.ndarray
    arms: tuple[_SortedArm, _SortedArm]
    rank: np.ndarray

    @property
    def sorted0(self) -> np.ndarray:
        return self.arms[0].units

    @property
    def sorted1(self) -> np.ndarray:
        return self.arms[1].units

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])


def build_index(scores, w) -> ScoreIndex:
    scores = np.array(scores, dtype=float)
    arm = np.array(w, dtype=np.int8)
    if scores.ndim != 1 or scores.shape != arm.shape:
        raise ShapeError(f"scores and arm indicators must be equal-length sequences")
    if not np.all(np.isfinite(scores)):
        raise ShapeError("scores must be finite")

    arms = []
    rank = np.empty(scores.shape[0], dtype=np.int64)
    for a in (0, 1):
        units = np.flatnonzero(arm == a)
        if units.shape[0] == 0:
            raise DegenerateArmError(f"arm {a} has no units")
        sorted_arm = _SortedArm.build(scores, units)
        rank[sorted_arm.units] = np.arange(len(sorted_arm))
        arms.append(sorted_arm)

    return ScoreIndex(scores=_frozen(scores), arm=_frozen(arm), arms=tuple(arms), rank=_frozen(rank))


def _nearest_block(target: _SortedArm, queries: np.ndarray, m: int) -> np.ndarray:
    size = len(target)
    pos = np.searchsorted(target.scores, queries, side="left")
    cols = pos[:, None] + np.arange(-m, m)[None, :]
    valid = (cols >= 0) & (cols < size)
    safe = np.clip(cols, 0, size - 1)
    dist = np.where(valid, np.abs(target.scores[safe] - queries[:, None]), np.inf)
    units = np.where(valid, target.units[safe], np.iinfo(np.int64).max)
    order = np.lexsort((units, dist), axis=-1)[:, :m]
    return np.take_along_axis(units, order, axis=1)


def _nearest_walk(target: _SortedArm, query: float, m: int) -> list[int]:
    size = len(target)
    right = int(np.searchsorted(target.scores, query, side="left"))
    left = right - 1
    chosen = []
    while len(chosen) < m:
        d_left = query - target.scores[left] if left >= 0 else np.inf
        d_right = target.scores[right] - query if right < size else np.inf
        nearest = min(d_left, d_right)
        pool = []
        if d_left == nearest:
            start = int(target.group_start[left])
            pool.extend(target.units[start:left + 1].tolist())
            left = start - 1
        if d_right == nearest:
            end = int(target.group_end[right])
            pool.extend(target.units[right:end].tolist())
            right = end
        pool.sort()
        chosen.extend(pool[:m - len(chosen)])
    return chosen


def _nearest(idx: ScoreIndex, target_arm: int, units: np.ndarray, m: int, self_first: bool = False) -> np.ndarray:
    target = idx.arms[target_arm]
    if m < 1 or m > len(target):
        raise BoundError(f"cannot take {m} matches from arm {target_arm} of size {len(target)}")
    queries = idx.scores[units]
    if not target.has_ties:
        # Scores in the arm are distinct, so a unit is strictly nearest to itself.
        return _nearest_block(target, queries, m)
    out = np.empty((queries.shape[0], m), dtype=np.int64)
    for row, (unit, query) in enumerate(zip(units.tolist(), queries.tolist())):
        if self_first:
            others = [u for u in _nearest_walk(target, query, m) if u != unit]
            out[row] = [unit] + others[:m - 1]
        else:
            out[row] = _nearest_walk(target, query, m)
    return out


def _check_unit(idx: ScoreIndex, i: int):
    if not 0 <= i < idx.n:
        raise BoundError(f"unit {i} is outside 0..{idx.n - 1}")


def match_set_opposite(idx: ScoreIndex, i: int, m: int) -> np.ndarray:
    """
    The m units of the opposite arm nearest to unit i, nearest first.
    """
    _check_unit(idx, i)
    return _nearest(idx, 1 - int(idx.arm[i]), np.array([i]), m)[0]


def match_set_same(idx: ScoreIndex, i: int, m: int) -> np.ndarray:
    """
    The m units of unit i's own arm nearest to it, nearest first. Unit i
    itself always comes first, ahead of any other unit sharing its score.
    """
    _check_unit(idx, i)
    return _nearest(idx, int(idx.arm[i]), np.array([i]), m, self_first=True)[0]


def opposite_matrix(idx: ScoreIndex, m: int) -> np.ndarray:
    """
    Row i holds match_set_opposite(idx, i, m) for every unit.
    """
    out = np.empty((idx.n, m), dtype=np.int64)
    for a in (0, 1):
        queries = idx.arms[a].units
        out[queries] = _nearest(idx, 1 - a, queries, m)
    return out


def same_matrix(idx: ScoreIndex, m: int) -> np.ndarray:
    """
    Row i holds match_set_same(idx, i, m) for every unit.
    """
    out = np.empty((idx.n, m), dtype=np.int64)
    for a in (0, 1):
        queries = idx.arms[a].units
        out[queries] = _nearest(idx, a, queries, m, self_first=True)
    return out


def match_counts(idx: ScoreIndex, m: int, matches: np.ndarray = None) -> np.ndarray:
    """
    K(i): how many opposite-arm units include i in their m matches.
    """
    if matches is None:
        matches = opposite_matrix(idx, m)
    return np.bincount(matches.ravel(), minlength=idx.n)
