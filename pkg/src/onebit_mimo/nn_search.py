"""Second-stage nearest-neighbor search.

Coordinates of the first-stage estimate that lie within ``gamma`` of a
decision boundary keep both adjacent levels as candidates; the others are
fixed to their nearest level.  Over the resulting product set the ``M``
symbol vectors closest to the estimate are enumerated incrementally: the
``m``-th closest vector is always a Hamming neighbor of the ``m-1`` found
before it, so each step only inspects the heads of ``m-1`` sorted neighbor
lists.  The final decision minimizes a supplied objective over those ``M``
vectors.

Symbol vectors are handled internally as tuples of per-coordinate choice
indices (0 or 1 into each candidate set).  Vectors are ordered by squared
distance to the estimate (compared exactly, not after rounding); equal
distances fall back to lexicographic order of the coordinate values, larger
values first, which matches the slicer's tie rule.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import Constellation

MAX_PRODUCT = 2**20


def default_gamma(const: Constellation) -> float:
    """Half the distance from a boundary to its adjacent levels."""
    return const.min_spacing / 4.0


@dataclass(frozen=True, eq=False)
class CandidateSets:
    x_tilde: np.ndarray
    boundaries: np.ndarray
    sets: tuple
    gamma: float

    @property
    def A_count(self) -> int:
        return sum(len(s) == 2 for s in self.sets)

    @property
    def size(self) -> int:
        return 2**self.A_count

    def vector(self, choice) -> np.ndarray:
        return np.array([s[c] for s, c in zip(self.sets, choice)])

    def costs(self) -> list:
        return [[(v - t) ** 2 for v in s] for s, t in zip(self.sets, self.x_tilde)]


def candidate_sets(x_tilde, gamma: float, const: Constellation) -> CandidateSets:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x_tilde = np.asarray(x_tilde, dtype=float).ravel()
    B, M = const.boundaries, const.real_alphabet
    nearest_b = np.argmin(np.abs(x_tilde[:, None] - B[None, :]), axis=1)
    b = B[nearest_b]
    sets = []
    for xi, bi, j in zip(x_tilde, b, nearest_b):
        if abs(xi - bi) > gamma:
            sets.append((float(const.slice_real(xi)),))
        else:
            sets.append((float(M[j]), float(M[j + 1])))
    return CandidateSets(x_tilde, b, tuple(sets), float(gamma))


def hamming(x, x_other) -> int:
    x, x_other = np.asarray(x), np.asarray(x_other)
    if x.shape != x_other.shape:
        raise ValueError("vectors must have equal length")
    return int(np.count_nonzero(x != x_other))


class _Key:
    """Sort key: distance, then lexicographic order with larger values first.

    Distances are sums of per-coordinate squared errors.  Two sums that
    round to the same float are compared exactly (``fsum`` of the
    difference has the sign of the exact difference), so the lexicographic
    rule only decides genuine ties.
    """

    __slots__ = ("dist", "costs", "lex")

    def __init__(self, dist, costs, lex):
        self.dist = dist
        self.costs = costs
        self.lex = lex

    def _exact_diff(self, other) -> float:
        return math.fsum(self.costs + [-c for c in other.costs])

    def __lt__(self, other):
        if self.dist != other.dist:
            return self.dist < other.dist
        diff = self._exact_diff(other)
        if diff != 0.0:
            return diff < 0.0
        return self.lex < other.lex

    def __eq__(self, other):
        return self.dist == other.dist and self.lex == other.lex and self._exact_diff(other) == 0.0

    __hash__ = None


class _Order:
    """Distance-then-lexicographic order over choice tuples."""

    def __init__(self, cand: CandidateSets):
        self.cost = cand.costs()
        self.sets = cand.sets

    def dist(self, choice) -> float:
        return math.fsum(c[i] for c, i in zip(self.cost, choice))

    def key(self, choice) -> _Key:
        costs = [c[i] for c, i in zip(self.cost, choice)]
        return _Key(math.fsum(costs), costs, tuple(-s[i] for s, i in zip(self.sets, choice)))


def _first_choice(cand: CandidateSets, order: _Order) -> tuple:
    # coordinate-wise nearest; ties resolved toward the larger level
    choice = []
    for c in order.cost:
        choice.append(0 if len(c) == 1 or c[0] < c[1] else 1)
    return tuple(choice)


def _flip_positions(cand: CandidateSets) -> list:
    return [i for i, s in enumerate(cand.sets) if len(s) == 2]


def _neighbor_choices(choice: tuple, flips: list) -> list:
    out = []
    for i in flips:
        nb = list(choice)
        nb[i] = 1 - nb[i]
        out.append(tuple(nb))
    return out


def neighbors(x, cand: CandidateSets) -> list:
    """All members of the candidate product at Hamming distance one from ``x``."""
    x = np.asarray(x, dtype=float)
    out = []
    for i, s in enumerate(cand.sets):
        if x[i] not in s:
            raise ValueError(f"coordinate {i} value {x[i]} not in candidate set {s}")
        if len(s) == 2:
            nb = x.copy()
            nb[i] = s[1] if x[i] == s[0] else s[0]
            out.append(nb)
    return out


@dataclass(frozen=True, eq=False)
class NearestSet:
    vectors: np.ndarray
    distances: np.ndarray
    lists: tuple = ()


def _as_nearest_set(cand: CandidateSets, order: _Order, choices, lists=()) -> NearestSet:
    vecs = np.array([cand.vector(c) for c in choices]).reshape(len(choices), len(cand.sets))
    return NearestSet(vecs, np.array([order.dist(c) for c in choices]), lists)


def brute_force_topM(x_tilde, cand: CandidateSets, M: int) -> NearestSet:
    """Exhaustively rank the whole candidate product (verification oracle).

    ``x_tilde`` overrides the estimate stored in ``cand`` when given.
    """
    if x_tilde is not None:
        cand = dataclasses.replace(cand, x_tilde=np.asarray(x_tilde, dtype=float).ravel())
    if cand.size > MAX_PRODUCT:
        raise ValueError(f"candidate product of size {cand.size} exceeds {MAX_PRODUCT}")
    order = _Order(cand)
    ranges = [range(len(s)) for s in cand.sets]
    ranked = sorted(itertools.product(*ranges), key=order.key)
    return _as_nearest_set(cand, order, ranked[: max(0, int(M))])


class _SortedList:
    __slots__ = ("items", "head")

    def __init__(self, items):
        self.items = items
        self.head = 0

    def peek(self):
        return self.items[self.head] if self.head < len(self.items) else None

    def pop(self):
        self.head += 1


def nearest_set(cand: CandidateSets, M: int) -> NearestSet:
    """The ``M`` nearest product members, built by incremental neighbor expansion."""
    if M < 1:
        raise ValueError("M must be >= 1")
    order = _Order(cand)
    flips = _flip_positions(cand)
    x1 = _first_choice(cand, order)
    found = [x1]
    seen = {x1}
    lists = [_SortedList(sorted(_neighbor_choices(x1, flips), key=order.key))]
    for m in range(2, M + 1):
        heads = [(order.key(h), h) for h in (c.peek() for c in lists) if h is not None]
        if not heads:
            break
        xm = min(heads)[1]
        found.append(xm)
        seen.add(xm)
        if m == M:
            break
        for c in lists:
            if c.peek() == xm:
                c.pop()
        new = _SortedList(sorted(_neighbor_choices(xm, flips), key=order.key))
        # members of the found set sort before xm, so they sit at the front
        while new.peek() in seen:
            new.pop()
        lists.append(new)
    return _as_nearest_set(cand, order, found, tuple(lists))


def _score(objective, vectors: np.ndarray) -> np.ndarray:
    return np.asarray(objective(vectors), dtype=float).reshape(len(vectors))


def nn_search(x_tilde, gamma: float, M: int, objective, const: Constellation) -> np.ndarray:
    """Refine ``x_tilde`` to the best of its ``M`` nearest candidate vectors.

    ``objective`` takes a ``(C, 2K)`` stack of real symbol vectors and returns
    ``C`` scores to minimize.  When the whole candidate product has at most
    ``M`` members it is searched exhaustively.
    """
    cand = candidate_sets(x_tilde, gamma, const)
    if M < 1:
        raise ValueError("M must be >= 1")
    if cand.size <= M:
        ranges = [range(len(s)) for s in cand.sets]
        vecs = np.array([cand.vector(c) for c in itertools.product(*ranges)])
    else:
        vecs = nearest_set(cand, M).vectors
    if len(vecs) == 1:
        return vecs[0]
    return vecs[int(np.argmin(_score(objective, vecs)))]
