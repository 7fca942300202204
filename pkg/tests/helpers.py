"""Shared instance generators for the test-suite."""

import numpy as np

from onebit_mimo.nn_search import hamming


def nn_instance(rng, const, K, gamma, tied=False):
    """Random first-stage estimate of length 2K.

    Plain draws are uniform over the alphabet's span; ``tied`` draws sit on a
    coarse grid (boundaries, half-gamma offsets) so equal distances and
    boundary hits occur often.
    """
    top = const.real_alphabet[-1] + const.min_spacing / 2
    if not tied:
        return rng.uniform(-top, top, size=2 * K)
    b = const.boundaries[rng.integers(len(const.boundaries), size=2 * K)]
    return b + gamma * rng.integers(-2, 3, size=2 * K) / 2


def is_neighbor_of_set(x, found) -> bool:
    return min(hamming(x, f) for f in found) == 1
