"""Deterministic reductions.

``tree_sum`` adds along an axis with a fixed pairwise tree whose shape
depends only on the length of that axis, so results do not depend on BLAS
threading or on how work was split.
"""

import numpy as np


def tree_sum(a, axis=0):
    a = np.moveaxis(np.asarray(a), axis, 0)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:], dtype=a.dtype)
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:], dtype=a.dtype)])
        a = a[0::2] + a[1::2]
    return a[0]
