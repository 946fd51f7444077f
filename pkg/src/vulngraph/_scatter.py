"""Row scatter-add that is much faster than ``np.add.at`` for 2-D updates."""

from __future__ import annotations

import numpy as np


def scatter_add(target: np.ndarray, index: np.ndarray, values: np.ndarray) -> None:
    """``target[index[k]] += values[k]`` for every k, accumulating duplicates."""
    if index.size == 0:
        return
    order = np.argsort(index, kind="stable")
    idx = index[order]
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    target[idx[starts]] += np.add.reduceat(values[order], starts, axis=0)
