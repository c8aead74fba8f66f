"""Digit dataset: the 8x8 sklearn digits, scaled to [0, 1], with a fixed split."""

from __future__ import annotations

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split

TEST_SIZE = 360
SPLIT_SEED = 0


def load_split():
    """Return (x_train, y_train, x_test, y_test); float64 features in [0, 1].

    The split is stratified and keyed to SPLIT_SEED, so every caller sees the
    same arrays.  load_digits ships with scikit-learn; nothing is downloaded.
    """
    digits = load_digits()
    x = digits.data.astype(np.float64) / 16.0
    y = digits.target.astype(np.int64)
    x_train, x_test, y_train, y_test = train_test_split(
        x, y, test_size=TEST_SIZE, random_state=SPLIT_SEED, stratify=y)
    return x_train, y_train, x_test, y_test
