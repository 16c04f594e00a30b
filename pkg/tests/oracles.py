"""Independent reference computations used by the tests."""

import itertools

import numpy as np


def enumerate_wp(L, T, t):
    """Exact wp at every (x, s) of layer ``t`` by listing all move sequences.

    Returns an array indexed ``[x - 1, s + T]``.  Plays follow the game
    rules directly; a tie after play ``T`` counts one half.
    """
    r = T + 1 - t
    seqs = np.array(list(itertools.product((-1, 1), repeat=r)), dtype=np.int64).reshape(2**r, r)
    xs, ss = np.meshgrid(np.arange(1, L), np.arange(-T, T + 1), indexing="ij")
    x = np.broadcast_to(xs.ravel(), (2**r, xs.size)).copy()
    s = np.broadcast_to(ss.ravel(), (2**r, xs.size)).copy()
    for j in range(r):
        pos = x + seqs[:, j:j + 1]
        s = s + (pos == 0) - (pos == L)
        x = np.where((pos == 0) | (pos == L), L // 2, pos)
    win = np.where(s > 0, 1.0, np.where(s < 0, 0.0, 0.5))
    return win.mean(axis=0).reshape(xs.shape)
