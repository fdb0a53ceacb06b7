"""Deterministic generator splitting for Monte Carlo reproducibility.

Every stochastic operation in the library takes an explicit
``numpy.random.Generator``. The harness derives one generator per
(run, filter) pair from a single experiment seed; the split is stable
across processes and numpy versions because it uses documented
``SeedSequence`` spawn keys.
"""

import numpy as np


def split_rng(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``.

    The harness convention is ``split_rng(seed, run_index, 0)`` for the
    truth/measurement stream of a run and ``split_rng(seed, run_index, j)``
    with ``j >= 1`` for the j-th configured filter.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
