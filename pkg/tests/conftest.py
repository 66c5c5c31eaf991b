"""Shared sample pools for the statistical tests.

The 10^3-replica field pools and the branching-walk maximum statistics
dominate the suite runtime and are consumed by more than one module, so
they are built once per session.  sample_batch draws its normals per
call, which makes the outer chunking part of the pinned random stream:
the loop below must stay at chunks of CHUNK replicas.
"""

import numpy as np
import pytest

from dgff.brw import brw_max_stats
from dgff.extremes import a_N
from dgff.lattice import make_box
from dgff.sampler import sample_batch, seed_stream

POOL_SEED = 99
POOL_REPS = 1000
POOL_NS = (32, 64, 128, 256, 512)
POOL_LAMS = (0.2, 0.3, 0.4)
CHUNK = 100

BRW_SEED = 17
BRW_REPS = 1000
BRW_GRID = tuple((2, n) for n in range(8, 19)) + tuple((4, n) for n in range(5, 11))


@pytest.fixture(scope="session")
def pools():
    """{N: (maxima, {lam: counts})} from seed_stream(POOL_SEED, N)."""
    out = {}
    for N in POOL_NS:
        dom = make_box(N)
        rng = seed_stream(POOL_SEED, N)
        maxima = np.empty(POOL_REPS)
        counts = {lam: np.empty(POOL_REPS) for lam in POOL_LAMS}
        done = 0
        while done < POOL_REPS:
            k = min(CHUNK, POOL_REPS - done)
            batch = sample_batch(dom, rng, k)
            maxima[done:done + k] = batch.max(axis=1)
            for lam in POOL_LAMS:
                counts[lam][done:done + k] = (batch >= a_N(N, lam)).sum(axis=1)
            done += k
        out[N] = (maxima, counts)
    return out


@pytest.fixture(scope="session")
def brw_stats():
    """{(b, n): brw_max_stats(...)} over the centering grid."""
    return {(b, n): brw_max_stats(b, n, BRW_REPS, seed_stream(BRW_SEED, b, n))
            for b, n in BRW_GRID}
