"""Gaussian branching random walk on b-ary trees.

Leaves at depth n carry the sum of the n standard-normal increments on
their root path (root increment included, leaf increment not), so each
leaf has variance n and two distinct leaves with common-ancestor depth
ℓ have covariance ℓ+1.  The centering is
m̃(b,n) = √(2 log b)·n − 3/(2√(2 log b))·log n.

A dyadic lattice box embeds into the 4-ary tree by interleaving the
binary digits of the two coordinates, most significant first.
"""

from __future__ import annotations

import math

import numpy as np

MAX_LEAVES = 2**28


class BrwSample:
    """One realization of the BRW: leaf values plus optional level increments."""

    def __init__(self, b: int, n: int, leaves: np.ndarray, levels=None):
        self.b = b
        self.n = n
        self.leaves = leaves
        self.levels = levels  # list of per-depth increment arrays, or None

    def max(self) -> float:
        return float(self.leaves.max())


def sample_brw(b: int, n: int, rng: np.random.Generator,
               store_levels: bool = False) -> BrwSample:
    """Exact BRW sampler, level by level without materializing the tree."""
    if b < 2 or n < 1:
        raise ValueError("need branching factor >= 2 and depth >= 1")
    if b**n > MAX_LEAVES:
        raise ValueError(f"b^n = {b**n} exceeds the {MAX_LEAVES} leaf cap")
    vals = np.zeros(1)
    levels = [] if store_levels else None
    for depth in range(n):
        z = rng.standard_normal(b**depth)
        if store_levels:
            levels.append(z)
        vals = np.repeat(vals + z, b)
    return BrwSample(b, n, vals, levels)


def leaf_max_batch(b: int, n: int, rng: np.random.Generator, reps: int) -> np.ndarray:
    """Maxima of ``reps`` independent BRWs (memory-lean inner loop)."""
    out = np.empty(reps)
    for k in range(reps):
        vals = np.zeros(1)
        for depth in range(n):
            vals = np.repeat(vals + rng.standard_normal(b**depth), b)
        out[k] = vals.max()
    return out


def ultrametric_distance(b: int, n: int, i: int, j: int) -> int:
    """Tree distance d_n(x,y) = n − depth of the deepest common ancestor."""
    if not (0 <= i < b**n and 0 <= j < b**n):
        raise ValueError("leaf index out of range")
    if i == j:
        return 0
    di = _digits(i, b, n)
    dj = _digits(j, b, n)
    common = 0
    while common < n and di[common] == dj[common]:
        common += 1
    return n - common


def leaf_covariance(b: int, n: int, i: int, j: int) -> float:
    """Cov(φ_x, φ_y) = n − d_n(x,y) + 1 for distinct leaves, n on the diagonal."""
    d = ultrametric_distance(b, n, i, j)
    return float(n) if d == 0 else float(n - d + 1)


def _digits(k: int, b: int, n: int):
    out = []
    for _ in range(n):
        out.append(k % b)
        k //= b
    return out[::-1]  # most significant first


def m_tilde(b: int, n: int) -> float:
    """BRW maximum centering √(2 log b)·n − 3/(2√(2 log b))·log n."""
    if n < 1:
        raise ValueError("depth must be >= 1")
    c = math.sqrt(2.0 * math.log(b))
    return c * n - 1.5 / c * math.log(n)


# ---------------------------------------------------------------------------
# lattice embedding


def embed_digits(x, n: int) -> tuple:
    """Instruction sequence of the 4-ary embedding of x ∈ (0, 2ⁿ)² ∩ Z².

    Digit i (i = 1..n) is 2σ_{n−i} + σ̃_{n−i} + 1 ∈ {1..4}, where σ, σ̃
    are the binary digits of the two coordinates (σ_{n−1} most
    significant).
    """
    x1, x2 = (int(c) for c in np.asarray(x).reshape(2))
    N = 2**n
    if not (0 < x1 < N and 0 < x2 < N):
        raise ValueError(f"({x1},{x2}) is not in the open box of side {N}")
    out = []
    for i in range(1, n + 1):
        s1 = (x1 >> (n - i)) & 1
        s2 = (x2 >> (n - i)) & 1
        out.append(2 * s1 + s2 + 1)
    return tuple(out)


def embed(x, n: int) -> int:
    """Leaf index (0-based, depth-first order) of a box vertex in L_n of T⁴."""
    idx = 0
    for d in embed_digits(x, n):
        idx = 4 * idx + (d - 1)
    return idx


# ---------------------------------------------------------------------------
# bridge ballot probability


def ballot_bridge(a: float, b: float, r: float) -> float:
    """P(Brownian bridge from a to b over time r stays positive) = 1 − e^{−2ab/r}."""
    if a <= 0 or b <= 0 or r <= 0:
        raise ValueError("ballot probability needs positive endpoints and span")
    return 1.0 - math.exp(-2.0 * a * b / r)


# ---------------------------------------------------------------------------
# centered-max statistics


def brw_max_stats(b: int, n: int, reps: int, rng: np.random.Generator,
                  tail_grid=None) -> dict:
    """Centered-maximum summary: E max − m̃ with CI and tail frequencies."""
    if reps < 2:
        raise ValueError("need at least two replicas")
    maxima = leaf_max_batch(b, n, rng, reps)
    center = m_tilde(b, n)
    dev = maxima - center
    if tail_grid is None:
        tail_grid = (1.0, 2.0, 3.0, 4.0)
    upper = {t: float((dev > t).mean()) for t in tail_grid}
    lower = {t: float((dev < -t).mean()) for t in tail_grid}
    return {
        "b": b,
        "n": n,
        "reps": reps,
        "mean_max": float(maxima.mean()),
        "m_tilde": center,
        "centered_mean": float(dev.mean()),
        "se": float(maxima.std(ddof=1) / math.sqrt(reps)),
        "upper_tail": upper,
        "lower_tail": lower,
    }
