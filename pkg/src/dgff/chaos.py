"""Gaussian multiplicative chaos measures on the unit square.

The continuum field is represented hierarchically on dyadic cells: at
each generation every cell splits in four, and the four child-center
values of the binding field (the field given the finer subdivision) are
drawn from their exact 4×4 lattice covariance at a fixed resolution.
Because each multiplier e^{βφ − β²Varφ/2} uses the exact variance, the
cell-mass cascade is an exact martingale, not an approximate one.

β is parametrized through λ = β/α with α = 2/√g; λ < 1/√2 keeps second
moments bounded, λ = 1 (β = α) is critical, where the Seneta-Heyde
normalization √(n·g·log 2) applies.
"""

from __future__ import annotations

import math

import numpy as np

from .green import (G_CONST, POTENTIAL_KERNEL_C0, GreenOperator,
                    conformal_radius, green_matrix)
from .lattice import NEIGHBOR_STEPS, make_box
from .sampler import sqrt_factor

ALPHA = 2.0 / math.sqrt(G_CONST)
"""Critical GMC parameter α = 2/√g."""


def lambda_to_beta(lam: float) -> float:
    return lam * ALPHA


def chaos_prefactor(lam: float) -> float:
    """ĉ(λ) = e^{2c₀λ²/g} / (λ√(8π)), the level-set intensity constant."""
    if lam <= 0:
        raise ValueError("need lambda > 0")
    return math.exp(2.0 * POTENTIAL_KERNEL_C0 * lam**2 / G_CONST) / (
        lam * math.sqrt(8.0 * math.pi))


# ---------------------------------------------------------------------------
# exact level covariances at a fixed lattice resolution

_center_green_cache: dict[int, float] = {}
_level_cache: dict[int, dict] = {}
_radius_cache: dict[int, float] = {}


def _box_center_green(side: int) -> float:
    """G(c,c) of the side-``side`` box at its center (side even)."""
    if side not in _center_green_cache:
        op = green_matrix(make_box(side))
        c = (side // 2, side // 2)
        i = op.domain.index(c)
        if len(op.domain) <= op.dense_limit:
            val = op.column(c)[i]
        else:
            e = np.zeros(len(op.domain))
            e[i] = 4.0
            val = op.solve_many(e)[i]
        _center_green_cache[side] = float(val)
    return _center_green_cache[side]


def level_covariance(parent_side: int) -> dict:
    """4×4 covariance of one refinement increment at the child centers.

    Correlation structure: the exact subdivision binding field — entry
    (i,j) proportional to G^{parent}(c_i,c_j) − δ_ij·G^{child}(c,c) at
    the four child centers c_i of a side-s parent box.  Scale: the
    common variance is fixed to the exact one-octave Green increment
    G^{B(s)}(c,c) − G^{B(s/2)}(c,c) at matched (central) position, the
    g·log 2 + O(s⁻²) quantity that makes the per-level variance sum
    telescope to the full center Green difference; evaluating the raw
    corner covariance at off-center child positions would halve it and
    shift the cascade's critical point away from α.
    """
    s = parent_side
    if s % 4 != 0 or s < 4:
        raise ValueError("parent side must be a multiple of 4")
    if s not in _level_cache:
        op = green_matrix(make_box(s))
        h = s // 2
        centers = [(h // 2 + di * h, h // 2 + dj * h)
                   for di in (0, 1) for dj in (0, 1)]
        if len(op.domain) <= op.dense_limit:
            cols = np.column_stack([op.column(c) for c in centers])
        else:
            rhs = np.zeros((len(op.domain), 4))
            for j, c in enumerate(centers):
                rhs[op.domain.index(c), j] = 4.0
            cols = op.solve_many(rhs)
        idx = [op.domain.index(c) for c in centers]
        corner = cols[idx]
        corner = 0.5 * (corner + corner.T) - _box_center_green(h) * np.eye(4)
        var = _box_center_green(s) - _box_center_green(h)
        sigma = corner * (var / corner[0, 0])
        _level_cache[s] = {
            "cov": sigma,
            "sqrt": sqrt_factor(sigma),
            "var": float(var),
        }
    return _level_cache[s]


def cell_radius(side: int) -> float:
    """Discrete conformal radius of the side-``side`` box at its center,
    in units of the box side."""
    if side not in _radius_cache:
        if side == 2:
            _radius_cache[side] = 0.5  # single vertex, boundary at distance 1/2
        else:
            op = GreenOperator(make_box(side))
            _radius_cache[side] = conformal_radius(op, (side // 2, side // 2))
    return _radius_cache[side]


def default_resolution(levels: int) -> int:
    """Lattice units per unit length: 2⁷, or just enough for deep cascades."""
    return 2 ** max(7, levels + 1)


# ---------------------------------------------------------------------------
# measures


class ChaosMeasure:
    """Mass per dyadic cell of [0,1]² at one generation.

    ``masses[i, j]`` covers [i·2^{−n}, (i+1)·2^{−n}] × [j·2^{−n}, …].
    """

    def __init__(self, masses: np.ndarray, beta: float, resolution: int,
                 mode: str = "martingale"):
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != 2 or masses.shape[0] != masses.shape[1]:
            raise ValueError("cell masses must form a square grid")
        side = masses.shape[0]
        if side & (side - 1):
            raise ValueError("cell grid side must be a power of two")
        if np.any(masses < 0):
            raise ValueError("cell masses must be nonnegative")
        self.masses = masses
        self.generation = side.bit_length() - 1
        self.beta = float(beta)
        self.resolution = int(resolution)
        self.mode = mode
        self.warning = None

    @property
    def cell_area(self) -> float:
        return 4.0 ** (-self.generation)

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def region_mass(self, i0: int, i1: int, j0: int, j1: int) -> float:
        """Mass of the cell-index rectangle [i0,i1) × [j0,j1)."""
        return float(self.masses[i0:i1, j0:j1].sum())

    def coarsen_to(self, gen: int) -> np.ndarray:
        """Cell masses re-aggregated at a coarser generation."""
        if gen > self.generation:
            raise ValueError("can only coarsen to an earlier generation")
        k = 2 ** (self.generation - gen)
        m = self.masses
        return m.reshape(m.shape[0] // k, k, m.shape[1] // k, k).sum(axis=(1, 3))

    def cell_centers(self) -> np.ndarray:
        side = self.masses.shape[0]
        g = (np.arange(side) + 0.5) / side
        return np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)

    def to_csv(self, path):
        side = self.masses.shape[0]
        cc = self.cell_centers().reshape(-1, 2)
        rows = np.column_stack([cc, self.masses.reshape(-1)])
        np.savetxt(path, rows, delimiter=",", fmt="%.17g",
                   header="x,y,mass", comments="")


def lebesgue_measure(generation: int, beta: float = 0.0,
                     resolution: int | None = None) -> ChaosMeasure:
    side = 2**generation
    if resolution is None:
        resolution = default_resolution(generation)
    return ChaosMeasure(np.full((side, side), 4.0 ** (-generation)),
                        beta=beta, resolution=resolution)


class LevelIncrement:
    """Binding-field innovation for one refinement step.

    ``phi`` holds the child-center values on the refined grid; ``var``
    is their common exact variance.
    """

    def __init__(self, level: int, phi: np.ndarray, var: float):
        self.level = level
        self.phi = phi
        self.var = float(var)


def sample_level_increment(generation: int, resolution: int,
                           rng: np.random.Generator) -> LevelIncrement:
    """Draw the refinement innovation from gen ``generation`` to +1."""
    s = resolution // 2**generation
    lev = level_covariance(s)
    m = 2**generation
    z = rng.standard_normal((m * m, 4))
    phi = z @ lev["sqrt"].T
    phi = phi.reshape(m, m, 2, 2).transpose(0, 2, 1, 3).reshape(2 * m, 2 * m)
    return LevelIncrement(level=generation, phi=phi, var=lev["var"])


def gmc_step(measure: ChaosMeasure, increment: LevelIncrement,
             beta: float) -> ChaosMeasure:
    """One refinement of the martingale measure.

    Each child cell receives a quarter of its parent's mass times
    e^{βφ − β²·Var φ/2} at its own center; the conditional expectation
    over the innovation returns the parent masses exactly.
    """
    if increment.level != measure.generation:
        raise ValueError(
            f"increment is for generation {increment.level}, "
            f"measure is at {measure.generation}")
    if increment.phi.shape[0] != 2 * measure.masses.shape[0]:
        raise ValueError("increment grid must refine the cell grid")
    parent = np.repeat(np.repeat(measure.masses, 2, axis=0), 2, axis=1) / 4.0
    weight = np.exp(beta * increment.phi - 0.5 * beta**2 * increment.var)
    out = ChaosMeasure(parent * weight, beta=beta,
                       resolution=measure.resolution, mode=measure.mode)
    return out


def martingale_measure(levels: int, beta: float, rng: np.random.Generator,
                       resolution: int | None = None,
                       extra_diag_var: float = 0.0) -> ChaosMeasure:
    """Run the cascade from Lebesgue for ``levels`` refinements.

    ``extra_diag_var`` adds an independent N(0, δ) per child on top of
    each binding increment (with the multiplier compensated by the
    enlarged variance) — used for covariance-comparison experiments.
    """
    if resolution is None:
        resolution = default_resolution(levels)
    mu = lebesgue_measure(0, beta=beta, resolution=resolution)
    for m in range(levels):
        inc = sample_level_increment(m, resolution, rng)
        if extra_diag_var > 0.0:
            side = inc.phi.shape[0]
            inc = LevelIncrement(
                inc.level,
                inc.phi + math.sqrt(extra_diag_var) * rng.standard_normal((side, side)),
                inc.var + extra_diag_var)
        mu = gmc_step(mu, inc, beta)
    return mu


# ---------------------------------------------------------------------------
# the Y_n surrogate with conformal-radius density


def accumulated_variance(levels: int, resolution: int) -> float:
    """Σ over refinements of the exact per-level child-center variance."""
    return sum(level_covariance(resolution // 2**m)["var"] for m in range(levels))


def hierarchical_chaos(levels: int, lam: float, rng: np.random.Generator,
                       resolution: int | None = None,
                       radius: str = "cell") -> ChaosMeasure:
    """Chaos measure with conformal-radius density (subcritical λ).

    radius "cell": density ĉ·e^{αλΦ}·(2^{−n} r_cell)^{2λ²} with r_cell
    the radius of one congruent cell at its center — the hierarchical
    surrogate of the intermediate level-set intensity.
    radius "global": the variance-compensated form
    ĉ·r_S(x)^{2λ²}·e^{αλΦ − (αλ)²·VarΦ/2}, whose expectation equals
    ĉ·Σ area·r_S(x_c)^{2λ²} exactly at any resolution.
    """
    if not 1 <= levels <= 8:
        raise ValueError("need 1 <= levels <= 8")
    if lam <= 0 or lam >= 1:
        raise ValueError("need 0 < lambda < 1")
    if resolution is None:
        resolution = default_resolution(levels)
    beta = lambda_to_beta(lam)
    m = 2**levels
    field = np.zeros((1, 1))
    for g in range(levels):
        inc = sample_level_increment(g, resolution, rng)
        field = np.repeat(np.repeat(field, 2, axis=0), 2, axis=1) + inc.phi
    area = 4.0 ** (-levels)
    pref = chaos_prefactor(lam)
    if radius == "cell":
        r_cont = cell_radius(resolution // m) / m
        masses = pref * area * r_cont ** (2 * lam**2) * np.exp(beta * field)
    elif radius == "global":
        var = accumulated_variance(levels, resolution)
        r = global_radii(resolution, levels)
        masses = (pref * area * r ** (2 * lam**2)
                  * np.exp(beta * field - 0.5 * beta**2 * var))
    else:
        raise ValueError(f"unknown radius mode {radius!r}")
    mu = ChaosMeasure(masses, beta=beta, resolution=resolution, mode="radius-" + radius)
    if lam >= 1.0 / math.sqrt(2.0):
        mu.warning = "lambda >= 1/sqrt(2): second-moment tests not applicable"
    return mu


def expected_mass(levels: int, lam: float, resolution: int | None = None,
                  radius: str = "cell") -> float:
    """Closed-form E[total mass] of ``hierarchical_chaos``."""
    if resolution is None:
        resolution = default_resolution(levels)
    m = 2**levels
    area = 4.0 ** (-levels)
    pref = chaos_prefactor(lam)
    if radius == "cell":
        r_cont = cell_radius(resolution // m) / m
        var = accumulated_variance(levels, resolution)
        beta = lambda_to_beta(lam)
        return float(pref * area * m * m * r_cont ** (2 * lam**2)
                     * math.exp(0.5 * beta**2 * var))
    if radius == "global":
        r = global_radii(resolution, levels)
        return float(pref * area * (r ** (2 * lam**2)).sum())
    raise ValueError(f"unknown radius mode {radius!r}")


_global_radii_cache: dict = {}


def global_radii(resolution: int, levels: int) -> np.ndarray:
    """Discrete conformal radii of the unit-square box at all cell centers."""
    key = (resolution, levels)
    if key not in _global_radii_cache:
        op = GreenOperator(make_box(resolution))
        dom = op.domain
        m = 2**levels
        s = resolution // m
        grid = np.arange(m) * s + s // 2
        centers = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        bnd = dom.boundary()
        out = np.empty(len(centers))
        for start in range(0, len(centers), 256):
            chunk = centers[start:start + 256]
            rhs = np.zeros((len(dom), len(chunk)))
            rhs[dom.index_of(chunk), np.arange(len(chunk))] = 1.0
            u = op.solve_many(rhs)
            w = np.zeros((len(bnd), len(chunk)))
            for step in NEIGHBOR_STEPS:
                ni = dom.index_of(bnd + step)
                mask = ni >= 0
                w[mask] += u[ni[mask]]
            for c in range(len(chunk)):
                d = np.hypot(bnd[:, 0] - chunk[c, 0], bnd[:, 1] - chunk[c, 1])
                out[start + c] = math.exp(
                    (w[:, c] @ np.log(d / resolution)) / w[:, c].sum())
        _global_radii_cache[key] = out.reshape(m, m)
    return _global_radii_cache[key]


def seneta_heyde(measure: ChaosMeasure) -> ChaosMeasure:
    """Critical √t normalization: masses scaled by √(n·g·log 2)."""
    factor = math.sqrt(measure.generation * G_CONST * math.log(2.0))
    out = ChaosMeasure(measure.masses * factor, beta=measure.beta,
                       resolution=measure.resolution, mode="seneta-heyde")
    return out
