"""Level sets, extremal point measures, and maximum statistics.

Centering conventions: m_N = 2√g·log N − (3/4)√g·log log(N∨e) for the
absolute maximum, and intermediate thresholds a_N = 2√g·λ·log N with
the normalizing sequence K_N = N²/√(log N)·e^{−a_N²/(2g·log N)}, which
for the λ-form collapses to N^{2(1−λ²)}/√(log N).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .green import G_CONST

SQRT_G = math.sqrt(G_CONST)


def m_N(N) -> float:
    """Centering of the maximum: 2√g·log N − (3/4)√g·loglog(N∨e)."""
    if N < 2:
        raise ValueError("need N >= 2")
    N = float(N)
    return 2.0 * SQRT_G * math.log(N) - 0.75 * SQRT_G * math.log(max(math.log(N), 1.0))


def a_N(N, lam: float) -> float:
    """Intermediate threshold 2√g·λ·log N."""
    return 2.0 * SQRT_G * lam * math.log(N)


def K_N(N, a) -> float:
    """Level-set normalization N²/√(log N)·e^{−a²/(2g·log N)}."""
    if N < 2:
        raise ValueError("need N >= 2")
    N = float(N)
    return N**2 / math.sqrt(math.log(N)) * math.exp(-a * a / (2.0 * G_CONST * math.log(N)))


def level_set(field, threshold: float) -> np.ndarray:
    """Vertices with h ≥ threshold, as an (m, 2) array."""
    return field.domain.vertices[field.values >= threshold]


def extremal_set(field, N, depth: float) -> np.ndarray:
    """Γ_N(t) = {x : h_x ≥ m_N − t}."""
    return level_set(field, m_N(N) - depth)


# ---------------------------------------------------------------------------
# point measures


@dataclass
class Atom:
    position: tuple  # x/N in the continuum region
    height: float
    weight: float
    cluster: dict | None = None


@dataclass
class PointMeasure:
    atoms: list = dc_field(default_factory=list)

    def __post_init__(self):
        for a in self.atoms:
            if not a.weight > 0:
                raise ValueError("atom weights must be positive")

    def __len__(self):
        return len(self.atoms)

    def total_mass(self) -> float:
        return float(sum(a.weight for a in self.atoms))

    def mass_above(self, b: float) -> float:
        """Mass of D × [b, ∞)."""
        return float(sum(a.weight for a in self.atoms if a.height >= b))

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for a in self.atoms:
                rec = {"x": a.position[0], "y": a.position[1],
                       "h": a.height, "w": a.weight}
                if a.cluster is not None:
                    rec["cluster"] = [[list(z), dh] for z, dh in sorted(a.cluster.items())]
                fh.write(json.dumps(rec) + "\n")


def load_jsonl(path) -> PointMeasure:
    atoms = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            cluster = None
            if "cluster" in rec:
                cluster = {tuple(z): dh for z, dh in rec["cluster"]}
            atoms.append(Atom(position=(rec["x"], rec["y"]), height=rec["h"],
                              weight=rec["w"], cluster=cluster))
    return PointMeasure(atoms)


def intermediate_measure(field, lam: float, min_height: float = 0.0) -> PointMeasure:
    """Normalized level-set measure: atoms (x/N, h_x − a_N, 1/K_N).

    Keeps the atoms with centered height ≥ ``min_height`` (the measure
    of D × [b, ∞) is then ``mass_above(b)`` for b ≥ that floor).
    """
    if not 0 < lam < 1:
        raise ValueError("intermediate level sets need 0 < lambda < 1")
    N = field.domain.scale
    a = a_N(N, lam)
    w = 1.0 / K_N(N, a)
    centered = field.values - a
    keep = np.nonzero(centered >= min_height)[0]
    atoms = [Atom(position=(field.domain.vertices[i, 0] / N,
                            field.domain.vertices[i, 1] / N),
                  height=float(centered[i]), weight=w) for i in keep]
    return PointMeasure(atoms)


# ---------------------------------------------------------------------------
# local maxima and the structured measure


def local_maxima(field, r: int) -> np.ndarray:
    """Vertices that maximize the field over their ℓ∞ ball of radius r.

    Exact ties are broken by vertex (row-major) index order, so exactly
    one of an equal-height pair within distance r survives.
    """
    if r < 1 or int(r) != r:
        raise ValueError("radius must be a positive integer")
    r = int(r)
    dom = field.domain
    grid = np.full(dom.to_mask().shape, -np.inf)
    vi = dom.vertices - dom._lo
    grid[vi[:, 0], vi[:, 1]] = field.values
    localmax = ndimage.maximum_filter(grid, size=2 * r + 1, mode="constant",
                                      cval=-np.inf)
    cand = np.nonzero(field.values >= localmax[vi[:, 0], vi[:, 1]])[0]
    out = []
    for i in cand:
        x = dom.vertices[i]
        lo = np.maximum(x - r, dom._lo)
        hi = np.minimum(x + r, dom._hi)
        ok = True
        for j in _window_indices(dom, lo, hi):
            if j == i:
                continue
            if field.values[j] > field.values[i] or (
                    field.values[j] == field.values[i] and j < i):
                ok = False
                break
        if ok:
            out.append(i)
    return dom.vertices[np.asarray(out, dtype=np.int64)]


def _window_indices(dom, lo, hi):
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    idx = dom.index_of(pts)
    return idx[idx >= 0]


def default_radius(N) -> int:
    """r_N = ⌈√N⌉: diverges while staying o(N)."""
    return int(math.ceil(math.sqrt(N)))


def structured_measure(field, r: int | None = None, window: int = 5) -> PointMeasure:
    """Extremal point measure supported on r-local maxima.

    Atoms carry position x/N, height h_x − m_N, unit weight, and the
    local cluster map z ↦ h_x − h_{x+z} for |z|∞ ≤ window (off-domain
    values count as 0, matching the field convention).
    """
    N = field.domain.scale
    if r is None:
        r = default_radius(N)
    center = m_N(N)
    peaks = local_maxima(field, r)
    atoms = []
    zs = [(dz1, dz2) for dz1 in range(-window, window + 1)
          for dz2 in range(-window, window + 1) if (dz1, dz2) != (0, 0)]
    for x in peaks:
        hx = field.value_at(x)
        cluster = {z: float(hx - field.value_at((x[0] + z[0], x[1] + z[1])))
                   for z in zs}
        atoms.append(Atom(position=(x[0] / N, x[1] / N), height=float(hx - center),
                          weight=1.0, cluster=cluster))
    return PointMeasure(atoms)


# ---------------------------------------------------------------------------
# replica statistics


@dataclass
class MaxSummary:
    count: int
    mean: float
    se: float
    median: float
    quantiles: dict
    argmax: list  # argmax positions, one per replica


def max_stats(fields) -> MaxSummary:
    """Maximum statistics over a replica collection of fields."""
    if len(fields) < 2:
        raise ValueError("need at least two replicas")
    if isinstance(fields, np.ndarray):
        vals = fields.max(axis=1)
        arg = [None] * len(vals)
    else:
        vals = np.asarray([f.max() for f in fields])
        arg = [f.argmax() for f in fields]
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    return MaxSummary(
        count=len(vals),
        mean=float(vals.mean()),
        se=float(vals.std(ddof=1) / math.sqrt(len(vals))),
        median=float(np.median(vals)),
        quantiles={q: float(np.quantile(vals, q)) for q in qs},
        argmax=arg,
    )


def dekking_host_check(max_N: np.ndarray, max_2N: np.ndarray):
    """Both sides of E|M_N − E M_N| ≤ 2·(E M_{2N} − E M_N), with errors.

    Returns (lhs, rhs, se_lhs, se_rhs) from matched replica counts.
    """
    max_N = np.asarray(max_N, dtype=float)
    max_2N = np.asarray(max_2N, dtype=float)
    if len(max_N) != len(max_2N) or len(max_N) < 1000:
        raise ValueError("need matched replica arrays with at least 10^3 entries")
    n = len(max_N)
    dev = np.abs(max_N - max_N.mean())
    lhs = float(dev.mean())
    se_lhs = float(dev.std(ddof=1) / math.sqrt(n))
    rhs = float(2.0 * (max_2N.mean() - max_N.mean()))
    se_rhs = float(2.0 * math.sqrt(max_2N.var(ddof=1) / n + max_N.var(ddof=1) / n))
    return lhs, rhs, se_lhs, se_rhs
