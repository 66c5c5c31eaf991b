"""Lattice domains on Z^2.

A domain is a finite set of lattice vertices together with its external
boundary (the vertices outside that have a nearest neighbour inside).
Vertices are stored row-major over the bounding box, which fixes the
index order used by every matrix and field in the package.

Continuum regions are represented by named primitives (square, disc,
annulus) or by a 0/1 mask grid; ``discretize`` turns a region into the
lattice domain at a given scale.
"""

from __future__ import annotations

import math

import numpy as np

NEIGHBOR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class LatticeDomain:
    """Finite vertex set in Z^2 with O(1) index lookup.

    Parameters
    ----------
    vertices : array-like of shape (n, 2)
        Integer lattice points; duplicates are removed and the result is
        sorted row-major (first coordinate, then second).
    scale : int
        The scale N the domain was built at (controls x/N positions).
    shape : str
        Free-form tag such as ``"box"`` or ``"disc"``.
    """

    def __init__(self, vertices, scale: int, shape: str = "custom"):
        v = np.asarray(vertices, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] == 0:
            raise ValueError("domain needs a nonempty (n, 2) vertex array")
        v = np.unique(v, axis=0)  # sorts row-major as a side effect
        self.vertices = v
        self.scale = int(scale)
        self.shape = shape
        self._lo = v.min(axis=0) - 1
        self._hi = v.max(axis=0) + 1
        w = self._hi - self._lo + 1
        grid = -np.ones((w[0], w[1]), dtype=np.int64)
        grid[v[:, 0] - self._lo[0], v[:, 1] - self._lo[1]] = np.arange(len(v))
        self._grid = grid
        self._boundary = None

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self):
        return f"LatticeDomain({self.shape!r}, n={len(self)}, scale={self.scale})"

    # -- index bijection ------------------------------------------------

    def index(self, x) -> int:
        """Index of vertex x, or raise KeyError."""
        i = self.index_of(np.asarray(x, dtype=np.int64).reshape(1, 2))[0]
        if i < 0:
            raise KeyError(f"vertex {tuple(int(c) for c in x)} not in domain")
        return int(i)

    def index_of(self, xs) -> np.ndarray:
        """Vectorized lookup; -1 for vertices not in the domain."""
        xs = np.asarray(xs, dtype=np.int64)
        p = xs - self._lo
        w = self._hi - self._lo + 1
        inside = (p[:, 0] >= 0) & (p[:, 0] < w[0]) & (p[:, 1] >= 0) & (p[:, 1] < w[1])
        out = -np.ones(len(xs), dtype=np.int64)
        out[inside] = self._grid[p[inside, 0], p[inside, 1]]
        return out

    def contains(self, xs) -> np.ndarray:
        return self.index_of(np.atleast_2d(np.asarray(xs, dtype=np.int64))) >= 0

    # -- geometry -------------------------------------------------------

    def boundary(self) -> np.ndarray:
        """External boundary: vertices off the domain adjacent to it, sorted."""
        if self._boundary is None:
            cand = []
            for dx, dy in NEIGHBOR_STEPS:
                cand.append(self.vertices + (dx, dy))
            cand = np.concatenate(cand)
            cand = cand[self.index_of(cand) < 0]
            self._boundary = np.unique(cand, axis=0)
        return self._boundary

    def neighbor_indices(self) -> list[np.ndarray]:
        """For each neighbour step, the domain index of v+step (-1 if outside)."""
        return [self.index_of(self.vertices + step) for step in NEIGHBOR_STEPS]

    def boundary_contact_counts(self) -> np.ndarray:
        """Number of missing (boundary) neighbours for each domain vertex."""
        nbr = self.neighbor_indices()
        return sum((ni < 0).astype(np.int64) for ni in nbr)

    def interior_shrink(self, delta: float) -> np.ndarray:
        """Vertices at ℓ∞-distance > delta*N from the lattice complement.

        Returns the vertex subset as an (m, 2) array; delta=0 keeps
        everything since lattice neighbours are at distance 1.
        """
        if not 0 <= delta < 0.5:
            raise ValueError("delta must lie in [0, 1/2)")
        cut = delta * self.scale
        dist = self._linf_distance_to_complement()
        return self.vertices[dist > cut]

    def _linf_distance_to_complement(self) -> np.ndarray:
        # Chessboard distance transform via repeated min-filter on the
        # bounding grid; domains here are small enough for the loop.
        w = self._hi - self._lo + 1
        inside = self._grid >= 0
        dist = np.zeros((w[0], w[1]), dtype=np.int64)
        dist[inside] = len(self.vertices) + 2  # effectively infinity
        changed = True
        while changed:
            prev = dist.copy()
            for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
                moved = np.full_like(dist, 0)
                if axis == 0 and shift == 1:
                    moved[1:, :] = dist[:-1, :]
                elif axis == 0:
                    moved[:-1, :] = dist[1:, :]
                elif shift == 1:
                    moved[:, 1:] = dist[:, :-1]
                else:
                    moved[:, :-1] = dist[:, 1:]
                np.minimum(dist, moved + 1, out=dist, where=inside)
            # diagonal steps too: ℓ∞ balls are squares
            for sx in (1, -1):
                for sy in (1, -1):
                    moved = np.full_like(dist, 0)
                    src = dist[max(0, -sx):dist.shape[0] - max(0, sx),
                               max(0, -sy):dist.shape[1] - max(0, sy)]
                    moved[max(0, sx):dist.shape[0] - max(0, -sx),
                          max(0, sy):dist.shape[1] - max(0, -sy)] = src
                    np.minimum(dist, moved + 1, out=dist, where=inside)
            changed = not np.array_equal(prev, dist)
        return dist[self.vertices[:, 0] - self._lo[0], self.vertices[:, 1] - self._lo[1]]

    def to_mask(self) -> np.ndarray:
        """Boolean bounding-box mask (row-major like the vertex order)."""
        return self._grid >= 0


# ---------------------------------------------------------------------------
# constructors


def make_box(N: int) -> LatticeDomain:
    """Open box (0, N)^2 ∩ Z^2: the (N-1)^2 vertices {1..N-1}^2."""
    if int(N) != N or N < 2:
        raise ValueError(f"box scale must be an integer >= 2, got {N}")
    N = int(N)
    r = np.arange(1, N, dtype=np.int64)
    vv = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
    return LatticeDomain(vv, scale=N, shape="box")


def make_centered_box(half: int) -> LatticeDomain:
    """Centered box [-half, half]^2 ∩ Z^2 (side 2*half+1, contains the origin)."""
    if half < 0:
        raise ValueError("half-width must be >= 0")
    r = np.arange(-half, half + 1, dtype=np.int64)
    vv = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
    return LatticeDomain(vv, scale=2 * half + 2, shape="centered-box")


def make_disc(N: int) -> LatticeDomain:
    if N < 2:
        raise ValueError(f"disc scale must be >= 2, got {N}")
    return discretize(DiscRegion(), N)


# ---------------------------------------------------------------------------
# continuum regions


class Region:
    """A bounded continuum region, queried through ℓ∞ distances."""

    def linf_dist_to_complement(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) enclosing the region."""
        raise NotImplementedError


class SquareRegion(Region):
    """The open unit square (0,1)^2."""

    def linf_dist_to_complement(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = np.minimum.reduce([pts[:, 0], 1.0 - pts[:, 0], pts[:, 1], 1.0 - pts[:, 1]])
        return np.maximum(d, 0.0)

    def bounding_box(self):
        return (0.0, 1.0, 0.0, 1.0)


class DiscRegion(Region):
    """The open unit disc centered at the origin.

    The ℓ∞ distance from an interior point p to the complement is the
    largest t such that the square p + [-t,t]^2 stays inside; its
    outermost corner (|p1|+t, |p2|+t) must sit on the circle, which
    gives a quadratic in t.
    """

    def linf_dist_to_complement(self, pts):
        pts = np.asarray(pts, dtype=float)
        a = np.abs(pts)
        n2 = (a ** 2).sum(axis=1)
        s = a.sum(axis=1)
        t = np.where(n2 < 1.0, (-s + np.sqrt(np.maximum(s * s - 2.0 * (n2 - 1.0), 0.0))) / 2.0, 0.0)
        return t

    def bounding_box(self):
        return (-1.0, 1.0, -1.0, 1.0)


class AnnulusRegion(Region):
    """Open annulus r_in < |x| < 1 centered at the origin."""

    def __init__(self, r_in: float):
        if not 0 < r_in < 1:
            raise ValueError("inner radius must lie in (0, 1)")
        self.r_in = float(r_in)

    def linf_dist_to_complement(self, pts):
        pts = np.asarray(pts, dtype=float)
        outer = DiscRegion().linf_dist_to_complement(pts)
        # distance to the inner disc: ℓ∞ ball stays outside |x| <= r_in as
        # long as its nearest corner does; use the conservative ℓ2 bound
        # (|p| - r_in)/sqrt(2) <= true ℓ∞ distance <= |p| - r_in.
        norm = np.sqrt((pts ** 2).sum(axis=1))
        inner = np.maximum(norm - self.r_in, 0.0) / math.sqrt(2.0)
        return np.minimum(outer, inner)

    def bounding_box(self):
        return (-1.0, 1.0, -1.0, 1.0)


class MaskRegion(Region):
    """Region given by a 0/1 grid covering [0,1]^2, row = first coordinate.

    Cell (i, j) of an m×m grid covers [i/m,(i+1)/m] × [j/m,(j+1)/m]; the
    distance query is approximated by testing whether the ℓ∞ ball hits
    any zero cell, which is exact up to one grid cell.
    """

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2 or not mask.any():
            raise ValueError("mask must be a nonempty 2D 0/1 grid")
        self.mask = mask

    def linf_dist_to_complement(self, pts):
        pts = np.asarray(pts, dtype=float)
        m0, m1 = self.mask.shape
        # distance transform on cells, in units of the coarser cell side
        inside = self.mask
        big = inside.size + 2
        dist = np.where(inside, big, 0).astype(np.int64)
        for _ in range(max(m0, m1)):
            prev = dist.copy()
            padded = np.pad(dist, 1, constant_values=0)
            stacked = [padded[1 + di:1 + di + m0, 1 + dj:1 + dj + m1]
                       for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
            np.minimum(dist, np.minimum.reduce(stacked) + 1, out=dist, where=inside)
            if np.array_equal(prev, dist):
                break
        cell = np.empty(len(pts))
        i = np.clip((pts[:, 0] * m0).astype(int), 0, m0 - 1)
        j = np.clip((pts[:, 1] * m1).astype(int), 0, m1 - 1)
        inside_pt = (pts[:, 0] >= 0) & (pts[:, 0] <= 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= 1)
        cell = np.where(inside_pt, dist[i, j], 0)
        # conservative: (cells-1) full cell sides are guaranteed clear
        return np.maximum(cell - 1, 0) / max(m0, m1)

    def bounding_box(self):
        return (0.0, 1.0, 0.0, 1.0)


def load_mask(path) -> MaskRegion:
    """Read a plain-text grid of 0/1 characters (rows of equal length)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise ValueError(f"mask rows must contain only 0/1, got {line!r}")
            rows.append([c == "1" for c in line])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("mask file needs nonempty rows of equal length")
    return MaskRegion(np.asarray(rows, dtype=bool))


def discretize(region: Region, N: int) -> LatticeDomain:
    """Lattice domain {x : dist_∞(x/N, complement) ≥ 1/N} at scale N.

    The boundary case is included so that the unit square reproduces
    ``make_box(N)`` exactly.
    """
    if N < 2:
        raise ValueError(f"scale must be >= 2, got {N}")
    xmin, xmax, ymin, ymax = region.bounding_box()
    xs = np.arange(math.floor(xmin * N) - 1, math.ceil(xmax * N) + 2, dtype=np.int64)
    ys = np.arange(math.floor(ymin * N) - 1, math.ceil(ymax * N) + 2, dtype=np.int64)
    vv = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    d = region.linf_dist_to_complement(vv / float(N))
    keep = vv[d >= 1.0 / N - 1e-12]
    if len(keep) == 0:
        raise ValueError(f"region discretizes to an empty domain at scale {N}")
    tag = type(region).__name__.replace("Region", "").lower() or "custom"
    return LatticeDomain(keep, scale=N, shape=tag)


def parse_domain(spec: str) -> LatticeDomain:
    """Parse a CLI domain spec: ``box:N``, ``disc:N``, or ``mask:path[:N]``."""
    kind, _, rest = spec.partition(":")
    if kind == "box":
        return make_box(int(rest))
    if kind == "disc":
        return make_disc(int(rest))
    if kind == "mask":
        path, _, scale = rest.partition(":")
        region = load_mask(path)
        N = int(scale) if scale else max(region.mask.shape)
        return discretize(region, N)
    raise ValueError(f"unknown domain spec {spec!r} (want box:N | disc:N | mask:path)")
