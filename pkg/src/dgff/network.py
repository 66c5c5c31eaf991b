"""Electric networks: effective resistance, reductions, flow certificates.

A network is an undirected weighted graph with conductances c_e > 0
(resistances r_e = 1/c_e).  Effective resistance between terminal sets
comes from the grounded Dirichlet solve; ``duality_check`` recomputes
it from the flow side through an independent linear system.

``path_decompose`` and ``cut_decompose`` peel the optimal current /
potential into weighted simple paths resp. nested cutsets whose
harmonic sums reconstruct R_eff resp. C_eff exactly — these serve as
certificates for the variational characterizations.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def _fmt_label(lab) -> str:
    if isinstance(lab, tuple):
        return ",".join(str(int(c)) for c in lab)
    return str(lab)


def _parse_label(tok: str):
    if "," in tok:
        try:
            return tuple(int(p) for p in tok.split(","))
        except ValueError:
            return tok
    return tok


class Network:
    """Undirected network with positive edge conductances.

    Parameters
    ----------
    vertices : iterable of hashable labels
    edges : iterable of (u, v, c) with u != v and c > 0; parallel edges
        are kept as separate entries.
    """

    def __init__(self, vertices, edges):
        self.labels = list(vertices)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("duplicate vertex labels")
        eu, ev, cc = [], [], []
        for u, v, c in edges:
            if u == v:
                raise ValueError(f"self-loop at {u!r}")
            c = float(c)
            if not (c > 0 and np.isfinite(c)):
                raise ValueError(f"conductance must be positive and finite, got {c}")
            eu.append(self.index[u])
            ev.append(self.index[v])
            cc.append(c)
        self.edge_u = np.asarray(eu, dtype=np.int64)
        self.edge_v = np.asarray(ev, dtype=np.int64)
        self.conduct = np.asarray(cc, dtype=float)
        if len(self.labels) > 1 and not self._connected():
            raise ValueError("network must be connected")

    # -- basics ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        return len(self.conduct)

    @property
    def resist(self) -> np.ndarray:
        return 1.0 / self.conduct

    def degree_counts(self) -> np.ndarray:
        return (np.bincount(self.edge_u, minlength=self.n)
                + np.bincount(self.edge_v, minlength=self.n))

    def pi(self) -> np.ndarray:
        """π(x) = Σ_y c(x,y), the reversible measure of the walk."""
        out = np.zeros(self.n)
        np.add.at(out, self.edge_u, self.conduct)
        np.add.at(out, self.edge_v, self.conduct)
        return out

    def laplacian(self) -> sp.csc_matrix:
        i = np.concatenate([self.edge_u, self.edge_v, self.edge_u, self.edge_v])
        j = np.concatenate([self.edge_v, self.edge_u, self.edge_u, self.edge_v])
        w = np.concatenate([-self.conduct, -self.conduct, self.conduct, self.conduct])
        return sp.coo_matrix((w, (i, j)), shape=(self.n, self.n)).tocsc()

    def _connected(self, skip_edges=None) -> bool:
        return bool(self._reach({0}, skip_edges).all())

    def _reach(self, seeds, skip_edges=None) -> np.ndarray:
        keep = np.ones(self.n_edges, dtype=bool)
        if skip_edges is not None:
            keep[list(skip_edges)] = False
        adj = sp.coo_matrix(
            (np.ones(keep.sum()), (self.edge_u[keep], self.edge_v[keep])),
            shape=(self.n, self.n))
        adj = (adj + adj.T).tocsr()
        seen = np.zeros(self.n, dtype=bool)
        frontier = list(seeds)
        seen[frontier] = True
        while frontier:
            nxt = adj[frontier].indices
            nxt = nxt[~seen[nxt]]
            frontier = np.unique(nxt).tolist()
            seen[frontier] = True
        return seen

    def with_conductances(self, conduct: np.ndarray) -> "Network":
        out = Network.__new__(Network)
        out.labels = self.labels
        out.index = self.index
        out.edge_u = self.edge_u
        out.edge_v = self.edge_v
        conduct = np.asarray(conduct, dtype=float)
        if conduct.shape != self.conduct.shape or not np.all(conduct > 0):
            raise ValueError("need one positive conductance per edge")
        out.conduct = conduct
        return out

    def edges_between(self, u, v) -> np.ndarray:
        iu, iv = self.index[u], self.index[v]
        return np.nonzero(((self.edge_u == iu) & (self.edge_v == iv))
                          | ((self.edge_u == iv) & (self.edge_v == iu)))[0]


def from_field(field, beta: float) -> Network:
    """Nearest-neighbour network with c(x,y) = e^{β(h_x+h_y)}."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    dom = field.domain
    labels = [tuple(int(c) for c in v) for v in dom.vertices]
    h = field.values
    edges = []
    nbr = dom.neighbor_indices()
    for step_i in (0, 2):  # (1,0) and (0,1): each edge once
        ni = nbr[step_i]
        for a in np.nonzero(ni >= 0)[0]:
            b = ni[a]
            edges.append((labels[a], labels[b], float(np.exp(beta * (h[a] + h[b])))))
    return Network(labels, edges)


# ---------------------------------------------------------------------------
# Dirichlet / flow solves


@dataclass
class PotentialSolution:
    """Potential–current pair for a two-terminal problem."""

    network: Network
    potential: np.ndarray  # per vertex index
    current: np.ndarray  # per edge, oriented u -> v as stored
    value: float  # total current A -> B
    energy: float  # Σ c (Δf)² = Σ r i²
    source: frozenset = dc_field(default_factory=frozenset)
    sink: frozenset = dc_field(default_factory=frozenset)

    def node_residual(self) -> float:
        """Max |net current| over non-terminal vertices."""
        net = self.network
        acc = np.zeros(net.n)
        np.add.at(acc, net.edge_u, -self.current)
        np.add.at(acc, net.edge_v, self.current)
        term = [net.index[t] for t in self.source | self.sink]
        acc[term] = 0.0
        return float(np.abs(acc).max()) if net.n else 0.0


def _terminal_indices(net: Network, A, B):
    A = frozenset(A)
    B = frozenset(B)
    if not A or not B:
        raise ValueError("terminal sets must be nonempty")
    if A & B:
        raise ValueError("terminal sets must be disjoint")
    ia = [net.index[a] for a in A]
    ib = [net.index[b] for b in B]
    return A, B, ia, ib


def effective_resistance(net: Network, A, B):
    """(R_eff, PotentialSolution) for unit potential A=1, B=0.

    C_eff is the Dirichlet energy of the solution and R_eff = 1/C_eff.
    """
    A, B, ia, ib = _terminal_indices(net, A, B)
    if not _terminals_connected(net, ia, ib):
        raise ValueError("terminals are not connected")
    f = np.zeros(net.n)
    f[ia] = 1.0
    free = np.ones(net.n, dtype=bool)
    free[ia] = False
    free[ib] = False
    L = net.laplacian()
    if free.any():
        rhs = -(L[np.ix_(free, ~free)] @ f[~free])
        f[free] = spla.splu(L[np.ix_(free, free)].tocsc()).solve(rhs)
    df = f[net.edge_u] - f[net.edge_v]
    current = net.conduct * df
    energy = float(net.conduct @ df**2)
    sol = PotentialSolution(network=net, potential=f, current=current,
                            value=energy, energy=energy, source=A, sink=B)
    if energy <= 0:
        raise ValueError("terminals carry no current; network degenerate")
    resid = sol.node_residual()
    if resid > 1e-8 * max(energy, 1.0):
        raise RuntimeError(f"Dirichlet solve violated node law by {resid:g}")
    return 1.0 / energy, sol


def _terminals_connected(net: Network, ia, ib) -> bool:
    seen = net._reach(set(ia))
    return bool(seen[list(ib)].any())


def flow_resistance(net: Network, u, v):
    """R_eff from the flow side: unit current injected at u, out at v.

    Solves L f = e_u − e_v grounded at v and evaluates the flow energy
    Σ r i² of the resulting unit current — an independent route from the
    potential-side Dirichlet energy.
    """
    iu, iv = net.index[u], net.index[v]
    if iu == iv:
        raise ValueError("need two distinct terminals")
    keep = np.arange(net.n) != iv
    L = net.laplacian()
    rhs = np.zeros(net.n)
    rhs[iu] = 1.0
    f = np.zeros(net.n)
    f[keep] = spla.splu(L[np.ix_(keep, keep)].tocsc()).solve(rhs[keep])
    i_e = net.conduct * (f[net.edge_u] - f[net.edge_v])
    energy = float(net.resist @ i_e**2)
    sol = PotentialSolution(network=net, potential=f, current=i_e, value=1.0,
                            energy=energy, source=frozenset([u]), sink=frozenset([v]))
    return energy, sol


def duality_check(net: Network, u, v) -> float:
    """|R_eff·C_eff − 1| with the two factors from independent solves."""
    _, sol = effective_resistance(net, [u], [v])
    c_eff = sol.energy
    r_eff, _ = flow_resistance(net, u, v)
    return abs(r_eff * c_eff - 1.0)


# ---------------------------------------------------------------------------
# local reductions


def reduce_series(net: Network, site) -> Network:
    """Eliminate a degree-2 vertex, adding the resistances."""
    i = net.index[site]
    inc = np.nonzero((net.edge_u == i) | (net.edge_v == i))[0]
    if len(inc) != 2:
        raise ValueError(f"vertex {site!r} does not have exactly two incident edges")
    others = [net.edge_v[e] if net.edge_u[e] == i else net.edge_u[e] for e in inc]
    if others[0] == others[1]:
        raise ValueError(f"vertex {site!r} is a parallel pair, not a series joint")
    r_new = net.resist[inc[0]] + net.resist[inc[1]]
    labels = [lab for lab in net.labels if lab != site]
    edges = [(net.labels[net.edge_u[e]], net.labels[net.edge_v[e]], net.conduct[e])
             for e in range(net.n_edges) if e not in inc]
    edges.append((net.labels[others[0]], net.labels[others[1]], 1.0 / r_new))
    return Network(labels, edges)


def reduce_parallel(net: Network, pair) -> Network:
    """Merge all parallel edges between the pair into one conductance sum."""
    u, v = pair
    idx = net.edges_between(u, v)
    if len(idx) < 2:
        raise ValueError(f"no parallel edges between {u!r} and {v!r}")
    c_new = float(net.conduct[idx].sum())
    edges = [(net.labels[net.edge_u[e]], net.labels[net.edge_v[e]], net.conduct[e])
             for e in range(net.n_edges) if e not in set(idx.tolist())]
    edges.append((u, v, c_new))
    return Network(net.labels, edges)


def star_triangle(net: Network, site) -> Network:
    """Replace a 3-star centered at ``site`` by the equivalent triangle.

    With star conductances c₁,c₂,c₃ the triangle edge between legs i,j
    gets c_i·c_j / (c₁+c₂+c₃); pairwise effective resistances among all
    remaining vertices are preserved.
    """
    i = net.index[site]
    inc = np.nonzero((net.edge_u == i) | (net.edge_v == i))[0]
    if len(inc) != 3:
        raise ValueError(f"vertex {site!r} does not have exactly three incident edges")
    legs = [int(net.edge_v[e]) if net.edge_u[e] == i else int(net.edge_u[e]) for e in inc]
    if len(set(legs)) != 3:
        raise ValueError(f"star at {site!r} has repeated endpoints")
    cs = net.conduct[inc]
    total = cs.sum()
    labels = [lab for lab in net.labels if lab != site]
    edges = [(net.labels[net.edge_u[e]], net.labels[net.edge_v[e]], net.conduct[e])
             for e in range(net.n_edges) if e not in set(inc.tolist())]
    for a in range(3):
        for b in range(a + 1, 3):
            edges.append((net.labels[legs[a]], net.labels[legs[b]],
                          float(cs[a] * cs[b] / total)))
    return Network(labels, edges)


def subnetwork_reduce(net: Network, keep) -> Network:
    """Schur-complement elimination of every vertex outside ``keep``.

    The reduced network has c'(x,y) = −S[x,y] with S the Schur
    complement of the weighted Laplacian; it preserves all pairwise
    effective resistances among kept vertices, and matches the
    probabilistic formula π(x)·P^x(walk returns to keep at y).
    """
    keep = list(dict.fromkeys(keep))
    if len(keep) < 2:
        raise ValueError("need at least two kept vertices")
    ki = np.asarray([net.index[k] for k in keep])
    mask = np.zeros(net.n, dtype=bool)
    mask[ki] = True
    L = net.laplacian().toarray()
    if (~mask).any():
        S = (L[np.ix_(ki, ki)]
             - L[np.ix_(ki, np.nonzero(~mask)[0])]
             @ np.linalg.solve(L[np.ix_(~mask, ~mask)], L[np.ix_(np.nonzero(~mask)[0], ki)]))
    else:
        S = L[np.ix_(ki, ki)]
    edges = []
    scale = np.abs(S).max()
    for a in range(len(keep)):
        for b in range(a + 1, len(keep)):
            c = -S[a, b]
            if c > 1e-12 * scale:
                edges.append((keep[a], keep[b], float(c)))
    return Network(keep, edges)


# ---------------------------------------------------------------------------
# flow / cut certificates


@dataclass
class DecompositionItem:
    vertices: list  # simple path (path kind) or the level-set side D (cut kind)
    edges: list  # edge indices
    alpha: float
    splits: dict  # edge index -> r_{e,P} (paths) or c_{e,π} (cuts)


@dataclass
class FlowDecomposition:
    kind: str  # "path" | "cut"
    items: list
    value: float  # reconstructed R_eff (paths) or C_eff (cuts)

    @property
    def alphas(self) -> np.ndarray:
        return np.asarray([it.alpha for it in self.items])

    def reconstruct(self) -> float:
        # paths in parallel / cuts in series: both are the same harmonic sum
        return 1.0 / sum(1.0 / sum(it.splits[e] for e in it.edges)
                         for it in self.items)


def _single_terminals(sol: PotentialSolution):
    if len(sol.source) != 1 or len(sol.sink) != 1:
        raise ValueError("decompositions need single-vertex terminals")
    (u,), (v,) = sol.source, sol.sink
    return sol.network.index[u], sol.network.index[v]


def path_decompose(sol: PotentialSolution) -> FlowDecomposition:
    """Peel the optimal unit current into weighted simple paths.

    Each peel removes the widest (max-bottleneck) positive-flow path;
    the split resistances r_{e,P} = |i⋆(e)|·r_e/α make every path's
    total resistance equal R_eff/α, so the parallel sum of the paths
    reconstructs R_eff exactly.
    """
    net = sol.network
    iu, iv = _single_terminals(sol)
    if sol.node_residual() > 1e-8 * max(abs(sol.value), 1e-30):
        raise ValueError("current has nonzero divergence off the terminals")
    flow = sol.current / sol.value  # unit-value normalization
    i_star = np.abs(flow)
    # orient edges along the flow; drop numerically dead edges
    head = np.where(flow >= 0, net.edge_v, net.edge_u)
    tail = np.where(flow >= 0, net.edge_u, net.edge_v)
    resid = i_star.copy()
    resid[resid < 1e-12] = 0.0
    out_edges: list[list[int]] = [[] for _ in range(net.n)]
    for e in range(net.n_edges):
        if resid[e] > 0:
            out_edges[tail[e]].append(e)
    items = []
    total = 0.0
    while total < 1.0 - 1e-9:
        path_e = _widest_path(net, out_edges, resid, tail, head, iu, iv)
        if path_e is None:
            raise RuntimeError("flow exhausted before reaching unit value")
        alpha = min(resid[e] for e in path_e)
        for e in path_e:
            resid[e] -= alpha
            if resid[e] < 1e-15:
                resid[e] = 0.0
        verts = [net.labels[tail[path_e[0]]]] + [net.labels[head[e]] for e in path_e]
        splits = {e: float(i_star[e] * net.resist[e] / alpha) for e in path_e}
        items.append(DecompositionItem(vertices=verts, edges=list(path_e),
                                       alpha=float(alpha), splits=splits))
        total += alpha
    dec = FlowDecomposition(kind="path", items=items, value=0.0)
    dec.value = dec.reconstruct()
    return dec


def _widest_path(net, out_edges, resid, tail, head, iu, iv):
    """Max-bottleneck path iu -> iv over edges with positive residual flow."""
    best = np.zeros(net.n)
    best[iu] = np.inf
    via = {}
    pq = [(-np.inf, iu)]
    while pq:
        negw, x = heapq.heappop(pq)
        w = -negw
        if w < best[x]:
            continue
        if x == iv:
            break
        for e in out_edges[x]:
            r = resid[e]
            if r <= 0:
                continue
            cand = min(w, r)
            y = head[e]
            if cand > best[y]:
                best[y] = cand
                via[y] = e
                heapq.heappush(pq, (-cand, y))
    if best[iv] <= 0:
        return None
    path = []
    x = iv
    while x != iu:
        e = via[x]
        path.append(e)
        x = tail[e]
    return path[::-1]


def cut_decompose(sol: PotentialSolution, u=None, v=None) -> FlowDecomposition:
    """Peel the optimal potential into nested level-set cutsets.

    Levels of f⋆ are merged within 1e−10; cut k sits between successive
    levels, gets α_k = level gap, and split conductances
    c_{e,π} = |∇f⋆(e)|·c_e/α_k.  Every cut carries the full current, so
    the series sum of the cuts reconstructs C_eff exactly.
    """
    net = sol.network
    iu, iv = _single_terminals(sol)
    if sol.node_residual() > 1e-8 * max(abs(sol.value), 1e-30):
        raise ValueError("potential is not harmonic off the terminals")
    f = sol.potential / sol.potential[iu]  # f(u)=1, f(v)=0
    grad = np.abs(f[net.edge_u] - f[net.edge_v]) * net.conduct  # |∇f⋆(e)|·c_e
    levels = _merged_levels(f)
    items = []
    for k in range(1, len(levels)):
        hi, lo = levels[k - 1], levels[k]
        alpha = (hi - lo)
        side = f >= hi - 1e-10
        cut = np.nonzero(side[net.edge_u] != side[net.edge_v])[0]
        splits = {int(e): float(grad[e] / alpha) for e in cut}
        items.append(DecompositionItem(
            vertices=[net.labels[i] for i in np.nonzero(side)[0]],
            edges=[int(e) for e in cut],
            alpha=float(alpha), splits=splits))
    dec = FlowDecomposition(kind="cut", items=items, value=0.0)
    dec.value = dec.reconstruct()
    return dec


def _merged_levels(f: np.ndarray, tol: float = 1e-10):
    vals = np.sort(np.unique(f))[::-1]
    merged = [float(vals[0])]
    for v in vals[1:]:
        if merged[-1] - v > tol:
            merged.append(float(v))
    return merged


# ---------------------------------------------------------------------------
# bounds


def nash_williams(net: Network, cutsets, A, B) -> float:
    """Cutset upper bound on C_eff: [Σ_π (Σ_{e∈π} c_e)^{−1}]^{−1}.

    ``cutsets`` is a family of edge-index collections (or (u,v) label
    pairs, meaning all edges between them); they must be pairwise
    edge-disjoint and each must separate A from B.
    """
    A, B, ia, ib = _terminal_indices(net, A, B)
    fams = [_as_edge_set(net, pi) for pi in cutsets]
    seen = set()
    for fam in fams:
        if seen & fam:
            raise ValueError("cutsets must be pairwise edge-disjoint")
        seen |= fam
        reach = net._reach(set(ia), skip_edges=fam)
        if reach[ib].any():
            raise ValueError("a supplied edge set does not separate the terminals")
    bound = 1.0 / sum(1.0 / net.conduct[list(fam)].sum() for fam in fams)
    r_eff, _ = effective_resistance(net, A, B)
    if 1.0 / r_eff > bound + 1e-10:
        raise RuntimeError("Nash-Williams bound violated; solver inconsistency")
    return bound


def path_bound(net: Network, paths, u, v) -> float:
    """Edge-disjoint-path upper bound on R_eff: [Σ_P (Σ_{e∈P} r_e)^{−1}]^{−1}."""
    used = set()
    sums = []
    for pth in paths:
        pth = list(pth)
        if pth[0] != u or pth[-1] != v:
            raise ValueError("each path must run from u to v")
        acc = 0.0
        for a, b in zip(pth, pth[1:]):
            cand = [e for e in net.edges_between(a, b) if e not in used]
            if not cand:
                raise ValueError(f"no unused edge between {a!r} and {b!r}")
            e = cand[0]
            used.add(int(e))
            acc += net.resist[e]
        sums.append(acc)
    bound = 1.0 / sum(1.0 / s for s in sums)
    r_eff, _ = effective_resistance(net, [u], [v])
    if r_eff > bound + 1e-10:
        raise RuntimeError("path bound violated; solver inconsistency")
    return bound


def _as_edge_set(net: Network, fam) -> set:
    out = set()
    for item in fam:
        if isinstance(item, (int, np.integer)):
            out.add(int(item))
        else:
            u, v = item
            found = net.edges_between(u, v)
            if len(found) == 0:
                raise ValueError(f"no edge between {u!r} and {v!r}")
            out.update(int(e) for e in found)
    return out


# ---------------------------------------------------------------------------
# field sensitivities


def log_resistance_gradient(field, beta: float, u, v, step: float = 1e-5):
    """Central-difference sensitivities of log R_eff in each field value.

    Returns (per-vertex sensitivity array aligned with the domain index,
    their ℓ¹ norm).  The ℓ¹ norm is bounded by 2β since each h_x enters
    only through the conductances of its incident edges.
    """
    dom = field.domain
    base = from_field(field, beta)
    iu = tuple(int(c) for c in np.asarray(u).reshape(2))
    iv = tuple(int(c) for c in np.asarray(v).reshape(2))
    if iu == iv:
        raise ValueError("need two distinct terminals")
    sens = np.zeros(len(dom))
    for k in range(len(dom)):
        # from_field keeps the domain's vertex order, so index k is vertex k
        inc = np.nonzero((base.edge_u == k) | (base.edge_v == k))[0]
        vals = []
        for sgn in (1.0, -1.0):
            c = base.conduct.copy()
            c[inc] *= np.exp(sgn * beta * step)
            r, _ = effective_resistance(base.with_conductances(c), [iu], [iv])
            vals.append(np.log(r))
        sens[k] = (vals[0] - vals[1]) / (2 * step)
    return sens, float(np.abs(sens).sum())


# ---------------------------------------------------------------------------
# file I/O


def save_network(net: Network, path):
    """Plain-text edge list: one ``u v c`` line per edge."""
    with open(path, "w") as fh:
        for e in range(net.n_edges):
            fh.write(f"{_fmt_label(net.labels[net.edge_u[e]])} "
                     f"{_fmt_label(net.labels[net.edge_v[e]])} "
                     f"{net.conduct[e]:.17g}\n")


def load_network(path) -> Network:
    edges = []
    verts = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {ln}: expected 'u v c', got {line!r}")
            u, v = _parse_label(parts[0]), _parse_label(parts[1])
            edges.append((u, v, float(parts[2])))
            verts.setdefault(u, None)
            verts.setdefault(v, None)
    if not edges:
        raise ValueError("network file has no edges")
    return Network(list(verts), edges)
