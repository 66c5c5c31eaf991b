"""Random walk in a DGFF landscape.

The walk moves on the lattice with conductances c(x,y) = e^{β(h_x+h_y)}
(h = 0 off the field's domain).  The finite state space is the domain
together with its external boundary ring; the rim reflects, which only
matters for quantities that survive past the first exit.

All identity checks (exit times, commute times) are computed twice, by
a direct linear solve and through the effective-resistance formulas, so
agreement is a genuine cross-check of two code paths.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import NEIGHBOR_STEPS, LatticeDomain
from . import network as netmod

BETA_C = math.sqrt(math.pi / 2.0)
"""Critical inverse temperature β̃_c = √(π/2) of the exit-time exponent."""


class WalkKernel:
    """Transition kernel P(x,y) = c(x,y)/π(x) on domain ∪ boundary."""

    def __init__(self, states: LatticeDomain, edge_u, edge_v, conduct, beta,
                 form_agreement: float):
        self.states = states
        self.edge_u = edge_u
        self.edge_v = edge_v
        self.conduct = conduct
        self.beta = float(beta)
        self.form_agreement = form_agreement
        n = len(states)
        pi = np.zeros(n)
        np.add.at(pi, edge_u, conduct)
        np.add.at(pi, edge_v, conduct)
        self.pi = pi
        rows = np.concatenate([edge_u, edge_v])
        cols = np.concatenate([edge_v, edge_u])
        vals = np.concatenate([conduct, conduct]) / pi[rows]
        self.P = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    @property
    def n(self) -> int:
        return len(self.states)

    def index(self, x) -> int:
        return self.states.index(x)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel()

    def detailed_balance_residual(self) -> float:
        Q = self.P.multiply(self.pi[:, None]).tocoo()
        return float(np.abs((Q - Q.T).data).max()) if Q.nnz else 0.0

    def to_network(self) -> netmod.Network:
        labels = [tuple(int(c) for c in v) for v in self.states.vertices]
        edges = [(labels[self.edge_u[e]], labels[self.edge_v[e]], self.conduct[e])
                 for e in range(len(self.conduct))]
        return netmod.Network(labels, edges)


def build_kernel(field, beta: float) -> WalkKernel:
    """Kernel of the walk driven by the field at inverse temperature β.

    Both defining forms are evaluated — conductance ratios
    c(x,y)/Σ_z c(x,z) and the difference form e^{βh_y}/Σ_z e^{βh_z} —
    and their maximal discrepancy is stored on the kernel.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    dom = field.domain
    states = LatticeDomain(
        np.concatenate([dom.vertices, dom.boundary()]),
        scale=dom.scale, shape=dom.shape + "+rim")
    h = field.values_at(states.vertices)  # zero on the rim by convention
    nbr = states.neighbor_indices()
    eu, ev = [], []
    for step_i in (0, 2):  # each lattice edge once
        ni = nbr[step_i]
        mask = ni >= 0
        eu.append(np.nonzero(mask)[0])
        ev.append(ni[mask])
    eu = np.concatenate(eu)
    ev = np.concatenate(ev)
    conduct = np.exp(beta * (h[eu] + h[ev]))
    ker = WalkKernel(states, eu, ev, conduct, beta, form_agreement=0.0)
    ker.form_agreement = _difference_form_gap(ker, h, beta)
    return ker


def _difference_form_gap(ker: WalkKernel, h: np.ndarray, beta: float) -> float:
    """Max |P(x,y) − e^{βh_y}/Σ_{z~x} e^{βh_z}| over transitions."""
    w = np.exp(beta * h)
    denom = np.zeros(ker.n)
    np.add.at(denom, ker.edge_u, w[ker.edge_v])
    np.add.at(denom, ker.edge_v, w[ker.edge_u])
    gap = 0.0
    P = ker.P.tocoo()
    alt = w[P.col] / denom[P.row]
    return float(np.abs(P.data - alt).max()) if P.nnz else gap


# ---------------------------------------------------------------------------
# exact expected-time quantities


def _region_indices(ker: WalkKernel, region) -> np.ndarray:
    if isinstance(region, LatticeDomain):
        region = region.vertices
    region = np.asarray(region, dtype=np.int64).reshape(-1, 2)
    idx = ker.states.index_of(region)
    if np.any(idx < 0):
        raise ValueError("region must lie inside the kernel's state space")
    return np.unique(idx)


def _laplacian(ker: WalkKernel) -> sp.csc_matrix:
    i = np.concatenate([ker.edge_u, ker.edge_v, ker.edge_u, ker.edge_v])
    j = np.concatenate([ker.edge_v, ker.edge_u, ker.edge_u, ker.edge_v])
    w = np.concatenate([-ker.conduct, -ker.conduct, ker.conduct, ker.conduct])
    return sp.coo_matrix((w, (i, j)), shape=(ker.n, ker.n)).tocsc()


def expected_exit_time(ker: WalkKernel, x, region, method: str = "solve"):
    """E^x of the first exit time from ``region``.

    method "solve": (I−P_A)t = 1 through the conductance Laplacian;
    method "identity": R_eff(x, A^c)·Σ_{y∈A} π(y)·P^y(τ_x < τ_{A^c});
    method "both": the pair, for agreement checks.
    """
    A = _region_indices(ker, region)
    ix = ker.index(x)
    if ix not in A:
        raise ValueError("start vertex must lie in the region")
    if len(A) >= ker.n:
        raise ValueError("region must leave at least one exit state")
    if method in ("solve", "both"):
        L = _laplacian(ker)[np.ix_(A, A)]
        t = spla.splu(L.tocsc()).solve(ker.pi[A])
        t_solve = float(t[np.searchsorted(A, ix)])
        if method == "solve":
            return t_solve
    net = ker.to_network()
    lab = tuple(int(c) for c in np.asarray(x).reshape(2))
    outside = np.setdiff1d(np.arange(ker.n), A)
    out_labs = [net.labels[i] for i in outside]
    r_eff, sol = netmod.effective_resistance(net, [lab], out_labs)
    phi = sol.potential  # P^y(τ_x < τ_{A^c}) by the Dirichlet characterization
    t_ident = float(r_eff * (ker.pi[A] @ phi[A]))
    if method == "identity":
        return t_ident
    if method == "both":
        return t_solve, t_ident
    raise ValueError(f"unknown method {method!r}")


def exit_time_upper_bound(ker: WalkKernel, x, region) -> float:
    """R_eff(x, region^c) · π(region) — an upper bound on E^x(τ)."""
    A = _region_indices(ker, region)
    net = ker.to_network()
    lab = tuple(int(c) for c in np.asarray(x).reshape(2))
    outside = np.setdiff1d(np.arange(ker.n), A)
    r_eff, _ = netmod.effective_resistance(
        net, [lab], [net.labels[i] for i in outside])
    return float(r_eff * ker.pi[A].sum())


def hitting_time(ker: WalkKernel, x, target) -> float:
    """E^x τ_target on the full (reflecting) state space, by linear solve."""
    it = ker.index(target)
    keep = np.arange(ker.n) != it
    L = _laplacian(ker)[np.ix_(keep, keep)]
    t = spla.splu(L.tocsc()).solve(ker.pi[keep])
    full = np.zeros(ker.n)
    full[keep] = t
    return float(full[ker.index(x)])


def commute_time(ker: WalkKernel, u, v):
    """(lhs, rhs) of E^uτ_v + E^vτ_u = R_eff(u,v)·π(total)."""
    lhs = hitting_time(ker, u, v) + hitting_time(ker, v, u)
    net = ker.to_network()
    lu = tuple(int(c) for c in np.asarray(u).reshape(2))
    lv = tuple(int(c) for c in np.asarray(v).reshape(2))
    r_eff, _ = netmod.effective_resistance(net, [lu], [lv])
    rhs = float(r_eff * ker.pi.sum())
    return lhs, rhs


# ---------------------------------------------------------------------------
# heat kernel


def heat_kernel(ker: WalkKernel, x, T: int, mode: str = "exact",
                reps: int = 10_000, rng=None):
    """Return probability P^x(X_T = x).

    mode "exact": T sparse matrix-vector products — the exact power
    (P^T)_{xx} without ever forming the dense matrix; mode "mc":
    empirical frequency with its standard error.  The nearest-neighbour
    graph is bipartite, so odd T gives exactly 0.
    """
    if T < 0 or int(T) != T:
        raise ValueError("time must be a nonnegative integer")
    T = int(T)
    ix = ker.index(x)
    if T == 0:
        return 1.0
    if T % 2 == 1:
        return 0.0
    if mode == "exact":
        PT = ker.P.T.tocsr()
        row = np.zeros(ker.n)
        row[ix] = 1.0
        for _ in range(T):
            row = PT @ row
        return float(row[ix])
    if mode == "mc":
        rng = np.random.default_rng(rng)
        pos = _walk_positions(ker, ix, T, reps, rng)
        hits = (pos == ix).mean()
        se = math.sqrt(max(hits * (1 - hits), 1e-300) / reps)
        return float(hits), float(se)
    raise ValueError(f"unknown mode {mode!r}")


def theta_exponent(beta: float) -> float:
    """Exit-time exponent: 2+2(β/β̃_c)² up to β̃_c, then 4β/β̃_c."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta <= BETA_C:
        return 2.0 + 2.0 * (beta / BETA_C) ** 2
    return 4.0 * beta / BETA_C


# ---------------------------------------------------------------------------
# trajectory simulation


def _row_tables(ker: WalkKernel):
    """Per-state neighbour lists and cumulative transition probabilities."""
    if not hasattr(ker, "_tables"):
        P = ker.P.tolil()
        deg = max(len(r) for r in P.rows)
        nbr = np.zeros((ker.n, deg), dtype=np.int64)
        cum = np.ones((ker.n, deg))
        for i in range(ker.n):
            r, d = P.rows[i], P.data[i]
            nbr[i, :len(r)] = r
            nbr[i, len(r):] = r[-1] if r else i
            cum[i, :len(d)] = np.cumsum(d)
            cum[i, len(d) - 1:] = 1.0  # guard against cumsum roundoff
        ker._tables = (nbr, cum)
    return ker._tables


def _walk_positions(ker, ix, steps, reps, rng):
    nbr, cum = _row_tables(ker)
    pos = np.full(reps, ix, dtype=np.int64)
    for _ in range(steps):
        u = rng.random(reps)
        choice = (u[:, None] > cum[pos]).sum(axis=1)
        pos = nbr[pos, choice]
    return pos


def walk_simulate(ker: WalkKernel, x, steps: int, rng, reps: int = 1,
                  absorbing=None):
    """Simulate walks started at x; returns a summary dictionary.

    Deterministic given the generator state; the per-step draw is an
    inverse-CDF table lookup on the ≤4 neighbour transitions.  If
    ``absorbing`` is given, walks freeze upon entering it and the hit
    times are reported (−1 when never absorbed).
    """
    ix = ker.index(x)
    nbr, cum = _row_tables(ker)
    absorb = np.zeros(ker.n, dtype=bool)
    if absorbing is not None:
        absorb[_region_indices(ker, absorbing)] = True
    pos = np.full(reps, ix, dtype=np.int64)
    hit = np.full(reps, -1, dtype=np.int64)
    returns = np.zeros(reps, dtype=np.int64)
    for t in range(1, steps + 1):
        alive = hit < 0
        if not alive.any():
            break
        u = rng.random(alive.sum())
        cur = pos[alive]
        choice = (u[:, None] > cum[cur]).sum(axis=1)
        nxt = nbr[cur, choice]
        pos[alive] = nxt
        returns[alive] += nxt == ix
        newly = alive.copy()
        newly[alive] = absorb[nxt]
        hit[newly] = t
    coords = ker.states.vertices[pos]
    start = ker.states.vertices[ix]
    disp2 = ((coords - start) ** 2).sum(axis=1).astype(float)
    return {
        "final": coords,
        "displacement_sq": disp2,
        "mean_sq_displacement": float(disp2.mean()),
        "returns": returns,
        "exit_times": hit,
    }
