"""Command-line front end.

Each subcommand builds an :class:`~dgff.harness.ExperimentConfig` and
dispatches through the harness; ``suite`` runs a fast battery of exact
identity checks.  Exit codes: 0 success, 2 bad input, 3 suite failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _limit_threads(n: int | None):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgff",
                                description="2D discrete Gaussian free field toolkit")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/OpenMP threads")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--config", default=None,
                   help="key=value config file; explicit flags win")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("green", help="Green function column of a domain")
    g.add_argument("--N", type=int, default=16)
    g.add_argument("--domain", default=None, help="domain spec, e.g. disc:64")
    g.add_argument("--x", default=None, help="source vertex 'x,y'")

    s = sub.add_parser("sample", help="draw field replicas to a binary file")
    s.add_argument("--N", type=int, default=32)
    s.add_argument("--domain", default=None)
    s.add_argument("--reps", type=int, default=1)

    l = sub.add_parser("levelset", help="intermediate level-set size scaling")
    l.add_argument("--lam", type=float, default=0.2)
    l.add_argument("--ns", default="64,128,256")
    l.add_argument("--reps", type=int, default=50)

    m = sub.add_parser("maxstat", help="maximum statistics vs m_N")
    m.add_argument("--ns", default="64,128")
    m.add_argument("--reps", type=int, default=100)

    b = sub.add_parser("brw", help="branching random walk maximum")
    b.add_argument("--b", type=int, default=2)
    b.add_argument("--n", default="10")
    b.add_argument("--reps", type=int, default=1000)

    c = sub.add_parser("chaos", help="hierarchical chaos total mass")
    c.add_argument("--levels", type=int, default=4)
    c.add_argument("--lam", type=float, default=0.3)
    c.add_argument("--radius", choices=("cell", "global"), default="cell")
    c.add_argument("--reps", type=int, default=100)

    r = sub.add_parser("resist", help="effective resistance of a network file")
    r.add_argument("--net", required=True)
    r.add_argument("--u", default=None)
    r.add_argument("--v", default=None)

    w = sub.add_parser("walk", help="random walk among field conductances")
    w.add_argument("--beta", type=float, default=None)
    w.add_argument("--N", type=int, default=16)
    w.add_argument("--steps", type=int, default=None)
    w.add_argument("--reps", type=int, default=4)

    sub.add_parser("suite", help="fast exact-identity battery")
    return p


def _int_list(text) -> list:
    if isinstance(text, list):
        return [int(t) for t in text]
    return [int(t) for t in str(text).split(",") if t.strip()]


_EXPERIMENT_FOR = {
    "green": "green-column",
    "sample": "sample-fields",
    "levelset": "levelset-exponent",
    "maxstat": "max-stats",
    "brw": "brw-max",
    "chaos": "chaos-mass",
    "resist": "resist",
    "walk": "walk-exponents",
}


def _config_from_args(args) -> "ExperimentConfig":
    from .harness import ExperimentConfig, load_config
    params = {}
    reps = 1
    if args.config:
        base = load_config(args.config, name=_EXPERIMENT_FOR[args.command])
        params.update(base.params)
        reps = base.reps
    if args.command == "green":
        if args.domain:
            params["domain"] = args.domain
        params.setdefault("N", args.N)
        if args.x:
            params["x"] = [int(t) for t in args.x.split(",")]
    elif args.command == "sample":
        if args.domain:
            params["domain"] = args.domain
        params.setdefault("N", args.N)
        reps = args.reps
    elif args.command == "levelset":
        params.update(lam=args.lam, ns=_int_list(args.ns))
        reps = args.reps
    elif args.command == "maxstat":
        params["ns"] = _int_list(args.ns)
        reps = args.reps
    elif args.command == "brw":
        params.update(b=args.b, n=_int_list(args.n))
        reps = args.reps
    elif args.command == "chaos":
        params.update(levels=args.levels, lam=args.lam, radius=args.radius)
        reps = args.reps
    elif args.command == "resist":
        params["net"] = args.net
        if args.u:
            params["u"] = args.u
        if args.v:
            params["v"] = args.v
    elif args.command == "walk":
        if args.beta is not None:
            params["beta"] = args.beta
        params["N"] = args.N
        if args.steps is not None:
            params["steps"] = args.steps
        reps = args.reps
    return ExperimentConfig(name=_EXPERIMENT_FOR[args.command], params=params,
                            seed=args.seed, reps=reps, out_dir=args.out_dir)


# ---------------------------------------------------------------------------
# suite: exact identities only, so it is fast and free of statistical noise


def _suite_checks():
    from . import network, rwre
    from .chaos import gmc_step, lebesgue_measure, sample_level_increment
    from .green import green_matrix, green_via_kernel, potential_kernel
    from .lattice import LatticeDomain, make_box, make_centered_box
    from .sampler import concentric_decompose, gibbs_markov_split, seed_stream

    checks = []

    def check(name, value, tol):
        checks.append((name, float(value), tol, value <= tol))

    op = green_matrix(make_box(8))
    from .green import dirichlet_laplacian
    A = dirichlet_laplacian(op.domain).toarray()
    G = np.column_stack([op.column(v) for v in map(tuple, op.domain.vertices)])
    check("green-poisson residual (N=8)",
          np.abs(A @ G - 4.0 * np.eye(len(op.domain))).max(), 1e-10)

    check("potential kernel a(0)", abs(potential_kernel((0, 0))), 1e-15)
    check("potential kernel a(e1)-1", abs(potential_kernel((1, 0)) - 1.0), 1e-6)

    rng = seed_stream(7)
    pairs = [((1, 2), (5, 3)), ((4, 4), (2, 6)), ((7, 1), (1, 7))]
    rep = max(abs(green_via_kernel(op, x, y) - op.column(x)[op.domain.index(y)])
              for x, y in pairs)
    check("kernel representation (N=8)", rep, 1e-7)

    V = make_box(8)
    keep = ~((V.vertices[:, 0] == 4) & (V.vertices[:, 1] == 4))
    U = LatticeDomain(V.vertices[keep], scale=V.scale, shape="punctured")
    hU, phi = gibbs_markov_split(V, U, rng)
    check("binding-field harmonicity", phi.max_laplacian_on_inner(), 1e-8)

    layers = concentric_decompose(2, make_centered_box(8))
    gap = layers.covariance_identity_gap()
    check("concentric telescoping (n=2)", gap, 1e-8)

    net = network.Network(
        ["a", "b", "c", "d"],
        [("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 0.5), ("c", "d", 1.5),
         ("b", "d", 1.0)])
    check("network duality", network.duality_check(net, "a", "d"), 1e-10)
    r_eff, sol = network.effective_resistance(net, ["a"], ["d"])
    check("path decomposition",
          abs(network.path_decompose(sol).reconstruct() - r_eff) / r_eff, 1e-8)
    check("cut decomposition",
          abs(1.0 / network.cut_decompose(sol).reconstruct() - r_eff) / r_eff,
          1e-8)

    from .sampler import sample_field
    h = sample_field(make_box(6), rng)
    ker = rwre.build_kernel(h, 0.7)
    check("detailed balance", ker.detailed_balance_residual(), 1e-12)
    lhs, rhs = rwre.commute_time(ker, (1, 1), (5, 5))
    check("commute identity", abs(lhs - rhs) / rhs, 1e-8)

    mu = lebesgue_measure(1)
    inc = sample_level_increment(1, 128, rng)
    stepped = gmc_step(mu, inc, 0.0)
    check("chaos beta=0 split", abs(stepped.total_mass() - 1.0), 1e-12)

    return checks


def _run_suite() -> int:
    failures = 0
    for name, value, tol, ok in _suite_checks():
        tag = "ok  " if ok else "FAIL"
        print(f"{tag} {name}: {value:.3e} (tol {tol:g})")
        failures += not ok
    print(f"{'all checks passed' if not failures else f'{failures} check(s) failed'}")
    return 0 if failures == 0 else 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _limit_threads(args.threads)
    if args.command == "suite":
        return _run_suite()
    try:
        config = _config_from_args(args)
        from .harness import run_experiment
        out = run_experiment(config)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    import json
    print(json.dumps(out["summary"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
