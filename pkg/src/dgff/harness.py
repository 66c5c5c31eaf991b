"""Experiment orchestration: configs, estimators, reproducible runs.

An experiment is a named function taking an :class:`ExperimentConfig`
and returning a summary dict plus optional CSV tables.  ``run_experiment``
writes everything to the output directory together with a manifest that
echoes the config and a content hash, so a run can be reproduced and
verified byte-for-byte from the manifest alone.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import brw as brw_mod
from . import chaos as chaos_mod
from . import extremes, network, rwre
from .green import GreenOperator, green_matrix
from .lattice import make_box, parse_domain
from .sampler import sample_batch, seed_stream, write_fields

SCHEMA_VERSION = 1


def _parse_value(text: str):
    """int, float, comma list, or bare string — in that order of preference."""
    text = text.strip()
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


@dataclass
class ExperimentConfig:
    name: str
    params: dict = dc_field(default_factory=dict)
    seed: int = 0
    reps: int = 1
    out_dir: str = "."

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("need reps >= 1")

    def replica_rng(self, index: int, *extra: int) -> np.random.Generator:
        """Deterministic per-replica stream from (master seed, index)."""
        return seed_stream(self.seed, index, *extra)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "seed": self.seed,
                "reps": self.reps, "out_dir": str(self.out_dir)}


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a plain ``key=value`` config file (# starts a comment)."""
    fields = {"params": {}}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (want key=value): {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if key in ("name", "out_dir"):
            fields[key] = val.strip()
        elif key in ("seed", "reps"):
            fields[key] = int(val)
        else:
            fields["params"][key] = _parse_value(val)
    fields.update(overrides)
    if "name" not in fields:
        raise ValueError("config must set name=<experiment>")
    return ExperimentConfig(**fields)


# ---------------------------------------------------------------------------
# estimators


@dataclass
class EstimatorSummary:
    mean: float
    variance: float | None
    se: float | None
    reps: int
    quantiles: dict | None = None
    ci: tuple | None = None

    def to_dict(self) -> dict:
        d = {"mean": self.mean, "variance": self.variance, "se": self.se,
             "reps": self.reps}
        if self.quantiles is not None:
            d["quantiles"] = {str(q): v for q, v in self.quantiles.items()}
        if self.ci is not None:
            d["ci95"] = list(self.ci)
        return d


def estimate(samples, quantiles=None, bootstrap: bool = False,
             rng: np.random.Generator | None = None,
             resamples: int = 1000) -> EstimatorSummary:
    """Mean / variance / s.e. of a replica array.

    With one replica the spread is unknowable, so variance and s.e. are
    None.  ``bootstrap=True`` adds a 95% percentile CI for the mean.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    if n == 1:
        return EstimatorSummary(mean, None, None, 1)
    var = float(x.var(ddof=1))
    se = math.sqrt(var / n)
    qs = None
    if quantiles is not None:
        vals = np.quantile(x, list(quantiles))
        qs = {float(q): float(v) for q, v in zip(quantiles, vals)}
    ci = None
    if bootstrap:
        if rng is None:
            rng = np.random.default_rng(0)
        idx = rng.integers(0, n, size=(resamples, n))
        means = x[idx].mean(axis=1)
        ci = (float(np.quantile(means, 0.025)), float(np.quantile(means, 0.975)))
    return EstimatorSummary(mean, var, se, n, qs, ci)


def log_log_slope(sizes, values) -> float:
    """Least-squares slope of log(values) against log(sizes)."""
    xs = np.log(np.asarray(sizes, dtype=float))
    ys = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# experiments

EXPERIMENTS: dict = {}


def experiment(name: str):
    def register(fn):
        EXPERIMENTS[name] = fn
        return fn
    return register


def _domain_from(config: ExperimentConfig):
    spec = config.get("domain")
    if spec is not None:
        return parse_domain(str(spec))
    return make_box(int(config.get("N", 16)))


@experiment("green-column")
def _green_column(config: ExperimentConfig):
    dom = _domain_from(config)
    op = GreenOperator(dom)
    x = config.get("x")
    if x is None:
        x = tuple(int(round(v)) for v in dom.vertices.mean(axis=0))
        if dom.index_of(np.asarray([x]))[0] < 0:
            x = tuple(dom.vertices[0])
    else:
        x = tuple(int(v) for v in (x if isinstance(x, (list, tuple)) else [x, x]))
    col = op.column(x)
    rows = [[int(v[0]), int(v[1]), float(g)] for v, g in zip(dom.vertices, col)]
    summary = {
        "domain_size": len(dom),
        "source": list(x),
        "green_diagonal": float(col[dom.index(x)]),
    }
    return {"summary": summary,
            "tables": {"column": (["x", "y", "green"], rows)}}


@experiment("sample-fields")
def _sample_fields(config: ExperimentConfig):
    dom = _domain_from(config)
    op = GreenOperator(dom)
    batch = sample_batch(op, config.replica_rng(0), config.reps)
    path = Path(config.out_dir) / "fields.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_fields(path, dom, batch)
    mx = batch.max(axis=1)
    summary = {
        "domain_size": len(dom),
        "reps": config.reps,
        "fields_file": path.name,
        "max": estimate(mx).to_dict() if config.reps > 1 else {"mean": float(mx.mean())},
        "mean_value": float(batch.mean()),
    }
    return {"summary": summary, "tables": {}}


@experiment("levelset-exponent")
def _levelset_exponent(config: ExperimentConfig):
    lam = float(config.get("lam", 0.2))
    if not 0.0 < lam < 1.0:
        raise ValueError("need 0 < lam < 1")
    ns = config.get("ns", [64, 128, 256, 512])
    ns = [int(n) for n in (ns if isinstance(ns, list) else [ns])]
    counts = {}
    rows = []
    for i, n in enumerate(ns):
        op = GreenOperator(make_box(n))
        thr = extremes.a_N(n, lam)
        batch_counts = []
        rng = config.replica_rng(i)
        done = 0
        while done < config.reps:
            take = min(64, config.reps - done)
            h = sample_batch(op, rng, take)
            batch_counts.append((h >= thr).sum(axis=1))
            done += take
        counts[n] = np.concatenate(batch_counts)
        est = estimate(counts[n])
        rows.append([n, est.mean, est.se, extremes.K_N(n, thr)])
    means = [counts[n].mean() for n in ns]
    slope = log_log_slope(ns, means)
    rng = config.replica_rng(10**6)
    slopes = []
    for _ in range(200):
        bs = [counts[n][rng.integers(0, len(counts[n]), len(counts[n]))].mean()
              for n in ns]
        slopes.append(log_log_slope(ns, bs))
    summary = {
        "lam": lam,
        "ns": ns,
        "slope": slope,
        "slope_ci95": [float(np.quantile(slopes, 0.025)),
                       float(np.quantile(slopes, 0.975))],
        "target_slope": 2.0 * (1.0 - lam**2),
    }
    return {"summary": summary,
            "tables": {"counts": (["N", "mean_size", "se", "K_N"], rows)}}


@experiment("max-stats")
def _max_stats(config: ExperimentConfig):
    ns = config.get("ns", [64, 128])
    ns = [int(n) for n in (ns if isinstance(ns, list) else [ns])]
    rows = []
    for i, n in enumerate(ns):
        op = GreenOperator(make_box(n))
        mx = []
        rng = config.replica_rng(i)
        done = 0
        while done < config.reps:
            take = min(64, config.reps - done)
            mx.append(sample_batch(op, rng, take).max(axis=1))
            done += take
        mx = np.concatenate(mx)
        med = float(np.median(mx))
        rows.append([n, float(mx.mean()), med, extremes.m_N(n),
                     med - extremes.m_N(n)])
    summary = {"ns": ns,
               "centered_medians": {str(r[0]): r[4] for r in rows}}
    return {"summary": summary,
            "tables": {"max": (["N", "mean_max", "median_max", "m_N",
                                "median_minus_m_N"], rows)}}


@experiment("brw-max")
def _brw_max(config: ExperimentConfig):
    b = int(config.get("b", 2))
    depths = config.get("n", [10])
    depths = [int(d) for d in (depths if isinstance(depths, list) else [depths])]
    rows = []
    for i, n in enumerate(depths):
        stats = brw_mod.brw_max_stats(b, n, config.reps, config.replica_rng(i))
        rows.append([n, stats["mean_max"], stats["m_tilde"],
                     stats["centered_mean"], stats["se"]])
    summary = {"b": b, "depths": depths,
               "centered_means": {str(r[0]): r[3] for r in rows}}
    return {"summary": summary,
            "tables": {"brw": (["n", "mean_max", "m_tilde", "centered_mean",
                                "se"], rows)}}


@experiment("chaos-mass")
def _chaos_mass(config: ExperimentConfig):
    levels = int(config.get("levels", 4))
    lam = float(config.get("lam", 0.3))
    radius = str(config.get("radius", "cell"))
    masses = np.empty(config.reps)
    for i in range(config.reps):
        mu = chaos_mod.hierarchical_chaos(levels, lam, config.replica_rng(i),
                                          radius=radius)
        masses[i] = mu.total_mass()
    est = estimate(masses, bootstrap=config.reps > 1,
                   rng=config.replica_rng(10**6))
    summary = {
        "levels": levels, "lam": lam, "radius": radius,
        "total_mass": est.to_dict(),
        "expected_mass": chaos_mod.expected_mass(levels, lam, radius=radius),
    }
    return {"summary": summary, "tables": {}}


@experiment("resist")
def _resist(config: ExperimentConfig):
    path = config.get("net")
    if path is None:
        raise ValueError("resist experiment needs net=<file>")
    net = network.load_network(path)
    u = _parse_terminal(config.get("u", net.labels[0]))
    v = _parse_terminal(config.get("v", net.labels[-1]))
    r_eff, sol = network.effective_resistance(net, [u], [v])
    gap = network.duality_check(net, u, v)
    paths = network.path_decompose(sol)
    cuts = network.cut_decompose(sol)
    summary = {
        "nodes": net.n, "edges": net.n_edges,
        "u": _fmt_terminal(u), "v": _fmt_terminal(v),
        "r_eff": r_eff,
        "c_eff": 1.0 / r_eff,
        "duality_gap": gap,
        "path_reconstruction": paths.reconstruct(),
        "cut_reconstruction": cuts.reconstruct(),
        "path_count": len(paths.items),
        "cut_count": len(cuts.items),
    }
    return {"summary": summary, "tables": {}}


def _parse_terminal(t):
    if isinstance(t, (list, tuple)):
        return tuple(int(v) for v in t)
    if isinstance(t, (int, np.integer)):
        return str(t)  # file labels are parsed as strings
    if isinstance(t, str):
        return network._parse_label(t)
    return t


def _fmt_terminal(t):
    return list(t) if isinstance(t, tuple) else t


@experiment("walk-exponents")
def _walk_exponents(config: ExperimentConfig):
    from .sampler import sample_field
    beta = float(config.get("beta", 0.5 * rwre.BETA_C))
    n = int(config.get("N", 16))
    steps = int(config.get("steps", 4 * n * n))
    dom = make_box(n)
    rows = []
    for i in range(config.reps):
        rng = config.replica_rng(i)
        h = sample_field(dom, rng)
        ker = rwre.build_kernel(h, beta)
        center = (n // 2, n // 2)
        t_exit = rwre.expected_exit_time(ker, center, dom.vertices)
        sim = rwre.walk_simulate(ker, center, steps, rng, reps=32)
        rows.append([i, t_exit, sim["mean_sq_displacement"]])
    t_mean = float(np.mean([r[1] for r in rows]))
    summary = {
        "beta": beta, "N": n, "reps": config.reps,
        "mean_exit_time": t_mean,
        "theta_at_beta": rwre.theta_exponent(beta),
    }
    return {"summary": summary,
            "tables": {"walk": (["replica", "expected_exit_time",
                                 "mean_sq_displacement"], rows)}}


# ---------------------------------------------------------------------------
# runner


def run_experiment(config: ExperimentConfig) -> dict:
    """Dispatch, write outputs + manifest, return the summary."""
    if config.name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {config.name!r}; "
                         f"known: {sorted(EXPERIMENTS)}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = EXPERIMENTS[config.name](config)
    summary = result.get("summary", {})
    tables = result.get("tables", {})
    digest = hashlib.sha256()
    outputs = []

    def emit(name: str, data: bytes):
        (out / name).write_bytes(data)
        outputs.append(name)
        digest.update(name.encode())
        digest.update(data)

    emit(f"{config.name}.json",
         (json.dumps(summary, indent=2, sort_keys=True) + "\n").encode())
    for tname, (header, rows) in sorted(tables.items()):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        emit(f"{config.name}.{tname}.csv", buf.getvalue().encode())
    for fname in sorted(summary.get("fields_file", "").split()):
        if fname and (out / fname).exists():
            digest.update(fname.encode())
            digest.update((out / fname).read_bytes())
            outputs.append(fname)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": config.name,
        "config": config.to_dict(),
        "outputs": outputs,
        "content_hash": digest.hexdigest(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"summary": summary, "manifest": manifest}
