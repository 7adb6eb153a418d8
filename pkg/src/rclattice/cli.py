"""Command-line experiment runner.

    python -m rclattice run --config cfg.json [--seed N] [--jobs J] [--out DIR]
    python -m rclattice check --suite {couplings,domination,rc-identities,concavity,all}

Each run writes one directory containing ``manifest.json``, ``series.csv``,
``summary.jsonl`` and optionally ``snapshots/``. The output root defaults
to ``$RCLATTICE_OUT`` or ``./runs``. Exit codes: 0 success, 2 configuration
error, 3 check failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .lattice import from_descriptor
from .model import make_model

log = logging.getLogger("rclattice")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3
ALGORITHMS = ["heat-bath", "sw", "sweeny", "cftp", "bernoulli", "exact", "disorder",
              "check-couplings", "check-domination", "check-rc-identities", "check-concavity", "check-all"]

_grid_item = {"type": "array", "minItems": 1, "items": {"type": "number"}}

SCHEMA = {
    "type": "object",
    "required": ["seed", "algorithm"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "algorithm": {"enum": ALGORITHMS},
        "graph": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["box", "tree", "triangular", "custom"]},
                "d": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "sides": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "topology": {"enum": ["free", "periodic"]},
                "depth": {"type": "integer", "minimum": 0},
                "side": {"type": "integer", "minimum": 1},
                "n_vertices": {"type": "integer", "minimum": 1},
                "bonds": {"type": "array"},
            },
        },
        "model": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"enum": ["ising", "antiferro_ising", "potts", "hardcore",
                                             "widom_rowlinson"]}},
        },
        "boundary": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["free", "spin", "wired"]},
                "value": {"type": "integer"},
                "ring": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {k: _grid_item for k in ("beta", "p", "q", "lam", "h")},
            "additionalProperties": False,
        },
        "replicas": {"type": "integer", "minimum": 1},
        "sweeps": {"type": "integer", "minimum": 1},
        "burn_in": {"type": "integer", "minimum": 0},
        "thin": {"type": "integer", "minimum": 1},
        "structure": {"enum": ["bond", "site"]},
        "snapshots": {"type": "boolean"},
        "disorder": {"type": "object", "required": ["kind"]},
        "exact": {
            "type": "object",
            "properties": {"max_bonds": {"type": "integer", "minimum": 1, "maximum": 6}},
        },
    },
}

DEFAULTS = {
    "name": "run",
    "graph": {"kind": "box", "d": 2, "n": 8, "topology": "free"},
    "model": {"name": "ising"},
    "boundary": {"kind": "free"},
    "grid": {"beta": [0.4]},
    "replicas": 1,
    "sweeps": 100,
    "burn_in": 0,
    "thin": 1,
    "structure": "bond",
    "snapshots": False,
    "exact": {"max_bonds": 6},
}


class ConfigError(ValueError):
    pass


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) \
            and k not in ("graph", "model", "grid", "disorder") else copy.deepcopy(v)
    return out


def load_config(path, seed: int | None = None) -> dict:
    """Parse, validate and materialise defaults; errors name the offending field."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if cfg["algorithm"] == "disorder" and "disorder" not in raw:
        raise ConfigError("config error at disorder: required for algorithm 'disorder'")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def grid_points(cfg: dict) -> list[dict]:
    grid = cfg["grid"]
    keys = sorted(grid)
    pts = [{}]
    for k in keys:
        pts = [dict(p, **{k: v}) for p in pts for v in grid[k]]
    return pts


# ------------------------------------------------------------------ jobs

def _region_and_eta(cfg, g, alphabet):
    b = cfg["boundary"]
    if b["kind"] == "free":
        return None, None
    ring = b.get("ring", 1)
    if g.kind != "box":
        raise ConfigError("config error at boundary: spin boundaries need a box graph")
    inside = np.all((g.coords >= ring) & (g.coords < np.array(g.shape) - ring), axis=1)
    value = b.get("value", alphabet.values[-1])
    return inside, np.full(g.n_vertices, value)


def _model(cfg, point):
    params = {k: v for k, v in cfg["model"].items() if k != "name"}
    for k in ("h", "lam", "q"):
        if k in point:
            params[k] = int(point[k]) if k == "q" else point[k]
    return make_model(cfg["model"]["name"], beta=point.get("beta", 1.0), **params)


def _spin_observables(sigma, inter, inside, eta_value):
    from .sampler import magnetization
    region = np.flatnonzero(inside) if inside is not None else None
    vals = sigma if region is None else sigma[..., region]
    if inter.name == "potts":
        q = len(inter.alphabet)
        frac = np.stack([(vals == c).mean(axis=-1) for c in inter.alphabet.values], axis=-1)
        ref = frac.max(axis=-1) if eta_value is None else frac[..., eta_value - 1]
        return (q * ref - 1) / (q - 1)
    return magnetization(sigma, region)


def run_job(cfg: dict, gi: int, point: dict, replica: int) -> dict:
    """One (grid point, replica) job; returns rows for series and summary."""
    from .sampler import make_rng, heat_bath_batch, sw_batch, sweeny_batch, cftp, MeasurementSeries
    from .random_cluster import RCParams
    from .disorder import DisorderLaw, quenched_experiment
    rng = make_rng(cfg["seed"], gi, replica)
    g = from_descriptor(cfg["graph"])
    alg = cfg["algorithm"]
    sweeps, burn, thin = cfg["sweeps"], cfg["burn_in"], cfg["thin"]
    values: dict[str, list] = {}
    snaps = None
    if alg in ("heat-bath", "sw", "cftp"):
        alphabet, inter = _model(cfg, point)
        inside, eta = _region_and_eta(cfg, g, alphabet)
        ev = None if eta is None else int(eta[0])
        if alg == "heat-bath":
            out = heat_bath_batch(g, inter, inside, eta, 1, burn + sweeps, rng,
                                  record_every=thin, burn_in=burn)
            states = np.array([s[0] for s in out])
        elif alg == "sw":
            sigma = (np.full((1, g.n_vertices), ev) if ev is not None
                     else rng.choice(alphabet.array, size=(1, g.n_vertices)))
            recs = []
            sw_batch(g, alphabet.array, inter.beta, inside, eta, sigma, burn + sweeps, rng,
                     callback=lambda s, x, o: recs.append(x[0].copy()) if s >= burn and (s - burn) % thin == 0 else None)
            states = np.array(recs)
        else:
            states = cftp(g, inter, inside, eta, sweeps, rng)
        values["magnetization"] = _spin_observables(states, inter, inside, ev)
        snaps = states[-1:]
        if ev is not None:
            snaps = (snaps == ev).astype(np.uint8)
        else:
            snaps = None
    elif alg == "sweeny":
        q = point.get("q", 2.0)
        b = cfg["boundary"]
        params = RCParams(point.get("p", 0.5), q, "free" if b["kind"] == "free" else "wired")
        out = sweeny_batch(g, params, 1, burn + sweeps, rng, record_every=thin, burn_in=burn)
        rows = np.array([s[0] for s in out])
        values["open_fraction"] = rows.mean(axis=1)
        snaps = rows[-1:]
    elif alg == "bernoulli":
        from .percolation import crossing, label_clusters
        p = point.get("p", 0.5)
        st = cfg["structure"]
        size = g.n_bonds if st == "bond" else g.n_vertices
        cr, lg = [], []
        last = None
        for _ in range(sweeps):
            last = (rng.random(size) < p).astype(np.uint8)
            cr.append(float(crossing(g, last, "left-right", st)) if g.kind == "box" else np.nan)
            lg.append(label_clusters(g, last, structure=st).largest / g.n_vertices)
        values["crossing"] = cr
        values["largest_cluster"] = lg
        snaps = last[None, :]
    elif alg == "disorder":
        law = DisorderLaw.from_descriptor(cfg["disorder"])
        alphabet, inter = _model(cfg, point)
        inside, _ = _region_and_eta(cfg, g, alphabet)
        s = quenched_experiment(g, law, point.get("beta", 1.0), len(alphabet), cfg["replicas"],
                                sweeps, rng, burn_in=burn, region=inside, seed=cfg["seed"] * 1000 + gi)
        values["connection"] = [r["connection"] for r in s.records]
        values["magnetization"] = [r["magnetization"] for r in s.records]
        summary = {"connection": {"mean": s.mean, "stderr": s.stderr, "between_var": s.between_var,
                                  "within_var": s.within_var, "n": cfg["replicas"],
                                  "pbar": law.pbar(point.get("beta", 1.0)),
                                  "punder": law.punder(point.get("beta", 1.0), len(alphabet))}}
        return {"gi": gi, "point": point, "replica": replica, "values": values,
                "summary": summary, "snapshot": None}
    else:
        raise ConfigError(f"config error at algorithm: {alg!r} is not a sampling job")
    series = MeasurementSeries(list(values), {k: np.asarray(v, float) for k, v in values.items()},
                               thin, burn)
    return {"gi": gi, "point": point, "replica": replica, "values": {k: np.asarray(v, float).tolist() for k, v in values.items()},
            "summary": series.summary(), "snapshot": None if snaps is None else np.asarray(snaps).tolist()}


def _exact_rows(cfg: dict) -> list[dict]:
    from .checks import es_marginal_deviation, small_graphs
    rows = []
    graphs = small_graphs(cfg["exact"]["max_bonds"])
    for gi, point in enumerate(grid_points(cfg)):
        q = int(point.get("q", 2))
        beta = point.get("beta", 0.5)
        for k, g in enumerate(graphs):
            rows.append({"grid_index": gi, "graph": k, "n_vertices": g.n_vertices, "n_bonds": g.n_bonds,
                         "beta": beta, "q": q, "max_deviation": es_marginal_deviation(g, beta, q)})
    return rows


# ------------------------------------------------------------------ output

def _finite(rec: dict) -> dict:
    """Non-finite floats become null so every line is strict JSON."""
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in rec.items()}


def _write_run(out_dir: Path, cfg: dict, results: list[dict]) -> None:
    if cfg["algorithm"] == "exact":
        rows = results
        cols = list(rows[0])
        with open(out_dir / "series.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
        worst = max(r["max_deviation"] for r in rows)
        with open(out_dir / "summary.jsonl", "w") as fh:
            fh.write(json.dumps({"observable": "max_deviation", "max": worst, "n_graphs": len(rows)},
                                sort_keys=True) + "\n")
        return
    keys = sorted(cfg["grid"])
    names = list(results[0]["values"])
    with open(out_dir / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_index", *keys, "replica", "index", *names])
        for r in results:
            n = len(next(iter(r["values"].values())))
            for i in range(n):
                # disorder jobs carry one row per replica
                rep = i if cfg["algorithm"] == "disorder" else r["replica"]
                w.writerow([r["gi"], *[repr(float(r["point"][k])) for k in keys], rep, i,
                            *[repr(float(r["values"][m][i])) for m in names]])
    with open(out_dir / "summary.jsonl", "w") as fh:
        for r in results:
            for obs, s in r["summary"].items():
                rec = {"grid_index": r["gi"], **r["point"], "replica": r["replica"],
                       "observable": obs, **s, "seed": cfg["seed"]}
                fh.write(json.dumps(_finite(rec), sort_keys=True) + "\n")
    if cfg["snapshots"]:
        from .percolation import write_configs
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir()
        g = from_descriptor(cfg["graph"])
        for r in results:
            if r["snapshot"] is not None:
                st = "bond" if cfg["algorithm"] in ("sweeny",) or (cfg["algorithm"] == "bernoulli" and cfg["structure"] == "bond") else "site"
                write_configs(snap_dir / f"g{r['gi']}_r{r['replica']}.txt", g, st,
                              np.array(r["snapshot"], dtype=np.uint8))


def _out_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("RCLATTICE_OUT", "runs"))


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    if cfg["algorithm"].startswith("check-"):
        return _run_check(cfg["algorithm"][len("check-"):], _out_root(args.out))
    root = _out_root(args.out)
    root.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    final = root / f"{cfg['name']}-{digest[:12]}"
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=root))
    try:
        if cfg["algorithm"] == "exact":
            results = _exact_rows(cfg)
        else:
            reps = 1 if cfg["algorithm"] == "disorder" else cfg["replicas"]
            jobs = [(cfg, gi, pt, r) for gi, pt in enumerate(grid_points(cfg)) for r in range(reps)]
            if args.jobs > 1:
                with ProcessPoolExecutor(args.jobs) as ex:
                    results = list(ex.map(run_job, *zip(*jobs)))
            else:
                results = [run_job(*j) for j in jobs]
        _write_run(tmp, cfg, results)
        manifest = {"config": cfg, "config_hash": digest, "version": __version__, "seed": cfg["seed"],
                    "numpy": np.__version__}
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if final.exists():
            shutil.rmtree(final)
        tmp.rename(final)
    except ConfigError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(final)
    return EXIT_OK


def _run_check(suite: str, out: Path | None = None) -> int:
    from .checks import run_suite
    items = run_suite(suite)
    for it in items:
        print(it.line())
    failed = [it for it in items if not it.passed]
    print(f"{len(items) - len(failed)}/{len(items)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_check(args) -> int:
    return _run_check(args.suite)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rclattice", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=None, help="output root (default $RCLATTICE_OUT or ./runs)")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("check", help="run exhaustive verification suites")
    c.add_argument("--suite", default="all", choices=["couplings", "domination", "rc-identities",
                                                       "concavity", "all"])
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
