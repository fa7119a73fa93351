"""Batch experiment runner: grid sweeps, persistence, thresholds.

Configurations are TOML files with a [grid] table (d, p, gamma lists) and a
[run] table (samples, truncation, seeding, mode).  Results land in the
output directory as

* metrics.csv   one row per grid point, canonical grid order, schema below
* rows.json     the same rows keyed by grid point (crash-resume state)
* manifest.json config hash, package version, per-point status and timing
* samples/      optional per-sample JSON-lines streams

Reruns with an identical configuration are byte-identical in metrics.csv;
completed points found in rows.json are not recomputed.  Every grid point is
seeded as SeedSequence((master_seed, d, bits(p), bits(gamma))), so single
points can be reproduced in isolation.

Exit codes: 0 success, 2 configuration error, 3 every grid point failed,
4 partial failure (failures are listed in the manifest and the run
continues past them).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .channel import ErrorChannelParams
from .lattice import build_layout, syndrome_key
from .metrics import (
    MetricsFault,
    coherent_information,
    entanglement_statistics,
    exhaustive_means,
    exhaustive_observables,
    logical_coherence,
    logical_error_rate,
    relative_entropy,
)
from .mwpm import mwpm_error_rate
from .sampler import SamplingFault, records_to_jsonl, sample_batch
from .transfer import z_matrix

CSV_SCHEMA_VERSION = "cohsurf-metrics-1"

CSV_COLUMNS = [
    "schema",
    "d",
    "p",
    "gamma",
    "mode",
    "n_samples",
    "p_logical",
    "p_logical_sem",
    "p_mwpm",
    "p_mwpm_sem",
    "relative_entropy",
    "relative_entropy_sem",
    "coherent_information",
    "coherent_information_sem",
    "logical_coherence",
    "logical_coherence_sem",
    "entropy_mean",
    "entropy_sem",
    "entropy_std",
    "chi_max",
    "svd_cutoff",
    "master_seed",
    "clamp_events",
    "retries",
    "excluded",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    d_values: tuple[int, ...]
    p_values: tuple[float, ...]
    gamma_values: tuple[float, ...]
    n_samples: int = 2000
    chi_max: int = 64
    svd_cutoff: float = 1e-12
    master_seed: int = 0
    mode: str = "sampled"
    workers: int = 1
    keep_samples: bool = False
    output_dir: str = "runs/out"

    def __post_init__(self):
        # normalize away numpy scalar types so hashes, point keys, and CSV
        # formatting are independent of how the grid was constructed
        object.__setattr__(self, "d_values", tuple(int(d) for d in self.d_values))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        if not self.d_values or any(d < 3 or d % 2 == 0 for d in self.d_values):
            raise ConfigError("grid.d must be odd integers >= 3")
        if not self.p_values or any(not 0 <= p < 1 for p in self.p_values):
            raise ConfigError("grid.p must lie in [0, 1)")
        if not self.gamma_values or any(not 0 <= g <= 1 for g in self.gamma_values):
            raise ConfigError("grid.gamma must lie in [0, 1]")
        if self.mode not in ("sampled", "exhaustive"):
            raise ConfigError("run.mode must be 'sampled' or 'exhaustive'")
        if self.mode == "exhaustive" and any(d != 3 for d in self.d_values):
            raise ConfigError("exhaustive mode is limited to d = 3")
        if self.n_samples < 1 or self.chi_max < 1 or self.workers < 1:
            raise ConfigError("n_samples, chi_max, workers must be positive")

    @classmethod
    def from_toml(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML: {e}") from e
        grid = doc.get("grid", {})
        run = doc.get("run", {})
        known = {
            "n_samples", "chi_max", "svd_cutoff", "master_seed", "mode",
            "workers", "keep_samples", "output_dir",
        }
        unknown = set(run) - known
        if unknown:
            raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
        try:
            return cls(
                d_values=tuple(int(d) for d in grid["d"]),
                p_values=tuple(float(p) for p in grid["p"]),
                gamma_values=tuple(float(g) for g in grid["gamma"]),
                **run,
            )
        except KeyError as e:
            raise ConfigError(f"missing [grid] key: {e}") from e
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def grid_points(self):
        for d in self.d_values:
            for gamma in self.gamma_values:
                for p in self.p_values:
                    yield d, p, gamma

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def point_seed(master_seed: int, d: int, p: float, gamma: float) -> np.random.SeedSequence:
    """Grid points are reproducible in isolation: seed from the coordinates."""
    p_bits = int(np.float64(p).view(np.uint64))
    g_bits = int(np.float64(gamma).view(np.uint64))
    return np.random.SeedSequence((int(master_seed), int(d), p_bits, g_bits))


def _point_key(d: int, p: float, gamma: float, mode: str) -> str:
    return f"d={d}_p={p!r}_gamma={gamma!r}_{mode}"


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(float(x))
    return str(x)


def run_grid_point(config: RunConfig, d: int, p: float, gamma: float) -> dict:
    """All metrics of one (d, p, gamma) point; the unit of parallel work."""
    layout = build_layout(d, d)
    params = ErrorChannelParams.uniform(p, gamma, layout.n_qubits)
    seed = point_seed(config.master_seed, d, p, gamma)
    row = {
        "schema": CSV_SCHEMA_VERSION,
        "d": d,
        "p": p,
        "gamma": gamma,
        "mode": config.mode,
        "chi_max": config.chi_max,
        "svd_cutoff": config.svd_cutoff,
        "master_seed": config.master_seed,
    }

    if config.mode == "exhaustive":
        obs = exhaustive_observables(
            layout, params, method="dense", chi_max=config.chi_max,
            svd_cutoff=config.svd_cutoff, with_entropy=True,
        )
        means = exhaustive_means(obs, coherent=(gamma == 1.0))
        p_mwpm = _exhaustive_mwpm(layout, params, config)
        row.update(
            n_samples=len(obs),
            p_logical=means["p_logical"],
            p_logical_sem=0.0,
            p_mwpm=p_mwpm,
            p_mwpm_sem=0.0,
            relative_entropy=means["relative_entropy"],
            relative_entropy_sem=0.0,
            coherent_information=means["coherent_information"],
            coherent_information_sem=0.0,
            logical_coherence=means["logical_coherence"],
            logical_coherence_sem=0.0,
            entropy_mean=means["entropy_mean"],
            entropy_sem=0.0,
            entropy_std=means["entropy_std"],
            clamp_events=0,
            retries=0,
            excluded=0,
        )
        return {"row": row, "records": None}

    records = sample_batch(
        layout, params, config.n_samples, seed,
        chi_max=config.chi_max, svd_cutoff=config.svd_cutoff,
    )
    lookup = {
        s: z_matrix(layout, params, s, method="mps", chi_max=config.chi_max,
                    svd_cutoff=config.svd_cutoff)
        for s in {r.syndrome for r in records}
    }
    pl = logical_error_rate(records, lookup)
    pm = mwpm_error_rate(layout, records, lookup)
    ic = coherent_information(records, lookup)
    gl = logical_coherence(records, lookup)
    ent, sigma = entanglement_statistics(records)
    if gamma == 1.0:
        srel_mean, srel_sem = math.nan, math.nan
    else:
        sr = relative_entropy(records, lookup)
        srel_mean, srel_sem = sr.mean, sr.sem
    row.update(
        n_samples=config.n_samples,
        p_logical=pl.mean,
        p_logical_sem=pl.sem,
        p_mwpm=pm.mean,
        p_mwpm_sem=pm.sem,
        relative_entropy=srel_mean,
        relative_entropy_sem=srel_sem,
        coherent_information=ic.mean,
        coherent_information_sem=ic.sem,
        logical_coherence=gl.mean,
        logical_coherence_sem=gl.sem,
        entropy_mean=ent.mean,
        entropy_sem=ent.sem,
        entropy_std=sigma,
        clamp_events=sum(r.clamp_events for r in records),
        retries=sum(r.retried for r in records),
        excluded=pl.excluded,
    )
    return {"row": row, "records": records}


def _exhaustive_mwpm(layout, params, config) -> float:
    import itertools

    from .mwpm import decoded_class

    total = 0.0
    for bits in itertools.product([0, 1], repeat=layout.n_z):
        s = frozenset(i for i, b in enumerate(bits) if b)
        zm = z_matrix(layout, params, s, method="dense")
        z00, z11 = zm.diagonals()
        zq = z00 if decoded_class(layout, s) == 0 else z11
        total += (z00 + z11) * (1 - zq / (z00 + z11))
    return total


def _run_point_task(args):
    config_dict, d, p, gamma = args
    config = RunConfig(**config_dict)
    try:
        out = run_grid_point(config, d, p, gamma)
        samples_text = None
        if config.keep_samples and out["records"] is not None:
            samples_text = records_to_jsonl(out["records"])
        return {"key": _point_key(d, p, gamma, config.mode), "row": out["row"],
                "samples": samples_text, "error": None}
    except (SamplingFault, MetricsFault, ValueError) as e:
        return {"key": _point_key(d, p, gamma, config.mode), "row": None,
                "samples": None, "error": f"{type(e).__name__}: {e}"}


def run(config: RunConfig) -> int:
    """Execute the full grid; returns the process exit code."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "rows.json"
    manifest_path = out_dir / "manifest.json"
    chash = config.config_hash()

    rows: dict[str, dict] = {}
    if rows_path.exists():
        stored = json.loads(rows_path.read_text())
        if stored.get("config_hash") == chash:
            rows = stored["rows"]

    manifest = {
        "config_hash": chash,
        "version": __version__,
        "config": asdict(config),
        "points": {},
        "failures": [],
    }

    pending = [
        (d, p, gamma)
        for d, p, gamma in config.grid_points()
        if _point_key(d, p, gamma, config.mode) not in rows
    ]
    tasks = [(asdict(config), d, p, gamma) for d, p, gamma in pending]
    t0 = time.time()

    def checkpoint():
        rows_path.write_text(
            json.dumps({"config_hash": chash, "rows": rows}, sort_keys=True)
        )

    n_failed = 0

    def consume(result):
        nonlocal n_failed
        key = result["key"]
        if result["error"] is not None:
            n_failed += 1
            manifest["failures"].append({"point": key, "error": result["error"]})
            manifest["points"][key] = {"status": "failed"}
            return
        rows[key] = result["row"]
        manifest["points"][key] = {"status": "done"}
        checkpoint()
        if result["samples"] is not None:
            sdir = out_dir / "samples"
            sdir.mkdir(exist_ok=True)
            (sdir / f"{key}.jsonl").write_text(result["samples"])

    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for result in pool.map(_run_point_task, tasks):
                consume(result)
    else:
        for task in tasks:
            consume(_run_point_task(task))

    manifest["wall_time_s"] = time.time() - t0
    checkpoint()
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    write_csv(out_dir / "metrics.csv", config, rows)

    if n_failed and n_failed == len(tasks):
        return 3
    if n_failed:
        return 4
    return 0


def write_csv(path, config: RunConfig, rows: dict[str, dict]):
    """Rows in canonical grid order with shortest-roundtrip float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for d, p, gamma in config.grid_points():
        key = _point_key(d, p, gamma, config.mode)
        if key not in rows:
            continue
        row = rows[key]
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# threshold estimation
# ---------------------------------------------------------------------------

def crossing_estimate(curves: dict[int, tuple[np.ndarray, np.ndarray]]) -> list[float]:
    """Pairwise curve crossings by linear interpolation.

    `curves` maps d to (p_values, y_values); returns one crossing per d pair
    that brackets a sign change of y_d1 - y_d2.
    """
    crossings = []
    ds = sorted(curves)
    for i, d1 in enumerate(ds):
        for d2 in ds[i + 1:]:
            p1, y1 = curves[d1]
            p2, y2 = curves[d2]
            common = np.intersect1d(p1, p2)
            if len(common) < 2:
                continue
            f1 = y1[np.searchsorted(p1, common)]
            f2 = y2[np.searchsorted(p2, common)]
            diff = f1 - f2
            sign = np.sign(diff)
            idx = np.flatnonzero(np.diff(sign) != 0)
            if len(idx) == 0:
                continue
            k = idx[0]
            # linear interpolation of the sign change
            x0, x1 = common[k], common[k + 1]
            y0, y1_ = diff[k], diff[k + 1]
            crossings.append(float(x0 - y0 * (x1 - x0) / (y1_ - y0)))
    return crossings


def threshold_scan(rows, metric: str, n_bootstrap: int = 200, seed: int = 0) -> dict:
    """Crossing estimate with a parametric-bootstrap confidence interval.

    `rows` are CSV-like dicts; the metric column and its _sem column drive
    the bootstrap.  Returns {"crossing", "ci_low", "ci_high", "pairs"} or
    {"crossing": None} when no pair of curves crosses in range.
    """
    by_d: dict[int, list[tuple[float, float, float]]] = {}
    for row in rows:
        d = int(row["d"])
        by_d.setdefault(d, []).append(
            (float(row["p"]), float(row[metric]), float(row[f"{metric}_sem"]))
        )
    if len(by_d) < 2:
        raise ConfigError("threshold scan needs at least 2 code distances")
    curves = {}
    sems = {}
    for d, pts in by_d.items():
        pts.sort()
        curves[d] = (np.array([x[0] for x in pts]), np.array([x[1] for x in pts]))
        sems[d] = np.array([x[2] for x in pts])

    center = crossing_estimate(curves)
    if not center:
        return {"crossing": None, "pairs": []}

    rng = np.random.default_rng(seed)
    boot = []
    for _ in range(n_bootstrap):
        jittered = {
            d: (curves[d][0], curves[d][1] + rng.normal(0, sems[d]))
            for d in curves
        }
        cs = crossing_estimate(jittered)
        if cs:
            boot.append(float(np.mean(cs)))
    lo, hi = (np.percentile(boot, [2.5, 97.5]) if boot else (math.nan, math.nan))
    return {
        "crossing": float(np.mean(center)),
        "ci_low": float(lo),
        "ci_high": float(hi),
        "pairs": center,
    }


# ---------------------------------------------------------------------------
# command-line interface
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    config = RunConfig.from_toml(args.config)
    if args.output_dir:
        config = RunConfig(**{**asdict(config), "output_dir": args.output_dir})
    if args.chi_max:
        config = RunConfig(**{**asdict(config), "chi_max": args.chi_max})
    if args.workers:
        config = RunConfig(**{**asdict(config), "workers": args.workers})
    return run(config)


def _cmd_threshold(args) -> int:
    with open(args.csv) as fh:
        rows = list(csv.DictReader(fh))
    if rows and rows[0]["schema"] != CSV_SCHEMA_VERSION:
        print(f"error: unexpected CSV schema {rows[0]['schema']}", file=sys.stderr)
        return 2
    result = threshold_scan(rows, args.metric, n_bootstrap=args.bootstrap, seed=args.seed)
    print(json.dumps(result, indent=1))
    if result["crossing"] is None:
        print("no crossing found in range", file=sys.stderr)
    return 0


def _cmd_oracle_check(args) -> int:
    """Exhaustive d=3 comparison of the circuit against the dense oracle."""
    import itertools

    from .oracle import exact_z_table

    layout = build_layout(3, 3)
    worst = 0.0
    grid_p = [0.02, 0.05, 0.1, 0.2, 0.3]
    grid_g = [0.0, 0.5, 0.9, 0.99, 1.0]
    for p in grid_p:
        for gamma in grid_g:
            params = ErrorChannelParams.uniform(p, gamma, 9)
            table = exact_z_table(layout, params)
            for bits in itertools.product([0, 1], repeat=4):
                s = frozenset(i for i, b in enumerate(bits) if b)
                zm = z_matrix(layout, params, s, method="dense")
                key = syndrome_key(s)
                for (q, qb), lc in [((0, 0), zm.z00), ((1, 1), zm.z11), ((0, 1), zm.z01)]:
                    want = table[(key, q, qb)]
                    got = lc.to_complex()
                    scale = max(abs(want), 1e-30)
                    worst = max(worst, abs(got - want) / scale)
    print(f"worst relative deviation: {worst:.3e}")
    if worst > args.tolerance:
        print("FAIL", file=sys.stderr)
        return 3
    print("OK")
    return 0


def _cmd_sample_dump(args) -> int:
    layout = build_layout(args.d, args.d)
    params = ErrorChannelParams.uniform(args.p, args.gamma, layout.n_qubits)
    records = sample_batch(
        layout, params, args.n, args.seed, chi_max=args.chi_max,
        collect_entropies=not args.no_entropies,
    )
    text = records_to_jsonl(records, path=args.output)
    if args.output is None:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cohsurf",
        description="surface-code simulation under coherent/incoherent bit-flip noise",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a grid sweep from a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--chi-max", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_thr = sub.add_parser("threshold", help="crossing estimate from a metrics CSV")
    p_thr.add_argument("csv")
    p_thr.add_argument("--metric", default="p_logical")
    p_thr.add_argument("--bootstrap", type=int, default=200)
    p_thr.add_argument("--seed", type=int, default=0)
    p_thr.set_defaults(func=_cmd_threshold)

    p_chk = sub.add_parser("oracle-check", help="d=3 circuit vs dense oracle")
    p_chk.add_argument("--tolerance", type=float, default=1e-10)
    p_chk.set_defaults(func=_cmd_oracle_check)

    p_dmp = sub.add_parser("sample-dump", help="stream sample records as JSON lines")
    p_dmp.add_argument("--d", type=int, default=3)
    p_dmp.add_argument("--p", type=float, default=0.1)
    p_dmp.add_argument("--gamma", type=float, default=0.5)
    p_dmp.add_argument("--n", type=int, default=10)
    p_dmp.add_argument("--seed", type=int, default=0)
    p_dmp.add_argument("--chi-max", type=int, default=64)
    p_dmp.add_argument("--no-entropies", action="store_true")
    p_dmp.add_argument("--output", default=None)
    p_dmp.set_defaults(func=_cmd_sample_dump)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
