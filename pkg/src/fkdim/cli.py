"""Command-line front end.

Subcommands: fk-dist, mdim, katok, local, verify.  Exit codes are 0 (ok),
1 (a verification check failed) and 2 (invalid input or runtime error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from fkdim import __version__
from fkdim.config import ConfigError, ExperimentConfig, dumps, load, parse_system, with_overrides
from fkdim.covering import InfeasibleCoverError
from fkdim.estimators import (
    RateCurve,
    katok_entropy_estimate,
    mdim_estimates,
    verify_theorem_1_1,
    verify_theorem_1_2,
    verify_theorem_1_3,
    _local_rows,
)
from fkdim.orbit_metrics import (
    DistanceMatrix,
    bowen_distance,
    fk_distance,
    max_match_size,
    mean_distance,
    orbit_distance_matrix,
)
from fkdim.systems import derive_seed, format_point, parse_point

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def fmt(x) -> str:
    """Locale-independent float text with 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


class Output:
    """Collects files in memory and writes them in a fixed order."""

    def __init__(self, directory: str):
        self.dir = Path(directory)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def write(self, cfg: ExperimentConfig | None, seeds: dict):
        self.dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            (self.dir / name).write_text(self.files[name], encoding="utf-8")
        manifest = {
            "config_hash": cfg.hash() if cfg else None,
            "tool_version": __version__,
            "master_seed": cfg.seed if cfg else None,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "cell_seeds": {k: seeds[k] for k in sorted(seeds)},
            "outputs": sorted(self.files),
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        if cfg is not None:
            (self.dir / "config.ini").write_text(dumps(cfg), encoding="utf-8")


def set_threads(requested: int | None):
    import numba

    n = requested or int(os.environ.get("FKDIM_THREADS", "0") or 0) or numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _tolerances(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in ("thm11", "thm12", "thm13_gap", "slope_low", "slope_high"):
            raise ConfigError(f"--tolerance expects KEY=VALUE with KEY in thm11, thm12, thm13_gap, "
                              f"slope_low, slope_high; got {item!r}")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"--tolerance {key}: {exc}") from exc
    return out


def resolve_config(args) -> ExperimentConfig:
    cfg = load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    return with_overrides(cfg, seed=args.seed, out=args.out, **_tolerances(args.tolerance))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _match_table(D: DistanceMatrix):
    """Match sizes using pairs < u and <= u, for every distinct entry u."""
    from fkdim import _kernels

    rows = []
    for u in np.unique(D.entries):
        lt = int(_kernels.match_size(D.entries, float(u), True))
        le = int(_kernels.match_size(D.entries, float(u), False))
        rows.append((float(u), lt, le, (D.n - le) / D.n))
    return rows


def cmd_fk_dist(args) -> int:
    out = sys.stdout
    if args.orbits:
        if len(args.orbits) != 2:
            raise ConfigError("--orbits takes exactly two comma-separated sequences")
        a, b = (np.array([float(v) for v in s.split(",")]) for s in args.orbits)
        if a.size != b.size:
            raise ConfigError("--orbits sequences must have equal length")
        pairs = [("orbits", DistanceMatrix(np.abs(a[:, None] - b[None, :])))]
    else:
        cfg = load(args.config) if args.config else None
        text = args.system or (cfg.system if cfg else None)
        if text is None:
            raise ConfigError("fk-dist needs --system, --config or --orbits")
        system = parse_system(text)
        if args.n is None or args.n < 1:
            raise ConfigError("fk-dist needs --n >= 1")
        if not args.pair:
            raise ConfigError("fk-dist needs at least one --pair X Y")
        pairs = []
        for x, y in args.pair:
            px, py = parse_point(system, x), parse_point(system, y)
            pairs.append((f"{format_point(px)} / {format_point(py)}", orbit_distance_matrix(system, px, py, args.n)))
    rows = [(i, label, D.n, fk_distance(D), bowen_distance(D), mean_distance(D)) for i, (label, D) in enumerate(pairs)]
    out.write(csv_text(["pair", "points", "n", "fk", "bowen", "mean"], rows))
    if args.table:
        for i, (_, D) in enumerate(pairs):
            out.write("\n")
            out.write(csv_text(["pair", "value", "match_size_lt", "match_size_le", "fbar_le"], [(i, *r) for r in _match_table(D)]))
    return EXIT_OK


def _gnuplot(kinds) -> str:
    plots = ", \\\n     ".join(
        f"'< grep ^{k}, mdim.csv' using (log(1/$2)):3 with linespoints title '{k}'" for k in kinds)
    return ("set datafile separator ','\nset xlabel 'log(1/eps)'\nset ylabel 'rate'\n"
            f"set key left top\nplot {plots}\n")


def cmd_mdim(args) -> int:
    cfg = resolve_config(args)
    system, plan = cfg.build_system(), cfg.build_plan()
    est = mdim_estimates(cfg.kinds, system, plan, cfg.eps, cfg.n_window, cfg.build_mistake(), cfg.flavor)
    rates, mdim = [], []
    for kind in cfg.kinds:
        e = est[kind]
        for row, ratio in zip(e.curve.rows, e.ratios):
            for n, count, method in row.counts:
                rates.append((kind, row.eps, n, count, method, math.log(count) / n))
            mdim.append((kind, row.eps, row.rate, row.fit.r2, ratio, e.slope))
    res = Output(cfg.out)
    res.add("rates.csv", csv_text(["metric_kind", "epsilon", "n", "count", "method", "log_count_over_n"], rates))
    res.add("mdim.csv", csv_text(["metric_kind", "epsilon", "rate", "r2", "ratio_rate_over_log_inv_eps", "slope"],
                                 mdim))
    if cfg.gnuplot:
        res.add("mdim.gp", _gnuplot(cfg.kinds))
    res.write(cfg, {"universe": derive_seed(plan.seed, "universe"), "extra": derive_seed(plan.seed, "universe", "extra")})
    return EXIT_OK


def cmd_katok(args) -> int:
    cfg = resolve_config(args)
    system, plan = cfg.build_system(), cfg.build_plan()
    res = Output(cfg.out)
    seeds = {}
    for i, m in enumerate(cfg.build_measures()):
        k = katok_entropy_estimate(system, m, cfg.delta, cfg.eps, cfg.n_window, plan)
        rows = [(cfg.delta, row.eps, n, count, row.rate) for row in k.curve.rows for n, count, _ in row.counts]
        name = "katok.csv" if i == 0 else f"katok_{i}.csv"
        res.add(name, csv_text(["delta", "epsilon", "n", "partial_count", "rate"], rows))
        seeds[f"measure:{m.name}"] = derive_seed(plan.seed, "measure", m.name)
    res.write(cfg, seeds)
    return EXIT_OK


def cmd_local(args) -> int:
    cfg = resolve_config(args)
    system, plan = cfg.build_system(), cfg.build_plan()
    probes = cfg.build_probes()
    if not probes:
        raise ConfigError("local.probes: at least one probe point is required")
    eps_grid = [cfg.local_eps] if cfg.local_eps is not None else list(cfg.eps)
    rows, seeds = [], {"universe": derive_seed(plan.seed, "universe")}
    global_rows = None
    for pid, x in enumerate(probes):
        table = _local_rows(system, x, eps_grid, cfg.radii, cfg.n_window, plan, pid, global_rows)
        if global_rows is None:
            # K = X is shared by every probe
            global_rows = RateCurve("fk", tuple(table[e][-1][1] for e in eps_grid))
        for eps in eps_grid:
            inf_rate = min(r.rate for _, r in table[eps])
            for rho, row in table[eps]:
                for n, count, _ in row.counts:
                    rows.append((pid, rho, eps, n, count, row.rate, inf_rate))
        for rho in cfg.radii:
            seeds[f"local:{pid}:{rho!r}"] = derive_seed(plan.seed, "local", pid, float(rho))
    res = Output(cfg.out)
    res.add("local.csv", csv_text(["probe_id", "radius", "epsilon", "n", "count", "rate", "inf_rate"], rows))
    res.write(cfg, seeds)
    return EXIT_OK


def cmd_verify(args) -> int:
    from fkdim import verification as V

    cfg = resolve_config(args)
    which = args.which
    if which == "oracles":
        reports = [V.oracle_suite(seed=cfg.seed), V.cover_oracle_suite(seed=cfg.seed)]
    elif which == "metrics":
        reports = [V.metric_suite(seed=cfg.seed)]
    elif which == "prop32":
        reports = [V.prop32_suite(seed=cfg.seed)]
    else:
        system, plan = cfg.build_system(), cfg.build_plan()
        if which == "thm11":
            slope_range = None
            if cfg.slope_low is not None or cfg.slope_high is not None:
                slope_range = (cfg.slope_low if cfg.slope_low is not None else -math.inf,
                               cfg.slope_high if cfg.slope_high is not None else math.inf)
            reports = [verify_theorem_1_1(system, plan, cfg.eps, cfg.n_window, cfg.build_mistake(), cfg.thm11,
                                          slope_range)]
        elif which == "thm12":
            reports = [verify_theorem_1_2(system, cfg.build_measures(), cfg.delta, plan, cfg.eps, cfg.n_window,
                                          cfg.thm12)]
        else:
            probes = cfg.build_probes()
            if not probes:
                raise ConfigError("local.probes: thm13 needs at least one probe point")
            reports = [verify_theorem_1_3(system, probes, cfg.eps, cfg.radii, plan, cfg.n_window, cfg.thm13_gap)]
    rows = []
    for rep in reports:
        for line in rep.lines():
            print(line)
        rows += [(rep.name, c.name, c.value, c.bound, c.passed) for c in rep.checks]
    res = Output(cfg.out)
    res.add(f"verify_{which}.csv", csv_text(["suite", "check", "value", "bound", "passed"], rows))
    res.write(cfg, {})
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text.replace("_", ""), 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI)")
    common.add_argument("--seed", type=_seed, help="master seed, overrides the config")
    common.add_argument("--threads", type=int, help="worker threads (default: FKDIM_THREADS or all cores)")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--tolerance", action="append", metavar="KEY=VALUE",
                        help="override a tolerance, e.g. thm11=0.2 (repeatable)")

    p = argparse.ArgumentParser(prog="fkdim", description="Feldman-Katok orbit metrics and mean-dimension estimates.")
    p.add_argument("--version", action="version", version=f"fkdim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fk-dist", parents=[common], help="FK, Bowen and mean distances of orbit pairs")
    f.add_argument("--system", help="system expression, e.g. 'doubling()'")
    f.add_argument("--n", type=int, help="orbit length")
    f.add_argument("--pair", nargs=2, action="append", metavar=("X", "Y"), help="point pair (repeatable)")
    f.add_argument("--orbits", nargs=2, metavar=("A", "B"),
                   help="two raw real-valued orbits 'a0,a1,...' compared with |a - b|")
    f.add_argument("--table", action="store_true", help="also print match sizes at every breakpoint")
    f.set_defaults(func=cmd_fk_dist)

    for name, func, helptext in (("mdim", cmd_mdim, "metric mean dimension estimates"),
                                 ("katok", cmd_katok, "FK Katok entropy estimates"),
                                 ("local", cmd_local, "FK local entropy estimates")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.set_defaults(func=func)

    v = sub.add_parser("verify", parents=[common], help="verification suites")
    v.add_argument("which", choices=["thm11", "thm12", "thm13", "prop32", "metrics", "oracles"])
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        set_threads(args.threads)
        return args.func(args)
    except (ConfigError, InfeasibleCoverError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
