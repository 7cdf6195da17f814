"""Command-line interface: ``mpmix fit | simulate | benchmark | ari``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .data import DataError, ModelError, load_dataset, schema_of, write_csv
from .distributions import InvalidParameterError, default_priors, load_priors
from .evaluation import adjusted_rand_index
from .selection import SearchConfig

log = logging.getLogger("mpmix")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

FIT_DEFAULTS = {
    "criterion": "bic",
    "bmax": 3,
    "gmax": 3,
    "restarts": None,
    "max_iter": 500,
    "tol": 1e-6,
    "seed": 0,
    "threads": None,
    "data": None,
    "schema": None,
    "priors": None,
    "out": None,
    "top": 10,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _merge(defaults: dict, config: dict, args: argparse.Namespace) -> dict:
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = {**defaults, **config}
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


# ---------------------------------------------------------------------------
# fit


def _partitions_csv(path: Path, z) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"block{b + 1}" for b in range(z.B)])
        for row in zip(*z.to_lists()):
            w.writerow(row)


def cmd_fit(args) -> int:
    from .bic import search_bic
    from .micl import search_micl

    cfg = _merge(FIT_DEFAULTS, _load_config(args.config), args)
    if cfg["criterion"] not in ("bic", "micl"):
        raise UsageError(f"criterion must be bic or micl, got {cfg['criterion']!r}")
    if not cfg["data"]:
        raise UsageError("a data file is required (--data or the config's \"data\" key)")
    restarts = cfg["restarts"] or (20 if cfg["criterion"] == "bic" else 50)
    try:
        search = SearchConfig(cfg["bmax"], cfg["gmax"], restarts, cfg["max_iter"], cfg["tol"], cfg["seed"], cfg["threads"] or 0)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data = load_dataset(cfg["data"], cfg["schema"])
    if cfg["criterion"] == "bic":
        ranked = search_bic(data, search)
    else:
        prior = load_priors(cfg["priors"], data) if cfg["priors"] else default_priors(data)
        ranked = search_micl(data, search, prior)
    table = ranked.table(data, top=cfg["top"])
    print(table)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "ranked.json", ranked.to_dict(data))
        (out / "table.txt").write_text(table + "\n", encoding="utf-8")
        best = ranked.best.fit
        _partitions_csv(out / "partitions.csv", best.map_z if hasattr(best, "map_z") else best.z_star)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    from .simulation import SimScenario, sample_scenario

    try:
        scenario = SimScenario.named(args.scenario, args.n, args.rho, 1)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sample = sample_scenario(scenario, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(sample.data, out / "data.csv")
    _write_json(out / "schema.json", schema_of(sample.data))
    _write_json(out / "truth.json", {
        "scenario": {"difficulty": scenario.tag, "delta": scenario.delta, "rho": scenario.rho, "n": scenario.n, "seed": args.seed},
        "spec": sample.true_spec.to_dict(),
        "partitions": sample.true_z.to_lists(),
    })
    _partitions_csv(out / "partitions.csv", sample.true_z)
    print(f"wrote {scenario.n} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark

BENCH_DEFAULTS = {
    "scenarios": [{"difficulty": "easy", "n": 200, "rho": 0.0}],
    "criteria": ["bic", "micl"],
    "replicates": 25,
    "bmax": 3,
    "gmax": 3,
    "bic_restarts": 20,
    "micl_restarts": 50,
    "seed": 0,
    "threads": None,
}


def cmd_benchmark(args) -> int:
    from .simulation import BenchmarkConfig, SimScenario, cells_to_csv, run_benchmark

    cfg = _merge(BENCH_DEFAULTS, _load_config(args.config), args)
    try:
        scenarios = [
            SimScenario.named(s["difficulty"], int(s["n"]), float(s.get("rho", 0.0)), int(s.get("replicates", cfg["replicates"])))
            for s in cfg["scenarios"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad scenario entry: {exc}") from exc
    bad = set(cfg["criteria"]) - {"bic", "micl"}
    if bad:
        raise UsageError(f"unknown criteria {sorted(bad)}")
    bench = BenchmarkConfig(cfg["bmax"], cfg["gmax"], cfg["bic_restarts"], cfg["micl_restarts"],
                            seed=cfg["seed"], threads=cfg["threads"] or 0)
    cells, reps = run_benchmark(scenarios, cfg["criteria"], bench)
    text = cells_to_csv(cells)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ari


def _read_labels(path, column: int, header: bool) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if header:
        rows = rows[1:]
    try:
        return [r[column - 1].strip() for r in rows]
    except IndexError:
        raise DataError(f"{path}: some row has no column {column}") from None


def cmd_ari(args) -> int:
    a = _read_labels(args.labels_a, args.column, args.header)
    b = _read_labels(args.labels_b, args.column, args.header)
    if len(a) != len(b):
        raise DataError(f"label files differ in length ({len(a)} and {len(b)})")
    print(repr(float(adjusted_rand_index(a, b))))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpmix", description="Multiple-partition mixture models for mixed-type data.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    f = sub.add_parser("fit", help="search block structures and rank them by BIC or MICL")
    f.add_argument("--data", help="CSV file with a header row")
    f.add_argument("--schema", help="JSON mapping column names to variable kinds")
    f.add_argument("--config", help="JSON run configuration; flags override it")
    f.add_argument("--criterion", choices=["bic", "micl"])
    f.add_argument("--bmax", type=int, help="largest number of blocks (default 3)")
    f.add_argument("--gmax", type=int, help="largest number of components per block (default 3)")
    f.add_argument("--restarts", type=int, help="random starts per candidate (default 20 for bic, 50 for micl)")
    f.add_argument("--max-iter", dest="max_iter", type=int, help="EM iteration cap (default 500)")
    f.add_argument("--tol", type=float, help="relative EM tolerance (default 1e-6)")
    f.add_argument("--seed", type=int, help="master seed (default 0)")
    f.add_argument("--priors", help="JSON prior overrides used by micl")
    f.add_argument("--threads", type=int, help="worker processes (default: MPMIX_THREADS or 1)")
    f.add_argument("--top", type=int, help="rows of the printed table (default 10)")
    f.add_argument("--out", help="directory for ranked.json, table.txt and partitions.csv")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="draw one sample of the three-block simulation design")
    s.add_argument("--scenario", required=True, choices=["easy", "interm", "hard"])
    s.add_argument("--rho", type=float, default=0.0, help="within-component copula correlation")
    s.add_argument("--n", type=int, default=200, help="number of rows")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="replicate the simulation study and write a metrics table")
    b.add_argument("--config", help="JSON benchmark configuration")
    b.add_argument("--replicates", type=int, help="replicates per scenario without their own count")
    b.add_argument("--seed", type=int, help="base seed; replicate r uses seed XOR r")
    b.add_argument("--threads", type=int, help="worker processes (default: MPMIX_THREADS or 1)")
    b.add_argument("--out", help="CSV output path")
    b.set_defaults(func=cmd_benchmark)

    a = sub.add_parser("ari", help="adjusted Rand index between two label files")
    a.add_argument("labels_a")
    a.add_argument("labels_b")
    a.add_argument("--column", type=int, default=1, help="1-based column holding the labels")
    a.add_argument("--header", action="store_true", help="skip the first row of each file")
    a.set_defaults(func=cmd_ari)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mpmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelError, InvalidParameterError, FileNotFoundError) as exc:
        print(f"mpmix: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
