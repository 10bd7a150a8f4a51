"""Command-line interface.

Subcommands: dist, rank, localize, normdim, tight, rareset, moments, alpha.
Flags can also be supplied through a JSON config file (--config); explicit
flags override file values.  Exit codes: 0 success, 2 configuration error,
3 when --assert is set and a report check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .errors import PadicBandError, ConfigError
from .groups import AbelianPGroup
from .harness import (
    ExperimentConfig,
    run_cokernel_distribution,
    run_localization,
    run_normalized_dim,
    run_rank_distribution,
    run_rare_set_probe,
    run_tightness_sweep,
)
from .moments import alpha_beta, moment_dp, moment_enumerate, moment_mc
from .ring import PrimePower
from .sampler import PrescriptionMask, band_mask

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERT = 3


def _add_common(sub: argparse.ArgumentParser, sweep: bool = False) -> None:
    sub.add_argument("--config", help="JSON file mirroring the flags; flags override it")
    sub.add_argument("--p", type=int)
    if sweep:
        sub.add_argument("--n", type=str, help="comma-separated n grid")
    else:
        sub.add_argument("--n", type=str, help="matrix dimension")
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--w", type=str, help="constant bandwidth (comma list for sweeps)")
    group.add_argument("--w-offset", type=int,
                       help="bandwidth rule w = ceil(log_p n) + offset")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--k-init", type=int)
    sub.add_argument("--k-max", type=int)
    sub.add_argument("--group", type=str, help='canonical group string, e.g. "2^[2,1]"')
    sub.add_argument("--mask", type=str, help="prescription mask file")
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--out", type=str, help="output path (default stdout)")
    sub.add_argument("--format", choices=("json", "csv"), default=None)
    sub.add_argument("--assert", dest="assert_checks", action="store_true",
                     help="exit 3 when a report check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padicband",
        description="cokernel statistics of random p-adic band matrices",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    specs = {
        "dist": "empirical cokernel distribution vs the limiting law",
        "rank": "empirical mod-p corank distribution vs the limiting law",
        "localize": "per-block localized-kernel indicators and independence",
        "normdim": "normalized kernel dimension across an n grid",
        "tight": "mean kernel size vs exact and analytic envelopes",
        "rareset": "union-bound probe for kernels meeting a small support set",
        "moments": "direct access to the moment engine",
        "alpha": "envelope recursion table",
    }
    for name, help_text in specs.items():
        sub = subs.add_parser(name, help=help_text)
        if name == "alpha":
            sub.add_argument("--config", help="JSON config file")
            sub.add_argument("--t", type=int)
            sub.add_argument("--q", type=float)
            sub.add_argument("--out", type=str)
            sub.add_argument("--format", choices=("json", "csv"), default=None)
            sub.add_argument("--assert", dest="assert_checks", action="store_true")
            continue
        _add_common(sub, sweep=name in ("normdim", "tight"))
        if name == "localize":
            sub.add_argument("--L", type=int, help="number of localization blocks")
        if name == "rareset":
            sub.add_argument("--s", type=int, help="support window size")
        if name == "moments":
            sub.add_argument("--method", choices=("enumerate", "dp", "mc"))
            sub.add_argument("--kind", choices=("hom", "sur"))
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    merged = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                merged.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}")
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None and value is not False:
            merged[key] = value
    return merged


def _parse_int_list(value) -> list:
    if isinstance(value, list):
        return [int(x) for x in value]
    return [int(tok) for tok in str(value).split(",") if tok.strip()]


def _experiment_config(command: str, opts: dict) -> ExperimentConfig:
    if "n" not in opts:
        raise ConfigError("--n is required")
    n_grid = _parse_int_list(opts["n"])
    w = opts.get("w")
    w_value, w_list = None, None
    if w is not None:
        parsed = _parse_int_list(w)
        if len(parsed) == 1:
            w_value = parsed[0]
        else:
            w_list = parsed
    cfg = ExperimentConfig(
        experiment=command,
        p=int(opts.get("p", 2)),
        n_grid=n_grid,
        w=w_value,
        w_offset=opts.get("w_offset"),
        w_list=w_list,
        trials=int(opts.get("trials", 1000)),
        seed=int(opts.get("seed", 0)),
        k_init=int(opts.get("k_init", 32)),
        k_max=int(opts.get("k_max", 1024)),
        groups=[opts["group"]] if opts.get("group") else [],
        L=int(opts.get("L", 2)),
        s=int(opts.get("s", 3)),
        jobs=int(opts.get("jobs", 1)),
    )
    return cfg.validate()


def _load_mask(path: str) -> PrescriptionMask:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens or (len(tokens) - 1) % 2 != 0:
        raise ConfigError(f"malformed mask file {path}: expected 'n' then 'i j' pairs")
    n = int(tokens[0])
    pairs = [(int(tokens[t]), int(tokens[t + 1])) for t in range(1, len(tokens), 2)]
    return PrescriptionMask(n, pairs=pairs)


def _run_moments(opts: dict) -> dict:
    method = opts.get("method", "dp")
    kind = opts.get("kind", "sur")
    group = AbelianPGroup.from_string(opts.get("group", f"{opts.get('p', 2)}^[1]"))
    n = _parse_int_list(opts.get("n", "8"))[0]
    mask = _load_mask(opts["mask"]) if opts.get("mask") else None
    w = None
    if opts.get("w") is not None:
        w = _parse_int_list(opts["w"])[0]
    if mask is None and w is None:
        raise ConfigError("moments needs --w or --mask")
    if method == "enumerate":
        mv = moment_enumerate(group, n, w=w, mask=mask, kind=kind)
    elif method == "dp":
        if mask is not None:
            raise ConfigError("the dp route is band-only; use enumerate or mc for masks")
        mv = moment_dp(group, n, w, kind=kind)
    else:
        the_mask = mask if mask is not None else band_mask(n, min(w, n - 1) if n > 1 else 0)
        mv = moment_mc(
            group, the_mask, PrimePower(group.p, int(opts.get("k_init", 32))),
            seed=int(opts.get("seed", 0)), trials=int(opts.get("trials", 1000)),
            kind=kind, K_init=int(opts.get("k_init", 32)), K_max=int(opts.get("k_max", 1024)),
        )
    report = mv.to_json_dict()
    report["experiment"] = "moments"
    report["trials"] = mv.trials
    report["precision_limit"] = mv.precision_limit_count
    report["checks"] = {}
    report["passed"] = True
    return report


def _csv_rows(report: dict):
    exp = report.get("experiment")
    if exp == "dist":
        return report["classes"]
    if exp == "rank":
        return report["coranks"]
    if exp in ("normdim", "tight"):
        return report["sweep_rows"]
    if exp == "localize":
        return [
            {"block": i + 1, **entry} for i, entry in enumerate(report["per_block"])
        ]
    if exp == "rareset":
        keys = ("n", "w", "s", "union_bound", "frequency", "sigma", "trials")
        return [{k: report[k] for k in keys}]
    if exp == "moments":
        keys = ("kind", "method", "n", "w", "p", "group", "value_num", "value_den", "stderr")
        return [{k: report[k] for k in keys}]
    if exp == "alpha":
        return [
            {"i": i + 1, "alpha": a, "beta": b}
            for i, (a, b) in enumerate(zip(report["alpha"], report["beta"]))
        ]
    return [report]


def _emit(report: dict, out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps(report, sort_keys=True, indent=2, default=str) + "\n"
    else:
        rows = _csv_rows(report)
        buf = io.StringIO()
        if rows:
            fields = list(rows[0].keys())
            writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row.get(k) for k in fields})
        text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge_config(args)
        command = args.command
        if command == "alpha":
            if "t" not in opts or "q" not in opts:
                raise ConfigError("alpha needs --t and --q")
            table = alpha_beta(int(opts["t"]), float(opts["q"]))
            report = table.to_json_dict()
            report["experiment"] = "alpha"
            report["checks"] = {}
            report["passed"] = True
        elif command == "moments":
            report = _run_moments(opts)
        else:
            if opts.get("mask"):
                raise ConfigError(f"{command} does not take a prescription mask")
            cfg = _experiment_config(command, opts)
            runner = {
                "dist": run_cokernel_distribution,
                "rank": run_rank_distribution,
                "localize": run_localization,
                "normdim": run_normalized_dim,
                "tight": run_tightness_sweep,
                "rareset": run_rare_set_probe,
            }[command]
            report = runner(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PadicBandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    fmt = opts.get("format") or "json"
    _emit(report, opts.get("out"), fmt)
    failed = [name for name, ok in report.get("checks", {}).items() if not ok]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
    if opts.get("assert_checks") and failed:
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
