"""
Command-line front end.

    t2stc free-run [--preset duffing-free] ...
    t2stc track    [--preset duffing-track] ...
    t2stc compare  [--preset duffing-track] ...
    t2stc show-config [--preset NAME | --config PATH]

Exit status: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

from .config import PRESETS, ConfigError, ExperimentConfig, parse_config, serialize_config, validate
from .experiment import compare, format_table, run_experiment
from .export import write_csv
from .it2fls import NonFiringInputError
from .sim import SimulationDiverged

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

DEFAULT_PRESET = {"free-run": "duffing-free", "track": "duffing-track",
                  "compare": "duffing-track", "show-config": "duffing-track"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t2stc", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("free-run", "uncontrolled plant"),
                        ("track", "closed-loop tracking run"),
                        ("compare", "adaptive vs ideal super-twisting vs first-order SMC"),
                        ("show-config", "print the resolved configuration")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", metavar="PATH", help="key = value document; overrides the preset")
        p.add_argument("--seed", type=int)
        p.add_argument("--t-end", type=float)
        p.add_argument("--step", type=float)
        p.add_argument("--snr-db", help="number, or 'none' to disable noise")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--decimate", type=int)
        p.add_argument("--long-format", action="store_true", help="write t,column,value rows")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        if args.preset and not any(l.split("#")[0].strip().startswith("preset")
                                   for l in text.splitlines()):
            text = f"preset = {args.preset}\n" + text
        cfg = parse_config(text)
    else:
        cfg = PRESETS[args.preset or DEFAULT_PRESET[args.command]]
    over = {}
    if args.command == "free-run":
        over["controller.kind"] = "none"
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("must be non-negative", "--seed")
        over["noise.seed"] = args.seed
    if args.t_end is not None:
        over["sim.t_end"] = args.t_end
        a, b = cfg.sim.window
        if b > args.t_end:
            over["sim.window"] = (min(a, args.t_end / 2), args.t_end)
    if args.step is not None:
        over["sim.h"] = args.step
    if args.snr_db is not None:
        over["noise.snr_db"] = None if args.snr_db.lower() == "none" else _number(args.snr_db)
    if args.decimate is not None:
        over["sim.decimate"] = args.decimate
    if args.out is not None:
        over["output.dir"] = args.out
    if args.long_format:
        over["output.long_format"] = True
    if over:
        cfg = cfg.replace(**over)
    validate(cfg)
    return cfg


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number or 'none', got {text!r}", "--snr-db") from None


def _metrics_record(res) -> dict:
    m = res.metrics
    rec = {"kind": res.kind, "samples": len(res.trajectory),
           "max_abs_x": float(abs(res.trajectory.x).max())}
    if m is not None:
        rec.update({k: (v if math.isfinite(v) else None) for k, v in asdict(m).items()})
    return rec


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def run_command(cfg: ExperimentConfig, command: str, out=sys.stdout) -> None:
    out_dir = cfg.output.dir
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(serialize_config(cfg))
    if command in ("free-run", "track"):
        res = run_experiment(cfg)
        stem = command.replace("-", "_")
        write_csv(res.trajectory, os.path.join(out_dir, f"{stem}.csv"), cfg.output.long_format)
        rec = _metrics_record(res)
        _write_json(os.path.join(out_dir, f"{stem}_metrics.json"), rec)
        out.write(json.dumps(rec) + "\n")
    elif command == "compare":
        rows, runs = compare(cfg)
        for kind, res in runs.items():
            write_csv(res.trajectory, os.path.join(out_dir, f"compare_{kind}.csv"),
                      cfg.output.long_format)
        table = format_table(rows)
        with open(os.path.join(out_dir, "compare.txt"), "w") as fh:
            fh.write(table)
        _write_json(os.path.join(out_dir, "compare.json"),
                    [{k: (v if not isinstance(v, float) or math.isfinite(v) else None)
                      for k, v in asdict(r).items()} for r in rows])
        out.write(table)
    else:
        raise ValueError(command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "show-config":
        sys.stdout.write(serialize_config(cfg))
        return EXIT_OK
    try:
        run_command(cfg, args.command)
    except (SimulationDiverged, NonFiringInputError, FloatingPointError) as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
