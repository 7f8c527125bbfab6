"""Command-line entry point: ``graspmc <command> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from graspmc.geometry import embed
from graspmc.harness.config import ConfigError, ExperimentConfig
from graspmc.harness import io as hio
from graspmc.harness.runner import (RunError, build_run_sketch, run_baseline, run_matrix,
                                    run_single)
from graspmc.metrics import aggregate, format_table
from graspmc.targets import DemoGenerationError, generate_demo_grasps

log = logging.getLogger("graspmc")


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=d, help="run seed (overrides run.seeds)")
    p.add_argument("--out", default=d, help="output directory (env GRASPMC_OUT)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graspmc", description=__doc__)
    _common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="generate and print demonstrated grasps")
    _common(p, True)
    p = sub.add_parser("sketch", help="build and save a rough sketch")
    _common(p, True)
    p.add_argument("--bias", default="weak", choices=["impartial", "weak", "strong"])
    p = sub.add_parser("run", help="single combined-sampler run")
    _common(p, True)
    p.add_argument("--bias", default="weak", choices=["impartial", "weak", "strong"])
    p.add_argument("--c", type=float, default=0.08, help="kernel translation weight")
    p = sub.add_parser("matrix", help="bias x c x seed sweep")
    _common(p, True)
    p = sub.add_parser("baseline", help="random-walk MH run for comparison")
    _common(p, True)
    p = sub.add_parser("report", help="re-aggregate saved run reports")
    _common(p, True)
    p.add_argument("directory", nargs="?", help="directory with run_*.json (default: --out)")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_mapping({})
    if args.seed is not None:
        cfg = cfg.replace(run__seeds=[args.seed])
    return cfg


def out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or os.environ.get("GRASPMC_OUT") or cfg["output.dir"])


def _print_metrics(m) -> None:
    print(f"successes={m.success_count} unique={m.unique_success_count} "
          f"acceptance={m.acceptance_rate:.3f} dispersion={m.dispersion_area:.6g}"
          + (f" basins={m.basins_visited}" if m.basins_visited is not None else ""))


def cmd_demo(args, cfg):
    from graspmc.harness.runner import make_rng

    target = cfg.make_target()
    seed = cfg["run.seeds"][0]
    demos = generate_demo_grasps(target, cfg.seed_positions(), cfg["demos.m"], make_rng(seed),
                                 budget=cfg["demos.budget"])
    print("qw,qx,qy,qz,tx,ty,tz,quality")
    for d in demos:
        print(",".join(hio.fmt(v) for v in embed(d)) + "," + hio.fmt(target.quality(d)))
    return 0


def cmd_sketch(args, cfg):
    seed = cfg["run.seeds"][0]
    _, sketch = build_run_sketch(cfg, args.bias, seed)
    out = out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sketch_{cfg['target.name']}_{args.bias}_s{seed}.csv"
    path.write_text(hio.sketch_csv_text(sketch))
    print(f"{path}: {len(sketch)} samples, {sketch.n_valid} valid")
    return 0


def cmd_run(args, cfg):
    out = out_dir(args, cfg)
    for seed in cfg["run.seeds"]:
        rep = run_single(cfg, args.bias, args.c, seed, out)
        print(f"{out / hio.run_stem(rep)}.json")
        _print_metrics(rep.metrics)
    return 0


def cmd_baseline(args, cfg):
    out = out_dir(args, cfg)
    for seed in cfg["run.seeds"]:
        rep = run_baseline(cfg, seed, out)
        print(f"{out / hio.run_stem(rep)}.json")
        _print_metrics(rep.metrics)
    return 0


def cmd_matrix(args, cfg):
    out = out_dir(args, cfg)

    def progress(i, n):
        if args.verbose:
            print(f"[{i}/{n}]", file=sys.stderr)

    metrics, failures, rows = run_matrix(cfg, out, progress)
    print(format_table(rows), end="")
    print(f"{len(metrics)} runs written to {out}" + (f", {len(failures)} failed" if failures else ""))
    return 0 if not failures else 1


def cmd_report(args, cfg):
    directory = Path(args.directory) if args.directory else out_dir(args, cfg)
    if not directory.is_dir():
        raise ConfigError(f"report directory not found: {directory}")
    reports = hio.load_reports(directory)
    if reports:
        metrics = [hio.metrics_from_report(r) for r in reports]
    elif (directory / "dispersion.csv").is_file():
        metrics = hio.read_dispersion_csv(directory / "dispersion.csv")
    else:
        raise ConfigError(f"no run reports (run_*.json) or dispersion.csv in {directory}")
    rows = aggregate(metrics)
    hio.write_matrix_outputs(directory, metrics, rows)
    print(format_table(rows), end="")
    return 0


COMMANDS = {"demo": cmd_demo, "sketch": cmd_sketch, "run": cmd_run, "matrix": cmd_matrix,
            "baseline": cmd_baseline, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"graspmc: error: {exc}", file=sys.stderr)
        return 2
    except (RunError, DemoGenerationError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"graspmc: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
