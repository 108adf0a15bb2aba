"""Command line entry point: ``heritevo run|analyze|render|oracle-traits``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from heritevo import __version__


def _cmd_run(args) -> int:
    from heritevo.experiment import load_config, run_experiment

    cfg = load_config(args.config)
    if args.output:
        cfg = cfg.replace(output_dir=args.output)
    out = run_experiment(cfg, workers=args.workers)
    if args.render:
        from heritevo.figures import render_figures

        render_figures(out)
    print(out)
    return 0


def _cmd_analyze(args) -> int:
    from heritevo.experiment import analyze_artifact

    print(analyze_artifact(args.artifact_dir))
    return 0


def _cmd_render(args) -> int:
    from heritevo.figures import render_figures

    for path in render_figures(args.artifact_dir):
        print(path)
    return 0


def _cmd_oracle_traits(args) -> int:
    from heritevo.evolution import read_trajectory
    from heritevo.morphology import embed, parse_body, validate
    from heritevo.oracles import oracle_balance, oracle_morphology, oracle_speed
    from heritevo.traits import balance, coverage, limbs, proportion, speed
    from heritevo.morphology import count_modules

    body = parse_body(Path(args.body_file).read_text())
    report = validate(body)
    for v in report.violations:
        print(f"warning: {v}", file=sys.stderr)
    e = embed(body)
    fast = {"proportion": proportion(e), "size": count_modules(body), "limbs": limbs(body), "coverage": coverage(e)}
    slow = oracle_morphology(body)
    if args.trajectory:
        t = read_trajectory(args.trajectory, args.sample_period)
        fast.update(speed=speed(t), balance=balance(t))
        slow.update(speed=oracle_speed(t.positions, t.duration), balance=oracle_balance(t.orientations))
    mismatch = 0
    print(f"{'trait':<12}{'package':>22}{'oracle':>22}")
    for name in fast:
        ok = abs(fast[name] - slow[name]) <= 1e-9
        mismatch += not ok
        print(f"{name:<12}{fast[name]!r:>22}{slow[name]!r:>22}{'' if ok else '  MISMATCH'}")
    if e.omitted:
        print(f"omitted modules: {len(e.omitted)}")
    return 1 if mismatch else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heritevo", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="override output_dir from the config")
    r.add_argument("--workers", type=int, default=None, help="evaluation processes (default: $HERITEVO_WORKERS or CPU count)")
    r.add_argument("--render", action="store_true", help="also render figures")
    r.set_defaults(func=_cmd_run)

    a = sub.add_parser("analyze", help="recompute analysis CSVs of an artifact directory")
    a.add_argument("artifact_dir")
    a.set_defaults(func=_cmd_analyze)

    f = sub.add_parser("render", help="render SVG figures of an artifact directory")
    f.add_argument("artifact_dir")
    f.set_defaults(func=_cmd_render)

    o = sub.add_parser("oracle-traits", help="recompute traits of a body with the brute-force oracles")
    o.add_argument("body_file")
    o.add_argument("--trajectory", help="trajectory CSV to check speed and balance against")
    o.add_argument("--sample-period", type=float, default=0.1)
    o.set_defaults(func=_cmd_oracle_traits)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        # ConfigError, ParseError and missing artifacts all land here
        print(f"heritevo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
