"""Command-line entry point: ``clutterreach <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from ._accel import backend_name
from .config import RELAXED_PRESET, ConfigError, apply_overrides, dump_config, load_config
from .harness import SWEEP_AXES, run_batch, run_sweep, run_trial
from .scene import SceneSpec, generate_scene, scene_seeds
from .strategies import STRATEGY_KINDS

EXIT_OK, EXIT_CONFIG, EXIT_FAULTS = 0, 2, 3

log = logging.getLogger("clutterreach")


def _common(p):
    p.add_argument("--config", type=Path, help="INI config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--relaxed", action="store_true", help="use the 3 cm goal radius preset")
    p.add_argument("--output-dir", type=Path, help="output directory (env CLUTTERREACH_OUTPUT_DIR wins)")


def _config(args):
    overrides = list(args.overrides)
    if args.relaxed:
        overrides = [f"{k}={v}" for k, v in RELAXED_PRESET.items()] + overrides
    cfg = load_config(args.config, overrides)
    if getattr(args, "output_dir", None) is not None:
        cfg.output_dir = str(args.output_dir)
    return cfg


def _parse_values(text: str):
    """``a,b,c`` or ``start:stop:step`` (inclusive stop)."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ConfigError(f"grid step must be positive in {text!r}")
        n = int(round((hi - lo) / step)) + 1
        return tuple(float(v) for v in np.round(lo + step * np.arange(n), 10))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _strategies(text):
    out = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in out if s not in STRATEGY_KINDS]
    if bad:
        raise ConfigError(f"unknown strategies {bad}; choose from {', '.join(STRATEGY_KINDS)}")
    return out


def cmd_gen_scenes(args):
    cfg = _config(args)
    n = args.count or cfg.scenes
    out = cfg.resolved_output_dir() / "scenes"
    out.mkdir(parents=True, exist_ok=True)
    for seed in scene_seeds(cfg.seed, n):
        scene = generate_scene(seed, cfg.scene)
        (out / f"scene_{seed}.json").write_text(scene.to_json() + "\n", encoding="utf-8")
    print(f"wrote {n} scenes to {out}")
    return EXIT_OK


def cmd_run(args):
    cfg = _config(args)
    if args.scene_file:
        scene = SceneSpec.from_json(Path(args.scene_file).read_text(encoding="utf-8"))
    else:
        scene = generate_scene(args.scene_seed, cfg.scene)
    logf = open(args.tactile_log, "w", encoding="utf-8") if args.tactile_log else None
    try:
        res = run_trial(scene, args.strategy, cfg, tactile_log=logf)
    finally:
        if logf:
            logf.close()
    doc = {k: v for k, v in res.row().items()}
    doc["events"] = [list(e) for e in res.events]
    print(json.dumps(doc, indent=1))
    return EXIT_FAULTS if res.faulted else EXIT_OK


def _fault_exit(rate, cfg):
    if rate > cfg.max_fault_rate:
        print(f"fault rate {rate:.3f} exceeds max_fault_rate {cfg.max_fault_rate}", file=sys.stderr)
        return EXIT_FAULTS
    return EXIT_OK


def cmd_batch(args):
    cfg = _config(args)
    if args.scenes:
        cfg.scenes = args.scenes
    if args.workers:
        cfg.workers = args.workers
    strategies = _strategies(args.strategies)
    batch = run_batch(cfg, strategies)
    print(analysis.markdown_report(batch.report), end="")
    for name, p in batch.paths.items():
        print(f"{name}: {p}")
    return _fault_exit(batch.fault_rate, cfg)


def cmd_sweep(args):
    cfg = _config(args)
    if args.workers:
        cfg.workers = args.workers
    x = _parse_values(args.x) if args.x else None
    y = _parse_values(args.y) if args.y else None
    sweep = run_sweep(cfg, args.strategy, x_values=x, y_values=y, scenes=args.scenes, sigma=args.sigma)
    for surf in (sweep.distance, sweep.time):
        print(f"{surf.metric} ratio: min {surf.values.min():.3f} mean {surf.values.mean():.3f} "
              f"max {surf.values.max():.3f}")
    for name, p in sweep.paths.items():
        print(f"{name}: {p}")
    results = sweep.baseline + [r for rs in sweep.cells.values() for r in rs]
    rate = sum(r.faulted for r in results) / max(1, len(results))
    return _fault_exit(rate, cfg)


def cmd_compare(args):
    results = []
    for p in args.csv:
        results.extend(analysis.read_results_csv(p))
    kinds = list(dict.fromkeys(r.strategy_kind for r in results))
    report = analysis.compare_strategies({k: [r for r in results if r.strategy_kind == k] for k in kinds})
    text = analysis.markdown_report(report)
    if args.markdown:
        Path(args.markdown).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_show_config(args):
    print(dump_config(_config(args)), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clutterreach", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenes", help="write seeded scene JSON files")
    _common(g)
    g.add_argument("--count", type=int, help="number of scenes (default: experiment.scenes)")
    g.set_defaults(func=cmd_gen_scenes)

    r = sub.add_parser("run", help="run a single trial and print its record")
    _common(r)
    r.add_argument("--scene-seed", type=int, default=0)
    r.add_argument("--scene-file", type=Path)
    r.add_argument("--strategy", choices=STRATEGY_KINDS, default="hybrid_event")
    r.add_argument("--tactile-log", type=Path, help="write NDJSON contact summaries here")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="paired comparison over seeded scenes")
    _common(b)
    b.add_argument("--scenes", type=int)
    b.add_argument("--strategies", default=",".join(STRATEGY_KINDS))
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("sweep", help="primitive parameter sweep against the straight-line baseline")
    _common(s)
    s.add_argument("--strategy", choices=sorted(SWEEP_AXES), required=True)
    s.add_argument("--x", help="first-axis values, 'a,b,c' or 'start:stop:step'")
    s.add_argument("--y", help="second-axis values")
    s.add_argument("--scenes", type=int, default=50)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="re-analyse stored per-trial CSVs")
    c.add_argument("csv", nargs="+", type=Path)
    c.add_argument("--markdown", type=Path)
    c.set_defaults(func=cmd_compare)

    sc = sub.add_parser("show-config", help="print the resolved configuration")
    _common(sc)
    sc.set_defaults(func=cmd_show_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", backend_name())
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
