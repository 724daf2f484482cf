"""Command-line entry point: ``proxfwi {synth-model,synth-data,invert,gradcheck}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .diagnostics import gradcheck_suite
from .experiment import (
    DEFAULT_CONFIG,
    ConfigError,
    ExperimentConfig,
    build_geometry,
    run_experiment,
    synth_data,
    synth_model,
)

GRADCHECK_RTOL = 1e-5


def _config(args):
    d = {}
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
    cfg = ExperimentConfig.from_dict(d)
    return cfg.with_overrides(
        seed=args.seed,
        output_dir=str(args.out) if getattr(args, "out", None) else None,
        threads=getattr(args, "threads", None),
        max_iter=getattr(args, "max_iter", None),
    )


def cmd_synth_model(args):
    cfg = _config(args)
    model = synth_model(cfg["model"], cfg.seed)
    path = io.write_model(args.out, model)
    print(path)
    return 0


def cmd_synth_data(args):
    cfg = _config(args)
    if args.model:
        m = cfg["model"]
        model = io.read_model(args.model, int(m["sponge_width"]), float(m["sponge_gamma"]))
    else:
        model = synth_model(cfg["model"], cfg.seed)
    geom = build_geometry(cfg["geometry"], model.grid)
    data = synth_data(model, geom, cfg["noise"], cfg.seed, cfg["threads"])
    print(io.write_data(args.out, data))
    return 0


def cmd_invert(args):
    cfg = _config(args)
    art = run_experiment(cfg)
    print(json.dumps(art.summary, indent=2))
    return art.exit_code


def cmd_gradcheck(args):
    worst = 0.0
    for c in gradcheck_suite(args.seed or 0, args.n_coords):
        print(f"{c.penalty:10s} {c.transform:9s} max rel err {c.max_rel_error:.3e}")
        worst = max(worst, c.max_rel_error)
    print(f"max relative error: {worst:.3e}")
    return 0 if worst < GRADCHECK_RTOL else 1


def build_parser():
    p = argparse.ArgumentParser(prog="proxfwi", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", type=Path, help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, required=True, help=out_help)

    sp = sub.add_parser("synth-model", help="write a synthetic model file")
    common(sp, "model file (.bin, header written alongside)")
    sp.set_defaults(func=cmd_synth_model)

    sp = sub.add_parser("synth-data", help="model data for a model, with optional noise")
    common(sp, "data file (.bin, header written alongside)")
    sp.add_argument("--model", type=Path, help="model file; default: the config's synthetic model")
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=cmd_synth_data)

    sp = sub.add_parser("invert", help="run a configured inversion")
    sp.add_argument("--config", type=Path)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", type=Path, help="output directory (default from config)")
    sp.add_argument("--threads", type=int, help="frequency-parallel workers; 1 is reproducible")
    sp.add_argument("--max-iter", type=int)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the adjoint gradient")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-coords", type=int, default=5)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("default-config", help="print the default experiment config")
    sp.set_defaults(func=lambda a: print(json.dumps(DEFAULT_CONFIG, indent=2)) or 0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error at {path or '<root>'}: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
