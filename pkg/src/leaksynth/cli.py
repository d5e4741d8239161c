"""Command-line entry point: ``leaksynth <command> ...``.

Stage commands (``propose``, ``moveleak``, ``align``, ``forward``) read and
write one file each and take the same ``--config`` and ``--<key>`` overrides
as ``pipeline``; chaining them with the per-sample seed from a manifest
reproduces the pipeline's files byte for byte.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .align import layer_cdf
from .config import SECTIONS, ConfigError, load_config, worker_count
from .errors import LeakSynthError
from .generator import list_map_files
from .metrics import compare
from .pipeline import (
    gather_names, load_align_spec, run_pipeline, stage_align, stage_forward,
    stage_moveleak, stage_propose, validate_config,
)
from .velocity_model import (
    LayerProfile, load_map, load_perturbation, save_map, save_perturbation,
)

CONFIG_KEYS = [key for keys in SECTIONS.values() for key in keys]


def _config_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="INI config file")
    group = parent.add_argument_group("config overrides")
    for key in CONFIG_KEYS:
        group.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE", default=None)
    return parent


def _cfg(args):
    overrides = {
        key: getattr(args, f"cfg_{key}") for key in CONFIG_KEYS
        if getattr(args, f"cfg_{key}") is not None
    }
    return load_config(args.config, overrides)


def _seed(args, cfg):
    return cfg.master_seed if args.seed is None else args.seed


def cmd_propose(args):
    cfg = _cfg(args)
    baseline = load_map(cfg.baseline)
    condition = load_map(args.condition, geometry=baseline.shape)
    save_map(stage_propose(cfg, baseline, condition, _seed(args, cfg)), args.out)


def cmd_moveleak(args):
    cfg = _cfg(args)
    baseline = load_map(cfg.baseline)
    leaked = load_map(args.map, geometry=baseline.shape)
    v3, split_row, th_l = stage_moveleak(cfg, baseline, leaked, _seed(args, cfg))
    save_perturbation(v3, args.out)
    print(json.dumps({"split_row": split_row, "th_l": th_l}))


def cmd_align(args):
    cfg = _cfg(args)
    baseline = load_map(cfg.baseline)
    v3 = load_perturbation(args.pert, geometry=baseline.shape)
    save_map(stage_align(cfg, baseline, v3, load_align_spec(cfg)), args.out)


def cmd_forward(args):
    cfg = _cfg(args)
    vmap = load_map(args.map)
    gathers = stage_forward(cfg, vmap)
    stem, _ = os.path.splitext(args.out)
    paths = [args.out] if len(gathers) == 1 else [
        os.path.join(os.path.dirname(stem), n)
        for n in gather_names(os.path.basename(stem), len(gathers))
    ]
    for g, path in zip(gathers, paths):
        g.save(path)
    if args.dump_csv:
        with open(args.dump_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            for shot, g in enumerate(gathers):
                for (r, c), trace in zip(g.receivers, g.data):
                    writer.writerow([shot, r, c] + [repr(float(v)) for v in trace])


def cmd_metrics(args):
    pred = {os.path.basename(p): p for p in list_map_files(args.pred)}
    truth = {os.path.basename(p): p for p in list_map_files(args.truth)}
    names = sorted(set(pred) & set(truth))
    if not names:
        raise LeakSynthError("no map files with matching names in the two directories")
    pairs = [(n, load_map(pred[n]), load_map(truth[n])) for n in names]
    vmin = args.vmin
    vmax = args.vmax
    if vmin is None:
        vmin = min(float(min(p.values.min(), t.values.min())) for _, p, t in pairs)
    if vmax is None:
        vmax = max(float(max(p.values.max(), t.values.max())) for _, p, t in pairs)
    rows = [(os.path.splitext(n)[0], compare(p, t, vmin, vmax)) for n, p, t in pairs]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["sample_id", "ssim", "mae", "mse"])
        for sid, rep in rows:
            writer.writerow([sid, repr(rep.ssim), repr(rep.mae), repr(rep.mse)])
        agg = np.mean([[r.ssim, r.mae, r.mse] for _, r in rows], axis=0)
        writer.writerow(["mean"] + [repr(float(v)) for v in agg])
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_pipeline(args):
    cfg = _cfg(args)
    records = run_pipeline(cfg, workers=worker_count())
    ok = sum(r.status == "ok" for r in records)
    print(json.dumps({"samples": len(records), "ok": ok, "skipped": len(records) - ok,
                      "manifest": os.path.join(cfg.output_dir, "manifest.csv")}))


def cmd_validate(args):
    cfg = _cfg(args)
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    print("ok")


def cmd_extract_cdf(args):
    baseline = load_map(args.baseline)
    leaked = load_map(args.map, geometry=baseline.shape)
    profile = LayerProfile(args.shallow_end, args.intermediate_end)
    layer_cdf(baseline, leaked, profile, args.layer, args.threshold, args.mode).to_csv(args.out)


def cmd_demo(args):
    from .demo import make_demo

    print(make_demo(args.out, depth=args.size, width=args.size, seed=args.seed))


def build_parser():
    parser = argparse.ArgumentParser(prog="leaksynth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    cfgp = _config_parent()

    p = sub.add_parser("propose", parents=[cfgp], help="draw a leakage map from a condition map")
    p.add_argument("--condition", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("moveleak", parents=[cfgp], help="crop, split and move a leakage to the shallow boundary")
    p.add_argument("--map", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_moveleak)

    p = sub.add_parser("align", parents=[cfgp], help="align layer distributions and rebuild the map")
    p.add_argument("--pert", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("forward", parents=[cfgp], help="model the configured shots for one map")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-csv", help="also write traces as CSV (shot,row,col,samples...)")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("metrics", help="SSIM/MAE/MSE report between two map directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pipeline", parents=[cfgp], help="generate the full paired dataset")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("validate", parents=[cfgp], help="check a config without running it")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract-cdf", help="target CDF from a map with leakage in a given layer")
    p.add_argument("--baseline", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--layer", choices=("shallow", "intermediate", "deep"), required=True)
    p.add_argument("--shallow-end", type=int, required=True)
    p.add_argument("--intermediate-end", type=int, required=True)
    p.add_argument("--threshold", type=float, default=50.0)
    p.add_argument("--mode", choices=("absolute", "delta"), default="absolute")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_cdf)

    p = sub.add_parser("demo", help="write synthetic demo inputs and a config")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)
    return parser


def _fail(kind, message, details=None):
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail("ConfigError", "invalid configuration", exc.errors)
    except LeakSynthError as exc:
        return _fail(exc.reason, str(exc))
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
