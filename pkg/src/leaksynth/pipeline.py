"""End-to-end generation of (velocity map, gather) pairs.

Each sample is processed independently by one worker: propose (or import) a
leakage map, isolate and relocate the plume, align its layer distributions,
rebuild the map and model the shots. The per-stage functions here are the
same ones the single-stage CLI commands call, so chaining those commands
reproduces a pipeline run exactly.
"""

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .align import AlignSpec, EmpiricalCdf, align_perturbation
from .config import ConfigError, validate_semantics
from .errors import LeakSynthError, SingleRowLeakage
from .generator import propose_map, scan_maps
from .leakage import crop_leakage, move_to_boundary, split_horizontal, whole_below
from .velocity_model import _atomic_write, load_map, recompose, save_map, subtract_baseline
from .wave import check_cfl, simulate

log = logging.getLogger(__name__)

MANIFEST_FIELDS = (
    "sample_id", "seed", "status", "vmap_file", "gather_files",
    "source_map", "split_row", "th_l", "th_s", "th_m",
)


@dataclass
class SampleRecord:
    sample_id: str
    seed: int
    status: str = "ok"
    vmap_file: str = ""
    gather_files: str = ""
    source_map: str = ""
    split_row: str = ""
    th_l: str = ""
    th_s: str = ""
    th_m: str = ""


def sample_seed(master_seed, index):
    return master_seed ^ index


def sample_id(index):
    return f"{index:06d}"


# --- stages ------------------------------------------------------------------


def stage_propose(cfg, baseline, condition, seed):
    return propose_map(condition, baseline, cfg.proposal_params(seed), cfg.v_min, cfg.v_max)


def stage_moveleak(cfg, baseline, leaked, seed):
    """Return ``(v3, split_row, th_l)`` for one leakage map."""
    pert = subtract_baseline(baseline, leaked)
    th_l = cfg.crop_threshold(pert)
    crop = crop_leakage(pert, th_l)
    try:
        split = split_horizontal(crop, seed)
    except SingleRowLeakage:
        split = whole_below(crop)
    return move_to_boundary(split, cfg.layer_profile()), split.split_row, th_l


def load_align_spec(cfg):
    return AlignSpec(
        EmpiricalCdf.from_csv(cfg.target_shallow_cdf),
        EmpiricalCdf.from_csv(cfg.target_intermediate_cdf),
        cfg.th_s, cfg.th_m, cfg.align_mode,
    )


def stage_align(cfg, baseline, v3, spec):
    aligned = align_perturbation(v3, baseline, spec, cfg.layer_profile())
    return recompose(baseline, aligned, cfg.v_min, cfg.v_max)


def stage_forward(cfg, vmap):
    sim = cfg.sim_config()
    return [simulate(vmap, sim, shot) for shot in cfg.shots(vmap.width_cells)]


def gather_names(stem, n_shots):
    if n_shots == 1:
        return [f"{stem}.gfsg"]
    return [f"{stem}_s{k}.gfsg" for k in range(n_shots)]


# --- validation --------------------------------------------------------------


def validate_config(cfg):
    """Return the list of every problem found (empty when the config is usable)."""
    errors = validate_semantics(cfg)
    baseline = None
    if not cfg.baseline:
        errors.append("baseline path is required")
    else:
        try:
            baseline = load_map(cfg.baseline)
        except (OSError, LeakSynthError, ValueError) as exc:
            errors.append(f"baseline: {exc}")
    if cfg.external_dir:
        if not os.path.isdir(cfg.external_dir):
            errors.append(f"external_dir {cfg.external_dir!r} is not a directory")
    elif not cfg.condition_dir:
        errors.append("one of condition_dir or external_dir is required")
    elif not os.path.isdir(cfg.condition_dir):
        errors.append(f"condition_dir {cfg.condition_dir!r} is not a directory")
    targets = []
    for key in ("target_shallow_cdf", "target_intermediate_cdf"):
        path = getattr(cfg, key)
        if not path:
            errors.append(f"{key} is required")
            continue
        try:
            targets.append(EmpiricalCdf.from_csv(path))
        except (OSError, LeakSynthError, ValueError) as exc:
            errors.append(f"{key}: {exc}")
    out_parent = os.path.dirname(os.path.abspath(cfg.output_dir)) if cfg.output_dir else ""
    if out_parent and not os.path.isdir(out_parent):
        errors.append(f"output_dir parent {out_parent!r} does not exist")

    if baseline is not None:
        try:
            cfg.layer_profile().validate_for(baseline)
        except (LeakSynthError, ValueError) as exc:
            errors.append(f"layers: {exc}")
        try:
            for shot in cfg.shots(baseline.width_cells):
                shot.validate_for(baseline.shape)
        except ValueError as exc:
            errors.append(f"shots: {exc}")
        try:
            sim = cfg.sim_config()
        except ValueError:
            sim = None
        if sim is not None:
            v_peak = float(np.max(baseline.values))
            if cfg.align_mode == "absolute":
                v_peak = max([v_peak] + [float(t.sorted_samples[-1]) for t in targets])
            probe = type(baseline)(np.full((1, 1), min(v_peak, cfg.v_max)), baseline.dx)
            try:
                check_cfl(probe, sim)
            except LeakSynthError as exc:
                errors.append(f"{exc.reason}: {exc}")
    return errors


# --- run ---------------------------------------------------------------------

_CTX = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)


def _process(index):
    cfg = _CTX["cfg"]
    baseline = _CTX["baseline"]
    name, source = _CTX["sources"][index % len(_CTX["sources"])]
    seed = sample_seed(cfg.master_seed, index)
    sid = sample_id(index)
    rec = SampleRecord(sid, seed, source_map=name, th_s=repr(cfg.th_s), th_m=repr(cfg.th_m))
    try:
        leaked = source if _CTX["imported"] else stage_propose(cfg, baseline, source, seed)
        v3, split_row, th_l = stage_moveleak(cfg, baseline, leaked, seed)
        rec.split_row, rec.th_l = str(split_row), repr(th_l)
        vmap = stage_align(cfg, baseline, v3, _CTX["spec"])
        gathers = stage_forward(cfg, vmap)
    except LeakSynthError as exc:
        rec.status = f"skipped:{exc.reason}"
        log.info("sample %s skipped: %s", sid, exc)
        return rec
    rec.vmap_file = f"vmaps/{sid}.gfvm"
    gather_files = [f"gathers/{n}" for n in gather_names(sid, len(gathers))]
    written = []
    try:
        save_map(vmap, os.path.join(cfg.output_dir, rec.vmap_file))
        written.append(rec.vmap_file)
        for g, fname in zip(gathers, gather_files):
            g.save(os.path.join(cfg.output_dir, fname))
            written.append(fname)
    except OSError:
        # keep the tree consistent with the manifest, which will omit this sample
        for fname in written:
            os.unlink(os.path.join(cfg.output_dir, fname))
        raise
    rec.gather_files = "|".join(gather_files)
    return rec


def write_manifest(cfg, records):
    buf = io.StringIO()
    for line in cfg.to_ini(exclude=("output_dir",)).splitlines():
        buf.write(f"# {line}\n" if line else "#\n")
    writer = csv.DictWriter(buf, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in sorted(records, key=lambda r: r.sample_id):
        writer.writerow(asdict(rec))
    _atomic_write(os.path.join(cfg.output_dir, "manifest.csv"), buf.getvalue(), mode="w")


def read_manifest(path):
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


def _load_sources(cfg, baseline):
    if cfg.external_dir:
        loaded, skipped = scan_maps(cfg.external_dir, baseline)
        imported = True
    else:
        loaded, skipped = scan_maps(cfg.condition_dir, baseline)
        imported = False
    for name, reason in skipped:
        log.warning("ignoring %s: %s", name, reason)
    return loaded, imported


def run_pipeline(cfg, workers=1):
    """Generate ``cfg.n_samples`` pairs under ``cfg.output_dir``.

    Returns the list of ``SampleRecord``. Per-sample failures become skipped
    records; the manifest is written last (also after an I/O abort, with the
    records completed so far).
    """
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    baseline = load_map(cfg.baseline)
    sources, imported = _load_sources(cfg, baseline)
    if not sources:
        raise ConfigError(["no usable input maps found"])
    n = min(cfg.n_samples, len(sources)) if imported else cfg.n_samples
    for sub in ("vmaps", "gathers"):
        os.makedirs(os.path.join(cfg.output_dir, sub), exist_ok=True)
    ctx = dict(cfg=cfg, baseline=baseline, sources=sources, imported=imported,
               spec=load_align_spec(cfg))

    records = []
    try:
        if workers <= 1:
            _init_worker(ctx)
            for i in range(n):
                records.append(_process(i))
        else:
            chunk = max(1, n // (4 * workers))
            with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ctx,)) as pool:
                for rec in pool.map(_process, range(n), chunksize=chunk):
                    records.append(rec)
    finally:
        write_manifest(cfg, records)
    return records
