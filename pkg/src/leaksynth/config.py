"""Pipeline configuration: an INI file of flat, uniquely named keys.

Every key lives in exactly one section and may be overridden on the command
line with ``--<key> <value>``. Relative paths are resolved against the
directory of the config file.
"""

import configparser
import os
from dataclasses import dataclass, fields, replace

from .align import ALIGN_MODES
from .generator import ProposalParams
from .velocity_model import LayerProfile
from .wave import ShotGeometry, SimConfig

WORKERS_ENV = "LEAKSYNTH_WORKERS"

SECTIONS = {
    "paths": ("baseline", "condition_dir", "external_dir", "output_dir",
              "target_shallow_cdf", "target_intermediate_cdf"),
    "layers": ("shallow_end", "intermediate_end"),
    "thresholds": ("th_l", "th_s", "th_m", "align_mode", "v_min", "v_max"),
    "proposal": ("jitter_min", "jitter_max", "warp_sigma", "warp_max_shift"),
    "simulation": ("dt", "nt", "stencil_order", "source_freq", "source_delay",
                   "sponge_width", "sponge_strength"),
    "shots": ("source_row", "source_cols", "receiver_row", "receiver_step", "receiver_start"),
    "run": ("master_seed", "n_samples"),
}
PATH_KEYS = SECTIONS["paths"]


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PipelineConfig:
    baseline: str = ""
    condition_dir: str = ""
    external_dir: str = ""
    output_dir: str = "out"
    target_shallow_cdf: str = ""
    target_intermediate_cdf: str = ""

    shallow_end: int = 16
    intermediate_end: int = 40

    th_l: str = "max_over_3"
    th_s: float = 50.0
    th_m: float = 50.0
    align_mode: str = "absolute"
    v_min: float = 300.0
    v_max: float = 6000.0

    jitter_min: float = 0.8
    jitter_max: float = 1.3
    warp_sigma: float = 4.0
    warp_max_shift: float = 3.0

    dt: float = 1e-3
    nt: int = 1000
    stencil_order: int = 4
    source_freq: float = 15.0
    source_delay: float = 0.08
    sponge_width: int = 20
    sponge_strength: float = 0.015

    source_row: int = 1
    source_cols: str = "center"
    receiver_row: int = 1
    receiver_step: int = 1
    receiver_start: int = 0

    master_seed: int = 0
    n_samples: int = 1

    # --- typed views -----------------------------------------------------

    def crop_threshold(self, pert):
        from .leakage import default_crop_threshold

        if self.th_l == "max_over_3":
            return default_crop_threshold(pert)
        return float(self.th_l)

    def layer_profile(self):
        return LayerProfile(self.shallow_end, self.intermediate_end)

    def proposal_params(self, seed):
        return ProposalParams(
            (self.jitter_min, self.jitter_max), self.warp_sigma, self.warp_max_shift, seed
        )

    def sim_config(self):
        return SimConfig(
            dt=self.dt, nt=self.nt, stencil_order=self.stencil_order,
            source_freq=self.source_freq, source_delay=self.source_delay,
            sponge_width=self.sponge_width, sponge_strength=self.sponge_strength,
        )

    def shots(self, width):
        if self.source_cols.strip() == "center":
            cols = [width // 2]
        else:
            cols = [int(c) for c in self.source_cols.split(",") if c.strip()]
        return [
            ShotGeometry.surface_line(
                width, c, row=self.receiver_row, step=self.receiver_step,
                start=self.receiver_start, source_row=self.source_row,
            )
            for c in cols
        ]

    # --- serialisation ---------------------------------------------------

    def to_ini(self, exclude=()):
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {getattr(self, k)}" for k in keys if k not in exclude]
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides, base_dir=None):
        return replace(self, **_coerce_all(overrides, base_dir))


_TYPES = {f.name: type(f.default) for f in fields(PipelineConfig)}


def _coerce(key, raw, base_dir):
    kind = _TYPES[key]
    raw = str(raw).strip()
    if key in PATH_KEYS:
        if raw and base_dir is not None and not os.path.isabs(raw):
            return os.path.normpath(os.path.join(base_dir, raw))
        return raw
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _coerce_all(mapping, base_dir):
    out = {}
    errors = []
    for key, raw in mapping.items():
        if key not in _TYPES:
            errors.append(f"unknown config key {key!r}")
            continue
        try:
            out[key] = _coerce(key, raw, base_dir)
        except ValueError:
            errors.append(f"{key}: cannot parse {raw!r} as {_TYPES[key].__name__}")
    if errors:
        raise ConfigError(errors)
    return out


def load_config(path=None, overrides=None):
    """Read ``path`` (optional) and apply ``overrides`` on top.

    Override paths are taken relative to the current directory.
    """
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        if not parser.read(path):
            raise ConfigError([f"cannot read config file {path}"])
        values = {}
        errors = []
        for section in parser.sections():
            if section not in SECTIONS:
                errors.append(f"unknown section [{section}]")
                continue
            for key, raw in parser.items(section):
                if key not in SECTIONS[section]:
                    errors.append(f"key {key!r} does not belong in [{section}]")
                values[key] = raw
        if errors:
            raise ConfigError(errors)
        cfg = cfg.with_overrides(values, base_dir=os.path.dirname(os.path.abspath(path)))
    if overrides:
        cfg = cfg.with_overrides(overrides, base_dir=os.getcwd())
    return cfg


def worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError([f"{WORKERS_ENV} must be an integer, got {raw!r}"]) from None


def validate_semantics(cfg):
    """Checks that need no file access."""
    errors = []
    if cfg.n_samples < 1:
        errors.append("n_samples must be >= 1")
    if cfg.th_l != "max_over_3":
        try:
            if not float(cfg.th_l) > 0:
                errors.append("th_l must be positive")
        except ValueError:
            errors.append(f"th_l must be 'max_over_3' or a number, got {cfg.th_l!r}")
    if cfg.th_s < 0 or cfg.th_m < 0:
        errors.append("th_s and th_m must be >= 0")
    if cfg.align_mode not in ALIGN_MODES:
        errors.append(f"align_mode must be one of {ALIGN_MODES}")
    if not (cfg.v_min > 0 and cfg.v_max >= cfg.v_min):
        errors.append(f"clamp range [{cfg.v_min}, {cfg.v_max}] invalid")
    try:
        cfg.layer_profile()
    except ValueError as exc:
        errors.append(str(exc))
    try:
        cfg.proposal_params(0)
    except ValueError as exc:
        errors.append(str(exc))
    try:
        cfg.sim_config()
    except ValueError as exc:
        errors.append(str(exc))
    if cfg.receiver_step < 1:
        errors.append("receiver_step must be >= 1")
    if not cfg.output_dir:
        errors.append("output_dir is required")
    return errors
