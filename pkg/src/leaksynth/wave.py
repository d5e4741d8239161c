"""2D constant-density acoustic forward modelling.

Explicit second-order time stepping of ``lap(p) - p_tt / v**2 = s``::

    p[n+1] = 2 p[n] - p[n-1] + (v dt / dx)**2 L(p[n]) - (v dt)**2 s[n]

with a 2nd- or 4th-order five/nine-point Laplacian ``L``. Grid edges use a
mirrored halo, left/right/bottom edges are damped by a Cerjan sponge and row
0 is a pressure-free surface. Gathers are receiver-major arrays.

Gather container (little-endian)::

    magic "GFSG", u32 version, u32 n_receivers, u32 nt, f32 dt,
    n_receivers x (u32 row, u32 col), then n_receivers * nt f32 samples
"""

import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, DivergenceDetected, LeakSynthError, MapFormatError
from .velocity_model import _atomic_write

GATHER_MAGIC = b"GFSG"
GATHER_VERSION = 1
_GATHER_HEADER = struct.Struct("<4sIIIf")

# Courant limits v_max * dt / dx for the 2D scheme
CFL_LIMIT = {2: 1.0 / math.sqrt(2.0), 4: 0.606}

_STENCILS = {
    2: (-2.0, (1.0,)),
    4: (-5.0 / 2.0, (4.0 / 3.0, -1.0 / 12.0)),
}


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    nt: int = 1000
    stencil_order: int = 4
    source_freq: float = 15.0
    source_delay: float = 0.08
    sponge_width: int = 20
    sponge_strength: float = 0.015
    source_amplitude: float = 1.0
    free_surface: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.nt < 1:
            raise ValueError("nt must be >= 1")
        if self.stencil_order not in _STENCILS:
            raise ValueError(f"stencil_order must be 2 or 4, got {self.stencil_order}")
        if not self.source_freq > 0:
            raise ValueError("source_freq must be > 0")
        if self.sponge_width < 0:
            raise ValueError("sponge_width must be >= 0")


@dataclass(frozen=True)
class ShotGeometry:
    source: tuple
    receivers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(int(i) for i in self.source))
        object.__setattr__(
            self, "receivers", tuple(tuple(int(i) for i in rc) for rc in self.receivers)
        )

    def validate_for(self, shape):
        for name, (r, c) in [("source", self.source)] + [
            ("receiver", rc) for rc in self.receivers
        ]:
            if not (0 <= r < shape[0] and 0 <= c < shape[1]):
                raise ValueError(f"{name} position {(r, c)} outside {shape[0]}x{shape[1]} grid")

    @classmethod
    def surface_line(cls, width, source_col, row=1, step=1, start=0, source_row=None):
        receivers = tuple((row, c) for c in range(start, width, step))
        return cls((row if source_row is None else source_row, source_col), receivers)


@dataclass(frozen=True, eq=False)
class SeismicGather:
    data: np.ndarray  # (n_receivers, nt)
    dt: float
    receivers: tuple
    source: tuple = None

    @property
    def nt(self):
        return self.data.shape[1]

    @property
    def times(self):
        return np.arange(self.nt) * self.dt

    def to_bytes(self):
        n_rec, nt = self.data.shape
        parts = [_GATHER_HEADER.pack(GATHER_MAGIC, GATHER_VERSION, n_rec, nt, self.dt)]
        parts.append(np.asarray(self.receivers, dtype="<u4").reshape(n_rec, 2).tobytes())
        parts.append(np.asarray(self.data, dtype="<f4").tobytes())
        return b"".join(parts)

    def save(self, path):
        _atomic_write(path, self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < _GATHER_HEADER.size:
            raise MapFormatError(f"{path}: truncated gather header")
        magic, version, n_rec, nt, dt = _GATHER_HEADER.unpack_from(blob)
        if magic != GATHER_MAGIC or version != GATHER_VERSION:
            raise MapFormatError(f"{path}: not a version-{GATHER_VERSION} gather file")
        off = _GATHER_HEADER.size
        if len(blob) != off + 8 * n_rec + 4 * n_rec * nt:
            raise MapFormatError(f"{path}: size does not match header")
        rec = np.frombuffer(blob, dtype="<u4", count=2 * n_rec, offset=off).reshape(n_rec, 2)
        data = np.frombuffer(blob, dtype="<f4", offset=off + 8 * n_rec).reshape(n_rec, nt)
        return cls(data.astype(np.float64), float(dt), tuple(map(tuple, rec.tolist())))


def ricker(t, f, t0):
    """Ricker wavelet of peak frequency ``f`` centred on ``t0``."""
    if not f > 0:
        raise ValueError("ricker frequency must be > 0")
    arg = (np.pi * f * (np.asarray(t, dtype=np.float64) - t0)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def max_stable_dt(v_max, dx, stencil_order):
    return CFL_LIMIT[stencil_order] * dx / v_max


def check_cfl(vmap, cfg):
    """Return the Courant number, or raise ``CflViolation``."""
    v_max = float(np.max(vmap.values))
    courant = v_max * cfg.dt / vmap.dx
    limit = CFL_LIMIT[cfg.stencil_order]
    if courant > limit:
        dt_max = max_stable_dt(v_max, vmap.dx, cfg.stencil_order)
        raise CflViolation(
            f"unstable: v_max*dt/dx = {courant:.4f} exceeds {limit:.4f} for order "
            f"{cfg.stencil_order}; largest stable dt is {dt_max:.6g} s",
            dt_max,
        )
    return courant


def laplacian(p, order):
    """Undivided discrete Laplacian (multiply by 1/dx**2) with mirrored edges."""
    centre, weights = _STENCILS[order]
    h = len(weights)
    q = np.pad(p, h, mode="symmetric")
    nz, nx = p.shape
    out = (2.0 * centre) * p
    for k, w in enumerate(weights, 1):
        up = q[h - k:h - k + nz, h:h + nx]
        down = q[h + k:h + k + nz, h:h + nx]
        left = q[h:h + nz, h - k:h - k + nx]
        right = q[h:h + nz, h + k:h + k + nx]
        out += w * ((up + down) + (left + right))
    return out


def _advance(p_prev, p_cur, courant2, src_coef, src_term, order):
    return 2.0 * p_cur - p_prev + courant2 * laplacian(p_cur, order) - src_coef * src_term


def _velocity_array(v):
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


def step(p_prev, p_cur, v, src_term, dt, dx, stencil_order=4, step_index=None):
    """One explicit time step; returns the next wavefield."""
    vel = _velocity_array(v)
    if not (p_prev.shape == p_cur.shape == vel.shape == np.shape(src_term)):
        raise ValueError("wavefields, velocity and source term must share a shape")
    v2dt2 = (vel * dt) ** 2
    p_next = _advance(p_prev, p_cur, v2dt2 / (dx * dx), v2dt2, src_term, stencil_order)
    if not np.all(np.isfinite(p_next)):
        raise DivergenceDetected(f"non-finite wavefield at step {step_index}", step_index)
    return p_next


def sponge_profile(shape, width, strength, top=False):
    """Cerjan damping factors, 1 in the interior and < 1 near absorbing edges."""
    nz, nx = shape
    damp = np.ones(shape)
    if width == 0:
        return damp
    ramp = np.exp(-((strength * (width - np.arange(width))) ** 2))
    w_x = min(width, nx)
    w_z = min(width, nz)
    damp[:, :w_x] *= ramp[:w_x]
    damp[:, nx - w_x:] *= ramp[:w_x][::-1]
    damp[nz - w_z:, :] *= ramp[:w_z][::-1, None]
    if top:
        damp[:w_z, :] *= ramp[:w_z][:, None]
    return damp


def simulate(vmap, cfg, shot):
    """Model one shot and return the pressure recorded at the receivers."""
    check_cfl(vmap, cfg)
    shot.validate_for(vmap.shape)
    vel = _velocity_array(vmap)
    v2dt2 = (vel * cfg.dt) ** 2
    courant2 = v2dt2 / (vmap.dx * vmap.dx)
    damp = sponge_profile(vmap.shape, cfg.sponge_width, cfg.sponge_strength, top=not cfg.free_surface)
    src = np.zeros(vmap.shape)
    sr, sc = shot.source
    wavelet = cfg.source_amplitude * ricker(np.arange(cfg.nt) * cfg.dt, cfg.source_freq, cfg.source_delay)
    rec_r = np.array([r for r, _ in shot.receivers], dtype=np.intp)
    rec_c = np.array([c for _, c in shot.receivers], dtype=np.intp)
    data = np.zeros((len(shot.receivers), cfg.nt))

    p_prev = np.zeros(vmap.shape)
    p_cur = np.zeros(vmap.shape)
    for k in range(cfg.nt):
        data[:, k] = p_cur[rec_r, rec_c]
        if k == cfg.nt - 1:
            break
        src[sr, sc] = wavelet[k]
        p_next = _advance(p_prev, p_cur, courant2, v2dt2, src, cfg.stencil_order)
        p_next *= damp
        p_cur *= damp
        if cfg.free_surface:
            p_next[0, :] = 0.0
        if not np.isfinite(p_next[sr, sc]) or (k % 50 == 0 and not np.all(np.isfinite(p_next))):
            raise DivergenceDetected(f"non-finite wavefield at step {k}", k)
        p_prev, p_cur = p_cur, p_next
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0][1])
        raise DivergenceDetected(f"non-finite gather sample at step {bad}", bad)
    return SeismicGather(data, float(np.float32(cfg.dt)), shot.receivers, shot.source)


def forward_shots(vmap, cfg, shots):
    return [simulate(vmap, cfg, shot) for shot in shots]


def _forward_task(args):
    vmap, cfg, shots = args
    try:
        return forward_shots(vmap, cfg, shots), None
    except (LeakSynthError, ValueError) as exc:
        return None, exc


def batch_forward(maps, cfg, shots, workers=1):
    """Model every shot for every map.

    Returns ``(results, errors)``: ``results[i]`` is the list of gathers for
    ``maps[i]`` (``None`` if it failed) and ``errors`` maps failed indices to
    their exception. The output never depends on ``workers``.
    """
    tasks = [(vmap, cfg, list(shots)) for vmap in maps]
    if workers <= 1 or len(tasks) <= 1:
        outcomes = [_forward_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_forward_task, tasks))
    results = [res for res, _ in outcomes]
    errors = {i: err for i, (_, err) in enumerate(outcomes) if err is not None}
    return results, errors
