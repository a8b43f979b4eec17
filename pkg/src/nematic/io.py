"""Config files, binary field snapshots, run manifests and CSV output.

Snapshot layout (little endian):

    b"NMQ1" | dim u8 | n u32 x dim | channels u8 | Lambda f64 | t f64
    payload: f64 values, channel-major, Q components (canonical order) then u
    CRC32 of the payload bytes, u32
"""
import csv
import datetime as _dt
import json
import os
import struct
import zlib

import numpy as np

from . import __version__
from .diagnostics import CSV_COLUMNS
from .dynamics import SimConfig, State
from .errors import CorruptFile, GridMismatch, ParseError, ValidationError
from .spectral import Grid
from .tensor_algebra import n_components

MAGIC = b"NMQ1"

# config key -> (SimConfig field, type)
CONFIG_KEYS = {
    "gamma": ("Gamma", float),
    "L": ("L", float),
    "theta": ("theta", float),
    "kappa": ("kappa", float),
    "nu": ("nu", float),
    "xi": ("xi", float),
    "lambda": ("Lambda", float),
    "n": ("n", int),
    "dt": ("dt", float),
    "T": ("T", float),
    "N": ("N", int),
    "M": ("M", int),
    "seed": ("seed", int),
    "output_dir": ("output_dir", str),
    "snapshot_every": ("snapshot_every", int),
    "record_every": ("record_every", int),
    # initial-data and dimension controls
    "dim": ("dim", int),
    "initial": ("initial", str),
    "q_amplitude": ("q_amplitude", float),
    "q_margin": ("q_margin", float),
    "u_amplitude": ("u_amplitude", float),
    "band": ("band", int),
}
REQUIRED_KEYS = ("gamma", "L", "theta", "kappa", "nu", "lambda", "n", "dt", "T")


def _convert(key, raw, typ, line):
    if typ is str:
        return raw
    try:
        if typ is int:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        return float(raw)
    except ValueError:
        raise ParseError(f"{key}: cannot read {raw!r} as {typ.__name__}", line) from None


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if not val:
            raise ParseError(f"empty value for {key!r}", lineno)
        name, typ = CONFIG_KEYS[key]
        values[key] = (name, _convert(key, val, typ, lineno))
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ValidationError(key, "missing required key")
    return SimConfig(**{name: v for name, v in values.values()})


def parse_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_to_text(cfg):
    inverse = {name: key for key, (name, _) in CONFIG_KEYS.items()}
    lines = []
    for name, key in inverse.items():
        lines.append(f"{key} = {getattr(cfg, name)!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def config_dict(cfg):
    return {key: getattr(cfg, name) for key, (name, _) in CONFIG_KEYS.items()}


# --- snapshots ------------------------------------------------------------------------

def state_values(state):
    """(channels, *shape) real array: Q components then u."""
    if state.source is not None:
        return state.source
    return np.concatenate([state.Q_components(), state.u()], axis=0)


def encode_snapshot(values, Lambda, t):
    values = np.ascontiguousarray(values, dtype="<f8")
    channels = values.shape[0]
    spatial = values.shape[1:]
    dim = len(spatial)
    header = MAGIC + struct.pack("<B", dim) + struct.pack(f"<{dim}I", *spatial)
    header += struct.pack("<Bdd", channels, float(Lambda), float(t))
    payload = values.tobytes(order="C")
    return header + payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def decode_snapshot(blob):
    """-> (values, Lambda, t)."""
    if len(blob) < 5 or blob[:4] != MAGIC:
        raise CorruptFile("bad magic: not an NMQ1 snapshot")
    dim = blob[4]
    if dim not in (2, 3):
        raise CorruptFile(f"bad dimension {dim} in header")
    off = 5
    need = off + 4 * dim + 1 + 16
    if len(blob) < need:
        raise CorruptFile("truncated header")
    shape = struct.unpack_from(f"<{dim}I", blob, off)
    off += 4 * dim
    channels, Lambda, t = struct.unpack_from("<Bdd", blob, off)
    off += 17
    count = channels * int(np.prod(shape))
    end = off + 8 * count
    if len(blob) != end + 4:
        raise CorruptFile(f"expected {end + 4} bytes, found {len(blob)}")
    payload = blob[off:end]
    (crc,) = struct.unpack_from("<I", blob, end)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CorruptFile("payload CRC32 mismatch")
    values = np.frombuffer(payload, dtype="<f8").reshape((channels,) + tuple(shape)).astype(float)
    return values, Lambda, t


def write_snapshot(path, state):
    blob = encode_snapshot(state_values(state), state.grid.Lambda, state.t)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_snapshot(path, cfg=None, grid=None):
    """Read a snapshot into a State; GridMismatch if it conflicts with cfg / grid."""
    with open(path, "rb") as fh:
        values, Lambda, t = decode_snapshot(fh.read())
    dim = values.ndim - 1
    n = values.shape[1]
    if any(s != n for s in values.shape[1:]):
        raise GridMismatch(f"non-cubic grid {values.shape[1:]}")
    nc = n_components(dim)
    if values.shape[0] != nc + dim:
        raise GridMismatch(f"{values.shape[0]} channels, expected {nc + dim} for dim={dim}")
    if cfg is not None:
        grid = cfg.grid
    if grid is not None and (grid.dim != dim or grid.n != n or grid.Lambda != Lambda):
        raise GridMismatch(
            f"snapshot grid (dim={dim}, n={n}, Lambda={Lambda}) does not match "
            f"(dim={grid.dim}, n={grid.n}, Lambda={grid.Lambda})"
        )
    grid = Grid(dim, n, Lambda) if grid is None else grid
    step = int(round(t / cfg.dt)) if cfg is not None else 0
    return State.from_real(grid, values[:nc], values[nc:], t=t, step=step)


def snapshot_name(step):
    return f"snapshot_{step:08d}.nmq"


# --- manifest and csv ------------------------------------------------------------------

def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


class RunManifest:
    """manifest.json: written before stepping, updated per checkpoint, finalized on exit."""

    def __init__(self, path, cfg, extra=None):
        self.path = path
        self.data = {
            "config": config_dict(cfg),
            "code_version": __version__,
            "start_time": _now(),
            "end_time": None,
            "checkpoints": [],
            "exit_status": "running",
        }
        if extra:
            self.data.update(extra)
        self.write()

    def write(self):
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=False)
        os.replace(tmp, self.path)

    def add_checkpoint(self, name, t, step):
        self.data["checkpoints"].append({"file": name, "t": t, "step": step})
        self.write()

    def finalize(self, status):
        self.data["end_time"] = _now()
        self.data["exit_status"] = status
        self.write()


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    inverse = {key: name for key, (name, _) in CONFIG_KEYS.items()}
    cfg = SimConfig(**{inverse[k]: v for k, v in data["config"].items() if k in inverse})
    return cfg, data


class EnergyCSV:
    def __init__(self, path, append=False):
        self.path = path
        exists = append and os.path.exists(path)
        self._fh = open(path, "a" if exists else "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        if not exists:
            self._w.writerow(CSV_COLUMNS)
            self._fh.flush()

    def append(self, rec):
        self._w.writerow([repr(float(v)) for v in rec.row()])
        self._fh.flush()

    def close(self):
        self._fh.close()


def read_energy_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise CorruptFile(f"{path}: unexpected energy.csv header")
    return np.array([[float(x) for x in r] for r in rows[1:]])


def write_table_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
