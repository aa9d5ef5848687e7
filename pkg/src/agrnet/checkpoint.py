"""Single-file checkpoint container.

A checkpoint is a zip archive holding:
  manifest.txt        plain text: format version, step, config snapshot,
                      metric snapshot and one `array` line per tensor
  arrays/<name>.bin   raw little-endian bytes, row-major

Manifest grammar (one record per line):
  format <int>
  step <int>
  config <key>=<value>
  metric <name> <float>
  array <name> <dtype> <comma-separated shape>

dtype codes are numpy little-endian codes (f4, f8, i8).
"""

import io
import zipfile

import numpy as np

from .config import Config, config_items, parse_assignments

FORMAT_VERSION = 1

_DTYPES = {"f4": "<f4", "f8": "<f8", "i8": "<i8", "i4": "<i4"}


class CheckpointError(RuntimeError):
    pass


def _dtype_code(arr: np.ndarray) -> str:
    for code, np_dtype in _DTYPES.items():
        if arr.dtype == np.dtype(np_dtype).newbyteorder("="):
            return code
    raise CheckpointError(f"unsupported array dtype {arr.dtype}")


def save_checkpoint(path, arrays: dict, cfg: Config, step: int, metrics: dict | None = None):
    """arrays: name -> numpy array; every array must be finite."""
    for name, arr in arrays.items():
        if np.issubdtype(arr.dtype, np.floating) and not np.isfinite(arr).all():
            raise CheckpointError(f"array {name!r} contains non-finite values")
    lines = [f"format {FORMAT_VERSION}", f"step {step}"]
    for key, value in config_items(cfg):
        lines.append(f"config {key}={value}")
    for name, value in (metrics or {}).items():
        lines.append(f"metric {name} {float(value)!r}")
    for name, arr in arrays.items():
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"array {name} {_dtype_code(np.asarray(arr))} {shape}")
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.txt", "\n".join(lines) + "\n")
        for name, arr in arrays.items():
            buf = np.ascontiguousarray(arr).astype(
                arr.dtype.newbyteorder("<"), copy=False).tobytes()
            zf.writestr(f"arrays/{name}.bin", buf)


def load_checkpoint(path):
    """Returns (arrays, cfg, step, metrics)."""
    with zipfile.ZipFile(path) as zf:
        manifest = zf.read("manifest.txt").decode().splitlines()
        specs, config_pairs, metrics = [], [], {}
        step = 0
        for line in manifest:
            if not line.strip():
                continue
            kind, rest = line.split(" ", 1)
            if kind == "format":
                if int(rest) != FORMAT_VERSION:
                    raise CheckpointError(f"unsupported checkpoint format {rest}")
            elif kind == "step":
                step = int(rest)
            elif kind == "config":
                config_pairs.append(rest)
            elif kind == "metric":
                name, value = rest.split(" ", 1)
                metrics[name] = float(value)
            elif kind == "array":
                name, code, shape = rest.split(" ")
                specs.append((name, code, tuple(int(d) for d in shape.split(",") if d)))
            else:
                raise CheckpointError(f"unknown manifest record {kind!r}")
        arrays = {}
        for name, code, shape in specs:
            raw = zf.read(f"arrays/{name}.bin")
            arrays[name] = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).copy()
    cfg = Config(**parse_assignments(config_pairs))
    return arrays, cfg, step, metrics
