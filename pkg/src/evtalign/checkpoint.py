"""Single-file checkpoint container (EBCK format).

Layout, all little-endian:

    offset  size   field
    0       4      magic b"EBCK"
    4       4      version u32 (currently 1)
    8       4      config length u32, then that many UTF-8 bytes
    ...     4      epoch u32
    ...     4      history length u32, then that many UTF-8 bytes
                   (newline-delimited metric records, may be empty)
    ...     8      tensor count u64
    per tensor:
            4      name length u32, then that many UTF-8 bytes
            4      ndim u32
            8*ndim dims u64 each
            8*n    float64 payload, C order

Tensors are stored as float64, so float32 and float64 model states both
round-trip bit-exactly. Parameter names are the module's stable
``state_dict`` names.
"""

from __future__ import annotations

import struct

import numpy as np
import torch

from .errors import DataError

EBCK_MAGIC = b"EBCK"
EBCK_VERSION = 1


def save_checkpoint(path, tensors: dict, config_text: str = "",
                    epoch: int = 0, history: str = "") -> None:
    """Write named tensors (torch tensors or numpy arrays) and metadata."""
    config_bytes = config_text.encode("utf-8")
    history_bytes = history.encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sI", EBCK_MAGIC, EBCK_VERSION))
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(struct.pack("<I", epoch))
        f.write(struct.pack("<I", len(history_bytes)))
        f.write(history_bytes)
        f.write(struct.pack("<Q", len(tensors)))
        for name, tensor in tensors.items():
            if isinstance(tensor, torch.Tensor):
                array = tensor.detach().cpu().numpy()
            else:
                array = np.asarray(tensor)
            array = array.astype(np.float64, copy=False)
            shape = array.shape  # ascontiguousarray would promote 0-dim to 1-dim
            name_bytes = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_bytes)))
            f.write(name_bytes)
            f.write(struct.pack("<I", len(shape)))
            for dim in shape:
                f.write(struct.pack("<Q", dim))
            f.write(np.ascontiguousarray(array).tobytes())


def load_checkpoint(path) -> tuple[dict, str, int, str]:
    """Read an EBCK file; returns (tensors, config_text, epoch, history)."""
    with open(path, "rb") as f:
        blob = f.read()

    view = memoryview(blob)
    pos = 0

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise DataError("checkpoint truncated", code="truncated", offset=pos)
        out = struct.unpack_from(fmt, view, pos)
        pos += size
        return out

    def take_bytes(n):
        nonlocal pos
        if pos + n > len(blob):
            raise DataError("checkpoint truncated", code="truncated", offset=pos)
        out = bytes(view[pos:pos + n])
        pos += n
        return out

    magic, version = take("<4sI")
    if magic != EBCK_MAGIC:
        raise DataError(f"bad magic {magic!r}", code="bad_magic", offset=0)
    if version != EBCK_VERSION:
        raise DataError(f"unsupported checkpoint version {version}", code="bad_version", offset=4)
    (config_len,) = take("<I")
    config_text = take_bytes(config_len).decode("utf-8")
    (epoch,) = take("<I")
    (history_len,) = take("<I")
    history = take_bytes(history_len).decode("utf-8")
    (count,) = take("<Q")

    tensors = {}
    for _ in range(count):
        (name_len,) = take("<I")
        name = take_bytes(name_len).decode("utf-8")
        (ndim,) = take("<I")
        shape = tuple(take("<Q")[0] for _ in range(ndim))
        n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = take_bytes(8 * n_items)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if pos != len(blob):
        raise DataError("trailing bytes after last tensor", code="trailing_bytes", offset=pos)
    return tensors, config_text, epoch, history


def state_to_tensors(module: torch.nn.Module) -> dict:
    return {name: value for name, value in module.state_dict().items()}


def tensors_to_state(module: torch.nn.Module, tensors: dict) -> None:
    """Load named arrays into a module, preserving its parameter dtype."""
    state = module.state_dict()
    missing = set(state) - set(tensors)
    extra = set(tensors) - set(state)
    if missing or extra:
        raise DataError(
            f"checkpoint does not match model: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}")
    new_state = {}
    for name, value in state.items():
        array = tensors[name]
        if tuple(array.shape) != tuple(value.shape):
            raise DataError(
                f"tensor {name!r} has shape {tuple(array.shape)}, "
                f"expected {tuple(value.shape)}")
        new_state[name] = torch.from_numpy(np.asarray(array)).to(value.dtype)
    module.load_state_dict(new_state)
