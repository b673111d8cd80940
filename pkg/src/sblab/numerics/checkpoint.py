"""Binary parameter serialization.

Layout: magic "SBL1", then for each parameter in order:
    u32 LE name length, UTF-8 name, u32 LE rank, u32 LE extents,
    float64 LE data (row-major). No padding; read until EOF.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SBL1"


def save_params(path, params: dict):
    """Write an ordered {name: ndarray} mapping."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, value in params.items():
            arr = np.ascontiguousarray(value, dtype=np.float64)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            for extent in arr.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(arr.astype("<f8").tobytes())


def load_params(path) -> dict:
    """Read parameters back as an ordered {name: ndarray} mapping."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    params = {}
    off = 4
    while off < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += 8 * count
        params[name] = data.reshape(shape).astype(np.float64)
    return params
