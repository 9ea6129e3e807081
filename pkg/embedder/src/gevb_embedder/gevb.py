"""Writer for the GEVB embedding interchange format.

Layout (little-endian): magic "GEVB", u32 version = 1, u32 count, u32 dim,
u8 source tag (0=vgg16, 1=inception, 2=fallback), 3 zero bytes, then
count * dim float32 values row-major. This is the byte contract consumed
by the evaluation suite.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

GEVB_MAGIC = b"GEVB"
GEVB_VERSION = 1
SOURCE_TAGS = {"vgg16": 0, "inception": 1, "fallback": 2}
_HEADER = struct.Struct("<4sIIIB3x")


def write_gevb(vectors: np.ndarray, source: str, path) -> None:
    """Atomically write one embedding file (temp file + rename)."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValueError(f"expected nonempty (N, d) matrix, got {vectors.shape}")
    if source not in SOURCE_TAGS:
        raise ValueError(f"unknown source {source!r}")
    header = _HEADER.pack(
        GEVB_MAGIC, GEVB_VERSION, vectors.shape[0], vectors.shape[1], SOURCE_TAGS[source]
    )
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=out.parent, suffix=".gevb.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header + vectors.tobytes(order="C"))
        os.replace(tmp_name, out)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
