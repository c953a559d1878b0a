# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Read and write trainer checkpoints

A checkpoint is a single binary file with the following little-endian layout:

  magic       8 bytes   b"CSCKPT\\x00\\x01"
  version     uint32
  meta_len    uint32    length of the UTF-8 JSON metadata that follows
  metadata    meta_len bytes
  n_arrays    uint32
  shape table n_arrays records: name_len uint16, name (UTF-8), ndim uint8,
              ndim x uint64 dimensions
  data        the arrays as float64, in table order, C order

Base weights and each adapter live in separate files, so leaving an adapter
out of inference is a matter of not opening its file.
"""
import json
import struct
from typing import Any, Dict, Mapping, Tuple

import numpy as np

MAGIC = b"CSCKPT\x00\x01"
VERSION = 1


class ckptfile:
    """Provides access to a named set of float64 arrays plus JSON metadata

    The returned object may be used as a context manager, and will close the
    underlying file when the context exits.

    file:   the path of the file to open
    mode:   the mode to open the file ('r' or 'w')

    additional keyword arguments are ignored

    """

    def __init__(self, file, mode="r", **kwargs):
        self.filename = file
        self.mode = mode
        if mode in ("w", "r"):
            self.fp = open(file, mode=mode + "b")
        else:
            raise ValueError("Invalid mode (use 'r' or 'w')")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.fp.close()

    def _unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        buf = self.fp.read(size)
        if len(buf) != size:
            raise ValueError(f"{self.filename}: truncated checkpoint")
        return struct.unpack(fmt, buf)

    def read(self) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
        """Returns (metadata, arrays)"""
        if self.mode != "r":
            raise IOError("attempted to read from a file opened in write mode")
        self.fp.seek(0, 0)
        if self.fp.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{self.filename}: not a camsynth checkpoint")
        version, meta_len = self._unpack("<LL")
        if version != VERSION:
            raise ValueError(
                f"{self.filename}: unsupported checkpoint version {version}"
            )
        try:
            metadata = json.loads(self.fp.read(meta_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise ValueError(f"{self.filename}: corrupt checkpoint metadata") from err
        (n_arrays,) = self._unpack("<L")
        table = []
        for _ in range(n_arrays):
            (name_len,) = self._unpack("<H")
            name = self.fp.read(name_len).decode("utf-8")
            (ndim,) = self._unpack("<B")
            shape = self._unpack("<" + "Q" * ndim)
            table.append((name, shape))
        arrays = {}
        for name, shape in table:
            count = int(np.prod(shape, dtype=np.int64))
            buf = self.fp.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{self.filename}: truncated checkpoint")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(float)
        return metadata, arrays

    def write(
        self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any] = None
    ):
        if self.mode != "w":
            raise IOError("attempted to write to file opened in read-only mode")
        meta = json.dumps(dict(metadata or {}), sort_keys=True).encode("utf-8")
        self.fp.write(MAGIC)
        self.fp.write(struct.pack("<LL", VERSION, len(meta)))
        self.fp.write(meta)
        self.fp.write(struct.pack("<L", len(arrays)))
        for name, arr in arrays.items():
            bname = name.encode("utf-8")
            shape = np.shape(arr)
            self.fp.write(struct.pack("<H", len(bname)))
            self.fp.write(bname)
            self.fp.write(struct.pack("<B", len(shape)))
            self.fp.write(struct.pack("<" + "Q" * len(shape), *shape))
        for arr in arrays.values():
            self.fp.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
