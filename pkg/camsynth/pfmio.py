# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Read and write grayscale portable float maps (depth buffers)

Files are written little-endian (negative scale) with rows stored from the
bottom of the image to the top, as the format requires. Infinite depth is
stored as-is.
"""
import re

import numpy as np

_header = re.compile(rb"^(Pf|PF)\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s")


class pfmfile:
    """Provides access to a single-channel float image in PFM format

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

    def read(self) -> np.ndarray:
        """Returns the image as an H x W float32 array, top row first"""
        if self.mode != "r":
            raise IOError("attempted to read from a file opened in write mode")
        buf = self.fp.read()
        m = _header.match(buf)
        if m is None:
            raise ValueError(f"{self.filename}: not a PFM file")
        kind, width, height, scale = m.groups()
        if kind != b"Pf":
            raise ValueError(f"{self.filename}: only grayscale PFM is supported")
        width, height, scale = int(width), int(height), float(scale)
        dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
        count = width * height
        data = np.frombuffer(buf, dtype=dtype, count=count, offset=m.end())
        return np.flipud(data.reshape(height, width)).astype(np.float32)

    def write(self, data: np.ndarray):
        """Write an H x W array (converted to float32)"""
        if self.mode != "w":
            raise IOError("attempted to write to file opened in read-only mode")
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError("depth image must be H x W")
        height, width = data.shape
        self.fp.write(b"Pf\n%d %d\n-1.0\n" % (width, height))
        self.fp.write(np.flipud(data).astype("<f4").tobytes())
