# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Read and write binary portable pixmap (P6) frames

Only maxval 255 is supported, which is what the renderer writes.
"""
import re

import numpy as np

MAGIC = b"P6"
MAXVAL = 255
_header = re.compile(rb"^P6\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


class ppmfile:
    """Provides access to a single RGB frame in binary PPM format

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

    def read(self) -> np.ndarray:
        """Returns the frame as an H x W x 3 uint8 array"""
        if self.mode != "r":
            raise IOError("attempted to read from a file opened in write mode")
        buf = self.fp.read()
        m = _header.match(buf)
        if m is None:
            raise ValueError(f"{self.filename}: not a binary PPM file")
        width, height, maxval = (int(x) for x in m.groups())
        if maxval != MAXVAL:
            raise ValueError(f"{self.filename}: unsupported maxval {maxval}")
        nbytes = width * height * 3
        data = buf[m.end() : m.end() + nbytes]
        if len(data) != nbytes:
            raise ValueError(f"{self.filename}: truncated pixel data")
        return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()

    def write(self, data: np.ndarray):
        """Write an H x W x 3 uint8 frame"""
        if self.mode != "w":
            raise IOError("attempted to write to file opened in read-only mode")
        data = np.asarray(data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError("frame must be H x W x 3")
        if data.dtype != np.uint8:
            raise ValueError("frame must be uint8")
        height, width = data.shape[:2]
        self.fp.write(b"%s\n%d %d\n%d\n" % (MAGIC, width, height, MAXVAL))
        self.fp.write(np.ascontiguousarray(data).tobytes())
