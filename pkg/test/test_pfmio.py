# -*- coding: utf-8 -*-
# -*- mode: python -*-
import numpy as np
import pytest

from camsynth import pfmio


@pytest.fixture()
def test_file(tmp_path):
    return tmp_path / "depth.pfm"


def test_readwrite_keeps_orientation(test_file):
    depth = np.arange(12, dtype=np.float32).reshape(3, 4)
    depth[0, 0] = np.inf
    with pfmio.pfmfile(test_file, mode="w") as ofp:
        ofp.write(depth)
    with pfmio.pfmfile(test_file) as fp:
        data = fp.read()
    assert data.dtype == np.float32
    assert np.array_equal(data, depth)


def test_big_endian_files(test_file):
    rows = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=">f4")
    test_file.write_bytes(b"Pf\n2 2\n1.0\n" + rows.tobytes())
    with pfmio.pfmfile(test_file) as fp:
        data = fp.read()
    # stored bottom row first
    assert data.tolist() == [[3.0, 4.0], [1.0, 2.0]]


def test_rejects_color_and_garbage(test_file):
    test_file.write_bytes(b"PF\n1 1\n-1.0\n" + bytes(12))
    with pfmio.pfmfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()
    test_file.write_bytes(b"nothing here")
    with pfmio.pfmfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()


def test_write_requires_2d(test_file):
    with pfmio.pfmfile(test_file, mode="w") as ofp:
        with pytest.raises(ValueError):
            ofp.write(np.zeros((2, 2, 3)))
