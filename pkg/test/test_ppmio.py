# -*- coding: utf-8 -*-
# -*- mode: python -*-
import numpy as np
import pytest

from camsynth import ppmio


@pytest.fixture()
def test_file(tmp_path):
    return tmp_path / "frame.ppm"


def test_badmode(test_file):
    with pytest.raises(ValueError):
        ppmio.ppmfile(test_file, mode="a")


def test_readwrite(test_file):
    frame = np.random.randint(0, 256, (5, 7, 3)).astype(np.uint8)
    with ppmio.ppmfile(test_file, mode="w") as ofp:
        ofp.write(frame)
    assert test_file.read_bytes().startswith(b"P6\n7 5\n255\n")
    with ppmio.ppmfile(test_file) as fp:
        data = fp.read()
    assert data.dtype == np.uint8
    assert np.array_equal(data, frame)


def test_header_comments(test_file):
    test_file.write_bytes(b"P6\n# made by hand\n2 1\n255\n" + bytes(range(6)))
    with ppmio.ppmfile(test_file) as fp:
        data = fp.read()
    assert data.shape == (1, 2, 3)
    assert data[0, 1].tolist() == [3, 4, 5]


def test_rejects_bad_frames(test_file):
    with ppmio.ppmfile(test_file, mode="w") as ofp:
        with pytest.raises(ValueError):
            ofp.write(np.zeros((4, 4, 3), dtype=float))
        with pytest.raises(ValueError):
            ofp.write(np.zeros((4, 4), dtype=np.uint8))


def test_rejects_bad_files(test_file):
    test_file.write_bytes(b"P6\n4 4\n255\n" + bytes(10))
    with ppmio.ppmfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()
    test_file.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with ppmio.ppmfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()
