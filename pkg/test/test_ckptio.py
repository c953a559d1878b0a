# -*- coding: utf-8 -*-
# -*- mode: python -*-
import numpy as np
import pytest

from camsynth import ckptio


@pytest.fixture()
def test_file(tmp_path):
    return tmp_path / "model.ckpt"


def test_badmode(test_file):
    with pytest.raises(ValueError):
        ckptio.ckptfile(test_file, mode="rw")


def test_readwrite(test_file):
    arrays = {
        "W1": np.random.normal(size=(6, 4)),
        "b1": np.zeros(6),
        "scalar": np.array(2.5),
        "W1.A": np.random.normal(size=(2, 4)),
    }
    with ckptio.ckptfile(test_file, mode="w") as ofp:
        ofp.write(arrays, {"kind": "adapter", "rank": 2})
    with ckptio.ckptfile(test_file) as fp:
        meta, data = fp.read()
    assert meta == {"kind": "adapter", "rank": 2}
    assert list(data) == list(arrays)
    for name, arr in arrays.items():
        assert data[name].shape == np.shape(arr)
        assert np.array_equal(data[name], arr)


def test_identical_inputs_identical_bytes(tmp_path):
    arrays = {"W": np.arange(6.0).reshape(2, 3)}
    for name in ("a.ckpt", "b.ckpt"):
        with ckptio.ckptfile(tmp_path / name, mode="w") as ofp:
            ofp.write(arrays, {"seed": 1})
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_truncated(test_file):
    with ckptio.ckptfile(test_file, mode="w") as ofp:
        ofp.write({"W": np.ones((10, 10))})
    test_file.write_bytes(test_file.read_bytes()[:-8])
    with ckptio.ckptfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()


def test_not_a_checkpoint(test_file):
    test_file.write_bytes(b"PK\x03\x04" + bytes(20))
    with ckptio.ckptfile(test_file) as fp:
        with pytest.raises(ValueError):
            fp.read()


def test_mode_checks(test_file):
    with ckptio.ckptfile(test_file, mode="w") as ofp:
        with pytest.raises(IOError):
            ofp.read()
    with ckptio.ckptfile(test_file) as fp:
        with pytest.raises(IOError):
            fp.write({})
