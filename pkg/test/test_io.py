# -*- coding: utf-8 -*-
# -*- mode: python -*-
import pytest

from camsynth import ckptio, io, npyio, pfmio, ppmio


def test_included_plugins():
    formats = io.list_plugins()
    assert set(formats) == {".ckpt", ".npy", ".pfm", ".ppm"}


@pytest.mark.parametrize(
    "name,cls",
    [
        ("frame.ppm", ppmio.ppmfile),
        ("depth.pfm", pfmio.pfmfile),
        ("video.npy", npyio.npyfile),
        ("base.ckpt", ckptio.ckptfile),
    ],
)
def test_open_dispatches_on_extension(tmp_path, name, cls):
    with io.open(tmp_path / name, "w") as fp:
        assert isinstance(fp, cls)


def test_extension_is_case_insensitive(tmp_path):
    with io.open(tmp_path / "FRAME.PPM", "w") as fp:
        assert isinstance(fp, ppmio.ppmfile)


def test_unsupported_format(tmp_path):
    tmp_file = tmp_path / "test.blah"
    with pytest.raises(ValueError):
        _fp = io.open(tmp_file, "w")


def test_extended_shape():
    assert tuple(io.extended_shape((4, 8, 8, 3), (2, 8, 8, 3))) == (6, 8, 8, 3)
    with pytest.raises(ValueError):
        tuple(io.extended_shape((4, 8, 8, 3), (2, 8, 6, 3)))
