# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Provides read and write access to frame, depth, video and checkpoint files.
This is based on a plugin architecture: handlers are registered to the
`camsynth.io` entry point group under the file extension they handle.

"""
from importlib import import_module
from importlib.metadata import entry_points
from pathlib import Path
from typing import Dict, List, Union

_entrypoint = "camsynth.io"

# handlers shipped with the package, used when the distribution metadata is
# not available (e.g. running from a source checkout)
_builtin: Dict[str, str] = {
    ".ppm": "camsynth.ppmio:ppmfile",
    ".pfm": "camsynth.pfmio:pfmfile",
    ".npy": "camsynth.npyio:npyfile",
    ".ckpt": "camsynth.ckptio:ckptfile",
}


def _select(ext: str):
    try:
        return list(entry_points(group=_entrypoint, name=ext))
    except TypeError:
        # shim for python < 3.10
        return [ep for ep in entry_points().get(_entrypoint, []) if ep.name == ext]


def _load_builtin(ext: str):
    module, _, name = _builtin[ext].partition(":")
    return getattr(import_module(module), name)


def open(filename: Union[str, Path], *args, **kwargs):
    """Open a file and return an appropriate object, based on extension.

    The handler class is dynamically dispatched using Python's entry points system.
    Arguments are passed to the initializer for the handler.

    Raises:
        ValueError: If no handler is found for the file extension

    """
    ext = Path(filename).suffix.lower()
    eps = _select(ext)
    if eps:
        cls = eps[0].load()
    elif ext in _builtin:
        cls = _load_builtin(ext)
    else:
        raise ValueError(f"No handler defined for files of type '{ext}'")
    return cls(filename, *args, **kwargs)


def list_plugins() -> List[str]:
    """Returns the extensions that have a registered handler"""
    try:
        eps = entry_points(group=_entrypoint)
    except TypeError:
        eps = entry_points().get(_entrypoint, [])
    return sorted(set(ep.name for ep in eps) | set(_builtin))


def extended_shape(shape1, shape2):
    """Shape that results if two arrays are appended along the first dimension"""
    from itertools import zip_longest

    for i, (a, b) in enumerate(zip_longest(shape1, shape2, fillvalue=1)):
        if i == 0:
            yield a + b
        elif a == b:
            yield a
        else:
            raise ValueError(
                "data shape is not compatible with previously written data"
            )


# Variables:
# End:
