# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
camsynth renders low-poly training videos with scripted camera motions and
demonstrates motion/appearance disentanglement with a small diffusion trainer
whose appearance adapter is dropped at inference.
"""
try:
    from importlib.metadata import version

    __version__ = version("camsynth")
except Exception:
    # If package is not installed (e.g. during development)
    __version__ = "unknown"
