# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Low-poly triangle meshes for scene assets.

Primitives are built at unit size around the origin and placed with
Mesh.transformed. Every triangle carries one flat RGB color in [0, 1].
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

Color = Tuple[float, float, float]

SKY_COLOR: Color = (0.62, 0.78, 0.95)
FAR_RIDGE_COLOR: Color = (0.55, 0.60, 0.72)
CLOSER_RIDGE_COLOR: Color = (0.45, 0.52, 0.40)
FAR_RIDGE_RADIUS = 180.0
CLOSER_RIDGE_RADIUS = 90.0

# two checker shades per floor texture
FLOOR_COLORS = {
    "brick_stone": ((0.62, 0.36, 0.30), (0.55, 0.53, 0.50)),
    "black_sand": ((0.16, 0.15, 0.15), (0.24, 0.22, 0.21)),
    "green_grass": ((0.24, 0.55, 0.20), (0.20, 0.48, 0.17)),
    "brown_ground": ((0.45, 0.32, 0.20), (0.40, 0.28, 0.17)),
    "yellow_grass": ((0.78, 0.70, 0.30), (0.70, 0.62, 0.26)),
    "light_green_grass": ((0.55, 0.78, 0.40), (0.49, 0.71, 0.35)),
}
TRUNK_COLOR: Color = (0.42, 0.28, 0.16)
FOLIAGE_COLOR: Color = (0.16, 0.45, 0.20)
BUSH_COLOR: Color = (0.22, 0.52, 0.24)
GRASS_COLOR: Color = (0.40, 0.66, 0.25)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=float)
        if c.ndim == 1:
            c = np.broadcast_to(c, (len(f), 3))
        c = np.array(c).reshape(-1, 3)
        if len(c) != len(f):
            raise ValueError("need one color per triangle")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("triangle index out of range")
        for a in (v, f, c):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "colors", c)

    def __len__(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """M x 3 x 3 array of triangle corner positions"""
        return self.vertices[self.faces]

    def areas(self) -> np.ndarray:
        t = self.triangles()
        cross = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def transformed(
        self,
        scale: Union[float, Sequence[float]] = 1.0,
        offset: Sequence[float] = (0.0, 0.0, 0.0),
        yaw: float = 0.0,
    ) -> "Mesh":
        """Scales, rotates about +y by yaw (radians), then translates"""
        c, s = math.cos(yaw), math.sin(yaw)
        R = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        v = self.vertices * np.asarray(scale, dtype=float)
        v = v @ R.T + np.asarray(offset, dtype=float)
        return Mesh(v, self.faces, self.colors)

    def with_color(self, color: Color) -> "Mesh":
        colors = np.broadcast_to(color, (len(self.faces), 3))
        return Mesh(self.vertices, self.faces, colors)


def concat(meshes: Iterable[Mesh]) -> Mesh:
    meshes = list(meshes)
    if not meshes:
        return Mesh(
            np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3))
        )
    offsets = np.cumsum([0] + [len(m.vertices) for m in meshes[:-1]])
    return Mesh(
        np.concatenate([m.vertices for m in meshes]),
        np.concatenate([m.faces + o for m, o in zip(meshes, offsets)]),
        np.concatenate([m.colors for m in meshes]),
    )


@lru_cache(maxsize=None)
def cube(color: Color = (1.0, 1.0, 1.0)) -> Mesh:
    """Unit cube centered on the origin"""
    v = np.array(
        [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]
    )
    # vertex index = 4*ix + 2*iy + iz
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    f = [tri for a, b, c, d in quads for tri in ((a, b, c), (a, c, d))]
    return Mesh(v, f, color)


def _icosahedron():
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    f = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


@lru_cache(maxsize=None)
def icosphere(level: int = 2, color: Color = (1.0, 1.0, 1.0)) -> Mesh:
    """Sphere of radius 0.5 made by subdividing an icosahedron"""
    if level < 0:
        raise ValueError("subdivision level must be non-negative")
    v, f = _icosahedron()
    verts = [tuple(x) for x in v]
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        out = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        f = out
    return Mesh(np.asarray(verts) * 0.5, f, color)


def polygon(color: Color = (1.0, 1.0, 1.0)) -> Mesh:
    """Faceted 'polygon' object: an icosahedron of radius 0.5"""
    return icosphere(0, color)


@lru_cache(maxsize=None)
def cylinder(n: int = 10, color: Color = (1.0, 1.0, 1.0)) -> Mesh:
    """Cylinder of radius 0.5 and height 1 centered on the origin"""
    if n < 3:
        raise ValueError("cylinder needs at least 3 sides")
    a = 2.0 * np.pi * np.arange(n) / n
    ring = np.stack([0.5 * np.sin(a), np.zeros(n), 0.5 * np.cos(a)], axis=1)
    bottom = ring - [0.0, 0.5, 0.0]
    top = ring + [0.0, 0.5, 0.0]
    v = np.concatenate([bottom, top, [[0.0, -0.5, 0.0], [0.0, 0.5, 0.0]]])
    cb, ct = 2 * n, 2 * n + 1
    f = []
    for i in range(n):
        j = (i + 1) % n
        f += [(i, j, n + j), (i, n + j, n + i), (cb, j, i), (ct, n + i, n + j)]
    return Mesh(v, f, color)


@lru_cache(maxsize=None)
def cone(n: int = 10, color: Color = (1.0, 1.0, 1.0)) -> Mesh:
    """Cone with base radius 0.5 on y = 0 and apex at y = 1"""
    if n < 3:
        raise ValueError("cone needs at least 3 sides")
    a = 2.0 * np.pi * np.arange(n) / n
    ring = np.stack([0.5 * np.sin(a), np.zeros(n), 0.5 * np.cos(a)], axis=1)
    v = np.concatenate([ring, [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]])
    apex, base = n, n + 1
    f = []
    for i in range(n):
        j = (i + 1) % n
        f += [(i, j, apex), (base, j, i)]
    return Mesh(v, f, color)


def tree(scale: float = 1.0) -> Mesh:
    """Cone of foliage on a cylinder trunk, standing on y = 0"""
    trunk = cylinder(6, TRUNK_COLOR).transformed(
        (0.16 * scale, 0.6 * scale, 0.16 * scale), (0, 0.3 * scale, 0)
    )
    crown = cone(8, FOLIAGE_COLOR).transformed(
        (0.9 * scale, 1.0 * scale, 0.9 * scale), (0, 0.6 * scale, 0)
    )
    return concat([trunk, crown])


def bush(scale: float = 1.0) -> Mesh:
    return icosphere(1, BUSH_COLOR).transformed(
        (1.0 * scale, 0.7 * scale, 1.0 * scale), (0, 0.25 * scale, 0)
    )


def grass(scale: float = 1.0) -> Mesh:
    """A tuft of three thin cones"""
    blade = cone(4, GRASS_COLOR)
    tufts = [
        blade.transformed(
            (0.12 * scale, 0.3 * scale, 0.12 * scale), (dx * scale, 0, dz * scale)
        )
        for dx, dz in ((-0.12, 0.0), (0.1, 0.08), (0.04, -0.12))
    ]
    return concat(tufts)


def ridgeline(
    radius: float, peaks: int, height: float, color: Color, seed: int
) -> Mesh:
    """A closed ring of mountain triangles around the origin"""
    rng = np.random.default_rng(seed)
    a = 2.0 * np.pi * (np.arange(peaks) + rng.uniform(-0.2, 0.2, peaks)) / peaks
    a = np.sort(a)
    base = np.stack(
        [radius * np.sin(a), np.full(peaks, -1.0), radius * np.cos(a)], axis=1
    )
    mid = np.angle(np.exp(1j * a) + np.exp(1j * np.roll(a, -1)))
    h = height * rng.uniform(0.5, 1.0, peaks)
    tops = np.stack([radius * np.sin(mid), h, radius * np.cos(mid)], axis=1)
    v = np.concatenate([base, tops])
    f = [(i, (i + 1) % peaks, peaks + i) for i in range(peaks)]
    shade = rng.uniform(0.9, 1.1, (peaks, 1)) * np.asarray(color)
    return Mesh(v, f, np.clip(shade, 0.0, 1.0))


def floor_grid(
    extent: float, tiles: int, colors: Tuple[Color, Color], skirt: float = 400.0
) -> Mesh:
    """Checkered square floor on y = 0 with a plain border out to skirt"""
    half = extent / 2.0
    edges = np.linspace(-half, half, tiles + 1)
    xs, zs = np.meshgrid(edges, edges, indexing="ij")
    v = np.stack([xs.ravel(), np.zeros(xs.size), zs.ravel()], axis=1)
    f, c = [], []
    for i in range(tiles):
        for j in range(tiles):
            a = i * (tiles + 1) + j
            b, d = a + tiles + 1, a + 1
            e = b + 1
            color = colors[(i + j) % 2]
            f += [(a, d, e), (a, e, b)]
            c += [color, color]
    grid = Mesh(v, f, c)
    if skirt <= half:
        return grid
    h, s = half, skirt
    sv = np.array(
        [[-h, 0, -h], [h, 0, -h], [h, 0, h], [-h, 0, h],
         [-s, 0, -s], [s, 0, -s], [s, 0, s], [-s, 0, s]],
        dtype=float,
    )
    sf = []
    for i in range(4):
        j = (i + 1) % 4
        sf += [(i, 4 + i, 4 + j), (i, 4 + j, j)]
    return concat([grid, Mesh(sv, sf, colors[0])])


# Variables:
# End:
