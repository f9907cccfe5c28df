"""Scatterer geometry, contrast rasterization and pixel grids.

Array layout used throughout the package: a square grid with M cells per axis
is stored as ``values[row, col]`` where ``row`` indexes y (ascending) and
``col`` indexes x (ascending), i.e. ``np.meshgrid(c, c)`` ordering.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

# Number of samples used for the polygonal approximation of parametric curves.
CURVE_SAMPLES = 1024


def _rotate(points, angle):
    c, s = math.cos(angle), math.sin(angle)
    return points @ np.array([[c, s], [-s, c]])


def _to_local(points, center, rotation):
    pts = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(center)
    return _rotate(pts, -rotation)


@dataclass(frozen=True)
class Shape:
    """Base class for an analytic scatterer with constant contrast ``q``."""

    center: tuple = (0.0, 0.0)
    q: float = 1.0
    rotation: float = 0.0

    kind = "shape"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError(f"{self.kind}: center must have two coordinates")
        if not self.q >= -1.0:
            raise ValueError(f"{self.kind}: contrast q={self.q} is below -1")
        self._validate()

    def _validate(self):
        pass

    def boundary(self, n=CURVE_SAMPLES) -> np.ndarray:
        """Sampled closed boundary curve, shape ``(n, 2)``, counterclockwise."""
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        local = self._local_curve(t)
        return _rotate(local, self.rotation) + np.asarray(self.center)

    def _local_curve(self, t):
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def value_at(self, points) -> np.ndarray:
        """Contrast at each point (0 where the point is outside)."""
        return np.where(self.contains(points), self.q, 0.0)

    def extent(self) -> float:
        """Largest distance from the origin to the shape's boundary."""
        return float(np.max(np.hypot(*self.boundary().T)))

    def box_extent(self) -> float:
        """Largest coordinate magnitude (sup-norm) reached by the shape."""
        return float(np.max(np.abs(self.boundary())))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Disc(Shape):
    radius: float = 1.0

    kind = "disc"

    def _validate(self):
        if not self.radius > 0:
            raise ValueError("disc: radius must be positive")

    def _local_curve(self, t):
        return self.radius * np.column_stack([np.cos(t), np.sin(t)])

    def contains(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(self.center)
        return np.hypot(p[:, 0], p[:, 1]) < self.radius

    def extent(self):
        return math.hypot(*self.center) + self.radius

    def box_extent(self):
        return max(abs(c) for c in self.center) + self.radius

    def to_dict(self):
        return {"kind": "disc", "center": list(self.center), "radius": self.radius, "q": self.q}


@dataclass(frozen=True)
class Ellipse(Shape):
    semi_axes: tuple = (1.0, 0.5)

    kind = "ellipse"

    def _validate(self):
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        if len(self.semi_axes) != 2 or min(self.semi_axes) <= 0:
            raise ValueError("ellipse: semi_axes must be two positive reals")

    def _local_curve(self, t):
        a, b = self.semi_axes
        return np.column_stack([a * np.cos(t), b * np.sin(t)])

    def contains(self, points):
        p = _to_local(points, self.center, self.rotation)
        a, b = self.semi_axes
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 < 1.0

    def to_dict(self):
        return {"kind": "ellipse", "center": list(self.center), "semi_axes": list(self.semi_axes),
                "rotation": self.rotation, "q": self.q}


@dataclass(frozen=True)
class _CurveShape(Shape):
    """Shape bounded by a parametric curve; membership by winding number."""

    scale: float = 1.0

    def _validate(self):
        if not self.scale > 0:
            raise ValueError(f"{self.kind}: scale must be positive")

    def contains(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        curve = self.boundary()
        lo, hi = curve.min(axis=0), curve.max(axis=0)
        inside_box = np.all((pts > lo) & (pts < hi), axis=1)
        out = np.zeros(len(pts), dtype=bool)
        if inside_box.any():
            wn = kernels.winding_numbers(curve, pts[inside_box])
            out[inside_box] = wn != 0
        return out

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "scale": self.scale,
                "rotation": self.rotation, "q": self.q}


@dataclass(frozen=True)
class Kite(_CurveShape):
    kind = "kite"

    def _local_curve(self, t):
        x = np.cos(t) + 0.65 * np.cos(2 * t) - 0.65
        y = 1.5 * np.sin(t)
        return self.scale * np.column_stack([x, y])


@dataclass(frozen=True)
class Nut(_CurveShape):
    kind = "nut"

    def _local_curve(self, t):
        r = np.sqrt(0.75 + 0.25 * np.cos(2 * t))
        return self.scale * np.column_stack([r * np.cos(t), r * np.sin(t)])


@dataclass(frozen=True)
class Raster(Shape):
    """Gridded contrast on the square ``center +- halfwidth`` (no rotation).

    ``values[row, col]`` follows the package layout; sampling is nearest-cell.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))
    halfwidth: float = 1.0
    source: str | None = None

    kind = "raster"

    def _validate(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError("raster: values must be a square 2-D grid")
        if np.any(vals < -1.0):
            raise ValueError("raster: contrast values below -1")
        if not self.halfwidth > 0:
            raise ValueError("raster: halfwidth must be positive")
        if self.rotation != 0.0:
            raise ValueError("raster: rotation is not supported")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return (self.center, self.halfwidth, self.source) == (other.center, other.halfwidth, other.source) \
            and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.center, self.halfwidth, self.values.tobytes()))

    def _local_curve(self, t):
        # the bounding square, traversed counterclockwise
        h = self.halfwidth
        sq = np.array([[h, -h], [h, h], [-h, h], [-h, -h]])
        idx = np.minimum((t / (2 * np.pi) * 4).astype(int), 3)
        frac = (t / (2 * np.pi) * 4) - idx
        return sq[idx] + frac[:, None] * (sq[(idx + 1) % 4] - sq[idx])

    def _sample(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(self.center)
        m = self.values.shape[0]
        h = self.halfwidth
        inside = np.all(np.abs(p) < h, axis=1)
        col = np.clip(((p[:, 0] + h) / (2 * h) * m).astype(int), 0, m - 1)
        row = np.clip(((p[:, 1] + h) / (2 * h) * m).astype(int), 0, m - 1)
        return np.where(inside, self.values[row, col], 0.0)

    def contains(self, points):
        return self._sample(points) != 0.0

    def value_at(self, points):
        return self._sample(points)

    def extent(self):
        return math.hypot(abs(self.center[0]) + self.halfwidth, abs(self.center[1]) + self.halfwidth)

    def box_extent(self):
        return max(abs(c) for c in self.center) + self.halfwidth

    def to_dict(self):
        d = {"kind": "raster", "center": list(self.center), "halfwidth": self.halfwidth}
        if self.source:
            d["file"] = self.source
        else:
            d["values"] = self.values.tolist()
        return d


SHAPE_KINDS = {cls.kind: cls for cls in (Disc, Ellipse, Kite, Nut, Raster)}


def shape_contains(shape: Shape, point) -> bool | np.ndarray:
    """True where ``point`` lies strictly inside ``shape``.

    Accepts a single point (returns a bool) or an ``(n, 2)`` array.
    """
    pts = np.asarray(point, dtype=float)
    res = shape.contains(pts.reshape(-1, 2))
    return bool(res[0]) if pts.ndim == 1 else res


@dataclass(frozen=True)
class Scene:
    shapes: tuple
    k: float
    R: float

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        if not self.k > 0:
            raise ValueError(f"wavenumber k must be positive, got {self.k}")
        if not self.R > 0:
            raise ValueError(f"bounding radius R must be positive, got {self.R}")
        for i, s in enumerate(self.shapes):
            if s.extent() > self.R * (1 + 1e-12):
                raise ValueError(
                    f"shape #{i} ({s.kind}) reaches radius {s.extent():.4g} beyond R={self.R}")

    @property
    def q_min(self) -> float:
        return min((_shape_range(s)[0] for s in self.shapes), default=0.0)

    @property
    def q_max(self) -> float:
        return max((_shape_range(s)[1] for s in self.shapes), default=0.0)

    def to_dict(self) -> dict:
        return {"k": self.k, "R": self.R, "shapes": [s.to_dict() for s in self.shapes]}


def _shape_range(s):
    if isinstance(s, Raster):
        nz = s.values[s.values != 0]
        return (float(nz.min()), float(nz.max())) if nz.size else (0.0, 0.0)
    return s.q, s.q


def shape_from_dict(d: dict, base_dir: str = ".") -> Shape:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r}; expected one of {sorted(SHAPE_KINDS)}")
    if kind == "raster":
        if "file" in d:
            path = os.path.join(base_dir, d.pop("file"))
            d["values"] = read_raster_csv(path)
            d["source"] = os.path.relpath(path, base_dir)
        d.pop("q", None)
    return SHAPE_KINDS[kind](**d)


def read_raster_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    vals = np.array(rows)
    if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
        raise ValueError(f"{path}: raster must have M rows of M values")
    return vals


def scene_from_dict(d: dict, base_dir: str = ".") -> Scene:
    try:
        k, R = float(d["k"]), float(d["R"])
    except KeyError as exc:
        raise ValueError(f"scene is missing required key {exc}") from None
    shapes = [shape_from_dict(s, base_dir) for s in d.get("shapes", [])]
    return Scene(shapes, k, R)


def load_scene(path) -> Scene:
    with open(path) as fh:
        d = json.load(fh)
    return scene_from_dict(d, os.path.dirname(os.path.abspath(path)))


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class ContrastField:
    """Cell-centred samples of the contrast on ``[-b, b]^2``."""

    box_halfwidth: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or vals.shape[0] < 2:
            raise ValueError("contrast values must be an MxM array with M >= 2")
        if np.any(vals < -1.0):
            raise ValueError("contrast values below -1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_halfwidth / self.resolution

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    def axis(self) -> np.ndarray:
        return cell_centers_1d(self.box_halfwidth, self.resolution)

    def centers(self) -> np.ndarray:
        """Cell centres as an ``(M, M, 2)`` array in ``[row, col]`` layout."""
        c = self.axis()
        X, Y = np.meshgrid(c, c)
        return np.stack([X, Y], axis=-1)

    def scaled(self, factor: float) -> "ContrastField":
        return ContrastField(self.box_halfwidth, factor * self.values)


def cell_centers_1d(halfwidth, m):
    h = 2.0 * halfwidth / m
    return -halfwidth + (np.arange(m) + 0.5) * h


def rasterize(scene: Scene, box_halfwidth: float, resolution: int) -> ContrastField:
    """Sample the scene's contrast at cell centres; later shapes win on overlap."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if box_halfwidth < scene.R:
        raise ValueError(f"box half-width {box_halfwidth} is smaller than the scene radius {scene.R}")
    for i, s in enumerate(scene.shapes):
        if s.box_extent() > box_halfwidth:
            raise ValueError(f"shape #{i} ({s.kind}) extends beyond the box [-{box_halfwidth}, {box_halfwidth}]^2")
    c = cell_centers_1d(box_halfwidth, resolution)
    X, Y = np.meshgrid(c, c)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = np.zeros(len(pts))
    for s in scene.shapes:
        inside = s.contains(pts)
        vals = np.where(inside, s.value_at(pts), vals)
    return ContrastField(box_halfwidth, vals.reshape(resolution, resolution))


@dataclass(frozen=True)
class PixelGrid:
    """Uniform ``J1 x J1`` partition of ``[-R, R]^2``; pixel j = row * J1 + col."""

    R: float
    pixels_per_axis: int

    def __post_init__(self):
        if not self.R > 0 or self.pixels_per_axis < 1:
            raise ValueError("pixel grid needs R > 0 and at least one pixel per axis")

    @property
    def J(self) -> int:
        return self.pixels_per_axis ** 2

    @property
    def side(self) -> float:
        return 2.0 * self.R / self.pixels_per_axis

    @property
    def pixel_area(self) -> float:
        return self.side ** 2

    @property
    def centers(self) -> np.ndarray:
        c = cell_centers_1d(self.R, self.pixels_per_axis)
        X, Y = np.meshgrid(c, c)
        return np.column_stack([X.ravel(), Y.ravel()])

    def rows_cols(self):
        j = np.arange(self.J)
        return j // self.pixels_per_axis, j % self.pixels_per_axis


def make_pixel_grid(R: float, pixels_per_axis: int) -> PixelGrid:
    return PixelGrid(float(R), int(pixels_per_axis))


def region_mask(shapes: Sequence[Shape], points) -> np.ndarray:
    """True where a point lies inside any of the shapes."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.zeros(len(pts), dtype=bool)
    for s in shapes:
        out |= s.contains(pts)
    return out


def distance_to_shapes(shapes: Sequence[Shape], points) -> np.ndarray:
    """Euclidean distance to the union of shapes (0 inside)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = np.full(len(pts), np.inf)
    for s in shapes:
        curve = s.boundary()
        for start in range(0, len(pts), 2048):
            blk = pts[start:start + 2048]
            dist = np.min(np.hypot(blk[:, None, 0] - curve[None, :, 0],
                                   blk[:, None, 1] - curve[None, :, 1]), axis=1)
            d[start:start + 2048] = np.minimum(d[start:start + 2048], dist)
    d[region_mask(shapes, pts)] = 0.0
    return d
