"""Parallel-jaw gripper geometry and footprint rasterization.

At rotation 0 the jaws open along +x: the jaw interior spans ``aperture_w``
along x and ``plate_lateral_width`` along y, and the two plates sit
immediately left and right of it. Positive rotations turn the opening axis
from +x towards +y (image rows), so the opening axis at ``rθ`` is
``(cos rθ, sin rθ)`` in ``(x, y)`` pixel coordinates.

A pixel belongs to a rectangle iff its centre does, using half-open bounds
``[-a, a)`` in the gripper frame so that a 40 mm interior at 1 mm/px is
exactly 40 px wide and interior and plates never share a pixel.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

ACTOBOTICS_MAX_APERTURE = 71.12  # mm
DEFAULT_ORIENTATION_STEP = 15.0  # degrees


@dataclass(frozen=True)
class GripperSpec:
    aperture_w: float = 40.0
    plate_lateral_width: float = 20.0
    plate_thickness: float = 3.0
    max_aperture: float = ACTOBOTICS_MAX_APERTURE
    insertion_depth_rz: float = 0.0

    def __post_init__(self):
        if not 0 < self.aperture_w <= self.max_aperture:
            raise ValueError(
                f"aperture_w must satisfy 0 < w <= max_aperture ({self.max_aperture} mm), "
                f"got {self.aperture_w}"
            )
        if self.plate_lateral_width <= 0 or self.plate_thickness <= 0:
            raise ValueError("plate dimensions must be > 0")
        if self.insertion_depth_rz < 0:
            raise ValueError("insertion_depth_rz must be >= 0")

    def with_aperture(self, w: float) -> "GripperSpec":
        return replace(self, aperture_w=float(w))

    @property
    def spread_extent(self) -> float:
        """Outward travel per plate when opening from ``aperture_w`` to the maximum."""
        return (self.max_aperture - self.aperture_w) / 2.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GripperSpec":
        known = {k: float(v) for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_json(cls, path) -> "GripperSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class FootprintMasks:
    gc: np.ndarray  # jaw interior
    gcp: np.ndarray  # both plate footprints
    anchor: tuple[int, int]  # (x, y) of the gripper centre inside the window
    rotation: float  # degrees

    @property
    def size(self) -> int:
        return self.gc.shape[0]


def _snap(v: float) -> float:
    # exact zeros/ones at quarter turns keep the half-open bounds symmetric
    return round(v, 12) + 0.0


def kernel_radius(spec: GripperSpec, scale: float) -> int:
    """Half-size in pixels of the odd window holding the footprint at any rotation."""
    half_u = spec.aperture_w / 2.0 + spec.plate_thickness
    half_v = spec.plate_lateral_width / 2.0
    return int(math.floor(math.hypot(half_u, half_v) / scale))


def gripper_frame(rotation: float, scale: float, radius: int):
    """(u, v) gripper-frame coordinates in mm of every pixel centre in the window."""
    theta = math.radians(rotation)
    c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
    offs = np.arange(-radius, radius + 1, dtype=np.float64) * scale
    y, x = np.meshgrid(offs, offs, indexing="ij")
    u = x * c + y * s
    v = -x * s + y * c
    return u, v


@lru_cache(maxsize=512)
def _rasterize(spec: GripperSpec, rotation: float, scale: float) -> FootprintMasks:
    r = kernel_radius(spec, scale)
    u, v = gripper_frame(rotation, scale, r)
    hw = spec.aperture_w / 2.0
    hl = spec.plate_lateral_width / 2.0
    t = spec.plate_thickness
    across = (v >= -hl) & (v < hl)
    gc = across & (u >= -hw) & (u < hw)
    right = across & (u >= hw) & (u < hw + t)
    left = across & (u >= -hw - t) & (u < -hw)
    for name, m in (("jaw interior", gc), ("right plate", right), ("left plate", left)):
        if not m.any():
            raise ValueError(f"{name} rasterizes to zero pixels at {scale} mm/px; use a finer scale")
    gcp = left | right
    gc.setflags(write=False)
    gcp.setflags(write=False)
    return FootprintMasks(gc=gc, gcp=gcp, anchor=(r, r), rotation=rotation)


def rasterize_footprints(spec: GripperSpec, rotation: float, scale: float) -> FootprintMasks:
    """Rasterize the jaw interior ``gc`` and plate footprints ``gcp`` at ``rotation``."""
    if not scale > 0:
        raise ValueError("scale must be > 0")
    if not 0 <= rotation < 180:
        raise ValueError(f"rotation must lie in [0, 180) degrees, got {rotation}")
    return _rasterize(spec, float(rotation), float(scale))


def sweep_orientations(step: float = DEFAULT_ORIENTATION_STEP) -> list[float]:
    """Orientations ``0, step, 2*step, ...`` below 180 degrees."""
    if not 0 < step <= 90:
        raise ValueError(f"orientation step must lie in (0, 90], got {step}")
    n = math.ceil(180.0 / step - 1e-9)
    return [k * step for k in range(n) if k * step < 180.0]


def opening_axis(rotation: float) -> np.ndarray:
    theta = math.radians(rotation)
    return np.array([_snap(math.cos(theta)), _snap(math.sin(theta))])
