"""Graspability-index planning with the spread-and-pick extension.

For one gripper rotation the pipeline is

    wc  = Oc  * gc             placements with target material between the jaws
    wcp = Ocp * gcp            placements where a plate lands on material
    G   = (wc & ~wcp) * g      smoothed collision-free contact
    G'  = wcp * g              smoothed collision density

where ``*`` is :func:`convolve`. The grasp point maximises G over pixels
with ``wcp == 0``; the entanglement point maximises G' over ``wcp == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .depth_scene import DepthMap, highest_point, threshold_collision, threshold_target
from .gripper import (
    DEFAULT_ORIENTATION_STEP,
    GripperSpec,
    kernel_radius,
    opening_axis,
    rasterize_footprints,
    sweep_orientations,
)

DEFAULT_SIGMA_MM = 5.0


def convolve(grid, kernel, anchor: tuple[int, int] | None = None) -> np.ndarray:
    """Zero-padded, same-size ``out[p] = sum_q grid[p + q - anchor] * kernel[q]``.

    Terms are accumulated in raster order of the kernel, so the result is
    bit-identical to a direct nested-loop sum taken in the same order. Zero
    kernel entries are skipped.
    """
    grid = np.asarray(grid, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if grid.ndim != 2 or kernel.ndim != 2:
        raise ValueError("convolve expects 2D grid and kernel")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel dimensions must be odd, got {kernel.shape}")
    ax, ay = (kw // 2, kh // 2) if anchor is None else anchor
    if not (0 <= ax < kw and 0 <= ay < kh):
        raise ValueError(f"anchor {anchor} outside kernel of shape {kernel.shape}")
    h, w = grid.shape
    padded = np.zeros((h + kh - 1, w + kw - 1))
    padded[ay : ay + h, ax : ax + w] = grid
    out = np.zeros((h, w))
    for qy, qx in zip(*np.nonzero(kernel)):
        out += kernel[qy, qx] * padded[qy : qy + h, qx : qx + w]
    return out


def gaussian_kernel(sigma_px: float, radius: int | None = None) -> np.ndarray:
    """Normalised odd Gaussian kernel; ``sigma_px <= 0`` gives the 1x1 identity."""
    if sigma_px <= 0:
        return np.ones((1, 1))
    if radius is None:
        radius = max(1, math.ceil(3.0 * sigma_px))
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (ax / sigma_px) ** 2)
    g = np.outer(g1, g1)
    return g / g.sum()


def _binary_region(mask, footprint) -> np.ndarray:
    """``convolve(mask, footprint) > 0`` for binary inputs, as an OR of shifts."""
    mask = np.asarray(mask, dtype=bool)
    footprint = np.asarray(footprint, dtype=bool)
    kh, kw = footprint.shape
    h, w = mask.shape
    padded = np.zeros((h + kh - 1, w + kw - 1), dtype=bool)
    padded[kh // 2 : kh // 2 + h, kw // 2 : kw // 2 + w] = mask
    out = np.zeros((h, w), dtype=bool)
    for qy, qx in zip(*np.nonzero(footprint)):
        out |= padded[qy : qy + h, qx : qx + w]
    return out


def contact_region(Oc, gc) -> np.ndarray:
    return _binary_region(Oc, gc)


def collision_region(Ocp, gcp) -> np.ndarray:
    return _binary_region(Ocp, gcp)


def _support_convolve(mask, kernel) -> np.ndarray:
    # convolve() restricted to a window around the nonzero input: outside it
    # the full result is exactly 0.0, inside it every term is the same
    ys, xs = np.nonzero(mask)
    out = np.zeros(mask.shape)
    if ys.size == 0:
        return out
    ry, rx = kernel.shape[0] // 2, kernel.shape[1] // 2
    y0, y1 = max(0, ys.min() - 2 * ry), min(mask.shape[0], ys.max() + 2 * ry + 1)
    x0, x1 = max(0, xs.min() - 2 * rx), min(mask.shape[1], xs.max() + 2 * rx + 1)
    out[y0:y1, x0:x1] = convolve(mask[y0:y1, x0:x1], kernel)
    return out


def graspability_map(wc, wcp, g) -> np.ndarray:
    free = np.logical_and(wc, np.logical_not(wcp))
    return _support_convolve(free, np.asarray(g, dtype=np.float64))


def entanglement_map(wcp, g) -> np.ndarray:
    return convolve(wcp, g)


def _masked_argmax(values: np.ndarray, allowed: np.ndarray):
    if not allowed.any():
        return None, 0.0
    f = np.where(allowed, values, 0.0)
    flat = int(np.argmax(f))
    y, x = divmod(flat, f.shape[1])
    return (x, y), float(f[y, x])


def find_grasp_point(G, wcp, rotation: float):
    """Collision-free peak ``(x, y, rotation)`` of G, or None when no peak exists."""
    pos, peak = _masked_argmax(np.asarray(G), ~np.asarray(wcp, dtype=bool))
    if pos is None or peak <= 0:
        return None
    return (pos[0], pos[1], rotation)


def find_entanglement_point(Gprime, wcp, rotation: float):
    """Peak ``(x, y, rotation)`` of G' inside the collision region, or None."""
    pos, _ = _masked_argmax(np.asarray(Gprime), np.asarray(wcp, dtype=bool))
    if pos is None:
        return None
    return (pos[0], pos[1], rotation)


@dataclass(frozen=True, eq=False)
class GraspabilityMaps:
    wc: np.ndarray
    wcp: np.ndarray
    G: np.ndarray
    Gprime: np.ndarray | None
    rotation: float


@dataclass(frozen=True, eq=False)
class GraspPlan:
    grasp: tuple | None  # Or = (x, y, rθ) in pixels/degrees
    entanglement: tuple | None = None  # Er = (x, y, rθ)
    spread_direction: tuple[float, float] | None = None  # unit (dx, dy), Or -> Er
    spread_rotation: float | None = None  # gripper rotation aligned with the spread line
    spread_extent: float = 0.0  # mm of outward travel per plate
    score: float = 0.0
    maps: GraspabilityMaps | None = field(default=None, repr=False)

    @property
    def found(self) -> bool:
        return self.grasp is not None

    def __eq__(self, other):
        if not isinstance(other, GraspPlan):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        def pt(p):
            return None if p is None else {"x": int(p[0]), "y": int(p[1]), "rtheta_deg": float(p[2])}

        return {
            "Or": pt(self.grasp),
            "Er": pt(self.entanglement),
            "rtheta_deg": None if self.grasp is None else float(self.grasp[2]),
            "spread_direction": None if self.spread_direction is None else list(self.spread_direction),
            "spread_rotation_deg": self.spread_rotation,
            "spread_extent_mm": self.spread_extent,
            "score": self.score,
        }


def spread_line(grasp, entanglement, rotation: float):
    """Unit direction Or -> Er and the gripper rotation in [0, 180) aligned with it."""
    dx = entanglement[0] - grasp[0]
    dy = entanglement[1] - grasp[1]
    dist = math.hypot(dx, dy)
    if dist < 1.0:
        axis = opening_axis(rotation)
        return (float(axis[0]), float(axis[1])), float(rotation)
    direction = (dx / dist, dy / dist)
    angle = math.degrees(math.atan2(dy, dx)) % 180.0
    return direction, angle


def plan_from_masks(Oc, Ocp, spec: GripperSpec, scale: float, sigma_mm: float = DEFAULT_SIGMA_MM,
                    orientations=None, keepout=None, keep_maps: bool = False,
                    cache: dict | None = None) -> GraspPlan:
    """Orientation sweep on precomputed target/collision regions.

    ``keepout`` marks pixels no plate may cover (container walls); it blocks
    grasp points but does not count as entangled material when locating Er.
    Among rotations with a peak, the highest peak wins and ties go to the
    smaller rotation. ``cache`` may be shared between calls with the same
    ``Oc``, ``keepout`` and gripper geometry to reuse the regions that do not
    depend on ``Ocp``.
    """
    if not sigma_mm > 0:
        raise ValueError("sigma must be > 0 mm")
    if orientations is None:
        orientations = sweep_orientations(DEFAULT_ORIENTATION_STEP)
    g = gaussian_kernel(sigma_mm / scale)

    best = None
    for rotation in orientations:
        fp = rasterize_footprints(spec, rotation, scale)
        if cache is not None and rotation in cache:
            wc, walls = cache[rotation]
        else:
            wc = contact_region(Oc, fp.gc)
            walls = None if keepout is None else collision_region(keepout, fp.gcp)
            if cache is not None:
                cache[rotation] = (wc, walls)
        wcp = collision_region(Ocp, fp.gcp)
        blocked = wcp if walls is None else wcp | walls
        G = graspability_map(wc, blocked, g)
        cand = find_grasp_point(G, blocked, rotation)
        if cand is None:
            continue
        peak = float(G[cand[1], cand[0]])
        if best is None or peak > best[1]:
            best = (cand, peak, wc, wcp, G)
    if best is None:
        return GraspPlan(grasp=None)

    grasp, score, wc, wcp, G = best
    Gprime = entanglement_map(wcp, g)
    ent = find_entanglement_point(Gprime, wcp, grasp[2])
    direction = rot = None
    if ent is not None:
        direction, rot = spread_line(grasp, ent, grasp[2])
    return GraspPlan(
        grasp=grasp,
        entanglement=ent,
        spread_direction=direction,
        spread_rotation=rot,
        spread_extent=spec.spread_extent,
        score=score,
        maps=GraspabilityMaps(wc, wcp, G, Gprime, grasp[2]) if keep_maps else None,
    )


def plan_grasp(d: DepthMap, spec: GripperSpec, sigma_mm: float = DEFAULT_SIGMA_MM,
               step: float = DEFAULT_ORIENTATION_STEP, orientations=None,
               target_height: float | None = None, keep_maps: bool = False) -> GraspPlan:
    """Sweep gripper rotations, pick the best collision-free point, then locate Er.

    The target region is thresholded at the highest point unless
    ``target_height`` is given; the collision region at the gripper's
    insertion depth. A scene with no material, or where every rotation is
    blocked, yields a plan with ``grasp=None``.
    """
    if orientations is None:
        orientations = sweep_orientations(step)
    _, _, top = highest_point(d)
    if target_height is None:
        target_height = top
    if top <= 0 or target_height > top:
        return GraspPlan(grasp=None)
    Oc = threshold_target(d, target_height)
    Ocp = threshold_collision(d, spec.insertion_depth_rz)
    return plan_from_masks(Oc, Ocp, spec, d.scale, sigma_mm, orientations, keep_maps=keep_maps)


def plan_with_clearance(d: DepthMap, spec: GripperSpec, rz_step: float, sigma_mm: float = DEFAULT_SIGMA_MM,
                        step: float = DEFAULT_ORIENTATION_STEP, walled: bool = False,
                        keep_maps: bool = False):
    """Lowest insertion depth on the ladder ``rz0 + k*rz_step`` that admits a grasp.

    In a dense pile nothing is collision-free at the floor, so the plates are
    allowed to stop higher. Raising rz only shrinks the collision region, so
    feasibility is monotone along the ladder and the lowest feasible rung is
    found by bisection. With ``walled`` the map is a container: plates may
    not land outside it. Returns ``(plan, rz)``; ``rz`` is None without a plan.
    """
    if not rz_step > 0:
        raise ValueError("rz_step must be > 0")
    _, _, top = highest_point(d)
    if top <= 0:
        return GraspPlan(grasp=None), None
    orientations = sweep_orientations(step)
    Oc = threshold_target(d, top)
    keepout = None
    margin = 0
    if walled:
        # a candidate centre lies within one kernel radius of material, so its
        # plates lie within two; the ring must be at least that wide
        margin = 2 * kernel_radius(spec, d.scale) + 1
        Oc = np.pad(Oc, margin)
        keepout = np.pad(np.zeros(d.shape, dtype=bool), margin, constant_values=True)
    cache: dict = {}

    def attempt(rz):
        Ocp = threshold_collision(d, rz)
        if walled:
            Ocp = np.pad(Ocp, margin)
        return plan_from_masks(Oc, Ocp, replace(spec, insertion_depth_rz=rz), d.scale, sigma_mm,
                               orientations, keepout=keepout, keep_maps=keep_maps, cache=cache)

    base = spec.insertion_depth_rz
    rungs = max(0, math.ceil((top - base) / rz_step))
    lo, hi, found = 0, rungs - 1, None
    while lo <= hi:
        mid = (lo + hi) // 2
        plan = attempt(base + mid * rz_step)
        if plan.found:
            found, hi = (plan, base + mid * rz_step), mid - 1
        else:
            lo = mid + 1
    if found is None:
        return GraspPlan(grasp=None), None
    plan, rz = found
    if margin:
        def shift(p):
            return None if p is None else (p[0] - margin, p[1] - margin, p[2])

        maps = plan.maps
        if maps is not None:
            crop = (slice(margin, -margin), slice(margin, -margin))
            maps = GraspabilityMaps(maps.wc[crop], maps.wcp[crop], maps.G[crop], maps.Gprime[crop],
                                    maps.rotation)
        plan = replace(plan, grasp=shift(plan.grasp), entanglement=shift(plan.entanglement), maps=maps)
    return plan, rz
