"""2.5D Monte Carlo model of a tangle-prone pile of staple- or strand-like items.

Each item is a small set of wire segments lying in the plane: a body of
length ``d`` plus protrusions of length ``l``. Items are dropped one after
another around the pile centre (or uniformly, for a filled container); an item resting on earlier ones takes the
next layer up. Entanglement is a random geometric graph: two items whose
footprints come within ``l`` of each other are hooked with probability
``p_tangle(l)``, and every hook carries a strength ``min(1, alpha*l/d)`` used
as the probability that lifting one item drags the other along.

A pick closes the jaws on every item crossing the jaw interior, then adds
everything reachable through hooks that hold. Spreading first drives the
plates outwards; hooks whose span crosses the swept plate band, or that hold
an item the plates drag, are weakened by ``spread_attenuation`` and dropped
below ``prune_below``.

Positions are in mm with the origin at a corner of the pick area; depth
pixel ``(x, y)`` covers ``[x*scale, (x+1)*scale) x [y*scale, (y+1)*scale)``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .depth_scene import DepthMap
from .gripper import GripperSpec

KINDS = ("staple", "strand")
STRATEGIES = ("FP", "GI", "SnP")


@dataclass(frozen=True)
class PileConfig:
    n: int = 400
    d_mm: float = 12.0
    l_mm: float = 10.0
    area_mm: tuple[float, float] = (128.0, 106.0)
    seed: int = 0
    alpha: float = 0.8
    spread_attenuation: float = 0.25
    prune_below: float = 0.05
    kind: str = "staple"
    unit_mass: float = 0.15  # g per item
    hook_rate: float = 0.012  # p_tangle(l) = min(1, hook_rate * l / d)
    spread_sd_mm: float | None = None  # centre-biased placement; default area/4
    uniform_drop: bool = False  # drop uniformly over the area (a filled container)
    layer_mm: float = 0.5
    wire_mm: float = 1.0
    max_layers: int = 60
    max_retries: int = 500

    def __post_init__(self):
        object.__setattr__(self, "area_mm", tuple(float(a) for a in self.area_mm))
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.d_mm <= 0 or self.l_mm < 0 or self.unit_mass <= 0:
            raise ValueError("need d > 0, l >= 0 and unit_mass > 0")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if min(self.area_mm) <= 0:
            raise ValueError("area dimensions must be > 0")
        if not 0 <= self.spread_attenuation <= 1:
            raise ValueError("spread_attenuation must lie in [0, 1]")

    @property
    def strength(self) -> float:
        return min(1.0, self.alpha * self.l_mm / self.d_mm)

    @property
    def p_tangle(self) -> float:
        return min(1.0, self.hook_rate * self.l_mm / self.d_mm)

    @property
    def placement_sd(self) -> float:
        return self.spread_sd_mm if self.spread_sd_mm is not None else min(self.area_mm) / 4.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["area_mm"] = list(self.area_mm)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PileConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True, slots=True)
class Particle:
    id: int
    x: float
    y: float
    phi: float  # degrees
    layer: int
    kind: str
    crown_width_d: float
    protrusion_length_l: float
    unit_mass: float


@dataclass(frozen=True)
class PickParams:
    rx: float  # mm
    ry: float  # mm
    rtheta: float  # degrees, jaw opening axis
    w: float  # mm
    rz: float = 0.0  # fingertip height in mm; only items standing above it are gripped


@dataclass(frozen=True, eq=False)
class PileState:
    particles: tuple[Particle, ...]
    edges: tuple[tuple[int, int, float], ...]
    config: PileConfig
    rng_seed: int

    @property
    def area(self) -> tuple[float, float]:
        return self.config.area_mm

    @property
    def total_mass(self) -> float:
        return math.fsum(p.unit_mass for p in self.particles)

    @cached_property
    def segments(self) -> np.ndarray:
        """(n, k, 2, 2) footprint segments in world mm."""
        if not self.particles:
            return np.zeros((0, len(_local_segments(self.config)), 2, 2))
        pose = np.array([[p.x, p.y, p.phi] for p in self.particles])
        return _place_segments(_local_segments(self.config), pose)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.particles]).reshape(-1, 2)

    def centroid(self) -> tuple[float, float]:
        if not self.particles:
            return self.area[0] / 2.0, self.area[1] / 2.0
        c = self.centers.mean(axis=0)
        return float(c[0]), float(c[1])

    def __eq__(self, other):
        if not isinstance(other, PileState):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rng_seed": self.rng_seed,
            "particles": [asdict(p) for p in self.particles],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PileState":
        cfg = PileConfig.from_dict(d["config"])
        parts = tuple(Particle(**p) for p in d["particles"])
        edges = tuple((int(i), int(j), float(s)) for i, j, s in d["edges"])
        _check_edges(parts, edges)
        return cls(parts, edges, cfg, int(d["rng_seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "PileState":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class PickOutcome:
    picked_ids: tuple[int, ...]
    picked_mass: float
    strategy: str
    params: PickParams
    direct_ids: tuple[int, ...] = ()
    spread_edges: int = 0  # hooks weakened by the spread manoeuvre
    plan: object = field(default=None, repr=False)


def _check_edges(parts, edges):
    ids = {p.id for p in parts}
    for i, j, s in edges:
        if i not in ids or j not in ids:
            raise ValueError(f"edge ({i}, {j}) references a missing particle")
        if not 0 < s <= 1:
            raise ValueError(f"edge strength {s} outside (0, 1]")


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _local_segments(cfg: PileConfig) -> np.ndarray:
    d, l = cfg.d_mm, cfg.l_mm
    h = d / 2.0
    if cfg.kind == "staple":
        segs = [[(-h, 0.0), (h, 0.0)], [(-h, 0.0), (-h, l)], [(h, 0.0), (h, l)]]
    else:
        segs = [[(-h, 0.0), (h, 0.0)], [(-d / 6.0, 0.0), (-d / 6.0, l)], [(d / 6.0, 0.0), (d / 6.0, -l)]]
    if l == 0:
        segs = segs[:1]
    return np.array(segs, dtype=np.float64)


def _place_segments(local: np.ndarray, pose: np.ndarray) -> np.ndarray:
    """World segments (n, k, 2, 2) for poses (n, 3) of (x, y, phi_deg)."""
    phi = np.radians(pose[:, 2])
    c, s = np.cos(phi), np.sin(phi)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # (n, 2, 2)
    world = np.einsum("nij,kpj->nkpi", rot, local)
    return world + pose[:, None, None, :2]


def _point_segment_dist(p, a, b):
    abx, aby = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    apx, apy = p[..., 0] - a[..., 0], p[..., 1] - a[..., 1]
    denom = abx * abx + aby * aby
    # a degenerate segment has a zero numerator too, so t falls back to 0
    t = np.clip((apx * abx + apy * aby) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    return np.hypot(apx - t * abx, apy - t * aby)


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def segment_distance(a0, a1, b0, b1) -> np.ndarray:
    """Minimum distance between segments [a0, a1] and [b0, b1] (broadcasting)."""
    d = np.minimum.reduce([
        _point_segment_dist(a0, b0, b1),
        _point_segment_dist(a1, b0, b1),
        _point_segment_dist(b0, a0, a1),
        _point_segment_dist(b1, a0, a1),
    ])
    r, s = a1 - a0, b1 - b0
    qp = b0 - a0
    den = _cross(r, s)
    safe = np.where(den != 0, den, 1.0)
    t = _cross(qp, s) / safe
    u = _cross(qp, r) / safe
    crossing = (den != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    return np.where(crossing, 0.0, d)


def footprint_distance(segs_a: np.ndarray, segs_b: np.ndarray) -> np.ndarray:
    """Min distance between footprints; (ka,2,2) vs (n,kb,2,2) -> (n,)."""
    a = segs_a[None, :, None]
    b = segs_b[:, None, :]
    dist = segment_distance(a[..., 0, :], a[..., 1, :], b[..., 0, :], b[..., 1, :])
    return dist.reshape(dist.shape[0], -1).min(axis=1)


def segments_hit_box(segs: np.ndarray, center, rotation: float, half_u: float,
                     half_v: float, u_min: float | None = None) -> np.ndarray:
    """Whether each segment (..., 2, 2) meets the box |u|<=half_u, |v|<=half_v.

    The box lives in a frame centred at ``center`` with u along ``rotation``.
    With ``u_min`` the box is restricted to ``u_min <= |u| <= half_u`` (the
    two plate sweep bands) by testing both halves.
    """
    theta = math.radians(rotation)
    c, s = math.cos(theta), math.sin(theta)
    rel = segs - np.asarray(center, dtype=np.float64)
    u = rel[..., 0] * c + rel[..., 1] * s
    v = -rel[..., 0] * s + rel[..., 1] * c
    if u_min is None:
        return _clip_hits(u, v, -half_u, half_u, -half_v, half_v)
    return _clip_hits(u, v, u_min, half_u, -half_v, half_v) | _clip_hits(u, v, -half_u, -u_min, -half_v, half_v)


def _clip_hits(u, v, u0, u1, v0, v1):
    # Liang-Barsky: does the segment from point 0 to point 1 touch the box?
    pu, pv = u[..., 0], v[..., 0]
    du, dv = u[..., 1] - pu, v[..., 1] - pv
    t0 = np.zeros(pu.shape)
    t1 = np.ones(pu.shape)
    ok = np.ones(pu.shape, dtype=bool)
    for p, q in ((-du, pu - u0), (du, u1 - pu), (-dv, pv - v0), (dv, v1 - pv)):
        parallel = p == 0
        ok &= ~(parallel & (q < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(parallel, 0.0, q / np.where(parallel, 1.0, p))
        t0 = np.where(~parallel & (p < 0), np.maximum(t0, r), t0)
        t1 = np.where(~parallel & (p > 0), np.minimum(t1, r), t1)
    return ok & (t0 <= t1)


# ---------------------------------------------------------------------------
# Generation and reset
# ---------------------------------------------------------------------------


def _inside(segs: np.ndarray, area) -> bool:
    pts = segs.reshape(-1, 2)
    return bool((pts[:, 0] >= 0).all() and (pts[:, 0] <= area[0]).all()
                and (pts[:, 1] >= 0).all() and (pts[:, 1] <= area[1]).all())


def _hook_edges(cfg: PileConfig, segs: np.ndarray, centers: np.ndarray, rng) -> list:
    n = len(centers)
    if n < 2 or cfg.l_mm <= 0 or cfg.p_tangle <= 0:
        return []
    reach = np.abs(segs.reshape(n, -1, 2) - centers[:, None, :]).max(axis=(1, 2)) * math.sqrt(2)
    cdist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    ii, jj = np.nonzero(np.triu(cdist <= reach[:, None] + reach[None, :] + cfg.l_mm, k=1))
    if ii.size == 0:
        return []
    a = segs[ii][:, :, None]
    b = segs[jj][:, None, :]
    dist = segment_distance(a[..., 0, :], a[..., 1, :], b[..., 0, :], b[..., 1, :])
    near = dist.reshape(len(ii), -1).min(axis=1) <= cfg.l_mm
    ii, jj = ii[near], jj[near]
    hooked = rng.random(ii.size) < cfg.p_tangle
    s = cfg.strength
    return [(int(i), int(j), s) for i, j in zip(ii[hooked], jj[hooked])]


def generate_pile(cfg: PileConfig, seed: int | None = None, n: int | None = None) -> PileState:
    """Drop ``n`` items (default ``cfg.n``) around the area centre and hook them.

    Raises ValueError when an item cannot be placed inside the area without
    exceeding ``max_layers`` after ``max_retries`` attempts.
    """
    seed = cfg.seed if seed is None else int(seed)
    n = cfg.n if n is None else int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    local = _local_segments(cfg)
    area = cfg.area_mm
    cx, cy = area[0] / 2.0, area[1] / 2.0
    sd = cfg.placement_sd
    reach = float(np.abs(local).max()) * math.sqrt(2)
    poses = np.zeros((n, 3))
    layers = np.zeros(n, dtype=int)
    segs = np.zeros((n,) + local.shape)
    for k in range(n):
        for _ in range(cfg.max_retries):
            if cfg.uniform_drop:
                x, y = rng.uniform(0.0, area[0]), rng.uniform(0.0, area[1])
            else:
                x, y = rng.normal(cx, sd), rng.normal(cy, sd)
            phi = rng.uniform(0.0, 360.0)
            cand = _place_segments(local, np.array([[x, y, phi]]))[0]
            if not _inside(cand, area):
                continue
            layer = 0
            if k:
                near = np.nonzero(np.hypot(poses[:k, 0] - x, poses[:k, 1] - y) <= 2 * reach + cfg.wire_mm)[0]
                if near.size:
                    touching = near[footprint_distance(cand, segs[near]) <= cfg.wire_mm]
                    if touching.size:
                        layer = int(layers[touching].max()) + 1
            if layer < cfg.max_layers:
                break
        else:
            raise ValueError(
                f"area {area[0]:g}x{area[1]:g} mm too small to place {n} items "
                f"(stuck at item {k} after {cfg.max_retries} retries)"
            )
        poses[k] = (x, y, phi)
        layers[k] = layer
        segs[k] = cand
    edges = _hook_edges(cfg, segs, poses[:, :2], rng)
    parts = tuple(
        Particle(k, float(poses[k, 0]), float(poses[k, 1]), float(poses[k, 2]), int(layers[k]),
                 cfg.kind, cfg.d_mm, cfg.l_mm, cfg.unit_mass)
        for k in range(n)
    )
    return PileState(parts, tuple(edges), replace(cfg, n=n, seed=seed), seed)


def reset_pile(p: PileState, seed: int) -> PileState:
    """Re-drop every remaining item (the vibrate-and-settle reset between picks)."""
    return generate_pile(p.config, seed=seed, n=len(p.particles))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def grid_shape(area, scale: float) -> tuple[int, int]:
    return int(math.ceil(area[1] / scale - 1e-9)), int(math.ceil(area[0] / scale - 1e-9))


def render_depth(p: PileState, scale: float = 1.0) -> DepthMap:
    """Per-pixel max of ``(layer + 1) * layer_mm`` over item footprints.

    A pixel is covered when its centre lies within half the wire width
    (at least half a pixel) of a footprint segment.
    """
    cfg = p.config
    h, w = grid_shape(cfg.area_mm, scale)
    depth = np.zeros((h, w))
    radius = max(cfg.wire_mm, scale) / 2.0
    for part, segs in zip(p.particles, p.segments):
        height = (part.layer + 1) * cfg.layer_mm
        for a, b in segs:
            x0 = max(int(math.floor((min(a[0], b[0]) - radius) / scale)), 0)
            x1 = min(int(math.ceil((max(a[0], b[0]) + radius) / scale)), w)
            y0 = max(int(math.floor((min(a[1], b[1]) - radius) / scale)), 0)
            y1 = min(int(math.ceil((max(a[1], b[1]) + radius) / scale)), h)
            if x0 >= x1 or y0 >= y1:
                continue
            ys, xs = np.mgrid[y0:y1, x0:x1]
            pts = np.stack([(xs + 0.5) * scale, (ys + 0.5) * scale], -1)
            hit = _point_segment_dist(pts, a, b) <= radius
            win = depth[y0:y1, x0:x1]
            win[hit] = np.maximum(win[hit], height)
    return DepthMap(depth, scale)


def pixel_to_mm(x: float, y: float, scale: float) -> tuple[float, float]:
    return (x + 0.5) * scale, (y + 0.5) * scale


# ---------------------------------------------------------------------------
# Picking
# ---------------------------------------------------------------------------


def jaw_members(p: PileState, params: PickParams, gripper: GripperSpec) -> np.ndarray:
    """Boolean per item: does it cross the jaw interior above the fingertips?"""
    if not p.particles:
        return np.zeros(0, dtype=bool)
    hits = segments_hit_box(p.segments, (params.rx, params.ry), params.rtheta,
                            params.w / 2.0, gripper.plate_lateral_width / 2.0)
    tops = np.array([(q.layer + 1) * p.config.layer_mm for q in p.particles])
    return hits.any(axis=1) & (tops > params.rz)


def spread_edges(p: PileState, params: PickParams, gripper: GripperSpec):
    """Edges after spreading at ``params`` plus the indices of affected edges.

    A hook is loosened when its centre-to-centre span crosses a plate sweep
    band, or when either item is itself swept (touches a band above the
    fingertips) and so gets dragged.
    """
    if not p.edges:
        return list(p.edges), []
    index = {part.id: k for k, part in enumerate(p.particles)}
    c = p.centers
    box = ((params.rx, params.ry), params.rtheta, gripper.max_aperture / 2.0 + gripper.plate_thickness,
           gripper.plate_lateral_width / 2.0)
    ii = np.array([index[i] for i, _, _ in p.edges])
    jj = np.array([index[j] for _, j, _ in p.edges])
    spans = np.stack([c[ii], c[jj]], axis=1)
    crossed = segments_hit_box(spans, *box, u_min=params.w / 2.0)
    tops = np.array([(q.layer + 1) * p.config.layer_mm for q in p.particles])
    swept = segments_hit_box(p.segments, *box, u_min=params.w / 2.0).any(axis=1) & (tops > params.rz)
    band = crossed | swept[ii] | swept[jj]
    att = p.config.spread_attenuation
    out = []
    for (i, j, s), hit in zip(p.edges, band):
        if hit:
            s = s * att
            if s < p.config.prune_below:
                continue
        out.append((i, j, s))
    return out, [int(k) for k in np.nonzero(band)[0]]


def remove_picked(p: PileState, picked_ids) -> PileState:
    gone = set(picked_ids)
    parts = tuple(q for q in p.particles if q.id not in gone)
    edges = tuple(e for e in p.edges if e[0] not in gone and e[1] not in gone)
    return PileState(parts, edges, p.config, p.rng_seed)


def simulate_pick(p: PileState, params: PickParams, spread: bool, seed: int,
                  gripper: GripperSpec | None = None, strategy: str | None = None):
    """Close the jaws at ``params`` and lift; returns ``(outcome, remaining_pile)``.

    One uniform draw per hook (in edge order) decides whether it holds, so
    strategies evaluated with the same seed on the same pile share draws.
    """
    gripper = (gripper or GripperSpec()).with_aperture(params.w)
    W, H = p.area
    if not (0 <= params.rx <= W and 0 <= params.ry <= H):
        raise ValueError(f"pick point ({params.rx:.3f}, {params.ry:.3f}) outside the {W:g}x{H:g} mm area")
    strategy = strategy or ("SnP" if spread else "FP")
    rng = np.random.default_rng(seed)
    draws = rng.random(len(p.edges))
    direct = jaw_members(p, params, gripper)
    direct_ids = tuple(q.id for q, hit in zip(p.particles, direct) if hit)

    if spread:
        edges, affected = spread_edges(p, params, gripper)
        # surviving edges keep their position in the original list for draw pairing
        kept = {(i, j): s for i, j, s in edges}
        live = [(i, j, kept[(i, j)], u) for (i, j, _), u in zip(p.edges, draws) if (i, j) in kept]
    else:
        affected = []
        live = [(i, j, s, u) for (i, j, s), u in zip(p.edges, draws)]

    adj: dict[int, list[int]] = {}
    for i, j, s, u in live:
        if u < s:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
    picked = set(direct_ids)
    queue = deque(direct_ids)
    while queue:
        k = queue.popleft()
        for nb in adj.get(k, ()):
            if nb not in picked:
                picked.add(nb)
                queue.append(nb)
    picked_ids = tuple(sorted(picked))
    mass_of = {q.id: q.unit_mass for q in p.particles}
    outcome = PickOutcome(
        picked_ids=picked_ids,
        picked_mass=math.fsum(mass_of[i] for i in picked_ids),
        strategy=strategy,
        params=params,
        direct_ids=direct_ids,
        spread_edges=len(affected),
    )
    return outcome, remove_picked(p, picked_ids)
