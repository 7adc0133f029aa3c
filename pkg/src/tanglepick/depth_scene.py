"""Depth maps, binary masks and the two thresholds feeding the grasp planner.

Depth values are heights above the table in millimetres (not camera range).
Masks are plain ``numpy`` boolean arrays shaped ``(height, width)``; pixel
``(x, y)`` addresses column ``x`` of row ``y``.

File formats:

* binary PGM (``P5``), big-endian 16-bit samples, one count = 0.1 mm.
  The scale may be carried in a ``# scale_mm_per_px=<float>`` header comment
  or in a sidecar ``<stem>.json`` holding ``{"scale_mm_per_px": <float>}``.
* CSV of millimetre floats, one line per image row.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MM_PER_COUNT = 0.1
PGM_MAXVAL = 65535

BinaryMask = np.ndarray


class DepthFormatError(ValueError):
    """A depth file could not be parsed into a valid :class:`DepthMap`."""


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray  # (height, width) float64, mm above the table
    scale: float  # mm per pixel

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"depth values must be a non-empty 2D grid, got shape {values.shape}")
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise ValueError(f"scale must be > 0 mm/px, got {self.scale!r}")
        bad = ~np.isfinite(values) | (values < 0)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValueError(
                f"depth value at row {row}, col {col} is {values[row, col]!r}; "
                "heights must be finite and >= 0"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class SceneConfig:
    pick_area_mm: tuple[float, float]  # (width, height)
    background_height: float = 0.0
    depth_source: str | None = None

    def __post_init__(self):
        if len(self.pick_area_mm) != 2 or min(self.pick_area_mm) <= 0:
            raise ValueError(f"pick area dimensions must be > 0, got {self.pick_area_mm!r}")


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------

_SCALE_COMMENT = re.compile(rb"scale_mm_per_px\s*[=:]\s*([0-9.eE+-]+)")


def _read_pgm_header(data: bytes):
    """Parse a P5 header, returning (width, height, maxval, comments, offset)."""
    if len(data) < 2 or data[:2] != b"P5":
        raise DepthFormatError("malformed header: expected binary PGM magic 'P5'")
    pos = 2
    fields = []
    comments = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise DepthFormatError("malformed header: truncated before width/height/maxval")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1 : end])
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise DepthFormatError(f"malformed header: unexpected byte {data[pos:pos + 1]!r}")
        fields.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise DepthFormatError("malformed header: missing separator before raster")
    width, height, maxval = fields
    if width <= 0 or height <= 0 or not 0 < maxval <= PGM_MAXVAL:
        raise DepthFormatError(f"malformed header: width={width} height={height} maxval={maxval}")
    return width, height, maxval, comments, pos + 1


def read_pgm(path) -> tuple[np.ndarray, float | None]:
    """Read raw counts from a binary PGM; returns ``(counts, scale_or_None)``."""
    data = Path(path).read_bytes()
    width, height, maxval, comments, offset = _read_pgm_header(data)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    raster = data[offset:]
    if len(raster) < expected:
        raise DepthFormatError(
            f"malformed raster: expected {expected} bytes for {width}x{height}, got {len(raster)}"
        )
    counts = np.frombuffer(raster[:expected], dtype=dtype).reshape(height, width).astype(np.uint16)
    if counts.max(initial=0) > maxval:
        row, col = np.argwhere(counts > maxval)[0]
        raise DepthFormatError(f"sample at row {row}, col {col} exceeds maxval {maxval}")
    scale = None
    for c in comments:
        m = _SCALE_COMMENT.search(c)
        if m:
            scale = float(m.group(1))
    return counts, scale


def write_pgm(path, counts: np.ndarray, scale: float | None = None) -> None:
    counts = np.asarray(counts)
    if counts.ndim != 2:
        raise ValueError("PGM raster must be 2D")
    if counts.min(initial=0) < 0 or counts.max(initial=0) > PGM_MAXVAL:
        raise ValueError("PGM counts must lie in [0, 65535]")
    height, width = counts.shape
    header = b"P5\n"
    if scale is not None:
        header += f"# scale_mm_per_px={scale!r}\n".encode()
    header += f"{width} {height}\n{PGM_MAXVAL}\n".encode()
    Path(path).write_bytes(header + counts.astype(">u2").tobytes())


def _sidecar_scale(path: Path) -> float | None:
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        return None
    with open(sidecar) as f:
        return float(json.load(f)["scale_mm_per_px"])


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as f:
        for r, row in enumerate(csv.reader(f)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c, cell in enumerate(row) if not _is_float(cell))
                raise DepthFormatError(f"non-numeric value {row[bad]!r} at row {r}, col {bad}") from None
    if not rows:
        raise DepthFormatError("malformed header: empty CSV depth file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DepthFormatError(f"ragged CSV: row lengths {sorted(widths)}")
    return np.array(rows, dtype=np.float64)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_depth_map(path, scale: float | None = None) -> DepthMap:
    """Load a depth map from a 16-bit PGM (0.1 mm counts) or a CSV of mm.

    ``scale`` overrides any scale stored with the file. Without an override
    the PGM comment is used, then the JSON sidecar; CSV files without either
    raise :class:`DepthFormatError`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"depth file not found: {path}")
    if path.suffix.lower() == ".csv":
        values = _read_csv(path)
        stored = None
    else:
        counts, stored = read_pgm(path)
        values = counts.astype(np.float64) * MM_PER_COUNT
    if scale is None:
        scale = stored if stored is not None else _sidecar_scale(path)
    if scale is None:
        raise DepthFormatError(f"no scale for {path}: pass one or add a scale_mm_per_px sidecar")
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DepthFormatError(f"invalid depth {values[row, col]!r} at row {row}, col {col}")
    return DepthMap(values, scale)


def depth_to_counts(d: DepthMap) -> np.ndarray:
    counts = np.rint(d.values / MM_PER_COUNT)
    if counts.max(initial=0) > PGM_MAXVAL:
        raise ValueError(f"depth exceeds PGM range ({PGM_MAXVAL * MM_PER_COUNT} mm)")
    return counts.astype(np.uint16)


def save_depth_map(d: DepthMap, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows([[repr(float(v)) for v in row] for row in d.values])
        with open(path.with_suffix(".json"), "w") as f:
            json.dump({"scale_mm_per_px": d.scale}, f)
    else:
        write_pgm(path, depth_to_counts(d), scale=d.scale)


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask (or any non-negative grid normalised to its max) as PGM."""
    grid = np.asarray(mask, dtype=np.float64)
    peak = grid.max(initial=0.0)
    counts = np.zeros(grid.shape) if peak <= 0 else np.rint(grid / peak * PGM_MAXVAL)
    write_pgm(path, counts.astype(np.uint16))


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------


def threshold_target(d: DepthMap, target_height: float) -> BinaryMask:
    """Target region: every pixel at least ``target_height`` tall."""
    if target_height < 0:
        raise ValueError("target_height must be >= 0")
    return d.values >= target_height


def threshold_collision(d: DepthMap, insertion_depth_rz: float) -> BinaryMask:
    """Collision region: material strictly taller than the tip clearance ``rz``.

    A surface exactly at ``rz`` is not a collision, so ``rz=0`` never flags
    the bare table.
    """
    if insertion_depth_rz < 0:
        raise ValueError("insertion_depth_rz must be >= 0")
    return d.values > insertion_depth_rz


def highest_point(d: DepthMap) -> tuple[int, int, float]:
    """(x, y, height) of the tallest pixel; ties go to the first in raster order."""
    flat = int(np.argmax(d.values))
    y, x = divmod(flat, d.width)
    return x, y, float(d.values[y, x])
