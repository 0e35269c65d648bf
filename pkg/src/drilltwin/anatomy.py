"""Labeled anatomy volumes and per-structure signed distance fields.

A LabeledVolume is a dense voxel grid of uint8 structure labels (0 = empty)
plus physical spacing/origin in millimetres. Each structure of interest gets
its own signed distance field: positive outside, negative exactly on labeled
voxels, magnitudes exact Euclidean voxel-center distances.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt

VOLUME_MAGIC = b"DTVOL\x01"


@dataclass(frozen=True)
class StructureSpec:
    """One tracked anatomical structure and its safety parameters."""

    index: int                    # voxel label value, >= 1
    name: str
    critical: bool                # critical structures are never carvable
    proximity_radius_mm: float    # distance band for operating-structure attribution
    force_limit_n: float = 0.0    # max desired force on this structure, N
    stiffness_n_per_mm: float = 1.0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "critical": self.critical,
            "proximity_radius_mm": self.proximity_radius_mm,
            "force_limit_n": self.force_limit_n,
            "stiffness_n_per_mm": self.stiffness_n_per_mm,
        }

    @staticmethod
    def from_dict(d: dict) -> "StructureSpec":
        return StructureSpec(
            index=int(d["index"]),
            name=str(d["name"]),
            critical=bool(d["critical"]),
            proximity_radius_mm=float(d["proximity_radius_mm"]),
            force_limit_n=float(d["force_limit_n"]),
            stiffness_n_per_mm=float(d.get("stiffness_n_per_mm", 1.0)),
        )


DEFAULT_STRUCTURES: tuple[StructureSpec, ...] = (
    StructureSpec(1, "facial_nerve", True, 1.5, force_limit_n=0.8, stiffness_n_per_mm=2.5),
    StructureSpec(2, "tegmen", True, 1.5, force_limit_n=0.8, stiffness_n_per_mm=3.0),
    StructureSpec(3, "sigmoid_sinus", True, 1.5, force_limit_n=0.8, stiffness_n_per_mm=2.5),
    StructureSpec(4, "cortical_bone", False, 0.0, force_limit_n=1.3, stiffness_n_per_mm=3.0),
    StructureSpec(5, "trabecular_bone", False, 0.0, force_limit_n=1.3, stiffness_n_per_mm=1.5),
)


@dataclass
class LabeledVolume:
    labels: np.ndarray            # uint8, shape (nx, ny, nz), C order
    spacing_mm: np.ndarray        # (3,)
    origin_mm: np.ndarray         # world position of voxel (0,0,0) center
    structures: tuple[StructureSpec, ...] = DEFAULT_STRUCTURES

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 3 or min(self.labels.shape) < 2:
            raise ValueError("labels must be a 3-d grid, at least 2 voxels per axis")
        self.spacing_mm = np.asarray(self.spacing_mm, dtype=float).reshape(3)
        self.origin_mm = np.asarray(self.origin_mm, dtype=float).reshape(3)
        if np.any(self.spacing_mm <= 0):
            raise ValueError("spacing must be positive")
        seen = set()
        for s in self.structures:
            if s.index < 1 or s.index > 255:
                raise ValueError(f"structure index {s.index} outside uint8 label range")
            if s.index in seen:
                raise ValueError(f"duplicate structure index {s.index}")
            seen.add(s.index)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def world_to_grid(self, points_mm: np.ndarray) -> np.ndarray:
        return (np.asarray(points_mm, dtype=float) - self.origin_mm) / self.spacing_mm

    def grid_to_world(self, idx: np.ndarray) -> np.ndarray:
        return np.asarray(idx, dtype=float) * self.spacing_mm + self.origin_mm

    def structure_by_index(self, index: int) -> StructureSpec:
        for s in self.structures:
            if s.index == index:
                return s
        raise KeyError(f"no structure with label {index}")

    def copy(self) -> "LabeledVolume":
        return LabeledVolume(self.labels.copy(), self.spacing_mm.copy(),
                             self.origin_mm.copy(), self.structures)

    def save(self, path: str | Path) -> None:
        """Binary volume file: magic, u32 little-endian header length, UTF-8 JSON
        header, then raw C-order uint8 label bytes."""
        path = Path(path)
        header = {
            "dims": list(self.labels.shape),
            "spacing_mm": self.spacing_mm.tolist(),
            "origin_mm": self.origin_mm.tolist(),
            "dtype": "uint8",
            "order": "C",
            "byte_order": "little",
            "structures": [s.to_dict() for s in self.structures],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(VOLUME_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(self.labels.tobytes(order="C"))

    @staticmethod
    def load(path: str | Path) -> "LabeledVolume":
        """Load a volume file; a `<name>.structures.json` sidecar, when present,
        overrides the embedded structure table."""
        path = Path(path)
        with open(path, "rb") as f:
            magic = f.read(len(VOLUME_MAGIC))
            if magic != VOLUME_MAGIC:
                raise ValueError(f"{path} is not a labeled volume file")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen).decode("utf-8"))
            dims = header["dims"]
            raw = f.read(int(np.prod(dims)))
        labels = np.frombuffer(raw, dtype=np.uint8).reshape(dims)
        structures = tuple(StructureSpec.from_dict(d) for d in header["structures"])
        sidecar = path.with_name(path.name + ".structures.json")
        if sidecar.exists():
            with open(sidecar, "r", encoding="utf-8") as f:
                structures = tuple(StructureSpec.from_dict(d) for d in json.load(f))
        return LabeledVolume(labels.copy(), np.array(header["spacing_mm"]),
                             np.array(header["origin_mm"]), structures)


@dataclass
class SdfSet:
    """Stacked signed distance fields, one per tracked structure."""

    fields: np.ndarray                     # (n_structures, nx, ny, nz) float64, mm
    structures: tuple[StructureSpec, ...]
    spacing_mm: np.ndarray
    origin_mm: np.ndarray
    missing: tuple[str, ...] = ()          # structures absent from the volume

    def __post_init__(self):
        # plain-float mirrors of the grid geometry; the per-tick sampling path
        # is call-count bound, so it avoids numpy on 3-vectors entirely
        ox, oy, oz = (float(v) for v in self.origin_mm)
        sx, sy, sz = (float(v) for v in self.spacing_mm)
        nx, ny, nz = self.fields.shape[1:]
        self._origin_f = (ox, oy, oz)
        self._spacing_f = (sx, sy, sz)
        self._hi_f = (float(nx - 1), float(ny - 1), float(nz - 1))
        self._hi_cell_f = (nx - 2, ny - 2, nz - 2)
        self._min_spacing = min(sx, sy, sz)

    @property
    def n_structures(self) -> int:
        return self.fields.shape[0]

    def slot_of(self, structure_index: int) -> int:
        for i, s in enumerate(self.structures):
            if s.index == structure_index:
                return i
        raise KeyError(f"no structure with label {structure_index}")


def _signed_field(mask: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    # Exact Euclidean voxel-center distances; negative exactly on labeled voxels.
    if mask.all():
        raise ValueError("structure fills the whole grid; no outside reference")
    outside = distance_transform_edt(~mask, sampling=spacing)
    inside = distance_transform_edt(mask, sampling=spacing)
    return outside - inside


def build_sdf(volume: LabeledVolume) -> SdfSet:
    """Build one exact signed distance field per tracked structure.

    A structure with no labeled voxels gets an all-+inf field and is reported
    in `missing` so downstream proximity logic degrades gracefully.
    """
    n = len(volume.structures)
    fields = np.empty((n,) + volume.shape, dtype=np.float64)
    missing = []
    for i, s in enumerate(volume.structures):
        mask = volume.labels == s.index
        if not mask.any():
            fields[i] = np.inf
            missing.append(s.name)
        else:
            fields[i] = _signed_field(mask, volume.spacing_mm)
    return SdfSet(fields, volume.structures, volume.spacing_mm.copy(),
                  volume.origin_mm.copy(), tuple(missing))


def rebuild_structure_field(sdfs: SdfSet, volume: LabeledVolume, structure_index: int) -> None:
    """Recompute one structure's field in place after its labels changed."""
    slot = sdfs.slot_of(structure_index)
    mask = volume.labels == structure_index
    name = sdfs.structures[slot].name
    if not mask.any():
        sdfs.fields[slot] = np.inf
        if name not in sdfs.missing:
            sdfs.missing = sdfs.missing + (name,)
    else:
        sdfs.fields[slot] = _signed_field(mask, volume.spacing_mm)
        sdfs.missing = tuple(m for m in sdfs.missing if m != name)


@dataclass(frozen=True)
class DistanceQuery:
    distances_mm: np.ndarray     # (n_structures,)
    nearest_slot: int            # argmin position in the structure tuple
    nearest_index: int           # label value of the nearest structure
    min_distance_mm: float
    out_of_bounds: bool


def _clamped_grid_coords(sdfs: SdfSet, point_mm: np.ndarray):
    ox, oy, oz = sdfs._origin_f
    sx, sy, sz = sdfs._spacing_f
    hx, hy, hz = sdfs._hi_f
    gx = (float(point_mm[0]) - ox) / sx
    gy = (float(point_mm[1]) - oy) / sy
    gz = (float(point_mm[2]) - oz) / sz
    oob = (gx < -1e-12 or gx > hx + 1e-12
           or gy < -1e-12 or gy > hy + 1e-12
           or gz < -1e-12 or gz > hz + 1e-12)
    if gx < 0.0: gx = 0.0
    elif gx > hx: gx = hx
    if gy < 0.0: gy = 0.0
    elif gy > hy: gy = hy
    if gz < 0.0: gz = 0.0
    elif gz > hz: gz = hz
    return (gx, gy, gz), oob


def _trilinear(fields: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Trilinear sample of every field at one grid-space point (already clamped).

    All-inf fields (missing structures) come out +inf rather than nan, so the
    lerp runs with invalid-op warnings suppressed and the corner value wins.
    """
    nx, ny, nz = fields.shape[1:]
    x0 = min(max(int(g[0]), 0), nx - 2)
    y0 = min(max(int(g[1]), 0), ny - 2)
    z0 = min(max(int(g[2]), 0), nz - 2)
    fx, fy, fz = g[0] - x0, g[1] - y0, g[2] - z0
    c = fields[:, x0:x0 + 2, y0:y0 + 2, z0:z0 + 2]
    with np.errstate(invalid="ignore"):
        c00 = c[:, 0, 0, 0] * (1 - fz) + c[:, 0, 0, 1] * fz
        c01 = c[:, 0, 1, 0] * (1 - fz) + c[:, 0, 1, 1] * fz
        c10 = c[:, 1, 0, 0] * (1 - fz) + c[:, 1, 0, 1] * fz
        c11 = c[:, 1, 1, 0] * (1 - fz) + c[:, 1, 1, 1] * fz
        c0 = c00 * (1 - fy) + c01 * fy
        c1 = c10 * (1 - fy) + c11 * fy
        out = c0 * (1 - fx) + c1 * fx
    corner = c[:, 0, 0, 0]
    bad = ~np.isfinite(corner)
    if bad.any():
        out = np.where(bad, corner, out)
    return out


def query_distances(sdfs: SdfSet, point_mm: np.ndarray) -> DistanceQuery:
    """Interpolated distance to every structure at a world-frame point.

    Points outside the grid are clamped to the boundary and flagged; callers
    treat flagged queries as unreliable rather than extrapolating.
    """
    gc, oob = _clamped_grid_coords(sdfs, point_mm)
    d = _trilinear(sdfs.fields, gc)
    slot = int(np.argmin(d))
    return DistanceQuery(d, slot, sdfs.structures[slot].index, float(d[slot]), oob)


def _sample_scalar(sdfs: SdfSet, field: np.ndarray, px: float, py: float, pz: float) -> float:
    # one-field trilinear sample in plain floats; same clamp and lerp order as
    # _trilinear so the two paths agree bit for bit
    ox, oy, oz = sdfs._origin_f
    sx, sy, sz = sdfs._spacing_f
    hx, hy, hz = sdfs._hi_f
    gx = (px - ox) / sx
    gy = (py - oy) / sy
    gz = (pz - oz) / sz
    if gx < 0.0: gx = 0.0
    elif gx > hx: gx = hx
    if gy < 0.0: gy = 0.0
    elif gy > hy: gy = hy
    if gz < 0.0: gz = 0.0
    elif gz > hz: gz = hz
    mx, my, mz = sdfs._hi_cell_f
    x0 = int(gx)
    y0 = int(gy)
    z0 = int(gz)
    if x0 > mx: x0 = mx
    if y0 > my: y0 = my
    if z0 > mz: z0 = mz
    fx, fy, fz = gx - x0, gy - y0, gz - z0
    c = field[x0:x0 + 2, y0:y0 + 2, z0:z0 + 2]
    c000 = float(c[0, 0, 0])
    if not np.isfinite(c000):
        return c000                  # missing structure, field is all inf
    c001 = float(c[0, 0, 1])
    c010, c011 = float(c[0, 1, 0]), float(c[0, 1, 1])
    c100, c101 = float(c[1, 0, 0]), float(c[1, 0, 1])
    c110, c111 = float(c[1, 1, 0]), float(c[1, 1, 1])
    c00 = c000 * (1 - fz) + c001 * fz
    c01 = c010 * (1 - fz) + c011 * fz
    c10 = c100 * (1 - fz) + c101 * fz
    c11 = c110 * (1 - fz) + c111 * fz
    c0 = c00 * (1 - fy) + c01 * fy
    c1 = c10 * (1 - fy) + c11 * fy
    return c0 * (1 - fx) + c1 * fx


def query_structure_distance(sdfs: SdfSet, slot: int, point_mm: np.ndarray) -> float:
    return _sample_scalar(sdfs, sdfs.fields[slot],
                          float(point_mm[0]), float(point_mm[1]), float(point_mm[2]))


def sdf_gradient(sdfs: SdfSet, slot: int, point_mm: np.ndarray) -> np.ndarray:
    """Central-difference gradient of one field, step = half the finest voxel."""
    h = 0.5 * sdfs._min_spacing
    f = sdfs.fields[slot]
    px, py, pz = float(point_mm[0]), float(point_mm[1]), float(point_mm[2])
    den = 2.0 * h
    return np.array([
        (_sample_scalar(sdfs, f, px + h, py, pz) - _sample_scalar(sdfs, f, px - h, py, pz)) / den,
        (_sample_scalar(sdfs, f, px, py + h, pz) - _sample_scalar(sdfs, f, px, py - h, pz)) / den,
        (_sample_scalar(sdfs, f, px, py, pz + h) - _sample_scalar(sdfs, f, px, py, pz - h)) / den,
    ])


@dataclass(frozen=True)
class CarveResult:
    removed_voxels: int
    breach: bool                 # carve request touched only critical labels
    touched_critical: bool
    carved_indices: tuple[int, ...]


def carve_voxels(volume: LabeledVolume, sdfs: SdfSet, center_mm: np.ndarray,
                 radius_mm: float) -> CarveResult:
    """Remove carvable material inside a ball and refresh affected fields.

    Only non-critical labels are removable. A request whose labeled voxels are
    all critical removes nothing and reports a breach. Affected structures'
    fields are recomputed exactly, so any carve sequence matches a from-scratch
    rebuild bit for bit.
    """
    center = np.asarray(center_mm, dtype=float)
    lo_g = np.floor((center - radius_mm - volume.origin_mm) / volume.spacing_mm).astype(int)
    hi_g = np.ceil((center + radius_mm - volume.origin_mm) / volume.spacing_mm).astype(int)
    dims = np.array(volume.shape)
    lo = np.clip(lo_g, 0, dims - 1)
    hi = np.clip(hi_g, 0, dims - 1)
    if np.any(lo > hi):
        return CarveResult(0, False, False, ())

    sl = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
    sub = volume.labels[sl]
    axes = [volume.origin_mm[k] + volume.spacing_mm[k] * np.arange(lo[k], hi[k] + 1)
            for k in range(3)]
    dx = axes[0][:, None, None] - center[0]
    dy = axes[1][None, :, None] - center[1]
    dz = axes[2][None, None, :] - center[2]
    in_ball = dx * dx + dy * dy + dz * dz <= radius_mm * radius_mm

    critical_labels = {s.index for s in volume.structures if s.critical}
    ball_labels = sub[in_ball]
    labeled = ball_labels[ball_labels != 0]
    if labeled.size == 0:
        return CarveResult(0, False, False, ())

    is_critical = np.isin(labeled, sorted(critical_labels))
    touched_critical = bool(is_critical.any())
    removable_labels = np.unique(labeled[~is_critical])
    if removable_labels.size == 0:
        return CarveResult(0, True, touched_critical, ())

    removable = in_ball & np.isin(sub, removable_labels)
    removed = int(np.count_nonzero(removable))
    sub[removable] = 0
    for idx in removable_labels:
        rebuild_structure_field(sdfs, volume, int(idx))
    return CarveResult(removed, False, touched_critical, tuple(int(i) for i in removable_labels))
