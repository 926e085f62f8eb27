"""Core spatial types, camera convention, viewpoint binning and the KL loss.

Coordinate conventions (single source of truth for the whole package):

World frame (right-handed):
  - Canonical object frame: objects fit inside the cube [-0.5, 0.5]^3.
  - Azimuth 0 lies on the +X axis, measured toward +Y.
  - Elevation is measured from the XY plane toward +Z.
  - The camera sits at spherical coordinates (distance, azimuth, elevation)
    about the origin and looks at the origin, with "up" as close to world +Z
    as the look direction permits. At elevation = +/-90 the up-disambiguation
    axis is +X.

Camera frame (right-handed, computer-vision style):
  - X right, Y down, Z forward (the look direction).

Image frame:
  - Continuous pixel coordinates, origin at the top-left corner, +x right,
    +y down. The center of pixel (i, j) is at (i + 0.5, j + 0.5).
  - Depth is the distance along the camera forward axis (camera-frame Z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AZIMUTH_BINS = 24
ELEVATION_BINS = 12
BIN_WIDTH_DEG = 15.0

VOXF_MAGIC = b"VOXF"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Viewpoint:
    """Camera direction as (azimuth, elevation) in degrees.

    Azimuth is stored modulo 360 with canonical representative in [0, 360);
    elevation is clamped to [-90, 90].
    """

    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        az = float(self.azimuth_deg) % 360.0
        if az == 360.0:  # -1e-300 % 360.0 rounds up
            az = 0.0
        el = min(90.0, max(-90.0, float(self.elevation_deg)))
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "elevation_deg", el)


@dataclass(frozen=True)
class CameraModel:
    """Fixed projection parameters: look-at-origin perspective camera.

    fov_deg is the vertical field of view; pixels are square.
    """

    distance: float = 2.0
    fov_deg: float = 30.0
    width: int = 128
    height: int = 128
    near: float = 0.1
    far: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.near < self.distance < self.far):
            raise ValueError(
                f"camera requires 0 < near < distance < far, got "
                f"near={self.near} distance={self.distance} far={self.far}"
            )
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1 pixel")

    @property
    def focal_px(self) -> float:
        """Focal length in pixels (identical for x and y)."""
        return (self.height / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    @property
    def cx(self) -> float:
        return self.width / 2.0

    @property
    def cy(self) -> float:
        return self.height / 2.0


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle set in the canonical object frame."""

    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        v = v.reshape(-1, 3) if v.size else v.reshape(0, 3)
        f = f.reshape(-1, 3) if f.size else f.reshape(0, 3)
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise ValueError("face index out of range")
            degenerate = (f[:, 0] == f[:, 1]) & (f[:, 1] == f[:, 2])
            if degenerate.any():
                raise ValueError(
                    f"degenerate face (three identical indices) at row "
                    f"{int(np.flatnonzero(degenerate)[0])}"
                )
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def face_corners(self) -> np.ndarray:
        """Vertex positions per face, shape (F, 3, 3)."""
        return self.vertices[self.faces]


EMPTY_MESH = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


@dataclass(frozen=True)
class VoxelGrid:
    """Dense scalar occupancy on the canonical cube [-0.5, 0.5]^3.

    values is flat with z index fastest, then y, then x (C order for an
    (nx, ny, nz) array). Cell centers span [-0.5 + h/2, 0.5 - h/2] per axis
    with h = 1/n for that axis.
    """

    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {dims}")
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64)).ravel()
        n = dims[0] * dims[1] * dims[2]
        if v.size != n:
            raise ValueError(f"expected {n} values for dims {dims}, got {v.size}")
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("occupancy values must be finite and within [0, 1]")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _readonly(v))

    def values3d(self) -> np.ndarray:
        """Occupancy as an (nx, ny, nz) array (no copy)."""
        return self.values.reshape(self.dims)

    def axis_coords(self, axis: int) -> np.ndarray:
        """World coordinates of cell centers along one axis."""
        n = self.dims[axis]
        h = 1.0 / n
        return -0.5 + h * (np.arange(n) + 0.5)


@dataclass(frozen=True)
class BinDistribution:
    """Class probabilities over the 24 azimuth and 12 elevation bins."""

    azimuth_probs: np.ndarray
    elevation_probs: np.ndarray

    def __post_init__(self):
        az = np.ascontiguousarray(np.asarray(self.azimuth_probs, dtype=np.float64)).ravel()
        el = np.ascontiguousarray(np.asarray(self.elevation_probs, dtype=np.float64)).ravel()
        if az.size != AZIMUTH_BINS or el.size != ELEVATION_BINS:
            raise ValueError(
                f"expected {AZIMUTH_BINS} azimuth and {ELEVATION_BINS} elevation "
                f"probabilities, got {az.size} and {el.size}"
            )
        for name, p in (("azimuth", az), ("elevation", el)):
            if p.min() < 0.0:
                raise ValueError(f"{name} probabilities must be nonnegative")
            if abs(p.sum() - 1.0) > 1e-6:
                raise ValueError(f"{name} probabilities must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "azimuth_probs", _readonly(az))
        object.__setattr__(self, "elevation_probs", _readonly(el))

    def argmax_bins(self) -> tuple[int, int]:
        return int(np.argmax(self.azimuth_probs)), int(np.argmax(self.elevation_probs))


# ---------------------------------------------------------------------------
# Camera transform and projection
# ---------------------------------------------------------------------------

_POLE_EPS = 1e-12


def camera_position(vp: Viewpoint, cam: CameraModel) -> np.ndarray:
    """Camera center in world coordinates."""
    az = math.radians(vp.azimuth_deg)
    el = math.radians(vp.elevation_deg)
    ce = math.cos(el)
    return cam.distance * np.array([ce * math.cos(az), ce * math.sin(az), math.sin(el)])


def view_to_camera_transform(vp: Viewpoint, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera rigid transform: p_cam = R @ p_world + t.

    R rows are the camera right / down / forward axes in world coordinates;
    the rotation is orthonormal with det +1.
    """
    az = math.radians(vp.azimuth_deg)
    el = math.radians(vp.elevation_deg)
    sa, ca = math.sin(az), math.cos(az)
    se, ce = math.sin(el), math.cos(el)
    pos = camera_position(vp, cam)
    forward = -pos / cam.distance
    if ce < _POLE_EPS:
        # looking straight along +/-Z: roll fixed by the +X axis
        up = np.array([1.0, 0.0, 0.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
    else:
        right = np.array([-sa, ca, 0.0])
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    t = -R @ pos
    return R, t


def project_point(
    p, vp: Viewpoint, cam: CameraModel
) -> tuple[float, float, float] | None:
    """Perspective-project a world point to (pixel_x, pixel_y, depth).

    Returns None (behind-camera marker) when the point's depth along the
    camera forward axis is <= near.
    """
    R, t = view_to_camera_transform(vp, cam)
    q = R @ np.asarray(p, dtype=np.float64) + t
    if q[2] <= cam.near:
        return None
    f = cam.focal_px
    return (cam.cx + f * q[0] / q[2], cam.cy + f * q[1] / q[2], float(q[2]))


def project_points(
    pts: np.ndarray, vp: Viewpoint, cam: CameraModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection: (pixels (N,2), depths (N,), in_front mask (N,)).

    Pixel values for points at depth <= near are NaN.
    """
    R, t = view_to_camera_transform(vp, cam)
    q = np.asarray(pts, dtype=np.float64).reshape(-1, 3) @ R.T + t
    depth = q[:, 2]
    ok = depth > cam.near
    f = cam.focal_px
    with np.errstate(divide="ignore", invalid="ignore"):
        px = cam.cx + f * q[:, 0] / depth
        py = cam.cy + f * q[:, 1] / depth
    pix = np.stack([px, py], axis=1)
    pix[~ok] = np.nan
    return pix, depth, ok


def unproject_pixel(
    pixel_x: float, pixel_y: float, depth: float, vp: Viewpoint, cam: CameraModel
) -> np.ndarray:
    """Invert project_point along the pixel ray at the given depth."""
    R, t = view_to_camera_transform(vp, cam)
    f = cam.focal_px
    q = np.array(
        [(pixel_x - cam.cx) / f * depth, (pixel_y - cam.cy) / f * depth, depth]
    )
    return R.T @ (q - t)


# ---------------------------------------------------------------------------
# Viewpoint bins
# ---------------------------------------------------------------------------


def encode_viewpoint_bins(vp: Viewpoint) -> tuple[int, int]:
    """Quantize a viewpoint to (azimuth bin 0..23, elevation bin 0..11).

    Azimuth bin centers sit at 15*i degrees (round to nearest, wrapping);
    elevation uses uniform half-open bins over [-90, 90].
    """
    az_bin = int(math.floor(vp.azimuth_deg / BIN_WIDTH_DEG + 0.5)) % AZIMUTH_BINS
    el_bin = int(math.floor((vp.elevation_deg + 90.0) / BIN_WIDTH_DEG))
    el_bin = min(ELEVATION_BINS - 1, max(0, el_bin))
    return az_bin, el_bin


def decode_viewpoint_bins(az_bin: int, el_bin: int) -> Viewpoint:
    """Map bin indices back to the bin-center viewpoint."""
    if not 0 <= az_bin < AZIMUTH_BINS:
        raise ValueError(f"azimuth bin out of range: {az_bin}")
    if not 0 <= el_bin < ELEVATION_BINS:
        raise ValueError(f"elevation bin out of range: {el_bin}")
    return Viewpoint(
        azimuth_deg=BIN_WIDTH_DEG * az_bin,
        elevation_deg=-90.0 + BIN_WIDTH_DEG * el_bin + BIN_WIDTH_DEG / 2.0,
    )


def circular_bin_distance(b1: int, b2: int, n_bins: int) -> int:
    """Wrap-around distance between bin indices on a circle of n_bins."""
    d = abs(int(b1) - int(b2))
    return min(d, n_bins - d)


def viewpoint_kl_loss(pred: BinDistribution, target: BinDistribution) -> float:
    """KL(target || pred) summed over the azimuth and elevation vectors.

    Prediction entries are clamped below at 1e-12 before the log, so
    zero-probability predictions stay finite.
    """
    total = 0.0
    for p, t in (
        (pred.azimuth_probs, target.azimuth_probs),
        (pred.elevation_probs, target.elevation_probs),
    ):
        p = np.maximum(p, 1e-12)
        mask = t > 0.0
        total += float(np.sum(t[mask] * (np.log(t[mask]) - np.log(p[mask]))))
    return total


# ---------------------------------------------------------------------------
# VOXF voxel file format
# ---------------------------------------------------------------------------
# Layout: 4-byte magic "VOXF"; nx, ny, nz as little-endian uint32; then
# nx*ny*nz little-endian float32 values, z index fastest, then y, then x.


def save_voxf(grid: VoxelGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(VOXF_MAGIC)
        fh.write(np.asarray(grid.dims, dtype="<u4").tobytes())
        fh.write(grid.values.astype("<f4").tobytes())


class VoxfError(ValueError):
    """Malformed VOXF payload; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def load_voxf(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != VOXF_MAGIC:
        raise VoxfError("bad magic, expected b'VOXF'", 0)
    if len(data) < 16:
        raise VoxfError("truncated header", len(data))
    dims = tuple(int(d) for d in np.frombuffer(data[4:16], dtype="<u4"))
    n = dims[0] * dims[1] * dims[2]
    expected = 16 + 4 * n
    if len(data) < expected:
        raise VoxfError("unexpected end of voxel payload", len(data))
    if len(data) > expected:
        raise VoxfError("trailing bytes after voxel payload", expected)
    values = np.frombuffer(data[16:expected], dtype="<f4").astype(np.float64)
    try:
        return VoxelGrid(dims=dims, values=values)
    except ValueError as e:
        raise VoxfError(f"invalid voxel data: {e}", 16) from e
