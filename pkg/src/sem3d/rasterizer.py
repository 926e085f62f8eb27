"""Hard (z-buffered) and soft (differentiable) silhouette rendering, depth
rendering, and an independent raycast oracle.

The hard rasterizer covers a pixel when the pixel center lies inside at
least one front-projected triangle (top-left tie rule); depth is
perspective-correct interpolated camera-axis distance. Back-face culling is
off everywhere: coverage is occupancy, not orientation.

The soft rasterizer combines per-triangle sigmoid coverage by probabilistic
union: value = 1 - prod_t (1 - sigmoid(sharpness * signed_dist_t)), with the
signed distance measured in screen space and rescaled to a 128-pixel-wide
reference image so sharpness is resolution independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, TriangleMesh, Viewpoint, view_to_camera_transform

REFERENCE_WIDTH = 128.0
DEFAULT_SHARPNESS = 50.0
NO_HIT = np.inf

# sigmoid(x) below ~1e-13 cannot move a pixel value at float precision
_SIGMA_CUTOFF_LOGIT = 30.0


@dataclass(frozen=True)
class SilhouetteImage:
    """Per-pixel coverage in [0, 1], row-major from the top-left."""

    width: int
    height: int
    values: np.ndarray  # (height, width) float64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.height, self.width):
            raise ValueError(
                f"expected values of shape {(self.height, self.width)}, got {v.shape}"
            )
        if v.size and (not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("silhouette values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel nearest surface depth in world units; NO_HIT (inf) elsewhere."""

    width: int
    height: int
    values: np.ndarray  # (height, width) float64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.height, self.width):
            raise ValueError(
                f"expected values of shape {(self.height, self.width)}, got {v.shape}"
            )
        if v.size and np.isnan(v).any():
            raise ValueError("depth values must be numbers or +inf")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def hit_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


# ---------------------------------------------------------------------------
# Projection to screen space with near-plane clipping
# ---------------------------------------------------------------------------


def _to_camera(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel) -> np.ndarray:
    R, t = view_to_camera_transform(vp, cam)
    return mesh.vertices @ R.T + t


def _project_xy(q: np.ndarray, cam: CameraModel) -> np.ndarray:
    f = cam.focal_px
    return np.stack(
        [cam.cx + f * q[..., 0] / q[..., 2], cam.cy + f * q[..., 1] / q[..., 2]], axis=-1
    )


def _clip_near(tri_cam: np.ndarray, near: float) -> np.ndarray:
    """Clip camera-space triangles (T,3,3) against z=near; returns (T',3,3).

    Triangles entirely in front pass through; straddling ones are clipped to
    a polygon and fan-triangulated; fully-behind ones are dropped.
    """
    z = tri_cam[:, :, 2]
    n_front = (z > near).sum(axis=1)
    keep = tri_cam[n_front == 3]
    partial = tri_cam[(n_front == 1) | (n_front == 2)]
    if len(partial) == 0:
        return keep

    out = [keep]
    for tri in partial:
        poly = []
        for i in range(3):
            a, b = tri[i], tri[(i + 1) % 3]
            ina, inb = a[2] > near, b[2] > near
            if ina:
                poly.append(a)
            if ina != inb:
                s = (near - a[2]) / (b[2] - a[2])
                poly.append(a + s * (b - a))
        for k in range(1, len(poly) - 1):
            out.append(np.stack([poly[0], poly[k], poly[k + 1]])[None])
    return np.concatenate(out, axis=0)


def _screen_triangles(
    mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel
) -> tuple[np.ndarray, np.ndarray]:
    """Near-clipped screen-space triangles: pixel coords (T,3,2), depths (T,3)."""
    if mesh.is_empty:
        return np.zeros((0, 3, 2)), np.zeros((0, 3))
    tri_cam = _clip_near(_to_camera(mesh, vp, cam)[mesh.faces], cam.near)
    if len(tri_cam) == 0:
        return np.zeros((0, 3, 2)), np.zeros((0, 3))
    return _project_xy(tri_cam, cam), tri_cam[:, :, 2]


# ---------------------------------------------------------------------------
# Ragged per-triangle pixel enumeration
# ---------------------------------------------------------------------------


def _bbox_pixels(
    tris_px: np.ndarray, width: int, height: int, pad: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat (tri_id, pixel_x, pixel_y) covering each triangle's padded bbox.

    Pixel centers are at integer + 0.5; returned x/y are integer indices.
    """
    lo = tris_px.min(axis=1) - pad
    hi = tris_px.max(axis=1) + pad
    # pixel index range whose centers fall inside [lo, hi]
    x0 = np.maximum(np.ceil(lo[:, 0] - 0.5), 0).astype(np.int64)
    y0 = np.maximum(np.ceil(lo[:, 1] - 0.5), 0).astype(np.int64)
    x1 = np.minimum(np.floor(hi[:, 0] - 0.5), width - 1).astype(np.int64)
    y1 = np.minimum(np.floor(hi[:, 1] - 0.5), height - 1).astype(np.int64)
    bw = np.maximum(x1 - x0 + 1, 0)
    bh = np.maximum(y1 - y0 + 1, 0)
    counts = bw * bh
    total = int(counts.sum())
    if total == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z
    tri_id = np.repeat(np.arange(len(counts)), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    within = np.arange(total) - np.repeat(offsets, counts)
    ix = x0[tri_id] + within % np.maximum(bw[tri_id], 1)
    iy = y0[tri_id] + within // np.maximum(bw[tri_id], 1)
    return tri_id, ix, iy


def _oriented(tris_px: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reorder each triangle so its signed pixel-space area is positive.

    Returns (triangles, keep_mask); zero-area triangles are masked out.
    """
    e1 = tris_px[:, 1] - tris_px[:, 0]
    e2 = tris_px[:, 2] - tris_px[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flipped = tris_px.copy()
    neg = area2 < 0
    flipped[neg] = flipped[neg][:, [0, 2, 1]]
    return flipped, area2 != 0


def _edge_values(tris_px: np.ndarray, tri_id: np.ndarray, px: np.ndarray, py: np.ndarray):
    """Edge functions e_i and tie-break inclusion masks for flat pixel lists."""
    e = np.empty((len(tri_id), 3))
    tie_ok = np.empty((len(tri_id), 3), dtype=bool)
    for i in range(3):
        a = tris_px[tri_id, i]
        b = tris_px[tri_id, (i + 1) % 3]
        dx = b[:, 0] - a[:, 0]
        dy = b[:, 1] - a[:, 1]
        e[:, i] = dx * (py - a[:, 1]) - dy * (px - a[:, 0])
        # pixel on the edge belongs to the triangle whose interior lies
        # rightward (or downward for horizontal edges) of it
        tie_ok[:, i] = (dy < 0) | ((dy == 0) & (dx > 0))
    covered = ((e > 0) | ((e == 0) & tie_ok)).all(axis=1)
    return e, covered


def _rasterize(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel) -> np.ndarray:
    """Shared hard-coverage pass: z-buffer (H, W) with NO_HIT where uncovered."""
    zbuf = np.full((cam.height, cam.width), NO_HIT)
    tris_px, tris_z = _screen_triangles(mesh, vp, cam)
    if len(tris_px) == 0:
        return zbuf
    tris_px, keep = _oriented(tris_px)
    tris_px, tris_z = tris_px[keep], tris_z[keep]
    if len(tris_px) == 0:
        return zbuf

    tri_id, ix, iy = _bbox_pixels(tris_px, cam.width, cam.height, pad=0.0)
    if len(tri_id) == 0:
        return zbuf
    px = ix + 0.5
    py = iy + 0.5
    e, covered = _edge_values(tris_px, tri_id, px, py)

    tri_id, ix, iy = tri_id[covered], ix[covered], iy[covered]
    if len(tri_id) == 0:
        return zbuf
    e = e[covered]
    # perspective-correct depth: interpolate 1/z with screen barycentrics
    # (e[:, i] is the edge function opposite vertex i+2)
    area2 = e.sum(axis=1)
    w0 = e[:, 1] / area2
    w1 = e[:, 2] / area2
    w2 = e[:, 0] / area2
    inv_z = w0 / tris_z[tri_id, 0] + w1 / tris_z[tri_id, 1] + w2 / tris_z[tri_id, 2]
    depth = 1.0 / inv_z

    ok = (depth > cam.near) & (depth < cam.far)
    flat = iy[ok] * cam.width + ix[ok]
    np.minimum.at(zbuf.reshape(-1), flat, depth[ok])
    return zbuf


def rasterize_silhouette(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel) -> SilhouetteImage:
    """Binary coverage image: 1 where a pixel center is covered by the mesh."""
    zbuf = _rasterize(mesh, vp, cam)
    return SilhouetteImage(cam.width, cam.height, np.isfinite(zbuf).astype(np.float64))


def rasterize_depth(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel) -> DepthImage:
    """Per-pixel nearest depth with NO_HIT where no triangle covers the pixel."""
    return DepthImage(cam.width, cam.height, _rasterize(mesh, vp, cam))


# ---------------------------------------------------------------------------
# Soft (differentiable) silhouette
# ---------------------------------------------------------------------------


def _signed_distance_terms(tris_px, tri_id, px, py):
    """Signed pixel distance from points to their triangle, with closest-edge
    data needed by the analytic gradient.

    Returns (signed_dist, edge_k, t_star, nx, ny) where the closest boundary
    point is a_k + t_star * (b_k - a_k) and (nx, ny) is the unit vector from
    it toward the point.
    """
    p = np.stack([px, py], axis=1)
    d2 = np.empty((len(tri_id), 3))
    ts = np.empty((len(tri_id), 3))
    inside = np.ones(len(tri_id), dtype=bool)
    for i in range(3):
        a = tris_px[tri_id, i]
        b = tris_px[tri_id, (i + 1) % 3]
        u = b - a
        v = p - a
        uu = (u * u).sum(axis=1)
        t = np.divide((u * v).sum(axis=1), uu, out=np.zeros(len(u)), where=uu > 0)
        t = np.clip(t, 0.0, 1.0)
        q = a + t[:, None] * u
        dq = p - q
        d2[:, i] = (dq * dq).sum(axis=1)
        ts[:, i] = t
        inside &= u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0] > 0
    k = np.argmin(d2, axis=1)
    rows = np.arange(len(tri_id))
    dist = np.sqrt(d2[rows, k])
    t_star = ts[rows, k]
    a = tris_px[tri_id, k]
    b = tris_px[tri_id, (k + 1) % 3]
    q = a + t_star[:, None] * (b - a)
    n = p - q
    norm = np.maximum(np.linalg.norm(n, axis=1), 1e-30)
    sign = np.where(inside, 1.0, -1.0)
    return sign * dist, k, t_star, n[:, 0] / norm, n[:, 1] / norm


def _soft_setup(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel, sharpness: float):
    """Common forward pass for soft coverage and its pose gradient.

    Triangles not entirely in front of the near plane are dropped (objects
    are assumed well inside the frustum for differentiable rendering).
    """
    if sharpness <= 0:
        raise ValueError(f"sharpness must be positive, got {sharpness}")
    scale = REFERENCE_WIDTH / cam.width  # pixel distance -> reference pixels
    k_eff = sharpness * scale

    q = _to_camera(mesh, vp, cam)
    front = q[:, 2] > cam.near
    faces = mesh.faces[front[mesh.faces].all(axis=1)]
    if len(faces) == 0:
        return None

    verts_px = _project_xy(q, cam)
    tris_px = verts_px[faces]
    # normalized orientation only matters for the inside test's sign
    tris_ori, keep = _oriented(tris_px)
    order = np.where(keep, 0, 0)  # all kept triangles participate
    degenerate = ~keep

    pad = math.ceil(_SIGMA_CUTOFF_LOGIT / k_eff) + 1.0
    tri_id, ix, iy = _bbox_pixels(tris_px, cam.width, cam.height, pad=pad)
    if len(tri_id) == 0:
        return None
    px = ix + 0.5
    py = iy + 0.5

    use = np.where(degenerate[tri_id], False, True)
    # degenerate (zero screen area) triangles contribute distance <= 0 terms
    # through the unoriented path; keep them for coverage continuity
    sd, edge_k, t_star, nx, ny = _signed_distance_terms(
        np.where(degenerate[:, None, None], tris_px, tris_ori), tri_id, px, py
    )
    sd = np.where(use, sd, -np.abs(sd))

    x = k_eff * sd
    active = x > -_SIGMA_CUTOFF_LOGIT
    tri_id, ix, iy = tri_id[active], ix[active], iy[active]
    x, edge_k, t_star = x[active], edge_k[active], t_star[active]
    nx, ny = nx[active], ny[active]

    flat = iy * cam.width + ix
    log_one_minus = -np.logaddexp(0.0, x)  # log(1 - sigmoid(x)), stable
    acc = np.bincount(flat, weights=log_one_minus, minlength=cam.width * cam.height)
    coverage = -np.expm1(acc).reshape(cam.height, cam.width)
    return {
        "faces": faces,
        "q": q,
        "tris_ori": tris_ori,
        "k_eff": k_eff,
        "tri_id": tri_id,
        "flat": flat,
        "x": x,
        "edge_k": edge_k,
        "t_star": t_star,
        "nhat": (nx, ny),
        "log_acc": acc,
        "coverage": np.clip(coverage, 0.0, 1.0),
        "degenerate": degenerate,
    }


def soft_silhouette(
    mesh: TriangleMesh,
    vp: Viewpoint,
    cam: CameraModel,
    sharpness: float = DEFAULT_SHARPNESS,
) -> SilhouetteImage:
    """Continuous-valued silhouette, differentiable in (azimuth, elevation)."""
    state = _soft_setup(mesh, vp, cam, sharpness)
    if state is None:
        return SilhouetteImage(cam.width, cam.height, np.zeros((cam.height, cam.width)))
    return SilhouetteImage(cam.width, cam.height, state["coverage"])


def _pixel_pose_jacobian(mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel):
    """d(projected pixel)/d(azimuth, elevation) per vertex, in pixels/degree.

    Uses the closed-form camera basis away from the poles; shape (V, 2, 2)
    indexed [vertex, (x,y), (az,el)].
    """
    az = math.radians(vp.azimuth_deg)
    el = math.radians(vp.elevation_deg)
    sa, ca = math.sin(az), math.cos(az)
    se, ce = math.sin(el), math.cos(el)
    w = mesh.vertices

    rows = np.array(
        [
            [-sa, ca, 0.0],
            [se * ca, se * sa, -ce],
            [-ce * ca, -ce * sa, -se],
        ]
    )
    d_az = np.array(
        [
            [-ca, -sa, 0.0],
            [-se * sa, se * ca, 0.0],
            [ce * sa, -ce * ca, 0.0],
        ]
    )
    d_el = np.array(
        [
            [0.0, 0.0, 0.0],
            [ce * ca, ce * sa, se],
            [se * ca, se * sa, -ce],
        ]
    )
    q = w @ rows.T + np.array([0.0, 0.0, cam.distance])
    qa = w @ d_az.T
    qe = w @ d_el.T

    f = cam.focal_px
    z = q[:, 2]
    jac = np.empty((len(w), 2, 2))
    for j, dq in enumerate((qa, qe)):
        jac[:, 0, j] = f * (dq[:, 0] * z - q[:, 0] * dq[:, 2]) / (z * z)
        jac[:, 1, j] = f * (dq[:, 1] * z - q[:, 1] * dq[:, 2]) / (z * z)
    return jac * (math.pi / 180.0)


def soft_silhouette_with_pose_grad(
    mesh: TriangleMesh,
    vp: Viewpoint,
    cam: CameraModel,
    sharpness: float = DEFAULT_SHARPNESS,
) -> tuple[SilhouetteImage, np.ndarray, np.ndarray]:
    """Soft silhouette plus per-pixel d(coverage)/d(azimuth_deg, elevation_deg).

    Returns (image, dcov_daz (H,W), dcov_del (H,W)). The derivative chains
    the per-triangle sigmoid terms through the signed-distance closest
    feature and the projected vertex motion under pose perturbation.
    """
    shape = (cam.height, cam.width)
    state = _soft_setup(mesh, vp, cam, sharpness)
    if state is None:
        zeros = np.zeros(shape)
        return SilhouetteImage(cam.width, cam.height, zeros), zeros.copy(), zeros.copy()

    faces = state["faces"]
    tri_id = state["tri_id"]
    x = state["x"]
    flat = state["flat"]
    k_eff = state["k_eff"]
    edge_k = state["edge_k"]
    t_star = state["t_star"]
    nx, ny = state["nhat"]

    # leave-one-out survivor product: prod_{t' != t} (1 - sigma_{t'})
    log_one_minus = -np.logaddexp(0.0, x)
    loo = np.exp(state["log_acc"][flat] - log_one_minus)
    sigma_prime = 1.0 / (np.exp(x) + np.exp(-x) + 2.0)  # sigma(x)(1-sigma(x))

    # signed distance gradient w.r.t. the closest edge's endpoints: with the
    # closest point q = a + t(b-a) and nhat from q toward the pixel,
    # d(dist)/da = -(1-t) nhat, d(dist)/db = -t nhat (sign folded into x)
    sign = np.where(x >= 0, 1.0, -1.0) * np.where(np.abs(x) > 0, 1.0, 1.0)
    # recover sign of the stored signed distance from x = k_eff * sd
    sign = np.sign(x) + (x == 0)

    jac = _pixel_pose_jacobian(mesh, vp, cam)  # (V,2,2)
    ia = faces[tri_id, edge_k]
    ib = faces[tri_id, (edge_k + 1) % 3]
    # orientation flip (used for the inside test) swaps vertices 1 and 2 but
    # leaves the vertex set unchanged; edge_k indexes the oriented triangle
    flipped = np.zeros(len(faces), dtype=bool)
    e1 = state["tris_ori"]  # oriented triangles were built from tris_px
    # rebuild oriented index map: vertex v of oriented tri -> original face col
    ori_cols = np.tile(np.array([0, 1, 2]), (len(faces), 1))
    # detect flips by comparing oriented coords against original projection
    # (cheap: a triangle was flipped iff its stored corner 1 differs)
    verts_px = _project_xy(state["q"], cam)
    orig = verts_px[faces]
    flipped = ~np.isclose(e1[:, 1], orig[:, 1]).all(axis=1)
    ori_cols[flipped] = np.array([0, 2, 1])
    ia = faces[np.arange(len(faces))[tri_id], ori_cols[tri_id, edge_k]]
    ib = faces[np.arange(len(faces))[tri_id], ori_cols[tri_id, (edge_k + 1) % 3]]

    wa = -(1.0 - t_star)
    wb = -t_star
    # dd/dtheta = sign * (wa * nhat . dA/dtheta + wb * nhat . dB/dtheta)
    dd = np.empty((len(x), 2))
    for j in range(2):
        da = jac[ia, 0, j] * nx + jac[ia, 1, j] * ny
        db = jac[ib, 0, j] * nx + jac[ib, 1, j] * ny
        dd[:, j] = sign * (wa * da + wb * db)

    coeff = loo * sigma_prime * k_eff
    n_px = shape[0] * shape[1]
    dcov_daz = np.bincount(flat, weights=coeff * dd[:, 0], minlength=n_px).reshape(shape)
    dcov_del = np.bincount(flat, weights=coeff * dd[:, 1], minlength=n_px).reshape(shape)
    img = SilhouetteImage(cam.width, cam.height, state["coverage"])
    return img, dcov_daz, dcov_del


# ---------------------------------------------------------------------------
# Raycast oracle (independent of the rasterizer's coverage code)
# ---------------------------------------------------------------------------

_MT_EPS = 1e-9


def raycast_silhouette_oracle(
    mesh: TriangleMesh, vp: Viewpoint, cam: CameraModel
) -> SilhouetteImage:
    """Silhouette by casting a ray through every pixel center.

    A pixel is foreground iff any triangle is intersected by its ray with a
    Moller-Trumbore test (parallel epsilon 1e-9), at a depth inside
    (near, far). No code is shared with the rasterizer's coverage rule.
    """
    out = np.zeros((cam.height, cam.width))
    if mesh.is_empty:
        return SilhouetteImage(cam.width, cam.height, out)

    R, t = view_to_camera_transform(vp, cam)
    origin = -R.T @ t
    f = cam.focal_px
    xs = (np.arange(cam.width) + 0.5 - cam.cx) / f
    ys = (np.arange(cam.height) + 0.5 - cam.cy) / f
    gx, gy = np.meshgrid(xs, ys)
    dirs_cam = np.stack([gx, gy, np.ones_like(gx)], axis=-1).reshape(-1, 3)
    dirs = dirs_cam @ R  # == (R.T @ d.T).T; t parameter equals camera depth

    v0 = mesh.vertices[mesh.faces[:, 0]]
    e1 = mesh.vertices[mesh.faces[:, 1]] - v0
    e2 = mesh.vertices[mesh.faces[:, 2]] - v0

    hit = np.zeros(len(dirs), dtype=bool)
    chunk = max(1, int(2_000_000 // max(len(v0), 1)))
    for s in range(0, len(dirs), chunk):
        d = dirs[s : s + chunk]  # (P,3)
        pvec = np.cross(d[:, None, :], e2[None, :, :])  # (P,T,3)
        det = np.einsum("tk,ptk->pt", e1, pvec)
        ok = np.abs(det) > _MT_EPS
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = origin - v0  # (T,3)
        u = np.einsum("tk,ptk->pt", tvec, pvec) * inv_det
        ok &= (u >= -_MT_EPS) & (u <= 1.0 + _MT_EPS)
        qvec = np.cross(tvec, e1)  # (T,3)
        v = np.einsum("pk,tk->pt", d, qvec) * inv_det
        ok &= (v >= -_MT_EPS) & (u + v <= 1.0 + _MT_EPS)
        tt = np.einsum("tk,tk->t", e2, qvec)[None, :] * inv_det
        ok &= (tt > cam.near) & (tt < cam.far)
        hit[s : s + chunk] = ok.any(axis=1)

    out = hit.reshape(cam.height, cam.width).astype(np.float64)
    return SilhouetteImage(cam.width, cam.height, out)


# ---------------------------------------------------------------------------
# PGM silhouette I/O ("P5", maxval 255)
# ---------------------------------------------------------------------------


def save_silhouette_pgm(img: SilhouetteImage, path) -> None:
    data = np.round(img.values * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_silhouette_pgm(path) -> SilhouetteImage:
    """Read a P5 PGM; bytes >= 128 are foreground (1.0), the rest 0.0."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i] not in b"\r\n":
                i += 1
        elif data[i : i + 1].isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"{path}: not a P5 PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    i += 1  # single whitespace after maxval
    payload = data[i : i + width * height]
    if len(payload) != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return SilhouetteImage(width, height, (raw >= 128).astype(np.float64))
