"""Headless binocular rendering by per-pixel raycasting, plus visual filters.

One primary ray per pixel against the scene colliders; the nearest opaque
hit is shaded with a single fixed directional light (lambert + ambient),
transparent bodies are skipped, and misses show the background color.
Filters compose in a fixed order: render -> depth-of-field -> grayscale ->
blur. Rendering is a pure function of (scene, camera, config) and is
bit-identical across calls.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .geom import Frame, quat_to_matrix

DEFAULT_RESOLUTION = 84
DEFAULT_VFOV_DEG = 60.0
LIGHT_INTENSITY = 0.8
AMBIENT = 0.2
# no lateral component: mirrored scenes render to mirrored images
LIGHT_DIR = np.array([0.0, -1.0, 0.35]) / np.linalg.norm([0.0, -1.0, 0.35])
MAX_DOF_SIGMA = 8.0


@dataclass
class Camera:
    frame: Frame = field(default_factory=Frame)
    vertical_fov_deg: float = DEFAULT_VFOV_DEG
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    focal_distance: float = 2.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("camera resolution must be >= 1")
        if not 0 < self.vertical_fov_deg < 180:
            raise ValueError("vertical fov must be in (0, 180)")

    @property
    def focal_px(self) -> float:
        return (self.height / 2.0) / np.tan(np.radians(self.vertical_fov_deg) / 2.0)


@dataclass
class VisionConfig:
    grayscale: bool = False
    blur_sigma: float = 0.0
    depth_of_field: bool = False
    aperture: float = 0.0

    def __post_init__(self):
        if self.blur_sigma < 0 or self.aperture < 0:
            raise ValueError("blur_sigma and aperture must be >= 0")


def camera_rays(camera: Camera):
    """Origins and unit directions for every pixel (row-major, top-left first)."""
    f = camera.focal_px
    j = np.arange(camera.width, dtype=float)
    i = np.arange(camera.height, dtype=float)
    x = (j + 0.5 - camera.width / 2.0) / f
    y = -(i + 0.5 - camera.height / 2.0) / f
    xs, ys = np.meshgrid(x, y)
    local = np.stack([xs, ys, np.ones_like(xs)], axis=-1).reshape(-1, 3)
    rot = quat_to_matrix(camera.frame.rot)
    dirs = local @ rot.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(camera.frame.pos, dirs.shape).copy()
    return origins, dirs


def render(scene_pack, camera: Camera, background=(0.0, 0.0, 0.0), light_dir=LIGHT_DIR,
           light_intensity=LIGHT_INTENSITY, ambient=AMBIENT):
    """Render (image HxWx3 in [0,1], depth HxW, owner id HxW).

    scene_pack is (prims, prim_owner, tris, tri_owner, colors) with colors
    indexed by owner; transparent colliders must already be filtered out.
    Depth holds the hit distance along the ray, inf on miss; owner -1 on miss.
    """
    prims, prim_owner, tris, tri_owner, colors = scene_pack
    origins, dirs = camera_rays(camera)
    t, owner, normal = _kernels.raycast(origins, dirs, prims, prim_owner, tris, tri_owner)

    hit = owner >= 0
    shade = np.maximum(0.0, -(normal @ light_dir)) * light_intensity + ambient
    if colors.shape[0]:
        albedo = np.where(hit[:, None], colors[np.where(hit, owner, 0)], 0.0)
    else:
        albedo = np.zeros_like(origins)
    pix = albedo * shade[:, None]
    pix[~hit] = np.asarray(background, float)
    img = np.clip(pix, 0.0, 1.0).reshape(camera.height, camera.width, 3)
    depth = t.reshape(camera.height, camera.width)
    ids = owner.reshape(camera.height, camera.width)
    return img, depth, ids


def apply_filters(image: np.ndarray, depth: np.ndarray, config: VisionConfig,
                  focal_distance: float = 2.0, ) -> np.ndarray:
    """Depth-of-field, then grayscale, then uniform blur (fixed order)."""
    if image.shape[:2] != depth.shape:
        raise ValueError("image and depth resolution differ")
    out = image
    if config.depth_of_field and config.aperture > 0:
        out = _depth_of_field(out, depth, config.aperture, focal_distance)
    if config.grayscale:
        out = (0.299 * out[..., 0] + 0.587 * out[..., 1] + 0.114 * out[..., 2])[..., None]
    if config.blur_sigma > 0:
        blurred = np.empty_like(out)
        for c in range(out.shape[2]):
            blurred[..., c] = ndimage.gaussian_filter(out[..., c], config.blur_sigma,
                                                      mode="nearest")
        out = blurred
    return np.clip(out, 0.0, 1.0)


def _depth_of_field(image, depth, aperture, focal_distance):
    """Thin-lens approximation: per-pixel blur radius from the circle of
    confusion sigma = aperture * |1/z - 1/z_focus|, clamped to [0, 8] px."""
    inv_z = np.where(np.isfinite(depth) & (depth > 0), 1.0 / np.maximum(depth, 1e-6), 0.0)
    sigma = aperture * np.abs(inv_z - 1.0 / focal_distance)
    sigma = np.clip(sigma, 0.0, MAX_DOF_SIGMA)
    levels = np.arange(0, int(MAX_DOF_SIGMA) + 1, dtype=float)
    stack = [image]
    for s in levels[1:]:
        b = np.empty_like(image)
        for c in range(image.shape[2]):
            b[..., c] = ndimage.gaussian_filter(image[..., c], s, mode="nearest")
        stack.append(b)
    stack = np.stack(stack)  # (L, H, W, C)
    lo = np.clip(np.floor(sigma).astype(int), 0, len(levels) - 1)
    hi = np.clip(lo + 1, 0, len(levels) - 1)
    w = (sigma - lo)[..., None]
    rows, cols = np.indices(depth.shape)
    return (1.0 - w) * stack[lo, rows, cols] + w * stack[hi, rows, cols]


def eye_camera(agent, eye: str, width=DEFAULT_RESOLUTION, height=DEFAULT_RESOLUTION,
               focal_distance=2.0) -> Camera:
    return Camera(frame=agent.eye_frame(eye), vertical_fov_deg=agent.vertical_fov_deg,
                  width=width, height=height, focal_distance=focal_distance)


def render_binocular(agent, scene_pack, config: VisionConfig | None = None,
                     background=(0.0, 0.0, 0.0), light_dir=LIGHT_DIR,
                     width=DEFAULT_RESOLUTION, height=DEFAULT_RESOLUTION,
                     focal_distance=2.0):
    """Render both eye views with identical configuration.

    Returns (left, right) images shaped (H, W, C)."""
    config = config or VisionConfig()
    out = []
    for eye in ("left", "right"):
        cam = eye_camera(agent, eye, width, height, focal_distance)
        img, depth, _ = render(scene_pack, cam, background, light_dir)
        out.append(apply_filters(img, depth, config, focal_distance))
    return out[0], out[1]
