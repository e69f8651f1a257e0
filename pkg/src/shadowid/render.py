"""Procedural face renderer: parallax-warped heightfield with Lambertian shading.

The renderer is a cheap deterministic stand-in for a physically based
pipeline.  It only has to be a fixed nonlinear map from (identity,
expression, pose, lighting) to a nonnegative grayscale radiance image, so
that the per-identity distribution of shadow images is nondegenerate under
random scene parameters.

Pipeline for one face image:

1. synthesize (shape, texture) from the morphable model;
2. use the depth block of the shape as a heightfield h on the p x p grid;
3. pose as a parallax warp: sample source pixels displaced by
   (h * tan(azimuth), h * tan(elevation)), bilinear, edge-clamped;
4. surface normals from central finite differences of the warped heightfield;
5. shading = ambient + (1 - ambient) * max(0, normal . unit toward light);
6. multiply shading * warped texture * fixed elliptical silhouette mask;
7. bilinear resample to the requested output resolution.

Image axes: row index v increases downward, column index u to the right.
Scene coordinates (x, y, z) map onto the local face frame as
(u, v, out-of-face) = (+y, -z, -x); the face looks toward -x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .morphable import depth_map, synthesize

__all__ = [
    "RenderParams",
    "SceneConfig",
    "DEFAULT_SCENE",
    "render",
    "render_radiance",
    "sample_render_params",
    "parallax_warp",
    "surface_normals",
    "light_direction",
    "silhouette_mask",
    "resample_bilinear",
]

MAX_POSE_DEG = 89.0


@dataclass(frozen=True)
class RenderParams:
    """Pose and lighting for one rendered face.

    ``light_coeff`` is the affine coordinate of the light along the scene's
    light segment; it is carried along for logging only.
    """

    elevation_deg: float
    azimuth_deg: float
    light_pos: tuple[float, float, float]
    ambient: float = 0.2
    light_coeff: float | None = None

    def __post_init__(self):
        if abs(self.elevation_deg) > MAX_POSE_DEG or abs(self.azimuth_deg) > MAX_POSE_DEG:
            raise ValueError("pose angles must lie within +/-89 degrees")
        if not 0.0 <= self.ambient <= 1.0:
            raise ValueError(f"ambient must lie in [0, 1], got {self.ambient}")


@dataclass(frozen=True)
class SceneConfig:
    """Scene geometry and sampling ranges for dataset generation."""

    face_pos: tuple[float, float, float] = (1.65, 0.0, 1.15)
    light_line: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (0.15, -0.5, 1.50),
        (0.15, 0.5, 1.50),
    )
    elevation_range_deg: tuple[float, float] = (-15.0, 15.0)
    azimuth_range_deg: tuple[float, float] = (-15.0, 15.0)
    expression_scale: float = 0.5
    ambient: float = 0.2

    def __post_init__(self):
        a, b = (np.asarray(e, dtype=float) for e in self.light_line)
        if np.array_equal(a, b):
            raise ValueError("light_line endpoints must be distinct")
        for lo, hi in (self.elevation_range_deg, self.azimuth_range_deg):
            if lo > hi or max(abs(lo), abs(hi)) > MAX_POSE_DEG:
                raise ValueError("pose ranges must be ordered and within +/-89 degrees")
        if self.expression_scale < 0:
            raise ValueError("expression_scale must be nonnegative")


DEFAULT_SCENE = SceneConfig()


def bilinear_sample(field, rows, cols):
    """Sample ``field`` at fractional (row, col) positions, edge-clamped."""
    h, w = field.shape
    rows = np.clip(rows, 0.0, h - 1.0)
    cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = rows - r0
    fc = cols - c0
    top = field[r0, c0] * (1.0 - fc) + field[r0, c1] * fc
    bot = field[r1, c0] * (1.0 - fc) + field[r1, c1] * fc
    return top * (1.0 - fr) + bot * fr


def parallax_warp(fields, height, azimuth_deg, elevation_deg):
    """Warp each field by the height-dependent parallax displacement.

    Each output pixel samples its field at (v + h*tan(elevation),
    u + h*tan(azimuth)) where h is the local height.  Zero angles reproduce
    the inputs exactly.
    """
    p = height.shape[0]
    du = height * np.tan(np.deg2rad(azimuth_deg))
    dv = height * np.tan(np.deg2rad(elevation_deg))
    vv, uu = np.meshgrid(np.arange(p, dtype=float), np.arange(p, dtype=float), indexing="ij")
    rows = vv + dv
    cols = uu + du
    return [bilinear_sample(f, rows, cols) for f in fields]


def surface_normals(height):
    """Unit normals of a heightfield from central finite differences.

    Returns the (n_u, n_v, n_z) components, each shaped like ``height``.
    """
    gv, gu = np.gradient(height)
    inv_norm = 1.0 / np.sqrt(gu * gu + gv * gv + 1.0)
    return -gu * inv_norm, -gv * inv_norm, inv_norm


def light_direction(light_pos, face_pos):
    """Unit vector from the face toward the light, in the local face frame."""
    d = np.asarray(light_pos, dtype=float) - np.asarray(face_pos, dtype=float)
    local = np.array([d[1], -d[2], -d[0]])
    norm = np.linalg.norm(local)
    if norm == 0:
        raise ValueError("light position coincides with the face position")
    return local / norm


@lru_cache(maxsize=8)
def silhouette_mask(grid_size):
    """Fixed binary elliptical silhouette on a grid_size x grid_size grid."""
    p = grid_size
    c = (p - 1) / 2.0
    vv, uu = np.meshgrid(np.arange(p, dtype=float), np.arange(p, dtype=float), indexing="ij")
    ru = 0.40 * (p - 1)
    rv = 0.47 * (p - 1)
    mask = (((uu - c) / ru) ** 2 + ((vv - c) / rv) ** 2 <= 1.0).astype(np.float64)
    mask.flags.writeable = False
    return mask


def resample_bilinear(image, out_size):
    """Bilinear resample of a square image to out_size x out_size."""
    p = image.shape[0]
    if out_size == p:
        return image
    scale = p / out_size
    coords = (np.arange(out_size, dtype=float) + 0.5) * scale - 0.5
    rows, cols = np.meshgrid(coords, coords, indexing="ij")
    return bilinear_sample(image, rows, cols)


def render_radiance(height, texture_map, params, scene=DEFAULT_SCENE, out_size=None):
    """Shade an explicit heightfield/texture pair (stages 3-7 of the pipeline).

    Linear in ``texture_map``; exposed separately so synthetic inputs can be
    shaded directly.
    """
    if height.shape != texture_map.shape or height.ndim != 2:
        raise ValueError(
            f"height {height.shape} and texture {texture_map.shape} must be equal 2-D shapes")
    warped_h, warped_t = parallax_warp(
        [height, texture_map], height, params.azimuth_deg, params.elevation_deg)
    nu, nv, nz = surface_normals(warped_h)
    lu, lv, lz = light_direction(params.light_pos, scene.face_pos)
    cosine = np.maximum(0.0, nu * lu + nv * lv + nz * lz)
    shading = params.ambient + (1.0 - params.ambient) * cosine
    image = shading * warped_t * silhouette_mask(height.shape[0])
    if out_size is not None:
        image = resample_bilinear(image, out_size)
    return image


def render(model, identity, expression, params, scene=DEFAULT_SCENE, out_size=None):
    """Render one face image (nonnegative radiance, out_size x out_size)."""
    shape, texture = synthesize(model, identity, expression)
    height = depth_map(model, shape)
    return render_radiance(height, texture.reshape(height.shape), params,
                           scene=scene, out_size=out_size)


def sample_render_params(scene, rng):
    """Draw pose and light placement for one sample.

    Elevation and azimuth are uniform over the configured ranges; the light
    position is uniform along the scene's light segment (the drawn affine
    coefficient is recorded on the returned params).  Draw order is fixed:
    elevation, azimuth, light coefficient.
    """
    el = rng.uniform(*scene.elevation_range_deg)
    az = rng.uniform(*scene.azimuth_range_deg)
    t = rng.uniform(0.0, 1.0)
    a = np.asarray(scene.light_line[0], dtype=float)
    b = np.asarray(scene.light_line[1], dtype=float)
    pos = (1.0 - t) * a + t * b
    return RenderParams(
        elevation_deg=el,
        azimuth_deg=az,
        light_pos=tuple(pos),
        ambient=scene.ambient,
        light_coeff=t,
    )
