"""Linear face model with procedurally generated smooth orthonormal bases.

Faces live on a p x p vertex grid (V = p^2 vertices).  A face is described
by a shape vector of length 3V (three stacked V-blocks: in-plane x, in-plane
y, and depth offsets) and a grayscale texture vector of length V with
reflectance values in [0, 1]:

    shape   = mean_shape   + basis_id  @ id_code + basis_exp @ exp_code
    texture = clip(mean_texture + basis_tex @ tex_code, 0, 1)

Basis columns are unit-norm and mutually orthogonal, so code variance maps
directly onto model-space variance.  Identities share the mean face shape
(id_code is all-zero) and differ only through their texture codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from . import container

__all__ = [
    "MorphableModel",
    "Identity",
    "ExpressionSample",
    "build_procedural_model",
    "sample_identity",
    "sample_expression",
    "synthesize",
    "depth_map",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class MorphableModel:
    """Immutable linear face model on a p x p vertex grid."""

    grid_size: int
    mean_shape: np.ndarray    # (3V,)
    mean_texture: np.ndarray  # (V,), values in [0, 1]
    basis_id: np.ndarray      # (3V, k_id), orthonormal columns
    basis_exp: np.ndarray     # (3V, k_exp), orthonormal columns
    basis_tex: np.ndarray     # (V, k_tex), orthonormal columns

    @property
    def vertex_count(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def k_id(self) -> int:
        return self.basis_id.shape[1]

    @property
    def k_exp(self) -> int:
        return self.basis_exp.shape[1]

    @property
    def k_tex(self) -> int:
        return self.basis_tex.shape[1]

    def __post_init__(self):
        v = self.grid_size * self.grid_size
        if self.mean_shape.shape != (3 * v,):
            raise ValueError(f"mean_shape must have length {3 * v}, got {self.mean_shape.shape}")
        if self.mean_texture.shape != (v,):
            raise ValueError(f"mean_texture must have length {v}, got {self.mean_texture.shape}")
        for name, basis, rows in (("basis_id", self.basis_id, 3 * v),
                                  ("basis_exp", self.basis_exp, 3 * v),
                                  ("basis_tex", self.basis_tex, v)):
            if basis.ndim != 2 or basis.shape[0] != rows:
                raise ValueError(f"{name} must have {rows} rows, got shape {basis.shape}")
        if self.mean_texture.min() < 0.0 or self.mean_texture.max() > 1.0:
            raise ValueError("mean_texture values must lie in [0, 1]")
        for arr in (self.mean_shape, self.mean_texture, self.basis_id,
                    self.basis_exp, self.basis_tex):
            arr.flags.writeable = False


@dataclass(frozen=True)
class Identity:
    """One class: fixed identity/texture codes plus an experiment label."""

    id_code: np.ndarray
    tex_code: np.ndarray
    label: int

    def __post_init__(self):
        if not (np.all(np.isfinite(self.id_code)) and np.all(np.isfinite(self.tex_code))):
            raise ValueError("identity codes must be finite")


@dataclass(frozen=True)
class ExpressionSample:
    exp_code: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.exp_code)):
            raise ValueError("expression code must be finite")


def _smooth_fields(rng, grid_size, n_fields, sigma):
    """Low-pass-filtered white Gaussian noise fields, flattened to rows."""
    fields = np.empty((n_fields, grid_size * grid_size))
    for i in range(n_fields):
        noise = rng.standard_normal((grid_size, grid_size))
        fields[i] = gaussian_filter(noise, sigma=sigma, mode="nearest").ravel()
    return fields


def _orthonormalize(columns):
    """Orthonormalize columns (Gram-Schmidt via QR, signs canonicalized)."""
    q, r = np.linalg.qr(columns)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def build_procedural_model(grid_size, k_id=8, k_exp=12, k_tex=24, seed=0):
    """Build a deterministic procedural stand-in for a scanned face model.

    Bases are smooth random fields (per-column low-pass-filtered Gaussian
    noise, then orthonormalization).  The mean texture is a fixed smooth
    bump profile in [0.2, 0.9], and the mean shape is a smooth dome
    heightfield in the depth block.

    Parameters
    ----------
    grid_size : int, >= 8
    k_id, k_exp, k_tex : int, >= 1
        Basis dimensions; texture dimension may not exceed V = grid_size**2,
        shape dimensions may not exceed 3V.
    seed : int
        Same seed, same model, bit for bit.
    """
    p = int(grid_size)
    if p < 8:
        raise ValueError(f"grid_size must be at least 8, got {p}")
    v = p * p
    for name, k, cap in (("k_id", k_id, 3 * v), ("k_exp", k_exp, 3 * v), ("k_tex", k_tex, v)):
        if k < 1:
            raise ValueError(f"{name} must be at least 1, got {k}")
        if k > cap:
            raise ValueError(f"{name}={k} exceeds the model dimension {cap}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sigma_shape = p / 8.0
    sigma_tex = p / 8.0

    # Shape basis columns: three independent smooth blocks (x, y, depth).
    basis_id = _orthonormalize(
        _smooth_fields(rng, p, 3 * k_id, sigma_shape).reshape(k_id, 3 * v).T)
    basis_exp = _orthonormalize(
        _smooth_fields(rng, p, 3 * k_exp, sigma_shape).reshape(k_exp, 3 * v).T)
    basis_tex = _orthonormalize(_smooth_fields(rng, p, k_tex, sigma_tex).T)

    # Radial coordinate in [0, ~sqrt(2)] over the grid.
    axis = np.linspace(-1.0, 1.0, p)
    uu, vv = np.meshgrid(axis, axis, indexing="xy")
    rho = np.sqrt(uu * uu + vv * vv)

    mean_texture = 0.2 + 0.7 * np.exp(-((rho / 0.55) ** 2))

    # Dome amplitude of p/6 grid units keeps parallax displacements at a
    # few pixels for pose angles up to ~15 degrees.
    dome = (p / 6.0) * np.cos(np.clip(rho, 0.0, 1.0) * np.pi / 2.0) ** 2
    mean_shape = np.zeros(3 * v)
    mean_shape[2 * v:] = dome.ravel()

    return MorphableModel(
        grid_size=p,
        mean_shape=mean_shape,
        mean_texture=mean_texture.ravel(),
        basis_id=basis_id,
        basis_exp=basis_exp,
        basis_tex=basis_tex,
    )


def sample_identity(model, rng, label=0):
    """Draw a new identity: zero shape code, standard-normal texture code.

    All identities share the mean face shape; they differ only in texture.
    """
    return Identity(
        id_code=np.zeros(model.k_id),
        tex_code=rng.standard_normal(model.k_tex),
        label=int(label),
    )


def sample_expression(model, variance_scale, rng):
    """Draw an expression code with i.i.d. N(0, variance_scale) entries."""
    if variance_scale < 0:
        raise ValueError(f"variance_scale must be nonnegative, got {variance_scale}")
    draw = rng.standard_normal(model.k_exp) * np.sqrt(variance_scale)
    return ExpressionSample(exp_code=draw)


def synthesize(model, identity, expression):
    """Evaluate the linear model for one (identity, expression) pair.

    Returns
    -------
    shape : ndarray, shape (3V,)
    texture : ndarray, shape (V,), clipped to [0, 1]
    """
    if identity.id_code.shape != (model.k_id,):
        raise ValueError(f"id_code must have length {model.k_id}, got {identity.id_code.shape}")
    if identity.tex_code.shape != (model.k_tex,):
        raise ValueError(f"tex_code must have length {model.k_tex}, got {identity.tex_code.shape}")
    if expression.exp_code.shape != (model.k_exp,):
        raise ValueError(
            f"exp_code must have length {model.k_exp}, got {expression.exp_code.shape}")
    shape = model.mean_shape + model.basis_id @ identity.id_code \
        + model.basis_exp @ expression.exp_code
    texture = np.clip(model.mean_texture + model.basis_tex @ identity.tex_code, 0.0, 1.0)
    return shape, texture


def depth_map(model, shape):
    """Depth block of a shape vector, as a (p, p) heightfield."""
    p = model.grid_size
    v = p * p
    if shape.shape != (3 * v,):
        raise ValueError(f"shape vector must have length {3 * v}, got {shape.shape}")
    return shape[2 * v:].reshape(p, p)


_MODEL_FILES = ("mean_shape", "mean_texture", "basis_id", "basis_exp", "basis_tex")


def save_model(model, directory):
    """Serialize the model to a directory of container files (float32)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    container.write_matrix(directory / "mean_shape.shdw", model.mean_shape,
                           metadata=(model.grid_size, 0, 0, 0))
    container.write_matrix(directory / "mean_texture.shdw", model.mean_texture,
                           metadata=(model.grid_size, 0, 0, 0))
    container.write_matrix(directory / "basis_id.shdw", model.basis_id)
    container.write_matrix(directory / "basis_exp.shdw", model.basis_exp)
    container.write_matrix(directory / "basis_tex.shdw", model.basis_tex)


def load_model(directory):
    """Load a model saved by :func:`save_model` (float32 precision)."""
    directory = Path(directory)
    arrays = {}
    for name in _MODEL_FILES:
        arrays[name] = container.read_matrix(directory / f"{name}.shdw").astype(np.float64)
    v = arrays["mean_texture"].size
    p = int(round(np.sqrt(v)))
    if p * p != v:
        raise ValueError(f"stored texture length {v} is not a square grid")
    return MorphableModel(
        grid_size=p,
        mean_shape=arrays["mean_shape"].ravel(),
        mean_texture=np.clip(arrays["mean_texture"].ravel(), 0.0, 1.0),
        basis_id=arrays["basis_id"],
        basis_exp=arrays["basis_exp"],
        basis_tex=arrays["basis_tex"],
    )
