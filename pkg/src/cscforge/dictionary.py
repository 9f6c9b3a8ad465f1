"""Convolutional dictionaries: synthesis, adjoint, atom management.

A dictionary holds m square filters ("atoms") of support n x n x c applied
with a common stride s and crop padding p.  Synthesis is a strided transposed
convolution: needle (i, j) of a representation places a weighted sum of atoms
with its top-left corner at pixel (i*s - p, j*s - p), clipped at the image
border.  The output extent obeys

    H_out = (H - 1) * s + n - 2 * p

and likewise for width.  The banded-circulant structure this realizes is
never materialized; tests build the explicit matrix independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError, ShapeError
from .rng import Rng
from .tensor import DTYPE

ZERO_ATOM_NORM = 1e-8


@dataclass(frozen=True)
class ConvDictionary:
    """m atoms of shape (n, n, c) with stride and padding.

    The atom array is made read-only; all operations return new values.
    Atoms are stored as given (construction does not rescale them), so
    factories that promise unit norms call normalize_atoms explicitly.
    """

    atoms: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.atoms, dtype=DTYPE)
        if arr.ndim != 4:
            raise ShapeError(f"atoms must be (m, n, n, c), got shape {arr.shape}")
        m, n, n2, c = arr.shape
        if n != n2:
            raise ShapeError(f"atoms must have square support, got {n}x{n2}")
        if min(m, n, c) < 1:
            raise ShapeError(f"atom dims must be positive, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("atoms contain non-finite values")
        if self.stride < 1:
            raise GeometryError(f"stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise GeometryError(f"padding must be nonnegative, got {self.padding}")
        if 2 * self.padding >= n:
            raise GeometryError(
                f"padding {self.padding} erases the {n}x{n} atom support (need 2p < n)"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "atoms", arr)

    @property
    def atom_count(self) -> int:
        return self.atoms.shape[0]

    @property
    def atom_size(self) -> int:
        return self.atoms.shape[1]

    @property
    def out_channels(self) -> int:
        return self.atoms.shape[3]


@dataclass(frozen=True)
class DictGeometry:
    """Representation dims and the derived output dims for one dictionary."""

    rep_height: int
    rep_width: int
    out_height: int
    out_width: int


def geometry_for_representation(D: ConvDictionary, h: int, w: int) -> DictGeometry:
    """Geometry for an h x w representation grid."""
    if h < 1 or w < 1:
        raise GeometryError(f"representation dims must be positive, got {h}x{w}")
    n, s, p = D.atom_size, D.stride, D.padding
    oh = (h - 1) * s + n - 2 * p
    ow = (w - 1) * s + n - 2 * p
    if oh < 1 or ow < 1:
        raise GeometryError(f"derived output dims {oh}x{ow} are not positive")
    return DictGeometry(h, w, oh, ow)


def geometry_for_output(D: ConvDictionary, out_h: int, out_w: int) -> DictGeometry:
    """Geometry whose output dims are out_h x out_w, if one exists."""
    n, s, p = D.atom_size, D.stride, D.padding
    num_h, num_w = out_h - n + 2 * p, out_w - n + 2 * p
    if num_h < 0 or num_w < 0 or num_h % s or num_w % s:
        raise ShapeError(
            f"no representation grid maps to a {out_h}x{out_w} output "
            f"(n={n}, s={s}, p={p})"
        )
    return DictGeometry(num_h // s + 1, num_w // s + 1, out_h, out_w)


def synthesize(D: ConvDictionary, gamma: np.ndarray) -> np.ndarray:
    """Strided transposed convolution of the representation with the atoms.

    gamma has shape (H, W, m); the result has the DictGeometry output shape
    with c channels.  Accumulation happens in float64.
    """
    if gamma.ndim != 3 or gamma.shape[2] != D.atom_count:
        raise ShapeError(
            f"representation needs {D.atom_count} channels, got shape {gamma.shape}"
        )
    h, w = gamma.shape[:2]
    geo = geometry_for_representation(D, h, w)
    n, s, p, c = D.atom_size, D.stride, D.padding, D.out_channels

    # (H, W, n, n, c): the patch each needle contributes.
    contrib = np.tensordot(
        gamma.astype(np.float64), D.atoms.astype(np.float64), axes=([2], [0])
    )
    buf = np.zeros(((h - 1) * s + n, (w - 1) * s + n, c), dtype=np.float64)
    for a in range(n):
        for b in range(n):
            buf[a : a + (h - 1) * s + 1 : s, b : b + (w - 1) * s + 1 : s, :] += (
                contrib[:, :, a, b, :]
            )
    out = buf[p : p + geo.out_height, p : p + geo.out_width, :]
    return np.ascontiguousarray(out, dtype=DTYPE)


def adjoint(D: ConvDictionary, x: np.ndarray) -> np.ndarray:
    """Strided cross-correlation, the exact transpose of synthesize.

    Satisfies inner(synthesize(D, g), x) == inner(g, adjoint(D, x)) up to
    float rounding for every representation g and image x.
    """
    if x.ndim != 3 or x.shape[2] != D.out_channels:
        raise ShapeError(
            f"image needs {D.out_channels} channels, got shape {x.shape}"
        )
    geo = geometry_for_output(D, x.shape[0], x.shape[1])
    h, w = geo.rep_height, geo.rep_width
    n, s, p = D.atom_size, D.stride, D.padding

    pad = np.zeros(((h - 1) * s + n, (w - 1) * s + n, D.out_channels), dtype=np.float64)
    pad[p : p + x.shape[0], p : p + x.shape[1], :] = x
    atoms = D.atoms.astype(np.float64)
    gamma = np.zeros((h, w, D.atom_count), dtype=np.float64)
    for a in range(n):
        for b in range(n):
            patch = pad[a : a + (h - 1) * s + 1 : s, b : b + (w - 1) * s + 1 : s, :]
            gamma += np.tensordot(patch, atoms[:, a, b, :], axes=([2], [1]))
    return np.ascontiguousarray(gamma, dtype=DTYPE)


def normalize_atoms(D: ConvDictionary, rng: Rng | None = None) -> ConvDictionary:
    """Rescale every atom to unit l2 norm.

    Atoms with norm below ZERO_ATOM_NORM are replaced by fresh random unit
    atoms drawn from `rng` (a fixed seed-0 stream when omitted).  Idempotent
    on already-normalized dictionaries.
    """
    atoms = D.atoms.astype(np.float64)
    m = D.atom_count
    norms = np.sqrt(np.sum(atoms.reshape(m, -1) ** 2, axis=1))
    out = np.empty_like(atoms)
    for k in range(m):
        if norms[k] < ZERO_ATOM_NORM:
            if rng is None:
                rng = Rng(0)
            fresh = rng.normal(atoms[k].size).reshape(atoms[k].shape)
            out[k] = fresh / np.sqrt(np.sum(fresh * fresh))
        else:
            out[k] = atoms[k] / norms[k]
    return ConvDictionary(out.astype(DTYPE), D.stride, D.padding)


def random_dictionary(
    m: int, n: int, c: int, stride: int, padding: int, rng: Rng
) -> ConvDictionary:
    """m random unit-norm Gaussian atoms of support n x n x c."""
    atoms = rng.normal(m * n * n * c).reshape(m, n, n, c)
    return normalize_atoms(ConvDictionary(atoms.astype(DTYPE), stride, padding), rng)


def export_atom_grid(D: ConvDictionary, cols: int) -> np.ndarray:
    """Tile all atoms into one image tensor for visual inspection.

    Atoms are laid out in row-major order, each independently affine-rescaled
    to [0, 255] (a constant atom maps to mid-gray 127.5), separated and
    surrounded by 1-pixel zero borders.  Only c in {1, 3} is exportable.
    """
    if D.out_channels not in (1, 3):
        raise DomainError(
            f"atom grids support 1 or 3 channels, got {D.out_channels}"
        )
    if cols < 1:
        raise DomainError(f"cols must be positive, got {cols}")
    m, n, c = D.atom_count, D.atom_size, D.out_channels
    rows = math.ceil(m / cols)
    grid = np.zeros((rows * (n + 1) + 1, cols * (n + 1) + 1, c), dtype=DTYPE)
    for k in range(m):
        r, q = divmod(k, cols)
        atom = D.atoms[k].astype(np.float64)
        lo, hi = atom.min(), atom.max()
        if hi > lo:
            tile = (atom - lo) * (255.0 / (hi - lo))
        else:
            tile = np.full_like(atom, 127.5)
        y, x = 1 + r * (n + 1), 1 + q * (n + 1)
        grid[y : y + n, x : x + n, :] = tile
    return grid
