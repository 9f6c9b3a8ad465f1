"""Sparsification operators and sparsity diagnostics.

Three ways to make a representation sparse: an L1 penalty (applied through
its proximal operator, the soft threshold), a global L0 budget (keep the k
largest-magnitude entries anywhere), and a per-needle budget (keep the k
largest within every 1 x 1 x C fiber).  The per-needle variant bounds how
many atoms can stack on any one spatial location, which the global budget
does not.

All top-k selections break ties toward the lower linear index so repeated
runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError
from .tensor import DTYPE


@dataclass(frozen=True)
class L1Penalty:
    """Penalty weight for the L1 term. lam = 0 disables shrinkage."""

    lam: float

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise DomainError(f"penalty weight must be finite and >= 0, got {self.lam}")


@dataclass(frozen=True)
class L0Global:
    """Global nonzero budget over the whole tensor."""

    k: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"budget must be nonnegative, got {self.k}")


@dataclass(frozen=True)
class L0InfNeedle:
    """Per-needle nonzero budget along the channel axis."""

    k: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"budget must be nonnegative, got {self.k}")


SparsityRule = Union[L1Penalty, L0Global, L0InfNeedle]


@dataclass(frozen=True)
class SparsityReport:
    """Nonzero statistics of one representation tensor."""

    global_nnz_fraction: float
    needle_nnz_map: np.ndarray
    max_needle_nnz: int


def project_l0_global(gamma: np.ndarray, k: int) -> np.ndarray:
    """Euclidean projection onto the set of tensors with <= k nonzeros.

    Keeps the k largest-magnitude entries; a tie goes to the lower linear
    index.  k of zero gives the zero tensor, k >= size copies the input.
    """
    if k < 0:
        raise DomainError(f"budget must be nonnegative, got {k}")
    if k >= gamma.size:
        return gamma.copy()
    out = np.zeros_like(gamma)
    if k == 0:
        return out
    flat = np.ascontiguousarray(gamma).reshape(-1)
    keep = np.argsort(-np.abs(flat), kind="stable")[:k]
    out.reshape(-1)[keep] = flat[keep]
    return out


def project_l0inf_needle(gamma: np.ndarray, k: int) -> np.ndarray:
    """Apply the global projection independently inside every needle.

    Every 1 x 1 x C fiber of the output has at most k nonzeros.  Ties break
    toward the lower channel index.  k >= C copies the input.
    """
    if k < 0:
        raise DomainError(f"budget must be nonnegative, got {k}")
    if gamma.ndim != 3:
        raise DomainError(f"needle projection needs a 3-d tensor, got {gamma.ndim}-d")
    if k >= gamma.shape[2]:
        return gamma.copy()
    out = np.zeros_like(gamma)
    if k == 0:
        return out
    keep = np.argsort(-np.abs(gamma), axis=2, kind="stable")[:, :, :k]
    np.put_along_axis(out, keep, np.take_along_axis(gamma, keep, axis=2), axis=2)
    return out


def soft_threshold(gamma: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of tau * ||.||_1: sign(g) * max(|g| - tau, 0)."""
    if not tau >= 0:
        raise DomainError(f"threshold must be nonnegative, got {tau}")
    g = gamma.astype(np.float64)
    out = np.sign(g) * np.maximum(np.abs(g) - tau, 0.0)
    return out.astype(gamma.dtype if gamma.dtype == np.float64 else DTYPE)


def l1_penalty(gamma: np.ndarray, lam: float) -> float:
    """lam times the sum of absolute entries."""
    if not lam > 0:
        raise DomainError(f"penalty weight must be positive, got {lam}")
    return lam * float(np.sum(np.abs(gamma.astype(np.float64))))


def sparsity_report(gamma: np.ndarray, zero_tol: float = 0.0) -> SparsityReport:
    """Count nonzeros globally and per needle.

    An entry counts as nonzero iff its magnitude exceeds zero_tol.  Use the
    default 0 on projection outputs (their zeros are exact) and a small
    positive tolerance on iterative-solver outputs.
    """
    if not zero_tol >= 0:
        raise DomainError(f"zero tolerance must be nonnegative, got {zero_tol}")
    if gamma.ndim != 3:
        raise DomainError(f"report needs a 3-d tensor, got {gamma.ndim}-d")
    counts = np.sum(np.abs(gamma) > zero_tol, axis=2)
    needle_map = counts.astype(np.float64) / gamma.shape[2]
    return SparsityReport(
        global_nnz_fraction=float(needle_map.mean()),
        needle_nnz_map=needle_map,
        max_needle_nnz=int(counts.max()),
    )


def report_to_csv(report: SparsityReport) -> str:
    """Render a report as row,col,nnz_fraction lines under a stats comment."""
    lines = [
        f"# global_nnz_fraction={report.global_nnz_fraction:.6f}"
        f" max_needle_nnz={report.max_needle_nnz}",
        "row,col,nnz_fraction",
    ]
    h, w = report.needle_nnz_map.shape
    for i in range(h):
        for j in range(w):
            lines.append(f"{i},{j},{report.needle_nnz_map[i, j]:.6f}")
    return "\n".join(lines) + "\n"


def report_heat_image(report: SparsityReport) -> np.ndarray:
    """Per-needle fractions scaled to [0, 255] as an H x W x 1 tensor."""
    return (report.needle_nnz_map[:, :, None] * 255.0).astype(DTYPE)
