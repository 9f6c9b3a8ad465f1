"""Multi-layer cascade model: stacked dictionaries with per-layer rules.

Layer 1 synthesizes the image and layer L consumes the deepest code:

    x = synthesize(D_1, gamma_1),   gamma_{i-1} = synthesize(D_i, gamma_i).

Note the indexing: D_1 is nearest the image.  Generator-style writeups often
number layers the other way around.

The whole cascade D_1..D_i collapses into one flat dictionary whose atoms
are the cascade's impulse responses; those atoms are deliberately left
unnormalized so the flat path reproduces the cascade bit-for-bit in exact
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dictionary import ConvDictionary, synthesize
from .errors import CascadeGeometryError, DomainError, GeometryError, ShapeError
from .rng import Rng
from .sparsify import (
    L0Global,
    L0InfNeedle,
    L1Penalty,
    SparsityRule,
    sparsity_report,
)
from .tensor import DTYPE


@dataclass(frozen=True)
class MlCscModel:
    """Ordered (dictionary, rule) pairs, layer 1 first."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise CascadeGeometryError(1, "a cascade needs at least one layer")
        for i, (D, rule) in enumerate(layers, start=1):
            if not isinstance(D, ConvDictionary):
                raise CascadeGeometryError(i, "first element must be a ConvDictionary")
            if not isinstance(rule, (L1Penalty, L0Global, L0InfNeedle)):
                raise CascadeGeometryError(i, "second element must be a SparsityRule")
            if i >= 2:
                prev = layers[i - 2][0]
                if D.out_channels != prev.atom_count:
                    raise CascadeGeometryError(
                        i,
                        f"synthesizes {D.out_channels} channels but layer {i - 1} "
                        f"has {prev.atom_count} atoms",
                    )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def dictionary(self, i: int) -> ConvDictionary:
        """Layer i's dictionary, 1-based."""
        return self.layers[i - 1][0]

    def rule(self, i: int) -> SparsityRule:
        """Layer i's sparsity rule, 1-based."""
        return self.layers[i - 1][1]


@dataclass(frozen=True)
class SparseSample:
    """A random representation with an exactly known support."""

    gamma: np.ndarray
    support_size: int
    rng_seed: int


@dataclass(frozen=True)
class LayerCheck:
    """Measured sparsity and chain consistency for one layer.

    sparsity_ok is None under an L1 rule (a penalty sets no budget, so the
    l1 mass is reported without a verdict).  consistency_ok is None for the
    deepest layer, which has no successor to check against.
    """

    layer: int
    rule: SparsityRule
    sparsity_value: float
    sparsity_ok: Optional[bool]
    consistency_rel: Optional[float]
    consistency_ok: Optional[bool]


@dataclass(frozen=True)
class CascadeReport:
    """Per-layer checks plus two verdicts.

    consistency_passed covers only the chain checks (these hold by
    construction for synthesized cascades); passed also requires every
    budgeted layer to satisfy its rule, which intermediates of an exact
    synthesis generally do not.
    """

    checks: tuple
    passed: bool
    consistency_passed: bool


def cascade_representations(model: MlCscModel, gamma_deep: np.ndarray) -> list:
    """All representations [gamma_1, ..., gamma_L] implied by the deepest one."""
    gammas = [np.asarray(gamma_deep, dtype=DTYPE)]
    for i in range(model.depth, 1, -1):
        gammas.append(synthesize(model.dictionary(i), gammas[-1]))
    gammas.reverse()
    return gammas


def synthesize_cascade(model: MlCscModel, gamma_deep: np.ndarray) -> np.ndarray:
    """Run the full cascade down to the image."""
    gamma_1 = cascade_representations(model, gamma_deep)[0]
    return synthesize(model.dictionary(1), gamma_1)


def effective_dictionary(model: MlCscModel, depth: int) -> ConvDictionary:
    """Collapse layers 1..depth into one flat dictionary.

    Atom k is the impulse response of the cascade to a unit needle in
    channel k.  Support grows by (n_i - 1) * s_1*...*s_{i-1} per layer, the
    stride is the product of strides, and the crop padding is layer 1's.
    Layers past the first must use padding 0: an interior crop cuts border
    responses differently at different needle positions, so no flat
    dictionary can reproduce the cascade.  Atoms are not renormalized.
    """
    if depth < 1 or depth > model.depth:
        raise DomainError(f"depth must be in 1..{model.depth}, got {depth}")
    if depth == 1:
        return model.dictionary(1)
    for i in range(2, depth + 1):
        if model.dictionary(i).padding != 0:
            raise GeometryError(
                f"layer {i} has padding {model.dictionary(i).padding}; collapsing "
                "requires padding 0 on every layer past the first"
            )

    # Uncropped impulse responses: re-run layer 1 with padding 0 and apply
    # its crop as the flat dictionary's own padding instead.
    d1 = model.dictionary(1)
    inner = [ConvDictionary(d1.atoms, d1.stride, 0)]
    inner += [model.dictionary(i) for i in range(2, depth + 1)]
    m = inner[-1].atom_count

    atoms = []
    for k in range(m):
        gamma = np.zeros((1, 1, m), dtype=DTYPE)
        gamma[0, 0, k] = 1.0
        for D in reversed(inner):
            gamma = synthesize(D, gamma)
        atoms.append(gamma)
    stride = math.prod(D.stride for D in inner)
    return ConvDictionary(np.stack(atoms), stride, d1.padding)


def validate_cascade(
    model: MlCscModel, gammas: list, zero_tol: float = 0.0
) -> CascadeReport:
    """Check every layer's sparsity rule and the chain consistency.

    gammas is [gamma_1, ..., gamma_L].  Layer i's check also records how far
    gamma_i sits from synthesize(D_{i+1}, gamma_{i+1}), as a norm ratio that
    must stay within 1e-4.  Nonzeros are counted with |entry| > zero_tol;
    keep the default 0 for projection outputs, use a small tolerance for
    iterative-solver outputs.
    """
    if len(gammas) != model.depth:
        raise ShapeError(
            f"expected {model.depth} representations, got {len(gammas)}"
        )
    checks = []
    all_ok = True
    chain_ok = True
    for i in range(1, model.depth + 1):
        gamma = gammas[i - 1]
        rule = model.rule(i)
        report = sparsity_report(gamma, zero_tol)
        if isinstance(rule, L0Global):
            value = float(np.sum(np.abs(gamma) > zero_tol))
            ok = value <= rule.k
        elif isinstance(rule, L0InfNeedle):
            value = float(report.max_needle_nnz)
            ok = value <= rule.k
        else:
            value = float(np.sum(np.abs(gamma.astype(np.float64))))
            ok = None
        rel = None
        cons_ok = None
        if i < model.depth:
            resynth = synthesize(model.dictionary(i + 1), gammas[i])
            if resynth.shape != gamma.shape:
                raise ShapeError(
                    f"layer {i} has shape {gamma.shape} but layer {i + 1} "
                    f"synthesizes {resynth.shape}"
                )
            diff = np.linalg.norm(
                gamma.astype(np.float64) - resynth.astype(np.float64)
            )
            rel = float(diff / (1.0 + np.linalg.norm(gamma.astype(np.float64))))
            cons_ok = rel <= 1e-4
        if ok is False or cons_ok is False:
            all_ok = False
        if cons_ok is False:
            chain_ok = False
        checks.append(LayerCheck(i, rule, value, ok, rel, cons_ok))
    return CascadeReport(tuple(checks), all_ok, chain_ok)


def sample_sparse(shape, rule: SparsityRule, rng: Rng) -> SparseSample:
    """Draw a random representation that satisfies a projection rule exactly.

    The support is uniform without replacement (global, or exactly k per
    needle), values on it are standard Gaussian, and a drawn value that is
    exactly 0.0 is replaced by 1.0 so the support size is exact.  Both the
    support and the values come from `rng`, so a fixed seed fixes the sample.
    """
    h, w, c = (int(d) for d in shape)
    if min(h, w, c) < 1:
        raise ShapeError(f"sample dims must be positive, got {(h, w, c)}")
    seed = rng.seed
    if isinstance(rule, L1Penalty):
        raise DomainError("a penalty rule sets no support budget to sample")
    if isinstance(rule, L0Global):
        total = h * w * c
        if rule.k > total:
            raise DomainError(
                f"budget {rule.k} exceeds the {total} entries available"
            )
        gamma = np.zeros(total, dtype=DTYPE)
        if rule.k:
            support = rng.choose(total, rule.k)
            gamma[support] = _nonzero_normal(rng, rule.k)
        return SparseSample(gamma.reshape(h, w, c), rule.k, seed)
    if rule.k > c:
        raise DomainError(f"budget {rule.k} exceeds the {c} channels per needle")
    gamma = np.zeros((h, w, c), dtype=DTYPE)
    if rule.k:
        for i in range(h):
            for j in range(w):
                support = rng.choose(c, rule.k)
                gamma[i, j, support] = _nonzero_normal(rng, rule.k)
    return SparseSample(gamma, rule.k * h * w, seed)


def _nonzero_normal(rng: Rng, count: int) -> np.ndarray:
    values = rng.normal(count)
    values[values == 0.0] = 1.0
    return values.astype(DTYPE)
