"""Sparse coding solvers.

ISTA minimizes F(g) = 0.5*||Dg - x||^2 + lam*||g||_1 by proximal gradient
steps; IHT runs projected gradient under an L0-type budget; the layered
encoder threshold-decodes a cascade in one top-down pass.  All solvers start
from the zero representation and, when the step size is left on auto, use
0.99 / estimate_lipschitz so a single gradient step never expands.

Objectives are accumulated in float64.  Each iterate of a constrained solver
satisfies its budget exactly: the projection runs after every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dictionary import ConvDictionary, adjoint, geometry_for_output, synthesize
from .errors import (
    CascadeGeometryError,
    DivergenceError,
    DomainError,
    GeometryError,
    ShapeError,
)
from .mlcsc import MlCscModel
from .rng import Rng
from .sparsify import (
    L0Global,
    L0InfNeedle,
    L1Penalty,
    SparsityRule,
    project_l0_global,
    project_l0inf_needle,
    soft_threshold,
)
from .tensor import DTYPE

# Fixed stream for the auto-step power iteration: the step size must not
# depend on (or consume from) the caller's randomness.
_POWER_SEED = 0x5E11A


@dataclass(frozen=True)
class PursuitConfig:
    """Solver settings. step_size None means auto (0.99 / Lipschitz)."""

    rule: SparsityRule
    max_iters: int = 100
    step_size: Optional[float] = None
    objective_tol: float = 0.0
    power_iters: int = 50

    def __post_init__(self):
        if not isinstance(self.rule, (L1Penalty, L0Global, L0InfNeedle)):
            raise DomainError("rule must be a SparsityRule variant")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be positive, got {self.max_iters}")
        if self.step_size is not None and not (
            math.isfinite(self.step_size) and self.step_size > 0
        ):
            raise DomainError(f"step_size must be positive, got {self.step_size}")
        if not self.objective_tol >= 0:
            raise DomainError(
                f"objective_tol must be nonnegative, got {self.objective_tol}"
            )
        if self.power_iters < 1:
            raise DomainError(f"power_iters must be positive, got {self.power_iters}")


@dataclass(frozen=True)
class PursuitTrace:
    """Objective history (index 0 is the zero initializer) and final iterate."""

    objectives: tuple
    gamma: np.ndarray
    iterations_run: int
    stop_reason: str
    step_size: float


def estimate_lipschitz(
    D: ConvDictionary, shape, iters: int = 50, rng: Optional[Rng] = None
) -> float:
    """Largest eigenvalue of the normal operator g -> adjoint(D, synthesize(D, g)).

    Power iteration from a random start on the given representation grid.
    The estimate upper-bounds nothing by itself; solvers divide a 0.99
    safety factor by it.
    """
    if iters < 1:
        raise DomainError(f"iters must be positive, got {iters}")
    h, w = (int(d) for d in shape)
    if h < 1 or w < 1:
        raise GeometryError(f"representation dims must be positive, got {h}x{w}")
    n, p = D.atom_size, D.padding
    if (h - 1) * D.stride + n - 2 * p < 1:
        raise GeometryError("representation grid yields a non-positive output")
    if rng is None:
        rng = Rng(_POWER_SEED)
    v = rng.normal(h * w * D.atom_count).reshape(h, w, D.atom_count)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        av = adjoint(D, synthesize(D, v.astype(DTYPE))).astype(np.float64)
        lam = float(np.linalg.norm(av))
        if lam < 1e-30:
            return 0.0
        v = av / lam
    return lam


def _resolve_step(D: ConvDictionary, rep_shape, cfg: PursuitConfig) -> float:
    if cfg.step_size is not None:
        return cfg.step_size
    lam = estimate_lipschitz(D, rep_shape, cfg.power_iters)
    if lam < 1e-30:
        return 1.0
    return 0.99 / lam


def _fit_objective(D: ConvDictionary, gamma: np.ndarray, x64: np.ndarray) -> float:
    r = synthesize(D, gamma.astype(DTYPE)).astype(np.float64) - x64
    return 0.5 * float(np.sum(r * r))


def _run_solver(
    D: ConvDictionary,
    x: np.ndarray,
    cfg: PursuitConfig,
    update,
    penalty,
    callback: Optional[Callable[[int, np.ndarray], None]],
) -> PursuitTrace:
    geo = geometry_for_output(D, x.shape[0], x.shape[1])
    if x.shape[2] != D.out_channels:
        raise ShapeError(f"signal needs {D.out_channels} channels, got {x.shape[2]}")
    step = _resolve_step(D, (geo.rep_height, geo.rep_width), cfg)
    x64 = x.astype(np.float64)
    gamma = np.zeros((geo.rep_height, geo.rep_width, D.atom_count), dtype=np.float64)
    objectives = [_fit_objective(D, gamma, x64) + penalty(gamma)]
    stop = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        residual = synthesize(D, gamma.astype(DTYPE)).astype(np.float64) - x64
        grad = adjoint(D, residual.astype(DTYPE)).astype(np.float64)
        gamma = update(gamma - step * grad, step)
        value = _fit_objective(D, gamma, x64) + penalty(gamma)
        objectives.append(value)
        if not math.isfinite(value):
            trace = PursuitTrace(
                tuple(objectives), gamma.astype(DTYPE), it, "divergence", step
            )
            raise DivergenceError(it, "objective became non-finite", trace)
        if callback is not None:
            callback(it, gamma)
        if objectives[-2] - objectives[-1] < cfg.objective_tol:
            stop = "objective_tol"
            break
    return PursuitTrace(tuple(objectives), gamma.astype(DTYPE), it, stop, step)


def ista(
    D: ConvDictionary,
    x: np.ndarray,
    cfg: PursuitConfig,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> PursuitTrace:
    """Proximal gradient descent on 0.5*||Dg - x||^2 + lam*||g||_1.

    With a step no larger than 1/Lipschitz the recorded objective sequence
    never increases.  The optional callback sees (iteration, iterate) after
    every step; the iterate must be treated as read-only.
    """
    if not isinstance(cfg.rule, L1Penalty):
        raise DomainError("ista needs an L1Penalty rule")
    lam = cfg.rule.lam

    def update(z, step):
        return soft_threshold(z, step * lam)

    def penalty(gamma):
        return lam * float(np.sum(np.abs(gamma)))

    return _run_solver(D, x, cfg, update, penalty, callback)


def iht(
    D: ConvDictionary,
    x: np.ndarray,
    cfg: PursuitConfig,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> PursuitTrace:
    """Projected gradient descent on 0.5*||Dg - x||^2 under an L0 budget.

    Every iterate (and the final gamma) satisfies the configured budget
    exactly because the projection runs after each gradient step.
    """
    if isinstance(cfg.rule, L0Global):
        project = lambda z: project_l0_global(z, cfg.rule.k)
    elif isinstance(cfg.rule, L0InfNeedle):
        project = lambda z: project_l0inf_needle(z, cfg.rule.k)
    else:
        raise DomainError("iht needs an L0Global or L0InfNeedle rule")

    def update(z, step):
        return project(z)

    return _run_solver(D, x, cfg, update, lambda gamma: 0.0, callback)


def layered_thresholding(model: MlCscModel, x: np.ndarray) -> list:
    """One-pass top-down encoder: threshold each layer's adjoint.

    gamma_1 = P_1(adjoint(D_1, x)), gamma_i = P_i(adjoint(D_i, gamma_{i-1})),
    where P_i is layer i's projection, or a single soft threshold at the
    penalty weight for an L1 rule.  Returns [gamma_1, ..., gamma_L].
    """
    gammas = []
    current = x
    for i in range(1, model.depth + 1):
        D, rule = model.dictionary(i), model.rule(i)
        try:
            z = adjoint(D, current)
        except (ShapeError, GeometryError) as exc:
            raise CascadeGeometryError(i, str(exc)) from exc
        if isinstance(rule, L0Global):
            current = project_l0_global(z, rule.k)
        elif isinstance(rule, L0InfNeedle):
            current = project_l0inf_needle(z, rule.k)
        else:
            current = soft_threshold(z, rule.lam)
        gammas.append(current)
    return gammas


def trace_to_csv(trace: PursuitTrace, meta: Optional[dict] = None) -> str:
    """Render iter,objective lines under one JSON comment line of metadata."""
    head = dict(meta or {})
    head.update(
        {
            "iterations_run": trace.iterations_run,
            "stop_reason": trace.stop_reason,
            "step_size": trace.step_size,
        }
    )
    lines = ["#" + json.dumps(head, sort_keys=True), "iter,objective"]
    for i, value in enumerate(trace.objectives):
        lines.append(f"{i},{value!r}")
    return "\n".join(lines) + "\n"
