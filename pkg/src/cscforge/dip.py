"""Denoising by sparse coding a single noisy image, deep-image-prior style.

The protocol: corrupt a clean image with AWGN, fit sparse coefficients (and
optionally the dictionary itself) to the noisy image alone, and track two
candidate outputs per iteration -- the raw reconstruction ("single") and an
exponential moving average over past reconstructions ("average").  Early
iterates explain the signal before the noise, so the best output along the
trajectory beats the noisy input.  Selection is oracle-best: the iterate
with the highest PSNR against the clean image wins.  Published DIP numbers
for U-Net generators are architecture-specific and are not comparison
targets here.

Everything is deterministic given the config seed: the noise stream is the
first child of Rng(seed), so external callers can re-derive it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dictionary import (
    ConvDictionary,
    adjoint,
    geometry_for_output,
    normalize_atoms,
    random_dictionary,
    synthesize,
)
from .errors import DivergenceError, DomainError
from .pursuit import PursuitConfig, PursuitTrace, estimate_lipschitz, ista, iht
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
from .tensor import DTYPE, add_awgn, psnr


@dataclass(frozen=True)
class DenoiseConfig:
    """Settings for one denoising run.

    sigma is the AWGN standard deviation on the 0-255 scale.  iters bounds
    the pursuit. ema_decay weights the sliding average (must sit strictly
    inside (0,1)).  step_size None lets the solver pick its own.
    """

    sigma: float
    rule: SparsityRule
    iters: int
    ema_decay: float = 0.99
    seed: int = 0
    step_size: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.iters < 1:
            raise DomainError(f"iters must be positive, got {self.iters}")
        if not 0.0 < self.ema_decay < 1.0:
            raise DomainError(
                f"ema_decay must lie strictly in (0,1), got {self.ema_decay}"
            )


@dataclass(frozen=True)
class BestShot:
    """The trajectory point with the highest PSNR, and its image."""

    iteration: int
    psnr: float
    image: np.ndarray


@dataclass(frozen=True)
class DenoiseRun:
    """Full per-iteration PSNR traces plus the oracle-best outputs."""

    psnr_single_trace: tuple
    psnr_avg_trace: tuple
    best_single: BestShot
    best_average: BestShot
    noisy: np.ndarray
    noisy_psnr: float
    pursuit: PursuitTrace


def denoise(clean: np.ndarray, cfg: DenoiseConfig, D: ConvDictionary) -> DenoiseRun:
    """Corrupt `clean`, sparse-code the noisy image, track both outputs.

    The noisy image is x0 = clean + AWGN(sigma) drawn from the first child
    of Rng(cfg.seed).  A penalty rule runs ista, a budget rule runs iht.
    After iteration t the reconstruction xhat_t = synthesize(D, gamma_t) and
    the average xavg_t = decay*xavg_{t-1} + (1-decay)*xhat_t are both scored
    against `clean`; the average starts from the zero reconstruction of the
    zero initializer.  PSNR selection against the clean image makes this an
    oracle-best protocol, not a blind stopping rule.
    """
    noise_rng = Rng(cfg.seed).split()
    x0 = add_awgn(clean, cfg.sigma, noise_rng)
    solver = ista if isinstance(cfg.rule, L1Penalty) else iht
    pcfg = PursuitConfig(
        rule=cfg.rule, max_iters=cfg.iters, step_size=cfg.step_size
    )

    ema = np.zeros(clean.shape, dtype=np.float64)
    singles: list = []
    avgs: list = []
    best: dict = {"single": None, "average": None}

    def record(kind: str, t: int, value: float, image: np.ndarray):
        held = best[kind]
        if held is None or value > held.psnr:
            best[kind] = BestShot(t, value, image.copy())

    def on_iter(t: int, gamma: np.ndarray):
        xhat = synthesize(D, gamma.astype(DTYPE))
        nonlocal ema
        ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * xhat.astype(np.float64)
        avg_img = ema.astype(DTYPE)
        p_single = psnr(clean, xhat)
        p_avg = psnr(clean, avg_img)
        singles.append(p_single)
        avgs.append(p_avg)
        record("single", t, p_single, xhat)
        record("average", t, p_avg, avg_img)

    trace = solver(D, x0, pcfg, callback=on_iter)
    return DenoiseRun(
        psnr_single_trace=tuple(singles),
        psnr_avg_trace=tuple(avgs),
        best_single=best["single"],
        best_average=best["average"],
        noisy=x0,
        noisy_psnr=psnr(clean, x0),
        pursuit=trace,
    )


def _apply_rule(rule: SparsityRule, z: np.ndarray, step: float) -> np.ndarray:
    if isinstance(rule, L0Global):
        return project_l0_global(z, rule.k)
    if isinstance(rule, L0InfNeedle):
        return project_l0inf_needle(z, rule.k)
    return soft_threshold(z, step * rule.lam)


def _fit(D: ConvDictionary, gamma: np.ndarray, x64: np.ndarray) -> float:
    r = synthesize(D, gamma.astype(DTYPE)).astype(np.float64) - x64
    return 0.5 * float(np.sum(r * r))


def _atom_gradient(
    D: ConvDictionary, gamma: np.ndarray, residual: np.ndarray
) -> np.ndarray:
    """Gradient of the fit objective with respect to the atom array."""
    h, w = gamma.shape[:2]
    n, s, p, c = D.atom_size, D.stride, D.padding, D.out_channels
    buf = np.zeros(((h - 1) * s + n, (w - 1) * s + n, c), dtype=np.float64)
    buf[p : p + residual.shape[0], p : p + residual.shape[1], :] = residual
    grad = np.empty((D.atom_count, n, n, c), dtype=np.float64)
    for a in range(n):
        for b in range(n):
            patch = buf[a : a + (h - 1) * s + 1 : s, b : b + (w - 1) * s + 1 : s, :]
            grad[:, a, b, :] = np.tensordot(gamma, patch, axes=([0, 1], [0, 1]))
    return grad


def learn_dictionary(
    x0: np.ndarray,
    m: int,
    n: int,
    rule: SparsityRule,
    epochs: int = 10,
    learn_rate: float = 0.5,
    sc_iters: int = 20,
    rng: Optional[Rng] = None,
) -> ConvDictionary:
    """Fit m unit-norm n x n atoms to one image by alternating minimization.

    Starts from random unit atoms (stride 1, padding (n-1)//2).  Each epoch
    runs sc_iters warm-started sparse-coding steps under `rule`, then one
    gradient step on the atoms followed by renormalization.  The atom step
    backtracks: if the post-normalization fit exceeds the pre-step fit by
    more than 1e-5 the rate is halved (at most 10 times per epoch) and the
    step is retried; an exhausted epoch keeps the previous atoms.  epochs=0
    returns the seeded initialization untouched.
    """
    if m < 1 or n < 1:
        raise DomainError(f"need positive atom count and size, got m={m}, n={n}")
    if epochs < 0:
        raise DomainError(f"epochs must be nonnegative, got {epochs}")
    if not (math.isfinite(learn_rate) and learn_rate > 0):
        raise DomainError(f"learn_rate must be positive, got {learn_rate}")
    if sc_iters < 1:
        raise DomainError(f"sc_iters must be positive, got {sc_iters}")
    if rng is None:
        rng = Rng(0)

    padding = (n - 1) // 2
    D = random_dictionary(m, n, x0.shape[2], 1, padding, rng)
    geo = geometry_for_output(D, x0.shape[0], x0.shape[1])
    if isinstance(rule, L0InfNeedle) and rule.k > m:
        raise DomainError(f"needle budget {rule.k} exceeds the {m} atoms")
    if isinstance(rule, L0Global) and rule.k > geo.rep_height * geo.rep_width * m:
        raise DomainError(
            f"global budget {rule.k} exceeds the representation capacity"
        )
    if epochs == 0:
        return D

    x64 = x0.astype(np.float64)
    gamma = np.zeros((geo.rep_height, geo.rep_width, m), dtype=np.float64)
    lr = learn_rate
    for epoch in range(1, epochs + 1):
        lip = estimate_lipschitz(D, (geo.rep_height, geo.rep_width), 20)
        step = 0.99 / lip if lip > 1e-30 else 1.0
        for _ in range(sc_iters):
            residual = synthesize(D, gamma.astype(DTYPE)).astype(np.float64) - x64
            grad = adjoint(D, residual.astype(DTYPE)).astype(np.float64)
            gamma = _apply_rule(rule, gamma - step * grad, step)
        fit_pre = _fit(D, gamma, x64)
        if not math.isfinite(fit_pre):
            raise DivergenceError(epoch, "reconstruction objective became non-finite")

        residual = synthesize(D, gamma.astype(DTYPE)).astype(np.float64) - x64
        atom_grad = _atom_gradient(D, gamma, residual)
        atoms = D.atoms.astype(np.float64)
        halvings = 0
        while True:
            cand = normalize_atoms(
                ConvDictionary((atoms - lr * atom_grad).astype(DTYPE), 1, padding)
            )
            if _fit(cand, gamma, x64) <= fit_pre + 1e-5:
                D = cand
                break
            if halvings == 10:
                break
            lr *= 0.5
            halvings += 1
    return D


def _zigzag(n: int):
    """(u, v) frequency pairs of an n x n grid in zigzag scan order."""
    pairs = []
    for s in range(2 * n - 1):
        rows = range(min(s, n - 1), max(0, s - n + 1) - 1, -1)
        if s % 2:
            rows = reversed(list(rows))
        for u in rows:
            pairs.append((u, s - u))
    return pairs


def dct_dictionary(m: int, n: int) -> ConvDictionary:
    """First m separable cosine atoms on an n x n grid, unit-normalized.

    Atom (u, v) has entries cos(pi*(2i+1)*u/(2n)) * cos(pi*(2j+1)*v/(2n)),
    taken in zigzag frequency order so low frequencies come first; the DC
    atom is the constant 1/n.  Single channel, stride 1, padding (n-1)//2.
    """
    if m < 1 or n < 1:
        raise DomainError(f"need positive atom count and size, got m={m}, n={n}")
    if m > n * n:
        raise DomainError(f"an {n}x{n} grid offers {n * n} atoms, {m} requested")
    i = np.arange(n, dtype=np.float64)
    basis = {
        u: np.cos(np.pi * (2 * i + 1) * u / (2 * n)) for u in range(n)
    }
    atoms = np.empty((m, n, n, 1), dtype=np.float64)
    for k, (u, v) in enumerate(_zigzag(n)[:m]):
        atom = np.outer(basis[u], basis[v])
        atoms[k, :, :, 0] = atom / np.linalg.norm(atom)
    return ConvDictionary(atoms.astype(DTYPE), 1, (n - 1) // 2)
