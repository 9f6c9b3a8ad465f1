"""Denoising protocol, dictionary learning, and cosine dictionary tests."""

import math

import numpy as np
import pytest

from cscforge import (
    ConvDictionary,
    DenoiseConfig,
    DomainError,
    L0Global,
    L0InfNeedle,
    L1Penalty,
    PursuitConfig,
    Rng,
    add_awgn,
    dct_dictionary,
    denoise,
    iht,
    learn_dictionary,
    psnr,
    random_dictionary,
    synthesize,
)
from cscforge.dip import _atom_gradient


def checkerboard(h: int, w: int, cell: int = 4) -> np.ndarray:
    """Piecewise-constant test image on the 0-255 scale."""
    rows = (np.arange(h) // cell)[:, None]
    cols = (np.arange(w) // cell)[None, :]
    return (255.0 * ((rows + cols) % 2)).astype(np.float32)[:, :, None]


def orthonormal_patch_dictionary() -> ConvDictionary:
    atoms = 0.5 * np.array(
        [
            [[1, 1], [1, 1]],
            [[1, -1], [1, -1]],
            [[1, 1], [-1, -1]],
            [[1, -1], [-1, 1]],
        ],
        np.float32,
    )
    return ConvDictionary(atoms[:, :, :, None], stride=2, padding=0)


def test_config_validation():
    rule = L0InfNeedle(2)
    with pytest.raises(DomainError):
        DenoiseConfig(sigma=0.0, rule=rule, iters=10)
    with pytest.raises(DomainError):
        DenoiseConfig(sigma=math.nan, rule=rule, iters=10)
    with pytest.raises(DomainError):
        DenoiseConfig(sigma=25.0, rule=rule, iters=0)
    with pytest.raises(DomainError):
        DenoiseConfig(sigma=25.0, rule=rule, iters=10, ema_decay=1.0)
    with pytest.raises(DomainError):
        DenoiseConfig(sigma=25.0, rule=rule, iters=10, ema_decay=0.0)
    cfg = DenoiseConfig(sigma=25.0, rule=rule, iters=10)
    assert cfg.ema_decay == 0.99 and cfg.seed == 0 and cfg.step_size is None


def test_noisy_image_is_rederivable_from_the_seed():
    clean = checkerboard(16, 16)
    cfg = DenoiseConfig(sigma=25.0, rule=L0InfNeedle(1), iters=2, seed=9)
    run = denoise(clean, cfg, dct_dictionary(9, 3))
    assert np.array_equal(run.noisy, add_awgn(clean, 25.0, Rng(9).split()))
    assert run.noisy_psnr == psnr(clean, run.noisy)
    # sigma 25 against the 255 range sits near 20.17 dB
    assert abs(run.noisy_psnr - 20.172) < 1.5


def test_denoise_is_deterministic():
    clean = checkerboard(16, 16)
    cfg = DenoiseConfig(sigma=25.0, rule=L0InfNeedle(2), iters=8, seed=4)
    D = dct_dictionary(9, 3)
    a, b = denoise(clean, cfg, D), denoise(clean, cfg, D)
    assert np.array_equal(a.noisy, b.noisy)
    assert a.psnr_single_trace == b.psnr_single_trace
    assert a.psnr_avg_trace == b.psnr_avg_trace
    assert np.array_equal(a.best_average.image, b.best_average.image)
    assert a.best_single.iteration == b.best_single.iteration


def test_near_zero_noise_reconstructs_the_input():
    # orthonormal patch basis and unit step: one iteration is an exact fit,
    # so at sigma 1e-6 the best output matches the clean image to > 60 dB
    clean = checkerboard(16, 16)
    cfg = DenoiseConfig(
        sigma=1e-6, rule=L0InfNeedle(4), iters=3, seed=1, step_size=1.0
    )
    run = denoise(clean, cfg, orthonormal_patch_dictionary())
    assert run.best_single.psnr > 60.0
    assert run.best_average.psnr < run.best_single.psnr  # EMA still warming up


def test_zero_budget_run_is_the_ema_fixed_point():
    clean = checkerboard(8, 8)
    cfg = DenoiseConfig(sigma=10.0, rule=L0Global(0), iters=5, seed=2)
    run = denoise(clean, cfg, orthonormal_patch_dictionary())
    zero_psnr = psnr(clean, np.zeros_like(clean))
    assert run.psnr_single_trace == (zero_psnr,) * 5
    assert run.psnr_avg_trace == (zero_psnr,) * 5
    # ties keep the earliest iterate
    assert run.best_single.iteration == 1
    assert run.best_average.iteration == 1
    assert not np.any(run.best_average.image)


def test_trace_and_best_shot_invariants():
    clean = checkerboard(16, 16)
    cfg = DenoiseConfig(sigma=25.0, rule=L0InfNeedle(3), iters=12, seed=7)
    run = denoise(clean, cfg, dct_dictionary(16, 4))
    n = run.pursuit.iterations_run
    assert len(run.psnr_single_trace) == n
    assert len(run.psnr_avg_trace) == n
    assert run.best_single.psnr == max(run.psnr_single_trace)
    assert run.best_average.psnr == max(run.psnr_avg_trace)
    first = int(np.argmax(run.psnr_single_trace)) + 1
    assert run.best_single.iteration == first
    assert psnr(clean, run.best_single.image) == run.best_single.psnr
    assert psnr(clean, run.best_average.image) == run.best_average.psnr


def test_average_trace_replays_from_the_parts():
    # the run must equal: derive x0, run the same solver, fold an EMA over
    # the per-iteration reconstructions
    clean = checkerboard(24, 24)
    D = dct_dictionary(16, 4)
    cfg = DenoiseConfig(sigma=25.0, rule=L0InfNeedle(3), iters=10, seed=9)
    run = denoise(clean, cfg, D)

    x0 = add_awgn(clean, 25.0, Rng(9).split())
    ema = np.zeros(clean.shape, np.float64)
    avgs, lo, hi = [], [], []
    history_min = np.zeros(clean.shape, np.float64)
    history_max = np.zeros(clean.shape, np.float64)

    def fold(t, gamma):
        nonlocal ema
        xhat = synthesize(D, gamma.astype(np.float32)).astype(np.float64)
        np.minimum(history_min, xhat, out=history_min)
        np.maximum(history_max, xhat, out=history_max)
        ema = 0.99 * ema + 0.01 * xhat
        avgs.append(psnr(clean, ema.astype(np.float32)))
        lo.append(history_min.copy())
        hi.append(history_max.copy())
        assert np.all(ema >= history_min - 1e-9)
        assert np.all(ema <= history_max + 1e-9)

    iht(D, x0, PursuitConfig(L0InfNeedle(3), max_iters=10), callback=fold)
    assert tuple(avgs) == run.psnr_avg_trace


def test_denoise_runs_ista_for_penalty_rules():
    clean = checkerboard(16, 16)
    cfg = DenoiseConfig(sigma=25.0, rule=L1Penalty(5.0), iters=6, seed=3)
    run = denoise(clean, cfg, dct_dictionary(9, 3))
    assert run.pursuit.iterations_run == 6
    # the l1 penalty contributes to the recorded objective
    assert run.pursuit.objectives[-1] > 0.0


def test_atom_gradient_matches_finite_differences():
    rng = Rng(21)
    m, n, c, s, p = 3, 3, 2, 2, 1
    atoms64 = rng.normal(m * n * n * c).reshape(m, n, n, c)
    D = ConvDictionary(atoms64.astype(np.float32), s, p)
    atoms64 = D.atoms.astype(np.float64)
    h, w = 4, 5
    gamma = rng.normal(h * w * m).reshape(h, w, m)
    out_h, out_w = (h - 1) * s + n - 2 * p, (w - 1) * s + n - 2 * p
    x = rng.normal(out_h * out_w * c).reshape(out_h, out_w, c)

    def fit64(a):
        out = np.zeros((out_h, out_w, c))
        for i in range(h):
            for j in range(w):
                for k in range(m):
                    for da in range(n):
                        y = i * s - p + da
                        if not 0 <= y < out_h:
                            continue
                        for db in range(n):
                            xx = j * s - p + db
                            if 0 <= xx < out_w:
                                out[y, xx, :] += gamma[i, j, k] * a[k, da, db, :]
        r = out - x
        return 0.5 * float(np.sum(r * r))

    base = fit64(atoms64)
    assert base > 0
    residual = np.zeros((out_h, out_w, c))
    for i in range(h):
        for j in range(w):
            for k in range(m):
                for da in range(n):
                    y = i * s - p + da
                    if not 0 <= y < out_h:
                        continue
                    for db in range(n):
                        xx = j * s - p + db
                        if 0 <= xx < out_w:
                            residual[y, xx, :] += gamma[i, j, k] * atoms64[k, da, db, :]
    residual -= x
    grad = _atom_gradient(D, gamma, residual)
    eps = 1e-5
    for _ in range(8):
        k, da, db, ch = (int(rng.uniform(1)[0] * d) for d in (m, n, n, c))
        ap, am = atoms64.copy(), atoms64.copy()
        ap[k, da, db, ch] += eps
        am[k, da, db, ch] -= eps
        fd = (fit64(ap) - fit64(am)) / (2 * eps)
        assert abs(fd - grad[k, da, db, ch]) < 1e-6


def test_learn_zero_epochs_returns_the_seeded_init():
    x0 = checkerboard(12, 12)
    rng = Rng(31)
    D = learn_dictionary(x0, 4, 5, L0InfNeedle(1), epochs=0, rng=rng)
    want = random_dictionary(4, 5, 1, 1, 2, Rng(31))
    assert np.array_equal(D.atoms, want.atoms)
    assert D.stride == 1 and D.padding == 2


def test_learn_is_deterministic_and_unit_norm():
    x0 = checkerboard(12, 12)
    a = learn_dictionary(x0, 3, 5, L0InfNeedle(1), epochs=3, rng=Rng(5))
    b = learn_dictionary(x0, 3, 5, L0InfNeedle(1), epochs=3, rng=Rng(5))
    assert np.array_equal(a.atoms, b.atoms)
    norms = np.sqrt(np.sum(a.atoms.astype(np.float64) ** 2, axis=(1, 2, 3)))
    assert np.allclose(norms, 1.0, atol=1e-5)


def test_learning_improves_the_fit():
    # image drawn from two planted atoms; after training, sparse coding
    # should fit it far better than with the random initialization
    for seed in (0, 1, 2):
        rng = Rng(seed)
        planted = random_dictionary(1, 5, 1, 1, 2, rng)
        gamma = np.zeros((12, 12, 1), np.float32)
        for (i, j, v) in [(1, 2, 1.5), (4, 8, -2.0), (9, 3, 1.0), (7, 10, 0.8)]:
            gamma[i, j, 0] = v
        x0 = synthesize(planted, gamma)

        fits = {}
        for epochs in (0, 10):
            D = learn_dictionary(
                x0, 1, 5, L0InfNeedle(1),
                epochs=epochs, learn_rate=1.0, sc_iters=30, rng=Rng(seed + 50),
            )
            trace = iht(D, x0, PursuitConfig(L0InfNeedle(1), max_iters=60))
            fits[epochs] = trace.objectives[-1]
        assert fits[10] < 0.5 * fits[0], f"seed {seed}: {fits}"


def test_learn_argument_validation():
    x0 = checkerboard(8, 8)
    with pytest.raises(DomainError):
        learn_dictionary(x0, 0, 3, L0InfNeedle(1))
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 0, L0InfNeedle(1))
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 3, L0InfNeedle(1), epochs=-1)
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 3, L0InfNeedle(1), learn_rate=0.0)
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 3, L0InfNeedle(1), sc_iters=0)
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 3, L0InfNeedle(5))
    with pytest.raises(DomainError):
        learn_dictionary(x0, 2, 3, L0Global(8 * 8 * 2 + 1))


def test_dct_dictionary_dc_atom_and_geometry():
    D = dct_dictionary(16, 8)
    assert D.atoms.shape == (16, 8, 8, 1)
    assert D.stride == 1
    assert D.padding == 3
    assert np.all(D.atoms[0] == np.float32(0.125))


def test_dct_dictionary_is_orthonormal_when_complete():
    D = dct_dictionary(16, 4)
    flat = D.atoms.reshape(16, -1).astype(np.float64)
    gram = flat @ flat.T
    assert np.allclose(gram, np.eye(16), atol=1e-6)


def test_dct_dictionary_zigzag_frequency_order():
    n = 8
    D = dct_dictionary(10, n)
    want_pairs = [
        (0, 0), (0, 1), (1, 0), (2, 0), (1, 1),
        (0, 2), (0, 3), (1, 2), (2, 1), (3, 0),
    ]
    i = np.arange(n)
    for k, (u, v) in enumerate(want_pairs):
        atom = np.outer(
            np.cos(np.pi * (2 * i + 1) * u / (2 * n)),
            np.cos(np.pi * (2 * i + 1) * v / (2 * n)),
        )
        atom /= np.linalg.norm(atom)
        assert np.allclose(D.atoms[k, :, :, 0], atom, atol=1e-6), (k, u, v)


def test_dct_dictionary_rejects_bad_sizes():
    with pytest.raises(DomainError):
        dct_dictionary(0, 4)
    with pytest.raises(DomainError):
        dct_dictionary(4, 0)
    with pytest.raises(DomainError):
        dct_dictionary(17, 4)
