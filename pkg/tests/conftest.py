"""Shared oracles for the test suite.

The dense matrix here is built by naive per-pixel atom placement, with none
of the strided-slice machinery the library uses, so agreement between the
two is meaningful.
"""

import numpy as np

from cscforge import ConvDictionary, Rng, random_dictionary

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dense_synthesis_matrix(D: ConvDictionary, rep_h: int, rep_w: int) -> np.ndarray:
    """Explicit matrix M with vec(synthesize(D, g)) == M @ vec(g).

    vec() is row-major channel-last, matching ndarray.reshape(-1).
    """
    atoms = D.atoms.astype(np.float64)
    m, n, _, c = atoms.shape
    s, p = D.stride, D.padding
    out_h = (rep_h - 1) * s + n - 2 * p
    out_w = (rep_w - 1) * s + n - 2 * p
    M = np.zeros((out_h * out_w * c, rep_h * rep_w * m))
    col = 0
    for i in range(rep_h):
        for j in range(rep_w):
            for k in range(m):
                for a in range(n):
                    y = i * s - p + a
                    if not 0 <= y < out_h:
                        continue
                    for b in range(n):
                        x = j * s - p + b
                        if not 0 <= x < out_w:
                            continue
                        for ch in range(c):
                            M[(y * out_w + x) * c + ch, col] += atoms[k, a, b, ch]
                col += 1
    return M


def random_geometry(rng: Rng, max_m=8, max_n=5, max_s=2, max_rep=6, max_c=3):
    """A random small dictionary plus a representation grid that fits it."""
    u = rng.uniform(7)
    m = 1 + int(u[0] * max_m)
    n = 1 + int(u[1] * max_n)
    s = 1 + int(u[2] * max_s)
    p = int(u[3] * ((n + 1) // 2))  # keeps 2p < n
    c = 1 + int(u[4] * max_c)
    D = random_dictionary(m, n, c, s, p, rng)
    rep_h = 1 + int(u[5] * max_rep)
    rep_w = 1 + int(u[6] * max_rep)
    while (rep_h - 1) * s + n - 2 * p < 1:
        rep_h += 1
    while (rep_w - 1) * s + n - 2 * p < 1:
        rep_w += 1
    return D, rep_h, rep_w
