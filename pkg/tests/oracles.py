"""Independent reference computations used by several test modules."""

import math

import numpy as np


def naive_compose(a, b, w):
    n = a.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            s = 0j
            for z in range(n):
                s += a[i, z] * b[z, j]
            out[i, j] = w * s
    return out


def series_sh_ch(k, w, terms=12):
    """Truncated series sh = sum k (kbar k)^j/(2j+1)!, ch = delta + sum (kbar k)^j/(2j)!."""
    n = k.shape[0]
    delta = np.eye(n) / w
    sh = np.zeros_like(k, dtype=complex)
    ch = np.zeros_like(k, dtype=complex)
    power = delta.astype(complex)  # (kbar o k)^j
    for j in range(terms):
        ch += power / math.factorial(2 * j)
        sh += w * (k @ power) / math.factorial(2 * j + 1)
        power = w * w * (k.conj() @ k @ power)
    return sh, ch


def random_symmetric(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def scaled_kernel(rng, n, w, op_norm):
    a = random_symmetric(rng, n)
    return a * op_norm / (w * np.linalg.norm(a, 2))


def unit_vector(n, w, real=True):
    u = np.cos(np.arange(n) * 0.7) + 0.3
    if not real:
        u = u * np.exp(0.4j * np.arange(n))
    return u / math.sqrt(w * np.vdot(u, u).real)
