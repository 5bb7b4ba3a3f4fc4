"""Numerical identity suite run by ``pairex identities``."""

from __future__ import annotations

import math
import time

import numpy as np

from . import conserved as cs
from . import fock
from . import kernelalg as ka
from .config import SimulationConfig, build_setup
from .dynamics import rhs

ROUNDOFF = 1e-9
VARIATIONAL = 1e-6
IDENTITY_POINTS_CAP = 32


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def random_kernel(rng: np.random.Generator, grid, op_norm: float) -> np.ndarray:
    """Random symmetric kernel with prescribed operator norm."""
    a = random_symmetric(rng, grid.total_points)
    return a * op_norm / ka.op_norm(a, grid)


def random_field(rng: np.random.Generator, grid, normalize: bool = True) -> np.ndarray:
    f = rng.normal(size=grid.total_points) + 1j * rng.normal(size=grid.total_points)
    if normalize:
        f = f / math.sqrt(grid.cell_volume * np.vdot(f, f).real)
    return f


def unit_direction(rng: np.random.Generator, grid, kernel: bool) -> np.ndarray:
    """Random direction with unit L^2 (fields) or Hilbert-Schmidt (kernels) norm."""
    if kernel:
        d = random_symmetric(rng, grid.total_points)
        return d / ka.hs_norm(d, grid)
    return random_field(rng, grid)


def kernel_identities(k: np.ndarray, grid) -> dict[str, float]:
    """Residuals (relative to the kernel scale) of the algebraic identities for one k."""
    w = grid.cell_volume
    delta = ka.identity_kernel(grid)
    sh, ch = ka.sh_ch_from_k(k, grid)
    shb, chb = sh.conj(), ch.conj()
    c = lambda a, b: ka.compose(a, b, grid)
    u, sigma = ka.takagi(k, grid)
    pair = ka.PairState.from_k(k, grid)
    e_k = ka.bogoliubov_matrix(k, grid)
    groups = ka.check_group_properties(e_k)
    scale = lambda a: max(1.0, w * np.abs(a).max())
    res = {
        "compose_identity": w * np.abs(c(delta, k) - k).max() / scale(k),
        "takagi_reconstruction": np.abs(u @ np.diag(sigma) @ u.T - w * k).max() / max(sigma[0], 1e-300),
        "takagi_unitarity": np.abs(u.conj().T @ u - np.eye(len(sigma))).max(),
        "ch_ch_minus_shbar_sh": w * np.abs(c(ch, ch) - c(shb, sh) - delta).max(),
        "ch_shbar_equals_shbar_chbar": w * np.abs(c(ch, shb) - c(shb, chb)).max(),
        "sh_is_symmetric": w * np.abs(sh - sh.T).max(),
        "ch_is_self_adjoint": w * np.abs(ch - ch.conj().T).max(),
        "zeta_route_sh": w * np.abs(pair.sh - sh).max(),
        "zeta_route_ch": w * np.abs(pair.ch - ch).max(),
        "k_zeta_round_trip": w * np.abs(ka.k_from_zeta(pair.zeta, grid) - k).max() / scale(k),
        "sh2k_is_2_sh_ch": w * np.abs(pair.sh2k - 2 * c(sh, ch)).max(),
        "ch2k_is_1_plus_2_shbar_sh": w * np.abs(pair.ch2k - delta - 2 * c(shb, sh)).max(),
        "zeta_from_doubled": w * np.abs(pair.zeta - c(pair.sh2k, np.linalg.inv(w * (delta + pair.ch2k)) / w)).max(),
        "e_zeta_vs_exponential": np.abs(ka.bogoliubov_from_zeta(pair.zeta, grid).operator() - e_k.operator()).max(),
        "takagi_vs_exponential": np.abs(ka.bogoliubov_exponential(k, grid).operator() - e_k.operator()).max(),
        **{f"group_{key}": val for key, val in groups.items()},
    }
    return {key: float(val) for key, val in res.items()}


def _check(name, value, tol):
    return {"name": name, "value": float(value), "tolerance": tol, "pass": bool(value < tol)}


def identity_suite(cfg: SimulationConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    points = min(cfg.grid_points, IDENTITY_POINTS_CAP)
    setup = build_setup(cfg, points=points)
    grid, pot, N = setup.grid, setup.potential, cfg.N
    checks = []

    worst: dict[str, float] = {}
    for _ in range(5):
        k = random_kernel(rng, grid, rng.uniform(0.1, 1.5))
        for key, val in kernel_identities(k, grid).items():
            worst[key] = max(worst.get(key, 0.0), val)
    checks += [_check(key, val, ROUNDOFF) for key, val in worst.items()]

    k = random_kernel(rng, grid, 0.4)
    sh, ch = ka.sh_ch_from_k(k, grid)
    sh_s, ch_s = ka.sh_ch_series(k, grid)
    w = grid.cell_volume
    checks.append(_check("series_vs_takagi", w * max(np.abs(sh - sh_s).max(), np.abs(ch - ch_s).max()), 1e-12))

    phi = random_field(rng, grid)
    pair = ka.PairState(random_kernel(rng, grid, 0.5), grid)
    dphi = random_field(rng, grid, normalize=False)
    dzeta = random_symmetric(rng, grid.total_points)
    a = cs.lagrangian_density(phi, dphi, pair, dzeta, pot, N)
    b = cs.lagrangian_density_direct(phi, dphi, pair, dzeta, pot, N)
    checks.append(_check("x0_two_ways", abs(a - b) / abs(b), 1e-10))
    x2a = cs.analytic_X2(phi, dphi, pair, dzeta, pot, N)
    x2b = cs.analytic_X2_explicit(phi, pair, dzeta, pot, N)
    checks.append(_check("x2_dual_evaluation", np.abs(x2a - x2b).max() / np.abs(x2a).max(), ROUNDOFF))
    fp, fz = rhs(phi, pair.zeta, pot, N)
    x1 = cs.analytic_X1(phi, fp, pair, pot, N)
    x2 = cs.analytic_X2(phi, fp, pair, fz, pot, N)
    checks.append(_check("x1_vanishes_on_dynamics", math.sqrt(w) * np.linalg.norm(x1), ROUNDOFF))
    checks.append(_check("x2_vanishes_on_dynamics", w * np.linalg.norm(x2), ROUNDOFF))
    _, _, err = cs.variational_check_phi(phi, dphi, pair, dzeta, pot, N, unit_direction(rng, grid, False))
    checks.append(_check("variation_in_phi", err, VARIATIONAL))
    _, _, err = cs.variational_check_zeta(phi, dphi, pair, dzeta, pot, N, unit_direction(rng, grid, True))
    checks.append(_check("variation_in_zeta", err, VARIATIONAL))
    theta = 0.37
    e0 = cs.total_energy(phi, pair, pot, N).total
    rotated = ka.PairState(np.exp(2j * theta) * pair.zeta, grid)
    e1 = cs.total_energy(np.exp(1j * theta) * phi, rotated, pot, N).total
    checks.append(_check("energy_gauge_invariance", abs(e1 - e0) / abs(e0), ROUNDOFF))

    # Fock-level identities on a small lattice
    sites = 3
    space = fock.build_space(sites, 10, grid.cell_volume)
    safe = space.sector <= space.n_max - 4
    worst_lie = 0.0
    for _ in range(5):
        gens = []
        for _ in range(2):
            d = rng.normal(size=(sites, sites)) + 1j * rng.normal(size=(sites, sites))
            gens.append(fock.QuadraticGenerator(d, random_symmetric(rng, sites), random_symmetric(rng, sites)))
        i1, i2 = (fock.quadratic_rep(space, g) for g in gens)
        i12 = fock.quadratic_rep(space, gens[0].bracket(gens[1], space.cell_volume))
        v = np.where(safe, rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim), 0.0)
        lhs = i1 @ (i2 @ v) - i2 @ (i1 @ v)
        worst_lie = max(worst_lie, np.linalg.norm(lhs - i12 @ v) / np.linalg.norm(i12 @ v))
    checks.append(_check("lie_isomorphism", worst_lie, 1e-10))
    ks = random_symmetric(rng, sites)
    gen_k = fock.QuadraticGenerator(np.zeros((sites, sites)), ks, ks.conj())
    diff = fock.quadratic_rep(space, gen_k) - fock.squeeze_generator(space, ks)
    checks.append(_check("squeeze_is_quadratic_rep", abs(diff).max() if diff.nnz else 0.0, 1e-12))

    return {
        "seed": cfg.seed,
        "grid_points": points,
        "N": N,
        "elapsed_seconds": time.perf_counter() - start,
        "all_pass": all(c["pass"] for c in checks),
        "checks": checks,
    }
