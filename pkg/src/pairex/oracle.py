"""Comparison of the evolved (phi, zeta) with exact many-body evolution on a small lattice."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import fock
from .config import SimulationConfig, build_setup, default_n_max
from .conserved import x0_value, analytic_X1, analytic_X2
from .dynamics import integrate, rhs
from .errors import TruncationWarning
from .kernelalg import PairState, k_from_zeta

# tail mass below which H_red components are trusted
HRED_TAIL = 1e-10


@dataclass
class OracleResult:
    M: int
    n_max: int
    N: float
    beta: float
    t: float
    fidelity: float
    error: float
    fidelity_meanfield: float
    error_meanfield: float
    tail_mass: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class OracleRun:
    result: OracleResult
    grid: object
    potential: object
    phi: np.ndarray
    zeta: np.ndarray
    phi_meanfield: np.ndarray


def compare_with_exact(cfg: SimulationConfig, N: float, beta: float) -> OracleRun:
    """Evolve coupled and mean-field dynamics on the oracle lattice and compare with e^{itH}."""
    setup = build_setup(cfg, N=N, beta=beta, points=cfg.oracle_sites)
    grid, pot = setup.grid, setup.potential
    coupled = integrate(setup.phi0, setup.zeta0, pot, N, "coupled", cfg.dt, cfg.t_final, diagnostics=False)
    meanfield = integrate(setup.phi0, setup.zeta0, pot, N, "mean-field-only", cfg.dt, cfg.t_final, diagnostics=False)
    phi, zeta = coupled.final.phi, coupled.final.zeta
    n_max = cfg.oracle_n_max or default_n_max(N)
    space = fock.build_space(grid.total_points, n_max, grid.cell_volume)
    ham = fock.fock_hamiltonian(space, grid, pot, N)
    psi0 = fock.coherent_state(space, setup.phi0, N)
    exact = fock.exact_evolve(psi0, cfg.t_final, ham)
    k = k_from_zeta(zeta, grid)
    pair_state = fock.approx_state(space, grid, phi, k, N)
    mf_state = fock.approx_state(space, grid, meanfield.final.phi, np.zeros_like(k), N)
    f_pair = fock.fidelity(exact, pair_state)
    f_mf = fock.fidelity(exact, mf_state)
    tail = max(space.tail_mass(exact), space.tail_mass(pair_state), space.tail_mass(mf_state))
    result = OracleResult(
        grid.total_points, n_max, float(N), float(beta), float(cfg.t_final),
        f_pair, fock.fidelity_error(f_pair), f_mf, fock.fidelity_error(f_mf), tail,
    )
    return OracleRun(result, grid, pot, phi, zeta, meanfield.final.phi)


def hred_on_trajectory(run: OracleRun, N: float, start_n_max: int, max_dim: int = 400_000) -> dict:
    """Numeric H_red|0> components at the final state, with dynamics time derivatives.

    n_max is raised until the displaced squeezed state has tail mass below HRED_TAIL.
    """
    grid, pot = run.grid, run.potential
    phi, zeta = run.phi, run.zeta
    dphi, dzeta = rhs(phi, zeta, pot, N, "coupled")
    k = k_from_zeta(zeta, grid)
    eps = 1e-6
    dk = (k_from_zeta(zeta + eps * dzeta, grid) - k_from_zeta(zeta - eps * dzeta, grid)) / (2 * eps)
    n_max = start_n_max
    while True:
        space = fock.build_space(grid.total_points, n_max, grid.cell_volume)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            probe = fock.apply_weyl(space, phi, math.sqrt(N), fock.squeezed_vacuum(space, k, grid))
        tail = space.tail_mass(probe)
        bigger = fock.fock_dimension(grid.total_points, n_max + 4)
        if tail < HRED_TAIL or bigger > max_dim:
            break
        n_max += 4
    ham = fock.fock_hamiltonian(space, grid, pot, N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        comps = fock.numeric_hred_vacuum(space, grid, ham, N, phi, dphi, k, dk, eps=1e-5)
    pair = PairState(zeta, grid, check=False)
    w = grid.cell_volume
    x1 = analytic_X1(phi, dphi, pair, pot, N)
    x2 = analytic_X2(phi, dphi, pair, dzeta, pot, N)
    return {
        "n_max": n_max,
        "tail_mass": tail,
        "X0": comps.x0.real,
        "X0_analytic": x0_value(phi, dphi, pair, dzeta, pot, N),
        "X1": float(math.sqrt(w) * np.linalg.norm(comps.x1)),
        "X1_analytic": float(math.sqrt(w) * np.linalg.norm(x1)),
        "X2": float(w * np.linalg.norm(comps.x2)),
        "X2_analytic": float(w * np.linalg.norm(x2)),
        "X3": comps.x3_norm,
        "X4": comps.x4_norm,
    }
