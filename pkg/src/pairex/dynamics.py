"""Coupled condensate / pair-excitation dynamics in the zeta chart.

The state is (phi, zeta). Three modes are supported:

* ``coupled``: the self-consistent system with feedback of the pair kernel
  on the condensate (all 1/N terms kept).
* ``uncoupled-GM``: phi solves the Hartree equation and zeta is driven by it,
  without back-reaction.
* ``mean-field-only``: Hartree for phi, zeta frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ChartError, IntegrationError, SymmetryError
from .grid import Grid, Potential
from .kernelalg import CHART_MARGIN, PairState, op_norm

MODES = ("coupled", "uncoupled-GM", "mean-field-only")

BLOWUP_NORM = 1e6
ASYMMETRY_TOL = 1e-9


@dataclass
class EvolutionState:
    time: float
    phi: np.ndarray
    zeta: np.ndarray
    mode: str = "coupled"

    def pair(self, grid: Grid) -> PairState:
        return PairState(self.zeta, grid, check=False)


@dataclass(frozen=True)
class HartreeKernels:
    """Density matrices and the Hartree-exchange kernels built from them."""

    omega_c: np.ndarray  # phibar(x) phi(y)
    omega_p: np.ndarray  # shbar o sh
    rho_c: np.ndarray
    rho_p: np.ndarray
    alpha_c: np.ndarray  # delta(x-y) (v*rho_c)(x) + v(x-y) omega_c(x, y)
    alpha_p: np.ndarray  # delta(x-y) (v*rho_p)(x) + v(x-y) omega_p(x, y)


def build_hartree_kernels(phi: np.ndarray, pair: PairState, potential: Potential) -> HartreeKernels:
    w = potential.grid.cell_volume
    v = potential.pair_matrix
    omega_c = np.outer(phi.conj(), phi)
    rho_c = np.abs(phi) ** 2
    omega_p = pair.omega_p
    rho_p = pair.rho_p
    alpha_c = np.diag(potential.convolve(rho_c) / w) + v * omega_c
    alpha_p = np.diag(potential.convolve(rho_p) / w) + v * omega_p
    return HartreeKernels(omega_c, omega_p, rho_c, rho_p, alpha_c, alpha_p)


def theta_kernel(phi: np.ndarray, pair: PairState, potential: Potential, N: float, feedback: float = 1.0) -> np.ndarray:
    """Theta(x, y) = -v(x-y) [phi(x) phi(y) + sh(2k)(x, y) / (2N)]."""
    v = potential.pair_matrix
    return -v * (np.outer(phi, phi) + feedback * pair.sh2k / (2.0 * N))


def pair_potential_m(phi: np.ndarray, potential: Potential) -> np.ndarray:
    """m(x, y) = -v(x-y) phi(x) phi(y)."""
    return -potential.pair_matrix * np.outer(phi, phi)


def _kinetic_phi(phi, grid):
    return grid.apply_laplacian(phi)


def _kinetic_kernel(z, grid):
    return grid.apply_laplacian(z, axis=0) + grid.apply_laplacian(z, axis=1)


def rhs_phi(
    phi: np.ndarray,
    pair: PairState,
    potential: Potential,
    N: float,
    *,
    kernels: HartreeKernels | None = None,
    theta: np.ndarray | None = None,
    kinetic: bool = True,
    feedback: float = 1.0,
) -> np.ndarray:
    """d phi/dt = i [Delta phi + int Theta phibar - (1/N) int alpha_p^T phi]."""
    grid = potential.grid
    w = grid.cell_volume
    if kernels is None:
        kernels = build_hartree_kernels(phi, pair, potential)
    if theta is None:
        theta = theta_kernel(phi, pair, potential, N, feedback)
    out = w * (theta @ phi.conj()) - (feedback / N) * w * (kernels.alpha_p.T @ phi)
    if kinetic:
        out = out + _kinetic_phi(phi, grid)
    return 1j * out


def rhs_zeta(
    phi: np.ndarray,
    pair: PairState,
    potential: Potential,
    N: float,
    *,
    kernels: HartreeKernels | None = None,
    theta: np.ndarray | None = None,
    kinetic: bool = True,
    feedback: float = 1.0,
) -> np.ndarray:
    """d zeta/dt = i [Theta + zeta Thetabar zeta - gt^T zeta - zeta gt], gt = -Delta + alpha_c + alpha_p/N."""
    grid = potential.grid
    w = grid.cell_volume
    if kernels is None:
        kernels = build_hartree_kernels(phi, pair, potential)
    if theta is None:
        theta = theta_kernel(phi, pair, potential, N, feedback)
    z = pair.zeta_op
    t = w * theta
    g = w * (kernels.alpha_c + (feedback / N) * kernels.alpha_p)
    out = t + z @ t.conj() @ z - g.T @ z - z @ g
    out = out / w
    if kinetic:
        out = out + _kinetic_kernel(pair.zeta, grid)
    return 1j * out


def rhs_gm(phi: np.ndarray, zeta: np.ndarray, potential: Potential, *, kinetic: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Hartree equation for phi and the pair equation driven by it (no feedback).

    d phi/dt = i [Delta phi - (v * |phi|^2) phi]
    d zeta/dt = i [m + zeta mbar zeta - g^T zeta - zeta g],
    g = -Delta + (v * |phi|^2) delta + v(x-y) phibar(x) phi(y).
    """
    grid = potential.grid
    w = grid.cell_volume
    hartree = potential.convolve(np.abs(phi) ** 2)
    dphi = -hartree * phi
    m = w * pair_potential_m(phi, potential)
    g = np.diag(hartree) + w * potential.pair_matrix * np.outer(phi.conj(), phi)
    z = w * zeta
    dz = (m + z @ m.conj() @ z - g.T @ z - z @ g) / w
    if kinetic:
        dphi = dphi + _kinetic_phi(phi, grid)
        dz = dz + _kinetic_kernel(zeta, grid)
    return 1j * dphi, 1j * dz


def rhs(
    phi: np.ndarray,
    zeta: np.ndarray,
    potential: Potential,
    N: float,
    mode: str = "coupled",
    *,
    kinetic: bool = True,
    feedback: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (phi_t, zeta_t) in the chosen mode."""
    grid = potential.grid
    if mode == "coupled":
        pair = PairState(zeta, grid, check=False)
        kernels = build_hartree_kernels(phi, pair, potential)
        theta = theta_kernel(phi, pair, potential, N, feedback)
        kw = dict(kernels=kernels, theta=theta, kinetic=kinetic, feedback=feedback)
        return rhs_phi(phi, pair, potential, N, **kw), rhs_zeta(phi, pair, potential, N, **kw)
    if mode == "uncoupled-GM":
        return rhs_gm(phi, zeta, potential, kinetic=kinetic)
    if mode == "mean-field-only":
        dphi, _ = rhs_gm(phi, zeta, potential, kinetic=kinetic)
        return dphi, np.zeros_like(zeta)
    raise ValueError(f"unknown mode '{mode}'")


def kinetic_flow(phi: np.ndarray, zeta: np.ndarray, grid: Grid, dt: float, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Exact free evolution over dt in Fourier space, on both kernel indices."""
    prop = np.exp(1j * grid.laplacian_symbol * dt)
    phi = grid.apply_multiplier(phi, prop)
    if mode != "mean-field-only":
        zeta = grid.apply_multiplier(grid.apply_multiplier(zeta, prop, axis=0), prop, axis=1)
    return phi, zeta


def step_strang(state: EvolutionState, dt: float, potential: Potential, N: float) -> EvolutionState:
    """Half kinetic step, RK4 step of the remainder, half kinetic step."""
    grid = potential.grid
    mode = state.mode
    phi, zeta = kinetic_flow(state.phi, state.zeta, grid, 0.5 * dt, mode)

    def f(p, z):
        return rhs(p, z, potential, N, mode, kinetic=False)

    k1p, k1z = f(phi, zeta)
    k2p, k2z = f(phi + 0.5 * dt * k1p, zeta + 0.5 * dt * k1z)
    k3p, k3z = f(phi + 0.5 * dt * k2p, zeta + 0.5 * dt * k2z)
    k4p, k4z = f(phi + dt * k3p, zeta + dt * k3z)
    phi = phi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    zeta = zeta + dt / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
    phi, zeta = kinetic_flow(phi, zeta, grid, 0.5 * dt, mode)

    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(zeta))):
        raise BlowUpError("non-finite values in the state")
    asym = np.max(np.abs(zeta - zeta.T), initial=0.0)
    if asym >= ASYMMETRY_TOL * max(1.0, np.max(np.abs(zeta), initial=0.0)):
        raise SymmetryError(f"zeta lost symmetry: max |zeta - zeta^T| = {asym:.3e}")
    zeta = 0.5 * (zeta + zeta.T)
    w = grid.cell_volume
    if math.sqrt(w) * np.linalg.norm(phi) > BLOWUP_NORM or w * np.linalg.norm(zeta) > BLOWUP_NORM:
        raise BlowUpError("field norm exceeded the blow-up threshold")
    if mode != "mean-field-only":
        norm = op_norm(zeta, grid)
        if norm >= 1.0 - CHART_MARGIN:
            raise ChartError(f"||zeta||_op = {norm:.12f} reached the chart boundary")
    return EvolutionState(state.time + dt, phi, zeta, mode)


@dataclass
class Snapshot:
    time: float
    phi: np.ndarray
    zeta: np.ndarray


@dataclass
class Trajectory:
    grid: Grid
    potential: Potential
    N: float
    mode: str
    records: list = field(default_factory=list)
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]


def integrate(
    phi0: np.ndarray,
    zeta0: np.ndarray,
    potential: Potential,
    N: float,
    mode: str,
    dt: float,
    t_final: float,
    output_every: int | None = None,
    diagnostics: bool = True,
) -> Trajectory:
    """Run step_strang from t = 0 to t_final, recording every ``output_every`` steps."""
    from .conserved import diagnostics_record

    if mode not in MODES:
        raise ValueError(f"unknown mode '{mode}'")
    n_steps = int(round(t_final / dt))
    if n_steps and not math.isclose(n_steps * dt, t_final, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"t_final = {t_final} is not a multiple of dt = {dt}")
    if output_every is None or output_every <= 0:
        output_every = max(n_steps, 1)
    traj = Trajectory(potential.grid, potential, float(N), mode)
    state = EvolutionState(0.0, np.asarray(phi0, dtype=complex), np.asarray(zeta0, dtype=complex), mode)

    def record(s: EvolutionState) -> None:
        traj.snapshots.append(Snapshot(s.time, s.phi.copy(), s.zeta.copy()))
        if diagnostics:
            traj.records.append(diagnostics_record(s.time, s.phi, s.zeta, potential, N, mode))

    record(state)
    for step in range(1, n_steps + 1):
        try:
            state = step_strang(state, dt, potential, N)
        except (ChartError, BlowUpError, SymmetryError) as exc:
            raise IntegrationError(str(exc), state.time + dt, traj) from exc
        state.time = step * dt
        if step % output_every == 0 or step == n_steps:
            record(state)
    return traj


def evolve(config) -> Trajectory:
    """Evolve the initial state described by a SimulationConfig."""
    from .config import build_setup

    setup = build_setup(config)
    every = max(1, int(round(config.output_interval / config.dt)))
    return integrate(
        setup.phi0, setup.zeta0, setup.potential, config.N, config.mode, config.dt, config.t_final, every
    )


def _central(prev, nxt, dt):
    return (nxt - prev) / (2.0 * dt)


def _rel(res, *terms):
    scale = max(np.linalg.norm(t) for t in terms)
    return float(np.linalg.norm(res) / scale) if scale > 0 else float(np.linalg.norm(res))


def residual_forms(
    prev: Snapshot, cur: Snapshot, nxt: Snapshot, dt: float, potential: Potential, N: float, mode: str
) -> dict[str, float]:
    """Relative residuals of the equivalent forms of the pair equation.

    Time derivatives are central differences of three consecutive snapshots;
    each residual is divided by the largest term of its equation.
    """
    grid = potential.grid
    w = grid.cell_volume
    lap = grid.laplacian_matrix
    pp, pc, pn = (PairState(s.zeta, grid, check=False) for s in (prev, cur, nxt))
    phi = cur.phi

    zeta_t = w * _central(prev.zeta, nxt.zeta, dt)
    sh_t = w * _central(pp.sh, pn.sh, dt)
    ch_t = w * _central(pp.ch, pn.ch, dt)
    sh2_t = w * _central(pp.sh2k, pn.sh2k, dt)
    ch2_t = w * _central(pp.ch2k, pn.ch2k, dt)
    z, sh, ch = pc.zeta_op, pc.sh_op, pc.ch_op
    sh2, ch2 = w * pc.sh2k, w * pc.ch2k

    if mode == "coupled":
        kern = build_hartree_kernels(phi, pc, potential)
        theta = w * theta_kernel(phi, pc, potential, N)
        g = -lap + w * (kern.alpha_c + kern.alpha_p / N)
        drive = theta
    elif mode == "uncoupled-GM":
        hartree = potential.convolve(np.abs(phi) ** 2)
        g = -lap + np.diag(hartree) + w * potential.pair_matrix * np.outer(phi.conj(), phi)
        drive = w * pair_potential_m(phi, potential)
    else:
        raise ValueError("pair-equation residuals need a mode with a moving pair kernel")

    def S(s, s_t):
        return -1j * s_t + g.T @ s + s @ g

    def W(p, p_t):
        return -1j * p_t + g.T @ p - p @ g.T

    out = {}
    lhs = S(z, zeta_t)
    rhs_ = drive + z @ drive.conj() @ z
    out["zeta_form"] = _rel(lhs - rhs_, -1j * zeta_t, rhs_)
    lhs = S(sh2, sh2_t)
    rhs_ = drive @ ch2 + ch2.conj() @ drive
    out["sh2k_form"] = _rel(lhs - rhs_, -1j * sh2_t, rhs_)
    lhs = W(ch2.conj(), ch2_t.conj())
    rhs_ = drive @ sh2.conj() - sh2 @ drive.conj()
    out["ch2k_form"] = _rel(lhs - rhs_, -1j * ch2_t, rhs_)
    if mode == "uncoupled-GM":
        left = (S(sh, sh_t) - ch.conj() @ drive) @ ch
        right = (W(ch.conj(), ch_t.conj()) + sh @ drive.conj()) @ sh
        out["sh_ch_form"] = _rel(left - right, -1j * sh_t @ ch, ch.conj() @ drive @ ch)
    return out
