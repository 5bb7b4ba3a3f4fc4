"""Conserved quantities, the Lagrangian density and the reduced-Hamiltonian components.

All functionals use the quadrature conventions of ``grid``: integrals are
sums weighted by the cell volume and |grad f|^2 is summed through the
Laplacian symbol, so the energy is exactly the Hamiltonian of the discrete
equations of motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import build_hartree_kernels, pair_potential_m, rhs, theta_kernel
from .grid import Grid, Potential
from .kernelalg import PairState, op_norm


def _w(grid: Grid) -> float:
    return grid.cell_volume


def _dirichlet_form(f: np.ndarray, grid: Grid, axis: int = 0) -> float:
    """int |grad f|^2 along one index, as -int fbar Delta f."""
    w = _w(grid)
    weight = w if f.ndim == 1 else w * w
    return float(-weight * np.real(np.vdot(f, grid.apply_laplacian(f, axis=axis))))


def total_mass(phi: np.ndarray, pair: PairState, N: float) -> tuple[float, float, float]:
    """(total, condensate, pair) with total = ||phi||^2 + ||sh||_HS^2 / N."""
    w = _w(pair.grid)
    mass_c = float(w * np.vdot(phi, phi).real)
    mass_p = float(w * w * np.vdot(pair.sh, pair.sh).real)
    return mass_c + mass_p / N, mass_c, mass_p


def total_momentum(phi: np.ndarray, pair: PairState, N: float) -> np.ndarray:
    """P_j = int Im(phi d_j phibar) + (1/N) int int Im(sh d_j shbar), d_j on the first variable."""
    grid = pair.grid
    w = _w(grid)
    sh = pair.sh
    out = np.empty(grid.dim)
    for j in range(grid.dim):
        dphi = grid.gradient(phi, j)
        dsh = grid.gradient(sh, j, axis=0)
        out[j] = w * np.sum(np.imag(phi * dphi.conj())) + w * w * np.sum(np.imag(sh * dsh.conj())) / N
    return out


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_condensate: float
    condensate_pair: float
    condensate_excitation: float
    kinetic_pair: float
    pair_pair: float

    @property
    def total(self) -> float:
        return (
            self.kinetic_condensate
            + self.condensate_pair
            + self.condensate_excitation
            + self.kinetic_pair
            + self.pair_pair
        )


def total_energy(phi: np.ndarray, pair: PairState, potential: Potential, N: float) -> EnergyBreakdown:
    """Energy functional whose Hamiltonian flow is the coupled system."""
    grid = potential.grid
    w = _w(grid)
    v = potential.pair_matrix
    q = 0.5 * pair.sh2k  # sh o ch
    rho_p = pair.rho_p
    s_sbar = pair.omega_p.conj()  # sh o shbar
    kin_c = N * _dirichlet_form(phi, grid)
    cond_pair = 0.5 * N * w * w * np.sum(v * np.abs(np.outer(phi, phi) + q / N) ** 2)
    rho_c = np.abs(phi) ** 2
    excitation = w * w * (rho_c @ v @ rho_p) + w * w * np.real(np.sum(v * np.outer(phi, phi.conj()) * s_sbar.T))
    kin_p = _dirichlet_form(pair.sh, grid)
    pair_pair = w * w / (2.0 * N) * np.sum(v * (np.abs(s_sbar) ** 2 + np.outer(rho_p, rho_p)))
    return EnergyBreakdown(float(kin_c), float(cond_pair), float(excitation), float(kin_p), float(pair_pair))


def _time_terms(phi, dphi, sh, dsh, grid, N):
    w = _w(grid)
    return N * w * np.sum(np.imag(phi * dphi.conj())) + 0.5 * w * w * np.sum(np.imag(sh * dsh.conj()))


def lagrangian_density(
    phi: np.ndarray, dphi: np.ndarray, pair: PairState, dzeta: np.ndarray, potential: Potential, N: float
) -> float:
    """-X_0 = energy - N int Im(phi phibar_t) - (1/2) int int Im(sh shbar_t)."""
    dsh, _ = pair.tangent(dzeta)
    return _lagrangian_with_dsh(phi, dphi, pair, dsh, potential, N)


def _lagrangian_with_dsh(phi, dphi, pair, dsh, potential, N):
    energy = total_energy(phi, pair, potential, N).total
    return float(energy - _time_terms(phi, dphi, pair.sh, dsh, potential.grid, N))


def lagrangian_density_direct(
    phi: np.ndarray, dphi: np.ndarray, pair: PairState, dzeta: np.ndarray, potential: Potential, N: float
) -> float:
    """-X_0 term by term, with sh o ch composed explicitly and the triple integral summed directly.

    Reference evaluation of the same quantity as ``lagrangian_density``; its cost
    is cubic in the number of grid points.
    """
    grid = potential.grid
    w = _w(grid)
    v = potential.pair_matrix
    sh, ch = pair.sh, pair.ch
    dsh, _ = pair.tangent(dzeta)
    sym = grid.laplacian_symbol
    hat_phi = grid.transform(phi)
    hat_sh = grid.transform(grid.transform(sh, axis=0), axis=1)
    n_pts = grid.total_points
    # Parseval: int |grad f|^2 = (w / P) sum |xi|^2 |f_hat|^2
    grad_phi2 = w / n_pts * np.sum(-sym * np.abs(hat_phi) ** 2)
    grad_sh2 = (w / n_pts) ** 2 * np.sum((-sym[:, None] - sym[None, :]) * np.abs(hat_sh) ** 2)
    term1 = N * (w * np.sum(-np.imag(phi * dphi.conj())) + grad_phi2)
    sc = w * sh @ ch
    term2 = 0.5 * N * w * w * np.sum(v * np.abs(np.outer(phi, phi) + sc / N) ** 2)
    amp = phi[:, None, None] * sh[None, :, :] + phi[None, :, None] * sh[:, None, :]
    term3 = 0.5 * w**3 * np.sum(v[:, :, None] * np.abs(amp) ** 2)
    term4 = 0.5 * (w * w * np.sum(-np.imag(sh * dsh.conj())) + grad_sh2)
    s_sbar = w * sh @ sh.conj()
    sbar_s = w * sh.conj() @ sh
    term5 = w * w / (2.0 * N) * np.sum(v * (np.abs(s_sbar) ** 2 + np.outer(np.diag(s_sbar), np.diag(sbar_s))))
    return float(np.real(term1 + term2 + term3 + term4 + term5))


def x0_value(phi, dphi, pair, dzeta, potential, N) -> float:
    return -lagrangian_density(phi, dphi, pair, dzeta, potential, N)


def hartree_residual(phi: np.ndarray, dphi: np.ndarray, pair: PairState, potential: Potential, N: float) -> np.ndarray:
    """(1/i) phi_t - Delta phi - int Theta phibar + (1/N) int v (sh o shbar)(x1, x2) phi(x2) + (1/N) phi (v * rho_p)."""
    grid = potential.grid
    w = _w(grid)
    v = potential.pair_matrix
    theta = theta_kernel(phi, pair, potential, N)
    s_sbar = pair.omega_p.conj()
    out = -1j * dphi - grid.apply_laplacian(phi) - w * theta @ phi.conj()
    out = out + w * (v * s_sbar) @ phi / N + phi * potential.convolve(pair.rho_p) / N
    return out


def analytic_X1(phi: np.ndarray, dphi: np.ndarray, pair: PairState, potential: Potential, N: float) -> np.ndarray:
    """X_1 = -sqrt(N) (chbar o Har + sh o conj(Har)) with Har the modified Hartree residual."""
    w = _w(pair.grid)
    har = hartree_residual(phi, dphi, pair, potential, N)
    return -math.sqrt(N) * w * (pair.ch.conj() @ har + pair.sh @ har.conj())


def _g_tilde_op(phi, pair, potential, N, feedback=1.0):
    grid = potential.grid
    w = _w(grid)
    kern = build_hartree_kernels(phi, pair, potential)
    return -grid.laplacian_matrix + w * (kern.alpha_c + feedback * kern.alpha_p / N)


def analytic_X2(
    phi: np.ndarray, dphi: np.ndarray, pair: PairState, dzeta: np.ndarray, potential: Potential, N: float
) -> np.ndarray:
    """X_2 = -(1/sqrt 2) chbar o (S(zeta) - Theta - zeta Thetabar zeta) o ch."""
    w = _w(pair.grid)
    g = _g_tilde_op(phi, pair, potential, N)
    t = w * theta_kernel(phi, pair, potential, N)
    z = pair.zeta_op
    s_z = -1j * w * dzeta + g.T @ z + z @ g
    inner = s_z - t - z @ t.conj() @ z
    return -(pair.ch_op.conj() @ inner @ pair.ch_op) / (math.sqrt(2.0) * w)


def analytic_X2_explicit(
    phi: np.ndarray, pair: PairState, dzeta: np.ndarray, potential: Potential, N: float
) -> np.ndarray:
    """X_2 from its expansion in sh, ch, their time derivatives and the Hartree-Fock-Bogoliubov terms."""
    grid = potential.grid
    w = _w(grid)
    v = potential.pair_matrix
    sh, ch = pair.sh, pair.ch
    chb = ch.conj()
    dsh, dch = pair.tangent(dzeta)
    # operator g_N and m without pair feedback
    hartree = potential.convolve(np.abs(phi) ** 2)
    g = -grid.laplacian_matrix + np.diag(hartree) + w * v * np.outer(phi.conj(), phi)
    m = w * pair_potential_m(phi, potential)
    sh_o, ch_o, chb_o = w * sh, w * ch, w * chb
    s_sh = -1j * w * dsh + g.T @ sh_o + sh_o @ g
    w_chb = -1j * w * dch.conj() + g.T @ chb_o - chb_o @ g.T
    first = (s_sh - chb_o @ m) @ ch_o - (w_chb + sh_o @ m.conj()) @ sh_o

    sbar_s = w * sh.conj() @ sh
    s_sbar = w * sh @ sh.conj()
    d1 = np.real(np.diag(sbar_s))
    d2 = np.real(np.diag(s_sbar))
    opt = dict(optimize=True)
    w2 = w * w
    lines = (
        np.einsum("ib,bj,a,ab->ij", chb, sh, d1, v, **opt)
        + np.einsum("ib,aj,ab,ab->ij", chb, sh, sbar_s, v, **opt)
        + np.einsum("ia,bj,ab,ab->ij", chb, sh, s_sbar, v, **opt)
        + np.einsum("ia,aj,b,ab->ij", chb, sh, d2, v, **opt)
    ) * w2
    symm = 0.5 * (lines + lines.T)
    sbar_chb = w * sh.conj() @ chb
    chb_s = w * chb @ sh
    extra = (
        np.einsum("ia,bj,ab,ab->ij", sh, sh, sbar_chb, v, **opt)
        + np.einsum("ia,bj,ab,ab->ij", chb, ch, chb_s, v, **opt)
    ) * w2
    # 'first' is an operator; the integral lines are kernels
    minus_sqrt2_x2 = first / w + (symm + extra) / N
    return -minus_sqrt2_x2 / math.sqrt(2.0)


def _random_direction(rng, shape, symmetric=False):
    d = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if symmetric:
        d = 0.5 * (d + d.T)
    return d / np.linalg.norm(d)


def variational_check_phi(
    phi: np.ndarray,
    dphi: np.ndarray,
    pair: PairState,
    dzeta: np.ndarray,
    potential: Potential,
    N: float,
    direction: np.ndarray,
    eps: float = 1e-4,
) -> tuple[float, float, float]:
    """Compare the first variation of X_0 in phi with 2 sqrt(N) Re int X_1 (ch hbar - shbar h).

    The variation holds phi_t fixed and adds the term N Im int h phibar_t that the
    time-derivative part of X_0 contributes after integrating by parts in time.
    Returns (lhs, rhs, relative error).
    """
    grid = potential.grid
    w = _w(grid)
    dsh, _ = pair.tangent(dzeta)
    h = direction

    def x0(p):
        return -_lagrangian_with_dsh(p, dphi, pair, dsh, potential, N)

    fd = (x0(phi + eps * h) - x0(phi - eps * h)) / (2 * eps)
    lhs = fd + N * w * np.sum(np.imag(h * dphi.conj()))
    x1 = analytic_X1(phi, dphi, pair, potential, N)
    proj = w * (pair.ch @ h.conj()) - w * (pair.sh.conj() @ h)
    rhs_ = 2 * math.sqrt(N) * w * np.real(np.sum(x1 * proj))
    return float(lhs), float(rhs_), abs(lhs - rhs_) / max(abs(rhs_), abs(lhs), 1e-300)


def variational_check_zeta(
    phi: np.ndarray,
    dphi: np.ndarray,
    pair: PairState,
    dzeta: np.ndarray,
    potential: Potential,
    N: float,
    direction: np.ndarray,
    eps: float = 1e-4,
) -> tuple[float, float, float]:
    """Compare the first variation of X_0 along zeta + s H with sqrt(2) Re int int (chbar X_2 ch) Hbar.

    sh_t is held fixed, and the integrated-by-parts term (1/2) Im int int dsh shbar_t
    is added, where dsh is the variation of sh induced by H.
    """
    grid = potential.grid
    w = _w(grid)
    dsh, _ = pair.tangent(dzeta)

    def x0(z):
        return -_lagrangian_with_dsh(phi, dphi, PairState(z, grid, check=False), dsh, potential, N)

    fd = (x0(pair.zeta + eps * direction) - x0(pair.zeta - eps * direction)) / (2 * eps)
    var_sh, _ = pair.tangent(direction)
    lhs = fd + 0.5 * w * w * np.sum(np.imag(var_sh * dsh.conj()))
    x2 = analytic_X2(phi, dphi, pair, dzeta, potential, N)
    proj = w * w * (pair.ch.conj() @ x2 @ pair.ch)
    rhs_ = math.sqrt(2.0) * w * w * np.real(np.sum(proj * direction.conj()))
    return float(lhs), float(rhs_), abs(lhs - rhs_) / max(abs(rhs_), abs(lhs), 1e-300)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_total: float
    mass_c: float
    mass_p: float
    momentum: tuple[float, ...]
    energy: float
    zeta_norm: float
    x0: float

    def row(self) -> list[float]:
        return [self.t, self.mass_total, self.mass_c, self.mass_p, *self.momentum, self.energy, self.zeta_norm, self.x0]


def diagnostics_header(dim: int) -> list[str]:
    mom = ["px", "py", "pz"][:dim]
    return ["t", "mass_total", "mass_c", "mass_p", *mom, "energy", "zeta_norm", "x0"]


def diagnostics_record(
    t: float, phi: np.ndarray, zeta: np.ndarray, potential: Potential, N: float, mode: str = "coupled"
) -> DiagnosticsRecord:
    grid = potential.grid
    pair = PairState(zeta, grid, check=False)
    mass = total_mass(phi, pair, N)
    mom = total_momentum(phi, pair, N)
    energy = total_energy(phi, pair, potential, N).total
    dphi, dzeta = rhs(phi, zeta, potential, N, mode)
    x0 = x0_value(phi, dphi, pair, dzeta, potential, N)
    return DiagnosticsRecord(float(t), *mass, tuple(float(p) for p in mom), energy, op_norm(zeta, grid), x0)
