"""Kernel algebra: composition, Takagi factorization and Bogoliubov kernels.

A kernel is stored as the array of its point values A(x_i, x_j). The integral
operator it represents acts as ``cell_volume * A @ f``, so composition is
``cell_volume * A @ B`` and the identity kernel is ``I / cell_volume``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ChartError, ConvergenceError, GridMismatchError, SymmetryError
from .grid import Grid

# zeta must stay this far inside the unit ball of operators
CHART_MARGIN = 1e-6

SNAPSHOT_MAGIC = b"PAIREX01"
KIND_CODES = {"general": 0, "symmetric": 1, "self_adjoint": 2, "field": 16}


def check_kernel(a: np.ndarray, grid: Grid) -> np.ndarray:
    a = np.asarray(a)
    n = grid.total_points
    if a.shape != (n, n):
        raise GridMismatchError(f"kernel of shape {a.shape} does not live on a grid of {n} points")
    return a


def check_symmetry(a: np.ndarray, tag: str, tol: float = 1e-12) -> None:
    """Raise SymmetryError unless ``a`` matches the declared symmetry."""
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if tag == "symmetric":
        err = np.max(np.abs(a - a.T), initial=0.0)
    elif tag == "self_adjoint":
        err = np.max(np.abs(a - a.conj().T), initial=0.0)
    elif tag == "general":
        return
    else:
        raise ValueError(f"unknown symmetry tag '{tag}'")
    if err > tol * scale:
        raise SymmetryError(f"kernel is not {tag}: deviation {err:.3e}")


def identity_kernel(grid: Grid) -> np.ndarray:
    """Discrete delta kernel, the unit of composition."""
    return np.eye(grid.total_points, dtype=complex) / grid.cell_volume


def compose(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """(a o b)(x, y) = int a(x, z) b(z, y) dz."""
    a = check_kernel(a, grid)
    b = check_kernel(b, grid)
    return grid.cell_volume * (a @ b)


def hs_norm(a: np.ndarray, grid: Grid) -> float:
    """Hilbert-Schmidt norm (int int |a|^2)^(1/2)."""
    return float(grid.cell_volume * np.linalg.norm(a))


def op_norm(a: np.ndarray, grid: Grid, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Operator norm of the kernel by power iteration on A^* A."""
    op = grid.cell_volume * check_kernel(a, grid)
    n = op.shape[0]
    # deterministic start vector with generic overlaps
    x = (1.0 + np.arange(n) / n + 0.1j * np.cos(np.arange(n))).astype(complex)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = op.conj().T @ (op @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = math.sqrt(ny)
        x = y / ny
        if abs(new - estimate) <= tol * max(new, 1e-300):
            return new
        estimate = new
    return estimate


def takagi(a: np.ndarray, grid: Grid, cluster_tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Takagi factorization of the operator of a symmetric kernel.

    Returns a unitary U and sigma >= 0 (descending) with
    ``cell_volume * a == U @ diag(sigma) @ U.T``.
    """
    a = check_kernel(a, grid)
    check_symmetry(a, "symmetric", tol=1e-10)
    return takagi_matrix(grid.cell_volume * a, cluster_tol)


def takagi_matrix(op: np.ndarray, cluster_tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Takagi factorization of a complex symmetric matrix.

    SVD first, then each cluster of nearly equal singular values is
    re-diagonalized exactly through the real symmetric embedding
    [[Re S, Im S], [Im S, -Re S]] of its compressed block S.
    """
    op = np.asarray(op, dtype=complex)
    op = 0.5 * (op + op.T)
    n = op.shape[0]
    v, s, _ = np.linalg.svd(op)
    smax = s[0] if n else 0.0
    if smax == 0.0:
        return np.eye(n, dtype=complex), np.zeros(n)
    zero = s <= 1e-13 * smax
    u = np.zeros((n, n), dtype=complex)
    sigma = np.zeros(n)
    start = 0
    while start < n:
        stop = start + 1
        if zero[start]:
            stop = n
        else:
            while stop < n and not zero[stop] and s[stop - 1] - s[stop] <= cluster_tol * smax:
                stop += 1
        vc = v[:, start:stop]
        if zero[start]:
            u[:, start:stop] = vc
        else:
            small = vc.conj().T @ op @ vc.conj()
            w, z = _takagi_small(small)
            u[:, start:stop] = vc @ z
            sigma[start:stop] = w
        start = stop
    order = np.argsort(-sigma, kind="stable")
    return u[:, order], sigma[order]


def _takagi_small(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = s.shape[0]
    if m == 1:
        val = s[0, 0]
        return np.array([abs(val)]), np.array([[np.exp(0.5j * np.angle(val))]])
    x, y = s.real, s.imag
    big = np.block([[x, y], [y, -x]])
    w, q = np.linalg.eigh(big)
    w, q = w[m:], q[:, m:]
    z = (q[:m] + 1j * q[m:]) * math.sqrt(2.0)
    # polish orthonormality; the positive half of the spectrum is well separated here
    z, r = np.linalg.qr(z)
    z = z * np.exp(1j * np.angle(np.diag(r)))
    return w, z


def _from_takagi(u: np.ndarray, values: np.ndarray, grid: Grid, conj_left: bool = False) -> np.ndarray:
    left = u.conj() if conj_left else u
    return (left * values) @ u.T / grid.cell_volume


def sh_ch_from_k(k: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """sh(k) and ch(k) as kernels; ch = delta + p with p self-adjoint."""
    u, sigma = takagi(k, grid)
    sh = _from_takagi(u, np.sinh(sigma), grid)
    ch = _from_takagi(u, np.cosh(sigma), grid, conj_left=True)
    return sh, ch


def zeta_from_k(k: np.ndarray, grid: Grid) -> np.ndarray:
    """zeta = chbar^-1 o sh, with operator norm tanh(||k||) < 1."""
    u, sigma = takagi(k, grid)
    return _from_takagi(u, np.tanh(sigma), grid)


def k_from_zeta(zeta: np.ndarray, grid: Grid) -> np.ndarray:
    u, t = takagi(zeta, grid)
    if t.size and t[0] >= 1.0 - CHART_MARGIN:
        raise ChartError(f"||zeta||_op = {t[0]:.12f} is not below 1 - {CHART_MARGIN:g}")
    return _from_takagi(u, np.arctanh(t), grid)


def sh_ch_series(k: np.ndarray, grid: Grid, tol: float = 1e-16, max_terms: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """sh = sum k (kbar k)^j / (2j+1)!, ch = sum (kbar k)^j / (2j)!. Reference method."""
    kop = grid.cell_volume * check_kernel(k, grid)
    kk = kop.conj() @ kop
    n = kop.shape[0]
    term = np.eye(n, dtype=complex)
    sh = kop.copy()
    ch = np.eye(n, dtype=complex)
    for j in range(1, max_terms):
        term = term @ kk / ((2 * j) * (2 * j - 1))
        ch_term = term
        sh_term = kop @ term / (2 * j + 1)
        ch = ch + ch_term
        sh = sh + sh_term
        if np.linalg.norm(ch_term) + np.linalg.norm(sh_term) < tol * np.linalg.norm(ch):
            break
    else:
        raise ConvergenceError("sh/ch series did not converge")
    return sh / grid.cell_volume, ch / grid.cell_volume


def hermitian_inverse_sqrt(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A^(-1/2) for Hermitian positive definite A, with its eigensystem."""
    lam, q = np.linalg.eigh(0.5 * (a + a.conj().T))
    if lam[0] <= 0:
        raise ChartError("matrix is not positive definite")
    c = lam**-0.5
    return (q * c) @ q.conj().T, lam, q


class PairState:
    """Pair kernel parametrized by zeta, with derived kernels cached.

    ch = (1 - zetabar zeta)^(-1/2) and sh = zeta o ch in operator form;
    both coincide with the Takagi-based sh(k), ch(k) for k = k(zeta).
    """

    def __init__(self, zeta: np.ndarray, grid: Grid, check: bool = True):
        zeta = check_kernel(zeta, grid)
        if check:
            check_symmetry(zeta, "symmetric", tol=1e-9)
        self.zeta = np.asarray(zeta, dtype=complex)
        self.grid = grid
        if check:
            norm = op_norm(self.zeta, grid)
            if norm >= 1.0 - CHART_MARGIN:
                raise ChartError(f"||zeta||_op = {norm:.12f} is not below 1 - {CHART_MARGIN:g}")

    @classmethod
    def from_k(cls, k: np.ndarray, grid: Grid) -> "PairState":
        return cls(zeta_from_k(k, grid), grid)

    @classmethod
    def vacuum(cls, grid: Grid) -> "PairState":
        n = grid.total_points
        return cls(np.zeros((n, n), dtype=complex), grid, check=False)

    @property
    def w(self) -> float:
        return self.grid.cell_volume

    @cached_property
    def zeta_op(self) -> np.ndarray:
        return self.w * self.zeta

    @cached_property
    def _gap(self) -> np.ndarray:
        """1 - zetabar zeta as a matrix."""
        z = self.zeta_op
        return np.eye(z.shape[0]) - z.conj() @ z

    @cached_property
    def _gap_inverse(self) -> np.ndarray:
        inv = np.linalg.inv(self._gap)
        return 0.5 * (inv + inv.conj().T)

    @cached_property
    def _ch_eig(self):
        return hermitian_inverse_sqrt(self._gap)

    @cached_property
    def ch_op(self) -> np.ndarray:
        return self._ch_eig[0]

    @cached_property
    def sh_op(self) -> np.ndarray:
        sh = self.zeta_op @ self.ch_op
        return 0.5 * (sh + sh.T)

    @property
    def sh(self) -> np.ndarray:
        return self.sh_op / self.w

    @property
    def ch(self) -> np.ndarray:
        return self.ch_op / self.w

    @cached_property
    def sh2k(self) -> np.ndarray:
        """sh(2k) = 2 sh o ch = 2 zeta (1 - zetabar zeta)^-1."""
        s = 2.0 * self.zeta_op @ self._gap_inverse
        return 0.5 * (s + s.T) / self.w

    @cached_property
    def ch2k(self) -> np.ndarray:
        """ch(2k) = delta + 2 shbar o sh."""
        return (2.0 * self._gap_inverse - np.eye(self.zeta.shape[0])) / self.w

    @cached_property
    def omega_p(self) -> np.ndarray:
        """shbar o sh = (1 - zetabar zeta)^-1 - delta, self-adjoint."""
        return (self._gap_inverse - np.eye(self.zeta.shape[0])) / self.w

    @cached_property
    def rho_p(self) -> np.ndarray:
        """Pair density (sh o shbar)(x, x)."""
        return np.real(np.diag(self.omega_p)).copy()

    @cached_property
    def k(self) -> np.ndarray:
        return k_from_zeta(self.zeta, self.grid)

    def op_norm(self) -> float:
        return op_norm(self.zeta, self.grid)

    def tangent(self, dzeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Exact derivatives (dsh, dch) along a direction dzeta (kernels)."""
        w = self.w
        dz = w * check_kernel(dzeta, self.grid)
        z = self.zeta_op
        dgap = -(dz.conj() @ z + z.conj() @ dz)
        inv = self._gap_inverse
        # ch^2 = gap^-1, so ch dch + dch ch = -gap^-1 dgap gap^-1
        rhs = -inv @ dgap @ inv
        _, lam, q = self._ch_eig
        c = lam**-0.5
        b = q.conj().T @ rhs @ q
        dch = q @ (b / (c[:, None] + c[None, :])) @ q.conj().T
        dsh = dz @ self.ch_op + z @ dch
        return 0.5 * (dsh + dsh.T) / w, dch / w


def doubled_kernels(pair: PairState) -> tuple[np.ndarray, np.ndarray]:
    """(sh(2k), ch(2k)) of the pair state."""
    return pair.sh2k, pair.ch2k


@dataclass(frozen=True)
class BogoliubovMatrix:
    """Block kernel [[top_left, top_right], [bottom_left, bottom_right]]."""

    top_left: np.ndarray
    top_right: np.ndarray
    bottom_left: np.ndarray
    bottom_right: np.ndarray
    grid: Grid

    def operator(self) -> np.ndarray:
        w = self.grid.cell_volume
        return w * np.block([[self.top_left, self.top_right], [self.bottom_left, self.bottom_right]])

    @classmethod
    def from_operator(cls, op: np.ndarray, grid: Grid) -> "BogoliubovMatrix":
        n = grid.total_points
        w = grid.cell_volume
        return cls(op[:n, :n] / w, op[:n, n:] / w, op[n:, :n] / w, op[n:, n:] / w, grid)


def bogoliubov_matrix(k: np.ndarray, grid: Grid) -> BogoliubovMatrix:
    """e^K = [[ch, shbar], [sh, chbar]] for K = [[0, kbar], [k, 0]]."""
    sh, ch = sh_ch_from_k(k, grid)
    return BogoliubovMatrix(ch, sh.conj(), sh, ch.conj(), grid)


def bogoliubov_exponential(k: np.ndarray, grid: Grid) -> BogoliubovMatrix:
    """e^K by a dense matrix exponential. Reference method."""
    w = grid.cell_volume
    kop = w * check_kernel(k, grid)
    n = kop.shape[0]
    big = np.block([[np.zeros((n, n)), kop.conj()], [kop, np.zeros((n, n))]])
    return BogoliubovMatrix.from_operator(scipy.linalg.expm(big), grid)


def bogoliubov_from_zeta(zeta: np.ndarray, grid: Grid) -> BogoliubovMatrix:
    """E_zeta = [[1, zetabar], [0, 1]] diag((1 - zetabar zeta)^(1/2), (1 - zeta zetabar)^(-1/2)) [[1, 0], [zeta, 1]]."""
    w = grid.cell_volume
    z = w * check_kernel(zeta, grid)
    n = z.shape[0]
    eye = np.eye(n)
    upper = np.block([[eye, z.conj()], [np.zeros((n, n)), eye]])
    lower = np.block([[eye, np.zeros((n, n))], [z, eye]])
    a = scipy.linalg.sqrtm(eye - z.conj() @ z)
    b, _, _ = hermitian_inverse_sqrt(eye - z @ z.conj())
    middle = np.block([[a, np.zeros((n, n))], [np.zeros((n, n)), b]])
    return BogoliubovMatrix.from_operator(upper @ middle @ lower, grid)


def check_group_properties(e: BogoliubovMatrix) -> dict[str, float]:
    """Residuals of sigma-reality, U(n, n) membership and the symplectic identity."""
    op = e.operator()
    n = op.shape[0] // 2
    p, q = op[:n, :n], op[:n, n:]
    eye = np.eye(n)
    zero = np.zeros((n, n))
    j = np.block([[eye, zero], [zero, -eye]])
    omega = np.block([[zero, eye], [-eye, zero]])
    sigma_real = np.linalg.norm(op[n:, n:] - p.conj()) + np.linalg.norm(op[n:, :n] - q.conj())
    return {
        "sigma_reality": float(sigma_real),
        "unitary_nn": float(np.linalg.norm(op.conj().T @ j @ op - j)),
        "symplectic": float(np.linalg.norm(op.T @ omega @ op - omega)),
    }


def write_snapshot(path: str | Path, entries: np.ndarray, grid: Grid, kind: str) -> None:
    """Write a kernel (or field) in the little-endian PAIREX01 binary format."""
    code = KIND_CODES[kind]
    data = np.asarray(entries, dtype=np.complex128)
    expected = (grid.total_points,) if kind == "field" else (grid.total_points, grid.total_points)
    if data.shape != expected:
        raise GridMismatchError(f"entries of shape {data.shape}, expected {expected}")
    header = SNAPSHOT_MAGIC + struct.pack("<IIId", grid.dim, grid.points_per_axis, code, grid.box_length)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data).astype("<c16").tobytes())


def read_snapshot(path: str | Path) -> tuple[np.ndarray, Grid, str]:
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    dim, m, code, length = struct.unpack("<IIId", raw[8:28])
    kind = {v: k for k, v in KIND_CODES.items()}[code]
    grid = Grid(dim, m, length)
    data = np.frombuffer(raw[28:], dtype="<c16").astype(np.complex128)
    shape = (grid.total_points,) if kind == "field" else (grid.total_points, grid.total_points)
    return data.reshape(shape), grid, kind
