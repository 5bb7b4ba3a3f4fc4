"""Truncated bosonic Fock space on a small lattice, used as an exact oracle.

Site j carries the mode a_j = sqrt(h^d) a(x_j). The basis holds all
occupation vectors with total particle number at most ``n_max``; operators
are scipy sparse matrices on that basis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import ConvergenceError, FockDimensionError, TruncationWarning
from .grid import Grid, Potential
from .kernelalg import zeta_from_k

MAX_DIM = 5_000_000
DENSE_EXPM_DIM = 2000
TAIL_WARN = 1e-8


def fock_dimension(sites: int, n_max: int) -> int:
    """sum_{n <= n_max} C(n + M - 1, M - 1) = C(n_max + M, M)."""
    return math.comb(n_max + sites, sites)


@dataclass
class FockSpace:
    sites: int
    n_max: int
    cell_volume: float
    occupations: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    @cached_property
    def sector(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    @cached_property
    def _keys(self) -> np.ndarray:
        base = self.n_max + 1
        return self.occupations @ (base ** np.arange(self.sites, dtype=np.int64))

    @cached_property
    def _order(self) -> np.ndarray:
        return np.argsort(self._keys)

    def lookup(self, occupations: np.ndarray) -> np.ndarray:
        """Basis indices of occupation vectors (rows); -1 where absent."""
        occ = np.atleast_2d(occupations)
        base = self.n_max + 1
        keys = occ @ (base ** np.arange(self.sites, dtype=np.int64))
        valid = np.all(occ >= 0, axis=1) & (occ.sum(axis=1) <= self.n_max)
        sorted_keys = self._keys[self._order]
        pos = np.clip(np.searchsorted(sorted_keys, keys), 0, self.dim - 1)
        found = valid & (sorted_keys[pos] == keys)
        return np.where(found, self._order[pos], -1)

    def index(self, occupation) -> int:
        i = int(self.lookup(np.asarray(occupation))[0])
        if i < 0:
            raise KeyError(f"occupation {tuple(occupation)} is not in the truncated basis")
        return i

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def sector_mass(self, psi: np.ndarray) -> np.ndarray:
        return np.bincount(self.sector, weights=np.abs(psi) ** 2, minlength=self.n_max + 1)

    def tail_mass(self, psi: np.ndarray) -> float:
        """Probability in the two highest retained sectors."""
        return float(self.sector_mass(psi)[-2:].sum())

    @cached_property
    def _ladders(self) -> list[sp.csr_matrix]:
        out = []
        for j in range(self.sites):
            src = np.nonzero(self.occupations[:, j] > 0)[0]
            target = self.occupations[src].copy()
            target[:, j] -= 1
            rows = self.lookup(target)
            vals = np.sqrt(self.occupations[src, j].astype(float))
            out.append(sp.csr_matrix((vals, (rows, src)), shape=(self.dim, self.dim)))
        return out

    def annihilation(self, j: int) -> sp.csr_matrix:
        return self._ladders[j]

    def creation(self, j: int) -> sp.csr_matrix:
        return self._ladders[j].T.tocsr()

    @cached_property
    def number_operator(self) -> sp.csr_matrix:
        return sp.diags(self.sector.astype(float)).tocsr()


def build_space(sites: int, n_max: int, cell_volume: float) -> FockSpace:
    if sites < 2 or n_max < 1:
        raise ValueError("need at least 2 sites and n_max >= 1")
    dim = fock_dimension(sites, n_max)
    if dim > MAX_DIM:
        raise FockDimensionError(f"Fock dimension {dim} exceeds {MAX_DIM}")
    occ = np.zeros((dim, sites), dtype=np.int64)
    row = 0
    for n in range(n_max + 1):
        for combo in combinations_with_replacement(range(sites), n):
            np.add.at(occ[row], list(combo), 1)
            row += 1
    return FockSpace(sites, n_max, float(cell_volume), occ)


def ladder(space: FockSpace, j: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    return space.annihilation(j), space.creation(j)


def _pair_sum(space: FockSpace, coeff: np.ndarray, create: bool) -> sp.csr_matrix:
    """sum_jl coeff_jl a_j a_l (or a*_j a*_l)."""
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    op = space.creation if create else space.annihilation
    for j in range(space.sites):
        for l in range(space.sites):
            if coeff[j, l] != 0:
                out = out + coeff[j, l] * (op(j) @ op(l))
    return out


def _hopping(space: FockSpace, coeff: np.ndarray) -> sp.csr_matrix:
    """sum_jl coeff_jl a*_j a_l."""
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.sites):
        for l in range(space.sites):
            if coeff[j, l] != 0:
                out = out + coeff[j, l] * (space.creation(j) @ space.annihilation(l))
    return out


def weyl_generator(space: FockSpace, phi: np.ndarray) -> sp.csr_matrix:
    """A(phi) = sum sqrt(h^d) (phibar_j a_j - phi_j a*_j)."""
    s = math.sqrt(space.cell_volume)
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.sites):
        out = out + s * (np.conj(phi[j]) * space.annihilation(j) - phi[j] * space.creation(j))
    return out


def squeeze_generator(space: FockSpace, k: np.ndarray) -> sp.csr_matrix:
    """B(k) = (1/2) sum h^d (kbar_jl a_j a_l - k_jl a*_j a*_l)."""
    w = space.cell_volume
    return 0.5 * w * (_pair_sum(space, np.conj(k), False) - _pair_sum(space, k, True))


@dataclass(frozen=True)
class QuadraticGenerator:
    """L = [[d, l], [k, -d^T]] with kernel blocks on the lattice."""

    d: np.ndarray
    k: np.ndarray
    l: np.ndarray

    def matrix(self, cell_volume: float) -> np.ndarray:
        """Block operator matrix (kernels scaled by the cell volume)."""
        return cell_volume * np.block([[self.d, self.l], [self.k, -self.d.T]])

    @classmethod
    def from_matrix(cls, mat: np.ndarray, cell_volume: float) -> "QuadraticGenerator":
        n = mat.shape[0] // 2
        return cls(mat[:n, :n] / cell_volume, mat[n:, :n] / cell_volume, mat[:n, n:] / cell_volume)

    def bracket(self, other: "QuadraticGenerator", cell_volume: float) -> "QuadraticGenerator":
        a, b = self.matrix(cell_volume), other.matrix(cell_volume)
        return QuadraticGenerator.from_matrix(a @ b - b @ a, cell_volume)


def quadratic_rep(space: FockSpace, gen: QuadraticGenerator) -> sp.csr_matrix:
    """I(L) = -(1/2) int {d(x,y) a_x a*_y + d(y,x) a*_x a_y + k a*_x a*_y - l a_x a_y}.

    Built in normal order, -sum D_lj a*_j a_l - tr(D)/2 - (1/2) sum K a*a* + (1/2) sum L a a,
    with D, K, L the kernels times the cell volume, so that truncation only
    affects the highest sectors.
    """
    w = space.cell_volume
    d, k, l = w * gen.d, w * gen.k, w * gen.l
    out = -_hopping(space, d.T) - 0.5 * np.trace(d) * sp.identity(space.dim, dtype=complex, format="csr")
    out = out - 0.5 * _pair_sum(space, k, True) + 0.5 * _pair_sum(space, l, False)
    return out.tocsr()


def fock_hamiltonian(space: FockSpace, grid: Grid, potential: Potential, N: float) -> sp.csr_matrix:
    """H = sum D_jl a*_j a_l - V/N with D the spectral Laplacian and
    V = (1/2) sum v_N(x_j - x_l) a*_j a*_l a_l a_j, diagonal in occupations.
    """
    if grid.total_points != space.sites:
        raise ValueError("the Fock lattice must coincide with the grid")
    lap = grid.laplacian_matrix.real
    h1 = _hopping(space, lap)
    v = potential.pair_matrix
    occ = space.occupations.astype(float)
    # a*_j a*_l a_l a_j = n_j n_l - delta_jl n_j
    diag = 0.5 * (np.einsum("sj,jl,sl->s", occ, v, occ) - occ @ np.diag(v))
    return (h1 - sp.diags(diag / N)).tocsr()


def interaction_operator(space: FockSpace, potential: Potential) -> sp.csr_matrix:
    """V from explicit products of ladder matrices. Reference construction."""
    v = potential.pair_matrix
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.sites):
        for l in range(space.sites):
            aj, al = space.annihilation(j), space.annihilation(l)
            out = out + 0.5 * v[j, l] * (space.creation(j) @ space.creation(l) @ al @ aj)
    return out


def exact_evolve(psi0: np.ndarray, t: float, hamiltonian: sp.spmatrix) -> np.ndarray:
    """e^{itH} psi0; dense scaling-and-squaring for small spaces, expm_multiply otherwise."""
    if t == 0:
        return np.array(psi0, dtype=complex)
    if hamiltonian.shape[0] <= DENSE_EXPM_DIM:
        out = scipy.linalg.expm(1j * t * hamiltonian.toarray()) @ psi0
    else:
        out = expm_multiply(1j * t * hamiltonian.tocsc(), psi0)
    n0, n1 = np.linalg.norm(psi0), np.linalg.norm(out)
    if not np.isfinite(n1) or abs(n1 - n0) > 1e-10 * max(n0, 1.0):
        raise ConvergenceError(f"norm drifted from {n0} to {n1} during evolution")
    return out


def apply_generator_exp(generator: sp.spmatrix, psi: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """e^{scale * G} psi for a (truncated) generator G."""
    return expm_multiply(scale * generator.tocsc(), psi)


def _nilpotent_exp(op: sp.spmatrix, psi: np.ndarray, max_terms: int) -> np.ndarray:
    out = psi.copy()
    term = psi.copy()
    for n in range(1, max_terms + 1):
        term = op @ term / n
        if not np.any(term):
            break
        out = out + term
    return out


def apply_weyl(space: FockSpace, phi: np.ndarray, scale: float, psi: np.ndarray) -> np.ndarray:
    """e^{-scale A(phi)} psi through the normal-ordered factorization
    e^{-s^2 ||phi||^2 / 2} e^{s a*(phi)} e^{-s a(phi)}, exact on every retained sector.
    """
    rw = math.sqrt(space.cell_volume)
    lower = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    raise_ = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.sites):
        lower = lower + rw * np.conj(phi[j]) * space.annihilation(j)
        raise_ = raise_ + rw * phi[j] * space.creation(j)
    norm2 = space.cell_volume * float(np.sum(np.abs(phi) ** 2))
    out = _nilpotent_exp(-scale * lower, np.asarray(psi, dtype=complex), space.n_max)
    out = _nilpotent_exp(scale * raise_, out, space.n_max)
    return math.exp(-0.5 * scale**2 * norm2) * out


def squeezed_vacuum(space: FockSpace, k: np.ndarray, grid: Grid) -> np.ndarray:
    """e^{-B(k)}|0> = det(1 - zetabar zeta)^(1/4) exp((1/2) sum zeta_jl a*_j a*_l)|0>, exact per sector."""
    z = grid.cell_volume * zeta_from_k(k, grid)
    pair = 0.5 * _pair_sum(space, z, True)
    det = np.linalg.det(np.eye(space.sites) - z.conj() @ z).real
    return det**0.25 * _nilpotent_exp(pair, space.vacuum(), space.n_max // 2 + 1)


def coherent_state(space: FockSpace, phi: np.ndarray, N: float) -> np.ndarray:
    """e^{-sqrt(N) A(phi)}|0>."""
    return apply_weyl(space, phi, math.sqrt(N), space.vacuum())


def check_tail(space: FockSpace, psi: np.ndarray, label: str = "state") -> float:
    tail = space.tail_mass(psi) / max(np.vdot(psi, psi).real, 1e-300)
    if tail > TAIL_WARN:
        warnings.warn(f"{label}: mass {tail:.2e} in the top two sectors; raise n_max", TruncationWarning, stacklevel=3)
    return tail


def approx_state(space: FockSpace, grid: Grid, phi: np.ndarray, k: np.ndarray, N: float) -> np.ndarray:
    """e^{-sqrt(N) A(phi)} e^{-B(k)}|0>."""
    psi = apply_weyl(space, phi, math.sqrt(N), squeezed_vacuum(space, k, grid))
    check_tail(space, psi, "approximate state")
    return psi


def fidelity(psi1: np.ndarray, psi2: np.ndarray) -> float:
    """|<psi1, psi2>| / (||psi1|| ||psi2||), insensitive to global phases."""
    n = np.linalg.norm(psi1) * np.linalg.norm(psi2)
    return float(min(abs(np.vdot(psi1, psi2)) / n, 1.0))


def fidelity_error(f: float) -> float:
    """Distance between unit vectors with overlap modulus f, after optimal phase."""
    return math.sqrt(max(2.0 - 2.0 * f, 0.0))


def sector_function(space: FockSpace, psi: np.ndarray, n: int) -> np.ndarray:
    """Symmetric n-particle function (point values) for n = 1, 2 from occupation coefficients.

    The coefficient of an occupation vector is h^(dn/2) sqrt(n!/prod n_j!) psi_n(x).
    """
    w = space.cell_volume
    m = space.sites
    if n == 1:
        out = np.zeros(m, dtype=complex)
        for j in range(m):
            occ = np.zeros(m, dtype=np.int64)
            occ[j] = 1
            out[j] = psi[space.index(occ)] / math.sqrt(w)
        return out
    if n == 2:
        out = np.zeros((m, m), dtype=complex)
        for j in range(m):
            for l in range(j, m):
                occ = np.zeros(m, dtype=np.int64)
                occ[j] += 1
                occ[l] += 1
                c = psi[space.index(occ)]
                val = c / w if j == l else c / (math.sqrt(2.0) * w)
                out[j, l] = out[l, j] = val
        return out
    raise ValueError("only one- and two-particle sectors are converted to functions")


def sector_coefficients(space: FockSpace, psi: np.ndarray, n: int) -> np.ndarray:
    return psi[space.sector == n]


@dataclass
class HredComponents:
    x0: complex
    x1: np.ndarray
    x2: np.ndarray
    sector_norms: np.ndarray  # Fock norm of each sector of H_red|0>
    tail_mass: float

    @property
    def x3_norm(self) -> float:
        return float(self.sector_norms[3])

    @property
    def x4_norm(self) -> float:
        return float(self.sector_norms[4])


def numeric_hred_vacuum(
    space: FockSpace,
    grid: Grid,
    hamiltonian: sp.spmatrix,
    N: float,
    phi: np.ndarray,
    dphi: np.ndarray,
    k: np.ndarray,
    dk: np.ndarray,
    eps: float = 1e-5,
) -> HredComponents:
    """H_red|0> assembled from exact truncated exponentials, time derivatives by central differences.

    H_red = (1/i)(d_t e^B) e^-B + e^B [(1/i)(d_t e^{sqrt N A}) e^{-sqrt N A} + e^{sqrt N A} H e^{-sqrt N A}] e^-B.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("finite-difference step must lie in [1e-6, 1e-4]")
    sn = math.sqrt(N)
    w0 = squeezed_vacuum(space, k, grid)
    bp = squeeze_generator(space, k + eps * dk)
    bm = squeeze_generator(space, k - eps * dk)
    t1 = (apply_generator_exp(bp, w0) - apply_generator_exp(bm, w0)) / (2j * eps)
    w1 = apply_weyl(space, phi, sn, w0)
    t2 = (apply_weyl(space, phi + eps * dphi, -sn, w1) - apply_weyl(space, phi - eps * dphi, -sn, w1)) / (2j * eps)
    t3 = apply_weyl(space, phi, -sn, hamiltonian @ w1)
    res = t1 + apply_generator_exp(squeeze_generator(space, k), t2 + t3)
    tail = check_tail(space, w1, "H_red input state")
    norms = np.sqrt(space.sector_mass(res))
    return HredComponents(
        complex(res[0]), sector_function(space, res, 1), sector_function(space, res, 2), norms, tail
    )
