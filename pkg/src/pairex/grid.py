"""Periodic grids, spectral derivatives and the scaled pair potential.

Fields are complex arrays of length ``grid.total_points`` and kernels are
``(total_points, total_points)`` arrays of point values, both in the
row-major order of the ``dim``-dimensional lattice. Integrals are
quadrature sums weighted by ``grid.cell_volume``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DiscretizationError, GridMismatchError

# Minimal number of grid cells the scaled potential must span.
MIN_SUPPORT_CELLS = 3.0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus [0, L)^dim."""

    dim: int
    points_per_axis: int
    box_length: float

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def total_points(self) -> int:
        return self.points_per_axis**self.dim

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers 2*pi*n/L along one axis, in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Array of shape (total_points, dim) with the wavevector of each mode."""
        mesh = np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Fourier multiplier -|xi|^2 of the spectral Laplacian, flattened."""
        return -np.sum(self.wavevectors**2, axis=-1)

    @cached_property
    def derivative_symbols(self) -> np.ndarray:
        """Multipliers i*xi_j of the first derivatives, Nyquist mode set to zero."""
        xi = self.wavevectors.copy()
        nyquist = np.isclose(np.abs(xi), np.pi / self.spacing)
        xi[nyquist] = 0.0
        return 1j * xi.T

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Array of shape (total_points, dim) with the lattice points j*h."""
        axis = np.arange(self.points_per_axis) * self.spacing
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def origin_distance(self) -> np.ndarray:
        """Periodic distance from each lattice point to the origin."""
        x = self.coordinates
        wrapped = np.minimum(x, self.box_length - x)
        return np.sqrt(np.sum(wrapped**2, axis=-1))

    @cached_property
    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of the spectral Laplacian acting on point values."""
        return self.apply_laplacian(np.eye(self.total_points, dtype=complex))

    def transform(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Unnormalized DFT along one flattened lattice index."""
        return self._fft(values, axis, np.fft.fftn)

    def inverse_transform(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        return self._fft(values, axis, np.fft.ifftn)

    def apply_multiplier(self, values: np.ndarray, symbol: np.ndarray, axis: int = 0) -> np.ndarray:
        """Apply a Fourier multiplier along the given flattened index."""
        hat = self.transform(values, axis)
        shape = [1] * hat.ndim
        shape[axis] = self.total_points
        return self.inverse_transform(hat * symbol.reshape(shape), axis)

    def apply_laplacian(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        return self.apply_multiplier(values, self.laplacian_symbol, axis)

    def gradient(self, values: np.ndarray, component: int, axis: int = 0) -> np.ndarray:
        return self.apply_multiplier(values, self.derivative_symbols[component], axis)

    def _fft(self, values, axis, func):
        values = np.asarray(values)
        if values.shape[axis] != self.total_points:
            raise GridMismatchError(
                f"axis {axis} has length {values.shape[axis]}, grid has {self.total_points} points"
            )
        moved = np.moveaxis(values, axis, 0)
        rest = moved.shape[1:]
        cube = moved.reshape(self.shape + rest)
        out = func(cube, axes=tuple(range(self.dim)))
        return np.moveaxis(out.reshape((self.total_points,) + rest), 0, axis)


def make_grid(dim: int, points_per_axis: int, box_length: float) -> Grid:
    """Build a periodic grid. The number of points per axis must be even."""
    if dim not in (1, 2, 3):
        raise DiscretizationError(f"dim must be 1, 2 or 3, got {dim}")
    if points_per_axis < 2 or points_per_axis % 2:
        raise DiscretizationError(f"points_per_axis must be even and >= 2, got {points_per_axis}")
    if not box_length > 0 or not math.isfinite(box_length):
        raise DiscretizationError(f"box_length must be positive, got {box_length}")
    return Grid(int(dim), int(points_per_axis), float(box_length))


def check_field(values: np.ndarray, grid: Grid) -> np.ndarray:
    values = np.asarray(values)
    if values.shape != (grid.total_points,):
        raise GridMismatchError(f"field of shape {values.shape} does not live on a grid of {grid.total_points} points")
    return values


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> complex:
    """Quadrature inner product, conjugate-linear in the first slot."""
    f = check_field(f, grid)
    g = check_field(g, grid)
    return complex(grid.cell_volume * np.vdot(f, g))


def norm(f: np.ndarray, grid: Grid) -> float:
    return math.sqrt(max(inner(f, f, grid).real, 0.0))


@dataclass(frozen=True)
class RadialProfile:
    """Smooth nonnegative radial bump v(r) with a nominal support radius."""

    name: str
    width: float
    amplitude: float = 1.0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.name == "gaussian":
            return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)
        if self.name == "bump":
            s = np.clip(r / self.width, 0.0, 1.0)
            out = np.zeros_like(s)
            inside = s < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return self.amplitude * out
        raise DiscretizationError(f"unknown profile '{self.name}'")

    @property
    def support_radius(self) -> float:
        # For the Gaussian, the radius beyond which it is below e^-8 of its peak.
        return 4.0 * self.width if self.name == "gaussian" else self.width


PROFILES = ("gaussian", "bump")


@dataclass(frozen=True)
class Potential:
    """Samples of v_N(x) = N^(dim*beta) v(N^beta x) on the torus."""

    samples: np.ndarray
    N: float
    beta: float
    grid: Grid

    @cached_property
    def pair_matrix(self) -> np.ndarray:
        """Matrix v_N(x_i - x_j)."""
        g = self.grid
        idx = np.indices(g.shape).reshape(g.dim, -1).T
        diff = (idx[:, None, :] - idx[None, :, :]) % g.points_per_axis
        flat = np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), g.shape)
        return self.samples[flat]

    @cached_property
    def _samples_hat(self) -> np.ndarray:
        return self.grid.transform(self.samples.astype(complex))

    def convolve(self, density: np.ndarray) -> np.ndarray:
        """(v_N * rho)(x) = int v_N(x - y) rho(y) dy by FFT."""
        g = self.grid
        out = g.inverse_transform(self._samples_hat * g.transform(density)) * g.cell_volume
        return out.real if np.isrealobj(density) else out

    @property
    def mass(self) -> float:
        return float(np.sum(self.samples) * self.grid.cell_volume)


def make_potential(
    base_profile: RadialProfile | Callable[[np.ndarray], np.ndarray],
    N: float,
    beta: float,
    grid: Grid,
) -> Potential:
    """Sample the scaled, periodized potential N^(d beta) v(N^beta |x|)."""
    if not N >= 1:
        raise DiscretizationError(f"N must be >= 1, got {N}")
    if not 0.0 <= beta <= 1.0:
        raise DiscretizationError(f"beta must lie in [0, 1], got {beta}")
    scale = float(N) ** beta
    radius = getattr(base_profile, "support_radius", None)
    if radius is not None:
        scaled_radius = radius / scale
        if scaled_radius > grid.box_length / 2:
            raise DiscretizationError(
                f"potential support radius {scaled_radius:.4g} exceeds half the box {grid.box_length / 2:.4g}"
            )
        if beta > 0 and 2 * scaled_radius < MIN_SUPPORT_CELLS * grid.spacing:
            raise DiscretizationError(
                f"beta = {beta} shrinks the potential support to {2 * scaled_radius:.3g}, "
                f"below {MIN_SUPPORT_CELLS:g} grid cells of size {grid.spacing:.3g}"
            )
    base = np.asarray(base_profile(grid.origin_distance), dtype=float)
    if np.any(base < 0):
        raise DiscretizationError("base profile must be nonnegative")
    samples = scale**grid.dim * np.asarray(base_profile(scale * grid.origin_distance), dtype=float)
    if np.any(samples < 0):
        raise DiscretizationError("base profile must be nonnegative")
    return Potential(samples, float(N), float(beta), grid)
