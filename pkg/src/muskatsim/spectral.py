"""Periodic grids, Fourier transforms and Fourier-multiplier operators.

Fourier convention (per direction, period 2π)::

    f(x) = sum_k fhat(k) exp(i k x),    fhat(k) = (1/2π) ∫ f(x) exp(-i k x) dx

Collocation points are x_j = -π + 2πj/n.  The Nyquist mode is dropped on
every forward transform, so odd symbols (Hilbert, ∂) always map real fields to
real fields.

Two layers live here.  `PeriodicGrid` carries array-level kernels on the
real-transform (rfft) layout that the model code uses in its hot loops.  The
`Field` / `Spectrum` functions below wrap them for library users and tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (
    DimensionError,
    GridMismatchError,
    InvalidInputError,
    UnsupportedPowerError,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the 1-torus or 2-torus, period 2π per direction.

    ``PeriodicGrid(64)`` is a 1D grid, ``PeriodicGrid((64, 32))`` a 2D grid
    with 64 points along x1 and 32 along x2.
    """

    n: tuple[int, ...]

    def __post_init__(self):
        n = self.n
        if isinstance(n, (int, np.integer)):
            n = (int(n),)
        n = tuple(int(v) for v in n)
        if len(n) not in (1, 2):
            raise DimensionError(f"grid dimension must be 1 or 2, got {len(n)}")
        for v in n:
            if v < 8 or v % 2:
                raise InvalidInputError(f"points per direction must be even and >= 8, got {v}")
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def period(self) -> float:
        return TWO_PI

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @cached_property
    def points(self) -> tuple[np.ndarray, ...]:
        return tuple(-np.pi + TWO_PI * np.arange(m) / m for m in self.n)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.points, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer dual set per direction, in FFT order (Nyquist index is -n/2)."""
        return tuple(np.fft.fftfreq(m, 1.0 / m).round().astype(int) for m in self.n)

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod([TWO_PI / m for m in self.n]))

    # ---- real-transform layout -------------------------------------------

    @cached_property
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @cached_property
    def rwavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers broadcast over the rfft layout (last axis halved)."""
        ks = []
        for axis, m in enumerate(self.n):
            if axis == self.dim - 1:
                k = np.arange(m // 2 + 1, dtype=float)
            else:
                k = np.fft.fftfreq(m, 1.0 / m).round()
            shape = [1] * self.dim
            shape[axis] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def kabs(self) -> np.ndarray:
        """Euclidean norm |ξ| on the rfft layout."""
        return np.sqrt(sum(k**2 for k in self.rwavenumbers))

    @cached_property
    def _keep(self) -> np.ndarray:
        mask = np.ones(self.kabs.shape, dtype=bool)
        for k, m in zip(self.rwavenumbers, self.n):
            mask &= np.abs(k) != m // 2
        return mask

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.kabs.shape, dtype=bool)
        for k, m in zip(self.rwavenumbers, self.n):
            mask &= np.abs(k) <= m // 3
        return mask

    def fwd(self, a: np.ndarray) -> np.ndarray:
        """Normalized forward transform over the trailing ``dim`` axes."""
        ah = np.fft.rfftn(a, axes=self._axes) / self.size
        ah *= self._keep
        return ah

    def inv(self, ah: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(ah * self.size, s=self.n, axes=self._axes)

    def mult(self, a: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return self.inv(symbol * self.fwd(a))

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pointwise product followed by the 2/3-rule filter."""
        return self.inv(self.dealias_mask * self.fwd(a * b))

    # ---- symbols on the rfft layout ---------------------------------------

    @cached_property
    def symbol_hilbert(self) -> np.ndarray:
        if self.dim != 1:
            raise DimensionError("the Hilbert transform is only defined on 1D grids")
        return -1j * np.sign(self.rwavenumbers[0])

    def symbol_calderon(self, s: float = 1.0) -> np.ndarray:
        if s < 0:
            raise UnsupportedPowerError(f"Calderon power must be >= 0, got {s}")
        if s == 1:
            return self.kabs
        return self.kabs**s

    def symbol_dx(self, direction: int = 0) -> np.ndarray:
        if direction not in range(self.dim):
            raise DimensionError(f"direction {direction} invalid for a {self.dim}D grid")
        return 1j * self.rwavenumbers[direction]

    @cached_property
    def symbol_dn0(self) -> np.ndarray:
        return self.kabs * np.tanh(self.kabs)

    @cached_property
    def symbol_laplacian(self) -> np.ndarray:
        return -(self.kabs**2)


def check_same_grid(*fields: "Field") -> PeriodicGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid.n} vs {f.grid.n}")
    return grid


@dataclass(frozen=True, eq=False)
class Field:
    """Real nodal values on a periodic grid (read-only)."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidInputError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("field contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func: Callable[..., np.ndarray]) -> "Field":
        return cls(grid, np.broadcast_to(func(*grid.mesh), grid.shape))

    def mean(self) -> float:
        return float(self.values.mean())

    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients on the full FFT layout (index order of ``grid.wavenumbers``)."""

    grid: PeriodicGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise InvalidInputError(f"coefficient shape {coeffs.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("spectrum contains non-finite coefficients")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def wavenumber_mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.grid.wavenumbers, indexing="ij"))

    def coefficient(self, *k: int) -> complex:
        """Coefficient of the mode exp(i k·x); negative indices are wavenumbers, not offsets."""
        idx = tuple(int(ki) % m for ki, m in zip(k, self.grid.n))
        return complex(self.coeffs[idx])


def _phase(grid: PeriodicGrid) -> np.ndarray:
    # x_j starts at -π, so each mode picks up exp(-ikπ) = (-1)^k
    ksum = sum(np.meshgrid(*grid.wavenumbers, indexing="ij"))
    return np.where(ksum % 2 == 0, 1.0, -1.0)


def _nyquist_mask(grid: PeriodicGrid) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for k, m in zip(np.meshgrid(*grid.wavenumbers, indexing="ij"), grid.n):
        mask &= np.abs(k) != m // 2
    return mask


def transform(field: Field) -> Spectrum:
    grid = field.grid
    coeffs = np.fft.fftn(field.values) / grid.size * _phase(grid)
    return Spectrum(grid, coeffs * _nyquist_mask(grid))


def inverse_transform(spectrum: Spectrum) -> Field:
    grid = spectrum.grid
    values = np.fft.ifftn(spectrum.coeffs * _phase(grid)) * grid.size
    return Field(grid, values.real)


def apply_multiplier(s: Spectrum, symbol: Callable[..., np.ndarray]) -> Spectrum:
    """Multiply coefficient k by ``symbol(k1[, k2])`` (integer wavenumber meshes)."""
    values = np.broadcast_to(np.asarray(symbol(*s.wavenumber_mesh), dtype=complex), s.grid.shape)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("symbol is not finite on the wavenumber set")
    return Spectrum(s.grid, values * s.coeffs)


def dealias(s: Spectrum) -> Spectrum:
    mask = np.ones(s.grid.shape, dtype=bool)
    for k, m in zip(s.wavenumber_mesh, s.grid.n):
        mask &= np.abs(k) <= m // 3
    return Spectrum(s.grid, s.coeffs * mask)


def _apply(f: Field, symbol: np.ndarray) -> Field:
    return Field(f.grid, f.grid.mult(f.values, symbol))


def hilbert(f: Field) -> Field:
    return _apply(f, f.grid.symbol_hilbert)


def calderon(f: Field, s: float = 1.0) -> Field:
    """Λ^s f, the multiplier |ξ|^s (Euclidean norm on the 2-torus)."""
    return _apply(f, f.grid.symbol_calderon(s))


def d_dx(f: Field, direction: int = 0) -> Field:
    return _apply(f, f.grid.symbol_dx(direction))


def laplacian(f: Field) -> Field:
    return _apply(f, f.grid.symbol_laplacian)


def dn0(f: Field) -> Field:
    """Unit-depth Dirichlet–Neumann symbol |ξ| tanh|ξ|."""
    return _apply(f, f.grid.symbol_dn0)


def product(f: Field, g: Field) -> Field:
    grid = check_same_grid(f, g)
    return Field(grid, grid.product(f.values, g.values))


def commutator_array(grid: PeriodicGrid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """[f, H] g = f·Hg - H(f·g) with dealiased products, on raw arrays."""
    sym = grid.symbol_hilbert
    return grid.product(f, grid.mult(g, sym)) - grid.mult(grid.product(f, g), sym)


def commutator_fH(f: Field, g: Field) -> Field:
    grid = check_same_grid(f, g)
    return Field(grid, commutator_array(grid, f.values, g.values))
