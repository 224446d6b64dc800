"""Right-hand sides of the weakly nonlinear interface models.

Every model has the shape ∂t f = L f + N(f) with L a real, nonpositive
Fourier multiplier.  The Field-level functions (``rhs_*``) are the public
evaluators; `EvolutionModel` packages the symbol of L and the array-level
nonlinearity for the time stepper.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DimensionError, InvalidInputError
from .spectral import Field, PeriodicGrid, commutator_array
from .strip import (
    StripField,
    StripGrid,
    boundary_flux_g_closed,
    compute_B,
    forchheimer_source,
    harmonic_extension,
    poisson_boundary_trace,
    solve_poisson_strip,
    surface_flux_q,
)

ZERO_MEAN_RTOL = 1e-12
# Ξ is not polynomial in the gridded data; its discrete mean carries an
# aliasing error of ~4e-6 at n = 64 that falls off roughly like n^-3.5
PHI_COMPATIBILITY_RTOL = 1e-4

FORCHHEIMER_VARIANTS = ("poisson_trace", "g_plus_b")
MODELS = ("linear2d", "darcy2d", "forchheimer2d", "darcy3d_finite", "darcy3d_infinite", "expansion2d")
DarcyForm = Literal["commutator", "expanded", "commutator_lambda"]


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless Bond number ``nu``, Forchheimer number ``lam`` and steepness ``sigma``."""

    model: str = "darcy2d"
    nu: float = 0.0
    lam: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInputError(f"unknown model '{self.model}', expected one of {', '.join(MODELS)}")
        if not (np.isfinite(self.nu) and self.nu >= 0):
            raise InvalidInputError(f"nu must be finite and >= 0, got {self.nu}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"sigma must be finite and > 0, got {self.sigma}")

    @property
    def dim(self) -> int:
        return 2 if self.model.startswith("darcy3d") else 1

    @property
    def depth(self) -> str | None:
        if self.model == "darcy3d_finite":
            return "finite"
        if self.model == "darcy3d_infinite":
            return "infinite"
        return None


@dataclass(frozen=True)
class ExpansionState:
    """Order-0 and order-1 terms of the steepness expansion h = h0 + σ h1 + ..."""

    h0: Field
    h1: Field

    def __post_init__(self):
        if self.h0.grid != self.h1.grid:
            raise InvalidInputError("h0 and h1 must share a grid")

    @property
    def grid(self) -> PeriodicGrid:
        return self.h0.grid

    def combined(self, sigma: float) -> Field:
        """σ h0 + σ² h1, the renormalized elevation the expansion approximates."""
        return Field(self.grid, sigma * self.h0.values + sigma**2 * self.h1.values)


def project_zero_mean(values: np.ndarray, what: str = "field") -> np.ndarray:
    """Subtract a round-off mean; reject a genuine one."""
    mean = float(values.mean())
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if abs(mean) > ZERO_MEAN_RTOL * scale:
        raise InvalidInputError(f"{what} must have zero mean, got mean {mean:.3e} (scale {scale:.3e})")
    return values - mean


def _require_dim(grid: PeriodicGrid, dim: int) -> None:
    if grid.dim != dim:
        raise DimensionError(f"model needs a {dim}D grid, got {grid.dim}D")


# ---- symbols ----------------------------------------------------------------


def darcy2d_symbol(grid: PeriodicGrid, nu: float) -> np.ndarray:
    """-(|k| + ν|k|³)."""
    k = grid.kabs
    return -(k + nu * k**3)


def darcy3d_symbol(grid: PeriodicGrid, nu: float, depth: str) -> np.ndarray:
    """-G(1 + ν|ξ|²) with G = |ξ| tanh|ξ| (finite depth) or |ξ| (infinite depth)."""
    return -_dn_symbol(grid, depth) * (1 + nu * grid.kabs**2)


def _dn_symbol(grid: PeriodicGrid, depth: str) -> np.ndarray:
    if depth == "finite":
        return grid.symbol_dn0
    if depth == "infinite":
        return grid.kabs
    raise InvalidInputError(f"depth must be 'finite' or 'infinite', got {depth!r}")


# ---- array-level nonlinearities ----------------------------------------------


def darcy2d_quadratic(grid: PeriodicGrid, f: np.ndarray, nu: float) -> np.ndarray:
    """∂1([f, H](-νΛ³f - Λf))."""
    lf = grid.mult(f, darcy2d_symbol(grid, nu))
    return grid.mult(commutator_array(grid, f, lf), grid.symbol_dx(0))


def darcy2d_quadratic_expanded(grid: PeriodicGrid, f: np.ndarray, nu: float) -> np.ndarray:
    """ν(Λ(fΛ³f) - ∂1(f∂1³f)) + ∂1(f∂1f) + Λ(fΛf)."""
    lam1, dx = grid.kabs, grid.symbol_dx(0)
    lam3f = grid.mult(f, lam1**3)
    d3f = grid.mult(f, dx**3)
    d1f = grid.mult(f, dx)
    lamf = grid.mult(f, lam1)
    pr = grid.product
    return (
        nu * (grid.mult(pr(f, lam3f), lam1) - grid.mult(pr(f, d3f), dx))
        + grid.mult(pr(f, d1f), dx)
        + grid.mult(pr(f, lamf), lam1)
    )


def darcy2d_quadratic_lambda(grid: PeriodicGrid, f: np.ndarray, nu: float) -> np.ndarray:
    """ν([Λ, f]Λ³f - ∂1f ∂1³f) + (∂1f)² + [Λ, f]Λf with [Λ, f]g = Λ(fg) - fΛg."""
    lam1, dx = grid.kabs, grid.symbol_dx(0)
    pr = grid.product

    def comm(g):
        return grid.mult(pr(f, g), lam1) - pr(f, grid.mult(g, lam1))

    lam3f = grid.mult(f, lam1**3)
    d1f = grid.mult(f, dx)
    d3f = grid.mult(f, dx**3)
    lamf = grid.mult(f, lam1)
    return nu * (comm(lam3f) - pr(d1f, d3f)) + pr(d1f, d1f) + comm(lamf)


_DARCY_FORMS = {
    "commutator": darcy2d_quadratic,
    "expanded": darcy2d_quadratic_expanded,
    "commutator_lambda": darcy2d_quadratic_lambda,
}


def darcy3d_quadratic(grid: PeriodicGrid, f: np.ndarray, nu: float, depth: str) -> np.ndarray:
    """-ν(G(f·GΔf) + ∇·(f∇Δf)) + G(f·Gf) + ∇·(f∇f)."""
    G = _dn_symbol(grid, depth)
    lap = grid.symbol_laplacian
    dxs = [grid.symbol_dx(i) for i in range(2)]
    pr = grid.product

    def div_f_grad(u):
        return sum(grid.mult(pr(f, grid.mult(u, d)), d) for d in dxs)

    lap_f = grid.mult(f, lap)
    surface = grid.mult(pr(f, grid.mult(lap_f, G)), G) + div_f_grad(lap_f)
    gravity = grid.mult(pr(f, grid.mult(f, G)), G) + div_f_grad(f)
    return -nu * surface + gravity


def forchheimer_correction(
    grid: PeriodicGrid,
    f: np.ndarray,
    nu: float,
    lam: float,
    strip: StripGrid,
    variant: str = "poisson_trace",
) -> np.ndarray:
    """Inertial correction to the Darcy model: ∂1Φ(·, 0) written through f only.

    ``variant="poisson_trace"`` returns -H(g_λ - 2B_λ), the trace that the strip
    Poisson solution produces.  ``variant="g_plus_b"`` returns -H(g_λ + B_λ);
    the two differ unless B_λ vanishes.
    """
    if variant not in FORCHHEIMER_VARIANTS:
        raise InvalidInputError(f"unknown Forchheimer variant {variant!r}")
    if lam == 0:
        return np.zeros_like(f)
    ff = Field(grid, f)
    q = surface_flux_q(ff, nu)
    upsilon = harmonic_extension(q, strip)
    b = forchheimer_source(upsilon, lam)
    B = compute_B(b).values
    g = boundary_flux_g_closed(ff, nu, lam).values
    weight = -2.0 if variant == "poisson_trace" else 1.0
    return -grid.mult(g + weight * B, grid.symbol_hilbert)


# ---- Field-level evaluators --------------------------------------------------


def rhs_linear2d(h: Field, nu: float) -> Field:
    """-νΛ³h - Λh."""
    grid = h.grid
    _require_dim(grid, 1)
    values = project_zero_mean(h.values, "elevation")
    return Field(grid, grid.mult(values, darcy2d_symbol(grid, nu)))


def rhs_darcy2d(f: Field, nu: float, form: DarcyForm = "commutator") -> Field:
    """Quadratic Darcy model in one of its three algebraically equivalent forms."""
    grid = f.grid
    _require_dim(grid, 1)
    if form not in _DARCY_FORMS:
        raise InvalidInputError(f"unknown form {form!r}, expected one of {', '.join(_DARCY_FORMS)}")
    values = project_zero_mean(f.values, "elevation")
    linear = grid.mult(values, darcy2d_symbol(grid, nu))
    return Field(grid, linear + _DARCY_FORMS[form](grid, values, nu))


def rhs_expansion(state: ExpansionState, nu: float) -> tuple[Field, Field]:
    """Time derivatives of the order-0 (linear) and order-1 (forced linear) terms."""
    grid = state.grid
    _require_dim(grid, 1)
    h0 = project_zero_mean(state.h0.values, "h0")
    h1 = project_zero_mean(state.h1.values, "h1")
    sym = darcy2d_symbol(grid, nu)
    dh0 = grid.mult(h0, sym)
    dh1 = grid.mult(h1, sym) + darcy2d_quadratic(grid, h0, nu)
    return Field(grid, dh0), Field(grid, dh1)


def rhs_forchheimer_closed(
    f: Field, nu: float, lam: float, strip: StripGrid, variant: str = "poisson_trace"
) -> Field:
    """Darcy RHS plus the inertial correction, all expressed through f (production path)."""
    grid = f.grid
    _require_dim(grid, 1)
    values = project_zero_mean(f.values, "elevation")
    darcy = rhs_darcy2d(Field(grid, values), nu).values
    return Field(grid, darcy + forchheimer_correction(grid, values, nu, lam, strip, variant))


def rhs_forchheimer_system(f: Field, nu: float, lam: float, strip: StripGrid) -> Field:
    """Same model evaluated through two strip Poisson solves (independent check path).

    Υ solves ΔΥ = 0, ∂2Υ = ∂1(f - ν∂1²f); Φ solves ΔΦ = λΞ(∇Υ, ∇²Υ),
    ∂2Φ = λ|∇Υ|∂2Υ on x2 = 0; the result is the Darcy RHS plus ∂1Φ(·, 0).
    """
    grid = f.grid
    _require_dim(grid, 1)
    values = project_zero_mean(f.values, "elevation")
    ff = Field(grid, values)
    darcy = rhs_darcy2d(ff, nu).values
    if lam == 0:
        return Field(grid, darcy)

    ik = grid.symbol_dx(0)
    q = surface_flux_q(ff, nu)
    zero = StripField(strip, np.zeros(strip.shape))
    ups = solve_poisson_strip(zero, q).values
    ups_y = solve_poisson_strip(zero, q, derivative=1).values
    ups_yy = solve_poisson_strip(zero, q, derivative=2).values
    ups_x = grid.mult(ups.T, ik).T
    ups_xx = grid.mult(ups.T, ik * ik).T
    ups_xy = grid.mult(ups_y.T, ik).T

    grad = np.hypot(ups_x, ups_y)
    numer = 2 * ups_x * ups_y * ups_xy + ups_x**2 * ups_xx + ups_y**2 * ups_yy
    safe = grad > 1e-13 * float(np.max(grad))
    source = lam * (grad * (ups_xx + ups_yy) + np.where(safe, numer / np.where(safe, grad, 1.0), 0.0))

    top = poisson_boundary_trace(zero, q).values
    top_x = grid.mult(top, ik)
    flux = lam * np.hypot(top_x, q.values) * q.values
    trace = poisson_boundary_trace(StripField(strip, source), Field(grid, flux), compatibility_rtol=PHI_COMPATIBILITY_RTOL)
    return Field(grid, darcy + grid.mult(trace.values, ik))


def rhs_darcy3d(f: Field, nu: float, depth: str = "finite") -> Field:
    """Quadratic model on the 2-torus with finite (G0) or infinite (Λ) depth."""
    grid = f.grid
    _require_dim(grid, 2)
    values = project_zero_mean(f.values, "elevation")
    linear = grid.mult(values, darcy3d_symbol(grid, nu, depth))
    return Field(grid, linear + darcy3d_quadratic(grid, values, nu, depth))


# ---- time-stepper view --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EvolutionModel:
    """∂t u = symbol·û + N(u) on raw arrays; expansion2d stacks (h0, h1) on a leading axis."""

    params: ModelParams
    grid: PeriodicGrid
    symbol: np.ndarray
    strip: StripGrid | None = None
    forchheimer_variant: str = "poisson_trace"
    state_shape: tuple[int, ...] = field(default=())

    def nonlinear(self, u: np.ndarray) -> np.ndarray:
        p, grid = self.params, self.grid
        if p.model == "linear2d":
            return np.zeros_like(u)
        if p.model == "darcy2d":
            return darcy2d_quadratic(grid, u, p.nu)
        if p.model == "forchheimer2d":
            return darcy2d_quadratic(grid, u, p.nu) + forchheimer_correction(
                grid, u, p.nu, p.lam, self.strip, self.forchheimer_variant
            )
        if p.model == "expansion2d":
            out = np.zeros_like(u)
            out[1] = darcy2d_quadratic(grid, u[0], p.nu)
            return out
        return darcy3d_quadratic(grid, u, p.nu, p.depth)

    def rhs(self, u: np.ndarray) -> np.ndarray:
        return self.grid.mult(u, self.symbol) + self.nonlinear(u)


def build_model(
    params: ModelParams,
    grid: PeriodicGrid,
    strip: StripGrid | None = None,
    forchheimer_variant: str = "poisson_trace",
) -> EvolutionModel:
    _require_dim(grid, params.dim)
    if params.model.startswith("darcy3d"):
        symbol = darcy3d_symbol(grid, params.nu, params.depth)
    else:
        symbol = darcy2d_symbol(grid, params.nu)
    if params.model == "forchheimer2d" and strip is None:
        strip = StripGrid(grid)
    shape = (2, *grid.shape) if params.model == "expansion2d" else grid.shape
    return EvolutionModel(params, grid, symbol, strip, forchheimer_variant, shape)
