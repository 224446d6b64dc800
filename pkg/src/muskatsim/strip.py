"""Elliptic problems on the periodic half-strip S¹ × (-∞, 0].

The vertical direction is truncated at depth D and discretized by composite
Gauss–Legendre panels, geometrically graded toward the free surface x2 = 0
where the exponential profiles vary fastest.  Horizontally everything is
spectral on a 1D `PeriodicGrid`.

The Neumann problem

    Δu = b in the strip,   ∂2 u = g on x2 = 0,   u -> 0 as x2 -> -∞

decouples into one ODE per horizontal wavenumber k.  With K = |k| > 0 its
solution is

    u(x) = g/K e^{Kx} - 1/(2K) ∫ [e^{-K|x-y|} + e^{K(x+y)}] b(y) dy,

and for k = 0 (given the compatibility ∫ b0 = g0) u(x) = ∫_{y<x} (x-y) b0(y) dy.
The kernels have a kink at y = x, so interior evaluations split the panel
containing x and integrate the panel's Lagrange interpolant of b on each side.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DimensionError, InfeasibleDataError, InvalidInputError, TruncationError
from .spectral import Field, PeriodicGrid, commutator_array, check_same_grid

# A mean source decaying like e^{x2} leaves ∫ below -D of order e^{-D} (1.5e-8 at
# D = 18) out of the strip, so the check cannot be tighter than the truncation.
COMPATIBILITY_RTOL = 1e-6
TRUNCATION_RTOL = 1e-6
DEGENERATE_GRADIENT_RTOL = 1e-13
ZERO_MEAN_RTOL = 1e-12

# points per sub-interval of the refined rule used for interior evaluations
_FINE_FACTOR = 3


def _lagrange_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Rows: values at ``targets`` of the Lagrange basis on ``nodes`` (barycentric form)."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / diff.prod(axis=1)
    d = targets[..., None] - nodes
    exact = d == 0
    d = np.where(exact, 1.0, d)
    terms = bary / d
    out = terms / terms.sum(axis=-1, keepdims=True)
    hit = exact.any(axis=-1)
    if np.any(hit):
        out[hit] = exact[hit].astype(float)
    return out


def _differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    m = nodes.size
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / diff.prod(axis=1)
    dmat = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(dmat, 0.0)
    dmat[np.arange(m), np.arange(m)] = -dmat.sum(axis=1)
    return dmat


@dataclass(frozen=True)
class StripGrid:
    """Tensor grid: horizontal collocation points × vertical Gauss nodes in [-D, 0].

    Panel widths grow by ``grading`` from the surface downward; nodes and
    panels are stored bottom to top (ascending x2).
    """

    horizontal: PeriodicGrid
    depth: float = 18.0
    panels: int = 12
    nodes_per_panel: int = 8
    grading: float = 1.5

    def __post_init__(self):
        if self.horizontal.dim != 1:
            raise DimensionError("the strip is built on a 1D horizontal grid")
        if not self.depth > 0:
            raise InvalidInputError(f"depth truncation must be positive, got {self.depth}")
        if self.panels < 1 or self.nodes_per_panel < 2:
            raise InvalidInputError("need at least one panel and two nodes per panel")
        if not self.grading >= 1:
            raise InvalidInputError(f"grading must be >= 1, got {self.grading}")

    @property
    def n(self) -> int:
        return self.horizontal.n[0]

    @cached_property
    def panel_edges(self) -> np.ndarray:
        r, P = self.grading, self.panels
        widths = r ** np.arange(P)
        widths *= self.depth / widths.sum()
        top_down = np.concatenate([[0.0], -np.cumsum(widths)])
        top_down[-1] = -self.depth
        return top_down[::-1].copy()

    @cached_property
    def _reference(self) -> tuple[np.ndarray, np.ndarray]:
        return np.polynomial.legendre.leggauss(self.nodes_per_panel)

    @cached_property
    def _fine_reference(self) -> tuple[np.ndarray, np.ndarray]:
        return np.polynomial.legendre.leggauss(_FINE_FACTOR * self.nodes_per_panel)

    @cached_property
    def _nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        t, wt = self._reference
        a, b = self.panel_edges[:-1, None], self.panel_edges[1:, None]
        y = a + (t + 1) * (b - a) / 2
        w = wt * (b - a) / 2
        return y.ravel(), w.ravel()

    @property
    def y(self) -> np.ndarray:
        return self._nodes_weights[0]

    @property
    def weights(self) -> np.ndarray:
        return self._nodes_weights[1]

    @property
    def n_vertical(self) -> int:
        return self.panels * self.nodes_per_panel

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n_vertical)

    @cached_property
    def vertical_derivative(self) -> np.ndarray:
        """Block-diagonal panelwise differentiation matrix on the vertical nodes."""
        t, _ = self._reference
        dref = _differentiation_matrix(t)
        m = self.nodes_per_panel
        out = np.zeros((self.n_vertical, self.n_vertical))
        for p, h in enumerate(np.diff(self.panel_edges)):
            out[p * m:(p + 1) * m, p * m:(p + 1) * m] = dref * (2.0 / h)
        return out

    @cached_property
    def top_extrapolation(self) -> tuple[np.ndarray, np.ndarray]:
        """Weights giving the value and the x2-derivative at x2 = 0 from the top panel's nodes."""
        t, _ = self._reference
        m = self.nodes_per_panel
        h = self.panel_edges[-1] - self.panel_edges[-2]
        value = np.zeros(self.n_vertical)
        value[-m:] = _lagrange_matrix(t, np.array([1.0]))[0]
        slope = np.zeros(self.n_vertical)
        slope[-m:] = value[-m:] @ _differentiation_matrix(t) * (2.0 / h)
        return value, slope

    @cached_property
    def _split_geometry(self):
        """Refined quadrature data for each vertical target node.

        Returns (full_y, full_w, interp, split_y, split_w, split_interp, owner):
        refined points of every whole panel, the shared interpolation matrix
        from panel nodes to those points, and for each target node the two
        sub-intervals of its own panel on either side of it.
        """
        t, _ = self._reference
        tf, wf = self._fine_reference
        edges = self.panel_edges
        a, b = edges[:-1, None], edges[1:, None]
        full_y = a + (tf + 1) * (b - a) / 2
        full_w = wf * (b - a) / 2
        interp = _lagrange_matrix(t, tf)

        m = self.nodes_per_panel
        y = self.y
        owner = np.repeat(np.arange(self.panels), m)
        lo, hi = edges[owner], edges[owner + 1]
        y1 = lo[:, None] + (tf + 1) * (y - lo)[:, None] / 2
        w1 = wf * (y - lo)[:, None] / 2
        y2 = y[:, None] + (tf + 1) * (hi - y)[:, None] / 2
        w2 = wf * (hi - y)[:, None] / 2
        split_y = np.concatenate([y1, y2], axis=1)
        split_w = np.concatenate([w1, w2], axis=1)
        ref = 2 * (split_y - lo[:, None]) / (hi - lo)[:, None] - 1
        split_interp = _lagrange_matrix(t, ref)
        return full_y, full_w, interp, split_y, split_w, split_interp, owner


def _green(K: int, x: np.ndarray, y: np.ndarray, derivative: int) -> np.ndarray:
    d = x - y
    if K == 0:
        below = (d > 0).astype(float)
        return below * d if derivative == 0 else below
    decay = np.exp(-K * np.abs(d))
    image = np.exp(K * (x + y))
    if derivative == 0:
        return -(decay + image) / (2 * K)
    return 0.5 * (np.sign(d) * decay - image)


@lru_cache(maxsize=512)
def _solution_matrix(grid: StripGrid, K: int, derivative: int) -> np.ndarray:
    """Matrix mapping nodal b̂(k, ·) to the particular part of û(k, ·) (or ∂2 û) at the nodes."""
    full_y, full_w, interp, split_y, split_w, split_interp, owner = grid._split_geometry
    x = grid.y
    N, P, m = grid.n_vertical, grid.panels, grid.nodes_per_panel

    kern = _green(K, x[:, None, None], full_y[None], derivative) * full_w[None]
    kern[np.arange(N), owner, :] = 0.0
    mat = np.einsum("ipf,fj->ipj", kern, interp).reshape(N, P * m)

    ksplit = _green(K, x[:, None], split_y, derivative) * split_w
    local = np.einsum("if,ifj->ij", ksplit, split_interp)
    for i in range(N):
        p = owner[i]
        mat[i, p * m:(p + 1) * m] += local[i]
    mat.flags.writeable = False
    return mat


@dataclass(frozen=True, eq=False)
class StripField:
    """Values on the strip grid, shape (horizontal, vertical).

    ``modes`` optionally carries an exact harmonic representation: rfft-layout
    coefficients c_k with field = Σ c_k exp(i k x1 + |k| x2).  Derivatives of
    such fields are evaluated from the profiles instead of from nodal values.
    """

    grid: StripGrid
    values: np.ndarray
    modes: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidInputError(f"values shape {values.shape} does not match strip {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("strip field contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: StripGrid, func) -> "StripField":
        x1, x2 = np.meshgrid(grid.horizontal.points[0], grid.y, indexing="ij")
        return cls(grid, np.broadcast_to(func(x1, x2), grid.shape))

    @classmethod
    def harmonic(cls, grid: StripGrid, modes: np.ndarray) -> "StripField":
        modes = np.asarray(modes, dtype=complex)
        return cls(grid, _evaluate_profiles(grid, modes), modes=modes)

    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))


BoundaryField = Field


def _evaluate_profiles(grid: StripGrid, coeffs: np.ndarray, at=None) -> np.ndarray:
    """Σ_k coeffs_k exp(i k x1 + |k| x2) at the nodes (shape (n, N)) or at one level ``at``."""
    hgrid = grid.horizontal
    K = hgrid.kabs
    if at is not None:
        return hgrid.inv(coeffs * np.exp(K * at))
    profiles = np.exp(np.outer(grid.y, K))
    return hgrid.inv(coeffs[None, :] * profiles).T


def harmonic_derivatives(field: StripField, at=None) -> dict[str, np.ndarray]:
    """First and second derivatives of a harmonic field from its mode profiles."""
    grid = field.grid
    ik = grid.horizontal.symbol_dx(0)
    K = grid.horizontal.kabs
    c = field.modes
    ev = lambda coeffs: _evaluate_profiles(grid, coeffs, at)  # noqa: E731
    return {
        "d1": ev(ik * c),
        "d2": ev(K * c),
        "d11": ev(ik * ik * c),
        "d12": ev(ik * K * c),
        "d22": ev(K * K * c),
    }


def nodal_derivatives(field: StripField) -> dict[str, np.ndarray]:
    """Derivatives of an arbitrary strip field: spectral in x1, panelwise polynomial in x2."""
    grid = field.grid
    hgrid = grid.horizontal
    ik = hgrid.symbol_dx(0)
    D = grid.vertical_derivative
    u = field.values
    d1 = hgrid.mult(u.T, ik).T
    d2 = u @ D.T
    return {
        "d1": d1,
        "d2": d2,
        "d11": hgrid.mult(u.T, ik * ik).T,
        "d12": hgrid.mult(d2.T, ik).T,
        "d22": d2 @ D.T,
    }


def _horizontal_scale(*arrays: np.ndarray) -> float:
    return max([float(np.max(np.abs(a))) if a.size else 0.0 for a in arrays] + [0.0])


def _check_decay(b: StripField, rtol: float) -> None:
    scale = b.scale()
    bottom = float(np.max(np.abs(b.values[:, 0])))
    if scale > 0 and bottom > rtol * scale:
        raise TruncationError(
            f"source does not decay at depth {b.grid.depth}: |b| = {bottom:.3e} "
            f"at the deepest node (scale {scale:.3e})",
            value=bottom,
        )


def _check_compatibility(b: StripField, g: Field, rtol: float) -> None:
    b0 = b.values.mean(axis=0)
    residual = float(b.grid.weights @ b0 - g.values.mean())
    scale = max(b.scale(), g.scale())
    if abs(residual) > rtol * scale:
        raise InfeasibleDataError(
            f"compatibility condition violated: ∫b - ∫g = {residual:.3e} per unit length "
            f"(scale {scale:.3e})",
            residual=residual,
        )


def _check_strip_data(b: StripField, g: Field, compatibility_rtol: float, truncation_rtol: float) -> None:
    if g.grid != b.grid.horizontal:
        raise InvalidInputError("boundary data live on a different horizontal grid than the strip")
    _check_compatibility(b, g, compatibility_rtol)
    _check_decay(b, truncation_rtol)


def solve_poisson_strip(
    b: StripField,
    g: Field,
    *,
    derivative: int = 0,
    compatibility_rtol: float = COMPATIBILITY_RTOL,
    truncation_rtol: float = TRUNCATION_RTOL,
) -> StripField:
    """Decaying solution of Δu = b, ∂2 u|_{x2=0} = g at the strip nodes.

    ``derivative=1`` returns ∂2 u and ``derivative=2`` returns ∂2² u, both
    from the differentiated per-mode kernels (∂2² û = k² û + b̂ is exact).
    """
    if derivative not in (0, 1, 2):
        raise InvalidInputError(f"derivative must be 0, 1 or 2, got {derivative}")
    _check_strip_data(b, g, compatibility_rtol, truncation_rtol)
    grid = b.grid
    hgrid = grid.horizontal
    bh = hgrid.fwd(b.values.T)  # (N, n//2 + 1)
    gh = hgrid.fwd(g.values)
    y = grid.y
    order = 1 if derivative == 1 else 0
    uh = np.zeros_like(bh)
    for K in range(bh.shape[1]):  # rfft column index equals |k| in 1D
        if gh[K] == 0 and not np.any(bh[:, K]):
            continue
        uh[:, K] = _solution_matrix(grid, K, order) @ bh[:, K]
        if K > 0:
            hom = gh[K] * np.exp(K * y)
            uh[:, K] += hom / K if order == 0 else hom
    if derivative == 2:
        uh = hgrid.kabs**2 * uh + bh
    return StripField(grid, hgrid.inv(uh).T)


def poisson_boundary_trace(
    b: StripField,
    g: Field,
    *,
    compatibility_rtol: float = COMPATIBILITY_RTOL,
    truncation_rtol: float = TRUNCATION_RTOL,
) -> Field:
    """u(·, 0) for the same problem as `solve_poisson_strip`.

    Per mode û(k, 0) = (ĝ(k) - ∫ b̂(k, y) e^{|k|y} dy) / |k| and, for k = 0,
    û(0, 0) = -∫ y b̂(0, y) dy.
    """
    _check_strip_data(b, g, compatibility_rtol, truncation_rtol)
    grid = b.grid
    hgrid = grid.horizontal
    bh = hgrid.fwd(b.values.T)
    gh = hgrid.fwd(g.values)
    K = hgrid.kabs
    weighted = (grid.weights[:, None] * np.exp(np.outer(grid.y, K)) * bh).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        uh = np.where(K > 0, (gh - weighted) / np.where(K > 0, K, 1.0), 0.0)
    uh[0] = -(grid.weights * grid.y) @ bh[:, 0]
    return Field(hgrid, hgrid.inv(uh))


def _require_zero_mean(q: Field, what: str) -> Field:
    mean = q.mean()
    scale = q.scale()
    if abs(mean) > ZERO_MEAN_RTOL * max(scale, 1.0):
        raise InfeasibleDataError(f"{what} must have zero mean, got mean {mean:.3e}", residual=mean)
    return Field(q.grid, q.values - mean)


def harmonic_extension(q: Field, strip: StripGrid) -> StripField:
    """Decaying harmonic Υ with ∂2 Υ = q on x2 = 0: per mode q̂(k)/|k| e^{|k| x2}."""
    if q.grid != strip.horizontal:
        raise InvalidInputError("boundary data live on a different horizontal grid than the strip")
    q = _require_zero_mean(q, "Neumann data of a decaying harmonic extension")
    hgrid = strip.horizontal
    K = hgrid.kabs
    qh = hgrid.fwd(q.values)
    modes = np.where(K > 0, qh / np.where(K > 0, K, 1.0), 0.0)
    return StripField.harmonic(strip, modes)


def _forchheimer_xi(d: dict[str, np.ndarray], lam: float, laplacian: np.ndarray | None) -> np.ndarray:
    """λ Ξ(∇Υ, ∇²Υ); ``laplacian=None`` drops the |∇Υ|ΔΥ term (harmonic Υ)."""
    d1, d2 = d["d1"], d["d2"]
    grad = np.hypot(d1, d2)
    numerator = 2 * d1 * d2 * d["d12"] + d1**2 * d["d11"] + d2**2 * d["d22"]
    cutoff = DEGENERATE_GRADIENT_RTOL * float(np.max(grad)) if grad.size else 0.0
    safe = grad > cutoff
    out = np.where(safe, numerator / np.where(safe, grad, 1.0), 0.0)
    if laplacian is not None:
        out = out + grad * laplacian
    return lam * out


def forchheimer_source(upsilon: StripField, lam: float) -> StripField:
    """b_λ = λ ∇·(|∇Υ| ∇Υ) at the strip nodes."""
    if upsilon.modes is not None:
        d = harmonic_derivatives(upsilon)
        return StripField(upsilon.grid, _forchheimer_xi(d, lam, None))
    d = nodal_derivatives(upsilon)
    return StripField(upsilon.grid, _forchheimer_xi(d, lam, d["d11"] + d["d22"]))


def boundary_flux_g(upsilon: StripField, lam: float) -> Field:
    """g_λ = λ |∇Υ| ∂2 Υ on x2 = 0."""
    grid = upsilon.grid
    hgrid = grid.horizontal
    if upsilon.modes is not None:
        d = harmonic_derivatives(upsilon, at=0.0)
        d1, d2 = d["d1"], d["d2"]
    else:
        value_w, slope_w = grid.top_extrapolation
        d1 = hgrid.mult(upsilon.values @ value_w, hgrid.symbol_dx(0))
        d2 = upsilon.values @ slope_w
    return Field(hgrid, lam * np.hypot(d1, d2) * d2)


def surface_flux_q(f: Field, nu: float) -> Field:
    """q = ∂1(f - ν ∂1² f), the Neumann datum of Υ."""
    grid = f.grid
    k = grid.rwavenumbers[0]
    return Field(grid, grid.mult(f.values, 1j * k * (1 + nu * k**2)))


def boundary_flux_g_closed(f: Field, nu: float, lam: float) -> Field:
    """Closed form λ sqrt((Hq)² + q²) q of g_λ, q = ∂1(f - ν ∂1² f)."""
    grid = f.grid
    q = surface_flux_q(f, nu).values
    hq = grid.mult(q, grid.symbol_hilbert)
    return Field(grid, lam * np.hypot(hq, q) * q)


def compute_B(b: StripField, *, truncation_rtol: float = TRUNCATION_RTOL) -> Field:
    """B̂(k) = ½ ∫ b̂(k, y) e^{|k| y} dy by the strip quadrature.

    The k = 0 coefficient is computed like the others; every downstream use
    passes B through the Hilbert transform, which discards it.
    """
    _check_decay(b, truncation_rtol)
    grid = b.grid
    hgrid = grid.horizontal
    bh = hgrid.fwd(b.values.T)
    profiles = grid.weights[:, None] * np.exp(np.outer(grid.y, hgrid.kabs))
    return Field(hgrid, hgrid.inv(0.5 * (profiles * bh).sum(axis=0)))


def verify_p1x(h: Field, phi_top: Field, strip: StripGrid) -> tuple[Field, Field]:
    """Check the harmonic commutator identity for the boundary trace of ∂1 X.

    φ is the harmonic strip field Σ φ̂_k e^{ik x1 + |k| x2} with boundary values
    ``phi_top``.  X solves ΔX = ∂2[2 h' ∂1φ + h'' φ] with ∂2 X = h' ∂1φ on top.
    Returns (∂1 X(·, 0) from the strip solver, ∂1([h, H] ∂1 φ(·, 0))).
    """
    hgrid = check_same_grid(h, phi_top)
    if hgrid != strip.horizontal:
        raise InvalidInputError("fields live on a different horizontal grid than the strip")
    ik = hgrid.symbol_dx(0)
    phi = StripField.harmonic(strip, hgrid.fwd(phi_top.values))
    dphi = harmonic_derivatives(phi)
    hx = hgrid.mult(h.values, ik)
    hxx = hgrid.mult(h.values, ik * ik)
    # x1-only factors broadcast along the vertical axis; products dealiased per level
    source = 2 * hgrid.product(hx[None, :], dphi["d12"].T) + hgrid.product(hxx[None, :], dphi["d2"].T)
    b = StripField(strip, source.T)
    phi_x_top = hgrid.mult(phi_top.values, ik)
    g = Field(hgrid, hgrid.product(hx, phi_x_top))
    trace = poisson_boundary_trace(b, g)
    numeric = Field(hgrid, hgrid.mult(trace.values, ik))
    formula = Field(hgrid, hgrid.mult(commutator_array(hgrid, h.values, phi_x_top), ik))
    return numeric, formula
