"""Integrating-factor Runge–Kutta time stepping for ∂t u = L u + N(u).

The linear symbol ℓ(ξ) ≤ 0 grows like |ξ|³, so it is propagated exactly by
e^{ℓ dt} and only the nonlinearity is stepped explicitly.  The state is held in
the rfft layout between steps; dealiasing happens inside N only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import BlowUpError, DimensionError, InvalidInputError
from .models import EvolutionModel, ExpansionState, ModelParams, darcy2d_symbol, darcy3d_symbol
from .spectral import Field, PeriodicGrid

Scheme = Literal["if_rk2", "if_rk4"]
SCHEMES = ("if_rk2", "if_rk4")


def linear_symbol(params: ModelParams, grid: PeriodicGrid) -> np.ndarray:
    """ℓ(ξ) on the grid's rfft layout: -(|k| + ν|k|³), or -G(ξ)(1 + ν|ξ|²) on the 2-torus."""
    if grid.dim != params.dim:
        raise DimensionError(f"model {params.model} needs a {params.dim}D grid, got {grid.dim}D")
    if params.depth is not None:
        return darcy3d_symbol(grid, params.nu, params.depth)
    return darcy2d_symbol(grid, params.nu)


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    scheme: Scheme = "if_rk2"
    snapshot_stride: int = 10
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidInputError(f"t_end must be >= 0, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end:
            raise InvalidInputError(f"dt = {self.dt} exceeds t_end = {self.t_end}")
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}, expected one of {', '.join(SCHEMES)}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise InvalidInputError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride}")


@dataclass(frozen=True)
class Diagnostics:
    mean: float
    l2: float
    max_slope: float


@dataclass(frozen=True, eq=False)
class Snapshot:
    step: int
    t: float
    values: np.ndarray
    diagnostics: Diagnostics


@dataclass(eq=False)
class Trajectory:
    """Snapshots in time order; ``status`` is "completed" or "blowup"."""

    grid: PeriodicGrid
    snapshots: list[Snapshot] = field(default_factory=list)
    status: str = "completed"
    t_reached: float = 0.0

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def diagnostics(grid: PeriodicGrid, values: np.ndarray) -> Diagnostics:
    """Spatial mean, L² norm over the torus and max |∇f| (spectral gradient)."""
    mean = float(values.mean())
    l2 = math.sqrt(float(np.mean(values**2)) * (2 * np.pi) ** grid.dim)
    grad_sq = sum(grid.mult(values, grid.symbol_dx(i)) ** 2 for i in range(grid.dim))
    return Diagnostics(mean, l2, float(np.sqrt(np.max(grad_sq))))


class _Stepper:
    """Precomputed exponentials for one (model, dt) pair."""

    def __init__(self, model: EvolutionModel, dt: float, scheme: str):
        self.model = model
        self.dt = dt
        self.scheme = scheme
        self.full = np.exp(model.symbol * dt)
        self.half = np.exp(model.symbol * dt / 2)

    def nonlinear_hat(self, uh: np.ndarray) -> np.ndarray:
        grid = self.model.grid
        return grid.fwd(self.model.nonlinear(grid.inv(uh)))

    def __call__(self, uh: np.ndarray) -> np.ndarray:
        dt, E, E2, N = self.dt, self.full, self.half, self.nonlinear_hat
        if self.model.params.model == "linear2d":
            return E * uh
        if self.scheme == "if_rk2":
            k1 = N(uh)
            k2 = N(E * (uh + dt * k1))
            return E * uh + dt / 2 * (E * k1 + k2)
        k1 = N(uh)
        k2 = N(E2 * (uh + dt / 2 * k1))
        k3 = N(E2 * uh + dt / 2 * k2)
        k4 = N(E * uh + dt * E2 * k3)
        return E * uh + dt / 6 * (E * k1 + 2 * E2 * (k2 + k3) + k4)


def _state_array(f0, model: EvolutionModel) -> np.ndarray:
    if isinstance(f0, ExpansionState):
        if model.params.model != "expansion2d":
            raise InvalidInputError("an ExpansionState needs the expansion2d model")
        return np.stack([f0.h0.values, f0.h1.values])
    if model.params.model == "expansion2d":
        raise InvalidInputError("the expansion2d model needs an ExpansionState")
    return np.asarray(f0.values, dtype=float)


def _wrap(values: np.ndarray, model: EvolutionModel):
    if model.params.model == "expansion2d":
        return ExpansionState(Field(model.grid, values[0]), Field(model.grid, values[1]))
    return Field(model.grid, values)


def _check_zero_mean(u: np.ndarray, grid: PeriodicGrid) -> None:
    means = u.mean(axis=grid._axes)
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    if np.max(np.abs(means)) > 1e-12 * scale:
        raise InvalidInputError(f"initial data must have zero mean, got {np.max(np.abs(means)):.3e}")


def step(f, model: EvolutionModel, dt: float, scheme: Scheme = "if_rk2"):
    """Advance a Field (or ExpansionState) by one integrating-factor RK step."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    grid = model.grid
    u = _state_array(f, model)
    _check_zero_mean(u, grid)
    uh = _Stepper(model, dt, scheme)(grid.fwd(u))
    with np.errstate(all="ignore"):
        out = grid.inv(uh)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite values after one step", t=0.0)
    return _wrap(out, model)


Observer = Callable[[float, np.ndarray, Diagnostics], None]


def integrate(
    f0,
    model: EvolutionModel,
    config: StepConfig,
    observer: Observer | None = None,
) -> Trajectory:
    """March from t = 0 to ``config.t_end``.

    Snapshots are taken at step 0, every ``snapshot_stride`` steps and at the
    final time.  The last step is shortened to land exactly on ``t_end``.  On
    blow-up a `BlowUpError` is raised carrying the partial trajectory.
    """
    grid = model.grid
    u = _state_array(f0, model)
    _check_zero_mean(u, grid)
    if u.shape != model.state_shape:
        raise InvalidInputError(f"state shape {u.shape} does not match model {model.state_shape}")
    traj = Trajectory(grid)

    def record(i: int, t: float, values: np.ndarray) -> None:
        observed = values if values.ndim == grid.dim else model.params.sigma * values[0] + model.params.sigma**2 * values[1]
        diag = diagnostics(grid, observed)
        snap = Snapshot(i, t, values.copy(), diag)
        snap.values.flags.writeable = False
        traj.snapshots.append(snap)
        traj.t_reached = t
        if observer is not None:
            observer(t, snap.values, diag)

    record(0, 0.0, u)
    if config.t_end == 0:
        return traj

    n_steps = max(1, math.ceil(config.t_end / config.dt - 1e-9))
    stepper = _Stepper(model, config.dt, config.scheme)
    last = None
    uh = grid.fwd(u)
    t = 0.0
    for i in range(1, n_steps + 1):
        dt = config.dt
        if i == n_steps:
            dt = config.t_end - (n_steps - 1) * config.dt
            if abs(dt - config.dt) > 1e-14 * config.dt:
                last = last or _Stepper(model, dt, config.scheme)
                stepper = last
        with np.errstate(all="ignore"):
            uh_next = stepper(uh)
            values = grid.inv(uh_next)
        runaway = not np.all(np.isfinite(values)) or float(np.max(np.abs(values))) > config.blowup_threshold
        if runaway:
            if traj.snapshots[-1].step != i - 1:
                record(i - 1, t, grid.inv(uh))
            traj.status = "blowup"
            raise BlowUpError(f"solution blew up between t = {t:.6g} and t = {t + dt:.6g}", t=t, trajectory=traj)
        uh = uh_next
        t = config.t_end if i == n_steps else i * config.dt
        if i % config.snapshot_stride == 0 or i == n_steps:
            record(i, t, values)
    return traj
