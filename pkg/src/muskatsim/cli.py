"""``simulate`` command: run one configured simulation and write CSV outputs.

Exit codes: 0 success, 2 configuration error, 3 infeasible data,
4 blow-up (partial outputs are still written), 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, config_to_dict, format_config, parse_config, validate
from .errors import BlowUpError, ConfigError, InfeasibleDataError, InvalidInputError, TruncationError
from .models import ExpansionState, ModelParams, build_model
from .spectral import Field, PeriodicGrid, transform
from .strip import StripGrid
from .timestep import StepConfig, Trajectory, integrate

log = logging.getLogger("muskatsim")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_BLOWUP = 4
EXIT_IO = 5


def _grid(config: RunConfig) -> PeriodicGrid:
    return PeriodicGrid(config.grid_shape)


def _read_nodal_file(path: str, shape: tuple[int, ...]) -> np.ndarray:
    """Values from a one-column file or from the last column of a CSV with a header."""
    rows = []
    seen_line = False
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append(float(row[-1]))
            except ValueError:
                # only the first non-empty line may be a header
                if seen_line:
                    raise ConfigError(f"non-numeric value {row[-1]!r} in {path}", "initial.file") from None
            seen_line = True
    values = np.array(rows, dtype=float)
    size = int(np.prod(shape))
    if values.size != size:
        raise ConfigError(f"{path} holds {values.size} values, grid needs {size}", "initial.file")
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{path} contains non-finite values", "initial.file")
    return values.reshape(shape)


def build_initial(config: RunConfig) -> Field | ExpansionState:
    """Initial elevation: a sum of cosine modes or nodal values from a file (mean removed).

    For expansion2d the configured data is h0 and h1 starts at zero.
    """
    grid = _grid(config)
    if config.initial_file is not None:
        values = _read_nodal_file(config.initial_file, grid.shape)
        values = values - values.mean()
    else:
        values = np.zeros(grid.shape)
        for mode in config.modes:
            k = tuple(mode.k) + (0,) * (grid.dim - len(mode.k))
            for ki, n in zip(k, grid.n):
                if abs(ki) >= n // 2:
                    raise ConfigError(f"mode {k} is out of band for resolution {n} (|k| < {n // 2})", "initial.mode")
            if not any(k):
                raise ConfigError("the zero mode would give the elevation a nonzero mean", "initial.mode")
            phase = sum(ki * x for ki, x in zip(k, grid.mesh))
            values = values + mode.amplitude * np.cos(phase + mode.phase)
    f = Field(grid, values)
    if config.model == "expansion2d":
        return ExpansionState(f, Field.zeros(grid))
    return f


def _observed(config: RunConfig, values: np.ndarray) -> np.ndarray:
    if config.model == "expansion2d":
        return config.sigma * values[0] + config.sigma**2 * values[1]
    return values


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> int:
    count = 0
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
            count += 1
    return count


def write_outputs(trajectory: Trajectory, config: RunConfig, status: str = "completed", out_dir: Path | None = None) -> dict:
    """Write diagnostics, per-snapshot nodal and spectral CSVs and the run.json manifest.

    Returns the manifest.  I/O failures propagate as OSError after the
    manifest (when it can still be written) flags the incomplete file.
    """
    if not trajectory.snapshots:
        raise InvalidInputError("cannot write an empty trajectory")
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = trajectory.grid
    is_2d = grid.dim == 2
    manifest = {
        "status": status,
        "t_reached": trajectory.t_reached,
        "config": config_to_dict(config),
        "config_text": format_config(config),
        "files": [],
        "snapshots": [],
    }
    files = manifest["files"]

    def attempt(name: str, kind: str, header: list[str], rows) -> None:
        entry = {"name": name, "kind": kind, "rows": None, "complete": False}
        files.append(entry)
        entry["rows"] = _write_csv(out / name, header, rows)
        entry["complete"] = True

    try:
        attempt(
            "diagnostics.csv",
            "diagnostics",
            ["t", "mean", "l2", "max_slope"],
            (
                [_fmt(s.t), _fmt(s.diagnostics.mean), _fmt(s.diagnostics.l2), _fmt(s.diagnostics.max_slope)]
                for s in trajectory.snapshots
            ),
        )
        xs = [x.ravel() for x in grid.mesh]
        ks = [k.ravel() for k in np.meshgrid(*[np.sort(w) for w in grid.wavenumbers], indexing="ij")]
        for index, snap in enumerate(trajectory.snapshots):
            values = _observed(config, snap.values)
            snap_name = f"snap_{index:06d}.csv"
            spec_name = f"spectrum_{index:06d}.csv"
            header = ["x1", "x2", "f"] if is_2d else ["x1", "f"]
            attempt(
                snap_name,
                "snapshot",
                header,
                ([*(_fmt(x[i]) for x in xs), _fmt(v)] for i, v in enumerate(values.ravel())),
            )
            spectrum = transform(Field(grid, values))
            coeffs = [spectrum.coefficient(*(int(k[i]) for k in ks)) for i in range(ks[0].size)]
            attempt(
                spec_name,
                "spectrum",
                ["k", "k2", "re", "im"] if is_2d else ["k", "re", "im"],
                ([*(str(int(k[i])) for k in ks), _fmt(c.real), _fmt(c.imag)] for i, c in enumerate(coeffs)),
            )
            manifest["snapshots"].append(
                {"index": index, "step": snap.step, "t": snap.t, "snapshot": snap_name, "spectrum": spec_name}
            )
    except OSError:
        manifest["status"] = "io_error"
        try:
            _write_manifest(out, manifest)
        except OSError:
            pass
        raise
    _write_manifest(out, manifest)
    return manifest


def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "run.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(config: RunConfig) -> int:
    """Integrate the configured model and write outputs; returns the exit code."""
    try:
        initial = build_initial(config)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_PARSE
    except OSError as exc:
        log.error("cannot read initial data: %s", exc)
        return EXIT_IO

    grid = _grid(config)
    params = ModelParams(config.model, nu=config.nu, lam=config.lam, sigma=config.sigma)
    strip = None
    if config.model == "forchheimer2d":
        s = config.strip
        strip = StripGrid(grid, s.depth_truncation, s.panels, s.nodes_per_panel, s.grading)
    model = build_model(params, grid, strip)
    t = config.time
    step_config = StepConfig(t.dt, t.t_end, t.scheme, t.snapshot_stride, t.blowup_threshold)

    status, code = "completed", EXIT_OK
    try:
        trajectory = integrate(initial, model, step_config)
    except BlowUpError as exc:
        log.error("%s", exc)
        trajectory, status, code = exc.trajectory, "blowup", EXIT_BLOWUP
    except (InfeasibleDataError, TruncationError, InvalidInputError) as exc:
        log.error("infeasible data: %s", exc)
        return EXIT_INFEASIBLE

    try:
        write_outputs(trajectory, config, status)
    except OSError as exc:
        log.error("failed writing outputs: %s", exc)
        return EXIT_IO
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate", description="Run a weakly nonlinear porous-media interface simulation.")
    parser.add_argument("config", help="path to the key = value configuration file")
    parser.add_argument("--output-dir", help="override output_dir")
    parser.add_argument("--resolution", type=int, help="override resolution (points per direction)")
    parser.add_argument("--t-end", type=float, help="override time.t_end")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    try:
        config = parse_config(text)
        changes = {}
        if args.output_dir is not None:
            changes["output_dir"] = args.output_dir
        if args.resolution is not None:
            changes["resolution"] = args.resolution
        if args.t_end is not None:
            changes["time"] = dataclasses.replace(config.time, t_end=args.t_end)
        if changes:
            config = validate(dataclasses.replace(config, **changes))
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_PARSE
    code = run(config)
    if code == EXIT_OK:
        log.info("wrote outputs to %s", config.output_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
