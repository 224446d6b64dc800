import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muskatsim import ExpansionState, parse_config
from muskatsim.cli import build_initial, main, run
from muskatsim.config import Mode, RunConfig, StripSettings, TimeSettings, format_config
from muskatsim.errors import ConfigError

MINIMAL = """\
model = darcy2d
resolution = 32
time.dt = 0.01
time.t_end = 0.1
initial.mode.a.k = 1
initial.mode.a.amplitude = 0.1
"""


def with_lines(base: str, *extra: str) -> str:
    return base + "".join(line + "\n" for line in extra)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


# ---- parsing -------------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model == "darcy2d"
    assert cfg.strip.depth_truncation == 18.0
    assert cfg.time.scheme == "if_rk2"
    assert cfg.time.snapshot_stride == 10
    assert cfg.nu == 0.0 and cfg.lam == 0.0 and cfg.sigma == 1.0
    assert cfg.modes == (Mode((1,), 0.1, 0.0),)


def test_comments_quotes_and_blank_lines():
    text = '# header\n\n' + MINIMAL + 'output_dir = "runs/a b"  \nnu = 0.2 # trailing\n'
    cfg = parse_config(text)
    assert cfg.output_dir == "runs/a b"
    assert cfg.nu == 0.2


@pytest.mark.parametrize(
    "text,key,line",
    [
        (MINIMAL.replace("darcy2d", "darcy4d"), "model", 1),
        (MINIMAL.replace("time.dt = 0.01", "time.dt = -0.1"), "time.dt", 3),
        (with_lines(MINIMAL, "colour = red"), "colour", 7),
        (with_lines(MINIMAL, "nu = 0.1", "nu = 0.2"), "nu", 8),
        (with_lines(MINIMAL, "time.scheme = euler"), "time.scheme", 7),
        (with_lines(MINIMAL, "resolution2 = 16"), "resolution2", 7),
        (with_lines(MINIMAL, "strip.panels = 2.5"), "strip.panels", 7),
        (with_lines(MINIMAL, "sigma = 0"), "sigma", 7),
    ],
)
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert info.value.line == line
    assert f"key '{key}'" in str(info.value) and f"line {line}" in str(info.value)


def test_missing_required_keys():
    for key in ("model", "resolution", "time.dt", "time.t_end"):
        text = "\n".join(line for line in MINIMAL.splitlines() if not line.startswith(key + " "))
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.key == key


def test_malformed_line():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "just words\n")
    assert info.value.line == 7


def test_mode_requires_amplitude():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "initial.mode.b.k = 2\n")


def test_modes_and_file_are_exclusive():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "initial.file = f.csv\n")


def test_3d_config():
    cfg = parse_config(
        "model = darcy3d_infinite\nresolution = 16\nresolution2 = 8\ntime.dt = 0.1\ntime.t_end = 1\n"
        "initial.mode.x.k = 1\ninitial.mode.x.k2 = -2\ninitial.mode.x.amplitude = 0.1\n"
    )
    assert cfg.grid_shape == (16, 8)
    assert cfg.modes[0].k == (1, -2)


finite = st.floats(0, 10, allow_nan=False, allow_infinity=False)


@st.composite
def run_configs(draw):
    model = draw(st.sampled_from(["linear2d", "darcy2d", "forchheimer2d", "darcy3d_finite", "expansion2d"]))
    is_3d = model.startswith("darcy3d")
    t_end = draw(st.floats(0.01, 5))
    modes = tuple(
        Mode(
            tuple(draw(st.integers(-5, 5)) for _ in range(2 if is_3d else 1)),
            draw(st.floats(-1, 1)),
            draw(st.floats(-math.pi, math.pi)),
        )
        for _ in range(draw(st.integers(0, 3)))
    )
    return RunConfig(
        model=model,
        resolution=2 * draw(st.integers(4, 64)),
        resolution2=2 * draw(st.integers(4, 16)) if is_3d else None,
        time=TimeSettings(t_end * draw(st.floats(0.001, 1)), t_end, draw(st.sampled_from(["if_rk2", "if_rk4"])), draw(st.integers(1, 50))),
        nu=draw(finite),
        lam=draw(finite),
        sigma=draw(st.floats(0.001, 1)),
        strip=StripSettings(draw(st.floats(1, 30)), draw(st.integers(1, 20)), draw(st.integers(2, 12)), draw(st.floats(1, 2))),
        modes=modes,
        output_dir=draw(st.sampled_from(["out", "runs/x", "a b"])),
    )


@settings(max_examples=60, deadline=None)
@given(run_configs())
def test_format_parse_round_trip(cfg):
    assert parse_config(format_config(cfg)) == cfg


# ---- initial data -----------------------------------------------------------------------


def test_single_mode_initial():
    cfg = parse_config(MINIMAL)
    f = build_initial(cfg)
    np.testing.assert_allclose(f.values, 0.1 * np.cos(f.grid.points[0]), atol=1e-16)


def test_empty_modes_give_zero_field():
    text = "\n".join(line for line in MINIMAL.splitlines() if "initial" not in line)
    assert build_initial(parse_config(text)).scale() == 0


def test_out_of_band_mode_rejected():
    with pytest.raises(ConfigError):
        build_initial(parse_config(MINIMAL.replace("initial.mode.a.k = 1", "initial.mode.a.k = 17")))
    with pytest.raises(ConfigError):
        build_initial(parse_config(MINIMAL.replace("initial.mode.a.k = 1", "initial.mode.a.k = 0")))


def test_expansion_initial_state():
    state = build_initial(parse_config(MINIMAL.replace("darcy2d", "expansion2d")))
    assert isinstance(state, ExpansionState)
    assert state.h1.scale() == 0
    np.testing.assert_allclose(state.h0.values, 0.1 * np.cos(state.grid.points[0]), atol=1e-16)


def _file_config(path):
    text = "\n".join(line for line in MINIMAL.splitlines() if "initial" not in line)
    return parse_config(text + f'\ninitial.file = "{path}"\n')


def test_initial_file_mean_projected(tmp_path):
    x = -np.pi + 2 * np.pi * np.arange(32) / 32
    path = tmp_path / "f.csv"
    path.write_text("x1,f\n" + "".join(f"{xi:.17g},{2 + np.sin(xi):.17g}\n" for xi in x))
    f = build_initial(_file_config(path))
    np.testing.assert_allclose(f.values, np.sin(x), atol=1e-14)


def test_initial_file_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\n" * 31 + "nan\n")
    with pytest.raises(ConfigError):
        build_initial(_file_config(bad))
    garbage = tmp_path / "garbage.csv"
    garbage.write_text("x1,f\nabc\n" + "0.5\n" * 31)
    with pytest.raises(ConfigError):
        build_initial(_file_config(garbage))
    short = tmp_path / "short.csv"
    short.write_text("0.5\n" * 10)
    with pytest.raises(ConfigError):
        build_initial(_file_config(short))


# ---- runs and outputs -----------------------------------------------------------------------


def run_text(tmp_path, text, name="out"):
    out = tmp_path / name
    cfg = parse_config(text + f'output_dir = "{out}"\n')
    return run(cfg), out, cfg


def test_linear_run_exact_decay(tmp_path):
    text = MINIMAL.replace("darcy2d", "linear2d").replace("time.t_end = 0.1", "time.t_end = 1") + "nu = 0.1\n"
    code, out, _ = run_text(tmp_path, text)
    assert code == 0
    _, rows = read_csv(out / "diagnostics.csv")
    l2 = [float(r[2]) for r in rows]
    assert float(rows[-1][0]) == 1.0
    assert l2[-1] == pytest.approx(math.exp(-1.1) * l2[0], rel=1e-10)
    assert all(b < a for a, b in zip(l2, l2[1:]))


def test_forchheimer_zero_lambda_matches_darcy(tmp_path):
    code_a, out_a, _ = run_text(tmp_path, MINIMAL + "nu = 0.05\n", "a")
    code_b, out_b, _ = run_text(tmp_path, MINIMAL.replace("darcy2d", "forchheimer2d") + "nu = 0.05\nlambda = 0\n", "b")
    assert code_a == code_b == 0
    for name in ("snap_000000.csv", "snap_000001.csv"):
        a = np.array([float(r[-1]) for r in read_csv(out_a / name)[1]])
        b = np.array([float(r[-1]) for r in read_csv(out_b / name)[1]])
        assert np.max(np.abs(a - b)) < 1e-12


def test_blowup_exit_code_and_partial_outputs(tmp_path):
    text = MINIMAL.replace("resolution = 32", "resolution = 64").replace("time.t_end = 0.1", "time.t_end = 2")
    text = text.replace("amplitude = 0.1", "amplitude = 20")
    code, out, _ = run_text(tmp_path, text)
    assert code == 4
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["status"] == "blowup"
    assert 0 < manifest["t_reached"] < 2
    for entry in manifest["files"]:
        assert (out / entry["name"]).exists() and entry["complete"]


def test_outputs_zero_field_and_row_counts(tmp_path):
    text = "\n".join(line for line in MINIMAL.splitlines() if "initial" not in line) + "\ntime.t_end = 0\n"
    text = text.replace("time.t_end = 0.1\n", "")
    code, out, cfg = run_text(tmp_path, text)
    assert code == 0
    header, rows = read_csv(out / "snap_000000.csv")
    assert header == ["x1", "f"]
    assert len(rows) == 32 and all(float(r[1]) == 0 for r in rows)


def test_spectrum_convention(tmp_path):
    code, out, _ = run_text(tmp_path, MINIMAL)
    header, rows = read_csv(out / "spectrum_000000.csv")
    assert header == ["k", "re", "im"]
    spectrum = {int(r[0]): (float(r[1]), float(r[2])) for r in rows}
    assert spectrum[1][0] == pytest.approx(0.05, abs=1e-17)
    assert spectrum[-1][0] == pytest.approx(0.05, abs=1e-17)
    assert max(abs(re) + abs(im) for k, (re, im) in spectrum.items() if abs(k) != 1) < 1e-17


def test_manifest_round_trip_and_files(tmp_path):
    code, out, cfg = run_text(tmp_path, MINIMAL + "time.snapshot_stride = 3\n")
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["status"] == "completed"
    assert parse_config(manifest["config_text"]) == cfg
    n_snap = len(manifest["snapshots"])
    assert n_snap == 5  # steps 0, 3, 6, 9, 10
    for entry in manifest["files"]:
        _, rows = read_csv(out / entry["name"])
        assert len(rows) == entry["rows"]
        assert entry["rows"] == (n_snap if entry["kind"] == "diagnostics" else 32)


def test_floats_have_17_digits(tmp_path):
    code, out, _ = run_text(tmp_path, MINIMAL)
    _, rows = read_csv(out / "snap_000001.csv")
    value = rows[3][1]
    assert float(value) == float(f"{float(value):.17g}") and value == f"{float(value):.17g}"


def test_reruns_are_byte_identical(tmp_path):
    text = MINIMAL.replace("darcy2d", "forchheimer2d") + "nu = 0.05\nlambda = 0.3\n"
    run_text(tmp_path, text, "a")
    run_text(tmp_path, text, "b")
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_3d_snapshot_layout(tmp_path):
    text = (
        "model = darcy3d_finite\nresolution = 16\nresolution2 = 8\ntime.dt = 0.01\ntime.t_end = 0.02\n"
        "initial.mode.a.k = 1\ninitial.mode.a.k2 = 1\ninitial.mode.a.amplitude = 0.2\n"
    )
    code, out, _ = run_text(tmp_path, text)
    assert code == 0
    header, rows = read_csv(out / "snap_000000.csv")
    assert header == ["x1", "x2", "f"]
    assert len(rows) == 128
    # row-major: x2 varies fastest
    assert rows[0][0] == rows[1][0] and rows[0][1] != rows[1][1]
    f = [float(r[2]) for r in rows]
    x1, x2 = float(rows[9][0]), float(rows[9][1])
    assert f[9] == pytest.approx(0.2 * np.cos(x1 + x2), abs=1e-15)
    header, rows = read_csv(out / "spectrum_000000.csv")
    assert header == ["k", "k2", "re", "im"]


# ---- command line -----------------------------------------------------------------------


def test_main_with_overrides(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(MINIMAL)
    out = tmp_path / "cli"
    code = main([str(cfg_path), "--output-dir", str(out), "--resolution", "16", "--t-end", "0.05"])
    assert code == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["config"]["resolution"] == 16
    assert manifest["config"]["time"]["t_end"] == 0.05
    assert manifest["t_reached"] == 0.05


def test_main_exit_codes(tmp_path):
    assert main([str(tmp_path / "missing.cfg")]) == 5
    bad = tmp_path / "bad.cfg"
    bad.write_text(MINIMAL.replace("darcy2d", "darcy4d"))
    assert main([str(bad)]) == 2
    good = tmp_path / "good.cfg"
    good.write_text(MINIMAL)
    assert main([str(good), "--resolution", "7"]) == 2
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    assert main([str(good), "--output-dir", str(blocker / "sub")]) == 5


def test_infeasible_data_exit_code(tmp_path):
    # non-decaying strip data: a truncation depth too shallow for the surface modes
    text = MINIMAL.replace("darcy2d", "forchheimer2d") + "lambda = 0.3\nstrip.depth_truncation = 0.5\n"
    code, _, _ = run_text(tmp_path, text)
    assert code == 3
