import copy
import json
import subprocess
import sys

import jsonschema
import pytest

from lwasim import __version__, cli, config
from lwasim.errors import ConfigError


def small(experiment, tmp_path, name="out"):
    """A default config shrunk so the experiment finishes in well under a second."""
    cfg = config.default_config(experiment)
    cfg["output_dir"] = str(tmp_path / name)
    cfg["scenario"]["band"]["n_bins"] = 64
    ov = cfg["overrides"]
    if experiment == "beampattern":
        cfg["scenario"]["users"]["count"] = 3
        ov["angle_grid_deg"] = {"start": 1.0, "stop": 89.0, "step": 1.0}
        ov["geometry_search"] = {"plate_sep_m": [0.8e-3, 1.0e-3], "slit_len_m": [0.02]}
    elif experiment == "sumrate":
        cfg["scenario"]["users"]["count"] = 4
        cfg["scenario"]["m_antennas"] = 4
        ov["trials"] = 2
        ov["snr_db_list"] = [0.0, 10.0]
        ov["geometry_search"] = {"plate_sep_m": [0.8e-3], "slit_len_m": [0.02]}
    else:
        ov["angle_grid_deg"] = {"start": 10.0, "stop": 70.0, "step": 0.1}
    return cfg


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    line = json.loads(err.strip().splitlines()[-1])
    assert line["status"] == "error"
    assert set(line) == {"status", "code", "path", "message"}
    return line


# -- schema ---------------------------------------------------------------------

@pytest.mark.parametrize("experiment", config.EXPERIMENTS)
def test_defaults_validate_against_schema(experiment):
    cfg = config.default_config(experiment)
    jsonschema.Draft202012Validator.check_schema(config.config_schema(experiment))
    jsonschema.validate(cfg, config.config_schema(experiment))
    assert config.validate(cfg) == cfg


def mutate(path, value=None, delete=False):
    def apply(cfg):
        node = cfg
        for p in path[:-1]:
            node = node[p]
        if delete:
            del node[path[-1]]
        else:
            node[path[-1]] = value
        return cfg

    return apply


MALFORMED = {
    "missing_field": mutate(["scenario", "band"], delete=True),
    "wrong_type": mutate(["scenario", "band", "n_bins"], "many"),
    "unknown_key": mutate(["scenario", "colour"], "blue"),
    "invalid_band": mutate(["scenario", "band", "f_min_hz"], 0.9e12),
    "no_users": mutate(["scenario", "users", "count"], 0),
    "unknown_experiment": mutate(["experiment"], "holography"),
    "cutoff_violation": mutate(["scenario", "geometry", "plate_sep_m"], 0.5e-3),
    "count_mismatch": mutate(["scenario", "users", "angles_deg"], [20.0, 30.0, 40.0]),
    "duplicate_angles": mutate(["scenario", "users", "angles_deg"], [30.0, 30.0]),
    "invalid_choice": mutate(["overrides", "pilot_scheme"], "chirp"),
    "out_of_range": mutate(["overrides", "snapshots"], 0),
    "bad_length": mutate(["scenario", "users", "angle_range_deg"], [10.0]),
}


@pytest.mark.parametrize("code", sorted(MALFORMED))
def test_malformed_config_rejected(code, tmp_path, capsys):
    cfg = MALFORMED[code](config.default_config("music"))
    with pytest.raises(ConfigError) as e:
        config.validate(cfg)
    assert e.value.code == code
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    exit_code, _, err = run_cli(["music", "--config", str(path)], capsys)
    assert exit_code == cli.EXIT_CONFIG
    assert error_line(err)["code"] == code


def test_malformed_codes_are_distinct():
    assert len(MALFORMED) >= 10
    assert len(set(MALFORMED)) == len(MALFORMED)


def test_too_few_antennas_rejected():
    cfg = config.default_config("sumrate")
    cfg["scenario"]["m_antennas"] = 8
    with pytest.raises(ConfigError) as e:
        config.validate(cfg)
    assert e.value.code == "too_few_antennas"


def test_error_paths_point_at_fault():
    cfg = config.default_config("beampattern")
    cfg["overrides"]["policy"] = "greedy"
    with pytest.raises(ConfigError) as e:
        config.validate(cfg)
    assert e.value.path == "overrides.policy"
    cfg = config.default_config("beampattern")
    del cfg["scenario"]["geometry"]["slit_len_m"]
    with pytest.raises(ConfigError) as e:
        config.validate(cfg)
    assert (e.value.code, e.value.path) == ("missing_field", "scenario.geometry.slit_len_m")


def test_overrides_are_optional():
    cfg = config.default_config("sumrate")
    del cfg["overrides"]
    del cfg["output_dir"]
    assert config.validate(cfg) == config.default_config("sumrate")


def test_apply_set():
    cfg = config.default_config("music")
    config.apply_set(cfg, "scenario.snr_db=5")
    config.apply_set(cfg, "overrides.pilot_scheme=orthogonal")
    config.apply_set(cfg, "scenario.users.angles_deg=[20, 40]")
    assert cfg["scenario"]["snr_db"] == 5
    assert cfg["overrides"]["pilot_scheme"] == "orthogonal"
    assert cfg["scenario"]["users"]["angles_deg"] == [20, 40]
    for bad in ("novalue", "a..b=1", "seed.x=1"):
        with pytest.raises(ConfigError) as e:
            config.apply_set(cfg, bad)
        assert e.value.code == "bad_override"


def test_load_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError) as e:
        config.load(p)
    assert e.value.code == "invalid_json"


# -- CLI -------------------------------------------------------------------------

@pytest.mark.parametrize("experiment", config.EXPERIMENTS)
def test_print_default_config_is_valid(experiment, capsys):
    code, out, _ = run_cli(["--print-default-config", experiment], capsys)
    assert code == 0
    cfg = json.loads(out)
    assert cfg == config.default_config(experiment)
    config.validate(cfg)


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_usage_errors(capsys):
    code, _, err = run_cli([], capsys)
    assert code == cli.EXIT_CONFIG and error_line(err)["code"] == "usage"
    code, _, err = run_cli(["holography"], capsys)
    assert code == cli.EXIT_CONFIG and error_line(err)["code"] == "usage"


def test_experiment_mismatch(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(config.default_config("music")))
    code, _, err = run_cli(["sumrate", "--config", str(p)], capsys)
    assert code == cli.EXIT_CONFIG and error_line(err)["code"] == "experiment_mismatch"


def test_missing_config_file_is_io_error(tmp_path, capsys):
    code, _, err = run_cli(["music", "--config", str(tmp_path / "nope.json")], capsys)
    assert code == cli.EXIT_IO and error_line(err)["code"] == "io_error"


def test_unwritable_output_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small("music", tmp_path)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run_cli(["music", "--config", str(p), "--out", str(blocker / "sub")], capsys)
    assert code == cli.EXIT_IO and error_line(err)["code"] == "io_error"


def test_peak_shortfall_exit_code(tmp_path, capsys):
    cfg = small("music", tmp_path)
    cfg["scenario"]["snr_db"] = -40.0
    cfg["overrides"]["k_sources"] = 40
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run_cli(["music", "--config", str(p)], capsys)
    assert code == cli.EXIT_NUMERIC and error_line(err)["code"] == "peak_shortfall"


def test_rank_deficiency_exit_code(tmp_path, capsys):
    cfg = small("sumrate", tmp_path)
    cfg["scenario"]["users"]["angles_deg"] = [30.0, 30.0 + 1e-13, 60.0, 70.0]  # distinct but numerically coincident
    cfg["scenario"]["users"]["distances_m"] = [1.0, 1.0, 2.0, 3.0]
    cfg["overrides"]["zf_selection"] = "all"
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run_cli(["sumrate", "--config", str(p)], capsys)
    assert code == cli.EXIT_NUMERIC and error_line(err)["code"] == "rank_deficient"


def read_outputs(out_dir):
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


@pytest.mark.parametrize("experiment", config.EXPERIMENTS)
def test_cli_runs_are_byte_identical(experiment, tmp_path, capsys):
    cfg = small(experiment, tmp_path)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, _, err = run_cli([experiment, "--config", str(p), "--out", str(out)], capsys)
        assert code == 0, err
        runs.append(read_outputs(out))
    docs = [json.loads(r.pop("run.json")) for r in runs]
    assert runs[0] == runs[1]
    assert b"\r\n" not in b"".join(runs[0].values())
    for doc in docs:
        doc["config"].pop("output_dir")
    assert docs[0] == docs[1]
    doc = docs[0]
    assert doc["version"] == __version__ and doc["config"]["experiment"] == experiment


def test_seed_and_set_flags_change_output(tmp_path, capsys):
    cfg = small("beampattern", tmp_path)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    base, other, snr = tmp_path / "base", tmp_path / "seed", tmp_path / "snr"
    assert run_cli(["beampattern", "--config", str(p), "--out", str(base)], capsys)[0] == 0
    assert run_cli(["beampattern", "--config", str(p), "--out", str(other), "--seed", "99"], capsys)[0] == 0
    assert run_cli(["beampattern", "--config", str(p), "--out", str(snr), "--set", "scenario.snr_db=0"], capsys)[0] == 0
    users = [(d / "users.csv").read_text() for d in (base, other, snr)]
    assert users[0] != users[1]
    resolved = json.loads((snr / "run.json").read_text())["config"]
    assert resolved["scenario"]["snr_db"] == 0
    assert json.loads((other / "run.json").read_text())["config"]["seed"] == 99


def test_csv_layouts(tmp_path, capsys):
    for experiment in config.EXPERIMENTS:
        cfg = small(experiment, tmp_path, experiment)
        p = tmp_path / f"{experiment}.json"
        p.write_text(json.dumps(cfg))
        assert run_cli([experiment, "--config", str(p)], capsys)[0] == 0
    bp = (tmp_path / "beampattern" / "beampattern.csv").read_text().splitlines()
    assert bp[0] == "angle_deg,freq_ghz,energy_db"
    assert len(bp) == 1 + 89 * 64
    # angle-major: the first 64 data rows share one angle
    assert len({row.split(",")[0] for row in bp[1:65]}) == 1
    assert (tmp_path / "beampattern" / "users.csv").read_text().splitlines()[0] == "user,angle_deg,dist_m,rate_bits_per_bin"
    sr = (tmp_path / "sumrate" / "sumrate.csv").read_text().splitlines()
    assert sr[0] == "snr_db,scheme,sum_rate_mean,sum_rate_stderr"
    assert [r.split(",")[1] for r in sr[1:4]] == ["lwa", "digital_zf", "hybrid_1rf"]
    mu = (tmp_path / "music" / "music.csv").read_text().splitlines()
    assert mu[0] == "angle_deg,pseudo_spectrum_db" and len(mu) == 1 + 601
    pk = (tmp_path / "music" / "peaks.csv").read_text().splitlines()
    assert pk[0] == "peak_angle_deg,true_angle_deg,abs_error_deg" and len(pk) == 3


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lwasim", "--print-default-config", "music"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["experiment"] == "music"
    bad = copy.deepcopy(config.default_config("music"))
    bad["scenario"]["users"]["count"] = 0
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    proc = subprocess.run([sys.executable, "-m", "lwasim", "music", "--config", str(p)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["code"] == "no_users"
