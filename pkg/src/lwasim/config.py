"""Experiment configuration: JSON schema, defaults, overrides and validation.

A config is one JSON document::

    {
      "experiment": "beampattern" | "sumrate" | "music",
      "seed": <u64>,
      "output_dir": <path>,
      "scenario": {
        "band": {"f_min_hz", "f_max_hz", "n_bins"},
        "geometry": {"plate_sep_m", "slit_len_m", "leak_alpha_np_per_m" (null = 90 % leakage)},
        "users": {"count", "angles_deg" (null = random), "distances_m" (null = random),
                  "angle_range_deg", "distance_range_m"},
        "snr_db", "m_antennas"
      },
      "overrides": {experiment-specific knobs, see EXPERIMENT_SCHEMAS}
    }

Unknown keys are rejected everywhere.  `validate` raises `ConfigError`
carrying a machine-readable ``code`` and the dotted ``path`` of the fault.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .physics import C

EXPERIMENTS = ("beampattern", "sumrate", "music")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(properties, required=()):
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


_angle_grid = _obj({"start": _pos, "stop": _pos, "step": _pos}, ["start", "stop", "step"])
_search = _obj(
    {
        "plate_sep_m": {"type": "array", "items": _pos, "minItems": 1},
        "slit_len_m": {"type": "array", "items": _pos, "minItems": 1},
    },
    ["plate_sep_m", "slit_len_m"],
)

SCENARIO_SCHEMA = _obj(
    {
        "band": _obj(
            {"f_min_hz": _pos, "f_max_hz": _pos, "n_bins": {"type": "integer", "minimum": 2}},
            ["f_min_hz", "f_max_hz", "n_bins"],
        ),
        "geometry": _obj(
            {
                "plate_sep_m": _pos,
                "slit_len_m": _pos,
                "leak_alpha_np_per_m": {"type": ["number", "null"], "minimum": 0},
            },
            ["plate_sep_m", "slit_len_m"],
        ),
        "users": _obj(
            {
                "count": _count,
                "angles_deg": {"type": ["array", "null"], "items": _num},
                "distances_m": {"type": ["array", "null"], "items": _num},
                "angle_range_deg": _pair,
                "distance_range_m": _pair,
            },
            ["count"],
        ),
        "snr_db": _num,
        "m_antennas": _count,
    },
    ["band", "geometry", "users", "snr_db"],
)

EXPERIMENT_SCHEMAS = {
    "beampattern": _obj(
        {
            "angle_grid_deg": _angle_grid,
            "policy": {"enum": ["max-gain", "fair"]},
            "tune_geometry": {"type": "boolean"},
            "geometry_search": _search,
        }
    ),
    "sumrate": _obj(
        {
            "snr_db_list": {"type": "array", "items": _num, "minItems": 1},
            "trials": _count,
            "policy": {"enum": ["max-gain", "fair"]},
            "tune_geometry": {"type": "boolean"},
            "geometry_search": _search,
            "zf_selection": {"enum": ["greedy", "all"]},
            "zf_power": {"enum": ["global", "per-bin"]},
        }
    ),
    "music": _obj(
        {
            "angle_grid_deg": _angle_grid,
            "snapshots": _count,
            "k_sources": {"type": ["integer", "null"], "minimum": 1},
            "noiseless": {"type": "boolean"},
            "pilot_scheme": {"enum": ["qpsk", "orthogonal"]},
            "subband_len": {"type": ["integer", "null"], "minimum": 2},
        }
    ),
}


def config_schema(experiment: str) -> dict:
    return _obj(
        {
            "experiment": {"enum": list(EXPERIMENTS)},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "output_dir": {"type": "string"},
            "scenario": SCENARIO_SCHEMA,
            "overrides": EXPERIMENT_SCHEMAS[experiment],
        },
        ["experiment", "seed", "scenario"],
    )


_BAND = {"f_min_hz": 0.2e12, "f_max_hz": 0.8e12, "n_bins": 512}
_GEOMETRY = {"plate_sep_m": 0.8e-3, "slit_len_m": 20e-3, "leak_alpha_np_per_m": None}
_SEARCH = {
    "plate_sep_m": [0.76e-3, 0.87e-3, 0.98e-3, 1.09e-3, 1.2e-3],
    "slit_len_m": [10e-3, 15e-3, 20e-3, 25e-3, 30e-3],
}


def _scenario(count, snr_db, angles=None, distances=None, m_antennas=32):
    return {
        "band": dict(_BAND),
        "geometry": dict(_GEOMETRY),
        "users": {
            "count": count,
            "angles_deg": angles,
            "distances_m": distances,
            "angle_range_deg": [10.0, 80.0],
            "distance_range_m": [1.0, 5.0],
        },
        "snr_db": snr_db,
        "m_antennas": m_antennas,
    }


_DEFAULTS = {
    "beampattern": {
        "experiment": "beampattern",
        "seed": 1,
        "output_dir": "out/beampattern",
        "scenario": _scenario(8, 10.0),
        "overrides": {
            "angle_grid_deg": {"start": 0.25, "stop": 89.75, "step": 0.25},
            "policy": "max-gain",
            "tune_geometry": True,
            "geometry_search": _SEARCH,
        },
    },
    "sumrate": {
        "experiment": "sumrate",
        "seed": 1,
        "output_dir": "out/sumrate",
        "scenario": _scenario(32, 10.0, m_antennas=32),
        "overrides": {
            "snr_db_list": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            "trials": 20,
            "policy": "max-gain",
            "tune_geometry": True,
            "geometry_search": _SEARCH,
            "zf_selection": "greedy",
            "zf_power": "global",
        },
    },
    "music": {
        "experiment": "music",
        "seed": 1,
        "output_dir": "out/music",
        "scenario": _scenario(2, 0.0, angles=[30.0, 50.0], distances=[1.0, 1.0]),
        "overrides": {
            "angle_grid_deg": {"start": 0.5, "stop": 89.5, "step": 0.05},
            "snapshots": 64,
            "k_sources": None,
            "noiseless": False,
            "pilot_scheme": "qpsk",
            "subband_len": None,
        },
    },
}


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}", "unknown_experiment", "experiment")
    return copy.deepcopy(_DEFAULTS[experiment])


def merge_defaults(cfg: dict) -> dict:
    """Fill absent ``overrides`` entries (and ``output_dir``) from the experiment defaults."""
    out = copy.deepcopy(cfg)
    base = _DEFAULTS[cfg["experiment"]]
    out.setdefault("output_dir", base["output_dir"])
    overrides = copy.deepcopy(base["overrides"])
    overrides.update(out.get("overrides") or {})
    out["overrides"] = overrides
    users = out["scenario"]["users"]
    users.setdefault("angles_deg", None)
    users.setdefault("distances_m", None)
    users.setdefault("angle_range_deg", [10.0, 80.0])
    users.setdefault("distance_range_m", [1.0, 5.0])
    out["scenario"]["geometry"].setdefault("leak_alpha_np_per_m", None)
    out["scenario"].setdefault("m_antennas", base["scenario"]["m_antennas"])
    return out


_VALIDATOR_CODES = {
    "required": "missing_field",
    "additionalProperties": "unknown_key",
    "type": "wrong_type",
    "enum": "invalid_choice",
    "minimum": "out_of_range",
    "maximum": "out_of_range",
    "exclusiveMinimum": "out_of_range",
    "minItems": "bad_length",
    "maxItems": "bad_length",
}


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    path = ".".join(str(p) for p in err.absolute_path)
    code = _VALIDATOR_CODES.get(err.validator, "schema_violation")
    if err.validator == "required":
        missing = err.message.split("'")[1]
        path = f"{path}.{missing}" if path else missing
    elif err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            path = f"{path}.{extra[0]}" if path else extra[0]
    if path == "scenario.users.count" and code == "out_of_range":
        code = "no_users"
    return ConfigError(err.message, code, path)


def validate(cfg) -> dict:
    """Check a config against the schema and its cross-field rules; return it with defaults merged."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "wrong_type")
    experiment = cfg.get("experiment")
    if experiment not in EXPERIMENTS:
        if "experiment" not in cfg:
            raise ConfigError("'experiment' is a required property", "missing_field", "experiment")
        raise ConfigError(f"unknown experiment {experiment!r}", "unknown_experiment", "experiment")

    validator = jsonschema.Draft202012Validator(config_schema(experiment))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        raise _schema_error(errors[0])

    cfg = merge_defaults(cfg)
    sc = cfg["scenario"]
    band = sc["band"]
    if band["f_min_hz"] >= band["f_max_hz"]:
        raise ConfigError("band requires f_min_hz < f_max_hz", "invalid_band", "scenario.band")
    fc = C / (2.0 * sc["geometry"]["plate_sep_m"])
    if fc >= band["f_min_hz"]:
        raise ConfigError(
            f"cutoff {fc / 1e9:.4f} GHz is not below band start", "cutoff_violation", "scenario.geometry.plate_sep_m"
        )

    users = sc["users"]
    for key, lo, hi in (("angles_deg", 0.0, 90.0), ("distances_m", 0.0, float("inf"))):
        vals = users.get(key)
        if vals is None:
            continue
        if len(vals) != users["count"]:
            raise ConfigError(f"{key} must list one value per user", "count_mismatch", f"scenario.users.{key}")
        if any(not lo < v < hi for v in vals):
            raise ConfigError(f"{key} values must lie in ({lo}, {hi})", "out_of_range", f"scenario.users.{key}")
    if users.get("angles_deg") is not None and len(set(users["angles_deg"])) != len(users["angles_deg"]):
        raise ConfigError("user angles must be distinct", "duplicate_angles", "scenario.users.angles_deg")
    lo, hi = users["angle_range_deg"]
    if not 0.0 < lo < hi < 90.0:
        raise ConfigError("angle range must satisfy 0 < lo < hi < 90", "out_of_range", "scenario.users.angle_range_deg")
    lo, hi = users["distance_range_m"]
    if not 0.0 < lo < hi:
        raise ConfigError("distance range must satisfy 0 < lo < hi", "out_of_range", "scenario.users.distance_range_m")

    ov = cfg["overrides"]
    grid = ov.get("angle_grid_deg")
    if grid is not None and not (0.0 < grid["start"] < grid["stop"] < 90.0):
        raise ConfigError("angle grid must satisfy 0 < start < stop < 90", "out_of_range", "overrides.angle_grid_deg")
    search = ov.get("geometry_search")
    if search is not None and all(C / (2.0 * b) >= band["f_min_hz"] for b in search["plate_sep_m"]):
        raise ConfigError("no plate separation in the search grid is above cutoff", "cutoff_violation", "overrides.geometry_search")
    if experiment == "sumrate" and sc["m_antennas"] < users["count"]:
        raise ConfigError("zero-forcing baseline needs m_antennas >= user count", "too_few_antennas", "scenario.m_antennas")
    if experiment == "music":
        k = ov["k_sources"] if ov["k_sources"] is not None else users["count"]
        if k >= band["n_bins"]:
            raise ConfigError("k_sources must be below n_bins", "out_of_range", "overrides.k_sources")
        if ov["subband_len"] is not None and not (k < ov["subband_len"] <= band["n_bins"]):
            raise ConfigError("subband_len must lie in (k_sources, n_bins]", "out_of_range", "overrides.subband_len")
        if ov["pilot_scheme"] == "orthogonal" and ov["snapshots"] < users["count"]:
            raise ConfigError("orthogonal pilots need snapshots >= user count", "out_of_range", "overrides.snapshots")
    return cfg


def load(path) -> dict:
    """Read a config file; JSON syntax errors become ``ConfigError`` with code ``invalid_json``."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "invalid_json") from exc


def apply_set(cfg: dict, assignment: str) -> dict:
    """Apply one ``dotted.path=value`` override; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}", "bad_override")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"empty path component in {key!r}", "bad_override", key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    for p in parts[:-1]:
        nxt = node.get(p) if isinstance(node, dict) else None
        if nxt is None:
            nxt = {}
            node[p] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot descend into non-object at {p!r}", "bad_override", key)
        node = nxt
    node[parts[-1]] = value
    return cfg
