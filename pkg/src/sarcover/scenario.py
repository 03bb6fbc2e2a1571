"""Scenario files: JSON ingestion with unit conversion, serialisation, bundled presets.

A scenario file is a JSON object.  Each parameter is given either as a bare
number in its default unit, as a string such as ``"40 dBm"``, or as
``{"value": 40, "unit": "dBm"}``.  ``bs_position`` is a list of three metres.
An optional integer ``m`` overrides the number of slots per sweep.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
import re

from .geometry import RadarGeometry
from .linkbudget import CommParams, SarParams
from .problem import ScenarioParams


class ScenarioError(ValueError):
    pass


class MissingKey(ScenarioError, KeyError):
    def __init__(self, key):
        super().__init__(f"scenario is missing required key {key!r}")
        self.key = key

    def __str__(self):
        return self.args[0]


class UnitParseError(ScenarioError):
    pass


def _db(v):
    return 10.0 ** (v / 10.0)


def _dbm(v):
    return 10.0 ** ((v - 30.0) / 10.0)


_POWER = {"W": 1.0, "mW": 1e-3, "dBm": _dbm, "dBW": _db}
_RATIO = {"lin": 1.0, "dB": _db}
_ANGLE = {"deg": math.radians, "rad": 1.0}
_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_LENGTH = {"m": 1.0, "km": 1e3}

# key -> (default unit, accepted units); values are converted to SI on load
UNITS = {
    "f": ("GHz", _FREQ),
    "L": ("m", _LENGTH),
    "z_max": ("m", _LENGTH),
    "z_min": ("m", _LENGTH),
    "delta_y": ("m", _LENGTH),
    "theta_d": ("deg", _ANGLE),
    "theta_3db": ("deg", _ANGLE),
    "snr_min": ("dB", _RATIO),
    "prf": ("Hz", _FREQ),
    "p_com_max": ("dBm", _POWER),
    "beta": ("W^-1 m^3", {"W^-1 m^3": 1.0}),
    "tau_p": ("us", {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}),
    "b_r": ("MHz", _FREQ),
    "b_c": ("MHz", _FREQ),
    "gamma_db": ("dB", _RATIO),
    "q_start_wh": ("Wh", {"Wh": 3600.0, "J": 1.0, "kJ": 1e3}),
    "p_prop": ("W", _POWER),
    "v": ("m/s", {"m/s": 1.0, "km/h": 1.0 / 3.6}),
    "p_sar_max": ("dBm", _POWER),
    "r_sl": ("kbit/s", {"bit/s": 1.0, "kbit/s": 1e3, "Mbit/s": 1e6}),
}

# unit written back by ``scenario_to_dict`` (identity conversion, so values round-trip)
SI_UNITS = {"f": "Hz", "L": "m", "z_max": "m", "z_min": "m", "delta_y": "m",
            "theta_d": "rad", "theta_3db": "rad", "snr_min": "lin", "prf": "Hz",
            "p_com_max": "W", "beta": "W^-1 m^3", "tau_p": "s", "b_r": "Hz", "b_c": "Hz",
            "gamma_db": "lin", "q_start_wh": "J", "p_prop": "W", "v": "m/s",
            "p_sar_max": "W", "r_sl": "bit/s"}

DEFAULTS = {
    "f": 2.0, "L": 50.0, "z_max": 100.0, "z_min": 5.0, "delta_y": 0.5,
    "theta_d": 45.0, "theta_3db": 30.0, "snr_min": 20.0, "prf": 100.0,
    "p_com_max": 40.0, "beta": 1e4, "tau_p": 1.0, "b_r": 100.0, "b_c": 100.0,
    "gamma_db": 20.0, "q_start_wh": 100.0, "p_prop": 140.0, "v": 5.0,
    "p_sar_max": 46.0, "r_sl": 1.0,
}

BUNDLED = ("bs_left", "bs_middle", "bs_far_right", "bs_near_right")

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S.*?)?\s*$")


def _convert(key, raw):
    default, accepted = UNITS[key]
    if isinstance(raw, dict):
        if "value" not in raw:
            raise UnitParseError(f"{key}: object form needs a 'value' field")
        value, unit = raw["value"], raw.get("unit", default)
    elif isinstance(raw, str):
        m = _QUANTITY.match(raw)
        if not m:
            raise UnitParseError(f"{key}: cannot parse quantity {raw!r}")
        value, unit = m.group(1), m.group(2) or default
    else:
        value, unit = raw, default
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise UnitParseError(f"{key}: value {value!r} is not a number") from None
    if not math.isfinite(value):
        raise UnitParseError(f"{key}: value must be finite")
    if unit not in accepted:
        raise UnitParseError(f"{key}: unknown unit {unit!r} (accepted: {', '.join(accepted)})")
    conv = accepted[unit]
    return conv(value) if callable(conv) else value * conv


def scenario_from_dict(d: dict) -> ScenarioParams:
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    si = {}
    for key in UNITS:
        if key not in d:
            raise MissingKey(key)
        si[key] = _convert(key, d[key])
    if "bs_position" not in d:
        raise MissingKey("bs_position")
    bs = d["bs_position"]
    try:
        bs = tuple(float(v) for v in bs)
    except (TypeError, ValueError):
        raise ScenarioError("bs_position must be three numbers") from None
    if len(bs) != 3:
        raise ScenarioError("bs_position must be three numbers")
    m = d.get("m")
    if m is not None and (not isinstance(m, int) or m < 1):
        raise ScenarioError("m must be a positive integer")
    try:
        geom = RadarGeometry(si["theta_d"], si["theta_3db"])
        sar = SarParams(bandwidth_radar=si["b_r"], pulse_duration=si["tau_p"], prf=si["prf"],
                        snr_min=si["snr_min"], beta=si["beta"])
        comm = CommParams.build(sar, geom, bandwidth_comm=si["b_c"], gamma=si["gamma_db"],
                                rate_overhead=si["r_sl"], bs_position=bs,
                                p_com_max=si["p_com_max"])
        s = ScenarioParams(geom=geom, sar=sar, comm=comm, q_start=si["q_start_wh"],
                           p_prop=si["p_prop"], p_sar_max=si["p_sar_max"], z_min=si["z_min"],
                           z_max=si["z_max"], speed=si["v"], aoi_length=si["L"],
                           delta_y=si["delta_y"], carrier_freq=si["f"], slots_override=m)
        s.plan(1)
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc
    return s


def parse_scenario(path) -> ScenarioParams:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def scenario_to_dict(s: ScenarioParams) -> dict:
    values = {
        "f": s.carrier_freq, "L": s.aoi_length, "z_max": s.z_max, "z_min": s.z_min,
        "delta_y": s.delta_y, "theta_d": s.geom.theta_d, "theta_3db": s.geom.theta_3db,
        "snr_min": s.sar.snr_min, "prf": s.sar.prf, "p_com_max": s.comm.p_com_max,
        "beta": s.sar.beta, "tau_p": s.sar.pulse_duration, "b_r": s.sar.bandwidth_radar,
        "b_c": s.comm.bandwidth_comm, "gamma_db": s.comm.gamma, "q_start_wh": s.q_start,
        "p_prop": s.p_prop, "v": s.speed, "p_sar_max": s.p_sar_max,
        "r_sl": s.comm.rate_overhead,
    }
    out = {k: {"value": v, "unit": SI_UNITS[k]} for k, v in values.items()}
    out["bs_position"] = list(s.comm.bs_position)
    if s.slots_override is not None:
        out["m"] = int(s.slots_override)
    return out


def serialize_scenario(s: ScenarioParams, path=None) -> str:
    text = json.dumps(scenario_to_dict(s), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def default_scenario(bs_position=(-150.0, 25.0, 25.0), **overrides) -> ScenarioParams:
    """Default system parameters with the given base-station position."""
    d = dict(DEFAULTS)
    d.update(overrides)
    d["bs_position"] = list(bs_position)
    return scenario_from_dict(d)


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ScenarioError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("sarcover") / "scenarios" / f"{name}.json"))


def bundled_scenario(name: str) -> ScenarioParams:
    return parse_scenario(bundled_path(name))
