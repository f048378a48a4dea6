"""Scenario configuration: flat dotted keys in a TOML file.

Every physical parameter has a default.  A file only lists what it
overrides; keys the schema does not know are rejected so that a misspelt
parameter can never fall back to its default silently.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


@dataclass(frozen=True)
class Field:
    default: Any
    kind: str  # float, int, str, bool, floats
    doc: str
    check: str = ""  # "", ">0", ">=0", "(0,1]", "[0,1)", "choice"
    choices: Tuple[str, ...] = ()


def _f(default, doc, check=""):
    return Field(float(default), "float", doc, check)


def _i(default, doc, check=">=0"):
    return Field(int(default), "int", doc, check)


def _s(default, doc, choices):
    return Field(default, "str", doc, "choice", tuple(choices))


SCHEMA: Dict[str, Field] = {
    "link.H_m": _f(200e3, "satellite altitude", ">0"),
    "link.D_m": _f(10.0, "receiver depth below the calm surface", ">0"),
    "link.zeta_deg": _f(0.0, "transmit zenith angle", "[0,90)"),
    "link.eta": _f(0.75, "air/water refractive-index ratio", "(0,1)"),
    "beam.wavelength_m": _f(532e-9, "laser wavelength", ">0"),
    "beam.divergence_rad": _f(22e-6, "full divergence angle", ">0"),
    "beam.power_W": _f(5.0, "transmit power", ">0"),
    "beam.xi_t": _f(0.7, "atmospheric transmittance", "(0,1]"),
    "atmosphere.preset": _s("weak", "turbulence preset", ("weak", "strong", "custom")),
    "atmosphere.cn2_ground": _f(1.7e-17, "ground C_n^2 used by the custom preset, m^-2/3", ">=0"),
    "atmosphere.wind_m_s": _f(21.0, "high-altitude rms wind speed", ">=0"),
    "atmosphere.outer_scale_m": _f(10.0, "turbulence outer scale", ">0"),
    "grid.cell_m": _f(0.1, "side of a receiving-grid cell above the surface", ">0"),
    "grid.m": _i(0, "cells per side; 0 derives it from grid.cell_m"),
    "fading.mode": _s("sampled", "one correlated fading draw or unit weights", ("sampled", "mean")),
    "surface.wind_m_s": _f(6.0, "wind speed at the sea surface", ">0"),
    "surface.size_m": _f(0.0, "side of the synthesized patch; 0 sizes it to the footprint", ">=0"),
    "surface.samples": _i(512, "samples per side of the synthesized patch", ">0"),
    "water.preset": _s("clear", "water type", ("clear", "coastal", "custom")),
    "water.k_a": _f(0.069, "absorption coefficient of the custom water, 1/m", ">0"),
    "water.k_s": _f(0.080, "scattering coefficient of the custom water, 1/m", ">0"),
    "water.g": _f(0.8708, "HG asymmetry of the custom water", "(-1,1)"),
    "ocean.preset": _s("weak", "oceanic turbulence preset", ("weak", "strong", "none", "custom")),
    "ocean.epsilon": _f(1e-2, "kinetic energy dissipation of the custom preset, m^2/s^3", ">0"),
    "ocean.chi_T": _f(1e-5, "temperature variance dissipation of the custom preset, K^2/s", ">=0"),
    "ocean.omega": _f(-3.0, "temperature/salinity ratio of the custom preset", "<0"),
    "receiver.aperture_m2": _f(1.77e-4, "aperture area", ">0"),
    "receiver.theta_deg": _f(90.0, "elevation of the FOV axis", "[-90,90]"),
    "receiver.phi_deg": _f(90.0, "azimuth of the FOV axis", ""),
    "receiver.fov_deg": _f(90.0, "FOV half angle", "(0,180]"),
    "noise.temperature_K": _f(300.0, "receiver temperature", ">0"),
    "noise.bandwidth_Hz": _f(1e9, "noise bandwidth", ">0"),
    "noise.resistance_ohm": _f(1e6, "load resistance", ">0"),
    "noise.responsivity": _f(0.7, "detector responsivity, A/W", ">0"),
    "sim.photons": _i(100_000, "photons per run", ">0"),
    "sim.seed": _i(1, "run seed"),
    "sim.orders": _i(4, "scattering orders scored", ">0"),
    "sim.batch": _i(4096, "photons per batch", ">0"),
    "map.cells": _i(40, "receiver lattice points per side", ">0"),
    "map.half_width_m": _f(0.0, "lattice half width; 0 uses the long-term spot radius", ">=0"),
    "ber.variable": _s("power", "swept quantity of ber-sweep", ("power", "zeta")),
    "ber.power_dbm": Field(tuple(-10.0 + 2.5 * i for i in range(13)), "floats", "transmit powers, dBm"),
    "ber.zeta_deg": Field((0.0, 15.0, 30.0, 45.0), "floats", "transmit zenith angles, degrees"),
    "ber.force_zero_scintillation": Field(False, "bool", "evaluate BER with sigma_tur^2 = 0"),
    "outage.gamma_th_db": Field(tuple(40.0 + 2.5 * i for i in range(25)), "floats", "SNR thresholds, dB"),
    "interface.samples": _i(1_000_000, "brute-force refraction samples per case", ">0"),
    "interface.zeta_deg": Field((0.0, 15.0, 30.0, 45.0), "floats", "validation zenith angles"),
    "interface.wind_m_s": Field((3.0, 6.0, 12.0), "floats", "validation wind speeds"),
}


def _check_value(key: str, f: Field, v):
    if f.kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        v = float(v)
        if math.isnan(v):
            raise ConfigError(f"{key}: NaN is not allowed")
    elif f.kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
    elif f.kind == "str":
        if not isinstance(v, str):
            raise ConfigError(f"{key}: expected a string, got {v!r}")
        if v not in f.choices:
            raise ConfigError(f"{key}: {v!r} is not one of {', '.join(f.choices)}")
        return v
    elif f.kind == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected true or false, got {v!r}")
        return v
    elif f.kind == "floats":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(f"{key}: expected a non-empty list of numbers")
        out = []
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ConfigError(f"{key}: list entries must be finite numbers, got {x!r}")
            out.append(float(x))
        return tuple(out)
    c = f.check
    bad = {
        ">0": lambda x: not x > 0,
        ">=0": lambda x: not x >= 0,
        "<0": lambda x: not x < 0,
        "(0,1]": lambda x: not 0 < x <= 1,
        "(0,1)": lambda x: not 0 < x < 1,
        "(-1,1)": lambda x: not -1 < x < 1,
        "[0,90)": lambda x: not 0 <= x < 90,
        "[-90,90]": lambda x: not -90 <= x <= 90,
        "(0,180]": lambda x: not 0 < x <= 180,
        "": lambda x: not math.isfinite(x),
    }[c](v)
    if bad or (isinstance(v, float) and not math.isfinite(v)):
        raise ConfigError(f"{key}: {v!r} violates {c or 'finite'}")
    return v


def _flatten(tree: Mapping, prefix: str = "") -> Dict[str, Any]:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


class Scenario:
    """Validated, immutable set of flat dotted parameters."""

    __slots__ = ("_values",)

    def __init__(self, overrides: Mapping[str, Any] = None):
        values = {k: f.default for k, f in SCHEMA.items()}
        for k, v in (overrides or {}).items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            values[k] = _check_value(k, SCHEMA[k], v)
        object.__setattr__(self, "_values", values)

    def __getitem__(self, key: str):
        return self._values[key]

    def __setattr__(self, name, value):
        raise AttributeError("Scenario is immutable; use replace()")

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return f"Scenario({self.hash})"

    def replace(self, **changes) -> "Scenario":
        """Copy with keys given as ``section__name=value`` or a mapping of dotted keys."""
        return self.with_values({k.replace("__", "."): v for k, v in changes.items()})

    def with_values(self, changes: Mapping[str, Any]) -> "Scenario":
        merged = dict(self._values)
        merged.update(changes)
        return Scenario(merged)

    def items(self) -> Iterable[Tuple[str, Any]]:
        return sorted(self._values.items())

    def canonical(self) -> str:
        return json.dumps({k: list(v) if isinstance(v, tuple) else v for k, v in self.items()},
                          sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        """Stable digest of the canonical parameter set."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def to_toml(self) -> str:
        lines = [f"# stulc {__version__} scenario {self.hash}"]
        section = None
        for k, v in self.items():
            head = k.split(".", 1)[0]
            if head != section:
                if section is not None:
                    lines.append("")
                section = head
            lines.append(f"{k} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_toml())
        return path

    @classmethod
    def from_toml(cls, text: str) -> "Scenario":
        try:
            tree = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(_flatten(tree))

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_toml(text)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, tuple):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {v!r}")


DEFAULT_SCENARIO = Scenario()
