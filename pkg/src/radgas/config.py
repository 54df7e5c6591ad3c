"""Experiment configuration: INI files with typed sections.

Five sections, every key optional unless marked::

    [grid]        n (required), N (required), L (required)
    [initial]     name, amplitude, width, center, components, seed, band, axis
    [flux]        name, quadratic, cubic
    [integrator]  dt, scheme, t_end, outputs, t_first, dealias, blowup_factor
    [run]         suites, s, output_dir, figures, save_fields, label

Lists (``center``, ``quadratic``, ``cubic``, ``suites``) accept commas or
spaces.  ``t_end`` and ``s`` accept ``auto``.  Values are normalized into a
canonical nested dict whose JSON form is hashed for provenance.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
from pathlib import Path

from .analysis import sobolev_order
from .errors import ConfigError
from .grid import Grid
from .initial_data import INITIAL_NAMES, check_resolved, parse_components
from .integrator import SCHEMES, IntegratorConfig, geometric_times
from .model import FLUX_NAMES, FluxSpec

SUITES = ("linear", "nonlinear-decay", "profile")

AUTO = "auto"


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _words(text):
    if isinstance(text, (list, tuple)):
        return [str(v).strip() for v in text]
    return [w for w in str(text).replace(",", " ").split() if w]


def _auto_or(kind):
    def parse(text):
        if text is None or str(text).strip().lower() == AUTO:
            return AUTO
        return kind(text)
    return parse


def _str(text):
    return str(text).strip()


# section -> key -> (parser, default); a default of ``...`` marks a required key
SCHEMA = {
    "grid": {"n": (int, ...), "N": (int, ...), "L": (float, ...)},
    "initial": {
        "name": (_str, "gaussian"),
        "amplitude": (float, 0.1),
        "width": (float, 2.0),
        "center": (_floats, None),
        "components": (_str, None),
        "seed": (int, 0),
        "band": (int, 8),
        "axis": (int, 0),
    },
    "flux": {
        "name": (_str, "burgers"),
        "quadratic": (_floats, None),
        "cubic": (_floats, None),
    },
    "integrator": {
        "dt": (float, 0.05),
        "scheme": (_str, "exp-rk4"),
        "t_end": (_auto_or(float), AUTO),
        "outputs": (int, 64),
        "t_first": (float, 0.1),
        "dealias": (_bool, True),
        "blowup_factor": (float, 10.0),
    },
    "run": {
        "suites": (_words, list(SUITES)),
        "s": (_auto_or(int), AUTO),
        "output_dir": (_str, "runs/out"),
        "figures": (_bool, True),
        "save_fields": (_bool, False),
        "label": (_str, ""),
    },
}

# short names accepted by ``--axis`` and ``--set``
ALIASES = {
    "n": "grid.n", "N": "grid.N", "L": "grid.L",
    "amplitude": "initial.amplitude", "width": "initial.width", "seed": "initial.seed",
    "dt": "integrator.dt", "scheme": "integrator.scheme", "t_end": "integrator.t_end",
    "outputs": "integrator.outputs", "s": "run.s", "suites": "run.suites",
    "figures": "run.figures", "output_dir": "run.output_dir",
}


def resolve_key(key: str) -> tuple:
    key = ALIASES.get(key, key)
    if "." not in key:
        raise ConfigError(f"expected section.key, got {key!r}")
    section, name = key.split(".", 1)
    if section not in SCHEMA:
        raise ConfigError(f"unknown section {section!r}; sections are {sorted(SCHEMA)}")
    table = SCHEMA[section]
    # INI keys are case-insensitive; N and n differ only in case, so match
    # exactly first and then case-insensitively when unambiguous.
    if name not in table:
        matches = [k for k in table if k.lower() == name.lower()]
        if len(matches) != 1:
            raise ConfigError(f"unknown key {name!r} in [{section}]")
        name = matches[0]
    return section, name


class ExperimentConfig:
    """Validated experiment description backed by a canonical nested dict."""

    def __init__(self, data: dict):
        self.data = self._normalize(data)
        self._validate()

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_file(cls, path, overrides=None) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep case: grid.n and grid.N are distinct
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        raw = {section: dict(parser[section]) for section in parser.sections()}
        unknown = set(raw) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
        cfg = cls(raw)
        return cfg.with_overrides(overrides or {})

    @classmethod
    def from_string(cls, text: str, overrides=None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        raw = {section: dict(parser[section]) for section in parser.sections()}
        unknown = set(raw) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown sections {sorted(unknown)}")
        return cls(raw).with_overrides(overrides or {})

    def with_overrides(self, overrides) -> "ExperimentConfig":
        """New config with ``{"section.key": value}`` (or alias) replacements."""
        if not overrides:
            return self
        data = copy.deepcopy(self.data)
        for key, value in dict(overrides).items():
            section, name = resolve_key(key)
            data.setdefault(section, {})[name] = value
        return ExperimentConfig(data)

    def get(self, key: str):
        section, name = resolve_key(key)
        return self.data[section][name]

    @staticmethod
    def _normalize(data: dict) -> dict:
        out = {}
        for section, table in SCHEMA.items():
            given = dict(data.get(section, {}))
            values = {}
            for key, (parse, default) in table.items():
                match = [k for k in given if k == key] or [
                    k for k in given if k.lower() == key.lower() and k not in table
                ]
                if match:
                    raw = given.pop(match[0])
                    try:
                        values[key] = parse(raw) if raw is not None else None
                    except (TypeError, ValueError) as exc:
                        raise ConfigError(f"[{section}] {key}: {exc}") from exc
                elif default is ...:
                    raise ConfigError(f"[{section}] {key} is required")
                else:
                    values[key] = copy.deepcopy(default)
            if given:
                raise ConfigError(f"[{section}] unknown keys {sorted(given)}")
            out[section] = values
        return out

    # -- validation -------------------------------------------------------------

    def _validate(self):
        try:
            grid = self.grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        n = grid.n
        run = self.data["run"]
        bad = [s for s in run["suites"] if s not in SUITES]
        if bad or not run["suites"]:
            raise ConfigError(f"suites must be a non-empty subset of {SUITES}, got {run['suites']}")
        if run["s"] != AUTO:
            floor = sobolev_order(n)
            if run["s"] < floor:
                raise ConfigError(
                    f"s = {run['s']} is below the admissible order {floor} for n = {n}"
                )
        ini = self.data["initial"]
        if ini["name"] not in INITIAL_NAMES:
            raise ConfigError(f"unknown initial data {ini['name']!r}; choose from {INITIAL_NAMES}")
        if ini["name"] in ("gaussian", "derivative_of_gaussian"):
            check_resolved(grid, ini["width"])
        elif ini["name"] == "gaussian_mixture":
            if not ini["components"]:
                raise ConfigError("gaussian_mixture needs [initial] components")
            for _, width, _ in parse_components(ini["components"], n):
                check_resolved(grid, width)
        if ini["center"] is not None and len(ini["center"]) not in (1, n):
            raise ConfigError(f"center needs {n} coordinates")
        self.flux()
        integ = self.data["integrator"]
        if integ["scheme"] not in SCHEMES:
            raise ConfigError(f"unknown scheme {integ['scheme']!r}; choose from {SCHEMES}")
        if integ["outputs"] < 2:
            raise ConfigError("outputs must be at least 2")
        if not integ["t_first"] > 0:
            raise ConfigError("t_first must be positive")
        if integ["t_end"] != AUTO and not integ["t_end"] > integ["t_first"]:
            raise ConfigError("t_end must exceed t_first")
        self.integrator_config(1.0)

    # -- derived objects ----------------------------------------------------------

    def grid(self) -> Grid:
        g = self.data["grid"]
        return Grid(g["n"], g["N"], g["L"])

    def flux(self) -> FluxSpec:
        f = self.data["flux"]
        if f["name"] not in FLUX_NAMES:
            raise ConfigError(f"unknown flux {f['name']!r}; choose from {FLUX_NAMES}")
        return FluxSpec.from_name(f["name"], self.data["grid"]["n"], f["quadratic"], f["cubic"])

    @property
    def sobolev_s(self) -> int:
        s = self.data["run"]["s"]
        return sobolev_order(self.data["grid"]["n"]) if s == AUTO else s

    @property
    def suites(self) -> tuple:
        return tuple(self.data["run"]["suites"])

    @property
    def output_dir(self) -> Path:
        return Path(self.data["run"]["output_dir"])

    def initial_params(self) -> dict:
        ini = dict(self.data["initial"])
        ini.pop("name")
        return {k: v for k, v in ini.items() if v is not None}

    def output_times(self, t_end: float):
        integ = self.data["integrator"]
        return geometric_times(t_end, integ["outputs"], integ["t_first"])

    def integrator_config(self, t_end: float) -> IntegratorConfig:
        integ = self.data["integrator"]
        return IntegratorConfig(
            dt=integ["dt"],
            scheme=integ["scheme"],
            t_end=float(t_end),
            output_times=tuple(self.output_times(t_end)),
            dealias=integ["dealias"],
            blowup_factor=integ["blowup_factor"],
        )

    # -- identity --------------------------------------------------------------------

    def canonical(self) -> dict:
        """Plain-JSON nested dict; ``output_dir`` is excluded from the identity."""
        return copy.deepcopy(self.data)

    def digest(self) -> str:
        data = self.canonical()
        data["run"] = {k: v for k, v in data["run"].items() if k != "output_dir"}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_ini(self) -> str:
        lines = []
        for section, values in self.data.items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                if value is None:
                    continue
                if isinstance(value, list):
                    value = ", ".join(str(v) for v in value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def __repr__(self):
        g = self.data["grid"]
        return f"ExperimentConfig(n={g['n']}, N={g['N']}, L={g['L']}, suites={self.suites})"
