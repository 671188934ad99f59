"""Scenario configuration: YAML schema, validation with line numbers, and resolution to domain objects.

Rates in the file are in eV unless a section sets ``rate_unit``; times in fs;
pulse areas and phases in units of pi. Unknown keys are errors.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import IntegratorConfig, SystemParams
from .errors import ValidationError
from .units import HBAR_EV_FS, fwhm_to_sigma, lifetime_ns_to_gamma

SCHEMA_VERSION = 1

_RATE_UNITS = {"eV": 1.0 / HBAR_EV_FS, "neV": 1e-9 / HBAR_EV_FS, "rad/fs": 1.0}

# Leaf types: a type or tuple of types; nested dicts are sub-sections.
_NUM = (int, float)
_LIST = list

SCHEMA: dict = {
    "schema_version": int,
    "seed": int,
    "system": {
        "reference": str,
        "n_atoms": int,
        "rate_unit": str,
        "gamma": _NUM,
        "lifetime_ns": _NUM,
        "g": _NUM,
        "g_sqrt_n": _NUM,
        "kappa": _NUM,
        "kappa_r": _NUM,
        "delta_c": _NUM,
        "delta_c_in_kappa": _NUM,
        "stack": {
            "energy_kev": _NUM,
            "isotope": str,
            "layers": _LIST,
        },
    },
    "pulse": {
        "gaussian": {"sigma_t_fs": _NUM, "t_fwhm_fs": _NUM, "area_pi": _NUM},
        "sase": {"sigma_t_fs": _NUM, "t_fwhm_fs": _NUM, "f_sase": _NUM, "n_pulses": int, "area_pi": _NUM, "groups": int},
        "file": {"path": str, "area_pi": _NUM},
    },
    "sweep": {"values_pi": _LIST, "start_pi": _NUM, "stop_pi": _NUM, "points": int},
    "integrator": {"method": str, "rtol": _NUM, "atol": _NUM, "tail_tolerance": _NUM, "max_tail": _NUM, "pulse_max_step": _NUM, "tail_max_step": _NUM},
    "analysis": {"threshold": _NUM, "half_range": _NUM, "half_window": _NUM, "pad_factor": int, "floor": _NUM},
    "output": {"dir": str, "jz_trace": bool, "time_trace": bool, "digits": int},
    "toy": {
        "phi_pi": _LIST,
        "phase_pi": _LIST,
        "d": _NUM,
        "beta": _NUM,
        "gamma": _NUM,
        "half_range": _NUM,
        "points": int,
    },
    "optimize": {
        "isotopes": _LIST,
        "mirrors": _LIST,
        "d_top_nm": {"start": _NUM, "stop": _NUM, "step": _NUM},
        "d_cen_nm": {"start": _NUM, "stop": _NUM, "step": _NUM},
        "t_fwhm_fs": _NUM,
        "curve_t_fwhm_fs": _LIST,
        "convention": str,
    },
}

LAYER_KEYS = {"material": str, "thickness_nm": (int, float, type(None)), "delta": _NUM, "beta": _NUM, "resonant": bool}


class ConfigError(ValidationError):
    """Validation failure located in the configuration file."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)
        self.line = line


# ---------------------------------------------------------------------------
# Parsing with line marks


def _marks(node, path=(), out=None) -> dict:
    """Map key paths to 1-based line numbers."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = path + (k.value,)
            out[sub] = k.start_mark.line + 1
            _marks(v, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, path + (i,), out)
    return out


def _type_name(t) -> str:
    if isinstance(t, tuple):
        return " or ".join(_type_name(x) for x in t if x is not type(None))
    return {int: "integer", float: "number", str: "string", bool: "boolean", list: "list"}.get(t, t.__name__)


def _check(obj, schema: dict, path: tuple, marks: dict, source: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"section '{'.'.join(map(str, path)) or 'top level'}' must be a mapping", marks.get(path), source)
    for key, value in obj.items():
        sub = path + (key,)
        line = marks.get(sub)
        if key not in schema:
            allowed = ", ".join(sorted(schema))
            raise ConfigError(f"unknown key '{'.'.join(map(str, sub))}' (allowed: {allowed})", line, source)
        spec = schema[key]
        if isinstance(spec, dict):
            _check(value, spec, sub, marks, source)
            continue
        types = spec if isinstance(spec, tuple) else (spec,)
        ok = isinstance(value, types) and not (isinstance(value, bool) and bool not in types)
        if not ok:
            raise ConfigError(f"'{'.'.join(map(str, sub))}' must be a {_type_name(spec)}, got {value!r}", line, source)


# ---------------------------------------------------------------------------
# Resolved sections


@dataclass(frozen=True)
class GaussianSpec:
    sigma_t: float
    area: float | None = None


@dataclass(frozen=True)
class SaseSpec:
    sigma_t: float
    f_sase: float
    n_pulses: int
    area: float | None = None
    groups: int = 0


@dataclass(frozen=True)
class PulseFileSpec:
    path: str
    area: float | None = None


@dataclass(frozen=True)
class AnalysisSpec:
    threshold: float = 2e-3
    half_range: float = 40.0
    half_window: float = 40.0
    pad_factor: int = 8
    floor: float = 1e-6


@dataclass(frozen=True)
class OutputSpec:
    dir: str | None = None
    jz_trace: bool = True
    time_trace: bool = False
    digits: int = 12


@dataclass(frozen=True)
class ToySpec:
    phi: tuple[float, ...] = (math.pi / 50, 1.5 * math.pi, math.pi)
    phase: tuple[float, ...] = (0.0, 0.5 * math.pi)
    d: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    half_range: float = 20.0
    points: int = 2001


@dataclass(frozen=True)
class OptimizeSpec:
    isotopes: tuple[str, ...]
    mirrors: tuple[str, ...] = ("Pt", "Pd")
    d_top: tuple[float, ...] = tuple(np.arange(1.0, 10.01, 0.5))
    d_cen: tuple[float, ...] = tuple(np.arange(6.0, 40.01, 1.0))
    t_fwhm: float = 100.0
    curve_t_fwhm: tuple[float, ...] = tuple(np.geomspace(1.0, 1e4, 41))
    convention: str = "table"


@dataclass(frozen=True)
class StackSpec:
    energy_kev: float
    isotope: str | None
    layers: tuple[dict, ...]


@dataclass
class ScenarioConfig:
    """Validated scenario. ``system`` is resolved lazily because a stack needs a fit first."""

    schema_version: int
    seed: int
    raw: dict
    system: SystemParams | None = None
    stack: StackSpec | None = None
    pulse: GaussianSpec | SaseSpec | PulseFileSpec | None = None
    sweep: tuple[float, ...] = ()
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    toy: ToySpec | None = None
    optimize: OptimizeSpec | None = None
    source: str = "<config>"
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical parsed configuration with the effective seed; output.dir excluded."""
        data = json.loads(json.dumps(self.raw, sort_keys=True, default=str))
        data.get("output", {}).pop("dir", None)
        data["seed"] = self.seed
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        out = ScenarioConfig(**{**self.__dict__})
        out.seed = int(seed)
        return out

    def require_system(self) -> SystemParams:
        if self.system is None:
            raise ConfigError("this command needs explicit system parameters or system.reference", None, self.source)
        return self.system


def _rate(sec: dict, key: str, unit: float) -> float | None:
    return None if key not in sec else float(sec[key]) * unit


def _system(sec: dict, marks: dict, source: str) -> tuple[SystemParams | None, StackSpec | None]:
    line = marks.get(("system",))
    unit_name = sec.get("rate_unit", "eV")
    if unit_name not in _RATE_UNITS:
        raise ConfigError(f"system.rate_unit must be one of {sorted(_RATE_UNITS)}", marks.get(("system", "rate_unit")), source)
    unit = _RATE_UNITS[unit_name]
    n = sec.get("n_atoms", 100)
    if n < 1:
        raise ConfigError("system.n_atoms must be >= 1", marks.get(("system", "n_atoms")), source)
    stack = None
    if "stack" in sec:
        st = sec["stack"]
        for k in ("energy_kev", "layers"):
            if k not in st:
                raise ConfigError(f"system.stack.{k} is required", marks.get(("system", "stack")), source)
        layers = []
        for i, lay in enumerate(st["layers"]):
            _check(lay, LAYER_KEYS, ("system", "stack", "layers", i), marks, source)
            for k in ("material", "thickness_nm"):
                if k not in lay:
                    raise ConfigError(f"layer {i} needs '{k}'", marks.get(("system", "stack", "layers", i)), source)
            layers.append(dict(lay))
        stack = StackSpec(float(st["energy_kev"]), st.get("isotope"), tuple(layers))
    if "delta_c" in sec and "delta_c_in_kappa" in sec:
        raise ConfigError("give either system.delta_c or system.delta_c_in_kappa", marks.get(("system", "delta_c")), source)
    if "reference" in sec:
        if sec["reference"] != "paper_cavity":
            raise ConfigError("system.reference must be 'paper_cavity'", marks.get(("system", "reference")), source)
        extra = set(sec) - {"reference", "n_atoms", "delta_c_in_kappa", "delta_c", "rate_unit"}
        if extra:
            raise ConfigError(f"system.reference cannot be combined with {sorted(extra)}", line, source)
        from .cavity import reference_params

        p = reference_params(n, float(sec.get("delta_c_in_kappa", 1.0)))
        if "delta_c" in sec:
            p = SystemParams(p.n_atoms, p.gamma, p.g, p.kappa, p.kappa_r, float(sec["delta_c"]) * unit)
        return p, stack
    keys = {"gamma", "lifetime_ns", "g", "g_sqrt_n", "kappa", "kappa_r"}
    if not keys & set(sec):
        return None, stack
    if ("g" in sec) == ("g_sqrt_n" in sec):
        raise ConfigError("give exactly one of system.g and system.g_sqrt_n", line, source)
    if ("gamma" in sec) == ("lifetime_ns" in sec):
        raise ConfigError("give exactly one of system.gamma and system.lifetime_ns", line, source)
    for k in ("kappa", "kappa_r"):
        if k not in sec:
            raise ConfigError(f"system.{k} is required", line, source)
    gamma = _rate(sec, "gamma", unit) if "gamma" in sec else lifetime_ns_to_gamma(float(sec["lifetime_ns"]))
    kappa = _rate(sec, "kappa", unit)
    if "delta_c_in_kappa" in sec:
        delta_c = float(sec["delta_c_in_kappa"]) * kappa
    else:
        delta_c = _rate(sec, "delta_c", unit) or 0.0
    try:
        if "g" in sec:
            return SystemParams(n, gamma, _rate(sec, "g", unit), kappa, _rate(sec, "kappa_r", unit), delta_c), stack
        return SystemParams.from_collective(n, _rate(sec, "g_sqrt_n", unit), gamma, kappa, _rate(sec, "kappa_r", unit), delta_c), stack
    except ValidationError as exc:
        raise ConfigError(str(exc), line, source) from None


def _sigma_t(sec: dict, path: tuple, marks: dict, source: str) -> float:
    if ("sigma_t_fs" in sec) == ("t_fwhm_fs" in sec):
        raise ConfigError("give exactly one of sigma_t_fs and t_fwhm_fs", marks.get(path), source)
    value = float(sec["sigma_t_fs"]) if "sigma_t_fs" in sec else fwhm_to_sigma(float(sec["t_fwhm_fs"]))
    if value <= 0:
        raise ConfigError("pulse duration must be positive", marks.get(path), source)
    return value


def _area(sec: dict, path: tuple, marks: dict, source: str) -> float | None:
    if "area_pi" not in sec:
        return None
    a = float(sec["area_pi"])
    if a < 0:
        raise ConfigError("area_pi must be non-negative", marks.get(path + ("area_pi",)), source)
    return a * math.pi


def _pulse(sec: dict, marks: dict, source: str):
    kinds = [k for k in ("gaussian", "sase", "file") if k in sec]
    if len(kinds) != 1:
        raise ConfigError(f"pulse needs exactly one source (gaussian, sase or file), found {len(kinds)}", marks.get(("pulse",)), source)
    kind = kinds[0]
    body = sec[kind]
    path = ("pulse", kind)
    if kind == "gaussian":
        return GaussianSpec(_sigma_t(body, path, marks, source), _area(body, path, marks, source))
    if kind == "sase":
        for k in ("f_sase", "n_pulses"):
            if k not in body:
                raise ConfigError(f"pulse.sase.{k} is required", marks.get(path), source)
        if body["f_sase"] < 1:
            raise ConfigError("pulse.sase.f_sase must be >= 1 (Fourier limit)", marks.get(path + ("f_sase",)), source)
        if body["n_pulses"] < 1:
            raise ConfigError("pulse.sase.n_pulses must be >= 1", marks.get(path + ("n_pulses",)), source)
        groups = int(body.get("groups", 0))
        if groups < 0 or groups > body["n_pulses"]:
            raise ConfigError("pulse.sase.groups must lie in [0, n_pulses]", marks.get(path + ("groups",)), source)
        return SaseSpec(_sigma_t(body, path, marks, source), float(body["f_sase"]), int(body["n_pulses"]), _area(body, path, marks, source), groups)
    if "path" not in body:
        raise ConfigError("pulse.file.path is required", marks.get(path), source)
    return PulseFileSpec(body["path"], _area(body, path, marks, source))


def _sweep(sec: dict, marks: dict, source: str) -> tuple[float, ...]:
    if "values_pi" in sec and {"start_pi", "stop_pi", "points"} & set(sec):
        raise ConfigError("give either sweep.values_pi or start_pi/stop_pi/points", marks.get(("sweep",)), source)
    if "values_pi" in sec:
        vals = sec["values_pi"]
        for i, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, _NUM):
                raise ConfigError(f"sweep.values_pi[{i}] must be a number", marks.get(("sweep", "values_pi", i)), source)
    else:
        for k in ("start_pi", "stop_pi", "points"):
            if k not in sec:
                raise ConfigError(f"sweep.{k} is required", marks.get(("sweep",)), source)
        if sec["points"] < 1:
            raise ConfigError("sweep.points must be >= 1", marks.get(("sweep", "points")), source)
        vals = np.linspace(sec["start_pi"], sec["stop_pi"], sec["points"]).tolist()
    for i, v in enumerate(vals):
        if not (v >= 0 and math.isfinite(v)):
            raise ConfigError(f"sweep value {v} must be non-negative", marks.get(("sweep", "values_pi", i), marks.get(("sweep",))), source)
    return tuple(float(v) * math.pi for v in vals)


def _grid(sec: dict, default: tuple[float, ...]) -> tuple[float, ...]:
    if sec is None:
        return default
    return tuple(np.round(np.arange(sec["start"], sec["stop"] + 0.5 * sec["step"], sec["step"]), 10))


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ScenarioConfig:
    """Validate YAML text against the schema and resolve it."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source) from None
    if node is None:
        raise ConfigError("configuration is empty", None, source)
    marks = _marks(node)
    _check(raw, SCHEMA, (), marks, source)
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}", marks.get(("schema_version",), 1), source)

    cfg = ScenarioConfig(SCHEMA_VERSION, int(raw.get("seed", 0)), raw, source=source, base_dir=base_dir or Path.cwd())
    if "system" in raw:
        cfg.system, cfg.stack = _system(raw["system"], marks, source)
    if "pulse" in raw:
        cfg.pulse = _pulse(raw["pulse"], marks, source)
    if "sweep" in raw:
        cfg.sweep = _sweep(raw["sweep"], marks, source)
    if "integrator" in raw:
        try:
            cfg.integrator = IntegratorConfig(**{k: v for k, v in raw["integrator"].items()})
        except ValidationError as exc:
            raise ConfigError(str(exc), marks.get(("integrator",)), source) from None
    if "analysis" in raw:
        cfg.analysis = AnalysisSpec(**raw["analysis"])
    if "output" in raw:
        cfg.output = OutputSpec(**raw["output"])
    if "toy" in raw:
        t = raw["toy"]
        cfg.toy = ToySpec(
            phi=tuple(math.pi * float(v) for v in t.get("phi_pi", [1 / 50, 1.5, 1.0])),
            phase=tuple(math.pi * float(v) for v in t.get("phase_pi", [0.0, 0.5])),
            **{k: t[k] for k in ("d", "beta", "gamma", "half_range", "points") if k in t},
        )
        try:
            from .toy import ToyParams

            ToyParams.for_area(1.0, cfg.toy.d, cfg.toy.beta, cfg.toy.gamma)
        except ValidationError as exc:
            raise ConfigError(str(exc), marks.get(("toy",)), source) from None
    if "optimize" in raw:
        o = raw["optimize"]
        if "isotopes" not in o:
            raise ConfigError("optimize.isotopes is required", marks.get(("optimize",)), source)
        if o.get("convention", "table") not in ("table", "si"):
            raise ConfigError("optimize.convention must be 'table' or 'si'", marks.get(("optimize", "convention")), source)
        cfg.optimize = OptimizeSpec(
            isotopes=tuple(str(i) for i in o["isotopes"]),
            mirrors=tuple(str(m) for m in o.get("mirrors", ["Pt", "Pd"])),
            d_top=_grid(o.get("d_top_nm"), OptimizeSpec.d_top),
            d_cen=_grid(o.get("d_cen_nm"), OptimizeSpec.d_cen),
            t_fwhm=float(o.get("t_fwhm_fs", 100.0)),
            curve_t_fwhm=tuple(float(x) for x in o.get("curve_t_fwhm_fs", OptimizeSpec.curve_t_fwhm)),
            convention=o.get("convention", "table"),
        )
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    return parse_config(path.read_text(), str(path), path.parent)
