"""
Run configuration: a flat, sectioned ``key = value`` file.

    # comments start with '#'
    [analog]
    sac_v_min = 0.41
    adc.bits = 10        # dotted keys are absolute, in or out of a section

Every key is ``<section>.<field>`` of one of the config dataclasses. Unknown
keys are errors; absent keys take the dataclass default and are recorded as
such in the provenance map.
"""
from __future__ import annotations

import dataclasses
import difflib
import enum
import logging
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from analog_chain import AnalogCalibration
from energy_model import EnergyConfig
from errors import InvariantError, SimulatorError
from mac_engine import AdcConfig, EngineConfig, EngineError, check_compatible
from sc_codec import CodecConfig

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20190601
U64_MAX = 2 ** 64 - 1
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigError(SimulatorError):
    pass


@dataclass(frozen=True)
class RunSettings:
    seed: int = DEFAULT_SEED
    trials: int = 10_000
    out_dir: Path = Path("out")

    def __post_init__(self):
        if not 0 <= self.seed <= U64_MAX:
            raise InvariantError("seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if self.trials < 1:
            raise InvariantError("trials", f"must be >= 1, got {self.trials}")
        object.__setattr__(self, "out_dir", Path(self.out_dir))


# engine.codec and engine.adc are their own sections
_NESTED = {"codec", "adc"}

SECTIONS = {
    "codec": CodecConfig,
    "analog": AnalogCalibration,
    "adc": AdcConfig,
    "energy": EnergyConfig,
    "engine": EngineConfig,
    "run": RunSettings,
}


def _section_fields(section):
    cls = SECTIONS[section]
    hints = typing.get_type_hints(cls)
    return {
        f.name: hints[f.name]
        for f in dataclasses.fields(cls)
        if not (section == "engine" and f.name in _NESTED)
    }


def known_keys():
    return [f"{section}.{name}" for section in SECTIONS for name in _section_fields(section)]


@dataclass(frozen=True)
class RunConfig:
    codec: CodecConfig = field(default_factory=CodecConfig)
    analog: AnalogCalibration = field(default_factory=AnalogCalibration)
    adc: AdcConfig = field(default_factory=AdcConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    run: RunSettings = field(default_factory=RunSettings)
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def seed(self):
        return self.run.seed

    @property
    def trials(self):
        return self.run.trials

    @property
    def out_dir(self):
        return self.run.out_dir

    def with_overrides(self, seed=None, trials=None, out_dir=None):
        """Command-line overrides, recorded in provenance as ``cli``."""
        changes = {k: v for k, v in (("seed", seed), ("trials", trials), ("out_dir", out_dir)) if v is not None}
        if not changes:
            return self
        try:
            run = dataclasses.replace(self.run, **changes)
        except InvariantError as exc:
            raise ConfigError(f"run.{exc.field}: {exc.message}") from exc
        provenance = dict(self.provenance)
        provenance.update({f"run.{k}": "cli" for k in changes})
        return dataclasses.replace(self, run=run, provenance=provenance)

    def flattened(self):
        values = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            for name in _section_fields(section):
                value = getattr(obj, name)
                if isinstance(value, enum.Enum):
                    value = value.value
                elif isinstance(value, Path):
                    value = str(value)
                elif isinstance(value, tuple):
                    value = list(value)
                values[f"{section}.{name}"] = value
        return values


def _coerce(raw, hint):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("", "none"):
            return None
        return _coerce(raw, args[0])
    if origin is tuple:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    if hint is bool:
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(hint, type) and issubclass(hint, enum.Enum):
        return hint(raw)
    if hint is int:
        return int(raw, 0) if raw.lower().startswith(("0x", "0o", "0b")) else int(raw)
    if hint is float:
        return float(raw)
    if hint is Path:
        return Path(raw)
    raise ValueError(f"unsupported field type {hint!r}")


def parse_config_text(text, source="<config>"):
    """``{"<section>.<field>": (raw value, line number)}`` for a config text."""
    entries = {}
    keys = set(known_keys())
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key before '='")
        if "." not in key:
            if section is None:
                raise ConfigError(f"{source}:{lineno}: key {key!r} outside any section")
            key = f"{section}.{key}"
        if key not in keys:
            hint = difflib.get_close_matches(key, keys, n=1)
            suggestion = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}{suggestion}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {entries[key][1]})")
        entries[key] = (value.strip(), lineno)
    return entries


def _build_section(section, entries, source, provenance, **extra):
    kwargs = dict(extra)
    for name, hint in _section_fields(section).items():
        key = f"{section}.{name}"
        if key not in entries:
            provenance[key] = "default"
            continue
        raw, lineno = entries[key]
        try:
            kwargs[name] = _coerce(raw, hint)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: cannot parse {raw!r} ({exc})") from exc
        provenance[key] = f"{source}:{lineno}"
    try:
        return SECTIONS[section](**kwargs)
    except InvariantError as exc:
        raise ConfigError(f"{section}.{exc.field}: {exc.message}") from exc


def config_from_text(text, source="<config>"):
    entries = parse_config_text(text, source)
    provenance = {}
    codec = _build_section("codec", entries, source, provenance)
    analog = _build_section("analog", entries, source, provenance)
    adc = _build_section("adc", entries, source, provenance)
    energy = _build_section("energy", entries, source, provenance)
    engine = _build_section("engine", entries, source, provenance, codec=codec, adc=adc)
    run = _build_section("run", entries, source, provenance)
    try:
        check_compatible(analog, engine)
    except EngineError as exc:
        raise ConfigError(f"analog.sac_count_max: {exc}") from exc

    cfg = RunConfig(codec, analog, adc, energy, engine, run, provenance)
    flat = cfg.flattened()
    for key, origin in provenance.items():
        if origin == "default":
            logger.info(f"default {key} = {flat[key]!r}")
    return cfg


def load_config(path=None):
    """Validated RunConfig from ``path``; all defaults when ``path`` is None."""
    if path is None:
        return config_from_text("", "<defaults>")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = config_from_text(text, str(path))
    logger.info(f"loaded config {path}")
    return cfg
