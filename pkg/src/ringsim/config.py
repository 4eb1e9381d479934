"""Flat key = value scenario configuration for sweep runs.

Grammar: one `key = value` per line, `#` starts a comment, blank lines are
ignored, lists are written `[a, b, c]`.  Unknown keys are rejected; missing
keys take the documented defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analytics import Protocol, Variant
from .engine import RunConfig
from .topology import Arena


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int = 50
    arena_width: float = 1000.0
    arena_height: float = 1000.0
    radio_range: float = 250.0
    v_max: float = 30.0
    pause_times: tuple[float, ...] = (0.0, 100.0, 200.0)
    duration: float = 900.0
    warmup: float = 50.0
    traffic_pairs: int = 10
    traffic_rate: float = 4.0
    packet_size: int = 512
    protocols: tuple[Protocol, ...] = (Protocol.AODV, Protocol.DSR, Protocol.DYMO)
    variants: tuple[Variant, ...] = (Variant.ERS1, Variant.ERS2)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    p_s: float = 1.0
    out_dir: str = "results"

    def __post_init__(self):
        problems = []
        if self.nodes < 1:
            problems.append("nodes must be >= 1")
        if self.arena_width <= 0 or self.arena_height <= 0:
            problems.append("arena dimensions must be > 0")
        if self.radio_range <= 0:
            problems.append("radio_range must be > 0")
        if self.v_max < 0:
            problems.append("v_max must be >= 0")
        if not self.pause_times or any(p < 0 for p in self.pause_times):
            problems.append("pause_times must be non-empty and >= 0")
        if self.duration <= self.warmup:
            problems.append("duration must exceed warmup")
        if self.warmup < 0:
            problems.append("warmup must be >= 0")
        if self.traffic_pairs < 0:
            problems.append("traffic_pairs must be >= 0")
        if self.traffic_rate <= 0:
            problems.append("traffic_rate must be > 0")
        if self.packet_size < 1:
            problems.append("packet_size must be >= 1")
        if not self.protocols:
            problems.append("protocols must be non-empty")
        if not self.variants:
            problems.append("variants must be non-empty")
        if not self.seeds:
            problems.append("seeds must be non-empty")
        if not 0.0 <= self.p_s <= 1.0:
            problems.append("p_s must lie in [0, 1]")
        if problems:
            raise ConfigError("invalid scenario: " + "; ".join(problems))

    @property
    def arena(self) -> Arena:
        return Arena(self.arena_width, self.arena_height, self.radio_range)

    def to_run_config(self, protocol: Protocol, variant: Variant,
                      pause_time: float, seed: int,
                      trace: bool = False) -> RunConfig:
        return RunConfig(
            protocol=protocol, variant=variant, n_nodes=self.nodes,
            arena=self.arena, v_max=self.v_max, pause_time=pause_time,
            duration=self.duration, warmup=self.warmup,
            traffic_pairs=self.traffic_pairs, traffic_rate=self.traffic_rate,
            packet_size=self.packet_size, p_s=self.p_s, seed=seed, trace=trace,
        )


_INT_KEYS = {"nodes", "traffic_pairs", "packet_size"}
_FLOAT_KEYS = {"arena_width", "arena_height", "radio_range", "v_max",
               "duration", "warmup", "traffic_rate", "p_s"}
_FLOAT_LIST_KEYS = {"pause_times"}
_INT_LIST_KEYS = {"seeds"}
_STR_KEYS = {"out_dir"}
_ENUM_LIST_KEYS = {"protocols": Protocol, "variants": Variant}

_ALL_KEYS = (_INT_KEYS | _FLOAT_KEYS | _FLOAT_LIST_KEYS | _INT_LIST_KEYS
             | _STR_KEYS | set(_ENUM_LIST_KEYS))


def _parse_list(raw: str, lineno: int) -> list[str]:
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        raise ConfigError(f"line {lineno}: list values must look like [a, b, c]")
    inner = raw[1:-1].strip()
    if not inner:
        raise ConfigError(f"line {lineno}: empty list")
    return [item.strip() for item in inner.split(",")]


def _parse_scalar(raw: str, kind, key: str, lineno: int):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse {raw!r} as {kind.__name__} for {key}"
        ) from None


def _parse_enum(raw: str, enum_cls, key: str, lineno: int):
    try:
        return enum_cls(raw.strip().lower())
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise ConfigError(
            f"line {lineno}: {key} entries must be one of {allowed}, got {raw!r}"
        ) from None


def parse_config_text(text: str) -> ScenarioConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            values[key] = _parse_scalar(raw, int, key, lineno)
        elif key in _FLOAT_KEYS:
            values[key] = _parse_scalar(raw, float, key, lineno)
        elif key in _STR_KEYS:
            values[key] = raw
        elif key in _FLOAT_LIST_KEYS:
            values[key] = tuple(_parse_scalar(item, float, key, lineno)
                                for item in _parse_list(raw, lineno))
        elif key in _INT_LIST_KEYS:
            values[key] = tuple(_parse_scalar(item, int, key, lineno)
                                for item in _parse_list(raw, lineno))
        else:
            enum_cls = _ENUM_LIST_KEYS[key]
            values[key] = tuple(_parse_enum(item, enum_cls, key, lineno)
                                for item in _parse_list(raw, lineno))
    return ScenarioConfig(**values)


def parse_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_text(handle.read())
