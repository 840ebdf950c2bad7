"""TOML configuration for abstractions and benchmarks.

Abstraction file::

    mode = "may"                 # or "must"

    [[mapping]]
    agent = "Voter"
    sources = ["x"]
    target = "z"                 # omit for plain removal
    fn = "parity"                # constant | identity | parity | interval | table
    value = 0                    # constant
    width = 2                    # interval
    table = [[[0], 0], [[1], 1]] # table: [key, value] pairs
    lo = 0                       # target domain, inferred when omitted
    hi = 1
    scope = ["voted"]            # makes the mapping scoped
    outside_default = 0
    reset = { x = 0 }
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .abstraction import MAY, MUST, make_mapping, make_scoped
from .lang import MASGraph


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MappingSpec:
    agent: str
    sources: tuple
    target: Optional[str] = None
    fn: str = "constant"
    value: int = 0
    width: int = 2
    table: tuple = ()
    lo: Optional[int] = None
    hi: Optional[int] = None
    scope: Optional[tuple] = None
    outside_default: Optional[int] = None
    reset: tuple = ()

    def build(self, S: MASGraph):
        fn = self.fn
        if fn == "table":
            fn = {tuple(k): v for k, v in self.table}
        m = make_mapping(S, self.agent, self.sources, self.target, self.lo, self.hi,
                         fn=fn, value=self.value, width=self.width)
        if self.scope is None:
            return m
        reset = {}
        decls = S.decls()
        for k, v in self.reset:
            name = k if k in decls else f"{self.agent}.{k}"
            reset[name] = v
        return make_scoped(S, m, self.scope, self.outside_default, reset or None)


@dataclass(frozen=True)
class AbstractionConfig:
    mode: str = MAY
    mappings: tuple = field(default_factory=tuple)

    def build(self, S: MASGraph) -> list:
        return [m.build(S) for m in self.mappings]


_MAPPING_KEYS = {"agent", "sources", "target", "fn", "value", "width", "table", "lo", "hi",
                 "scope", "outside_default", "reset"}


def parse_abstraction_config(data: dict) -> AbstractionConfig:
    mode = data.get("mode", MAY)
    if mode not in (MAY, MUST):
        raise ConfigError(f"mode must be 'may' or 'must', not {mode!r}")
    specs = []
    for k, raw in enumerate(data.get("mapping", [])):
        unknown = set(raw) - _MAPPING_KEYS
        if unknown:
            raise ConfigError(f"mapping {k}: unknown keys {sorted(unknown)}")
        if "agent" not in raw or "sources" not in raw:
            raise ConfigError(f"mapping {k}: 'agent' and 'sources' are required")
        table = tuple((tuple(key), val) for key, val in raw.get("table", []))
        scope = tuple(raw["scope"]) if "scope" in raw else None
        specs.append(MappingSpec(raw["agent"], tuple(raw["sources"]), raw.get("target"),
                                 raw.get("fn", "constant"), raw.get("value", 0), raw.get("width", 2),
                                 table, raw.get("lo"), raw.get("hi"), scope,
                                 raw.get("outside_default"),
                                 tuple(sorted(raw.get("reset", {}).items()))))
    return AbstractionConfig(mode, tuple(specs))


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_abstraction_config(path) -> AbstractionConfig:
    return parse_abstraction_config(load_toml(path))


def resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p
