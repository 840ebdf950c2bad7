"""Benchmark harness over the postal-voting grid."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .abstraction import MAY, MUST, abstract_mas_report
from .cases import VARIANTS, gen_postal, postal_abstraction, postal_formula_text
from .checker import check
from .config import ConfigError, load_abstraction_config, load_toml, resolve
from .formula import atoms, parse_formula
from .unwrapping import DEFAULT_STATE_BUDGET, StateBudgetExceeded, unwrap

log = logging.getLogger(__name__)

CSV_COLUMNS = ("NV", "NC", "variant", "states", "ta_ms", "tv_ms", "verdict", "memout")


@dataclass(frozen=True)
class BenchConfig:
    nv: tuple = (1, 3)  # inclusive range
    nc: tuple = (1, 3)
    variant: str = "concrete"  # a built-in variant or a path to an abstraction config
    mode: str = MAY
    formula: str = "bstuff"  # bstuff | dispatch | formula text
    state_budget: int = DEFAULT_STATE_BUDGET
    time_budget_s: float = 600.0
    output: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        for name in ("nv", "nc"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} range {lo}..{hi} is empty or starts below 1")
        if self.mode not in (MAY, MUST):
            raise ConfigError(f"mode must be 'may' or 'must', not {self.mode!r}")
        if self.state_budget <= 0 or self.time_budget_s <= 0 or self.workers <= 0:
            raise ConfigError("budgets and worker count must be positive")

    def grid(self) -> list:
        return [(v, c) for v in range(self.nv[0], self.nv[1] + 1)
                for c in range(self.nc[0], self.nc[1] + 1)]


@dataclass(frozen=True)
class BenchRow:
    NV: int
    NC: int
    variant: str
    states: Optional[int]
    ta_ms: float
    tv_ms: Optional[float]
    verdict: Optional[bool]
    memout: bool = False

    def csv_row(self) -> list:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return f"{v:.1f}"
            return v
        return [fmt(getattr(self, f.name)) for f in fields(self)]


def load_bench_config(path) -> BenchConfig:
    data = load_toml(path)
    base = Path(path).parent
    known = {f.name for f in fields(BenchConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown bench keys {sorted(unknown)}")
    for key in ("nv", "nc"):
        if key in data:
            data[key] = tuple(data[key])
    if "variant" in data and data["variant"] not in VARIANTS:
        data["variant"] = str(resolve(base, data["variant"]))
    if "output" in data:
        data["output"] = str(resolve(base, data["output"]))
    return BenchConfig(**data)


def _formula_text(cfg: BenchConfig, NV: int, NC: int) -> str:
    if cfg.formula in ("bstuff", "dispatch"):
        return postal_formula_text(cfg.formula, NV, NC)
    return cfg.formula


def run_cell(cfg: BenchConfig, NV: int, NC: int) -> BenchRow:
    S = gen_postal(NV, NC)
    f = parse_formula(_formula_text(cfg, NV, NC), S)
    t0 = time.perf_counter()
    mode = cfg.mode
    if cfg.variant in VARIANTS:
        maps = postal_abstraction(S, cfg.variant)
    else:
        ac = load_abstraction_config(cfg.variant)
        maps, mode = ac.build(S), ac.mode
    system = S
    if maps:
        report = abstract_mas_report(S, maps, mode)
        system = report.system
        if not report.supported:
            log.warning("NV=%d NC=%d %s: must-abstraction outside the supported class: %s",
                        NV, NC, cfg.variant, "; ".join(report.diagnostics[:3]))
    ta = (time.perf_counter() - t0) * 1e3
    t1 = time.perf_counter()
    try:
        M = unwrap(system, atoms(f), state_budget=cfg.state_budget)
        verdict = check(M, f).holds
    except (StateBudgetExceeded, MemoryError) as exc:
        log.warning("NV=%d NC=%d %s: %s", NV, NC, cfg.variant, exc)
        return BenchRow(NV, NC, _variant_label(cfg.variant), None, ta, None, None, True)
    tv = (time.perf_counter() - t1) * 1e3
    if (ta + tv) / 1e3 > cfg.time_budget_s:
        log.warning("NV=%d NC=%d %s: over the time budget", NV, NC, cfg.variant)
    return BenchRow(NV, NC, _variant_label(cfg.variant), M.n_states, ta, tv, verdict, False)


def _variant_label(v: str) -> str:
    return v if v in VARIANTS else Path(v).stem


def _cell(args):
    return run_cell(*args)


def run_bench(cfg: BenchConfig) -> list:
    """Run every grid cell; rows come back in grid order."""
    jobs = [(cfg, v, c) for v, c in cfg.grid()]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_cell, jobs))
    else:
        rows = [_cell(j) for j in jobs]
    if cfg.output:
        write_csv(rows, cfg.output)
    return rows


def write_csv(rows, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_row())


def rows_as_dicts(rows) -> list:
    return [asdict(r) for r in rows]
