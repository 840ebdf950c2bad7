"""Case-study generators, benchmark harness, DOT export and CLI."""
import csv
import json
from pathlib import Path

import pytest

from masabs.abstraction import MAY, MUST
from masabs.bench import CSV_COLUMNS, BenchConfig, BenchRow, load_bench_config, run_bench, run_cell
from masabs.cases import gen_asv, gen_postal, postal_formula
from masabs.checker import check
from masabs.cli import main
from masabs.composition import combine
from masabs.config import ConfigError, load_abstraction_config, parse_abstraction_config
from masabs.export import to_dot
from masabs.formula import atoms
from masabs.parser import dump_mas, parse_mas
from masabs.unwrapping import unwrap

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestGenerators:
    def test_asv_single_candidate(self):
        M = unwrap(gen_asv(1))
        assert len(M.succ[0]) == 1

    def test_asv_g0_all_zero(self, asv):
        assert all(v in (0, (0, 0, 0)) for v in asv.initial_evaluation().values())

    def test_postal_rejects_empty(self):
        with pytest.raises(ValueError):
            gen_postal(0, 1)
        with pytest.raises(ValueError):
            gen_postal(1, 0)

    def test_postal_names(self):
        S = gen_postal(2, 2)
        names = set(S.decls())
        for n in ("Authority.tally", "Authority.pack_sent", "Authority.dec_recv",
                  "Voter1.mem_sg", "Voter1.mem_vt", "Voter1.mem_dec"):
            assert n in names
        assert parse_mas(dump_mas(S)).decls() == S.decls()

    def test_postal_2_2_verdicts(self):
        S = gen_postal(2, 2)
        for name, want in (("bstuff", True), ("dispatch", False)):
            f = postal_formula(name, S)
            assert check(unwrap(S, atoms(f)), f).holds is want


class TestBench:
    def test_concrete_grid(self):
        rows = run_bench(BenchConfig(nv=(1, 3), nc=(1, 3)))
        assert [(r.NV, r.NC) for r in rows] == [(v, c) for v in (1, 2, 3) for c in (1, 2, 3)]
        assert all(r.verdict is True and not r.memout for r in rows)

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            BenchConfig(nv=(3, 2))
        with pytest.raises(ConfigError):
            BenchConfig(nc=(0, 0))
        with pytest.raises(ConfigError):
            BenchConfig(state_budget=0)

    def test_abstraction_1_smaller(self):
        cfg = BenchConfig(variant="abstraction-1")
        a = run_cell(cfg, 3, 1)
        c = run_cell(BenchConfig(), 3, 1)
        assert a.states < c.states

    def test_memout_row(self):
        r = run_cell(BenchConfig(state_budget=10), 2, 2)
        assert r.memout and r.states is None and r.verdict is None

    def test_csv_deterministic_modulo_timing(self, tmp_path):
        out = []
        for k in range(2):
            path = tmp_path / f"r{k}.csv"
            run_bench(BenchConfig(nv=(1, 2), nc=(1, 1), output=str(path)))
            with open(path) as fh:
                rows = list(csv.DictReader(fh))
            out.append([{c: r[c] for c in CSV_COLUMNS if not c.endswith("_ms")} for r in rows])
            assert tuple(rows[0]) == CSV_COLUMNS
        assert out[0] == out[1]

    def test_workers_keep_grid_order(self):
        rows = run_bench(BenchConfig(nv=(1, 2), nc=(1, 2), workers=2))
        assert [(r.NV, r.NC) for r in rows] == [(1, 1), (1, 2), (2, 1), (2, 2)]

    def test_load_config(self, tmp_path):
        cfg = load_bench_config(CONFIGS / "bench_dispatch_must.toml")
        assert cfg.mode == MUST and cfg.nv == (1, 4) and cfg.output.endswith(".csv")
        bad = tmp_path / "bad.toml"
        bad.write_text('nv = [1, 2]\ncolour = "red"\n')
        with pytest.raises(ConfigError, match="unknown"):
            load_bench_config(bad)

    def test_row_format(self):
        r = BenchRow(1, 1, "concrete", None, 1.25, None, None, True)
        assert r.csv_row() == [1, 1, "concrete", "", "1.2", "", "", "true"]


class TestConfig:
    def test_abstraction_files(self, asv):
        cfg = load_abstraction_config(CONFIGS / "asv_parity.toml")
        assert cfg.mode == MAY
        (m,) = cfg.build(asv)
        assert m.scope == {"voted", "obeyed", "disobeyed"}
        assert m.mapping.target.name == "Voter.z"

    def test_table_mapping(self, asv):
        cfg = parse_abstraction_config({"mode": "must", "mapping": [
            {"agent": "Voter", "sources": ["x"], "target": "z", "fn": "table",
             "table": [[[0], 0], [[1], 1], [[2], 1], [[3], 1]]}]})
        (m,) = cfg.build(asv)
        assert m.apply((2,)) == 1

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            parse_abstraction_config({"mapping": [{"agent": "A", "sources": ["x"], "colour": 1}]})
        with pytest.raises(ConfigError):
            parse_abstraction_config({"mode": "might"})


class TestDot:
    def test_voter(self, asv):
        text = to_dot(asv.agents[0])
        assert text.startswith("digraph") and text.count("shape=") == 4

    def test_one_state_model(self):
        M = unwrap(parse_mas("agent A {\n  loc a\n  init a\n}\n"))
        text = to_dot(M)
        assert text.count("shape=") == 1 and "s0 -> s0;" in text

    def test_combined_asv(self, asv):
        text = to_dot(combine(asv))
        assert text.count("shape=") == 8
        # handshake edges name both source edges
        assert "show" not in text and '0.' in text and '1.' in text


class TestCli:
    def test_exit_codes(self, capsys):
        assert main(["check", "asv:3", "--formula", "A[] (!obeyed || K_voted[x]==1)"]) == 0
        assert main(["check", "asv:3", "--formula", "A<> !(K_voted==[0,0,0])"]) == 1
        assert main(["check", "asv:3", "--formula", "A[] (y == 1)"]) == 2
        assert main(["unwrap", "postal:2,2", "--budget", "10"]) == 3
        assert main(["parse", "missing.masg"]) == 2

    def test_unwrap_stats(self, capsys):
        assert main(["unwrap", "asv:3", "--stats"]) == 0
        assert json.loads(capsys.readouterr().out)["states"] == 10

    def test_abstract_and_simulate(self, tmp_path, capsys):
        out = tmp_path / "abs.masg"
        cfg = str(CONFIGS / "asv_remove_x.toml")
        assert main(["abstract", "asv:3", "--config", cfg, "-o", str(out)]) == 0
        assert main(["simulate", "asv:3", str(out), "--keep", "sh,K_voted,K_refused",
                     "--atom", "K_refused == 1"]) == 0
        assert main(["simulate", "asv:3", str(out), "--keep", "sh", "--atom", "x == 1"]) == 2

    def test_check_with_abstraction(self, capsys):
        cfg = str(CONFIGS / "asv_remove_x.toml")
        assert main(["check", "asv:3", "--config", cfg,
                     "--formula", "A[] (!disobeyed || K_refused==1)"]) == 0

    def test_domain_and_export(self, tmp_path, capsys):
        assert main(["approx-domain", "asv:3", "--vars", "x", "--agent", "Voter"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["table"]["voted"] == [[1], [2], [3]]
        dot = tmp_path / "g.dot"
        assert main(["export-dot", "asv:3", "-o", str(dot)]) == 0
        assert dot.read_text().count("shape=") == 8

    def test_bench(self, tmp_path, capsys):
        cfg = tmp_path / "b.toml"
        cfg.write_text('nv = [1, 1]\nnc = [1, 2]\nformula = "dispatch"\nmode = "must"\n'
                       'variant = "abstraction-1"\noutput = "out.csv"\n')
        assert main(["bench", "--config", str(cfg)]) == 0
        assert (tmp_path / "out.csv").exists()
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2 and all(",false," in l for l in lines)
