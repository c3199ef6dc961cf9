import json

import numpy as np
import pytest

from giplab.experiments import (
    CSV_HEADER,
    ExperimentRecord,
    SweepConfig,
    gap_sweep,
    records_to_csv,
    run_trial,
    stats_check,
    tree_sweep,
)
from giplab.instance import BSpec, generate
from giplab.bnb import ipgap
from giplab.lp import solve_lp
from giplab.rng import RngHandle


def small_config(**over):
    base = dict(
        m_list=(2,),
        n_list=(12, 16),
        seeds_per_cell=4,
        seed=11,
        b_spec="zeros",
        rounding="never",
        parallelism=1,
    )
    base.update(over)
    return SweepConfig(**base)


class TestSweepConfig:
    def test_json_roundtrip(self):
        cfg = small_config()
        again = SweepConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            SweepConfig.from_json('{"m_list": [1], "n_list": [5], "bogus": 3}')

    def test_validation(self):
        with pytest.raises(ValueError):
            small_config(m_list=())
        with pytest.raises(ValueError):
            small_config(rounding="sometimes")

    def test_trial_enumeration_sorted(self):
        cfg = small_config(m_list=(3, 2), n_list=(16, 12), seeds_per_cell=2)
        trials = cfg.trials()
        assert [t[0] for t in trials] == list(range(8))
        assert trials[0][1:] == (2, 12, 0)
        assert trials[-1][1:] == (3, 16, 1)


class TestRunTrial:
    def test_row_is_recomputable(self):
        cfg = small_config()
        a = run_trial(cfg, 3, 2, 16)
        b = run_trial(cfg, 3, 2, 16)
        assert a.to_csv_row() == b.to_csv_row()

    def test_matches_direct_solves(self):
        cfg = small_config()
        rec = run_trial(cfg, 5, 2, 12)
        inst = generate(2, 12, BSpec.zeros(), RngHandle(11, 5))
        sol = solve_lp(inst)
        assert rec.lp_value == pytest.approx(sol.value, abs=1e-12)
        assert rec.ipgap == pytest.approx(ipgap(inst), abs=1e-12)
        assert rec.ipgap >= -1e-7
        assert rec.n0 + rec.s <= 12

    def test_certified_bound_mode_beyond_ip_budget(self):
        cfg = small_config(
            n_list=(400,), seeds_per_cell=1, rounding="auto", exact_ip_max_n=30
        )
        rec = run_trial(cfg, 0, 2, 400)
        assert rec.status in ("cert_bound", "pool_too_small")
        assert rec.ip_value is None
        if rec.round_ok:
            assert rec.cert_gap is not None and rec.cert_gap >= -1e-7


class TestSweeps:
    def test_gap_sweep_shape_and_order(self, tmp_path):
        out = tmp_path / "sweep.csv"
        cfg = small_config(out=str(out))
        records = gap_sweep(cfg)
        assert len(records) == 8
        text = out.read_text()
        lines = text.splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 9
        seeds = [int(line.split(",")[0]) for line in lines[1:]]
        assert seeds == list(range(8))

    def test_rerun_byte_identical(self, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        gap_sweep(small_config(out=str(out1)))
        gap_sweep(small_config(out=str(out2)))
        assert out1.read_bytes() == out2.read_bytes()

    def test_parallel_equals_serial(self, tmp_path):
        out1 = tmp_path / "serial.csv"
        out2 = tmp_path / "par.csv"
        gap_sweep(small_config(out=str(out1), parallelism=1))
        gap_sweep(small_config(out=str(out2), parallelism=2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_env_var_overrides_parallelism(self, tmp_path, monkeypatch):
        out = tmp_path / "env.csv"
        monkeypatch.setenv("GIPLAB_THREADS", "2")
        gap_sweep(small_config(out=str(out), parallelism=1))
        ref = tmp_path / "ref.csv"
        monkeypatch.delenv("GIPLAB_THREADS")
        gap_sweep(small_config(out=str(ref), parallelism=1))
        assert out.read_bytes() == ref.read_bytes()

    def test_tree_sweep_side_file(self, tmp_path):
        out = tmp_path / "tree.csv"
        cfg = small_config(out=str(out), n_list=(12,), seeds_per_cell=3)
        records = tree_sweep(cfg)
        side = tmp_path / "tree.csv.knap.csv"
        assert side.exists()
        lines = side.read_text().splitlines()
        assert lines[0] == "seed,m,n,ipgap,tree_size,knap_count,envelope"
        assert len(lines) == 4
        for rec in records:
            assert rec.knap_count is not None and rec.knap_count >= 1
            assert rec.tree_size >= 1

    def test_gap_below_certificate_when_both_present(self):
        cfg = small_config(
            n_list=(24,), seeds_per_cell=10, rounding="always",
            k=2, t=1, delta=16 * np.sqrt(2) * 2 / 24,
        )
        both = 0
        for stream, m, n, _ in cfg.trials():
            rec = run_trial(cfg, stream, m, n)
            if rec.ipgap is not None and rec.cert_gap is not None:
                both += 1
                assert rec.ipgap <= rec.cert_gap + 1e-7
        assert both >= 1

    def test_timings_zero_by_default(self, tmp_path):
        out = tmp_path / "t.csv"
        gap_sweep(small_config(out=str(out), seeds_per_cell=2, n_list=(12,)))
        for line in out.read_text().splitlines()[1:]:
            cells = line.split(",")
            assert cells[14] == "0" and cells[15] == "0" and cells[16] == "0"


class TestStatsCheck:
    def test_zero_b_alpha(self):
        summary = stats_check(m=2, n=80, seeds=30, master_seed=3)
        assert summary["alpha_mean"] == pytest.approx(
            0.75 / np.sqrt(2 * np.pi), abs=1e-12
        )
        freqs = summary["frequencies"]
        assert set(freqs) == {
            "value_ge_alpha_n",
            "u_norm_le_bound",
            "n0_ge_beta_bound",
            "u_norm_le_3",
            "n0_ge_n_over_500",
        }
        for value in freqs.values():
            assert 0.0 <= value <= 1.0

    def test_deterministic(self):
        a = stats_check(m=2, n=60, seeds=10, master_seed=4)
        b = stats_check(m=2, n=60, seeds=10, master_seed=4)
        assert a == b


class TestRecordCsv:
    def test_none_renders_empty(self):
        rec = ExperimentRecord(seed=1, m=2, n=10, bspec="zeros")
        row = rec.to_csv_row()
        assert row.startswith("1,2,10,zeros,")
        assert ",," in row

    def test_header_is_frozen(self):
        assert CSV_HEADER == (
            "seed,m,n,bspec,lp_value,ip_value,ipgap,tree_size,nodes_expanded,"
            "u_norm,n0,s,round_ok,cert_gap,lp_ms,ip_ms,round_ms,status"
        )

    def test_csv_text_roundtrip_floats(self):
        rec = ExperimentRecord(
            seed=0, m=1, n=5, bspec="zeros", lp_value=1.0 / 3.0, ipgap=0.1
        )
        text = records_to_csv([rec])
        cells = text.splitlines()[1].split(",")
        assert float(cells[4]) == 1.0 / 3.0
