import json
import random

import pytest

from blockbridge.bench import (
    aggregate,
    parse_bench_config,
    read_records,
    records_csv,
    run_benchmark,
    write_report,
)
from blockbridge.generator import BenchmarkConfig


@pytest.fixture(scope="module")
def small_run(single_bridge, swap_bridge):
    cfg = BenchmarkConfig(3, 2, 1, seeds=(0, 1))
    return run_benchmark(cfg, ("bfs", "uniform"), scenes=[single_bridge, swap_bridge])


def test_record_count_and_order(small_run):
    records, table = small_run
    assert len(records) == 2 * 2 * 2
    keys = [(r.scene_id, r.seed, r.mode) for r in records]
    assert keys == sorted(keys)
    assert all(r.solved and r.replay_ok for r in records)
    assert "single_bridge" in table and "uniform" in table


def test_aggregate_is_a_pure_fold(small_run):
    records, table = small_run
    shuffled = list(records)
    random.Random(0).shuffle(shuffled)
    assert aggregate(shuffled) == table
    assert aggregate(read_records(records_csv(records))) == table


def test_failures_show_as_na(small_run):
    from dataclasses import replace

    records, _ = small_run
    failed = [replace(r, horizon=None, replay_ok=None) for r in records if r.scene_id == "swap_bridge"]
    table = aggregate(failed)
    row = [ln for ln in table.splitlines() if ln.startswith("swap_bridge")][0]
    assert "N/A" in row and "0/2" in row


def test_write_report(small_run, tmp_path):
    records, table = small_run
    paths = write_report(records, tmp_path / "out")
    assert paths["table"].read_text() == table
    assert json.loads(paths["summary"].read_text())["runs"] == 8
    assert paths["figure"].stat().st_size > 1000


def test_parse_bench_config(tmp_path):
    plan = parse_bench_config(
        "family: {n_planes: 3, n_blocks: 2, h_min: 2}\nscene_seeds: [1, 2]\nseeds: [0, 1, 2]\n"
        "modes: [bfs, uniform]\nparams: {k_max: 500, p_gap: 0.8}\n"
    )
    assert plan.config.scene_seeds == (1, 2) and plan.config.seeds == (0, 1, 2)
    assert plan.modes == ("bfs", "uniform") and plan.config.params["k_max"] == 500
    files = parse_bench_config("scenes: [a.yaml]\n", base=tmp_path)
    assert files.scene_files == (str(tmp_path / "a.yaml"),)
    for bad in ["[1, 2]", "seeds: [0]\n", "builtin: [x]\nmodes: [greedy]\n", "builtin: [x]\nparams: {bogus: 1}\n",
                "builtin: [x]\ncolour: red\n"]:
        with pytest.raises(ValueError):
            parse_bench_config(bad)
