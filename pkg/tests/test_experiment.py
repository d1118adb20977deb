"""Harness behavior: pairing, determinism, parallel equivalence, curve math."""

import numpy as np
import pytest

from allab.config import parse_config
from allab.errors import ConfigError, FormatError
from allab.experiment import (
    RESULTS_HEADER,
    RoundLog,
    build_pool,
    compute_curves,
    load_dataset,
    read_results_csv,
    run_experiment,
    write_curves_csv,
    write_results_csv,
    write_results_json,
)
from allab.seeding import derive_int


def small_doc():
    return {
        "methods": ["random"],
        "dataset": {
            "kind": "synthetic",
            "class_count": 2,
            "per_class": 40,
            "dim": 2,
            "separation": 8.0,
        },
        "initial_count": 10,
        "budget": 5,
        "rounds": 3,
        "repeats": 2,
        "train": {"epochs": 2, "batch_size": 8, "n_checkpoints": 1, "base_lr": 0.1},
        "model": {"hidden": [8]},
    }


# ---- dataset / pool plumbing ----------------------------------------------

def test_load_dataset_is_seed_deterministic():
    cfg = parse_config(small_doc())
    a = load_dataset(cfg)
    b = load_dataset(cfg)
    assert np.array_equal(a.features, b.features)
    other = load_dataset(parse_config({**small_doc(), "master_seed": 1}))
    assert not np.array_equal(a.features, other.features)


def test_build_pool_standardize_modes():
    doc = small_doc()
    cfg = parse_config(doc)
    dataset = load_dataset(cfg)
    seed = derive_int(cfg.master_seed, "pool", 0)

    plain = build_pool(dataset, cfg, seed)
    assert np.array_equal(plain.features, dataset.features)

    from dataclasses import replace

    pooled = build_pool(dataset, replace(cfg, dataset=replace(cfg.dataset, standardize="pool")), seed)
    rows = np.sort(np.concatenate([pooled.labeled_idx, pooled.unlabeled_idx]))
    assert np.abs(pooled.features[rows].mean(axis=0)).max() <= 1e-12
    assert np.abs(pooled.features[rows].std(axis=0) - 1.0).max() <= 1e-12
    # partition identical to the unstandardized build (same rng consumption)
    assert np.array_equal(pooled.labeled_idx, plain.labeled_idx)

    lab = build_pool(dataset, replace(cfg, dataset=replace(cfg.dataset, standardize="labeled")), seed)
    assert np.abs(lab.features[lab.labeled_idx].mean(axis=0)).max() <= 1e-12
    assert np.abs(lab.features[lab.labeled_idx].std(axis=0) - 1.0).max() <= 1e-12


# ---- run_experiment --------------------------------------------------------

def test_labeled_counts_step_by_budget():
    logs = run_experiment(parse_config(small_doc()))
    for g in logs:
        assert g.labeled_count == 10 + 5 * g.round
    assert len(logs) == 1 * 2 * 3  # methods x repeats x rounds


def test_single_round_beats_chance_on_separable_data():
    # five different master seeds; well-separated blobs; random acquisition
    for seed in range(5):
        doc = {**small_doc(), "rounds": 1, "repeats": 1, "master_seed": seed}
        doc["train"] = {"epochs": 6, "batch_size": 8, "n_checkpoints": 1, "base_lr": 0.1}
        logs = run_experiment(parse_config(doc))
        assert len(logs) == 1
        assert logs[0].test_accuracy > 0.5, f"seed {seed}"


def test_identical_config_identical_logs(tmp_path):
    cfg = parse_config(small_doc())
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a == b  # frozen dataclasses: field-exact
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results_csv(a, pa)
    write_results_csv(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_parallel_jobs_match_sequential():
    doc = {**small_doc(), "methods": ["random", "entropy"], "repeats": 2}
    cfg = parse_config(doc)
    assert run_experiment(cfg, jobs=1) == run_experiment(cfg, jobs=4)


def test_jobs_must_be_positive():
    with pytest.raises(ConfigError):
        run_experiment(parse_config(small_doc()), jobs=0)


def test_methods_share_initial_partition_within_repeat():
    doc = {**small_doc(), "methods": ["random", "entropy", "coreset"], "repeats": 2, "rounds": 1}
    logs = run_experiment(parse_config(doc))
    by_repeat = {}
    for g in logs:
        by_repeat.setdefault(g.repeat, set()).add(g.repeat_seed)
    for repeat, seeds in by_repeat.items():
        assert len(seeds) == 1, f"repeat {repeat} mixes pool seeds"
    assert by_repeat[0] != by_repeat[1]


def test_all_methods_run_through_the_harness():
    doc = {
        **small_doc(),
        "methods": ["mpts", "random", "entropy", "bald", "coreset"],
        "repeats": 1,
        "rounds": 2,
    }
    logs = run_experiment(parse_config(doc))
    assert len(logs) == 5 * 1 * 2
    assert [g.method for g in logs] == sorted(g.method for g in logs)
    for g in logs:
        assert 0.0 <= g.test_accuracy <= 1.0
        assert g.wall_time_seconds == 0.0  # reserved field stays zero


def test_score_dumps_written_per_round(tmp_path):
    doc = {
        **small_doc(),
        "methods": ["entropy", "random", "coreset"],
        "repeats": 1,
        "rounds": 2,
        "dump_scores": True,
        "output_dir": str(tmp_path),
    }
    cfg = parse_config(doc)
    run_experiment(cfg)
    # only non-final rounds acquire -> one file per method
    files = sorted(p.name for p in tmp_path.glob("scores_*.csv"))
    assert files == [
        "scores_coreset_rep0_round0.csv",
        "scores_entropy_rep0_round0.csv",
        "scores_random_rep0_round0.csv",
    ]
    ent = (tmp_path / "scores_entropy_rep0_round0.csv").read_text().splitlines()
    assert ent[0] == "pool_index,score,selected"
    body = [line.split(",") for line in ent[1:]]
    assert len(body) == 54  # 80 - 16 test - 10 labeled
    assert sum(int(r[2]) for r in body) == 5  # exactly budget selected
    rnd = (tmp_path / "scores_random_rep0_round0.csv").read_text().splitlines()
    assert len(rnd) == 1 + 5  # only the picks, no scores
    assert all(line.endswith(",1") for line in rnd[1:])


# ---- results serialization -------------------------------------------------

def sample_logs():
    return [
        RoundLog("entropy", 0, 11, 0, 10, 0.5),
        RoundLog("entropy", 0, 11, 1, 15, 0.625),
        RoundLog("entropy", 1, 12, 0, 10, 0.7),
        RoundLog("entropy", 1, 12, 1, 15, 0.875),
    ]


def test_results_csv_roundtrip(tmp_path):
    p = tmp_path / "r.csv"
    write_results_csv(sample_logs(), p)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(RESULTS_HEADER)
    assert lines[1] == "entropy,0,0,10,0.5,0.0"
    back = read_results_csv(p)
    for orig, got in zip(sample_logs(), back):
        assert (got.method, got.repeat, got.round) == (orig.method, orig.repeat, orig.round)
        assert got.labeled_count == orig.labeled_count
        assert got.test_accuracy == orig.test_accuracy  # float(str(x)) round-trips
        assert got.repeat_seed == 0  # not stored in the CSV


def test_results_csv_rejects_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("method,round\n")
    with pytest.raises(FormatError, match="row 1: expected header"):
        read_results_csv(p)
    p.write_text(",".join(RESULTS_HEADER) + "\nentropy,0,0,10,0.5\n")
    with pytest.raises(FormatError, match="row 2: expected 6 fields"):
        read_results_csv(p)
    p.write_text(",".join(RESULTS_HEADER) + "\nentropy,0,0,ten,0.5,0.0\n")
    with pytest.raises(FormatError, match="row 2"):
        read_results_csv(p)


def test_results_json_mirror(tmp_path):
    import json

    cfg = parse_config(small_doc())
    p = tmp_path / "r.json"
    write_results_json(sample_logs(), cfg, p)
    data = json.loads(p.read_text())
    assert data["config"]["budget"] == 5
    assert data["config"]["train"]["lambda"] == 0.1
    assert len(data["rows"]) == 4
    assert data["rows"][0]["test_accuracy"] == 0.5
    assert data["rows"][0]["repeat_seed"] == 11  # JSON keeps full provenance


# ---- curves ----------------------------------------------------------------

def test_compute_curves_mean_and_population_std(tmp_path):
    curves = compute_curves(sample_logs())
    assert curves == [
        ("entropy", 0, 10, 0.6, pytest.approx(0.1), 2),
        ("entropy", 1, 15, 0.75, pytest.approx(0.125), 2),
    ]
    p = tmp_path / "c.csv"
    write_curves_csv(curves, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "method,round,labeled_count,mean_accuracy,std_accuracy,repeats"
    assert lines[1].startswith("entropy,0,10,0.6,")


def test_compute_curves_rejects_unpaired_counts():
    logs = sample_logs()
    logs.append(RoundLog("entropy", 2, 13, 0, 99, 0.5))
    with pytest.raises(FormatError, match="labeled_count differs"):
        compute_curves(logs)


def test_compute_curves_sorted_by_method_then_round():
    logs = [
        RoundLog("random", 0, 1, 1, 15, 0.5),
        RoundLog("entropy", 0, 1, 0, 10, 0.5),
        RoundLog("random", 0, 1, 0, 10, 0.5),
        RoundLog("entropy", 0, 1, 1, 15, 0.5),
    ]
    keys = [(c[0], c[1]) for c in compute_curves(logs)]
    assert keys == [("entropy", 0), ("entropy", 1), ("random", 0), ("random", 1)]
