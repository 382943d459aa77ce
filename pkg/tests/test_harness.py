import numpy as np
import pytest

from difight.harness import (SWEEP_COLUMNS, ExperimentConfig, Instance, experiment_network,
                             generate_instance, instance_step_sizes, msd_study, recovery_sweep,
                             run_algorithm, success, write_csv)


def small_config(**kw):
    base = dict(N=30, K=2, L=4, M=[6, 20], instances=3, n_it=100, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_defaults_and_validation():
    c = ExperimentConfig()
    assert c.iterations == 500
    assert ExperimentConfig(strategy={"kind": "RP"}).iterations == 2000
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"N": 10, "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(K=0)
    with pytest.raises(ValueError):
        ExperimentConfig(algorithms=["gossip"])


def test_success_examples():
    x = np.array([1.0, 0, 0])
    assert success([[1.0, 0, 0]], x, "centralized")
    assert not success([[1.1, 0, 0]], x, "centralized")
    assert success([[1.0, 0, 0], [1.0, 0, 0]], x)
    assert not success([[1.0, 0, 0], [0.0, 0, 0]], x)
    with pytest.raises(ValueError):
        success([[1.0, 0, 0]], np.zeros(3))


def test_instances_are_reproducible_and_sparse():
    c = small_config()
    a, b = generate_instance(c, 1, 6), generate_instance(c, 1, 6)
    np.testing.assert_array_equal(a.x_star, b.x_star)
    np.testing.assert_array_equal(a.costs[2].Phi, b.costs[2].Phi)
    assert np.count_nonzero(a.x_star) == 2
    assert a.costs[0].Phi.shape == (6, 30)
    # the target does not depend on M
    np.testing.assert_array_equal(a.x_star, generate_instance(c, 1, 20).x_star)
    assert not np.array_equal(a.x_star, generate_instance(c, 2, 6).x_star)


def test_noise_enters_measurements():
    inst = generate_instance(small_config(noise=0.1), 0, 20)
    c = inst.costs[0]
    assert np.linalg.norm(c.y - c.Phi @ inst.x_star) > 0


def test_instance_round_trip():
    inst = generate_instance(small_config(), 0, 6)
    back = Instance.from_dict(inst.to_dict(K=2))
    np.testing.assert_array_equal(back.costs[1].y, inst.costs[1].y)


def test_run_algorithm_recovers_with_enough_measurements():
    c = small_config()
    inst = generate_instance(c, 0, 20)
    tr = run_algorithm(c, experiment_network(c), inst, "DiFIGHT")
    assert success(tr.estimates, inst.x_star)


def test_sweep_rows_and_determinism():
    c = small_config()
    rows = recovery_sweep(c)
    assert len(rows) == len(c.algorithms) * 2
    assert set(rows[0]) == set(SWEEP_COLUMNS)
    assert all(0 <= r["p_success"] <= 1 for r in rows)
    assert write_csv(rows, SWEEP_COLUMNS) == write_csv(recovery_sweep(c), SWEEP_COLUMNS)


def test_msd_study_shapes():
    c = small_config(algorithms=["DiFIGHT", "NonCooperativeIHT"], n_it=40)
    study = msd_study(c, M=20)
    assert set(study.curves) == {"DiFIGHT", "NonCooperativeIHT"}
    assert all(len(v) == 41 for v in study.curves.values())
    assert study.curves["DiFIGHT"][-1] < study.curves["DiFIGHT"][0]


def test_step_sizes_are_positive():
    c = small_config()
    mu = instance_step_sizes(c, generate_instance(c, 0, 20))
    assert np.all(mu["nodes"] > 0) and mu["centralized"].shape == (1,)


def test_csv_uses_dot_decimals_and_header(tmp_path):
    text = write_csv([{"a": 0.5, "b": "x"}], ["a", "b"], tmp_path / "o.csv")
    assert text == "a,b\n0.5,x\n"
    assert (tmp_path / "o.csv").read_text() == text
