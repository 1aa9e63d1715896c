import math

import numpy as np
import pytest

import netreg


@pytest.fixture(scope="module")
def small():
    return netreg.simulate("glsnet", n=12, p=2, N=60, rank=2, s0=0.1, seed=3)


def test_simulate_shapes(small):
    nets = small["networks"]
    assert nets.shape == (60, 12, 12)
    assert small["covariates"].shape == (60, 2)
    assert small["b_star"].shape == (12, 12, 2)
    assert np.all(nets == np.transpose(nets, (0, 2, 1)))
    assert np.all(np.diagonal(nets, axis1=1, axis2=2) == 0)
    assert set(np.unique(nets)) <= {0.0, 1.0}


def test_fit_matches_loss_and_budget(small):
    budget = netreg.sparsity_budget(0.1, 12, 2, True)
    res = netreg.fit(small["networks"], small["covariates"], rank=2, sparsity_frac=0.1)
    assert res["theta"].shape == (12, 12)
    assert np.allclose(res["theta"], res["theta"].T)
    assert np.count_nonzero(res["b"]) <= budget
    assert res["objective_trace"][-1] < res["objective_trace"][0]
    loss = netreg.neg_loglik(small["networks"], small["covariates"], "bernoulli", True, res["theta"], res["b"])
    assert math.isclose(loss, res["loss"], rel_tol=1e-12)


def test_fit_is_deterministic(small):
    a = netreg.fit(small["networks"], small["covariates"], rank=2, sparsity_frac=0.1)
    b = netreg.fit(small["networks"], small["covariates"], rank=2, sparsity_frac=0.1)
    assert np.array_equal(a["theta"], b["theta"])
    assert np.array_equal(a["b"], b["b"])


def test_tune_grid(small):
    res = netreg.tune(small["networks"], small["covariates"], ranks=[1, 2], sparsity_fracs=[0.05, 0.1])
    assert len(res["grid"]) == 4
    best = min(c["ebic"] for c in res["grid"])
    assert res["grid"][res["best_index"]]["ebic"] == best


def test_small_helpers():
    b = np.zeros((2, 2, 1))
    b[:, :, 0] = [[3, -5], [1, 2]]
    kept = netreg.truncate(b, 2)
    assert kept[0, 0, 0] == 3 and kept[0, 1, 0] == -5 and np.count_nonzero(kept) == 2

    want = 400 + (math.log(500000) + math.log(27500)) * 300
    assert abs(netreg.ebic_value(1.0, 50, 200, 10, 2, 100) - want) < 1e-6

    assert netreg.nmi([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(0.0, abs=1e-12)
    labels, centers, inertia = netreg.detect_communities(np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]]), 2)
    assert inertia == pytest.approx(0.0)
    assert labels[0] == labels[1] != labels[2]


def test_sbm_communities():
    sim = netreg.simulate("sbm", n=30, N=80, w=0.6, K=3, seed=4)
    res = netreg.fit(sim["networks"], sim["covariates"], rank=3)
    labels, _, _ = netreg.detect_communities(res["u"], 3)
    assert netreg.nmi(labels, sim["communities"]) == pytest.approx(1.0)


def test_errors(tmp_path):
    with pytest.raises(netreg.IngestionError):
        netreg.load_dataset(str(tmp_path / "missing.txt"))
    nets = np.zeros((2, 4, 4))
    nets[0, 0, 1] = nets[0, 1, 0] = 3.0
    with pytest.raises(Exception):
        netreg.fit(nets, np.zeros((2, 0)), family="bernoulli", rank=1)
