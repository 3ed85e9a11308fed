import json
import math
import os
import subprocess
import tempfile

import numpy as np
import pytest

import adaptivity as ad


def basis(d):
    return np.eye(d)


def test_g_optimal_on_basis_is_uniform():
    w = ad.g_optimal_design(basis(4))
    assert np.allclose(w, 0.25)
    assert math.isclose(sum(w), 1.0, rel_tol=0, abs_tol=1e-10)


def test_quad_form_identity():
    a = np.eye(3)
    x = np.array([1.0, 0.0, 0.0])
    assert ad.quad_form(a, 0.0, x) == pytest.approx(1.0)
    lo, hi = ad.eigen_bounds(np.diag([1.0, 2.0, 5.0]))
    assert (lo, hi) == pytest.approx((1.0, 5.0))


def test_policy_distribution_and_draw():
    eng = ad.Engine()
    pol = ad.Policy.mixed([(0.5, ad.Policy.uniform()), (0.5, ad.Policy.g_optimal())])
    dist = eng.distribution(pol, basis(3))
    assert dist.sum() == pytest.approx(1.0)
    arm = eng.draw(pol, basis(3), seed=7)
    assert 0 <= arm < 3

    info = eng.info_matrix(ad.Policy.uniform(), basis(3))
    assert np.allclose(info, np.eye(3) / 3.0)


def test_policy_json_round_trip():
    pol = ad.Policy.softmax(np.eye(2), alpha=math.log(2.0))
    back = ad.Policy.from_json(pol.to_json())
    eng = ad.Engine()
    x = np.array([[1.0, 0.0], [0.0, 0.5]])
    assert np.allclose(eng.distribution(pol, x), eng.distribution(back, x))


def test_mixed_design_structure():
    d = 4
    lam = 0.1
    sets = [basis(d) for _ in range(6)]
    params = ad.build_mixed_design(sets, lam, flavor="softmax")
    params.validate(lam)
    weights = [p for p, _ in params.components]
    assert sum(weights) == pytest.approx(1.0)
    assert len(weights) <= 4 * d * math.log2(d)
    pol = ad.assemble_policy(params)
    eng = ad.Engine()
    assert eng.variation(sets, pol, lam) <= 30 * d * math.log2(d)


def test_core_identification_prunes_rare_direction():
    d = 8
    eps = math.sqrt(d / 281.0)
    sets = [np.array([[1.0] + [0.0] * (d - 1)])]
    for i in range(1, d):
        tilted = np.zeros(d)
        tilted[i] = math.sqrt(1 - eps * eps)
        tilted[0] = eps
        plain = np.zeros(d)
        plain[i] = 1.0
        sets.extend([np.vstack([tilted, plain])] * 40)
    kept, iterations = ad.core_identification(sets, lam=1e-6, c=2)
    assert 0 not in kept
    assert len(kept) == len(sets) - 1
    assert iterations >= 1


def test_run_experiment_deterministic():
    cfg = {
        "schema_version": 1,
        "algo": "BatchLinUCB",
        "env": {"type": "UniformSphere"},
        "d": 2,
        "K": 3,
        "T": 32,
        "delta": 0.1,
        "seeds": [1, 2],
    }
    a = ad.run_experiment(cfg)
    b = ad.run_experiment(cfg)
    assert a["mean_regret"] == b["mean_regret"]
    assert a["n_seeds"] == 2
    assert len(a["per_seed"]) == 2


def test_feasible_lower_bound_signs():
    u = ad.feasible_lower_bound_signs(2, 6400, 4)
    assert len(u) == 1
    assert len(u[0]) == 16
    assert set(u[0]) <= {-1, 1}


@pytest.mark.skipif("ADAPTIVITY_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_design_subcommand():
    cli = os.environ["ADAPTIVITY_CLI"]
    with tempfile.TemporaryDirectory() as tmp:
        sets_path = os.path.join(tmp, "sets.json")
        with open(sets_path, "w") as fh:
            json.dump({"sets": [[[1.0, 0.0], [0.0, 1.0]]]}, fh)
        out = subprocess.run([cli, "design", sets_path], capture_output=True, text=True)
        assert out.returncode == 0
        payload = json.loads(out.stdout)
        assert sum(payload["designs"][0]) == pytest.approx(1.0)
