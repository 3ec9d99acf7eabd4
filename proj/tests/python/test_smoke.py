import csv
import json
import os
import pathlib
import subprocess

import numpy as np
import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"

hf = pytest.importorskip("hybridfilt")


@pytest.fixture(scope="module")
def wonham_path():
    model, theta, _, _ = hf.scenario("wonham")
    path = hf.simulate(model, theta, 1.0, 1e-3, 11)
    return model, theta, path


def test_scenarios_load():
    names = hf.scenario_names()
    assert {"wonham", "state_dependent", "ode", "recovery"} <= set(names)
    model, theta, horizon, dt = hf.scenario("recovery")
    assert (model.k, model.d, model.p) == (2, 1, 3)
    assert theta.shape == (3,)
    assert horizon > 0 and dt > 0


def test_model_from_file_matches_scenario():
    model = hf.load_model(str(CONFIGS / "wonham.json"))
    again = hf.model_from_json(model.to_json())
    assert model.hash == again.hash
    q = model.q_matrix(np.array([1.0, 1.0, 1.0]), np.array([0.0]))
    np.testing.assert_allclose(q.sum(axis=0), 0.0, atol=0.0)


def test_bad_model_raises():
    with pytest.raises(hf.ConfigError):
        hf.model_from_json('{"k": 0}')


def test_simulate_shapes(wonham_path):
    _, _, path = wonham_path
    n = len(path["times"])
    assert path["y"].shape == (n, 1)
    assert len(path["x_idx"]) == n
    assert np.all(np.diff(path["times"]) > 0)
    assert set(np.unique(path["x_idx"])) <= {0, 1}


def test_filter_simplex_and_hmm(wonham_path):
    model, theta, path = wonham_path
    f = hf.run_filter(model, path["times"], path["y"], theta)
    probs = f["probs"]
    assert probs.min() >= 0.0
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    hmm_probs, evidence = hf.hmm_forward(model, path["times"], path["y"], theta)
    assert np.abs(probs - hmm_probs).max() < 5e-2
    assert abs(f["log_mass"][-1] - evidence) < 5e-2


def test_smoother_at_horizon_equals_filter(wonham_path):
    model, theta, path = wonham_path
    f = hf.run_filter(model, path["times"], path["y"], theta)
    (tau, probs), = hf.smooth(model, path["times"], path["y"], theta, [path["times"][-1]])
    np.testing.assert_allclose(probs, f["probs"][-1], atol=1e-12)


def test_likelihood_routes(wonham_path):
    model, theta, path = wonham_path
    other = theta * np.array([1.5, 0.7, 0.8])
    assert hf.log_lik_partial(model, path["times"], path["y"], theta, theta) == 0.0
    a = hf.log_lik_partial(model, path["times"], path["y"], other, theta)
    b = hf.innovations_loglik(model, path["times"], path["y"], other, theta)
    assert abs(a - b) < 0.1


def test_em_monotone(wonham_path):
    model, _, path = wonham_path
    trace = hf.em_run(model, path["times"], path["y"], np.array([2.0, 0.5, 0.5]), max_iter=10)
    ll = np.array(trace["loglik"])
    assert np.all(np.diff(ll) >= -1e-9)
    assert len(trace["thetas"]) == len(ll)
    stats = hf.e_step(model, path["times"], path["y"], trace["thetas"][-1])
    assert stats["gram"].shape == (1, 1)


def test_mle_improves(wonham_path):
    model, _, path = wonham_path
    init = np.array([2.0, 0.5, 0.5])
    res = hf.mle_partial(model, path["times"], path["y"], init, restarts=0, max_iter=200)
    assert hf.log_lik_partial(model, path["times"], path["y"], res["theta_hat"], init) >= 0.0


def _cli():
    exe = os.environ.get("HYBRIDFILT_CLI")
    if not exe or not pathlib.Path(exe).exists():
        pytest.skip("HYBRIDFILT_CLI not set")
    return exe


def test_cli_simulate_then_filter(tmp_path):
    exe = _cli()
    model = str(CONFIGS / "wonham.json")
    theta = str(CONFIGS / "wonham_theta.json")
    sim = tmp_path / "sim"
    subprocess.run([exe, "simulate", "--model", model, "--theta", theta, "--T", "1",
                    "--dt", "1e-3", "--seed", "5", "--out", str(sim)],
                   check=True, capture_output=True)
    with open(sim / "path.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["t", "x_idx"]

    out = tmp_path / "filt"
    subprocess.run([exe, "filter", "--y", str(sim / "path.csv"), "--model", model,
                    "--theta", theta, "--out", str(out)],
                   check=True, capture_output=True)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "filter"


def test_cli_rejects_unknown_command():
    exe = _cli()
    r = subprocess.run([exe, "bogus"], capture_output=True)
    assert r.returncode == 1
