import json
import math

import numpy as np
import pytest

import geclab


def chain_mdp(path, broken=False):
    # Two states, two actions, H = 2; action a moves to state a, reward 1 for action 1 at the last step.
    move = [[[1.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]]]
    transitions = [move, json.loads(json.dumps(move))]
    if broken:
        transitions[1][0][1] = [0.5, 0.49]
    env = {
        "kind": "mdp",
        "horizon": 2,
        "states": 2,
        "actions": 2,
        "initial": [1.0, 0.0],
        "transitions": transitions,
        "rewards": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]]],
    }
    path.write_text(json.dumps(env))
    return path


def identity_pomdp(path):
    s = 3
    stay = np.eye(s).tolist()
    shift = np.roll(np.eye(s), 1, axis=0).tolist()
    env = {
        "kind": "pomdp",
        "horizon": 2,
        "states": s,
        "actions": 2,
        "observations": s,
        "initial": [1.0 / s] * s,
        "transitions": [[stay, shift]] * 2,
        "emissions": [np.eye(s).tolist()] * 2,
        "rewards": [[[0.0, 0.0]] * s, [[0.0, 1.0]] * s],
    }
    path.write_text(json.dumps(env))
    return path


def test_divergences():
    p = np.array([0.5, 0.5])
    q = np.array([0.9, 0.1])
    assert geclab.hellinger_squared(p, q) == pytest.approx(1 - (math.sqrt(0.45) + math.sqrt(0.05)), abs=1e-12)
    assert geclab.total_variation(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert math.isinf(geclab.kl(np.array([0.5, 0.5]), np.array([1.0, 0.0])))


def test_information_gain_and_potential():
    assert geclab.information_gain([np.array([1.0, 0.0])], 1.0) == pytest.approx(math.log(2))
    check = geclab.elliptical_potential([np.array([1.0, 0.0])] * 10, np.eye(2))
    assert check["holds"]
    assert check["lhs"] == pytest.approx(sum(1 / (1 + i) for i in range(10)))


def test_de_dimension():
    assert geclab.de_dimension(np.eye(2), 0.5) == 2
    assert geclab.de_dimension(np.zeros((1, 3)), 0.1) == 0


def test_plan_and_validate(tmp_path):
    mdp = chain_mdp(tmp_path / "mdp.json")
    assert geclab.plan(str(mdp))["value"] == pytest.approx(1.0)
    geclab.validate_model(str(mdp))
    with pytest.raises(geclab.ModelError, match=r"transitions\[step=1\]\[action=0\]\[state=1\] sums to 0.99"):
        geclab.validate_model(str(chain_mdp(tmp_path / "bad.json", broken=True)))


def test_certify_identity_pomdp(tmp_path):
    cert = geclab.certify_psr(str(identity_pomdp(tmp_path / "pomdp.json")))
    assert cert["alpha_generalized"] >= 1 / math.sqrt(3) - 1e-12


def test_run_experiment(tmp_path):
    chain_mdp(tmp_path / "mdp.json")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("agent_kind = model-based\nenv_file = mdp.json\nclass_size = 1\nT = 20\nseeds = 0,1\n")
    summary = geclab.run_experiment(str(cfg), output_dir=str(tmp_path / "out"))
    assert summary["final_mean"] == 0.0
    assert (tmp_path / "out" / "regret_seed1.csv").exists()
    with pytest.raises(geclab.ConfigError):
        geclab.run_experiment(str(cfg), seeds=[3, 3])


def test_gec_certificate():
    trace = {"prediction": [0.01, 0.0], "training": [[0.0], [0.0]], "discrepancy_kind": "hellinger-transition"}
    assert geclab.gec_certificate(trace, "generic", 0.5)["d_hat"] == 0.0
