import json
from pathlib import Path

import numpy as np
import pytest

import adrckit
from adrckit.cli import dump_scenario, load_scenario, main, parse_scenario
from adrckit.plant import CanonicalPlant
from adrckit.sim import DisturbanceModel, SimConfig, cost, simulate
from adrckit.synthesis import DesiredSpectrum, synthesize

SCENARIOS = Path(adrckit.__file__).parent / "scenarios"
POLES = [-2.0, -2.2, -2.4, -2.6, -2.8, -3.0, -3.2]


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr().out
    return rc, (json.loads(out) if out.lstrip().startswith("{") else out)


def test_bundled_scenarios_present():
    names = {p.stem for p in SCENARIOS.glob("*.scn")}
    assert {"slow", "fast", "bandwidth", "published_slow",
            "ideal_chain", "published_alternate"} <= names


def test_dump_config_round_trip(capsys, tmp_path):
    src = SCENARIOS / "slow.scn"
    rc, text = run(capsys, "synthesize", "--scenario", str(src),
                   "--dump-config")
    assert rc == 0
    assert parse_scenario(text) == load_scenario(src)
    # dumping the dump is a fixed point
    again = tmp_path / "again.scn"
    again.write_text(text, encoding="utf-8")
    rc2, text2 = run(capsys, "synthesize", "--scenario", str(again),
                     "--dump-config")
    assert rc2 == 0 and text2 == text


def test_parse_rejects_unknown_key(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\nplant.q = 3\n"
                   "controller.poles = -1 -2 -3 -4 -5 -6 -7\n")
    rc, payload = run(capsys, "synthesize", "--scenario", str(scn))
    assert rc == 2
    assert payload["error"] == "ValueError"
    assert "plant.q" in payload["message"]
    assert "line" in payload["message"]


def test_parse_rejects_duplicate_key():
    with pytest.raises(ValueError, match="duplicate"):
        parse_scenario("plant.a = 1\nplant.a = 2\n")


def test_exactly_one_controller_variant(tmp_path, capsys):
    scn = tmp_path / "two.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\n"
                   "controller.poles = -1 -2 -3 -4 -5 -6 -7\n"
                   "controller.omega_c = 1.0\ncontroller.omega_o = 8.0\n")
    rc, payload = run(capsys, "simulate", "--scenario", str(scn))
    assert rc == 2
    assert payload["error"] == "ValueError"


def test_synthesize_matches_library(capsys):
    rc, payload = run(capsys, "synthesize", "--scenario",
                      str(SCENARIOS / "slow.scn"))
    assert rc == 0
    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    want = synthesize(plant, 1.0, DesiredSpectrum.from_poles(POLES),
                      policy=[3, 4, 5]).gains
    assert np.allclose(payload["K"], want.K, rtol=1e-12)
    assert np.allclose(payload["G"], want.G, rtol=1e-12)
    assert payload["b_hat"] == 1.0
    # four-digit published values for this configuration
    assert np.allclose(payload["K"], [0.1513, 1.2608, 1.0586], atol=5e-5)
    assert np.allclose(payload["G"],
                       [19.1414, 161.2754, 802.6627, -4876.5604], atol=5e-5)
    assert payload["q_hat_star"][0] == pytest.approx(-738.01728, abs=1e-5)
    assert payload["max_residual"] < 1e-6
    eig = [complex(re, im) for re, im in payload["eig"]]
    assert np.allclose(sorted(lam.real for lam in eig), sorted(POLES),
                       atol=1e-6)


def test_simulate_json_matches_library(capsys):
    rc, payload = run(capsys, "simulate", "--scenario",
                      str(SCENARIOS / "slow.scn"))
    assert rc == 0
    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    gains = synthesize(plant, 1.0, DesiredSpectrum.from_poles(POLES),
                       policy=[3, 4, 5]).gains
    traj = simulate(plant, gains, DisturbanceModel(d_ss=1.0),
                    SimConfig(T=30.0, dt=1e-3, x0=[1.0, 0.0, 0.0]))
    want = cost(traj, 0.1)
    assert payload["cost"]["C"] == pytest.approx(want.C, rel=1e-12)
    assert payload["cost"]["C_y"] == pytest.approx(want.C_y, rel=1e-12)
    assert payload["cost"]["C_u"] == pytest.approx(want.C_u, rel=1e-12)


def test_simulate_writes_csv_and_json(capsys, tmp_path):
    out = tmp_path / "runout"
    rc, payload = run(capsys, "simulate", "--scenario",
                      str(SCENARIOS / "published_slow.scn"), "--out", str(out))
    assert rc == 0
    csv = out / "published_slow.csv"
    rep = out / "published_slow.json"
    assert csv.is_file() and rep.is_file()
    assert json.loads(rep.read_text()) == payload
    header = csv.read_text().splitlines()[0]
    assert header == "t,x1,x2,x3,xhat1,xhat2,xhat3,dhat,u,y,d"


def test_published_gain_run_input_settles_at_one(capsys, tmp_path):
    # constant unit disturbance: the input must converge to -d/b = 1
    out = tmp_path / "runout"
    run(capsys, "simulate", "--scenario", str(SCENARIOS / "published_slow.scn"),
        "--out", str(out))
    last = (out / "published_slow.csv").read_text().splitlines()[-1].split(",")
    u_final = float(last[8])
    assert abs(u_final - 1.0) < 1e-2


def test_unobservable_plant_exits_2(tmp_path, capsys):
    scn = tmp_path / "unobs.scn"
    scn.write_text("plant.A = -1 0 0 -2\nplant.B = 1 1\nplant.C = 1 0\n"
                   "controller.poles = -1 -2 -3 -4 -5\n")
    rc, payload = run(capsys, "synthesize", "--scenario", str(scn))
    assert rc == 2
    assert payload["error"] == "Unobservable"


def test_destabilizing_gain_sign_exits_3(tmp_path, capsys):
    scn = tmp_path / "blow.scn"
    scn.write_text(
        "plant.a = 4 1 2\nplant.b = -1\n"
        "controller.K = 0.1513 1.2608 1.0586\n"
        "controller.G = 19.1414 161.2754 802.6627 -4876.5604\n"
        "controller.b_hat = -1\n"
        "disturbance.d_ss = 1\n"
        "sim.T = 30\nsim.dt = 0.001\nsim.x0 = 1 0 0\n")
    rc, payload = run(capsys, "simulate", "--scenario", str(scn))
    assert rc == 3
    assert payload["error"] == "UnstableBlowup"
    assert 0.0 < payload["blowup_time"] < 30.0


def test_bad_split_selection_exits_2(tmp_path, capsys):
    scn = tmp_path / "split.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\n"
                   "controller.poles = -1 -2 -3 -4 -5 -6 -7\n"
                   "controller.split_indices = 0 0 1\n")
    rc, payload = run(capsys, "synthesize", "--scenario", str(scn))
    assert rc == 2


def test_batch_is_job_count_invariant(tmp_path, capsys):
    batch = tmp_path / "batch"
    batch.mkdir()
    common = ("plant.a = 4 1 2\nplant.b = -1\n"
              "controller.poles = -2 -2.2 -2.4 -2.6 -2.8 -3 -3.2\n"
              "controller.b_hat = 1\ncontroller.split_indices = 3 4 5\n"
              "disturbance.d_ss = 1\nsim.dt = 0.001\nsim.x0 = 1 0 0\n")
    (batch / "short.scn").write_text(common + "sim.T = 1\n")
    (batch / "longer.scn").write_text(common + "sim.T = 2\n")
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    rc1, merged1 = run(capsys, "simulate", "--scenario", str(batch),
                       "--out", str(out1), "--jobs", "1")
    rc2, merged2 = run(capsys, "simulate", "--scenario", str(batch),
                       "--out", str(out2), "--jobs", "2")
    assert rc1 == rc2 == 0
    assert list(merged1) == ["longer", "short"]
    assert merged1 == merged2
    assert json.loads((out1 / "batch.json").read_text()) == merged1
    assert (out1 / "short.csv").is_file()
    assert (out1 / "longer.csv").is_file()


def test_batch_exit_code_is_worst_member(tmp_path, capsys):
    batch = tmp_path / "batch"
    batch.mkdir()
    (batch / "ok.scn").write_text(
        "plant.a = 4 1 2\nplant.b = -1\n"
        "controller.poles = -2 -2.2 -2.4 -2.6 -2.8 -3 -3.2\n"
        "sim.T = 1\nsim.dt = 0.001\nsim.x0 = 1 0 0\n")
    (batch / "bad.scn").write_text(
        "plant.a = 4 1 2\nplant.b = -1\n"
        "controller.poles = -1 -2 -3 -4 -5 -6 -7\n"
        "controller.split_indices = 0 0 1\n"
        "sim.T = 1\nsim.x0 = 1 0 0\n")
    rc, merged = run(capsys, "simulate", "--scenario", str(batch))
    assert rc == 2
    assert "error" in merged["bad"]
    assert "cost" in merged["ok"]


def test_pid_check_reports_trace_coefficient(capsys, tmp_path):
    scn = tmp_path / "pid.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\n"
                   "controller.K = 1 1 1\ncontroller.G = 1 1 1 1\n")
    rc, payload = run(capsys, "pid-check", "--scenario", str(scn))
    assert rc == 0
    assert payload["a3"] == 2.0
    assert payload["pid_stabilizable_necessary"] is False
    scn2 = tmp_path / "pid2.scn"
    scn2.write_text("plant.a = 4 1 -2\nplant.b = -1\n"
                    "controller.K = 1 1 1\ncontroller.G = 1 1 1 1\n")
    _, payload2 = run(capsys, "pid-check", "--scenario", str(scn2))
    assert payload2["pid_stabilizable_necessary"] is True


def test_match_model_based_subcommand(capsys, tmp_path):
    scn = tmp_path / "match.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\n"
                   "controller.k_star = 10.56 14.48 6.6\n"
                   "controller.g_star = 11.6 50.36 96.976 69.888\n"
                   "controller.b_hat = 1\n")
    rc, payload = run(capsys, "match-model-based", "--scenario", str(scn))
    assert rc == 0
    assert payload["max_rel_coeff_error"] < 1e-10
    assert len(payload["K"]) == 3 and len(payload["G"]) == 4


def test_repeated_root_request_stays_close(capsys, tmp_path):
    # numerically delicate: one root of multiplicity seven
    scn = tmp_path / "rep.scn"
    scn.write_text("plant.a = 0 0 0\nplant.b = 1\n"
                   "controller.poles = -1 -1 -1 -1 -1 -1 -1\n"
                   "controller.b_hat = 1\n")
    rc, payload = run(capsys, "synthesize", "--scenario", str(scn))
    assert rc == 0
    assert np.allclose(payload["K"], [1.0, 3.0, 3.0], atol=0.05)
    assert np.allclose(payload["G"], [4.0, 6.0, 4.0, 1.0], atol=0.05)


def test_alternate_gain_set_gives_similar_cost(capsys):
    _, a = run(capsys, "cost", "--scenario", str(SCENARIOS / "published_slow.scn"))
    _, b = run(capsys, "cost", "--scenario", str(SCENARIOS / "published_alternate.scn"))
    rel = abs(a["cost"]["C"] - b["cost"]["C"]) / a["cost"]["C"]
    assert rel < 0.05


def test_zero_scenario_costs_nothing(capsys, tmp_path):
    scn = tmp_path / "zero.scn"
    scn.write_text("plant.a = 4 1 2\nplant.b = -1\n"
                   "controller.poles = -2 -2.2 -2.4 -2.6 -2.8 -3 -3.2\n"
                   "sim.T = 1\nsim.x0 = 0 0 0\n")
    rc, payload = run(capsys, "cost", "--scenario", str(scn))
    assert rc == 0
    assert payload["cost"]["C"] == 0.0


def test_seed_flag_overrides_scenario_seed(capsys):
    rc, base = run(capsys, "simulate", "--scenario",
                   str(SCENARIOS / "slow_sampled_noisy.scn"))
    rc2, same = run(capsys, "simulate", "--scenario",
                    str(SCENARIOS / "slow_sampled_noisy.scn"), "--seed", "0")
    rc3, other = run(capsys, "simulate", "--scenario",
                     str(SCENARIOS / "slow_sampled_noisy.scn"), "--seed", "12345")
    assert rc == rc2 == rc3 == 0
    assert base == same          # scenario ships seed 0
    assert base != other


def test_verify_conjecture_subcommand(capsys):
    rc, payload = run(capsys, "verify-conjecture", "--rho", "1",
                      "--trials", "5", "--seed", "0")
    assert rc == 0
    assert payload["passed"] is True
    assert payload["failures"] == []
    assert len(payload["residuals"]) == 5
    assert payload["max_residual"] < 1e-9
