import json
import math
import pathlib

import pytest

import kamwb

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def toy(**oscillator):
    cfg = json.loads((CONFIGS / "toy.json").read_text())
    cfg["oscillator"].update(oscillator)
    return cfg


def test_weight():
    assert kamwb.weight([1, -1]) == pytest.approx(1 + 2 * math.log(2) ** 3, rel=1e-12)


def test_period_and_trig():
    assert kamwb.period(1) == pytest.approx(7.41630, abs=1e-5)
    g = kamwb.GenTrig(0)
    c, s = g(0.7)
    assert c == pytest.approx(math.cos(0.7), abs=1e-10)
    assert s == pytest.approx(-math.sin(0.7), abs=1e-10)
    assert kamwb.GenTrig(2).verify()["worst"] < 1e-10


def test_chart():
    chart = kamwb.ActionAngleChart(1, 0.5, 2.0)
    u, v = chart.forward(1.2, 0.4)
    rho, phi = chart.inverse(u, v)
    assert (rho, phi) == pytest.approx((1.2, 0.4), abs=1e-10)
    assert chart.jacobian_det(1.2, 0.4) == pytest.approx(1.0, abs=1e-8)
    wt = kamwb.omega_tilde(chart, 1.0)
    assert kamwb.action_of_frequency(chart, wt) == pytest.approx(1.0, rel=1e-10)


def test_gamma_ordering():
    d = kamwb.ApproxFunction.power_exp(1 / 3)
    assert 1 <= kamwb.gamma0(d, 0.5) <= kamwb.gamma1(d, 0.5)


def test_measure_deterministic():
    a = kamwb.measure(CONFIGS / "toy.json", 1e-2, samples=20000, seed=42)
    b = kamwb.measure(CONFIGS / "toy.json", 1e-2, samples=20000, seed=42, threads=2)
    assert a == b
    assert a["fraction"] <= a["union_bound"]


def test_build_hamiltonian_gate():
    h = kamwb.build_hamiltonian(CONFIGS / "toy.json")
    assert h["gate_ok"]
    with pytest.raises(kamwb.KamwbError) as e:
        kamwb.build_hamiltonian(toy(epsilon=1e-3))
    assert e.value.args[1] == "GateFailed"
    assert e.value.args[2] is True


def test_kam_run_two_steps():
    r = kamwb.kam_run(CONFIGS / "toy.json", jmax=2)
    assert len(r["rows"]) == 2
    assert r["final_gate_ok"]
    for row in r["rows"]:
        assert row["measured_norm"] <= row["bound_rhs"]
        assert row["homolog_residual"] <= 1e-10


def test_simulate_unforced_energy():
    cfg = toy()
    cfg["oscillator"]["p"] = []
    r = kamwb.simulate(cfg, T=100.0)
    assert r["max_energy_drift"] < 1e-9
    assert r["sup_abs_x"] == pytest.approx(1.0, abs=1e-9)


def test_malformed_config():
    with pytest.raises(kamwb.KamwbError) as e:
        kamwb.simulate('{"a": [1,,2]}')
    assert e.value.args[1] == "ConfigError"
