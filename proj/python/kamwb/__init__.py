"""Numerical KAM workbench.

Config-driven functions accept a dict, a JSON string or a path to a JSON file.
"""

import json
import os

from . import _kamwb
from ._kamwb import (
    ActionAngleChart,
    ApproxFunction,
    GenTrig,
    KamwbError,
    action_of_frequency,
    gamma0,
    gamma1,
    omega_tilde,
    period,
    weight,
)

__version__ = _kamwb.__version__


def _config_text(config):
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, (str, os.PathLike)) and os.path.exists(config):
        with open(config) as f:
            return f.read()
    return str(config)


def measure(config, alpha, samples=100000, seed=1, threads=1):
    """Monte Carlo fraction of resonant frequencies in the config's box."""
    return _kamwb.measure(_config_text(config), alpha, samples, seed, threads)


def build_hamiltonian(config, check_gate=True):
    """Summary of the oscillator Hamiltonian N + P: s, omega_tilde, |||P|||, gate."""
    return _kamwb.build_hamiltonian(_config_text(config), check_gate)


def kam_run(config, jmax=-1):
    """Runs the KAM iteration; returns per-step rows and the gate outcome."""
    return _kamwb.kam_run(_config_text(config), jmax)


def simulate(config, T=-1.0, original=False):
    """Integrates the oscillator; T defaults to simulate.T from the config."""
    return _kamwb.simulate(_config_text(config), T, original)


__all__ = [
    "ActionAngleChart",
    "ApproxFunction",
    "GenTrig",
    "KamwbError",
    "action_of_frequency",
    "build_hamiltonian",
    "gamma0",
    "gamma1",
    "kam_run",
    "measure",
    "omega_tilde",
    "period",
    "simulate",
    "weight",
]
