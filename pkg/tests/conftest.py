"""Shared fixtures: cached benchmark runs and small synthetic scenarios.

The acceptance suite replays the three built-in cases over five seeds plus a
noise-free variant each. Runs are produced once per session, on first use,
and shared across test modules through the `runs` fixture.
"""

import pytest

from hwconsensus import Scenario, builtin_case, run, scenario_from_dict

_CACHE = {}


def _get_run(case: int, seed: int, noise_off: bool = False, horizon: int = 100_000):
    key = (case, seed, noise_off, horizon)
    if key not in _CACHE:
        s = builtin_case(case, horizon=horizon, noise_off=noise_off)
        _CACHE[key] = run(s, master_seed=seed)
    return _CACHE[key]


@pytest.fixture(scope="session")
def runs():
    return _get_run


@pytest.fixture(scope="session")
def cases():
    return {c: builtin_case(c) for c in (1, 2, 3)}


def two_agent_scenario(horizon=2000, seed=5, dist="gaussian", params=None,
                       c_M=55.0, u_star=(1.0, 2.0), initial_u=None) -> Scenario:
    """Smallest possible network: two agents joined by one edge.

    initial_u None leaves the scenario default (start from the reset points).
    """
    controller = {"u_star": list(u_star), "c_M": c_M}
    if initial_u is not None:
        controller["initial_u"] = list(initial_u)
    doc = {
        "label": "pair",
        "horizon": horizon,
        "topology": [[1, 2, 1.0]],
        "agents": [
            {"kind": "hammerstein", "C": [1], "D": [1],
             "f": {"name": "identity", "params": {}}},
            {"kind": "hammerstein", "C": [1], "D": [1],
             "f": {"name": "identity", "params": {}}},
        ],
        "controller": controller,
        "noise": {"dist": dist,
                  "params": (params if params is not None
                             else {"variance": 1.0} if dist == "gaussian" else {}),
                  "seed": seed},
    }
    return scenario_from_dict(doc)


def forced_truncation_scenarios():
    """Three synthetic setups whose small admissible bounds force resets.

    All use identity-gain plants so escapes are purely noise-driven; the
    reset points sit strictly inside ln(c_M).
    """
    ident = {"kind": "hammerstein", "C": [1], "D": [1],
             "f": {"name": "identity", "params": {}}}
    chain = {
        "label": "forced-chain",
        "horizon": 2000,
        "topology": [[1, 2, 1.0], [2, 3, 1.0], [3, 4, 1.0]],
        "agents": [dict(ident) for _ in range(4)],
        "controller": {"u_star": [0.1, 0.2, -0.1, 0.3], "c_M": 2.0,
                       "initial_u": [0.0, 0.0, 0.0, 0.0]},
        "noise": {"dist": "gaussian", "params": {"variance": 25.0}, "seed": 11},
    }
    square = {
        "label": "forced-square",
        "horizon": 2000,
        "topology": [[1, 2, 1.0], [1, 4, 1.0], [2, 3, 1.0], [2, 4, 1.0]],
        "agents": [dict(ident) for _ in range(4)],
        "controller": {"u_star": [0.5, 1.0, -0.5, 0.9], "c_M": 3.0,
                       "initial_u": [0.0, 0.0, 0.0, 0.0]},
        "noise": {"dist": "uniform", "params": {"a": 10.0}, "seed": 12},
    }
    pair = {
        "label": "forced-pair",
        "horizon": 2000,
        "topology": [[1, 2, 1.0]],
        "agents": [dict(ident) for _ in range(2)],
        "controller": {"u_star": [0.5, -0.5], "c_M": 2.0,
                       "initial_u": [0.0, 0.0]},
        "noise": {"dist": "gaussian", "params": {"variance": 9.0}, "seed": 13},
    }
    return [scenario_from_dict(d) for d in (chain, square, pair)]
