"""Python access to the dual Turing test engine.

Structured results come back as plain dicts and lists.
"""

import json as _json

from . import _dualtest
from ._dualtest import Error, binomial_test

__all__ = [
    "Error",
    "alpha_game",
    "binomial_test",
    "check_constraints",
    "config_digest",
    "quality",
    "report",
    "reward",
    "score",
    "simulate",
    "solve",
    "solve_matrix",
    "toy_loop",
    "train_detector",
]


def _weights(weights):
    return None if weights is None else _json.dumps(weights)


def quality(subscores, weights=None):
    """Weighted mean of sub-scores; uniform weights when none are given."""
    return _dualtest.quality(list(subscores), _weights(weights))


def check_constraints(human, machine, tau, delta, weights=None):
    """'ok', or the name of the first violated constraint."""
    return _dualtest.check_constraints(list(human), list(machine), tau, delta, _weights(weights))


def config_digest(config):
    return _dualtest.config_digest(_json.dumps(config))


def simulate(config_path, seed=None):
    return _json.loads(_dualtest.simulate(str(config_path), seed))


def report(transcript, config_path=None):
    return _json.loads(_dualtest.report(_json.dumps(transcript), None if config_path is None else str(config_path)))


def solve(path, mixed=False):
    return _json.loads(_dualtest.solve(str(path), mixed))


def solve_matrix(rows):
    return _json.loads(_dualtest.solve_matrix([list(r) for r in rows]))


def alpha_game():
    return _json.loads(_dualtest.alpha_game())


def train_detector(corpus_path, epochs=2000, interactions=False):
    return _json.loads(_dualtest.train_detector(str(corpus_path), epochs, interactions))


def score(detector, subscores):
    return _dualtest.score(_json.dumps(detector), list(subscores))


def reward(reply, reference, detector, config=None, weights=None):
    cfg = None if config is None else _json.dumps(config)
    return _json.loads(_dualtest.reward(list(reply), list(reference), _json.dumps(detector), cfg, _weights(weights)))


def toy_loop(seed=1):
    return _json.loads(_dualtest.toy_loop(seed))
