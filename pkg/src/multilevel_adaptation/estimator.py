"""Estimator-style wrapper for parameter sweeps.

Simulation has no training data, so only part of the usual estimator
contract applies: constructor arguments are the scenario parameters,
``fit`` runs the replications and ``score`` reports the outcome.  This is
enough for ``get_params``/``set_params``/``clone`` and ``ParameterGrid``.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.model_selection import ParameterGrid

from .engine import Scenario, run_grid


class GroupAdaptationSimulator(BaseEstimator):
    def __init__(self, structure="decomposed", k=None, learn_prob=0.0, tau=None, alpha=0.5,
                 beta=0.5, n_decisions=12, m_subtasks=3, p_total=30, horizon=200,
                 replications=1500, master_seed=0, learning_scope="all",
                 event_order="decide-first", workers=1):
        self.structure = structure
        self.k = k
        self.learn_prob = learn_prob
        self.tau = tau
        self.alpha = alpha
        self.beta = beta
        self.n_decisions = n_decisions
        self.m_subtasks = m_subtasks
        self.p_total = p_total
        self.horizon = horizon
        self.replications = replications
        self.master_seed = master_seed
        self.learning_scope = learning_scope
        self.event_order = event_order
        self.workers = workers

    def to_scenario(self) -> Scenario:
        params = self.get_params()
        params.pop("workers")
        return Scenario(**params)

    def fit(self, X=None, y=None):
        """Run all replications; ``X`` and ``y`` are ignored."""
        self.scenario_ = self.to_scenario()
        self.report_ = run_grid([self.scenario_], self.workers)[0]
        self.series_ = self.report_.series
        return self

    def score(self, X=None, y=None, measure: str = "final") -> float:
        if not hasattr(self, "report_"):
            raise RuntimeError("call fit() before score()")
        return self.report_.measure(measure)


def sweep(param_grid, workers=1, **fixed):
    """Fit one simulator per point of ``param_grid``; returns ``(params, fitted)`` pairs."""
    out = []
    for params in ParameterGrid(param_grid):
        est = GroupAdaptationSimulator(workers=workers, **fixed, **params)
        out.append((params, est.fit()))
    return out
