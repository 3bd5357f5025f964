"""Scikit-learn style estimator wrapping the projected-SGD trainer.

``PairwiseRankingSGD`` exposes the usual ``fit`` / ``get_params`` /
``set_params`` surface. In the general setting ``fit`` takes stacked pairs
``X`` of shape (n, 2, d) with order labels ``y``; in the bipartite setting it
takes points of shape (n, d) with class labels. ``decision_function`` returns
scores and ``predict`` returns +1 / -1 / 0 on pairs, with 0 meaning abstain.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .losses import AbstentionConfig, PhiSpec
from .models import (LINEAR, RELU_NN, ConstraintSpec, lp_norm, null_model,
                     scores)
from .risk import GENERAL
from .trainer import COSINE, TrainConfig, train


class PairwiseRankingSGD(BaseEstimator):
    """Constrained linear or ReLU-net scorer fit by projected Nesterov SGD."""

    def __init__(self, phi_kind="exponential", phi_k=1.0, setting=GENERAL,
                 model_kind=LINEAR, n_hidden=16, W=1.0, B=1.0, Lam=1.0, q=2.0,
                 gamma=0.0, cost=0.0, epochs=200, batch_size=64, lr0=0.1,
                 momentum=0.9, lr_schedule=COSINE, random_state=0):
        self.phi_kind = phi_kind
        self.phi_k = phi_k
        self.setting = setting
        self.model_kind = model_kind
        self.n_hidden = n_hidden
        self.W = W
        self.B = B
        self.Lam = Lam
        self.q = q
        self.gamma = gamma
        self.cost = cost
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr0 = lr0
        self.momentum = momentum
        self.lr_schedule = lr_schedule
        self.random_state = random_state

    def _configs(self):
        constraints = ConstraintSpec(W=self.W, B=self.B, Lam=self.Lam, q=self.q)
        abst = AbstentionConfig(self.gamma, self.cost, p=constraints.p)
        cfg = TrainConfig(
            phi=PhiSpec(self.phi_kind, k=self.phi_k),
            epochs=self.epochs, batch_size=self.batch_size, lr0=self.lr0,
            momentum=self.momentum, lr_schedule=self.lr_schedule,
            seed=self.random_state, setting=self.setting, abstention=abst,
        )
        return constraints, abst, cfg

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        constraints, _, cfg = self._configs()
        if self.setting == GENERAL:
            if X.ndim != 3 or X.shape[1] != 2:
                raise ValueError("general-setting X must have shape (n, 2, d)")
            data = (X[:, 0, :], X[:, 1, :], y)
            dim = X.shape[2]
        else:
            if X.ndim != 2:
                raise ValueError("bipartite-setting X must have shape (n, d)")
            data = (X, y)
            dim = X.shape[1]
        h0 = null_model(self.model_kind, dim, constraints, n_hidden=self.n_hidden)
        self.model_, self.loss_trace_ = train(data, h0, cfg)
        return self

    def decision_function(self, X):
        return scores(self.model_, np.asarray(X, dtype=float))

    def predict(self, X):
        """Pairwise order predictions on X of shape (n, 2, d); 0 abstains."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[1] != 2:
            raise ValueError("predict expects pairs of shape (n, 2, d)")
        _, abst, _ = self._configs()
        m = self.decision_function(X[:, 1, :]) - self.decision_function(X[:, 0, :])
        out = np.where(m >= 0, 1, -1)
        dists = np.array([lp_norm(a - b, abst.p) for a, b in zip(X[:, 0, :], X[:, 1, :])])
        return np.where(dists <= abst.gamma, 0, out)
