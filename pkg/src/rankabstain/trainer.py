"""Projected SGD with Nesterov momentum on empirical surrogate risk.

Training is deterministic given the seed, every intermediate scorer is
projected back onto the constraint set, and the returned scorer is the
incumbent: the epoch snapshot with the lowest full-sample surrogate loss
(projected gradient on the ReLU family is not monotone).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import AbstentionConfig, PhiSpec
from .models import Model, lp_norm, params_vec, project, score_grads, scores, with_params
from .risk import GENERAL, BIPARTITE, _check_setting, _phi_grad_values, phi_values

CONSTANT = "constant"
COSINE = "cosine"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    phi: PhiSpec
    epochs: int = 200
    batch_size: int = 64
    lr0: float = 0.1
    momentum: float = 0.9
    lr_schedule: str = COSINE
    seed: int = 0
    setting: str = GENERAL
    # used only for the loss-trace target column
    abstention: AbstentionConfig = field(default_factory=lambda: AbstentionConfig(0.0, 0.0))

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.lr_schedule not in (CONSTANT, COSINE):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        _check_setting(self.setting)


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    mean_surrogate_loss: float
    mean_target_abstention_loss: float


def _pair_arrays(data, setting: str):
    """Reduce either setting to (X_from, X_to, pair_sign, dists).

    Margins are pair_sign * (h(X_to) - h(X_from)): the general setting uses
    y * (h(x') - h(x)); bipartite pairs with y != y' use
    (y - y')(h(x) - h(x'))/2 over all ordered in-sample pairs.
    """
    if setting == GENERAL:
        X, Xp, y = data
        X = np.asarray(X, dtype=float)
        Xp = np.asarray(Xp, dtype=float)
        y = np.asarray(y)
        return X, Xp, y.astype(float), None
    X, y = data
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    ii, jj = np.meshgrid(np.arange(len(y)), np.arange(len(y)), indexing="ij")
    keep = y[ii] != y[jj]
    ii, jj = ii[keep], jj[keep]
    sgn = (y[ii] - y[jj]) / 2.0
    return X[jj], X[ii], sgn.astype(float), None


def _surrogate_margins(model: Model, xf, xt, sgn) -> np.ndarray:
    return sgn * (scores(model, xt) - scores(model, xf))


def mean_surrogate_loss(model: Model, data, cfg: TrainConfig) -> float:
    xf, xt, sgn, _ = _pair_arrays(data, cfg.setting)
    if len(sgn) == 0:
        return 0.0
    return float(np.mean(phi_values(cfg.phi, _surrogate_margins(model, xf, xt, sgn))))


def mean_target_loss(model: Model, data, cfg: TrainConfig) -> float:
    """Empirical abstention loss on the sample pairs."""
    abst = cfg.abstention
    xf, xt, sgn, _ = _pair_arrays(data, cfg.setting)
    if len(sgn) == 0:
        return 0.0
    dists = np.array([lp_norm(a - b, abst.p) for a, b in zip(xf, xt)])
    if cfg.setting == GENERAL:
        m = scores(model, xt) - scores(model, xf)
        signs = np.where(m >= 0, 1.0, -1.0)
        wrong = (sgn != signs).astype(float)
    else:
        m = sgn * (scores(model, xt) - scores(model, xf))
        wrong = (m < 0) + 0.5 * (m == 0)
    return float(np.mean(np.where(dists <= abst.gamma, abst.cost, wrong)))


def _batch_gradient(model: Model, xf, xt, sgn, phi: PhiSpec) -> np.ndarray:
    m = _surrogate_margins(model, xf, xt, sgn)
    coef = _phi_grad_values(phi, m) * sgn / len(sgn)
    g = coef @ (score_grads(model, xt) - score_grads(model, xf))
    if not np.all(np.isfinite(g)):
        raise TrainingDiverged("non-finite gradient encountered")
    return g


def _lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.lr_schedule == CONSTANT:
        return cfg.lr0
    return cfg.lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))


def sgd_step(model: Model, minibatch, velocity: np.ndarray, lr: float,
             cfg: TrainConfig) -> tuple[Model, np.ndarray]:
    """One Nesterov-momentum step on the minibatch gradient, then projection."""
    xf, xt, sgn = minibatch
    theta = params_vec(model)
    if velocity.shape != theta.shape:
        raise ValueError("velocity dimensions do not match the model parameters")
    lookahead = with_params(model, theta + cfg.momentum * velocity)
    g = _batch_gradient(lookahead, xf, xt, sgn, cfg.phi)
    velocity = cfg.momentum * velocity - lr * g
    new = project(with_params(model, theta + velocity))
    return new, velocity


def train(data, h0: Model, cfg: TrainConfig):
    """Minimize empirical surrogate risk; returns (best model, loss trace)."""
    xf_all, xt_all, sgn_all, _ = _pair_arrays(data, cfg.setting)
    if len(sgn_all) == 0:
        raise ValueError("training data holds no usable pairs")
    rng = np.random.default_rng(cfg.seed)
    model = project(h0)
    velocity = np.zeros_like(params_vec(model))

    best = model
    best_loss = mean_surrogate_loss(model, data, cfg)
    initial_loss = best_loss
    trace = [TraceRow(0, best_loss, mean_target_loss(model, data, cfg))]

    n = len(sgn_all)
    for epoch in range(1, cfg.epochs + 1):
        lr = _lr(cfg, epoch - 1)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            model, velocity = sgd_step(
                model, (xf_all[idx], xt_all[idx], sgn_all[idx]), velocity, lr, cfg)
        loss = mean_surrogate_loss(model, data, cfg)
        trace.append(TraceRow(epoch, loss, mean_target_loss(model, data, cfg)))
        if loss < best_loss:
            best, best_loss = model, loss
        if initial_loss > 0 and loss > 10.0 * initial_loss:
            raise TrainingDiverged(
                f"epoch {epoch} mean loss {loss:.6g} exceeds 10x initial {initial_loss:.6g}")
    return best, trace
