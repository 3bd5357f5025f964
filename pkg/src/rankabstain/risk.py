"""Conditional risks, closed-form and brute-force minimal risks, expected
risks, best-in-class estimates, minimizability gaps, and calibration gaps.

A loss selector is either the string ``"target"`` (the abstention loss; with
gamma = 0 it reduces to plain misranking) or a :class:`~rankabstain.losses.PhiSpec`
naming a surrogate. Settings are ``"general"`` and ``"bipartite"``.

Both settings reduce to the same margin-level kernel. Writing m for the score
difference (m = h(x') - h(x) in the general setting, m = h(x) - h(x')
bipartite), the conditional risk of a surrogate is a * Phi(m) + b * Phi(-m)
where (a, b) = (eta, 1 - eta) in the general setting and
(eta_x (1 - eta_x'), eta_x' (1 - eta_x)) bipartite. All expectations over
finite-support distributions are exact sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import BipartiteDistribution, GeneralDistribution
from .losses import (EXPONENTIAL, HINGE, SIGMOID, AbstentionConfig, PhiSpec,
                     SaturationError)
from .models import (LINEAR, ConstraintSpec, Model, lp_norm, margin_range,
                     params_vec, project, random_model, score_grads, scores,
                     with_params)

GENERAL = "general"
BIPARTITE = "bipartite"
SETTINGS = (GENERAL, BIPARTITE)

TARGET = "target"

LossSelector = str | PhiSpec


def _check_setting(setting: str) -> None:
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")


def _check_loss(loss: LossSelector) -> None:
    if loss != TARGET and not isinstance(loss, PhiSpec):
        raise ValueError(f"loss selector must be 'target' or a PhiSpec, got {loss!r}")


def phi_values(phi: PhiSpec, t: np.ndarray) -> np.ndarray:
    """Vectorized Phi with the same saturation guard as the scalar version."""
    t = np.asarray(t, dtype=float)
    if phi.kind == HINGE:
        return np.maximum(0.0, 1.0 - t)
    if phi.kind == EXPONENTIAL:
        if np.any(-t > 700.0):
            raise SaturationError("exp(-t) saturates; margin outside the feasible range")
        return np.exp(-t)
    return 1.0 - np.tanh(phi.k * t)


def _margin_risk(loss: LossSelector, setting: str, m, a: float, b: float,
                 dist: float, cfg: AbstentionConfig):
    """Conditional risk at margin(s) m for one atom; broadcasts over m."""
    m = np.asarray(m, dtype=float)
    if loss == TARGET:
        if dist <= cfg.gamma:
            return np.full(m.shape, cfg.cost)
        if setting == GENERAL:
            return a * (m < 0) + b * (m >= 0)
        return a * (m < 0) + b * (m > 0) + 0.5 * (a + b) * (m == 0)
    return a * phi_values(loss, m) + b * phi_values(loss, -m)


def _coefs(setting: str, eta) -> tuple[float, float]:
    if setting == GENERAL:
        e = float(eta)
        return e, 1.0 - e
    ex, exp_ = float(eta[0]), float(eta[1])
    return ex * (1.0 - exp_), exp_ * (1.0 - ex)


def conditional_risk_general(loss: LossSelector, h: Model, x, xp, eta: float,
                             cfg: AbstentionConfig) -> float:
    """eta * L(h, x, x', +1) + (1 - eta) * L(h, x, x', -1)."""
    _check_loss(loss)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    m = float(scores(h, np.vstack([xp, x])) @ np.array([1.0, -1.0]))
    dist = lp_norm(x - xp, cfg.p)
    return float(_margin_risk(loss, GENERAL, m, eta, 1.0 - eta, dist, cfg))


def conditional_risk_bipartite(loss: LossSelector, h: Model, x, xp, eta_x: float,
                               eta_xp: float, cfg: AbstentionConfig) -> float:
    """Product-weighted combination over the two discordant label assignments."""
    _check_loss(loss)
    for e in (eta_x, eta_xp):
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {e}")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    m = float(scores(h, np.vstack([x, xp])) @ np.array([1.0, -1.0]))
    a, b = _coefs(BIPARTITE, (eta_x, eta_xp))
    dist = lp_norm(x - xp, cfg.p)
    return float(_margin_risk(loss, BIPARTITE, m, a, b, dist, cfg))


def min_conditional_risk_closed(loss: LossSelector, setting: str, eta, dist: float,
                                cfg: AbstentionConfig, constraints: ConstraintSpec,
                                kind: str = LINEAR) -> float:
    """Closed-form minimal conditional risk over the constrained family.

    W is replaced by Lam * W for the ReLU-net family.
    """
    _check_loss(loss)
    _check_setting(setting)
    a, b = _coefs(setting, eta)
    if loss == TARGET:
        if dist <= cfg.gamma:
            return cfg.cost
        return min(a, b)
    wd = constraints.w_effective(kind) * dist
    if loss.kind == HINGE:
        return a + b - abs(a - b) * min(wd, 1.0)
    if loss.kind == SIGMOID:
        return a + b - abs(a - b) * math.tanh(loss.k * wd)
    # exponential: unconstrained optimum at m* = log(a/b) / 2, clipped to the range
    if a == 0.0 and b == 0.0:
        return 0.0
    if a == 0.0 or b == 0.0:
        return max(a, b) * math.exp(-wd)  # boundary branch, log-ratio infinite
    if 0.5 * abs(math.log(a / b)) <= wd:
        return 2.0 * math.sqrt(a * b)
    return max(a, b) * math.exp(-wd) + min(a, b) * math.exp(wd)


def min_conditional_risk_oracle(loss: LossSelector, setting: str, eta, dist: float,
                                cfg: AbstentionConfig, constraints: ConstraintSpec,
                                kind: str = LINEAR, grid_resolution: float | None = None,
                                max_points: int = 2_000_001) -> float:
    """Brute-force minimum over a uniform grid of achievable margins.

    The grid covers margin_range endpoints and always includes margin 0.
    Default resolution is 1e-5 of the range.
    """
    _check_loss(loss)
    _check_setting(setting)
    lo, hi = margin_range(constraints, kind, dist)
    a, b = _coefs(setting, eta)
    if hi == lo:
        return float(_margin_risk(loss, setting, 0.0, a, b, dist, cfg))
    if grid_resolution is None:
        grid_resolution = 1e-5 * (hi - lo)
    if not grid_resolution > 0:
        raise ValueError(f"grid resolution must be positive, got {grid_resolution}")
    n = min(int(math.ceil((hi - lo) / grid_resolution)) + 1, max_points)
    grid = np.linspace(lo, hi, n)
    grid = np.append(grid, 0.0)
    return float(np.min(_margin_risk(loss, setting, grid, a, b, dist, cfg)))


def calibration_gap(loss: LossSelector, setting: str, h: Model, x, xp, eta,
                    cfg: AbstentionConfig, constraints: ConstraintSpec) -> float:
    """C_L(h, atom) - C*_L(H, atom)."""
    if setting == GENERAL:
        c = conditional_risk_general(loss, h, x, xp, float(eta), cfg)
    else:
        c = conditional_risk_bipartite(loss, h, x, xp, eta[0], eta[1], cfg)
    dist = lp_norm(np.asarray(x, dtype=float) - np.asarray(xp, dtype=float), cfg.p)
    return c - min_conditional_risk_closed(loss, setting, eta, dist, cfg, constraints, h.kind)


# --- atom tables: both settings flattened to one margin-level layout ---

@dataclass(frozen=True)
class AtomTable:
    """Per-atom data with pair margins expressed as h(to) - h(from)."""

    setting: str
    x_from: np.ndarray  # (n, d)
    x_to: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)
    a: np.ndarray  # (n,) coefficient of Phi(m) / the m<0 indicator
    b: np.ndarray  # (n,)
    dists: np.ndarray  # (n,)

    @property
    def deltas(self) -> np.ndarray:
        return self.x_to - self.x_from


def atom_table(setting: str, dist_obj) -> AtomTable:
    _check_setting(setting)
    if setting == GENERAL:
        d: GeneralDistribution = dist_obj
        return AtomTable(GENERAL, d.xs, d.xps, d.weights.copy(),
                         d.eta.copy(), 1.0 - d.eta, d.dists())
    d: BipartiteDistribution = dist_obj
    m = d.n_atoms
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    pd = d.pair_dists()
    # ordered pairs (i, j) with product weights, including i == j; m = h(x_i) - h(x_j)
    return AtomTable(
        BIPARTITE,
        x_from=d.points[jj],
        x_to=d.points[ii],
        weights=d.weights[ii] * d.weights[jj],
        a=d.eta[ii] * (1.0 - d.eta[jj]),
        b=d.eta[jj] * (1.0 - d.eta[ii]),
        dists=pd[ii, jj],
    )


def _risks_at_margins(loss: LossSelector, atoms: AtomTable, M: np.ndarray,
                      cfg: AbstentionConfig) -> np.ndarray:
    """Per-atom conditional risks for a batch of margin rows M of shape (k, n)."""
    a, b = atoms.a, atoms.b
    if loss == TARGET:
        abstain = atoms.dists <= cfg.gamma
        if atoms.setting == GENERAL:
            active = a * (M < 0) + b * (M >= 0)
        else:
            active = a * (M < 0) + b * (M > 0) + 0.5 * (a + b) * (M == 0)
        return np.where(abstain, cfg.cost, active)
    return a * phi_values(loss, M) + b * phi_values(loss, -M)


def atom_margins(atoms: AtomTable, h: Model) -> np.ndarray:
    return scores(h, atoms.x_to) - scores(h, atoms.x_from)


def expected_risk(loss: LossSelector, setting: str, h: Model, dist_obj,
                  cfg: AbstentionConfig) -> float:
    """Exact expected risk: weighted sum of conditional risks over atoms."""
    _check_loss(loss)
    atoms = atom_table(setting, dist_obj)
    risks = _risks_at_margins(loss, atoms, atom_margins(atoms, h)[None, :], cfg)[0]
    return float(atoms.weights @ risks)


def atom_min_risks(loss: LossSelector, setting: str, dist_obj, cfg: AbstentionConfig,
                   constraints: ConstraintSpec, kind: str = LINEAR) -> np.ndarray:
    """Closed-form per-atom minimal conditional risks."""
    atoms = atom_table(setting, dist_obj)
    out = np.empty(atoms.weights.size)
    if setting == GENERAL:
        etas = dist_obj.eta
        for i, (e, dd) in enumerate(zip(etas, atoms.dists)):
            out[i] = min_conditional_risk_closed(loss, setting, e, dd, cfg, constraints, kind)
    else:
        m = dist_obj.n_atoms
        k = 0
        for i in range(m):
            for j in range(m):
                out[k] = min_conditional_risk_closed(
                    loss, setting, (dist_obj.eta[i], dist_obj.eta[j]),
                    atoms.dists[k], cfg, constraints, kind)
                k += 1
    return out


def mean_min_conditional_risk(loss: LossSelector, setting: str, dist_obj,
                              cfg: AbstentionConfig, constraints: ConstraintSpec,
                              kind: str = LINEAR) -> float:
    """E[C*]: exact expectation of the per-atom closed-form minima."""
    atoms = atom_table(setting, dist_obj)
    return float(atoms.weights @ atom_min_risks(loss, setting, dist_obj, cfg, constraints, kind))


# --- best-in-class search ---

GRID = "exhaustive-grid"
PGD = "multi-restart-pgd"


@dataclass(frozen=True)
class BestInClassResult:
    value: float
    method: str
    slack: float
    model: Model | None = None


def best_in_class_risk(loss: LossSelector, setting: str, dist_obj,
                       constraints: ConstraintSpec, cfg: AbstentionConfig,
                       method: str = GRID, kind: str = LINEAR,
                       grid_steps: int = 400, n_restarts: int = 32,
                       pgd_iters: int = 200, seed: int = 0,
                       n_hidden: int = 16) -> BestInClassResult:
    """Upper estimate of the best-in-class expected risk, with method metadata.

    The grid method is exact up to the recorded slack for linear models in
    dimension <= 2; biases cancel in all pairwise losses and are fixed at 0.
    """
    _check_loss(loss)
    atoms = atom_table(setting, dist_obj)
    if method == GRID:
        if kind != LINEAR or atoms.x_from.shape[1] > 2:
            raise ValueError("exhaustive grid supports linear models in dimension <= 2 only")
        return _grid_best(loss, atoms, constraints, cfg, grid_steps)
    if method == PGD:
        return _pgd_best(loss, atoms, constraints, cfg, kind, n_restarts,
                         pgd_iters, seed, n_hidden)
    raise ValueError(f"unknown best-in-class method {method!r}")


def _feasible_w_grid(constraints: ConstraintSpec, dim: int, centers, half_width,
                     steps: int) -> np.ndarray:
    axes = [np.linspace(c - half_width, c + half_width, steps) for c in centers]
    if dim == 1:
        W = axes[0][:, None]
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        W = np.column_stack([g0.ravel(), g1.ravel()])
    q = constraints.q
    if q == math.inf:
        mask = np.max(np.abs(W), axis=1) <= constraints.W
    elif q == 1.0:
        mask = np.sum(np.abs(W), axis=1) <= constraints.W
    else:
        mask = np.linalg.norm(W, axis=1) <= constraints.W
    return W[mask]


def _grid_risks(loss, atoms, cfg, Wgrid):
    M = Wgrid @ atoms.deltas.T  # (G, n_atoms)
    return _risks_at_margins(loss, atoms, M, cfg) @ atoms.weights


def _grid_slack(loss, atoms, constraints, cfg, step: float) -> float:
    """Conservative risk change over one grid cell radius (surrogate losses)."""
    if loss == TARGET:
        return 0.0
    wd = constraints.W * atoms.dists
    if loss.kind == HINGE:
        dphi = np.ones_like(wd)
    elif loss.kind == SIGMOID:
        dphi = np.full_like(wd, loss.k)
    else:
        dphi = np.exp(wd)
    dnorm1 = np.sum(np.abs(atoms.deltas), axis=1)
    return float(atoms.weights @ ((atoms.a + atoms.b) * dphi * dnorm1)) * step / 2.0


def _grid_best(loss, atoms, constraints, cfg, steps: int) -> BestInClassResult:
    dim = atoms.x_from.shape[1]
    half = constraints.W
    centers = np.zeros(dim)
    best_val, best_w = math.inf, centers
    step = 2.0 * half / (steps - 1)
    for _pass in range(2):  # coarse pass, then one refinement around the incumbent
        Wgrid = _feasible_w_grid(constraints, dim, centers, half, steps)
        if Wgrid.size:
            vals = _grid_risks(loss, atoms, cfg, Wgrid)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_w = float(vals[i]), Wgrid[i]
        step = 2.0 * half / (steps - 1)
        centers, half = best_w, step
    from .models import LinearModel
    model = project(LinearModel(best_w, 0.0, constraints))
    return BestInClassResult(best_val, GRID, _grid_slack(loss, atoms, constraints, cfg, step), model)


_SMOOTH_TARGET = PhiSpec(SIGMOID, k=25.0)


def _pgd_best(loss, atoms, constraints, cfg, kind, n_restarts, iters, seed,
              n_hidden) -> BestInClassResult:
    """Projected gradient with restarts; 0-1 targets descend a steep sigmoid proxy
    while the incumbent is always scored with the true loss."""
    rng = np.random.default_rng(seed)
    dim = atoms.x_from.shape[1]
    grad_loss = _SMOOTH_TARGET if loss == TARGET else loss
    active = np.ones(atoms.weights.size, dtype=bool)
    if loss == TARGET:
        active = atoms.dists > cfg.gamma  # abstained atoms are constant in h
    best_val, best_model = math.inf, None
    for _ in range(n_restarts):
        model = random_model(rng, kind, dim, constraints, n_hidden=n_hidden)
        theta = params_vec(model)
        for it in range(iters):
            model = with_params(model, theta)
            m = atom_margins(atoms, model)
            val = float(atoms.weights @ _risks_at_margins(loss, atoms, m[None, :], cfg)[0])
            if val < best_val:
                best_val, best_model = val, model
            dphi = _phi_grad_values(grad_loss, m)
            coef = atoms.weights * (atoms.a * dphi - atoms.b * _phi_grad_values(grad_loss, -m))
            coef = np.where(active, coef, 0.0)
            g = coef @ (score_grads(model, atoms.x_to) - score_grads(model, atoms.x_from))
            lr = 0.5 * (1.0 + math.cos(math.pi * it / iters)) / 2.0 + 1e-3
            theta = params_vec(project(with_params(model, theta - lr * g)))
        model = with_params(model, theta)
        val = float(atoms.weights @ _risks_at_margins(loss, atoms,
                                                      atom_margins(atoms, model)[None, :], cfg)[0])
        if val < best_val:
            best_val, best_model = val, model
    return BestInClassResult(best_val, PGD, 0.0, best_model)


def _phi_grad_values(phi: PhiSpec, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if phi.kind == HINGE:
        return np.where(t < 1.0, -1.0, 0.0)
    if phi.kind == EXPONENTIAL:
        if np.any(-t > 700.0):
            raise SaturationError("exp(-t) saturates; margin outside the feasible range")
        return -np.exp(-t)
    return -phi.k / np.cosh(phi.k * t) ** 2


def minimizability_gap(loss: LossSelector, setting: str, dist_obj,
                       constraints: ConstraintSpec, cfg: AbstentionConfig,
                       kind: str = LINEAR, method: str = GRID, **kwargs) -> float:
    """Best-in-class risk minus E[C*]; non-negative up to estimation slack."""
    best = best_in_class_risk(loss, setting, dist_obj, constraints, cfg,
                              method=method, kind=kind, **kwargs)
    return best.value - mean_min_conditional_risk(loss, setting, dist_obj, cfg, constraints, kind)


# --- reports ---

RISK_REPORT_COLUMNS = ("loss", "setting", "phi", "gamma", "cost",
                       "expected_risk", "best_in_class", "minimizability_gap", "method")


@dataclass(frozen=True)
class RiskReport:
    loss: str
    setting: str
    phi: str
    gamma: float
    cost: float
    expected_risk: float
    best_in_class: float
    minimizability_gap: float
    method: str
    per_atom_calibration_gaps: tuple = field(default=(), compare=False)

    def csv_row(self) -> list[str]:
        from .tableio import fmt_float
        return [self.loss, self.setting, self.phi,
                fmt_float(self.gamma), fmt_float(self.cost),
                fmt_float(self.expected_risk), fmt_float(self.best_in_class),
                fmt_float(self.minimizability_gap), self.method]


def risk_report(loss: LossSelector, setting: str, h: Model, dist_obj,
                cfg: AbstentionConfig, constraints: ConstraintSpec,
                method: str = GRID, **kwargs) -> RiskReport:
    atoms = atom_table(setting, dist_obj)
    exp_risk = expected_risk(loss, setting, h, dist_obj, cfg)
    best = best_in_class_risk(loss, setting, dist_obj, constraints, cfg,
                              method=method, kind=h.kind, **kwargs)
    mmin = mean_min_conditional_risk(loss, setting, dist_obj, cfg, constraints, h.kind)
    per_atom = _risks_at_margins(loss, atoms, atom_margins(atoms, h)[None, :], cfg)[0] \
        - atom_min_risks(loss, setting, dist_obj, cfg, constraints, h.kind)
    return RiskReport(
        loss=TARGET if loss == TARGET else "surrogate",
        setting=setting,
        phi="-" if loss == TARGET else loss.kind,
        gamma=cfg.gamma, cost=cfg.cost,
        expected_risk=exp_risk,
        best_in_class=best.value,
        minimizability_gap=best.value - mmin,
        method=best.method,
        per_atom_calibration_gaps=tuple(per_atom),
    )
