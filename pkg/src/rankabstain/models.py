"""Constrained scorers: linear models and one-hidden-layer ReLU networks.

Scorers are immutable value objects. ``project`` returns a new scorer whose
parameters satisfy the norm-ball constraints; ``margin_range`` gives the exact
achievable range of h(x') - h(x) over the whole family for a pair at a given
distance. Score gradients with respect to the flattened parameter vector are
exposed for the trainer and the projected-gradient best-in-class search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

LINEAR = "linear"
RELU_NN = "relu_nn"

_FEAS_TOL = 1e-12
_PROJ_RTOL = 1e-13


def conjugate_exponent(q: float) -> float:
    """Conjugate p with 1/p + 1/q = 1, for q in {1, 2, inf}."""
    if q == 1.0:
        return math.inf
    if q == 2.0:
        return 2.0
    if q == math.inf:
        return 1.0
    raise ValueError(f"unsupported norm exponent q = {q}; expected 1, 2 or inf")


def lp_norm(v: np.ndarray, p: float) -> float:
    if p == math.inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p == 1.0:
        return float(np.sum(np.abs(v)))
    return float(np.linalg.norm(v))


@dataclass(frozen=True)
class ConstraintSpec:
    """Norm-ball constraints: ||w||_q <= W, |b| <= B, and ||u||_1 <= Lam (NN only)."""

    W: float
    B: float = 1.0
    Lam: float = 1.0
    q: float = 2.0

    def __post_init__(self):
        if not self.W > 0:
            raise ValueError(f"W must be positive, got {self.W}")
        if self.B < 0:
            raise ValueError(f"B must be non-negative, got {self.B}")
        if not self.Lam > 0:
            raise ValueError(f"Lam must be positive, got {self.Lam}")
        conjugate_exponent(self.q)  # validates q

    @property
    def p(self) -> float:
        return conjugate_exponent(self.q)

    def w_effective(self, kind: str) -> float:
        """Family Lipschitz constant: W for linear scorers, Lam * W for ReLU nets."""
        return self.W if kind == LINEAR else self.Lam * self.W


@dataclass(frozen=True)
class LinearModel:
    """Scorer x -> w . x + b."""

    w: np.ndarray
    b: float
    constraints: ConstraintSpec

    kind = LINEAR

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class ReluNetModel:
    """Scorer x -> sum_j u_j relu(w_j . x + b_j) with n_hidden units."""

    w: np.ndarray  # (n_hidden, dim)
    b: np.ndarray  # (n_hidden,)
    u: np.ndarray  # (n_hidden,)
    constraints: ConstraintSpec

    kind = RELU_NN

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_2d(np.asarray(self.w, dtype=float)))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.w.shape[0] != self.b.shape[0] or self.w.shape[0] != self.u.shape[0]:
            raise ValueError("hidden weight, bias and output dimensions disagree")

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w.shape[0]


Model = LinearModel | ReluNetModel


def score(model: Model, x: np.ndarray) -> float:
    """Scalar score h(x)."""
    return float(scores(model, np.asarray(x, dtype=float)[None, :])[0])


def scores(model: Model, X: np.ndarray) -> np.ndarray:
    """Vectorized scores for rows of X."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != model.dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match model dimension {model.dim}")
    if model.kind == LINEAR:
        return X @ model.w + model.b
    z = X @ model.w.T + model.b
    return np.maximum(z, 0.0) @ model.u


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball, sort-and-threshold method."""
    v = np.asarray(v, dtype=float)
    # the relative slack keeps projection exactly idempotent despite rounding
    if np.sum(np.abs(v)) <= radius * (1.0 + _PROJ_RTOL):
        return v.copy()
    a = np.sort(np.abs(v))[::-1]
    css = np.cumsum(a)
    ks = np.arange(1, a.size + 1)
    rho = np.max(np.nonzero(a * ks > css - radius)[0])
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def _project_lq_ball(v: np.ndarray, radius: float, q: float) -> np.ndarray:
    if q == 2.0:
        n = np.linalg.norm(v)
        return v * (radius / n) if n > radius * (1.0 + _PROJ_RTOL) else v.copy()
    if q == math.inf:
        return np.clip(v, -radius, radius)
    return project_l1_ball(v, radius)


def project(model: Model) -> Model:
    """Return the nearest feasible scorer; feasible parameters pass through unchanged."""
    c = model.constraints
    if model.kind == LINEAR:
        if not np.all(np.isfinite(model.w)) or not math.isfinite(model.b):
            raise ValueError("cannot project non-finite parameters")
        w = _project_lq_ball(model.w, c.W, c.q)
        b = min(max(model.b, -c.B), c.B)
        return replace(model, w=w, b=b)
    if not (np.all(np.isfinite(model.w)) and np.all(np.isfinite(model.b)) and np.all(np.isfinite(model.u))):
        raise ValueError("cannot project non-finite parameters")
    w = np.vstack([_project_lq_ball(row, c.W, c.q) for row in model.w])
    b = np.clip(model.b, -c.B, c.B)
    u = project_l1_ball(model.u, c.Lam)
    return replace(model, w=w, b=b, u=u)


def is_feasible(model: Model, tol: float = _FEAS_TOL) -> bool:
    c = model.constraints
    if model.kind == LINEAR:
        return lp_norm(model.w, c.q) <= c.W + tol and abs(model.b) <= c.B + tol
    return (
        all(lp_norm(row, c.q) <= c.W + tol for row in model.w)
        and np.all(np.abs(model.b) <= c.B + tol)
        and lp_norm(model.u, 1.0) <= c.Lam + tol
    )


def margin_range(constraints: ConstraintSpec, kind: str, dist: float) -> tuple[float, float]:
    """Exact range of h(x') - h(x) over the family for a pair at distance dist.

    Biases cancel in the score difference, so B plays no role here.
    """
    if dist < 0:
        raise ValueError(f"distance must be non-negative, got {dist}")
    r = constraints.w_effective(kind) * dist
    return (-r, r)


# --- flattened parameter vectors, for SGD and projected-gradient search ---

def params_vec(model: Model) -> np.ndarray:
    if model.kind == LINEAR:
        return np.concatenate([model.w, [model.b]])
    return np.concatenate([model.w.ravel(), model.b, model.u])


def with_params(model: Model, vec: np.ndarray) -> Model:
    vec = np.asarray(vec, dtype=float)
    if model.kind == LINEAR:
        return replace(model, w=vec[: model.dim], b=float(vec[model.dim]))
    n, d = model.n_hidden, model.dim
    return replace(
        model,
        w=vec[: n * d].reshape(n, d),
        b=vec[n * d : n * d + n],
        u=vec[n * d + n :],
    )


def score_grads(model: Model, X: np.ndarray) -> np.ndarray:
    """d h(x) / d params for each row of X, shape (n_samples, n_params).

    ReLU subgradient at a dead unit boundary is taken as 0.
    """
    X = np.asarray(X, dtype=float)
    if model.kind == LINEAR:
        return np.hstack([X, np.ones((X.shape[0], 1))])
    z = X @ model.w.T + model.b  # (m, n)
    act = (z > 0).astype(float)
    gu = np.maximum(z, 0.0)  # (m, n)
    ua = model.u * act  # (m, n)
    gw = ua[:, :, None] * X[:, None, :]  # (m, n, d)
    return np.hstack([gw.reshape(X.shape[0], -1), ua, gu])


def random_model(rng: np.random.Generator, kind: str, dim: int, constraints: ConstraintSpec,
                 n_hidden: int = 16) -> Model:
    """Draw a random feasible scorer (gaussian init followed by projection)."""
    if kind == LINEAR:
        raw = LinearModel(rng.normal(size=dim), float(rng.normal()), constraints)
    else:
        raw = ReluNetModel(
            rng.normal(size=(n_hidden, dim)),
            rng.normal(size=n_hidden),
            rng.normal(size=n_hidden),
            constraints,
        )
    return project(raw)


def null_model(kind: str, dim: int, constraints: ConstraintSpec, n_hidden: int = 16) -> Model:
    """The all-zero scorer h = 0."""
    if kind == LINEAR:
        return LinearModel(np.zeros(dim), 0.0, constraints)
    return ReluNetModel(np.zeros((n_hidden, dim)), np.zeros(n_hidden), np.zeros(n_hidden), constraints)


# --- plain-text serialization for CLI round-trips ---

def _fmt_array(a: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a, dtype=float).ravel())


def to_text(model: Model) -> str:
    c = model.constraints
    lines = [
        f"kind = {model.kind}",
        f"dim = {model.dim}",
        f"W = {c.W!r}",
        f"B = {c.B!r}",
        f"Lam = {c.Lam!r}",
        f"q = {c.q!r}",
    ]
    if model.kind == LINEAR:
        lines += [f"w = {_fmt_array(model.w)}", f"b = {model.b!r}"]
    else:
        lines += [
            f"n_hidden = {model.n_hidden}",
            f"w = {_fmt_array(model.w)}",
            f"b = {_fmt_array(model.b)}",
            f"u = {_fmt_array(model.u)}",
        ]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Model:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        kind = fields["kind"]
        dim = int(fields["dim"])
        constraints = ConstraintSpec(
            W=float(fields["W"]), B=float(fields["B"]),
            Lam=float(fields["Lam"]), q=float(fields["q"]),
        )
        if kind == LINEAR:
            return LinearModel(np.fromstring(fields["w"], sep=" "), float(fields["b"]), constraints)
        if kind == RELU_NN:
            n = int(fields["n_hidden"])
            return ReluNetModel(
                np.fromstring(fields["w"], sep=" ").reshape(n, dim),
                np.fromstring(fields["b"], sep=" "),
                np.fromstring(fields["u"], sep=" "),
                constraints,
            )
    except KeyError as exc:
        raise ValueError(f"missing field in model text: {exc}") from exc
    raise ValueError(f"unknown model kind {kind!r}")


def save(model: Model, path) -> None:
    with open(path, "w") as f:
        f.write(to_text(model))


def load(path) -> Model:
    with open(path) as f:
        return from_text(f.read())
