"""Finite-support synthetic distributions with exact conditional probabilities.

Finite support makes every expectation in the risk module an exact finite sum,
so bound verification carries no Monte-Carlo error. Sampling is provided for
training only and is deterministic given a seed.

Distribution files are plain text, one atom per line, ``#`` comments allowed:

    general:   x-coords ; x'-coords ; weight ; eta
    bipartite: x-coords ; weight ; eta

Coordinates are space-separated decimal literals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import lp_norm

_WEIGHT_TOL = 1e-12
_BALL_TOL = 1e-9


def _validate_common(weights: np.ndarray, eta: np.ndarray) -> None:
    if weights.size == 0:
        raise ValueError("distribution support is empty")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if abs(float(np.sum(weights)) - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1, got {float(np.sum(weights))!r}")
    if np.any(eta < 0) or np.any(eta > 1):
        raise ValueError("eta values must lie in [0, 1]")


def _check_ball(points: np.ndarray, p: float) -> None:
    for row in points:
        if lp_norm(row, p) > 1.0 + _BALL_TOL:
            raise ValueError(f"point {row} lies outside the unit l_{p} ball")


@dataclass(frozen=True)
class GeneralDistribution:
    """Finite-support distribution over pairs (x, x') with eta = P(Y=+1 | pair)."""

    xs: np.ndarray  # (n, d)
    xps: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)
    eta: np.ndarray  # (n,)
    p: float = 2.0

    def __post_init__(self):
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        xps = np.atleast_2d(np.asarray(self.xps, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if xs.shape != xps.shape or xs.shape[0] != weights.size or weights.size != eta.size:
            raise ValueError("pair, weight and eta shapes disagree")
        _validate_common(weights, eta)
        _check_ball(xs, self.p)
        _check_ball(xps, self.p)
        # degenerate pairs x == x' carry eta = 1/2 by convention
        degenerate = np.all(xs == xps, axis=1)
        eta = np.where(degenerate, 0.5, eta)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "xps", xps)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "eta", eta)

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def dists(self) -> np.ndarray:
        """||x - x'||_p per atom."""
        return np.array([lp_norm(a - b, self.p) for a, b in zip(self.xs, self.xps)])


@dataclass(frozen=True)
class BipartiteDistribution:
    """Finite-support distribution over points x with eta = P(Y=+1 | x).

    Pairs are formed as two independent draws, so pair weight of (i, j) is
    weights[i] * weights[j].
    """

    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)
    eta: np.ndarray  # (m,)
    p: float = 2.0

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if points.shape[0] != weights.size or weights.size != eta.size:
            raise ValueError("point, weight and eta shapes disagree")
        _validate_common(weights, eta)
        _check_ball(points, self.p)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "eta", eta)

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def pair_dists(self) -> np.ndarray:
        """Matrix of ||x_i - x_j||_p over all ordered point pairs."""
        m = self.n_atoms
        out = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                out[i, j] = lp_norm(self.points[i] - self.points[j], self.p)
        return out


def sample_general(d: GeneralDistribution, n: int, seed: int):
    """n i.i.d. draws (x, x', y); pair by weight, then y = +1 w.p. eta."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(d.n_atoms, size=n, p=d.weights)
    y = np.where(rng.random(n) < d.eta[idx], 1, -1)
    return d.xs[idx], d.xps[idx], y


def sample_bipartite(d: BipartiteDistribution, n: int, seed: int):
    """n i.i.d. draws (x, y); point by weight, then y = +1 w.p. eta."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(d.n_atoms, size=n, p=d.weights)
    y = np.where(rng.random(n) < d.eta[idx], 1, -1)
    return d.points[idx], y


# --- file format ---

def _parse_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _coords(tok: str, lineno: int) -> np.ndarray:
    try:
        return np.array([float(v) for v in tok.split()])
    except ValueError as exc:
        raise ValueError(f"line {lineno}: bad coordinate list {tok!r}") from exc


def loads_general(text: str, p: float = 2.0) -> GeneralDistribution:
    xs, xps, ws, etas = [], [], [], []
    for lineno, line in _parse_lines(text):
        parts = [s.strip() for s in line.split(";")]
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'x ; x-prime ; weight ; eta'")
        xs.append(_coords(parts[0], lineno))
        xps.append(_coords(parts[1], lineno))
        ws.append(float(parts[2]))
        etas.append(float(parts[3]))
    if not xs:
        raise ValueError("distribution file holds no atoms")
    return GeneralDistribution(np.array(xs), np.array(xps), np.array(ws), np.array(etas), p=p)


def loads_bipartite(text: str, p: float = 2.0) -> BipartiteDistribution:
    pts, ws, etas = [], [], []
    for lineno, line in _parse_lines(text):
        parts = [s.strip() for s in line.split(";")]
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'x ; weight ; eta'")
        pts.append(_coords(parts[0], lineno))
        ws.append(float(parts[1]))
        etas.append(float(parts[2]))
    if not pts:
        raise ValueError("distribution file holds no atoms")
    return BipartiteDistribution(np.array(pts), np.array(ws), np.array(etas), p=p)


def dumps_general(d: GeneralDistribution) -> str:
    lines = []
    for x, xp, w, e in zip(d.xs, d.xps, d.weights, d.eta):
        lines.append(
            " ".join(repr(float(v)) for v in x)
            + " ; " + " ".join(repr(float(v)) for v in xp)
            + f" ; {float(w)!r} ; {float(e)!r}"
        )
    return "\n".join(lines) + "\n"


def dumps_bipartite(d: BipartiteDistribution) -> str:
    lines = []
    for x, w, e in zip(d.points, d.weights, d.eta):
        lines.append(" ".join(repr(float(v)) for v in x) + f" ; {float(w)!r} ; {float(e)!r}")
    return "\n".join(lines) + "\n"


def load_general(path, p: float = 2.0) -> GeneralDistribution:
    with open(path) as f:
        return loads_general(f.read(), p=p)


def load_bipartite(path, p: float = 2.0) -> BipartiteDistribution:
    with open(path) as f:
        return loads_bipartite(f.read(), p=p)


def random_general(rng: np.random.Generator, n_atoms: int, dim: int, p: float = 2.0) -> GeneralDistribution:
    """Random finite-support pair distribution inside the unit l_p ball."""
    xs = _random_ball(rng, n_atoms, dim, p)
    xps = _random_ball(rng, n_atoms, dim, p)
    w = rng.random(n_atoms) + 0.05
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()  # exact unit mass
    return GeneralDistribution(xs, xps, w, rng.random(n_atoms), p=p)


def random_bipartite(rng: np.random.Generator, n_points: int, dim: int, p: float = 2.0) -> BipartiteDistribution:
    xs = _random_ball(rng, n_points, dim, p)
    w = rng.random(n_points) + 0.05
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return BipartiteDistribution(xs, w, rng.random(n_points), p=p)


def _random_ball(rng: np.random.Generator, n: int, dim: int, p: float) -> np.ndarray:
    pts = rng.uniform(-1, 1, size=(n, dim))
    for i in range(n):
        nrm = lp_norm(pts[i], p)
        if nrm > 1.0:
            pts[i] /= nrm * (1.0 + 1e-9)
    return pts
