"""Pointwise loss functions for pairwise and bipartite ranking with abstention.

All functions here are pure and operate on scalars; vectorized risk
computations live in :mod:`rankabstain.risk`. The tie convention is fixed in
:func:`sign` (ties map to +1) and every downstream indicator routes through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

HINGE = "hinge"
EXPONENTIAL = "exponential"
SIGMOID = "sigmoid"
PHI_KINDS = (HINGE, EXPONENTIAL, SIGMOID)

# exp(t) overflows double precision just above t = 709
_EXP_SATURATION = 700.0


class SaturationError(ArithmeticError):
    """Raised when an exponential margin term would overflow.

    Margins are bounded by construction (norm-constrained scorers on the unit
    ball), so saturation signals a constraint violation upstream and is never
    silently clamped.
    """


@dataclass(frozen=True)
class PhiSpec:
    """Auxiliary margin function: hinge, exponential, or sigmoid with slope k."""

    kind: str
    k: float = 1.0

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown phi kind {self.kind!r}; expected one of {PHI_KINDS}")
        if self.kind == SIGMOID and not self.k > 0:
            raise ValueError(f"sigmoid slope k must be positive, got {self.k}")


@dataclass(frozen=True)
class AbstentionConfig:
    """Abstention threshold gamma, abstention cost, and the norm exponent p."""

    gamma: float
    cost: float
    p: float = 2.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not 0.0 <= self.cost <= 1.0:
            raise ValueError(f"cost must lie in [0, 1], got {self.cost}")
        if self.p not in (1.0, 2.0, math.inf):
            raise ValueError(f"norm exponent p must be 1, 2 or inf, got {self.p}")


@dataclass(frozen=True)
class ScoredPair:
    """Scores of the two pair members and their distance ||x - x'||_p."""

    hx: float
    hxp: float
    dist: float

    def __post_init__(self):
        if self.dist < 0:
            raise ValueError(f"distance must be non-negative, got {self.dist}")


def sign(u: float) -> int:
    """Sign with ties mapped to +1: returns +1 iff u >= 0, else -1."""
    if not math.isfinite(u):
        raise ValueError(f"sign requires a finite argument, got {u}")
    return 1 if u >= 0 else -1


def misranking_loss(sp: ScoredPair, y: int) -> int:
    """0-1 misranking loss: 1 iff y disagrees with sign(h(x') - h(x))."""
    _check_label(y)
    return int(y != sign(sp.hxp - sp.hx))


def abstention_loss(sp: ScoredPair, y: int, cfg: AbstentionConfig) -> float:
    """Pairwise abstention loss: cost on close pairs, misranking loss otherwise.

    The boundary dist == gamma abstains.
    """
    if sp.dist <= cfg.gamma:
        return cfg.cost
    return float(misranking_loss(sp, y))


def phi_eval(phi: PhiSpec, t: float) -> float:
    """Evaluate the auxiliary function Phi at margin t."""
    if not math.isfinite(t):
        raise ValueError(f"phi_eval requires a finite margin, got {t}")
    if phi.kind == HINGE:
        return max(0.0, 1.0 - t)
    if phi.kind == EXPONENTIAL:
        if -t > _EXP_SATURATION:
            raise SaturationError(f"exp(-t) saturates for t = {t}")
        return math.exp(-t)
    return 1.0 - math.tanh(phi.k * t)


def phi_grad(phi: PhiSpec, t: float) -> float:
    """Derivative of Phi at t; the hinge subgradient at the kink t=1 is 0."""
    if not math.isfinite(t):
        raise ValueError(f"phi_grad requires a finite margin, got {t}")
    if phi.kind == HINGE:
        return -1.0 if t < 1.0 else 0.0
    if phi.kind == EXPONENTIAL:
        if -t > _EXP_SATURATION:
            raise SaturationError(f"exp(-t) saturates for t = {t}")
        return -math.exp(-t)
    c = math.cosh(phi.k * t)
    return -phi.k / (c * c)


def surrogate_loss(phi: PhiSpec, sp: ScoredPair, y: int) -> float:
    """Surrogate loss Phi(y * (h(x') - h(x)))."""
    _check_label(y)
    return phi_eval(phi, y * (sp.hxp - sp.hx))


def bipartite_misranking_loss(sp: ScoredPair, y: int, yp: int) -> float:
    """Bipartite misranking loss with half credit on score ties."""
    _check_label(y)
    _check_label(yp)
    if (y - yp) * (sp.hx - sp.hxp) < 0:
        return 1.0
    if sp.hx == sp.hxp and y != yp:
        return 0.5
    return 0.0


def bipartite_abstention_loss(sp: ScoredPair, y: int, yp: int, cfg: AbstentionConfig) -> float:
    """Bipartite abstention loss: cost on close pairs, misranking loss otherwise."""
    if sp.dist <= cfg.gamma:
        return cfg.cost
    return bipartite_misranking_loss(sp, y, yp)


def bipartite_surrogate_loss(phi: PhiSpec, sp: ScoredPair, y: int, yp: int) -> float:
    """Bipartite surrogate Phi((y - y') (h(x) - h(x')) / 2), zero on equal labels."""
    _check_label(y)
    _check_label(yp)
    if y == yp:
        return 0.0
    return phi_eval(phi, (y - yp) * (sp.hx - sp.hxp) / 2.0)


def _check_label(y: int) -> None:
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
