"""CRR stock lattice and the regime-switching transition structure.

The stock moves on a recombining binomial tree with up factor exp(sigma*sqrt(h))
and reciprocal down factor.  The drift regime follows a two-state chain with a
single absorbing switch; the move probability within a step is conditioned on
the regime prevailing at the *end* of that step.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

import numpy as np

from .model import ModelParams, Regime


class AdmissibilityError(ValueError):
    """Raised when a regime's one-step return probability leaves (0, 1)."""


@dataclass(frozen=True)
class Lattice:
    n_steps: int  # N >= 1
    h: float  # step length, maturity / n_steps (years)
    up: float  # exp(sigma*sqrt(h))
    dw: float  # 1/up
    spot: float

    def price(self, k: int, j: int) -> float:
        """Stock price at step k after j up-moves, spot * up**(2j - k)."""
        return self.spot * self.up ** (2 * j - k)

    def level_prices(self, k: int) -> np.ndarray:
        """All node prices at step k, ascending in j."""
        return self.spot * self.up ** (2.0 * np.arange(k + 1) - k)


@dataclass(frozen=True)
class QMatrix:
    """One-step regime transition probabilities; state 1 is absorbing."""

    q00: float
    q01: float
    q10: float
    q11: float

    def row(self, i: int) -> tuple[float, float]:
        return (self.q00, self.q01) if i == 0 else (self.q10, self.q11)


@dataclass(frozen=True)
class RegimeReturnProbs:
    """Up/down move probabilities conditional on the prevailing regime."""

    p_up0: float
    p_dw0: float
    p_up1: float
    p_dw1: float
    literal_exponent: bool = False  # True: growth exponent mu*sqrt(h) instead of mu*h

    def up_prob(self, regime: int) -> float:
        return self.p_up0 if regime == 0 else self.p_up1


def build_lattice(params: ModelParams, n_steps: int) -> Lattice:
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    h = params.maturity / n_steps
    up = exp(params.sigma * sqrt(h))
    return Lattice(n_steps=n_steps, h=h, up=up, dw=1.0 / up, spot=params.spot)


def transition_matrix(lam: float, h: float) -> QMatrix:
    if lam < 0.0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    if h <= 0.0:
        raise ValueError(f"step length must be positive, got {h}")
    q00 = exp(-lam * h)
    return QMatrix(q00=q00, q01=1.0 - q00, q10=0.0, q11=1.0)


def _up_probability(mu: float, sigma: float, h: float, literal_exponent: bool) -> float:
    grow = exp(mu * sqrt(h)) if literal_exponent else exp(mu * h)
    up = exp(sigma * sqrt(h))
    dw = 1.0 / up
    return (grow - dw) / (up - dw)


def _max_admissible_h(mu: float, sigma: float, literal_exponent: bool) -> float:
    # Default exponent mu*h:  |mu|*h < sigma*sqrt(h)  <=>  h < (sigma/|mu|)^2.
    # Literal exponent mu*sqrt(h): admissible iff |mu| < sigma, for every h.
    if mu == 0.0:
        return float("inf")
    if literal_exponent:
        return float("inf") if abs(mu) < sigma else 0.0
    return (sigma / abs(mu)) ** 2


def regime_return_probs(
    params: ModelParams, lattice: Lattice, literal_exponent: bool = False
) -> RegimeReturnProbs:
    """Per-regime move probabilities on the lattice.

    By default the one-step growth factor is exp(mu_i*h), which matches the
    one-step expected simple return of the continuous dynamics exactly.  With
    ``literal_exponent`` the growth factor is exp(mu_i*sqrt(h)) instead.
    """
    probs = []
    for regime, mu in ((0, params.mu0), (1, params.mu1)):
        p = _up_probability(mu, params.sigma, lattice.h, literal_exponent)
        if not 0.0 < p < 1.0:
            h_max = _max_admissible_h(mu, params.sigma, literal_exponent)
            raise AdmissibilityError(
                f"up-probability {p:.6g} for regime {regime} (mu={mu}) lies outside "
                f"(0, 1) at h={lattice.h:.6g}; largest admissible h is {h_max:.6g}"
            )
        probs.append(p)
    return RegimeReturnProbs(
        p_up0=probs[0],
        p_dw0=1.0 - probs[0],
        p_up1=probs[1],
        p_dw1=1.0 - probs[1],
        literal_exponent=literal_exponent,
    )


def joint_full_info_transitions(
    q: QMatrix, p: RegimeReturnProbs, from_regime: int | Regime
) -> list[tuple[str, Regime, float]]:
    """One-step law of (move, next regime) given the current regime.

    Returns four (move, regime, probability) triples; probabilities sum to 1.
    """
    qi0, qi1 = q.row(int(from_regime))
    return [
        ("up", Regime.HIGH, p.p_up0 * qi0),
        ("dw", Regime.HIGH, p.p_dw0 * qi0),
        ("up", Regime.LOW, p.p_up1 * qi1),
        ("dw", Regime.LOW, p.p_dw1 * qi1),
    ]
