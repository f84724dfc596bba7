"""Belief filtering for the hidden drift regime.

Discrete side: the two-step filter on the binomial tree (predict the next
return, then update the regime probability by Bayes' rule) plus the
equidistant belief grid used by the partial-information pricer.

Continuous side: an Euler integrator for the filtered-probability diffusion
    dY = lam*(1 - Y) dt - eta*Y*(1 - Y) dW
and a quadrature evaluation of the likelihood-ratio representation
    Phi_t = exp(lam*t) * Lam_t * (phi0 + lam * int_0^t exp(-lam*s)/Lam_s ds),
with Lam the stochastic exponential of -eta*W*.  These exist to cross-check
the discrete filter's continuous-time limit, not to price anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import QMatrix, RegimeReturnProbs
from .model import ModelParams

# A posterior that lands within this fraction of a grid cell of a grid point
# is snapped to it (bracket collapses, weight 0).
_EXACT_HIT_TOL = 1e-9


def _move_probs(q: QMatrix, p: RegimeReturnProbs, move: str) -> tuple[float, float]:
    if move == "up":
        return p.p_up0, p.p_up1
    if move == "dw":
        return p.p_dw0, p.p_dw1
    raise ValueError(f"move must be 'up' or 'dw', got {move!r}")


def predict_return_prob(y, q: QMatrix, p: RegimeReturnProbs, move: str):
    """Probability of the given move over the next step, at belief y.

    Accepts a scalar or ndarray belief; returns the same shape.
    """
    p0, p1 = _move_probs(q, p, move)
    y = np.asarray(y)
    out = p0 * (q.q00 * (1.0 - y) + q.q10 * y) + p1 * (q.q01 * (1.0 - y) + q.q11 * y)
    return out if out.ndim else float(out)


def update_belief(y, move: str, q: QMatrix, p: RegimeReturnProbs):
    """Posterior regime-1 probability after observing the given move.

    Bayes update with the one-step-ahead prior; y = 1 is a fixed point.
    Accepts a scalar or ndarray belief; returns the same shape.
    """
    p0, p1 = _move_probs(q, p, move)
    y = np.asarray(y)
    favour = p1 * (q.q01 * (1.0 - y) + q.q11 * y)
    denom = p0 * (q.q00 * (1.0 - y) + q.q10 * y) + favour
    if np.any(denom <= 0.0):
        raise ValueError("predicted move probability vanished; inputs are inadmissible")
    out = favour / denom
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FilterGrid:
    """Equidistant belief grid with precomputed posterior targets and brackets.

    For each grid belief and each move, ``y_up``/``y_dw`` hold the Bayes
    posterior, ``*_lo``/``*_hi`` the indices of the bracketing grid points
    (equal on an exact hit) and ``w_*`` the linear interpolation weight toward
    the hi point.  Built once per pricing run.
    """

    points: np.ndarray  # (L,) beliefs, 0 = points[0] < ... < points[-1] = 1
    y_up: np.ndarray
    y_dw: np.ndarray
    up_lo: np.ndarray
    up_hi: np.ndarray
    w_up: np.ndarray
    dw_lo: np.ndarray
    dw_hi: np.ndarray
    w_dw: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.size

    def locate(self, y):
        """Bracket arbitrary beliefs on the grid: returns (lo, hi, weight)."""
        return _bracket(np.asarray(y, dtype=float), self.n_points)

    def interpolate(self, layer_values: np.ndarray, y):
        """Linear interpolation of per-layer values at arbitrary beliefs."""
        lo, hi, w = self.locate(y)
        return layer_values[lo] * (1.0 - w) + layer_values[hi] * w


def _bracket(y: np.ndarray, n_points: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = y * (n_points - 1)
    nearest = np.rint(pos)
    exact = np.abs(pos - nearest) <= _EXACT_HIT_TOL
    lo = np.where(exact, nearest, np.floor(pos))
    lo = np.clip(lo, 0, n_points - 1).astype(np.int64)
    hi = np.where(exact, lo, np.minimum(lo + 1, n_points - 1))
    w = np.clip(np.where(exact, 0.0, pos - lo), 0.0, 1.0)
    return lo, hi, w


def build_grid(n_points: int, q: QMatrix, p: RegimeReturnProbs) -> FilterGrid:
    if n_points < 2:
        raise ValueError(f"belief grid needs at least 2 points, got {n_points}")
    points = np.linspace(0.0, 1.0, n_points)
    y_up = np.asarray(update_belief(points, "up", q, p))
    y_dw = np.asarray(update_belief(points, "dw", q, p))
    up_lo, up_hi, w_up = _bracket(y_up, n_points)
    dw_lo, dw_hi, w_dw = _bracket(y_dw, n_points)
    return FilterGrid(
        points=points,
        y_up=y_up,
        y_dw=y_dw,
        up_lo=up_lo,
        up_hi=up_hi,
        w_up=w_up,
        dw_lo=dw_lo,
        dw_hi=dw_hi,
        w_dw=w_dw,
    )


def simulate_continuous_filter(params: ModelParams, increments: np.ndarray, dt: float) -> np.ndarray:
    """Euler-Maruyama path of the filtered-probability diffusion.

    ``increments`` are Brownian increments over steps of length dt.  Each step
    is clamped back into [0, 1]; the continuous dynamics stay inside, the
    discretisation can overshoot.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    eta = params.derived.eta
    path = np.empty(len(increments) + 1)
    path[0] = params.y0
    y = params.y0
    for i, dw in enumerate(increments):
        y = y + params.lam * (1.0 - y) * dt - eta * y * (1.0 - y) * dw
        y = min(max(y, 0.0), 1.0)
        path[i + 1] = y
    return path


@dataclass(frozen=True)
class LikelihoodRatioPath:
    times: np.ndarray
    phi: np.ndarray  # likelihood ratio y/(1-y) along the path; >= 0


def likelihood_ratio_quadrature(
    params: ModelParams, increments: np.ndarray, dt: float
) -> LikelihoodRatioPath:
    """Likelihood ratio along a driving path, via its closed-form representation.

    ``increments`` drive W* (the de-drifted Brownian motion under the measure
    that decouples the ratio from the stock).  The time integral is evaluated
    with the trapezoidal rule on the simulation grid, matching the order of an
    Euler benchmark.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if params.y0 >= 1.0:
        raise ValueError("y0 = 1 gives an infinite initial likelihood ratio")
    eta = params.derived.eta
    lam = params.lam
    phi0 = params.y0 / (1.0 - params.y0)

    n = len(increments)
    times = dt * np.arange(n + 1)
    wstar = np.concatenate(([0.0], np.cumsum(increments)))
    log_lam_exp = -eta * wstar - 0.5 * eta * eta * times
    lam_exp = np.exp(log_lam_exp)  # stochastic exponential of -eta*W*

    integrand = np.exp(-lam * times) / lam_exp
    integral = np.empty(n + 1)
    integral[0] = 0.0
    np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), out=integral[1:])

    phi = np.exp(lam * times) * lam_exp * (phi0 + lam * integral)
    return LikelihoodRatioPath(times=times, phi=phi)
