"""Full-information pricer: the insider observes the drift regime directly.

Backward induction runs jointly over two value trees, one per regime, coupled
through the switching chain.  Exercise boundaries are read off slice by slice
as the smallest in-the-money node price where stopping beats continuing.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf

import numpy as np

from .lattice import Lattice, QMatrix, RegimeReturnProbs, build_lattice, regime_return_probs, transition_matrix
from .model import ModelParams

# A node counts as exercised when intrinsic >= continuation - TIE_TOL*max(1, intrinsic),
# so boundary extraction is deterministic under floating-point ties.
EXERCISE_TIE_TOL = 1e-12


def first_exercise_prices(
    prices: np.ndarray, strike: float, intrinsic: np.ndarray, continuation: np.ndarray
) -> np.ndarray | float:
    """Smallest in-the-money node price where intrinsic >= continuation.

    ``continuation`` may be (n_nodes,) for a single slice or (m, n_nodes) for
    m independent slices; returns a float or an (m,) array, +inf where no node
    exercises.
    """
    exercised = (prices > strike) & (intrinsic >= continuation - EXERCISE_TIE_TOL * np.maximum(1.0, intrinsic))
    if continuation.ndim == 1:
        return float(prices[np.argmax(exercised)]) if exercised.any() else inf
    first = np.argmax(exercised, axis=1)
    return np.where(exercised.any(axis=1), prices[first], inf)


@dataclass(frozen=True)
class FullInfoResult:
    v0_root: float  # value at the root in the high-drift regime
    v1_root: float  # value at the root in the low-drift (absorbing) regime
    boundary0: np.ndarray | None  # (N+1,) exercise threshold per step, +inf allowed
    boundary1: np.ndarray | None
    params: ModelParams
    lattice: Lattice
    q: QMatrix
    p: RegimeReturnProbs
    slices0: list[np.ndarray] | None = None  # per-step value arrays, kept on request
    slices1: list[np.ndarray] | None = None

    def root(self, regime: int) -> float:
        return self.v0_root if regime == 0 else self.v1_root

    def boundary(self, regime: int) -> np.ndarray:
        b = self.boundary0 if regime == 0 else self.boundary1
        if b is None:
            raise ValueError("boundaries were not retained for this run")
        return b


def price_full(
    params: ModelParams,
    n_steps: int,
    literal_exponent: bool = False,
    keep_boundaries: bool = True,
    keep_slices: bool = False,
) -> FullInfoResult:
    """Value the option under full information on an N-step lattice.

    v(k, x, i) = max{(x-K)+, disc * sum_j q_ij [p_up,j v(k+1, x*up, j)
                                               + p_dw,j v(k+1, x*dw, j)]},
    terminal value (x-K)+, both regime trees swept together.
    """
    lattice = build_lattice(params, n_steps)
    q = transition_matrix(params.lam, lattice.h)
    p = regime_return_probs(params, lattice, literal_exponent)
    disc = exp(-params.r * lattice.h)
    strike = params.strike

    prices = lattice.level_prices(n_steps)
    v0 = np.maximum(prices - strike, 0.0)
    v1 = v0.copy()

    boundary0 = np.full(n_steps + 1, inf) if keep_boundaries else None
    boundary1 = np.full(n_steps + 1, inf) if keep_boundaries else None
    if keep_boundaries:
        boundary0[n_steps] = strike
        boundary1[n_steps] = strike
    slices0 = [v0] if keep_slices else None
    slices1 = [v1] if keep_slices else None

    for k in range(n_steps - 1, -1, -1):
        prices = lattice.level_prices(k)
        intrinsic = np.maximum(prices - strike, 0.0)
        cont1 = disc * (p.p_up1 * v1[1:] + p.p_dw1 * v1[:-1])
        cont0 = disc * (
            q.q00 * (p.p_up0 * v0[1:] + p.p_dw0 * v0[:-1])
            + q.q01 * (p.p_up1 * v1[1:] + p.p_dw1 * v1[:-1])
        )
        if keep_boundaries:
            boundary0[k] = first_exercise_prices(prices, strike, intrinsic, cont0)
            boundary1[k] = first_exercise_prices(prices, strike, intrinsic, cont1)
        v0 = np.maximum(intrinsic, cont0)
        v1 = np.maximum(intrinsic, cont1)
        if keep_slices:
            slices0.insert(0, v0)
            slices1.insert(0, v1)

    return FullInfoResult(
        v0_root=float(v0[0]),
        v1_root=float(v1[0]),
        boundary0=boundary0,
        boundary1=boundary1,
        params=params,
        lattice=lattice,
        q=q,
        p=p,
        slices0=slices0,
        slices1=slices1,
    )


def price_european_reference(
    params: ModelParams,
    n_steps: int,
    regime: int | None = None,
    y0: float | None = None,
    literal_exponent: bool = False,
) -> float:
    """Discounted expectation of the terminal payoff on the same lattice.

    Start either from a known regime or from a belief y0 (a y0 start is the
    regime mixture: the terminal payoff law is linear in the prior).  Serves
    as the no-early-exercise reference and as an American lower bound.
    """
    if (regime is None) == (y0 is None):
        raise ValueError("specify exactly one of regime or y0")
    lattice = build_lattice(params, n_steps)
    q = transition_matrix(params.lam, lattice.h)
    p = regime_return_probs(params, lattice, literal_exponent)
    disc = exp(-params.r * lattice.h)

    v0 = np.maximum(lattice.level_prices(n_steps) - params.strike, 0.0)
    v1 = v0.copy()
    for _ in range(n_steps):
        up1 = p.p_up1 * v1[1:] + p.p_dw1 * v1[:-1]
        v0 = disc * (q.q00 * (p.p_up0 * v0[1:] + p.p_dw0 * v0[:-1]) + q.q01 * up1)
        v1 = disc * up1
    if regime is not None:
        return float(v0[0]) if regime == 0 else float(v1[0])
    return float((1.0 - y0) * v0[0] + y0 * v1[0])


def extract_boundary(result: FullInfoResult, regime: int) -> np.ndarray:
    """Boundary sequence recomputed from retained value slices.

    Continuations are rebuilt one step ahead from the slices, so the output
    agrees with the boundaries extracted during the sweep itself.
    """
    if result.slices0 is None or result.slices1 is None:
        raise ValueError("value slices were not retained for this run")
    lattice, q, p = result.lattice, result.q, result.p
    strike = result.params.strike
    disc = exp(-result.params.r * lattice.h)

    boundary = np.full(lattice.n_steps + 1, inf)
    boundary[lattice.n_steps] = strike
    for k in range(lattice.n_steps):
        v0, v1 = result.slices0[k + 1], result.slices1[k + 1]
        if regime == 1:
            cont = disc * (p.p_up1 * v1[1:] + p.p_dw1 * v1[:-1])
        else:
            cont = disc * (
                q.q00 * (p.p_up0 * v0[1:] + p.p_dw0 * v0[:-1])
                + q.q01 * (p.p_up1 * v1[1:] + p.p_dw1 * v1[:-1])
            )
        prices = lattice.level_prices(k)
        intrinsic = np.maximum(prices - strike, 0.0)
        boundary[k] = first_exercise_prices(prices, strike, intrinsic, cont)
    return boundary
