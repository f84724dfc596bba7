"""Monte Carlo engine: simulate the joint lattice dynamics and replay the
insider's and outsider's optimal exercise policies on common paths.

Reproducibility contract: every path draws from its own PCG64 substream
seeded by (master seed, path index), consuming uniforms in a fixed order
(initial regime, switch step, then one per move).  Batch results are
therefore independent of chunking and identical to single-path runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf, log, nan
from typing import Iterable, Mapping, Sequence

import numpy as np

from .filtering import update_belief
from .full_info import FullInfoResult
from .lattice import Lattice, QMatrix, RegimeReturnProbs
from .model import ModelParams
from .partial_info import PartialInfoResult

RNG_NAME = "numpy PCG64 (default_rng), substream key (seed, path_index)"

_UNIFORMS_PER_PATH_OVERHEAD = 2  # initial-regime draw + switch-step draw


@dataclass(frozen=True)
class SimPath:
    seed: object  # whatever seeded this path's substream
    lattice: Lattice
    ups: np.ndarray  # (N,) booleans, True = up move
    stock: np.ndarray  # (N+1,) node prices along the path
    regime: np.ndarray  # (N+1,) 0/1, non-decreasing
    switch_step: int | None  # first step in regime 1; None if never
    beliefs: dict[float, np.ndarray]  # filtered path per initial belief

    @property
    def n_steps(self) -> int:
        return self.lattice.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.lattice.h * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class ExerciseOutcome:
    agent: str
    exercise_step: int | None
    exercise_price: float  # nan when never exercised
    payoff: float  # discounted to time zero


def _switch_step_from_uniform(u: float | np.ndarray, q00: float):
    """First step index in regime 1, sampled by inverting the geometric law."""
    if q00 >= 1.0:
        return np.full_like(np.asarray(u, dtype=float), inf)
    with np.errstate(divide="ignore"):
        ratio = np.log(u) / log(q00)
    return np.floor(ratio) + 1.0


def simulate_joint_path(
    params: ModelParams,
    lattice: Lattice,
    q: QMatrix,
    p: RegimeReturnProbs,
    seed,
    belief_starts: Sequence[float] = (0.0, 0.5),
) -> SimPath:
    """One path of (stock, regime) plus the outsider's filtered beliefs.

    The move over a step is drawn with the probability of the regime
    prevailing at the end of that step.
    """
    n = lattice.n_steps
    rng = np.random.default_rng(seed)
    draws = rng.random(n + _UNIFORMS_PER_PATH_OVERHEAD)

    if draws[0] < params.y0:
        switch = 0
    elif params.lam == 0.0:
        switch = None
    else:
        m = _switch_step_from_uniform(draws[1], q.q00)
        switch = int(m) if m <= n else None

    regime = np.zeros(n + 1, dtype=np.int8)
    if switch is not None:
        regime[switch:] = 1

    move_draws = draws[_UNIFORMS_PER_PATH_OVERHEAD:]
    p_up_step = np.where(regime[1:] == 1, p.p_up1, p.p_up0)
    ups = move_draws < p_up_step

    j = np.concatenate(([0], np.cumsum(ups)))
    k = np.arange(n + 1)
    stock = lattice.spot * lattice.up ** (2.0 * j - k)

    beliefs: dict[float, np.ndarray] = {}
    for y0 in belief_starts:
        path = np.empty(n + 1)
        path[0] = y0
        y = y0
        for step in range(n):
            y = update_belief(y, "up" if ups[step] else "dw", q, p)
            path[step + 1] = y
        beliefs[y0] = path

    return SimPath(
        seed=seed,
        lattice=lattice,
        ups=ups,
        stock=stock,
        regime=regime,
        switch_step=switch,
        beliefs=beliefs,
    )


def _check_same_lattice(a: Lattice, b: Lattice, what: str) -> None:
    if a.n_steps != b.n_steps or a.up != b.up or a.spot != b.spot:
        raise ValueError(f"lattice mismatch between simulated path and {what}")


def surface_threshold(surface_row: np.ndarray, result: PartialInfoResult, y) -> np.ndarray:
    """Exercise threshold at arbitrary beliefs, linear between belief layers.

    An infinite threshold on either side of a genuine bracket makes the whole
    cell uncrossable (no interpolation across an infinite layer).
    """
    lo, hi, w = result.grid.locate(y)
    s_lo, s_hi = surface_row[lo], surface_row[hi]
    finite = np.isfinite(s_lo) & np.isfinite(s_hi)
    interp = np.where(finite, s_lo, 0.0) * (1.0 - w) + np.where(finite, s_hi, 0.0) * w
    return np.where(w == 0.0, s_lo, np.where(finite, interp, inf))


def replay_policies(
    path: SimPath,
    full_result: FullInfoResult,
    partial_results: Mapping[float, PartialInfoResult],
) -> list[ExerciseOutcome]:
    """Exercise both agents' optimal policies along one simulated path.

    The insider stops the first time the stock crosses the boundary of the
    regime they currently observe; each outsider variant stops at the first
    crossing of the surface threshold interpolated at her current belief.
    """
    _check_same_lattice(path.lattice, full_result.lattice, "full-information pricing")
    params = full_result.params
    h = path.lattice.h
    n = path.n_steps

    def outcome(agent: str, step: int | None) -> ExerciseOutcome:
        if step is None:
            return ExerciseOutcome(agent=agent, exercise_step=None, exercise_price=nan, payoff=0.0)
        x = float(path.stock[step])
        payoff = exp(-params.r * step * h) * max(x - params.strike, 0.0)
        return ExerciseOutcome(agent=agent, exercise_step=step, exercise_price=x, payoff=payoff)

    outcomes: list[ExerciseOutcome] = []

    b0, b1 = full_result.boundary(0), full_result.boundary(1)
    insider_step = None
    for k in range(n + 1):
        threshold = b1[k] if path.regime[k] == 1 else b0[k]
        if path.stock[k] >= threshold:
            insider_step = k
            break
    outcomes.append(outcome("insider", insider_step))

    for y0, partial in partial_results.items():
        _check_same_lattice(path.lattice, partial.lattice, f"partial pricing (y0={y0:g})")
        if partial.surface is None:
            raise ValueError("partial result has no retained exercise surface")
        beliefs = path.beliefs[y0]
        step = None
        for k in range(n + 1):
            threshold = float(surface_threshold(partial.surface[k], partial, beliefs[k]))
            if path.stock[k] >= threshold:
                step = k
                break
        outcomes.append(outcome(f"outsider(y0={y0:g})", step))

    return outcomes


@dataclass(frozen=True)
class AgentOutcomes:
    """Vectorised outcomes of one agent over a batch of common paths."""

    agent: str
    exercise_step: np.ndarray  # (M,) int64, -1 where never exercised
    exercise_price: np.ndarray  # (M,) float, nan where never exercised
    payoff: np.ndarray  # (M,) discounted payoff


def replay_batch(
    full_result: FullInfoResult,
    partial_result: PartialInfoResult,
    n_paths: int,
    master_seed: int,
    belief_starts: Sequence[float] = (0.0, 0.5),
    chunk_size: int | None = None,
) -> dict[str, AgentOutcomes]:
    """Simulate n_paths with common random numbers and replay every policy.

    Path i draws from substream (master_seed, i); results do not depend on
    chunk_size.  All outsider variants share one exercise surface (the value
    surface does not depend on the initial belief) but carry their own
    filtered belief paths.
    """
    _check_same_lattice(full_result.lattice, partial_result.lattice, "partial pricing")
    if partial_result.surface is None:
        raise ValueError("partial result has no retained exercise surface")
    params = full_result.params
    lattice, q, p = full_result.lattice, full_result.q, full_result.p
    n = lattice.n_steps
    if chunk_size is None:
        chunk_size = max(256, min(20_000, 12_500_000 // max(n, 1)))

    agents = ["insider"] + [f"outsider(y0={y0:g})" for y0 in belief_starts]
    steps = {a: np.full(n_paths, -1, dtype=np.int64) for a in agents}
    prices = {a: np.full(n_paths, nan) for a in agents}

    b0, b1 = full_result.boundary(0), full_result.boundary(1)
    surface = partial_result.surface
    disc_factors = np.exp(-params.r * lattice.h * np.arange(n + 1))

    for lo in range(0, n_paths, chunk_size):
        hi = min(lo + chunk_size, n_paths)
        m = hi - lo
        draws = np.empty((m, n + _UNIFORMS_PER_PATH_OVERHEAD))
        for i in range(m):
            draws[i] = np.random.default_rng((master_seed, lo + i)).random(
                n + _UNIFORMS_PER_PATH_OVERHEAD
            )

        pre_switched = draws[:, 0] < params.y0
        if params.lam == 0.0:
            switch = np.where(pre_switched, 0.0, inf)
        else:
            switch = np.where(pre_switched, 0.0, _switch_step_from_uniform(draws[:, 1], q.q00))

        j = np.zeros(m, dtype=np.int64)
        beliefs = {y0: np.full(m, float(y0)) for y0 in belief_starts}
        done = {a: np.zeros(m, dtype=bool) for a in agents}

        for k in range(n + 1):
            stock = lattice.spot * lattice.up ** (2.0 * j - k)
            regime1 = switch <= k

            thr = np.where(regime1, b1[k], b0[k])
            _record_crossings("insider", stock, thr, k, lo, done, steps, prices)

            for y0 in belief_starts:
                agent = f"outsider(y0={y0:g})"
                thr = surface_threshold(surface[k], partial_result, beliefs[y0])
                _record_crossings(agent, stock, thr, k, lo, done, steps, prices)

            if k == n:
                break
            up = draws[:, k + _UNIFORMS_PER_PATH_OVERHEAD] < np.where(
                switch <= k + 1, p.p_up1, p.p_up0
            )
            j += up
            for y0 in belief_starts:
                y = beliefs[y0]
                beliefs[y0] = np.where(
                    up, update_belief(y, "up", q, p), update_belief(y, "dw", q, p)
                )

    payoffs = {}
    for a in agents:
        s = steps[a]
        exercised = s >= 0
        pay = np.zeros(n_paths)
        pay[exercised] = disc_factors[s[exercised]] * np.maximum(
            prices[a][exercised] - params.strike, 0.0
        )
        payoffs[a] = pay

    return {
        a: AgentOutcomes(agent=a, exercise_step=steps[a], exercise_price=prices[a], payoff=payoffs[a])
        for a in agents
    }


def _record_crossings(agent, stock, threshold, k, offset, done, steps, prices) -> None:
    newly = ~done[agent] & (stock >= threshold)
    if newly.any():
        idx = np.nonzero(newly)[0]
        steps[agent][offset + idx] = k
        prices[agent][offset + idx] = stock[idx]
        done[agent][idx] = True


@dataclass(frozen=True)
class AgentStats:
    agent: str
    n_paths: int
    mean_payoff: float
    std_payoff: float
    se_payoff: float
    exercise_frequency: float
    mean_exercise_time: float  # years over exercised paths; nan if none


@dataclass(frozen=True)
class PairStats:
    first: str
    second: str
    mean_diff: float  # mean(first - second) on common paths
    se_diff: float


@dataclass(frozen=True)
class SummaryTable:
    agents: list[AgentStats]
    pairs: list[PairStats]

    def as_text(self) -> str:
        lines = [
            f"{'agent':<20} {'paths':>8} {'mean':>12} {'stdev':>12} {'stderr':>10} "
            f"{'ex.freq':>8} {'mean t*':>9}"
        ]
        for a in self.agents:
            lines.append(
                f"{a.agent:<20} {a.n_paths:>8d} {a.mean_payoff:>12.6f} {a.std_payoff:>12.6f} "
                f"{a.se_payoff:>10.6f} {a.exercise_frequency:>8.4f} {a.mean_exercise_time:>9.4f}"
            )
        for d in self.pairs:
            lines.append(
                f"{d.first} - {d.second}: mean diff {d.mean_diff:.6f} (se {d.se_diff:.6f})"
            )
        return "\n".join(lines)


def _stats_from_arrays(outcomes: AgentOutcomes, h: float) -> AgentStats:
    pay = outcomes.payoff
    m = pay.size
    mean = float(np.mean(pay))
    std = float(np.std(pay, ddof=1)) if m > 1 else 0.0
    exercised = outcomes.exercise_step >= 0
    freq = float(np.mean(exercised))
    mean_time = float(h * np.mean(outcomes.exercise_step[exercised])) if exercised.any() else nan
    return AgentStats(
        agent=outcomes.agent,
        n_paths=m,
        mean_payoff=mean,
        std_payoff=std,
        se_payoff=std / m**0.5 if m > 1 else 0.0,
        exercise_frequency=freq,
        mean_exercise_time=mean_time,
    )


def aggregate_stats(
    outcomes: Mapping[str, AgentOutcomes] | Iterable[Sequence[ExerciseOutcome]],
    h: float,
) -> SummaryTable:
    """Summarise per-agent payoffs and insider-vs-outsider differences.

    Accepts either the vectorised batch output or per-path lists of
    ExerciseOutcome (each path must report every agent, in the same order).
    """
    if not isinstance(outcomes, Mapping):
        by_agent: dict[str, list[ExerciseOutcome]] = {}
        for per_path in outcomes:
            for o in per_path:
                by_agent.setdefault(o.agent, []).append(o)
        counts = {len(v) for v in by_agent.values()}
        if len(counts) > 1:
            raise ValueError("every path must report an outcome for every agent")
        outcomes = {
            agent: AgentOutcomes(
                agent=agent,
                exercise_step=np.array(
                    [-1 if o.exercise_step is None else o.exercise_step for o in rows], dtype=np.int64
                ),
                exercise_price=np.array([o.exercise_price for o in rows]),
                payoff=np.array([o.payoff for o in rows]),
            )
            for agent, rows in by_agent.items()
        }

    agents = [_stats_from_arrays(o, h) for o in outcomes.values()]
    pairs = []
    insider = outcomes.get("insider")
    if insider is not None:
        for name, other in outcomes.items():
            if name == "insider":
                continue
            diff = insider.payoff - other.payoff
            m = diff.size
            se = float(np.std(diff, ddof=1) / m**0.5) if m > 1 else 0.0
            pairs.append(
                PairStats(first="insider", second=name, mean_diff=float(np.mean(diff)), se_diff=se)
            )
    return SummaryTable(agents=agents, pairs=pairs)


def simulate_batch(
    params: ModelParams,
    lattice: Lattice,
    q: QMatrix,
    p: RegimeReturnProbs,
    n_paths: int,
    master_seed: int,
    belief_starts: Sequence[float] = (0.0, 0.5),
) -> list[SimPath]:
    """Materialise individual paths (for export); heavy for large batches."""
    return [
        simulate_joint_path(params, lattice, q, p, (master_seed, i), belief_starts)
        for i in range(n_paths)
    ]
