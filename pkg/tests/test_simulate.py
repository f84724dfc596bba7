from dataclasses import replace
from math import exp

import numpy as np
import pytest

from esocp import (
    build_lattice,
    price_full,
    price_partial,
    regime_return_probs,
    replay_policies,
    simulate_joint_path,
    transition_matrix,
    update_belief,
)
from esocp.simulate import (
    SimPath,
    _switch_step_from_uniform,
    aggregate_stats,
    replay_batch,
    simulate_batch,
)

from conftest import BASE

N = 250


@pytest.fixture(scope="module")
def machinery():
    lat = build_lattice(BASE, N)
    q = transition_matrix(BASE.lam, lat.h)
    p = regime_return_probs(BASE, lat)
    return lat, q, p


@pytest.fixture(scope="module")
def priced():
    full = price_full(BASE, N)
    partial = price_partial(BASE, N, 51, keep_surface=True)
    return full, partial


def test_same_seed_same_path(machinery):
    lat, q, p = machinery
    a = simulate_joint_path(BASE, lat, q, p, (7, 3))
    b = simulate_joint_path(BASE, lat, q, p, (7, 3))
    assert np.array_equal(a.stock, b.stock)
    assert np.array_equal(a.regime, b.regime)
    assert np.array_equal(a.ups, b.ups)
    assert a.switch_step == b.switch_step
    c = simulate_joint_path(BASE, lat, q, p, (7, 4))
    assert not np.array_equal(a.ups, c.ups)


def test_path_internal_consistency(machinery):
    lat, q, p = machinery
    path = simulate_joint_path(BASE, lat, q, p, (11, 0))
    assert np.all(np.diff(path.regime) >= 0)  # single switch
    j = np.concatenate(([0], np.cumsum(path.ups)))
    assert np.array_equal(path.stock, lat.spot * lat.up ** (2.0 * j - np.arange(N + 1)))
    for y0, beliefs in path.beliefs.items():
        y = y0
        for k in range(N):
            y = update_belief(y, "up" if path.ups[k] else "dw", q, p)
            assert beliefs[k + 1] == y  # replayed filter is the filter


def test_no_intensity_never_switches(machinery):
    lat, _, p = machinery
    p0 = replace(BASE, lam=0.0)
    q0 = transition_matrix(0.0, lat.h)
    for seed in range(20):
        path = simulate_joint_path(p0, lat, q0, p, seed)
        assert path.switch_step is None
        assert np.all(path.regime == 0)


def test_switch_step_distribution():
    # inverse-transform sampling must reproduce the geometric law; the case
    # q01 = 1 - exp(-4) corresponds to a very hard switch intensity
    q00 = exp(-4.0)
    u = np.random.default_rng(0).random(100_000)
    m = _switch_step_from_uniform(u, q00)
    p1 = 1.0 - q00
    freq = np.mean(m == 1.0)
    se = np.sqrt(p1 * (1 - p1) / u.size)
    assert abs(freq - p1) < 3 * se
    tail = np.mean(m > 3.0)
    se_tail = np.sqrt(q00**3 * (1 - q00**3) / u.size)
    assert abs(tail - q00**3) < max(3 * se_tail, 1e-4)


def test_move_frequencies_match_regime_probs(machinery):
    lat, q, p = machinery
    ups0 = ups1 = n0 = n1 = 0
    for seed in range(400):
        path = simulate_joint_path(BASE, lat, q, p, (2024, seed), belief_starts=())
        regimes = path.regime[1:]  # move k uses the regime prevailing at k+1
        ups0 += int(np.sum(path.ups[regimes == 0]))
        n0 += int(np.sum(regimes == 0))
        ups1 += int(np.sum(path.ups[regimes == 1]))
        n1 += int(np.sum(regimes == 1))
    assert n0 + n1 == 400 * N and min(n0, n1) > 10_000
    for ups, n, prob in ((ups0, n0, p.p_up0), (ups1, n1, p.p_up1)):
        se = np.sqrt(prob * (1 - prob) / n)
        assert abs(ups / n - prob) < 3 * se


def test_replay_discounts_payoffs_consistently(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    path = simulate_joint_path(BASE, lat, q, p, (5, 1))
    outcomes = replay_policies(path, full, {0.0: partial, 0.5: partial})
    assert [o.agent for o in outcomes] == ["insider", "outsider(y0=0)", "outsider(y0=0.5)"]
    for o in outcomes:
        if o.exercise_step is None:
            assert o.payoff == 0.0 and np.isnan(o.exercise_price)
        else:
            again = exp(-BASE.r * o.exercise_step * lat.h) * max(
                o.exercise_price - BASE.strike, 0.0
            )
            assert abs(o.payoff - again) <= 1e-14 * max(1.0, o.payoff)
            assert o.exercise_price == path.stock[o.exercise_step]


def test_hopeless_option_never_exercised(machinery):
    lat, q, p = machinery
    deep = replace(BASE, strike=1e9)
    full = price_full(deep, N)
    partial = price_partial(deep, N, 21, keep_surface=True)
    path = simulate_joint_path(deep, lat, q, p, (13, 2))
    for o in replay_policies(path, full, {0.0: partial}):
        assert o.exercise_step is None and o.payoff == 0.0


def _crafted_path(lat, q, p, ups, switch_step):
    """Fabricated path with a chosen move sequence and switch step; the stock
    and beliefs stay consistent with the moves (the only thing replay uses)."""
    n = lat.n_steps
    ups = np.asarray(ups, dtype=bool)
    j = np.concatenate(([0], np.cumsum(ups)))
    stock = lat.spot * lat.up ** (2.0 * j - np.arange(n + 1))
    regime = np.zeros(n + 1, dtype=np.int8)
    regime[switch_step:] = 1
    beliefs = {}
    for y0 in (0.0, 1.0):
        ys = np.empty(n + 1)
        ys[0] = y = y0
        for k in range(n):
            y = update_belief(y, "up" if ups[k] else "dw", q, p)
            ys[k + 1] = y
        beliefs[y0] = ys
    return SimPath(seed=None, lattice=lat, ups=ups, stock=stock, regime=regime,
                   switch_step=switch_step, beliefs=beliefs)


def test_insider_exercises_at_the_change_point(machinery, priced):
    # stock climbs late and sits between the two insider thresholds exactly
    # when the switch lands: the change point itself triggers exercise
    lat, q, p = machinery
    full, partial = priced
    b0, b1 = full.boundary(0), full.boundary(1)
    theta = N // 2
    target = None
    for j in range(theta, 0, -1):
        x = lat.spot * lat.up ** (2.0 * j - theta)
        if b1[theta] <= x < b0[theta]:
            target = j
            break
    assert target is not None, "no lattice node sits between the thresholds"
    ups = np.zeros(N, dtype=bool)
    ups[theta - target : theta] = True  # down first, then climb into position
    path = _crafted_path(lat, q, p, ups, theta)
    assert all(path.stock[k] < b0[k] for k in range(theta))
    insider = replay_policies(path, full, {})[0]
    assert insider.exercise_step == theta


def test_certain_outsider_mirrors_switched_insider(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    hits = 0
    for seed in range(6):
        path = simulate_joint_path(
            replace(BASE, y0=1.0 - 1e-12), lat, q, p, (90, seed), belief_starts=(1.0,)
        )
        if path.switch_step != 0:
            continue
        insider, outsider = replay_policies(path, full, {1.0: partial})
        assert insider.exercise_step == outsider.exercise_step
        hits += 1
    assert hits > 0


def test_batch_agrees_with_single_paths(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    batch = replay_batch(full, partial, 32, 321, (0.0, 0.5), chunk_size=10)
    for i in (0, 9, 10, 31):
        path = simulate_joint_path(BASE, lat, q, p, (321, i))
        outcomes = replay_policies(path, full, {0.0: partial, 0.5: partial})
        for o in outcomes:
            arr = batch[o.agent]
            step = None if arr.exercise_step[i] < 0 else int(arr.exercise_step[i])
            assert step == o.exercise_step
            assert arr.payoff[i] == o.payoff


def test_batch_chunking_is_invisible(priced):
    full, partial = priced
    a = replay_batch(full, partial, 50, 77, (0.5,), chunk_size=7)
    b = replay_batch(full, partial, 50, 77, (0.5,), chunk_size=50)
    for agent in a:
        assert np.array_equal(a[agent].payoff, b[agent].payoff)
        assert np.array_equal(a[agent].exercise_step, b[agent].exercise_step)


def test_aggregate_single_path_is_identity(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    path = simulate_joint_path(BASE, lat, q, p, (6, 0))
    outcomes = replay_policies(path, full, {0.0: partial})
    table = aggregate_stats([outcomes], lat.h)
    insider = table.agents[0]
    assert insider.n_paths == 1
    assert insider.mean_payoff == outcomes[0].payoff
    assert insider.se_payoff == 0.0


def test_aggregate_list_and_batch_agree(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    per_path = [
        replay_policies(simulate_joint_path(BASE, lat, q, p, (55, i)), full, {0.0: partial})
        for i in range(40)
    ]
    from_lists = aggregate_stats(per_path, lat.h)
    from_batch = aggregate_stats(replay_batch(full, partial, 40, 55, (0.0,)), lat.h)
    for a, b in zip(from_lists.agents, from_batch.agents):
        assert a.agent == b.agent
        assert a.mean_payoff == pytest.approx(b.mean_payoff, rel=1e-12)
        assert a.exercise_frequency == b.exercise_frequency
    assert from_lists.pairs[0].mean_diff == pytest.approx(
        from_batch.pairs[0].mean_diff, rel=1e-12
    )


def test_insider_not_dominated_with_common_randomness(priced):
    full, partial = priced
    table = aggregate_stats(replay_batch(full, partial, 20_000, 9001, (0.0,)), full.lattice.h)
    diff = table.pairs[0]
    assert diff.mean_diff >= -2.0 * diff.se_diff


def test_lattice_mismatch_rejected(machinery, priced):
    lat, q, p = machinery
    full, partial = priced
    other = build_lattice(BASE, N + 1)
    path = simulate_joint_path(BASE, other, transition_matrix(BASE.lam, other.h),
                               regime_return_probs(BASE, other), 1)
    with pytest.raises(ValueError, match="lattice mismatch"):
        replay_policies(path, full, {0.0: partial})


def test_simulate_batch_materialises_substreams(machinery):
    lat, q, p = machinery
    paths = simulate_batch(BASE, lat, q, p, 3, 4242, (0.0,))
    direct = simulate_joint_path(BASE, lat, q, p, (4242, 2), (0.0,))
    assert np.array_equal(paths[2].stock, direct.stock)
