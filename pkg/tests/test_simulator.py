from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dstprofile.bits import GOLDEN, MASK, ExplicitBits, SplitMixBits, mix64, stream_state
from dstprofile.errors import BitExhausted, DomainError
from dstprofile.simulator import (DstTree, TrialConfig, build_tree, level_samples, profiles,
                                  run_trials, sample_unsuccessful_depth, simulate_tree)
from oracles import enumerate_all, insert_paths, profile_of

FIVE_RECORDS = ["0100", "1011", "1101", "0010", "0111"]


def test_splitmix_reference_vector():
    state = 1234567
    out = []
    for _ in range(3):
        state = (state + GOLDEN) & MASK
        out.append(mix64(state))
    assert out == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_splitmix_bits_are_msb_first():
    src = SplitMixBits(7, 3, 2)
    word = mix64((stream_state(7, 3, 2) + GOLDEN) & MASK)
    assert [src.bit(d) for d in range(64)] == [(word >> (63 - d)) & 1 for d in range(64)]
    src.bit(200)
    assert len(src._words) == 4


def test_explicit_bits():
    b = ExplicitBits("101")
    assert [b.bit(i) for i in range(3)] == [1, 0, 1]
    with pytest.raises(BitExhausted):
        b.bit(3)
    with pytest.raises(ValueError):
        ExplicitBits("012")


def test_five_record_tree():
    tree = build_tree([ExplicitBits(r) for r in FIVE_RECORDS])
    p = profiles(tree)
    assert p.external == (0, 0, 2, 4)
    assert p.internal == (1, 2, 2, 0)
    assert (p.height, p.saturation) == (3, 1)


def test_degenerate_trees():
    assert profiles(DstTree(0)) == profiles(build_tree([]))
    p = profiles(build_tree([]))
    assert (p.external, p.internal, p.height, p.saturation) == ((1,), (0,), 0, -1)
    p = profiles(build_tree([ExplicitBits("")]))
    assert (p.external, p.internal, p.height, p.saturation) == ((0, 2), (1, 0), 1, 0)
    with pytest.raises(DomainError):
        build_tree([ExplicitBits("0")], 2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text("01", min_size=12, max_size=12), max_size=12))
def test_profiles_match_prefix_oracle(records):
    p = profiles(build_tree([ExplicitBits(r) for r in records]))
    ext, inn = profile_of(insert_paths(records))
    assert {k: v for k, v in enumerate(p.external) if v} == ext
    assert {k: v for k, v in enumerate(p.internal) if v} == inn
    assert sum(p.external) == len(records) + 1
    assert sum(p.internal) == len(records)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 50, 300])
def test_kernel_matches_reference(n):
    trials = 20
    ext = np.zeros(n + 3, dtype=object)
    heights, sats, depths = {}, {}, {}
    for t in range(trials):
        tree = simulate_tree(n, 11, t)
        p = profiles(tree)
        for k, b in enumerate(p.external):
            ext[k] += b
        heights[p.height] = heights.get(p.height, 0) + 1
        sats[p.saturation] = sats.get(p.saturation, 0) + 1
        u = sample_unsuccessful_depth(tree, SplitMixBits(11, t, n))
        depths[u] = depths.get(u, 0) + 1
    run = run_trials(TrialConfig(n, trials, 11))
    assert run.ext_sum == [int(v) for v in ext[:run.levels]]
    assert run.height_hist == dict(sorted(heights.items()))
    assert run.sat_hist == dict(sorted(sats.items()))
    assert run.unsucc_hist == dict(sorted(depths.items()))


def test_sharding_does_not_change_results():
    a = run_trials(TrialConfig(40, 3000, 5))
    b = run_trials(TrialConfig(40, 3000, 5), shard=777)
    assert a == b


def test_level_samples_agree_with_accumulators():
    ext, inn = level_samples(30, 6, 500, 9)
    run = run_trials(TrialConfig(30, 500, 9))
    assert int(ext.sum()) == run.ext_sum[6]
    assert int((ext * ext).sum()) == run.ext_sq[6]
    assert int(inn.sum()) == run.int_sum[6]


def test_monte_carlo_matches_exact_distribution():
    n, trials = 6, 40000
    ref = enumerate_all(n)
    run = run_trials(TrialConfig(n, trials, 2024))
    hp = run.pmf("height")
    for h, p in ref["height"].items():
        sd = (float(p) * (1 - float(p)) / trials) ** 0.5
        assert abs(hp.get(h, 0) - float(p)) <= 6 * sd + 1e-12
    for k, m in ref["mu"].items():
        var = float(ref["nu"][k] - m * m)
        assert abs(run.mean_external(k) - float(m)) <= 6 * (var / trials) ** 0.5 + 1e-12
    up = run.pmf("unsuccessful")
    for k, m in ref["mu"].items():
        p = float(m / (n + 1))
        assert abs(up.get(k, 0) - p) <= 6 * (p * (1 - p) / trials) ** 0.5 + 1e-12


def test_variance_is_unbiased_estimate():
    run = run_trials(TrialConfig(3, 20000, 1))
    assert abs(run.var_external(2) - 2.25) < 0.1
    assert run.var_external(99) == 0.0


def test_stat_selection_and_validation():
    run = run_trials(TrialConfig(10, 50, 0, frozenset({"height"})))
    assert run.ext_sum == [] and run.sat_hist == {} and sum(run.height_hist.values()) == 50
    with pytest.raises(DomainError):
        TrialConfig(10, 0)
    with pytest.raises(DomainError):
        TrialConfig(10, 5, 0, frozenset({"width"}))


def test_merge_is_associative_on_counts():
    a = run_trials(TrialConfig(20, 100, 1))
    b = run_trials(TrialConfig(20, 50, 2))
    m = a.merge(b)
    assert m.trials == 150
    assert m.ext_sum[:a.levels] == [x + y for x, y in
                                    zip(a.ext_sum, b.ext_sum + [0] * a.levels)][:a.levels]
    with pytest.raises(DomainError):
        a.merge(run_trials(TrialConfig(21, 10, 1)))
