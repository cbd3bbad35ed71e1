import math

import numpy as np
import pytest

from cpdp.model import (ChainState, Hyperparams, LabelAssignment, Segmentation, TimeSeries,
                        ValidationError, log_beta_k_prior, log_joint_collapsed)
from cpdp.sampler import (ChainSample, MoveProbabilities, SamplerSettings,
                          detect_from_probabilities, initial_state, move_update,
                          posterior_probabilities, propose_birth, propose_death, run_chain,
                          segment_labels, summarize, sweep)

from conftest import empirical, enumerate_posterior, marginal_over_labels, tv_distance


def _lj(x, cps, labels, h):
    return log_joint_collapsed(x, Segmentation(tuple(cps), x.n), LabelAssignment(labels), h)


# ---- move probabilities and settings ----------------------------------------

def test_move_probabilities_policy():
    assert MoveProbabilities.for_k(0, 5) == MoveProbabilities(0.5, 0.0, 0.5)
    assert MoveProbabilities.for_k(5, 5) == MoveProbabilities(0.0, 0.5, 0.5)
    mid = MoveProbabilities.for_k(2, 5)
    assert mid.birth == mid.death == pytest.approx(mid.update)
    with pytest.raises(ValidationError):
        MoveProbabilities(0.5, 0.5, 0.5)


@pytest.mark.parametrize("kw", [dict(burn_in=10, iterations=10), dict(threshold=1.0),
                                dict(window=0), dict(label_update="x"),
                                dict(label_proposal="x")])
def test_settings_validation(kw):
    with pytest.raises(ValidationError):
        SamplerSettings(**kw)


# ---- birth -------------------------------------------------------------------

def test_birth_position_uniform_and_ratio_formula():
    x = TimeSeries([0.1, -0.3, 2.0, 2.2, 1.9])
    h = Hyperparams()
    rng = np.random.default_rng(0)
    state = initial_state(x, h, rng)
    seen = {}
    for _ in range(6000):
        prop, lr = propose_birth(state, x, h, rng, label_proposal="fresh")
        t = prop.seg.change_points[0]
        seen[t] = seen.get(t, 0) + 1
        # q(tau'|tau) = 1/(N-K-2) = 1/3, b(0) = 1/2, d(1) = 1/3 with K_max = 3
        direct = (_lj(x, (t,), (0, 1), h) - _lj(x, (), (0,), h)
                  + math.log(1 / 3) - math.log(0.5 / 3))
        assert lr == pytest.approx(direct, abs=1e-12)
    assert set(seen) == {2, 3, 4}
    for c in seen.values():
        assert abs(c / 6000 - 1 / 3) < 0.03


@pytest.mark.parametrize("mode", ["fresh", "conditional"])
def test_birth_keeps_other_segments(mode):
    rng = np.random.default_rng(1)
    x = TimeSeries(rng.normal(0, 1, 40))
    h = Hyperparams()
    state = initial_state(x, h, rng, change_points=(10, 20, 30), labels=(0, 1, 0, 2))
    for _ in range(200):
        prop, _ = propose_birth(state, x, h, rng, label_proposal=mode)
        t = next(c for c in prop.seg.change_points if c not in state.seg.change_points)
        i = prop.seg.change_points.index(t)
        old = list(range(len(state.labels.labels)))
        new = [j if j < i else j + 1 for j in old]
        for jo, jn in zip(old, new):
            if jo == i:
                continue
            po, pn = state.params, prop.params
            co, cn = state.labels.labels[jo], prop.labels.labels[jn]
            assert po.segment_means[jo] == pn.segment_means[jn]
            # class ids may be renumbered, values may not change
            assert po.class_means[co] == pn.class_means[cn]
            assert po.noise_vars[co] == pn.noise_vars[cn]


def test_birth_of_true_step_is_accepted():
    rng = np.random.default_rng(2)
    x = TimeSeries(np.r_[np.zeros(10), np.full(10, 6.0)] + rng.normal(0, 1, 20))
    h = Hyperparams()
    k_max = h.resolve_k_max(20)
    b0 = MoveProbabilities.for_k(0, k_max).birth
    d1 = MoveProbabilities.for_k(1, k_max).death
    log_r = (_lj(x, (10,), (0, 1), h) - _lj(x, (), (0,), h)
             + math.log(d1 / 1) - math.log(b0 / (20 - 2)))
    assert min(1.0, math.exp(min(log_r, 0.0))) > 0.99


def test_birth_blocked_at_k_max():
    x = TimeSeries(np.arange(6.0))
    h = Hyperparams(k_max=1)
    state = initial_state(x, h, np.random.default_rng(0), change_points=(3,))
    prop, lr = propose_birth(state, x, h, np.random.default_rng(0))
    assert lr == -math.inf and prop is state


# ---- death -------------------------------------------------------------------

def test_death_requires_change_point_and_picks_unique():
    x = TimeSeries(np.arange(8.0))
    h = Hyperparams()
    rng = np.random.default_rng(3)
    with pytest.raises(ValidationError):
        propose_death(initial_state(x, h, rng), x, h, rng)
    state = initial_state(x, h, rng, change_points=(4,))
    for _ in range(20):
        prop, _ = propose_death(state, x, h, rng)
        assert prop.seg.change_points == ()


def _find_matching_death(born, x, h, point, target_labels, mode):
    for seed in range(2000):
        rng = np.random.default_rng(seed)
        prop, lr = propose_death(born, x, h, rng, label_proposal=mode)
        if (point not in prop.seg.change_points
                and _canon(prop.labels.labels) == _canon(target_labels)):
            return lr
    raise AssertionError("no matching death proposal found")


def _canon(labels):
    order = {}
    return tuple(order.setdefault(c, len(order)) for c in labels)


@pytest.mark.parametrize("mode", ["fresh", "conditional"])
def test_birth_death_ratio_antisymmetry(mode):
    rng = np.random.default_rng(4)
    x = TimeSeries(np.r_[rng.normal(0, 1, 12), rng.normal(4, 1, 12), rng.normal(0, 1, 12)])
    h = Hyperparams()
    start = initial_state(x, h, rng, change_points=(12,), labels=(0, 1))
    checked = 0
    for seed in range(40):
        prop, lr = propose_birth(start, x, h, np.random.default_rng(100 + seed),
                                 label_proposal=mode)
        if lr == -math.inf:
            continue
        point = next(c for c in prop.seg.change_points if c not in start.seg.change_points)
        back = _find_matching_death(prop, x, h, point, start.labels.labels, mode)
        assert back == pytest.approx(-lr, abs=1e-9)
        checked += 1
    assert checked >= 10


# ---- update ------------------------------------------------------------------

def test_update_concentrates_at_true_step():
    x = TimeSeries(np.r_[np.zeros(30), np.full(30, 5.0)])
    h = Hyperparams()
    rng = np.random.default_rng(5)
    state = initial_state(x, h, rng, change_points=(25,), labels=(0, 1))
    for _ in range(500):
        state = move_update(state, x, h, rng)
    assert abs(state.seg.change_points[0] - 30) <= 2


def test_update_covers_all_free_positions():
    x = TimeSeries(np.zeros(9))
    h = Hyperparams()
    rng = np.random.default_rng(6)
    state = initial_state(x, h, rng, change_points=(4,), labels=(0, 0))
    seen = set()
    for _ in range(400):
        state = move_update(state, x, h, rng)
        seen.add(state.seg.change_points[0])
    assert seen == set(range(2, 9))


def test_rejected_update_restores_state():
    x = TimeSeries(np.r_[np.zeros(30), np.full(30, 50.0)])
    h = Hyperparams()
    rng = np.random.default_rng(7)
    state = initial_state(x, h, rng, change_points=(30,), labels=(0, 1))
    after = move_update(state, x, h, rng)
    assert after == state
    assert after.params == state.params


# ---- sweep, fuzz and chain ---------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(), dict(label_proposal="fresh"),
                                dict(label_update="latent"),
                                dict(label_update="identity", label_proposal="fresh"),
                                dict(label_proposal="fresh", exact_moves=False)])
def test_sweep_fuzz_invariants_and_log_joint(kw):
    rng = np.random.default_rng(8)
    settings = SamplerSettings(iterations=2, burn_in=0, **kw)
    h = Hyperparams()
    n_sweeps = 0
    while n_sweeps < 2000:
        n = int(rng.integers(4, 25))
        x = TimeSeries(np.repeat(rng.normal(0, 4, 4), n // 4 + 1)[:n] + rng.normal(0, 1, n))
        state = initial_state(x, h, rng)
        for _ in range(100):
            state, sample = sweep(state, x, h, settings, rng)
            # re-validate every invariant from scratch
            ChainState(Segmentation(state.seg.change_points, n),
                       LabelAssignment(state.labels.labels), state.params)
            assert sample.log_joint == _lj(x, sample.change_points, sample.labels, h)
            assert int(sample.indicator.sum()) == sample.k
            n_sweeps += 1


def test_run_chain_determinism_and_errors():
    x = TimeSeries(np.random.default_rng(9).normal(0, 1, 30))
    s = SamplerSettings(iterations=300, burn_in=100, seed=3)
    a = run_chain(x, Hyperparams(), s)
    b = run_chain(x, Hyperparams(), s)
    assert a == b
    c = run_chain(x, Hyperparams(), SamplerSettings(iterations=300, burn_in=100, seed=4))
    assert hash(tuple(a)) != hash(tuple(c))
    with pytest.raises(ValidationError):
        run_chain(TimeSeries([1.0, 2.0, 3.0]), Hyperparams(), s)


def _chain_vs_enumeration(x, h, settings):
    samples = run_chain(x, h, settings)
    exact = marginal_over_labels(enumerate_posterior(x, h, h.k_max))
    emp = empirical(samples, lambda s: s.change_points)
    return tv_distance(emp, exact), samples, exact


def test_enumeration_fixture_joint_and_marginals():
    x = TimeSeries([0, 0, 0, 0, 3, 3, 3, 3])
    h = Hyperparams(k_max=2)
    settings = SamplerSettings(iterations=200_000, burn_in=2000, seed=11)
    tv, samples, exact = _chain_vs_enumeration(x, h, settings)
    assert tv < 0.05
    # per-index change probability
    raw, _ = posterior_probabilities(samples, 1)
    p_exact = np.zeros(x.n)
    for cps, p in exact.items():
        for t in cps:
            p_exact[t - 1] += p
    assert 0.5 * np.abs(raw - p_exact).sum() / max(p_exact.sum(), 1e-12) < 0.05


def test_fresh_labels_with_guard_are_exact():
    x = TimeSeries([0.0, 0.4, 3.1, 2.8, 3.3, -0.2, 0.1])
    h = Hyperparams(k_max=2, noise_scale=2.0)
    settings = SamplerSettings(iterations=100_000, burn_in=1000, seed=12,
                               label_proposal="fresh", exact_moves=True)
    tv, _, _ = _chain_vs_enumeration(x, h, settings)
    assert tv < 0.05


def test_pure_noise_k_posterior_matches_enumeration():
    x = TimeSeries(np.random.default_rng(3).normal(0, 1, 60))
    h = Hyperparams(k_max=2)
    init = initial_state(x, h, np.random.default_rng(0), change_points=(15, 30))
    samples = run_chain(x, h, SamplerSettings(iterations=40_000, burn_in=2000, seed=13),
                        init=init)
    post = enumerate_posterior(x, h, 2)
    exact_k = {}
    for (cps, _), p in post.items():
        exact_k[len(cps)] = exact_k.get(len(cps), 0.0) + p
    emp_k = empirical(samples, lambda s: s.k)
    assert tv_distance(emp_k, exact_k) < 0.05
    assert max(emp_k, key=emp_k.get) == 0


def test_prior_recovery_of_k():
    n = 12
    h = Hyperparams(alpha=1.5)
    samples = run_chain(TimeSeries(np.zeros(n)), h,
                        SamplerSettings(iterations=100_000, burn_in=1000, seed=14,
                                        prior_only=True))
    k_max = h.resolve_k_max(n)
    logp = {k: math.lgamma(n - 1) - math.lgamma(k + 1) - math.lgamma(n - 1 - k)
            + log_beta_k_prior(k, n) for k in range(k_max + 1)}
    z = sum(math.exp(v) for v in logp.values())
    exact = {k: math.exp(v) / z for k, v in logp.items()}
    assert tv_distance(empirical(samples, lambda s: s.k), exact) < 0.05


# ---- summaries ------------------------------------------------------------------

def _sample(cps, n=60, labels=None, means=(0.0,)):
    labels = (0,) * (len(cps) + 1) if labels is None else labels
    return ChainSample(tuple(cps), tuple(labels), max(labels) + 1, 0.0, tuple(means), n)


def test_summarize_identical_samples():
    res = summarize([_sample((30,))] * 50, SamplerSettings(iterations=2, burn_in=0))
    assert res.change_points == [30]
    assert res.posterior_prob[29] == 1.0
    assert res.k_posterior == {1: 1.0}


def test_summarize_alternating_samples():
    samples = [_sample((30,)) if i % 2 else _sample((31,)) for i in range(100)]
    res = summarize(samples, SamplerSettings(iterations=2, burn_in=0, window=2,
                                             threshold=0.5))
    assert len(res.change_points) == 1 and res.change_points[0] in (30, 31)
    assert res.pooled_prob[res.change_points[0] - 1] == 1.0


def test_summarize_empty_raises():
    with pytest.raises(ValidationError):
        summarize([], SamplerSettings(iterations=2, burn_in=0))


def test_pooled_probability_against_brute_force():
    rng = np.random.default_rng(15)
    samples = []
    for _ in range(300):
        k = int(rng.integers(0, 5))
        cps = sorted(rng.choice(np.arange(2, 40), size=k, replace=False).tolist())
        samples.append(_sample(cps, 40))
    for w in (1, 3):
        raw, pooled = posterior_probabilities(samples, w)
        for t in range(1, 41):
            hits = sum(any(abs(c - t) <= w for c in s.change_points) for s in samples)
            assert pooled[t - 1] == hits / 300
            assert raw[t - 1] == sum(t in s.change_points for s in samples) / 300


def test_detections_do_not_share_windows():
    pooled = np.array([0, .6, .7, .6, .6, .9, .6, 0, 0, 0])
    raw = np.zeros(10)
    picks = detect_from_probabilities(raw, pooled, 0.5, 1)
    assert picks == [3, 6]


def test_two_step_fixture_detection():
    rng = np.random.default_rng(2)
    x = TimeSeries(np.r_[np.zeros(10), np.full(10, 6.0)] + rng.normal(0, 1, 20))
    samples = run_chain(x, Hyperparams(), SamplerSettings(iterations=6000, burn_in=2000,
                                                          seed=16))
    res = summarize(samples, SamplerSettings(iterations=6000, burn_in=2000))
    assert len(res.change_points) == 1 and abs(res.change_points[0] - 10) <= 2


def test_segment_labels_follow_co_assignment():
    shared = [_sample((10, 20), 30, (0, 1, 0))] * 30
    labels, share = segment_labels(shared, [10, 20], 30)
    assert labels == [0, 1, 0] and share[0, 2] == 1.0 and share[0, 1] == 0.0
    split = shared[:15] + [_sample((10, 20), 30, (0, 1, 2))] * 15
    labels, share = segment_labels(split, [10, 20], 30)
    assert share[0, 2] == 0.5 and labels == [0, 1, 2]


def test_segment_labels_use_midpoints_of_detected_segments():
    # samples carry an extra change point inside the first detected segment
    samples = [_sample((4, 10, 20), 30, (0, 0, 1, 0))] * 10
    labels, _ = segment_labels(samples, [10, 20], 30)
    assert labels == [0, 1, 0]


def test_summary_labels_match_segments_and_levels():
    x = TimeSeries(np.r_[np.zeros(10), np.full(10, 5.0), np.full(10, 0.2)])
    h = Hyperparams(mean_loc=1.0, mean_scale=2.0)
    samples = [_sample((10, 20), 30, (0, 1, 0), (0.1, 5.0))] * 20
    res = summarize(samples, SamplerSettings(iterations=2, burn_in=0), x, h)
    assert res.change_points == [10, 20] and res.labels == [0, 1, 0]
    assert res.num_classes == 2
    pooled = np.r_[np.zeros(10), np.full(10, 0.2)]
    assert res.class_means[0] == pytest.approx((pooled.sum() + 1.0 / 2.0) / (20 + 0.5))
    assert res.class_means[1] == pytest.approx((50.0 + 0.5) / 10.5)
    without_x = summarize(samples, SamplerSettings(iterations=2, burn_in=0))
    assert without_x.class_means == pytest.approx([0.1, 5.0])
