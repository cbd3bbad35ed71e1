"""Birth/death/update Metropolis-Hastings moves, the MH-within-Gibbs sweep and
posterior summaries.

Acceptance ratios use the collapsed log-density, so split or merged segments
enter through their class evidence alone and no parameter Jacobian is needed.

By default (``label_proposal="conditional"``) a birth draws the labels of
the two new segments one after the other from the collapsed CRP
conditional, and a death draws the merged segment's label the same way.
The reverse label probabilities enter the ratio, so the moves are
reversible whatever the class structure.

``label_proposal="fresh"`` gives new segments fresh singleton classes.
Those moves can be reversed only between singleton configurations.  With
``exact_moves=True`` non-reversible fresh proposals are rejected; with
``exact_moves=False`` they are applied unconditionally.  The update move
keeps the flanking labels in exact mode.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .labels import fresh_class_draw, gibbs_scan
from .model import (
    marginal_from_stats,
    ChainState,
    ClassParams,
    Hyperparams,
    LabelAssignment,
    Segmentation,
    TimeSeries,
    ValidationError,
    log_joint_from_parts,
)


@dataclass(frozen=True)
class MoveProbabilities:
    birth: float
    death: float
    update: float

    def __post_init__(self):
        if abs(self.birth + self.death + self.update - 1.0) > 1e-12:
            raise ValidationError("move probabilities must sum to 1")

    @classmethod
    def for_k(cls, k: int, k_max: int) -> "MoveProbabilities":
        if k <= 0:
            return cls(0.5, 0.0, 0.5)
        if k >= k_max:
            return cls(0.0, 0.5, 0.5)
        third = 1.0 / 3.0
        return cls(third, third, 1.0 - 2.0 * third)


@dataclass(frozen=True)
class SamplerSettings:
    """Chain length and summary options.

    ``label_update`` is ``"collapsed"`` (default), ``"latent"`` (cluster the
    segment means given class parameters) or ``"identity"`` (labels frozen to
    one class per segment).  ``prior_only`` drops every data term, which is
    only useful for checking the prior.
    """

    iterations: int = 20000
    burn_in: int = 10000
    seed: int = 0
    threshold: float = 0.5
    window: int = 3
    label_update: str = "collapsed"
    label_proposal: str = "conditional"
    exact_moves: bool = True
    prior_only: bool = False

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError("need 0 <= burn_in < iterations")
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError("threshold must lie in (0, 1)")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.label_update not in ("collapsed", "latent", "identity"):
            raise ValidationError(f"unknown label_update {self.label_update!r}")
        if self.label_proposal not in ("conditional", "fresh"):
            raise ValidationError(f"unknown label_proposal {self.label_proposal!r}")


@dataclass(frozen=True)
class ChainSample:
    change_points: tuple[int, ...]
    labels: tuple[int, ...]
    num_classes: int
    log_joint: float
    class_means: tuple[float, ...]
    n: int

    @property
    def k(self) -> int:
        return len(self.change_points)

    @property
    def indicator(self) -> np.ndarray:
        """0/1 vector over time indices ``1..N`` (position ``t-1`` is index ``t``)."""
        out = np.zeros(self.n, dtype=np.int8)
        if self.change_points:
            out[np.asarray(self.change_points) - 1] = 1
        return out


@dataclass
class DetectionResult:
    change_points: list[int]
    posterior_prob: np.ndarray
    pooled_prob: np.ndarray
    labels: list[int]
    class_means: list[float]
    num_classes: int
    k_posterior: dict[int, float]
    settings: dict = field(default_factory=dict)
    seed: Optional[int] = None


def _target(x: TimeSeries, bounds, labels, hyper: Hyperparams, prior_only: bool) -> float:
    return log_joint_from_parts(x, bounds, labels, hyper, prior_only)


def current_log_joint(state: ChainState, x: TimeSeries, hyper: Hyperparams,
                      prior_only: bool = False) -> float:
    if state.log_joint is not None:
        return state.log_joint
    return _target(x, state.seg.bounds(), state.labels.labels, hyper, prior_only)


def _with_log_joint(state: ChainState, x, hyper, prior_only) -> ChainState:
    return replace(state, log_joint=_target(x, state.seg.bounds(), state.labels.labels,
                                            hyper, prior_only))


def _fresh(x: TimeSeries, start: int, end: int, hyper: Hyperparams, rng):
    d, s1, s2 = x.range_stats(start, end)
    return fresh_class_draw(d, s1, s2, hyper, rng)


def _centred(x: TimeSeries, start: int, end: int, loc: float) -> tuple[int, float, float]:
    d, s1, s2 = x.range_stats(start, end)
    return d, s1 - d * loc, s2 - 2.0 * loc * s1 + d * loc * loc


def _class_totals(x: TimeSeries, bounds, labels, skip, loc):
    """Centred stats and member counts of each class over segments not in ``skip``."""
    stats: dict[int, list] = {}
    for i, c in enumerate(labels):
        if i in skip:
            continue
        d, c1, c2 = _centred(x, bounds[i] + 1, bounds[i + 1], loc)
        st = stats.setdefault(c, [0, 0.0, 0.0, 0])
        st[0] += d
        st[1] += c1
        st[2] += c2
        st[3] += 1
    return stats


def _label_options(stats, seg, hyper: Hyperparams, prior_only: bool):
    """Normalised log-probabilities of a segment joining each class or a new one.

    Weights follow the collapsed CRP conditional; ``None`` keys the new class.
    """
    d, c1, c2 = seg
    keys = []
    logw = []
    for v, (dv, v1, v2, nv) in stats.items():
        lw = math.log(nv)
        if not prior_only:
            lw += (marginal_from_stats(dv + d, v1 + c1, v2 + c2, hyper)
                   - marginal_from_stats(dv, v1, v2, hyper))
        keys.append(v)
        logw.append(lw)
    fresh = math.log(hyper.alpha)
    if not prior_only:
        fresh += marginal_from_stats(d, c1, c2, hyper)
    keys.append(None)
    logw.append(fresh)
    top = max(logw)
    lse = top + math.log(math.fsum(math.exp(w - top) for w in logw))
    return keys, [w - lse for w in logw]


def _pick(rng, keys, logp):
    u = rng.random()
    acc = 0.0
    for key, lp in zip(keys, logp):
        acc += math.exp(lp)
        if u < acc:
            return key, lp
    return keys[-1], logp[-1]


def _logp_of(keys, logp, key):
    return logp[keys.index(key)]


def _add(stats, key, seg):
    st = stats.setdefault(key, [0, 0.0, 0.0, 0])
    st[0] += seg[0]
    st[1] += seg[1]
    st[2] += seg[2]
    st[3] += 1


def _assemble(x, state, new_cps, new_labels, hyper, rng):
    """Compact ``new_labels`` (ints for kept classes, other keys for new ones).

    Kept classes retain their parameters; each new class gets a fresh draw
    from its pooled data.  Segment means of new-class members are set to the
    drawn class mean.
    """
    n = x.n
    seg = Segmentation(tuple(new_cps), n)
    b = seg.bounds()
    p = state.params
    old_ids = sorted({c for c in new_labels if isinstance(c, int)})
    new_keys = []
    for c in new_labels:
        if not isinstance(c, int) and c not in new_keys:
            new_keys.append(c)
    remap = {c: j for j, c in enumerate(old_ids)}
    params = [[p.class_means[c] for c in old_ids], [p.class_mean_vars[c] for c in old_ids],
              [p.noise_vars[c] for c in old_ids]]
    for key in new_keys:
        d = s1 = s2 = 0.0
        for i, c in enumerate(new_labels):
            if c == key:
                di, a1, a2 = x.range_stats(b[i] + 1, b[i + 1])
                d, s1, s2 = d + di, s1 + a1, s2 + a2
        remap[key] = len(params[0])
        for lst, val in zip(params, fresh_class_draw(int(d), s1, s2, hyper, rng)):
            lst.append(val)
    labels = tuple(remap[c] for c in new_labels)
    return seg, labels, params


def propose_birth(state: ChainState, x: TimeSeries, hyper: Hyperparams,
                  rng: np.random.Generator, exact_moves: bool = True,
                  prior_only: bool = False, label_proposal: str = "conditional"
                  ) -> tuple[ChainState, float]:
    """Propose a new change point uniformly among free interior indices.

    With ``label_proposal="fresh"`` the split segment's class is replaced by
    two fresh singleton classes.  With ``"conditional"`` the two halves draw
    their labels in turn from the collapsed CRP conditional given all other
    segments, and the ratio carries the label-proposal probabilities of both
    directions.  Returns the proposal and the log acceptance ratio; ``-inf``
    marks a proposal that must be rejected.
    """
    n = x.n
    cps = state.seg.change_points
    k = len(cps)
    k_max = hyper.resolve_k_max(n)
    n_free = n - 2 - k
    if k >= k_max or n_free <= 0:
        return state, -math.inf
    taken = set(cps)
    t = int(rng.integers(2, n))
    while t in taken:
        t = int(rng.integers(2, n))
    i = bisect_left(cps, t)
    b = state.seg.bounds()
    new_cps = cps[:i] + (t,) + cps[i:]
    labels = list(state.labels.labels)
    old = labels[i]
    seg_means = list(state.params.segment_means)
    label_logq = 0.0

    if label_proposal == "fresh":
        shared = labels.count(old) > 1
        labels[i:i + 1] = ["L", "R"]
        blocked = exact_moves and shared
    else:
        loc = hyper.mean_loc
        stats = _class_totals(x, b, labels, {i}, loc)
        left = _centred(x, b[i] + 1, t, loc)
        right = _centred(x, t + 1, b[i + 1], loc)
        merged = (left[0] + right[0], left[1] + right[1], left[2] + right[2])
        keys, logp = _label_options(stats, merged, hyper, prior_only)
        rev = _logp_of(keys, logp, old if old in stats else None)
        keys, logp = _label_options(stats, left, hyper, prior_only)
        lab_l, lp_l = _pick(rng, keys, logp)
        lab_l = "L" if lab_l is None else lab_l
        _add(stats, lab_l, left)
        keys, logp = _label_options(stats, right, hyper, prior_only)
        lab_r, lp_r = _pick(rng, keys, logp)
        lab_r = "R" if lab_r is None else lab_r
        labels[i:i + 1] = [lab_l, lab_r]
        label_logq = rev - lp_l - lp_r
        blocked = False

    seg, new_labels, params = _assemble(x, state, new_cps, labels, hyper, rng)
    lab_map = {}
    for pos in (i, i + 1):
        if not isinstance(labels[pos], int):
            lab_map[pos] = params[0][new_labels[pos]]
    seg_means[i:i + 1] = [lab_map.get(i, seg_means[i]), lab_map.get(i + 1, seg_means[i])]
    proposal = ChainState(seg, LabelAssignment(new_labels), ClassParams(*params, seg_means))
    if blocked:
        return proposal, -math.inf
    proposal = _with_log_joint(proposal, x, hyper, prior_only)
    cur = current_log_joint(state, x, hyper, prior_only)
    fwd = MoveProbabilities.for_k(k, k_max).birth / n_free
    rev_move = MoveProbabilities.for_k(k + 1, k_max).death / (k + 1)
    return proposal, (proposal.log_joint - cur + math.log(rev_move) - math.log(fwd)
                      + label_logq)


def propose_death(state: ChainState, x: TimeSeries, hyper: Hyperparams,
                  rng: np.random.Generator, exact_moves: bool = True,
                  prior_only: bool = False, label_proposal: str = "conditional"
                  ) -> tuple[ChainState, float]:
    """Propose removing a uniformly chosen change point.

    The merged segment gets a fresh singleton class (``"fresh"``) or a label
    drawn from the collapsed CRP conditional (``"conditional"``).  The log
    ratio is the inverse of the matching birth ratio.
    """
    n = x.n
    cps = state.seg.change_points
    k = len(cps)
    if k < 1:
        raise ValidationError("death move needs at least one change point")
    k_max = hyper.resolve_k_max(n)
    j = int(rng.integers(k))
    b = state.seg.bounds()
    labels = list(state.labels.labels)
    a_id, b_id = labels[j], labels[j + 1]
    seg_means = list(state.params.segment_means)
    label_logq = 0.0

    if label_proposal == "fresh":
        singletons = a_id != b_id and labels.count(a_id) == 1 and labels.count(b_id) == 1
        labels[j:j + 2] = ["M"]
        blocked = exact_moves and not singletons
    else:
        loc = hyper.mean_loc
        stats = _class_totals(x, b, labels, {j, j + 1}, loc)
        left = _centred(x, b[j] + 1, b[j + 1], loc)
        right = _centred(x, b[j + 1] + 1, b[j + 2], loc)
        merged = (left[0] + right[0], left[1] + right[1], left[2] + right[2])
        keys, logp = _label_options(stats, merged, hyper, prior_only)
        lab_m, lp_m = _pick(rng, keys, logp)
        # reverse birth: left half then right half from the conditional
        keys, logp = _label_options(stats, left, hyper, prior_only)
        key_l = a_id if a_id in stats else None
        rev = _logp_of(keys, logp, key_l)
        _add(stats, a_id, left)
        keys, logp = _label_options(stats, right, hyper, prior_only)
        rev += _logp_of(keys, logp, b_id if b_id in stats else None)
        labels[j:j + 2] = ["M" if lab_m is None else lab_m]
        label_logq = rev - lp_m
        blocked = False

    seg, new_labels, params = _assemble(x, state, cps[:j] + cps[j + 1:], labels, hyper, rng)
    merged_mean = params[0][new_labels[j]] if not isinstance(labels[j], int) else seg_means[j]
    seg_means[j:j + 2] = [merged_mean]
    proposal = ChainState(seg, LabelAssignment(new_labels), ClassParams(*params, seg_means))
    if blocked:
        return proposal, -math.inf
    proposal = _with_log_joint(proposal, x, hyper, prior_only)
    cur = current_log_joint(state, x, hyper, prior_only)
    fwd = MoveProbabilities.for_k(k, k_max).death / k
    rev_move = MoveProbabilities.for_k(k - 1, k_max).birth / (n - 2 - (k - 1))
    return proposal, (proposal.log_joint - cur + math.log(rev_move) - math.log(fwd)
                      + label_logq)


def _relocate(state: ChainState, x: TimeSeries, j: int, t: int, hyper: Hyperparams,
              rng, exact_moves: bool) -> ChainState:
    cps = state.seg.change_points
    new_cps = cps[:j] + (t,) + cps[j + 1:]
    seg = Segmentation(new_cps, x.n)
    if exact_moves:
        return ChainState(seg, state.labels, state.params)
    # fresh singleton classes for both flanking segments
    b = seg.bounds()
    labels = list(state.labels.labels)
    p = state.params
    params = [list(p.class_means), list(p.class_mean_vars), list(p.noise_vars)]
    seg_means = list(p.segment_means)
    olds = {labels[j], labels[j + 1]}
    for pos in (j, j + 1):
        draw = _fresh(x, b[pos] + 1, b[pos + 1], hyper, rng)
        labels[pos] = len(params[0])
        seg_means[pos] = draw[0]
        for lst, val in zip(params, draw):
            lst.append(val)
    for old in sorted(olds, reverse=True):
        if old not in labels:
            for lst in params:
                del lst[old]
            labels = [c - 1 if c > old else c for c in labels]
    return ChainState(seg, LabelAssignment(tuple(labels)), ClassParams(*params, seg_means))


def move_update(state: ChainState, x: TimeSeries, hyper: Hyperparams,
                rng: np.random.Generator, exact_moves: bool = True,
                prior_only: bool = False) -> ChainState:
    """Relocate each change point in turn, left to right.

    Change point ``j`` is removed and a replacement is proposed uniformly
    between its neighbours, so the ordering is kept and each step is a
    symmetric proposal accepted or rejected on its own.  With
    ``exact_moves`` the flanking segments keep their labels; otherwise they
    get fresh singleton classes.
    """
    k = state.seg.k
    if k < 1:
        return state
    n = x.n
    if not exact_moves:
        cur = current_log_joint(state, x, hyper, prior_only)
        state = replace(state, log_joint=cur)
    labels = state.labels.labels
    loc = hyper.mean_loc
    b = state.seg.bounds()
    if exact_moves and not prior_only:
        stats = _class_totals(x, b, labels, (), loc)
        evid = {v: marginal_from_stats(st[0], st[1], st[2], hyper) for v, st in stats.items()}
    cps = list(state.seg.change_points)
    moved = False
    for j in range(k):
        lo = cps[j - 1] if j > 0 else 1
        hi = cps[j + 1] if j < k - 1 else n
        count = hi - lo - 2
        if count <= 0:
            continue
        t = int(rng.integers(lo + 1, hi - 1))
        if t >= cps[j]:
            t += 1
        if not exact_moves:
            prop = _relocate(state, x, j, t, hyper, rng, exact_moves)
            prop = _with_log_joint(prop, x, hyper, prior_only)
            if math.log(rng.random()) < prop.log_joint - state.log_joint:
                state = prop
                cps[j] = t
            continue
        if prior_only:
            # labels and K are unchanged, so the prior ratio is one
            cps[j] = t
            moved = True
            continue
        # only data moving between the two flanking classes changes the evidence
        start, stop = (t + 1, cps[j]) if t < cps[j] else (cps[j] + 1, t)
        dd, d1, d2 = _centred(x, start, stop, loc)
        sign = 1 if t < cps[j] else -1  # +1: block moves from left to right segment
        ca, cb = labels[j], labels[j + 1]
        if ca == cb:
            cps[j] = t
            moved = True
            continue
        sa, sb = stats[ca], stats[cb]
        na = (sa[0] - sign * dd, sa[1] - sign * d1, sa[2] - sign * d2)
        nb = (sb[0] + sign * dd, sb[1] + sign * d1, sb[2] + sign * d2)
        ea = marginal_from_stats(*na, hyper)
        eb = marginal_from_stats(*nb, hyper)
        delta = ea + eb - evid[ca] - evid[cb]
        if delta >= 0.0 or math.log(rng.random()) < delta:
            cps[j] = t
            moved = True
            sa[0], sa[1], sa[2] = na
            sb[0], sb[1], sb[2] = nb
            evid[ca], evid[cb] = ea, eb
    if exact_moves and moved:
        state = ChainState(Segmentation(tuple(cps), n), state.labels, state.params)
    return state


def _accept(rng, log_ratio: float) -> bool:
    if log_ratio == -math.inf:
        return False
    return log_ratio >= 0.0 or math.log(rng.random()) < log_ratio


def sweep(state: ChainState, x: TimeSeries, hyper: Hyperparams, settings: SamplerSettings,
          rng: np.random.Generator) -> tuple[ChainState, ChainSample]:
    """One MH-within-Gibbs iteration: a (tau, K) move, then the label/parameter scan."""
    prior_only = settings.prior_only
    exact = settings.exact_moves
    k = state.seg.k
    probs = MoveProbabilities.for_k(k, hyper.resolve_k_max(x.n))
    u = rng.random()
    if u < probs.birth:
        prop, lr = propose_birth(state, x, hyper, rng, exact, prior_only,
                                 settings.label_proposal)
        if _accept(rng, lr):
            state = prop
    elif u < probs.birth + probs.death:
        prop, lr = propose_death(state, x, hyper, rng, exact, prior_only,
                                 settings.label_proposal)
        if _accept(rng, lr):
            state = prop
    else:
        state = move_update(state, x, hyper, rng, exact, prior_only)
    state = gibbs_scan(x, state, hyper, rng, settings.label_update, prior_only)
    if settings.label_update == "identity":
        state = _identity_labels(state)
    state = _with_log_joint(state, x, hyper, prior_only)
    sample = ChainSample(state.seg.change_points, state.labels.labels,
                         state.labels.num_classes, state.log_joint,
                         state.params.class_means, x.n)
    return state, sample


def _identity_labels(state: ChainState) -> ChainState:
    labels = state.labels.labels
    if labels == tuple(range(len(labels))):
        return state
    p = state.params
    order = list(labels)
    params = ClassParams(tuple(p.class_means[c] for c in order),
                         tuple(p.class_mean_vars[c] for c in order),
                         tuple(p.noise_vars[c] for c in order), p.segment_means)
    return ChainState(state.seg, LabelAssignment(tuple(range(len(labels)))), params)


def initial_state(x: TimeSeries, hyper: Hyperparams, rng: np.random.Generator,
                  change_points: Sequence[int] = (), labels: Optional[Sequence[int]] = None
                  ) -> ChainState:
    """State with the given change points; every segment its own class by default."""
    seg = Segmentation(tuple(change_points), x.n)
    if labels is None:
        labels = tuple(range(seg.n_segments))
    labels = LabelAssignment(tuple(labels))
    b = seg.bounds()
    params = [[], [], []]
    for v in range(labels.num_classes):
        d = s1 = s2 = 0.0
        for i, c in enumerate(labels.labels):
            if c == v:
                di, a1, a2 = x.range_stats(b[i] + 1, b[i + 1])
                d += di
                s1 += a1
                s2 += a2
        for lst, val in zip(params, fresh_class_draw(int(d), s1, s2, hyper, rng)):
            lst.append(val)
    seg_means = [params[0][c] for c in labels.labels]
    return ChainState(seg, labels, ClassParams(*params, seg_means))


def run_chain(x, hyper: Hyperparams, settings: SamplerSettings,
              init: Optional[ChainState] = None) -> list[ChainSample]:
    """Run one chain and return its post-burn-in samples.

    Deterministic given ``(x, hyper, settings.seed)``.
    """
    if not isinstance(x, TimeSeries):
        x = TimeSeries(x)
    if x.n < 4:
        raise ValidationError(f"need at least 4 points for interior change points, got {x.n}")
    hyper.resolve_k_max(x.n)
    rng = np.random.default_rng(settings.seed)
    state = init if init is not None else initial_state(x, hyper, rng)
    samples = []
    for it in range(settings.iterations):
        state, sample = sweep(state, x, hyper, settings, rng)
        if it >= settings.burn_in:
            samples.append(sample)
    return samples


def posterior_probabilities(samples: Sequence[ChainSample], window: int
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Per-index change probability and its ``+-window`` pooled version.

    The pooled value at ``t`` is the fraction of samples with at least one
    change point in ``[t - window, t + window]``.
    """
    n = samples[0].n
    counts = np.zeros(n + 2 * window + 1, dtype=np.int64)
    raw = np.zeros(n, dtype=np.int64)
    for s in samples:
        if not s.change_points:
            continue
        cps = np.asarray(s.change_points)
        raw[cps - 1] += 1
        # mark each covered window once per sample
        cover = np.zeros(n + 2 * window + 1, dtype=np.int64)
        np.add.at(cover, cps - 1, 1)
        np.add.at(cover, cps + 2 * window, -1)
        counts += np.cumsum(cover) > 0
    pooled = counts[window:window + n] / len(samples)
    return raw / len(samples), pooled


def detect_from_probabilities(raw: np.ndarray, pooled: np.ndarray, threshold: float,
                              window: int) -> list[int]:
    """Greedy peaks of pooled probability above ``threshold`` whose windows do not overlap."""
    cand = np.flatnonzero(pooled > threshold)
    order = sorted(cand, key=lambda i: (-pooled[i], -raw[i], i))
    picked: list[int] = []
    for i in order:
        if all(abs(i - j) > 2 * window for j in picked):
            picked.append(int(i))
    return sorted(t + 1 for t in picked)


def segment_labels(samples: Sequence[ChainSample], change_points: Sequence[int],
                   n: int) -> tuple[list[int], np.ndarray]:
    """Group the segments of a point segmentation by posterior co-assignment.

    In every sample, each segment takes the label of the sample segment that
    covers its midpoint.  ``share[a, b]`` is the fraction of samples in which
    segments ``a`` and ``b`` carry the same label.  Segments are scanned left
    to right and join the existing group with the highest mean co-assignment
    if that exceeds 1/2; otherwise they open a new group.
    """
    b = [0, *change_points, n]
    mids = np.array([(b[i] + b[i + 1] + 1) // 2 for i in range(len(b) - 1)])
    share = np.zeros((mids.size, mids.size))
    for smp in samples:
        lab = np.asarray(smp.labels)[np.searchsorted(smp.change_points, mids, side="left")]
        share += lab[:, None] == lab[None, :]
    share /= len(samples)
    groups: list[list[int]] = []
    labels = []
    for i in range(mids.size):
        scores = [share[i, g].mean() for g in groups]
        if scores and max(scores) > 0.5:
            v = int(np.argmax(scores))
            groups[v].append(i)
        else:
            v = len(groups)
            groups.append([i])
        labels.append(v)
    return labels, share


def _class_levels(x: TimeSeries, change_points, labels, hyper: Hyperparams) -> list[float]:
    """Posterior mean of each group's shared mean given its pooled data."""
    b = [0, *change_points, x.n]
    out = []
    for v in range(max(labels) + 1):
        vals = np.concatenate([x.values[b[i]:b[i + 1]] for i, c in enumerate(labels) if c == v])
        out.append(float((vals.sum() + hyper.mean_loc / hyper.mean_scale)
                         / (vals.size + 1.0 / hyper.mean_scale)))
    return out


def summarize(samples: Sequence[ChainSample], settings: SamplerSettings,
              x: Optional[TimeSeries] = None,
              hyper: Optional[Hyperparams] = None) -> DetectionResult:
    """Point estimates from chain samples (possibly pooled over several chains).

    Change points come from the pooled per-index probabilities and labels
    from :func:`segment_labels`.  With ``x`` given, ``class_means`` are the
    conjugate posterior means of each group's level; otherwise they average
    the sampled class means covering each group's segment midpoints.
    """
    if not samples:
        raise ValidationError("no samples to summarise")
    n = samples[0].n
    raw, pooled = posterior_probabilities(samples, settings.window)
    cps = detect_from_probabilities(raw, pooled, settings.threshold, settings.window)
    labels, _ = segment_labels(samples, cps, n)
    if x is not None:
        means = _class_levels(x, cps, labels, hyper or Hyperparams())
    else:
        b = [0, *cps, n]
        mids = np.array([(b[i] + b[i + 1] + 1) // 2 for i in range(len(b) - 1)])
        acc = np.zeros(len(mids))
        for smp in samples:
            lab = np.asarray(smp.labels)[np.searchsorted(smp.change_points, mids, side="left")]
            acc += np.asarray(smp.class_means)[lab]
        acc /= len(samples)
        means = [float(np.mean(acc[[i for i, c in enumerate(labels) if c == v]]))
                 for v in range(max(labels) + 1)]
    k_counts = Counter(s.k for s in samples)
    return DetectionResult(
        change_points=cps,
        posterior_prob=raw,
        pooled_prob=pooled,
        labels=labels,
        class_means=means,
        num_classes=max(labels) + 1,
        k_posterior={k: c / len(samples) for k, c in sorted(k_counts.items())},
        settings=asdict(settings),
        seed=settings.seed,
    )
