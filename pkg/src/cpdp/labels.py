"""Gibbs updates for the Dirichlet-process layer over segment means.

Two label kernels are provided.  :func:`gibbs_update_label` clusters the
latent segment means ``mu_i`` given the current class parameters (the
classic non-collapsed DP mixture step).  :func:`collapsed_update_label`
reassigns a segment using the collapsed class evidence of its raw data and is
the kernel the change-point sampler uses by default, because it leaves the
collapsed posterior over (change points, labels) invariant.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from .model import (
    LOG_2PI,
    ChainState,
    ClassParams,
    Hyperparams,
    LabelAssignment,
    TimeSeries,
    ValidationError,
    marginal_from_stats,
)


def _inv_gamma(rng: np.random.Generator, shape: float, scale: float) -> float:
    return scale / rng.gamma(shape)


def _categorical(rng: np.random.Generator, logw: Sequence[float]) -> int:
    top = max(logw)
    w = [math.exp(lw - top) for lw in logw]
    u = rng.random() * sum(w)
    acc = 0.0
    for j, wj in enumerate(w):
        acc += wj
        if u < acc:
            return j
    return len(w) - 1


def _members(labels: Sequence[int], v: int) -> list[int]:
    out = [i for i, c in enumerate(labels) if c == v]
    if not out:
        raise ValidationError(f"class {v} is empty; compact labels first")
    return out


def segment_mean_conditional(n_i: int, total: float, class_mean: float,
                             class_var: float, noise_var: float) -> tuple[float, float]:
    """Mean and variance of ``mu_i`` given its segment data and class parameters."""
    if n_i < 1:
        raise ValidationError("segments are never empty")
    if not (class_var > 0 and noise_var > 0):
        raise ValidationError("variances must be positive")
    prec = n_i / noise_var + 1.0 / class_var
    mean = (total / noise_var + class_mean / class_var) / prec
    return mean, 1.0 / prec


def sample_segment_means(x: TimeSeries, state: ChainState, hyper: Hyperparams,
                         rng: np.random.Generator) -> tuple[float, ...]:
    """Draw every segment mean from its conjugate normal conditional."""
    p = state.params
    b = state.seg.bounds()
    out = []
    for i, c in enumerate(state.labels.labels):
        d, s1, _ = x.range_stats(b[i] + 1, b[i + 1])
        m, var = segment_mean_conditional(d, s1, p.class_means[c],
                                          p.class_mean_vars[c], p.noise_vars[c])
        out.append(rng.normal(m, math.sqrt(var)))
    return tuple(out)


def log_base_predictive(mu: float, hyper: Hyperparams) -> float:
    """Log density of a segment mean under the base measure.

    With ``s ~ IG(classvar_shape, classvar_scale)`` and
    ``m | s ~ N(mean_loc, mean_scale * s)``, ``mu | m, s ~ N(m, s)`` is a
    Student-t with ``classvar_shape`` degrees of freedom.
    """
    a = 0.5 * hyper.classvar_shape
    b = 0.5 * hyper.classvar_scale
    spread = 1.0 + hyper.mean_scale
    r = mu - hyper.mean_loc
    return (math.lgamma(a + 0.5) - math.lgamma(a) - 0.5 * math.log(2.0 * math.pi * b * spread)
            - (a + 0.5) * math.log1p(r * r / (2.0 * b * spread)))


def sample_base_posterior(members: Sequence[float], hyper: Hyperparams,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Draw ``(class_mean, class_mean_var)`` from the base measure updated by ``members``."""
    a = 0.5 * hyper.classvar_shape
    b = 0.5 * hyper.classvar_scale
    inv_delta = 1.0 / hyper.mean_scale
    r = [m - hyper.mean_loc for m in members]
    n = len(r)
    s1 = sum(r)
    q = sum(v * v for v in r) - s1 * s1 / (n + inv_delta)
    var = _inv_gamma(rng, a + 0.5 * n, b + 0.5 * max(q, 0.0))
    mean = hyper.mean_loc + s1 / (n + inv_delta)
    return rng.normal(mean, math.sqrt(var / (n + inv_delta))), var


def label_log_weights(i: int, state: ChainState, hyper: Hyperparams,
                      prior_only: bool = False) -> list[float]:
    """Unnormalised log weights for segment ``i`` joining each class or a new one.

    Entry ``v`` is for existing class ``v`` (classes left empty by removing
    ``i`` get ``-inf``); the last entry is the fresh class.
    """
    labels = state.labels.labels
    p = state.params
    mu = p.segment_means[i]
    counts = [0] * p.num_classes
    for j, c in enumerate(labels):
        if j != i:
            counts[c] += 1
    out = []
    for v, n in enumerate(counts):
        if n == 0:
            out.append(-math.inf)
            continue
        lw = math.log(n)
        if not prior_only:
            var = p.class_mean_vars[v]
            r = mu - p.class_means[v]
            lw += -0.5 * (LOG_2PI + math.log(var)) - 0.5 * r * r / var
        out.append(lw)
    fresh = math.log(hyper.alpha)
    if not prior_only:
        fresh += log_base_predictive(mu, hyper)
    out.append(fresh)
    return out


def _drop_class(labels: list[int], params: list[list[float]], v: int) -> None:
    for lst in params:
        del lst[v]
    for j, c in enumerate(labels):
        if c > v:
            labels[j] = c - 1


def gibbs_update_label(i: int, state: ChainState, hyper: Hyperparams,
                       rng: np.random.Generator, prior_only: bool = False) -> ChainState:
    """Resample the class of segment ``i`` from its CRP conditional given ``mu_i``.

    A fresh class gets ``(class_mean, class_mean_var)`` from the base-measure
    posterior given ``mu_i`` and a noise variance from its prior.  Classes
    that empty out are removed and labels stay compact.
    """
    if not 0 <= i < state.seg.n_segments:
        raise IndexError(f"segment {i} out of range")
    logw = label_log_weights(i, state, hyper, prior_only)
    choice = _categorical(rng, logw)
    labels = list(state.labels.labels)
    p = state.params
    params = [list(p.class_means), list(p.class_mean_vars), list(p.noise_vars)]
    old = labels[i]
    if choice == len(logw) - 1:
        m, s = sample_base_posterior([p.segment_means[i]], hyper, rng)
        nv = _inv_gamma(rng, 0.5 * hyper.noise_shape, 0.5 * hyper.noise_scale)
        for lst, val in zip(params, (m, s, nv)):
            lst.append(val)
        choice = len(params[0]) - 1
    labels[i] = choice
    if old not in labels:
        _drop_class(labels, params, old)
    return replace(state, labels=LabelAssignment(tuple(labels)),
                   params=ClassParams(*params, p.segment_means), log_joint=None)


def fresh_class_draw(d: int, s1: float, s2: float, hyper: Hyperparams,
                     rng: np.random.Generator) -> tuple[float, float, float]:
    """Draw ``(class_mean, class_mean_var, noise_var)`` for a new class holding data.

    ``s1``/``s2`` are raw sums of the data.  The class mean and noise
    variance come from their joint conjugate posterior; the class-mean
    variance from its posterior with the segment mean placed at the class mean.
    """
    loc = hyper.mean_loc
    c1 = s1 - d * loc
    c2 = s2 - 2.0 * loc * s1 + d * loc * loc
    shrink = d + 1.0 / hyper.mean_scale
    q = max(c2 - c1 * c1 / shrink, 0.0)
    noise_var = _inv_gamma(rng, 0.5 * (hyper.noise_shape + d), 0.5 * (hyper.noise_scale + q))
    mean = rng.normal(loc + c1 / shrink, math.sqrt(noise_var / shrink))
    class_var = _inv_gamma(rng, 0.5 * hyper.classvar_shape + 0.5, 0.5 * hyper.classvar_scale)
    return mean, class_var, noise_var


def collapsed_update_label(i: int, x: TimeSeries, state: ChainState, hyper: Hyperparams,
                           rng: np.random.Generator, prior_only: bool = False) -> ChainState:
    """Resample the class of segment ``i`` from the collapsed conditional.

    Weights are ``n_{-i,v} * M(Y_v + seg_i) / M(Y_v)`` for existing classes and
    ``alpha * M(seg_i)`` for a new one, where ``M`` is the class evidence.
    """
    b = state.seg.bounds()
    seg_stats = [x.range_stats(b[j] + 1, b[j + 1]) for j in range(len(b) - 1)]
    labels = list(state.labels.labels)
    p = state.params
    params = [list(p.class_means), list(p.class_mean_vars), list(p.noise_vars)]
    stats = _class_stats(seg_stats, labels, len(params[0]), hyper.mean_loc)
    _collapsed_relabel(i, seg_stats, labels, stats, params, hyper, rng, prior_only)
    return replace(state, labels=LabelAssignment(tuple(labels)),
                   params=ClassParams(*params, p.segment_means), log_joint=None)


def _class_stats(seg_stats, labels, num_classes, loc):
    stats = [[0, 0.0, 0.0] for _ in range(num_classes)]
    for (d, s1, s2), c in zip(seg_stats, labels):
        st = stats[c]
        st[0] += d
        st[1] += s1 - d * loc
        st[2] += s2 - 2.0 * loc * s1 + d * loc * loc
    return stats


def _collapsed_relabel(i, seg_stats, labels, stats, params, hyper, rng, prior_only,
                       evid=None):
    # mutates labels, stats, params and the per-class evidence cache in place
    if evid is None:
        evid = [marginal_from_stats(st[0], st[1], st[2], hyper) for st in stats]
    loc = hyper.mean_loc
    d, r1, r2 = seg_stats[i]
    c1 = r1 - d * loc
    c2 = r2 - 2.0 * loc * r1 + d * loc * loc
    old = labels[i]
    st = stats[old]
    st[0] -= d
    st[1] -= c1
    st[2] -= c2
    evid[old] = marginal_from_stats(st[0], st[1], st[2], hyper)
    counts = [0] * len(stats)
    for c in labels:
        counts[c] += 1
    counts[old] -= 1
    logw = []
    joined = []
    for v, n in enumerate(counts):
        if n == 0:
            logw.append(-math.inf)
            joined.append(0.0)
            continue
        lw = math.log(n)
        if not prior_only:
            sv = stats[v]
            m = marginal_from_stats(sv[0] + d, sv[1] + c1, sv[2] + c2, hyper)
            joined.append(m)
            lw += m - evid[v]
        logw.append(lw)
    own = marginal_from_stats(d, c1, c2, hyper)
    fresh = math.log(hyper.alpha)
    if not prior_only:
        fresh += own
    logw.append(fresh)
    choice = _categorical(rng, logw)
    if choice == len(logw) - 1:
        if counts[old] == 0:
            # staying a singleton: keep the existing class and its parameters
            choice = old
        else:
            for lst, val in zip(params, fresh_class_draw(d, r1, r2, hyper, rng)):
                lst.append(val)
            stats.append([0, 0.0, 0.0])
            evid.append(0.0)
            choice = len(stats) - 1
    st = stats[choice]
    st[0] += d
    st[1] += c1
    st[2] += c2
    evid[choice] = marginal_from_stats(st[0], st[1], st[2], hyper)
    labels[i] = choice
    if counts[old] == 0 and choice != old:
        del stats[old]
        del evid[old]
        _drop_class(labels, params, old)


def _class_mean_draw(member_mus, class_var, noise_var, hyper, rng):
    prior_var = hyper.mean_scale * noise_var
    prec = len(member_mus) / class_var + 1.0 / prior_var
    mean = (sum(member_mus) / class_var + hyper.mean_loc / prior_var) / prec
    return rng.normal(mean, math.sqrt(1.0 / prec))


def _class_var_draw(member_mus, class_mean, hyper, rng):
    resid = sum((m - class_mean) ** 2 for m in member_mus)
    return _inv_gamma(rng, 0.5 * (hyper.classvar_shape + len(member_mus)),
                      0.5 * (hyper.classvar_scale + resid))


def _noise_var_draw(d_v, ss, hyper, rng):
    return _inv_gamma(rng, 0.5 * (hyper.noise_shape + d_v), 0.5 * (hyper.noise_scale + ss))


def sample_class_mean(v: int, state: ChainState, hyper: Hyperparams,
                      rng: np.random.Generator) -> float:
    """Conjugate normal draw of class mean ``v`` given its members' segment means.

    The prior is ``N(mean_loc, mean_scale * noise_var_v)`` and each member
    mean has variance ``class_mean_var_v`` about the class mean.
    """
    p = state.params
    members = _members(state.labels.labels, v)
    return _class_mean_draw([p.segment_means[i] for i in members], p.class_mean_vars[v],
                            p.noise_vars[v], hyper, rng)


def sample_class_var(v: int, state: ChainState, hyper: Hyperparams,
                     rng: np.random.Generator) -> float:
    """Inverse-gamma draw of the spread of segment means around class mean ``v``."""
    p = state.params
    members = _members(state.labels.labels, v)
    return _class_var_draw([p.segment_means[i] for i in members], p.class_means[v],
                           hyper, rng)


def _resid_ss(d, s1, s2, mu):
    return max(s2 - 2.0 * mu * s1 + d * mu * mu, 0.0)


def noise_residual_ss(v: int, x: TimeSeries, state: ChainState) -> tuple[int, float]:
    """Point count and residual sum of squares of class ``v`` about its segment means."""
    p = state.params
    b = state.seg.bounds()
    d_v = 0
    ss = 0.0
    for i in _members(state.labels.labels, v):
        d, s1, s2 = x.range_stats(b[i] + 1, b[i + 1])
        d_v += d
        ss += _resid_ss(d, s1, s2, p.segment_means[i])
    return d_v, ss


def sample_noise_var(v: int, x: TimeSeries, state: ChainState, hyper: Hyperparams,
                     rng: np.random.Generator) -> float:
    d_v, ss = noise_residual_ss(v, x, state)
    return _noise_var_draw(d_v, ss, hyper, rng)


def compact_labels(state: ChainState) -> ChainState:
    """Renumber classes by first appearance, dropping unused class parameters.

    Accepts states whose labels are not compact (e.g. built with
    :func:`make_state` from arbitrary identifiers).
    """
    raw = state.labels.labels
    order: dict[int, int] = {}
    for c in raw:
        order.setdefault(c, len(order))
    if all(k == v for k, v in order.items()) and len(order) == state.params.num_classes:
        return state
    p = state.params
    keep = sorted(order, key=order.get)
    params = ClassParams(tuple(p.class_means[c] for c in keep),
                         tuple(p.class_mean_vars[c] for c in keep),
                         tuple(p.noise_vars[c] for c in keep),
                         p.segment_means)
    return ChainState(state.seg, LabelAssignment(tuple(order[c] for c in raw)), params,
                      state.log_joint)


def gibbs_scan(x: TimeSeries, state: ChainState, hyper: Hyperparams,
               rng: np.random.Generator, label_update: str = "collapsed",
               prior_only: bool = False) -> ChainState:
    """One pass: segment means, then labels, then class means, spreads and noise.

    ``label_update`` selects :func:`collapsed_update_label` (``"collapsed"``),
    :func:`gibbs_update_label` (``"latent"``) or no label move (``"identity"``).
    """
    b = state.seg.bounds()
    k1 = len(b) - 1
    seg_stats = [x.range_stats(b[j] + 1, b[j + 1]) for j in range(k1)]
    p = state.params
    labels = list(state.labels.labels)
    params = [list(p.class_means), list(p.class_mean_vars), list(p.noise_vars)]
    mus = []
    for (d, s1, _), c in zip(seg_stats, labels):
        m, var = segment_mean_conditional(d, s1, params[0][c], params[1][c], params[2][c])
        mus.append(rng.normal(m, math.sqrt(var)))

    if label_update == "collapsed":
        stats = _class_stats(seg_stats, labels, len(params[0]), hyper.mean_loc)
        evid = [marginal_from_stats(st[0], st[1], st[2], hyper) for st in stats]
        for i in range(k1):
            _collapsed_relabel(i, seg_stats, labels, stats, params, hyper, rng, prior_only,
                               evid)
    elif label_update == "latent":
        st = replace(state, params=ClassParams(*params, mus))
        for i in range(k1):
            st = gibbs_update_label(i, st, hyper, rng, prior_only)
        labels = list(st.labels.labels)
        params = [list(st.params.class_means), list(st.params.class_mean_vars),
                  list(st.params.noise_vars)]
    elif label_update != "identity":
        raise ValueError(f"unknown label_update {label_update!r}")

    nclass = len(params[0])
    members = [[] for _ in range(nclass)]
    for i, c in enumerate(labels):
        members[c].append(i)
    means, cvars, nvars = params
    for v in range(nclass):
        mv = [mus[i] for i in members[v]]
        means[v] = _class_mean_draw(mv, cvars[v], nvars[v], hyper, rng)
    for v in range(nclass):
        cvars[v] = _class_var_draw([mus[i] for i in members[v]], means[v], hyper, rng)
    for v in range(nclass):
        d_v = 0
        ss = 0.0
        for i in members[v]:
            d, s1, s2 = seg_stats[i]
            d_v += d
            ss += _resid_ss(d, s1, s2, mus[i])
        nvars[v] = _noise_var_draw(d_v, ss, hyper, rng)
    return ChainState(state.seg, LabelAssignment(tuple(labels)),
                      ClassParams(means, cvars, nvars, mus))
