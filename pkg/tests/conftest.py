"""Shared independent oracles for the test-suite."""

import itertools
import math

import numpy as np
import pytest

from cpdp.model import Hyperparams, LabelAssignment, Segmentation, TimeSeries, log_joint_collapsed


def set_partitions(n):
    """All partitions of ``n`` items as restricted-growth label tuples."""
    if n == 0:
        yield ()
        return

    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for c in range(top + 2):
            yield from rec(prefix + [c], max(top, c))

    yield from rec([0], 0)


def enumerate_posterior(x, hyper, k_max):
    """Normalised exp(log_joint_collapsed) over all (change points, partitions)."""
    ts = x if isinstance(x, TimeSeries) else TimeSeries(x)
    n = ts.n
    logp = {}
    for k in range(k_max + 1):
        for cps in itertools.combinations(range(2, n), k):
            seg = Segmentation(cps, n)
            for lab in set_partitions(k + 1):
                logp[(cps, lab)] = log_joint_collapsed(ts, seg, LabelAssignment(lab), hyper)
    top = max(logp.values())
    z = math.fsum(math.exp(v - top) for v in logp.values())
    return {key: math.exp(v - top) / z for key, v in logp.items()}


def marginal_over_labels(post):
    out = {}
    for (cps, _), p in post.items():
        out[cps] = out.get(cps, 0.0) + p
    return out


def tv_distance(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(samples, key):
    out = {}
    for s in samples:
        k = key(s)
        out[k] = out.get(k, 0) + 1
    return {k: v / len(samples) for k, v in out.items()}


@pytest.fixture
def hyper():
    return Hyperparams()


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE = []


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
