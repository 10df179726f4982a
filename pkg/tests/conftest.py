"""Independent reference implementations shared by the test modules.

These are deliberately slow and literal so they can serve as oracles.
"""

import itertools

import numpy as np
import pytest


def brute_pav_nonincreasing(y, w=None):
    """Projection onto the non-increasing cone by enumerating every block partition.

    For each of the 2^(m-1) contiguous partitions, take block (weighted) means;
    keep the partitions whose means are non-increasing and return the one with
    the smallest squared error.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    m = len(y)
    best, best_err = None, np.inf
    for cuts in itertools.product((0, 1), repeat=m - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [m]
        fit = np.empty(m)
        means = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            mu = np.dot(w[a:b], y[a:b]) / w[a:b].sum()
            fit[a:b] = mu
            means.append(mu)
        if any(means[i] < means[i + 1] - 1e-12 for i in range(len(means) - 1)):
            continue
        err = np.dot(w, (y - fit) ** 2)
        if err < best_err - 1e-14:
            best, best_err = fit, err
    return best


def brute_c_index(scores, times, events):
    num = den = 0.0
    n = len(scores)
    for i in range(n):
        if events[i] != 1:
            continue
        for j in range(n):
            if times[i] < times[j]:
                den += 1
                if scores[i] < scores[j]:
                    num += 1
                elif scores[i] == scores[j]:
                    num += 0.5
    return num / den


def km_by_hand(times, events):
    """Product-limit by walking through the distinct times one at a time."""
    out_t, out_s = [], []
    s = 1.0
    for t in sorted(set(times)):
        at_risk = sum(1 for u in times if u >= t)
        d = sum(1 for u, e in zip(times, events) if u == t and e == 1)
        if d:
            s *= 1.0 - d / at_risk
            out_t.append(t)
            out_s.append(s)
    return out_t, out_s


def direct_ibs(S, times, events, grid, train_times, train_events):
    """Double loop IPCW Brier score with a trapezoid average; G refitted by hand."""
    g_t, g_s = km_by_hand(list(train_times), [1 - e for e in train_events])

    def G(t, left=False):
        val = 1.0
        for tt, ss in zip(g_t, g_s):
            if tt < t or (tt == t and not left):
                val = ss
        return val

    cols = [k for k, t in enumerate(grid) if G(t) > 0]
    pts, bs = [], []
    for k in cols:
        t = grid[k]
        total = 0.0
        for i in range(len(times)):
            s = S[i][k]
            if times[i] <= t and events[i] == 1:
                total += s * s / G(times[i], left=True)
            elif times[i] > t:
                total += (1 - s) ** 2 / G(t)
        pts.append(t)
        bs.append(total / len(times))
    area = 0.0
    for k in range(len(pts) - 1):
        area += 0.5 * (bs[k] + bs[k + 1]) * (pts[k + 1] - pts[k])
    return area / (pts[-1] - pts[0])


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def central_diff(f, x, h=1e-5):
    """Central finite differences of scalar f with respect to every entry of array x (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
