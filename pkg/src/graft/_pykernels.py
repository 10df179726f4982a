"""Pure-Python/numpy fallbacks for the compiled kernels in ``_ckernels.pyx``."""

import numpy as np


def pav_decreasing(y, w):
    n = len(y)
    sums: list[float] = []
    weights: list[float] = []
    starts: list[int] = []
    for i in range(n):
        sums.append(float(w[i]) * float(y[i]))
        weights.append(float(w[i]))
        starts.append(i)
        while len(sums) > 1 and sums[-2] / weights[-2] < sums[-1] / weights[-1]:
            s, wt = sums.pop(), weights.pop()
            starts.pop()
            sums[-1] += s
            weights[-1] += wt

    fitted = np.empty(n)
    block_ids = np.empty(n, dtype=np.intp)
    bounds = starts + [n]
    for b in range(len(starts)):
        fitted[bounds[b]:bounds[b + 1]] = sums[b] / weights[b]
        block_ids[bounds[b]:bounds[b + 1]] = b
    return fitted, block_ids


def concordance_counts(scores, times, events, chunk=512):
    scores = np.asarray(scores)
    times = np.asarray(times)
    rows = np.flatnonzero(np.asarray(events) != 0)
    concordant = tied = comparable = 0
    for start in range(0, len(rows), chunk):
        idx = rows[start:start + chunk]
        later = times[None, :] > times[idx, None]
        diff = scores[None, :] - scores[idx, None]
        comparable += int(later.sum())
        concordant += int((later & (diff > 0)).sum())
        tied += int((later & (diff == 0)).sum())
    return concordant, tied, comparable
