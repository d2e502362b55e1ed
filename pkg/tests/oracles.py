"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package; they follow the definitions
directly with plain loops.
"""

import math

import numpy as np


def brute_force_peaks(mags, size, floor_db, cutoff_bin):
    """Neighborhood-max scan with lexicographic tie-breaking."""
    n_rows, n_cols = len(mags), len(mags[0])
    top = max(max(row) for row in mags)
    if top <= 0:
        return []
    floor = top * 10 ** (floor_db / 20)
    (fr, fc) = size
    lo_r, hi_r = fr // 2, fr - fr // 2 - 1
    lo_c, hi_c = fc // 2, fc - fc // 2 - 1
    peaks = []
    for r in range(n_rows):
        for c in range(cutoff_bin, n_cols):
            v = mags[r][c]
            if v <= 0 or v < floor:
                continue
            ok = True
            for rr in range(r - lo_r, r + hi_r + 1):
                for cc in range(c - lo_c, c + hi_c + 1):
                    if not (0 <= rr < n_rows and 0 <= cc < n_cols):
                        continue
                    w = mags[rr][cc]
                    if w > v or (w == v and (rr, cc) < (r, c)):
                        ok = False
            if ok:
                peaks.append((r, c))
    return peaks


def brute_force_pairs(peaks, fanout, max_gap):
    """peaks: (frame, bin) sorted; partners are the next peaks with gap in (0, max_gap]."""
    out = []
    for i, (f_a, b_a) in enumerate(peaks):
        taken = 0
        for f_b, b_b in peaks[i + 1 :]:
            if taken == fanout:
                break
            gap = f_b - f_a
            if 0 < gap <= max_gap:
                out.append((b_a, b_b, gap))
                taken += 1
    return out


def reference_weights(components, k):
    """Window-schedule inverse coefficient-of-variation weights, plain Python."""
    n = len(components)
    l_max = max(2, int(0.1 * k))
    restart = max(2, l_max // 2)
    lengths, l = [], 2
    for _ in range(n):
        lengths.append(l)
        l = l + 1 if l < l_max else restart
    raw = []
    for i, l in enumerate(lengths):
        start = i - l // 2
        window = [components[j] for j in range(start, start + l) if 0 <= j < n]
        mean = sum(window) / len(window)
        var = sum((x - mean) ** 2 for x in window) / len(window)
        raw.append(max(0.0, 1.0 - math.sqrt(var) / max(mean, 1e-9)))
    total = sum(raw)
    if total <= 0:
        return [1.0 / n] * n
    return [r / total for r in raw]


def enumerate_min_edits(ref, hyp):
    """Minimum edit count by walking every alignment path (no memoization)."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    sub = enumerate_min_edits(ref[1:], hyp[1:]) + (ref[0] != hyp[0])
    dele = enumerate_min_edits(ref[1:], hyp) + 1
    ins = enumerate_min_edits(ref, hyp[1:]) + 1
    return min(sub, dele, ins)


def sort_quantile(values, q):
    """Nearest-rank quantile: smallest v with #{x <= v} >= q * n."""
    ordered = sorted(values)
    n = len(ordered)
    for v in ordered:
        if sum(1 for x in ordered if x <= v) >= q * n - 1e-9:
            return v
    return ordered[-1]


def shifted_scan_peaks(mags, size, floor_db, cutoff_bin):
    """Same rule as brute_force_peaks, scanning one neighbour offset at a time.

    Visits every offset of the neighborhood explicitly instead of looping over
    cells, which keeps it fast enough for 100 x 200 matrices.
    """
    mags = np.asarray(mags, dtype=float)
    top = mags.max()
    if top <= 0:
        return []
    floor = top * 10 ** (floor_db / 20)
    n_rows, n_cols = mags.shape
    (fr, fc) = size
    alive = (mags > 0) & (mags >= floor)
    alive[:, :cutoff_bin] = False
    for dr in range(-(fr // 2), fr - fr // 2):
        for dc in range(-(fc // 2), fc - fc // 2):
            if dr == 0 and dc == 0:
                continue
            neighbour = np.full_like(mags, -np.inf)
            r0, r1 = max(0, -dr), min(n_rows, n_rows - dr)
            c0, c1 = max(0, -dc), min(n_cols, n_cols - dc)
            neighbour[r0:r1, c0:c1] = mags[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            earlier = dr < 0 or (dr == 0 and dc < 0)
            alive &= ~((neighbour > mags) | ((neighbour == mags) & earlier))
    return [tuple(map(int, rc)) for rc in np.argwhere(alive)]
