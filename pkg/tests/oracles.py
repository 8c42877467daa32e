"""Independent oracles the test suite checks the implementation against.

These deliberately avoid the production code paths:

- :func:`kde_mode_oracle` finds the modes and basins of the flat-kernel mean
  shift's shadow density (the Epanechnikov KDE) by exhaustively enumerating
  its piecewise-quadratic segments (breakpoints at every ``x +- h``), instead
  of iterating shift updates;
- :func:`sign_fraction_oracle` signs a sentiment triple by direct exact
  fraction comparison with :class:`fractions.Fraction`;
- :func:`binomial_negative_probability` enumerates binomial outcomes against
  the signing threshold without scipy.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def kde_mode_oracle(values, bandwidth):
    """Cluster labels for 1-D points under the shadow-KDE reading.

    The density ``f(y) = sum_i max(0, 1 - ((y - x_i)/h)^2)`` is piecewise
    quadratic between the sorted breakpoints ``x_i +- h``.  Each segment's
    vertex (mean of the active points) is a local maximum when it falls
    inside the segment; local minima sit at breakpoints where the one-sided
    derivatives flip from negative to positive, plus the midpoints of
    zero-density gaps.  Every input point is assigned the mode of its basin,
    and modes closer than ``h/2`` merge exactly like the implementation's
    converged-position merge.

    Returns (labels, n_clusters); raises AssertionError if the computed
    mode/minimum structure fails to interleave (degenerate tie cases).
    """
    x = np.asarray(values, dtype=float)
    h = float(bandwidth)
    events: dict[float, list] = {}
    for xi in x:
        e = events.setdefault(xi - h, [0, 0.0])
        e[0] += 1
        e[1] += xi
        e = events.setdefault(xi + h, [0, 0.0])
        e[0] -= 1
        e[1] -= xi
    bps = sorted(events)
    segments = []  # (a, b, m, s) with m points of sum s active on (a, b)
    m, s = 0, 0.0
    for j in range(len(bps) - 1):
        dm, ds = events[bps[j]]
        m += dm
        s += ds
        segments.append((bps[j], bps[j + 1], m, s))

    modes: list[float] = []
    minima: list[float] = []
    for j, (a, b, m, s) in enumerate(segments):
        if m <= 0:
            minima.append(0.5 * (a + b))  # zero-density gap splits basins
            continue
        v = s / m
        if a < v < b:
            modes.append(v)
    for j in range(1, len(segments)):
        a0, b0, m0, s0 = segments[j - 1]
        a1, b1, m1, s1 = segments[j]
        if m0 == 0 or m1 == 0:
            continue
        boundary = a1
        left_slope = -(m0 * boundary - s0)
        right_slope = -(m1 * boundary - s1)
        if left_slope < 0 and right_slope > 0:
            minima.append(boundary)

    minima = sorted(minima)
    modes = sorted(modes)
    assert len(modes) == len(minima) + 1, "mode/minimum alternation failed"
    seq: list[float] = []
    for i, mode in enumerate(modes):
        seq.append(mode)
        if i < len(minima):
            seq.append(minima[i])
    assert all(seq[i] < seq[i + 1] for i in range(len(seq) - 1)), "interleaving failed"

    basin = np.searchsorted(np.asarray(minima), x)
    tops = np.asarray(modes)[basin]

    order = np.argsort(tops, kind="stable")
    labels = np.empty(len(x), dtype=int)
    cluster, prev = 0, None
    for idx in order:
        if prev is not None and tops[idx] - prev >= h / 2:
            cluster += 1
        labels[idx] = cluster
        prev = tops[idx]
    return labels, cluster + 1


def canonical_partition(labels) -> tuple:
    """Order-free representation of a clustering for equality checks."""
    groups: dict[int, list[int]] = {}
    for index, label in enumerate(labels):
        groups.setdefault(int(label), []).append(index)
    return tuple(sorted(tuple(g) for g in groups.values()))


def sign_fraction_oracle(
    positive: int,
    neutral: int,
    negative: int,
    threshold=Fraction(17, 100),
    neutral_in_denominator: bool = True,
):
    """Exact-rational signing decision; None when the denominator is empty."""
    denominator = positive + negative + (neutral if neutral_in_denominator else 0)
    if denominator == 0:
        return None
    return "+" if Fraction(negative, denominator) <= threshold else "-"


def binomial_negative_probability(count: int, p: float, threshold: float = 0.17) -> float:
    """P(relationship signed negative) by direct binomial enumeration."""
    flip = next((j for j in range(count + 1) if j / count > threshold), count + 1)
    if flip > count:
        return 0.0
    total = 0.0
    for j in range(flip, count + 1):
        total += math.comb(count, j) * p**j * (1.0 - p) ** (count - j)
    return total


def grid_density_modes(values, bandwidth, n_grid=200_001):
    """Mode count by dense-grid search over the same KDE (coarse cross-check).

    Grid sampling cannot resolve razor-thin valleys, so this is only used as
    a sanity cross-check of :func:`kde_mode_oracle` on well-separated data.
    """
    x = np.asarray(values, dtype=float)
    h = float(bandwidth)
    lo, hi = x.min() - h, x.max() + h
    grid = np.linspace(lo, hi, n_grid)
    u = (grid[:, None] - x[None, :]) / h
    density = np.maximum(0.0, 1.0 - u * u).sum(axis=1)
    interior = (density[1:-1] > density[:-2]) & (density[1:-1] >= density[2:])
    return grid[1:-1][interior & (density[1:-1] > 0)]
