"""Unsigned ego networks: 1-D mean shift over contact frequencies and the
cumulative concentric circles built from its clusters.

Algorithm conventions (pinned for determinism and for oracle equivalence):

- flat (uniform) kernel; a point belongs to the window iff its distance is
  strictly below the bandwidth (points at exactly the bandwidth carry zero
  kernel weight, matching the shadow-density reading of the flat kernel);
- shift update = mean of in-window points; convergence when every shift is
  below ``1e-4 * bandwidth``, hard stop at 300 iterations;
- converged positions are merged into one mode while consecutive gaps are
  below ``bandwidth / 2``, so surviving modes are at least that far apart.

Bandwidth defaults to the quantile-kNN rule: with ``k = ceil(0.3 * n)``, the
mean over points of the distance to each point's k-th nearest neighbour.

Clustering operates on log frequencies by default.  Contact frequencies in
these networks live on a multiplicative scale (circle strength decays
geometrically), and equal-ratio bands are only equal-width after the log
transform; raw-space clustering with a single global bandwidth reliably fuses
the outermost circles.  ``log_frequency=False`` restores raw-space clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from senm.records import Cluster, DataError, EgoNetwork, Relationship

DEFAULT_QUANTILE = 0.3
MAX_ITER = 300
TOL_FACTOR = 1e-4


class EmptyNetworkError(DataError):
    """An ego with zero surviving relationships has no network."""


@dataclass(frozen=True)
class MeanShiftCluster:
    """A mode of the frequency density and the input indices it claims."""

    mode: float
    indices: tuple[int, ...]


def auto_bandwidth(
    values: Sequence[float], quantile: float = DEFAULT_QUANTILE
) -> Optional[float]:
    """Quantile-kNN bandwidth: mean distance to the ``ceil(q*n)``-th neighbour.

    Returns None for degenerate (all-equal) input, in which case the caller
    forms a single cluster.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("auto_bandwidth needs at least 2 values")
    xs = np.sort(x)
    if xs[0] == xs[-1]:
        return None
    k = math.ceil(quantile * n)
    k = min(max(k, 1), n - 1)
    if n <= 512:
        # compute on the sorted values so the reduction order (and thus the
        # floating-point result) is independent of the input permutation
        dist = np.abs(xs[:, None] - xs[None, :])
        dist.sort(axis=1)
        kth = dist[:, k]  # column 0 is the self-distance
    else:
        # for sorted data the k nearest neighbours lie in a window of k+1
        # consecutive values; the k-th NN distance is the smallest window
        # radius over the k+1 placements
        m = np.full(n, np.inf)
        for shift in range(k + 1):
            lo = np.arange(n) - shift
            hi = lo + k
            valid = (lo >= 0) & (hi < n)
            radius = np.maximum(xs[hi[valid]] - xs[np.arange(n)[valid]],
                                xs[np.arange(n)[valid]] - xs[lo[valid]])
            m[valid] = np.minimum(m[valid], radius)
        kth = m
    bandwidth = float(kth.mean())
    if bandwidth <= 0:
        return None
    if float(kth.max()) == float(kth.min()):
        # every point's k-th neighbour sits at exactly the same distance (two
        # points, duplicated value pairs, equally spaced grids): the bandwidth
        # would coincide bit-for-bit with a realized distance and strict-window
        # membership would hinge on rounding.  Nudge up a few ulps so boundary
        # neighbours are included consistently, keeping results deterministic
        # and scale-stable.
        bandwidth *= 1.0 + 2.0**-50
    return bandwidth


def mean_shift_1d(
    values: Sequence[float],
    bandwidth: Optional[float] = None,
    quantile: float = DEFAULT_QUANTILE,
) -> list[MeanShiftCluster]:
    """Cluster 1-D values with flat-kernel mean shift.

    Every input index lands in exactly one cluster; clusters are returned in
    ascending mode order.  ``bandwidth=None`` selects :func:`auto_bandwidth`;
    degenerate input (a single value, or all values equal) forms one cluster.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("mean_shift_1d needs at least one value")
    if bandwidth is not None and bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if n == 1 or xs[0] == xs[-1]:
        return [MeanShiftCluster(float(xs[0]), tuple(range(n)))]
    if bandwidth is None:
        bandwidth = auto_bandwidth(xs, quantile=quantile)
        if bandwidth is None:
            return [MeanShiftCluster(float(xs[0]), tuple(range(n)))]

    prefix = np.concatenate([[0.0], np.cumsum(xs)])
    pos = xs.copy()
    tol = TOL_FACTOR * bandwidth
    for _ in range(MAX_ITER):
        lo = np.searchsorted(xs, pos - bandwidth, side="right")
        hi = np.searchsorted(xs, pos + bandwidth, side="left")
        count = hi - lo
        empty = count == 0  # only reachable at floating-point knife edges
        count = np.where(empty, 1, count)
        new = (prefix[hi] - prefix[lo]) / count
        new = np.where(empty, pos, new)
        if float(np.max(np.abs(new - pos))) < tol:
            pos = new
            break
        pos = new

    # chain-merge converged positions (sorted) while gaps stay under h/2
    half = bandwidth / 2.0
    labels = np.empty(n, dtype=np.int64)
    rank = np.argsort(pos, kind="stable")
    current = 0
    prev = pos[rank[0]]
    labels[rank[0]] = 0
    for r in rank[1:]:
        if pos[r] - prev >= half:
            current += 1
        labels[r] = current
        prev = pos[r]

    clusters: list[MeanShiftCluster] = []
    for c in range(current + 1):
        members = np.nonzero(labels == c)[0]
        mode = float(pos[members].mean())
        original = np.sort(order[members])
        clusters.append(MeanShiftCluster(mode, tuple(int(i) for i in original)))
    for a, b in zip(clusters, clusters[1:]):
        if not a.mode < b.mode:
            raise AssertionError("mean shift modes not strictly ordered")
    return clusters


def build_ego_network(
    rels: Sequence[Relationship],
    log_frequency: bool = True,
    bandwidth: Optional[float] = None,
    quantile: float = DEFAULT_QUANTILE,
) -> EgoNetwork:
    """Cluster one ego's relationships by contact frequency into circles.

    Clusters are ordered by descending mean contact frequency and circles are
    their cumulative unions.  An explicit ``bandwidth`` is interpreted in the
    clustering space (log frequencies unless ``log_frequency=False``).
    """
    if not rels:
        raise EmptyNetworkError("ego has no relationships to cluster")
    ego_id = rels[0].ego_id
    freqs = np.empty(len(rels))
    for i, rel in enumerate(rels):
        if rel.ego_id != ego_id:
            raise ValueError("relationships span multiple egos")
        if rel.contact_frequency <= 0:
            raise ValueError(
                f"non-positive contact frequency for alter {rel.alter_id!r}"
            )
        freqs[i] = rel.contact_frequency

    values = np.log(freqs) if log_frequency else freqs
    ms_clusters = mean_shift_1d(values, bandwidth=bandwidth, quantile=quantile)

    keyed = []
    for cluster in ms_clusters:
        # fsum over sorted values: exactly rounded, so the cluster mean is
        # identical no matter how the relationships were ordered
        member_freqs = sorted(float(freqs[i]) for i in cluster.indices)
        mean_freq = math.fsum(member_freqs) / len(member_freqs)
        keyed.append((mean_freq, cluster))
    keyed.sort(key=lambda kc: -kc[0])
    for (fa, _), (fb, _) in zip(keyed, keyed[1:]):
        if not fa > fb:
            raise AssertionError("cluster mean frequencies not strictly decreasing")

    clusters = []
    for mean_freq, cluster in keyed:
        members = sorted(
            (rels[i] for i in cluster.indices),
            key=lambda r: (-r.contact_frequency, r.alter_id),
        )
        clusters.append(Cluster(mode=mean_freq, alter_ids=[r.alter_id for r in members]))
    return EgoNetwork(ego_id=ego_id, clusters=clusters)
