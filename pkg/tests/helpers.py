"""Independent oracles shared by module and acceptance tests.

Everything here recomputes results from first principles (O(n^2) scans,
union-find, pair counting) so the implementations under test are checked
against a second, unrelated route.
"""

import numpy as np


def brute_force_core_partition(points, eps, min_points):
    """Core flags and the partition of core points into eps-components.

    Connected components are computed with union-find over all core pairs
    within eps; returns (core_mask, frozenset of frozensets of core indices).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool), frozenset()
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= eps * eps
    core = within.sum(axis=1) >= min_points

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    core_idx = np.flatnonzero(core)
    for i in core_idx:
        for j in core_idx:
            if j > i and within[i, j]:
                parent[find(int(i))] = find(int(j))

    groups = {}
    for i in core_idx:
        groups.setdefault(find(int(i)), set()).add(int(i))
    return core, frozenset(frozenset(g) for g in groups.values())


def core_partition_from_labels(labels, core_mask):
    """Partition of core points implied by a label array."""
    groups = {}
    for i, is_core in enumerate(core_mask):
        if is_core:
            groups.setdefault(int(labels[i]), set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


def pairwise_auc(scores, labels):
    """Mann-Whitney AUC by explicit pair counting over (positive, negative)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    pos = s[y]
    neg = s[~y]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both classes")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def quantile_oracle_kept(values, one_sided=False):
    """IQR-filter survivors recomputed with numpy's linear-interpolation quantiles."""
    arr = np.asarray(values, dtype=float)
    q1 = np.quantile(arr, 0.25, method="linear")
    q3 = np.quantile(arr, 0.75, method="linear")
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    return {
        i for i, v in enumerate(arr) if v <= hi and (one_sided or v >= lo)
    }


def random_well_conditioned_homography(rng):
    """Similarity plus a small projective perturbation; comfortably invertible."""
    angle = rng.uniform(0, 2 * np.pi)
    scale = rng.uniform(0.5, 2.0)
    tx, ty = rng.uniform(-50, 50, 2)
    c, s = np.cos(angle), np.sin(angle)
    h = np.array(
        [
            [scale * c, -scale * s, tx],
            [scale * s, scale * c, ty],
            [rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 1.0],
        ]
    )
    return h
