"""Diagnostics over completed runs: interclass-distance histograms, paired
accuracy correlation, and misclassification overlap between prediction logs.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

N_BINS = 50


@dataclass
class DistanceHistogram:
    bin_edges: np.ndarray  # N_BINS + 1 edges over [0, observed max]
    counts: np.ndarray
    mean_distance: float
    model_tag: str
    section_tag: str  # "train" | "val"

    def probabilities(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)


def interclass_distances(
    embeddings: np.ndarray,
    labels,
    max_pairs: int,
    rng: np.random.Generator,
    model_tag: str = "",
    section_tag: str = "",
) -> DistanceHistogram:
    """Squared Euclidean distances between differing-label pairs, binned."""
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValueError("interclass distances need at least 2 classes")
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    differ = labels[iu] != labels[ju]
    iu, ju = iu[differ], ju[differ]
    if iu.size > max_pairs:
        keep = rng.choice(iu.size, size=max_pairs, replace=False)
        iu, ju = iu[keep], ju[keep]
    diffs = x[iu] - x[ju]
    dists = np.sum(diffs * diffs, axis=1)
    edges = np.linspace(0.0, float(dists.max()), N_BINS + 1)
    counts, _ = np.histogram(dists, bins=edges)
    return DistanceHistogram(
        bin_edges=edges,
        counts=counts,
        mean_distance=float(dists.mean()),
        model_tag=model_tag,
        section_tag=section_tag,
    )


def wasserstein1(a: DistanceHistogram, b: DistanceHistogram) -> float:
    """1-Wasserstein distance between two binned distance distributions.

    Treats each histogram as point masses at bin centers and integrates the
    absolute CDF gap over the merged support.
    """
    centers_a = 0.5 * (a.bin_edges[:-1] + a.bin_edges[1:])
    centers_b = 0.5 * (b.bin_edges[:-1] + b.bin_edges[1:])
    pa, pb = a.probabilities(), b.probabilities()
    grid = np.unique(np.concatenate([centers_a, centers_b]))
    cum_a = np.concatenate([[0.0], np.cumsum(pa)])
    cum_b = np.concatenate([[0.0], np.cumsum(pb)])
    cdf_a = cum_a[np.searchsorted(centers_a, grid, side="right")]
    cdf_b = cum_b[np.searchsorted(centers_b, grid, side="right")]
    widths = np.diff(grid)
    return float(np.sum(np.abs(cdf_a - cdf_b)[:-1] * widths))


def pearson(x, y) -> tuple:
    """Pearson r with a two-sided p-value from the t approximation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ValueError("pearson needs two equal-length vectors of length >= 3")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = np.sqrt(np.sum(xd * xd))
    sy = np.sqrt(np.sum(yd * yd))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson undefined for zero-variance input")
    r = float(np.sum(xd * yd) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    n = x.size
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(sp_stats.t.sf(abs(t), df=n - 2))
    return r, p


def misclassification_overlap(log_a, log_b):
    """Fraction of model-a errors that model b got right.

    Logs are iterables of (episode, query, true, predicted). Returns None
    (reported as "n/a") when model a made no errors.
    """
    map_a = {(e, q): (t, p) for e, q, t, p in log_a}
    map_b = {(e, q): (t, p) for e, q, t, p in log_b}
    if map_a.keys() != map_b.keys():
        raise ValueError("prediction logs cover different (episode, query) keys")
    wrong_a = [k for k, (t, p) in map_a.items() if p != t]
    if not wrong_a:
        return None
    rescued = sum(1 for k in wrong_a if map_b[k][1] == map_b[k][0])
    return rescued / len(wrong_a)
