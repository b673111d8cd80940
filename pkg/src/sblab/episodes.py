"""Split management, episode sampling, low-shot classifiers, and reports.

Splits are class-disjoint. Episodes carry (instance, view) references:
supports conceptually have both modalities, queries are image-only — the
Episode type has no query point-cloud field, and only the explicitly
sanctioned shape-reference method resolves query clouds through a separate
lookup. Classification rules: nearest centroid under three normalization
modes, multimodal averaged prototypes, and per-episode logistic regression.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .rng import rng_from

NORMALIZATION_MODES = ("none", "l2", "l2_centered")


# -- splits -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_classes: tuple
    val_classes: tuple
    test_classes: tuple
    seed: int

    def __post_init__(self):
        sections = [set(self.train_classes), set(self.val_classes), set(self.test_classes)]
        total = sum(len(s) for s in sections)
        if len(set().union(*sections)) != total:
            raise ConfigError("split sections must be pairwise disjoint")

    def section(self, name: str) -> tuple:
        return {
            "train": self.train_classes,
            "val": self.val_classes,
            "test": self.test_classes,
        }[name]


def make_splits(dataset, counts, seed: int) -> SplitSpec:
    """Largest-by-instance-count categories to train; rest shuffled to val/test."""
    n_train, n_val, n_test = counts
    cats = dataset.category_ids
    if n_train + n_val + n_test > len(cats):
        raise ConfigError(
            f"split counts {counts} exceed {len(cats)} available categories"
        )
    # descending instance count, category id as the deterministic tie-break
    by_size = sorted(cats, key=lambda c: (-len(dataset.instances_of(c)), c))
    train = tuple(sorted(by_size[:n_train]))
    rest = sorted(by_size[n_train:])
    perm = rng_from(seed, "split").permutation(len(rest))
    shuffled = [rest[i] for i in perm]
    return SplitSpec(
        train_classes=train,
        val_classes=tuple(sorted(shuffled[:n_val])),
        test_classes=tuple(sorted(shuffled[n_val:n_val + n_test])),
        seed=seed,
    )


# -- episodes -----------------------------------------------------------------


@dataclass(frozen=True)
class SupportExample:
    slot: int
    category_id: int
    instance_id: str
    view: int


@dataclass(frozen=True)
class QueryExample:
    # true slot is used only for scoring; classifiers see the image reference
    slot: int
    category_id: int
    instance_id: str
    view: int


@dataclass(frozen=True)
class Episode:
    episode_id: int
    n_way: int
    m_shot: int
    q_queries: int
    class_ids: tuple
    supports: tuple
    queries: tuple


def sample_episode(
    dataset,
    class_ids,
    n_way: int,
    m_shot: int,
    q_queries: int,
    rng: np.random.Generator,
    episode_id: int = 0,
) -> Episode:
    """n_way classes without replacement, then m+q instances per class."""
    pool = sorted(class_ids)
    if len(pool) < n_way:
        raise ValueError(
            f"cannot sample {n_way}-way episode from {len(pool)} classes"
        )
    chosen = [pool[i] for i in rng.choice(len(pool), size=n_way, replace=False)]
    supports, queries = [], []
    need = m_shot + q_queries
    for slot, cid in enumerate(chosen):
        instances = dataset.instances_of(cid)
        if len(instances) < need:
            raise ValueError(
                f"category {cid} ({dataset.category_name(cid)}) has "
                f"{len(instances)} instances, episode needs {need}"
            )
        picks = rng.choice(len(instances), size=need, replace=False)
        for j, p in enumerate(picks):
            iid = instances[p]
            view = int(rng.integers(dataset.n_views(iid)))
            if j < m_shot:
                supports.append(SupportExample(slot, cid, iid, view))
            else:
                queries.append(QueryExample(slot, cid, iid, view))
    return Episode(
        episode_id=episode_id,
        n_way=n_way,
        m_shot=m_shot,
        q_queries=q_queries,
        class_ids=tuple(chosen),
        supports=tuple(supports),
        queries=tuple(queries),
    )


def sample_episode_stream(
    dataset, class_ids, n_way, m_shot, q_queries, count: int, seed: int
) -> list:
    """count episodes with per-episode derived seeds; independent of consumers."""
    return [
        sample_episode(
            dataset,
            class_ids,
            n_way,
            m_shot,
            q_queries,
            rng_from(seed, "episode", n_way, m_shot, k),
            episode_id=k,
        )
        for k in range(count)
    ]


# -- classification rules -------------------------------------------------------


def normalize_features(x: np.ndarray, mode: str, base_mean=None) -> np.ndarray:
    if mode == "none":
        return x
    if mode == "l2_centered":
        if base_mean is None:
            raise ConfigError("l2_centered normalization needs the base-class mean")
        x = x - base_mean
    elif mode != "l2":
        raise ConfigError(f"unknown normalization mode {mode!r}")
    norms = np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), 1e-12)
    return x / norms


def nearest_centroid_classify(
    support_embs: np.ndarray,
    support_labels,
    query_embs: np.ndarray,
    mode: str = "none",
    base_mean=None,
) -> np.ndarray:
    """Per-class centroid of normalized supports; argmin Euclidean distance.

    Ties break to the lowest class slot.
    """
    labels = np.asarray(support_labels)
    supports = normalize_features(np.asarray(support_embs, dtype=np.float64), mode, base_mean)
    queries = normalize_features(np.asarray(query_embs, dtype=np.float64), mode, base_mean)
    slots = np.unique(labels)
    centroids = np.stack([supports[labels == s].mean(axis=0) for s in slots])
    dists = np.linalg.norm(queries[:, None, :] - centroids[None, :, :], axis=2)
    return slots[np.argmin(dists, axis=1)]


def build_prototypes_shape_biased(
    image_embs: np.ndarray, shape_embs: np.ndarray, labels, n_way: int
) -> np.ndarray:
    """Class prototypes as the mean of all 2m support vectors (image + shape)."""
    if shape_embs is None or np.asarray(shape_embs).shape != np.asarray(image_embs).shape:
        raise ValueError("shape-biased prototypes need a point cloud per support")
    labels = np.asarray(labels)
    both = np.concatenate([image_embs, shape_embs])
    both_labels = np.concatenate([labels, labels])
    return np.stack([both[both_labels == s].mean(axis=0) for s in range(n_way)])


def logistic_episode_classify(
    support_embs: np.ndarray,
    support_labels,
    query_embs: np.ndarray,
    reg_strength: float = 1e-3,
    steps: int = 500,
    lr: float = 0.5,
) -> np.ndarray:
    """Multinomial logistic regression by full-batch gradient descent."""
    x = np.asarray(support_embs, dtype=np.float64)
    labels = np.asarray(support_labels)
    n, d = x.shape
    n_classes = int(labels.max()) + 1
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    for _ in range(steps):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(probs)):
            raise NumericError("logistic regression diverged (non-finite loss)")
        resid = (probs - onehot) / n
        w -= lr * (x.T @ resid + reg_strength * w)
        b -= lr * resid.sum(axis=0)
    return np.argmax(np.asarray(query_embs, dtype=np.float64) @ w + b, axis=1)


# -- reporting ----------------------------------------------------------------


def confidence_interval(accuracies) -> tuple:
    """(mean, 1.96 * sample stddev / sqrt(n)); singleton stddev defined as 0."""
    acc = np.asarray(accuracies, dtype=np.float64)
    mean = float(acc.mean())
    if acc.size < 2:
        return mean, 0.0
    half = 1.96 * float(acc.std(ddof=1)) / float(np.sqrt(acc.size))
    return mean, half


@dataclass
class EvalReport:
    method: str
    variant: str
    n_way: int
    m_shot: int
    episode_count: int
    mean_accuracy: float
    ci95: float
    accuracies: list
    predictions: list  # (episode_id, query_index, true_slot, predicted_slot)
    config_fingerprint: str = ""
    oracle: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_scores(cls, method, variant, n_way, m_shot, accuracies, predictions,
                    fingerprint="", oracle=False):
        mean, ci = confidence_interval(accuracies)
        return cls(
            method=method,
            variant=variant,
            n_way=n_way,
            m_shot=m_shot,
            episode_count=len(accuracies),
            mean_accuracy=mean,
            ci95=ci,
            accuracies=[float(a) for a in accuracies],
            predictions=[tuple(p) for p in predictions],
            config_fingerprint=fingerprint,
            oracle=oracle,
        )


def score_episodes(episodes, predict, variants) -> dict:
    """Run a per-episode predictor and collect accuracy + prediction logs.

    predict(episode) returns {variant: predicted slots}. Returns
    {variant: (accuracies, predictions)} assembled in episode order.
    """
    out = {v: ([], []) for v in variants}
    for ep in episodes:
        results = predict(ep)
        truth = np.array([q.slot for q in ep.queries])
        for variant in variants:
            preds = np.asarray(results[variant])
            acc, log = out[variant]
            acc.append(float(np.mean(preds == truth)))
            for qi, (t, p) in enumerate(zip(truth, preds)):
                log.append((ep.episode_id, qi, int(t), int(p)))
    return out
