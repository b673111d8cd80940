"""Evaluation engine: embedding tables, method wiring, paired episode scoring.

Episode streams are a pure function of (eval seed, split section, grid cell),
so every method is scored on identical episodes, which is what makes the
cross-model correlation and misclassification-overlap analyses meaningful.

Image-query methods read query embeddings exclusively from the image table;
only the explicitly marked shape-reference method resolves query point
clouds, through its own table lookup.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .encoders import ImageEncoder, PointEncoder
from .episodes import (
    NORMALIZATION_MODES,
    EvalReport,
    logistic_episode_classify,
    nearest_centroid_classify,
    score_episodes,
)
from .errors import ConfigError


@dataclass(frozen=True)
class MethodSpec:
    name: str
    support_source: str  # "image" | "cloud" | "average"
    query_source: str  # "image" | "cloud"
    classifier: str = "centroid"  # "centroid" (three modes) | "logistic"
    oracle: bool = False

    def __post_init__(self):
        if self.query_source == "cloud" and self.support_source != "cloud":
            raise ConfigError("cloud queries are only valid for the shape reference")

    @property
    def shape_reference(self) -> bool:
        return self.query_source == "cloud"

    @property
    def variants(self) -> tuple:
        return NORMALIZATION_MODES if self.classifier == "centroid" else ("logistic",)


class EmbeddingTables:
    """Precomputed embeddings for one model over one split section."""

    def __init__(self, image=None, cloud=None, base_mean_image=None,
                 base_mean_cloud=None, base_mean_combined=None):
        self.image = image  # {(instance_id, view): vector}
        self.cloud = cloud  # {instance_id: vector}
        self.base_mean_image = base_mean_image
        self.base_mean_cloud = base_mean_cloud
        self.base_mean_combined = base_mean_combined

    def base_mean(self, support_source: str):
        return {
            "image": self.base_mean_image,
            "cloud": self.base_mean_cloud,
            "average": self.base_mean_combined,
        }[support_source]


def build_tables(
    dataset: Dataset,
    section_class_ids,
    base_class_ids,
    image_encoder: ImageEncoder = None,
    point_encoder: PointEncoder = None,
) -> EmbeddingTables:
    """Embed every (instance, view) image and instance cloud the section needs.

    Base-class embeddings feed the train-mean used by centered normalization.
    """
    def instances_of(classes):
        out = []
        for cid in sorted(classes):
            out.extend(dataset.instances_of(cid))
        return out

    section_instances = instances_of(section_class_ids)
    base_instances = instances_of(base_class_ids)

    image_table = None
    base_mean_image = None
    if image_encoder is not None:
        keys, images = [], []
        for iid in section_instances:
            for v in range(dataset.n_views(iid)):
                keys.append((iid, v))
                images.append(dataset.load_image(iid, v))
        vecs = image_encoder.embed_many(images)
        image_table = dict(zip(keys, vecs))
        base_imgs = [
            dataset.load_image(iid, v)
            for iid in base_instances
            for v in range(dataset.n_views(iid))
        ]
        base_mean_image = image_encoder.embed_many(base_imgs).mean(axis=0)

    cloud_table = None
    base_mean_cloud = None
    if point_encoder is not None:
        vecs = point_encoder.embed_many(
            [dataset.load_points(iid) for iid in section_instances]
        )
        cloud_table = dict(zip(section_instances, vecs))
        base_mean_cloud = point_encoder.embed_many(
            [dataset.load_points(iid) for iid in base_instances]
        ).mean(axis=0)

    combined = None
    if base_mean_image is not None and base_mean_cloud is not None:
        combined = 0.5 * (base_mean_image + base_mean_cloud)
    return EmbeddingTables(
        image=image_table,
        cloud=cloud_table,
        base_mean_image=base_mean_image,
        base_mean_cloud=base_mean_cloud,
        base_mean_combined=combined,
    )


def _episode_arrays(episode, method: MethodSpec, tables: EmbeddingTables):
    """Support matrix/labels and query matrix for one episode under a method."""
    if method.support_source == "image":
        s = np.stack([tables.image[(x.instance_id, x.view)] for x in episode.supports])
        s_labels = np.array([x.slot for x in episode.supports])
    elif method.support_source == "cloud":
        s = np.stack([tables.cloud[x.instance_id] for x in episode.supports])
        s_labels = np.array([x.slot for x in episode.supports])
    elif method.support_source == "average":
        # each multimodal support contributes two vectors with the same label
        img = np.stack([tables.image[(x.instance_id, x.view)] for x in episode.supports])
        cld = np.stack([tables.cloud[x.instance_id] for x in episode.supports])
        s = np.concatenate([img, cld])
        s_labels = np.array([x.slot for x in episode.supports] * 2)
    else:
        raise ConfigError(f"unknown support source {method.support_source!r}")

    if method.query_source == "image":
        q = np.stack([tables.image[(x.instance_id, x.view)] for x in episode.queries])
    else:
        q = np.stack([tables.cloud[x.instance_id] for x in episode.queries])
    return s, s_labels, q


def evaluate_method(
    episodes,
    method: MethodSpec,
    tables: EmbeddingTables,
    fingerprint: str = "",
    threads: int = 1,
) -> dict:
    """Score paired episodes; returns {variant: EvalReport}."""
    base_mean = tables.base_mean(method.support_source)

    def predict(episode):
        s, s_labels, q = _episode_arrays(episode, method, tables)
        out = {}
        if method.classifier == "centroid":
            for mode in NORMALIZATION_MODES:
                out[mode] = nearest_centroid_classify(
                    s, s_labels, q, mode=mode, base_mean=base_mean
                )
        else:
            out["logistic"] = logistic_episode_classify(s, s_labels, q)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(predict, episodes))
        it = iter(results)
        scored = score_episodes(episodes, lambda _ep: next(it), method.variants)
    else:
        scored = score_episodes(episodes, predict, method.variants)

    reports = {}
    for variant, (accs, log) in scored.items():
        reports[variant] = EvalReport.from_scores(
            method=method.name,
            variant=variant,
            n_way=episodes[0].n_way,
            m_shot=episodes[0].m_shot,
            accuracies=accs,
            predictions=log,
            fingerprint=fingerprint,
            oracle=method.oracle,
        )
    return reports


def best_variant(reports: dict) -> str:
    """Best-of-three selection: highest mean accuracy, ties by variant order."""
    order = {v: i for i, v in enumerate(NORMALIZATION_MODES)}
    return max(
        reports, key=lambda v: (reports[v].mean_accuracy, -order.get(v, 99))
    )
