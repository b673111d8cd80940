"""Training procedures.

Shape-embedding training: minibatch cross-entropy over the point encoder
plus a linear head on augmented clouds, validated each epoch by cosine
nearest-centroid episodes on the validation classes, checkpointing the best.

Image alignment: with the point encoder frozen, precompute one unaugmented
shape embedding per training instance and minimize
    w1 * mean ||phi_i - phi_p||^2
  + w2 * mean over unordered instance pairs (d(phi_p^k, phi_p^l) - d(phi_i^k, phi_i^l))^2
with d = squared Euclidean. Validation embeds supports as the elementwise
average of shape and image embeddings and queries as image embeddings only.

Also here: the image-only cross-entropy baseline, the joint triplet
baseline (non-squared Euclidean on L2-normalized embeddings, in-batch
negatives), and the oracle variant that aligns over every split behind an
explicit acknowledgment flag.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import Dataset
from .encoders import (
    ClassifierHead,
    ImageEncoder,
    ImageEncoderConfig,
    PointEncoder,
    PointEncoderConfig,
    load_param_dict,
    params_to_dict,
)
from .errors import ConfigError
from .numerics import (
    Optimizer,
    OptimizerConfig,
    Tensor,
    concat_rows,
    euclid_dist_rows,
    l2_normalize,
    l2_normalize_rows,
    load_params,
    matmul,
    relu,
    reshape,
    save_params,
    slice_rows,
    softmax_cross_entropy,
    sum_,
    transpose2d,
)
from .rng import rng_from
from .shapegen import OFF, AugmentPolicy, augment_pointcloud


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    batches_per_epoch: int = 0  # 0 = one pass over the instances
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    w1: float = 1.0
    w2: float = 1.0
    val_episodes: int = 40
    val_n_way: int = 5
    val_m_shot: int = 1
    val_q_queries: int = 10
    seed: int = 0
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ConfigError("loss weights must be nonnegative")


@dataclass
class TripletConfig:
    margin: float = 0.1

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError(f"triplet margin must be positive, got {self.margin}")


@dataclass
class Checkpoint:
    params: dict
    best_val_accuracy: float
    epoch: int
    method: str = ""
    oracle: bool = False

    def save(self, path):
        path = Path(path)
        save_params(path, self.params)
        meta = {
            "best_val_accuracy": self.best_val_accuracy,
            "epoch": self.epoch,
            "method": self.method,
            "oracle": self.oracle,
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(meta, sort_keys=True, indent=1)
        )

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        params = load_params(path)
        meta_path = path.with_suffix(path.suffix + ".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(
            params=params,
            best_val_accuracy=meta.get("best_val_accuracy", float("nan")),
            epoch=meta.get("epoch", -1),
            method=meta.get("method", ""),
            oracle=meta.get("oracle", False),
        )


# -- losses -------------------------------------------------------------------


def loss_align_l1(phi_i: Tensor, phi_p: np.ndarray) -> Tensor:
    """Mean squared Euclidean distance to the frozen shape embeddings."""
    targets = np.asarray(phi_p, dtype=np.float64)
    if phi_i.data.shape != targets.shape or phi_i.data.ndim != 2:
        raise ValueError(
            f"alignment loss dimension mismatch: {phi_i.data.shape} vs {targets.shape}"
        )
    if phi_i.data.shape[0] == 0:
        raise ValueError("alignment loss over an empty batch")
    diff = phi_i - targets
    return sum_(diff * diff) * (1.0 / phi_i.data.shape[0])


def _pairwise_sq_dists(phi: Tensor) -> Tensor:
    sq = sum_(phi * phi, axis=1, keepdims=True)
    gram = matmul(phi, transpose2d(phi))
    return sq + transpose2d(sq) - 2.0 * gram


def loss_align_pairwise(phi_i: Tensor, phi_p: np.ndarray) -> Tensor:
    """Match image pairwise squared distances to the shape-space ones.

    Averages (d_p - d_i)^2 over the |B|(|B|-1)/2 unordered distinct pairs.
    """
    targets = np.asarray(phi_p, dtype=np.float64)
    if phi_i.data.shape != targets.shape or phi_i.data.ndim != 2:
        raise ValueError(
            f"pairwise loss dimension mismatch: {phi_i.data.shape} vs {targets.shape}"
        )
    b = phi_i.data.shape[0]
    if b < 2:
        raise ValueError(f"pairwise loss needs at least 2 instances, got {b}")
    diff2 = targets[:, None, :] - targets[None, :, :]
    target_d = np.sum(diff2 * diff2, axis=2)
    image_d = _pairwise_sq_dists(phi_i)
    mask = np.triu(np.ones((b, b)), k=1)
    gap = (target_d - image_d) * mask
    n_pairs = b * (b - 1) // 2
    return sum_(gap * gap) * (1.0 / n_pairs)


def _as_row(v) -> Tensor:
    t = v if isinstance(v, Tensor) else Tensor(v)
    return reshape(l2_normalize(t), (1, t.data.shape[0]))


def loss_triplet(anchor, positive, negative, margin: float) -> Tensor:
    """Hinge on non-squared Euclidean distances of L2-normalized embeddings.

    anchor: image embedding of instance k; positive: shape embedding of k;
    negative: shape embedding of a different instance l. Inputs are
    normalized here; zero-norm inputs are rejected.
    """
    a, p, n = _as_row(anchor), _as_row(positive), _as_row(negative)
    d_ap = euclid_dist_rows(a, p)
    d_pn = euclid_dist_rows(p, n)
    return sum_(relu(d_ap - d_pn + margin))


def triplet_loss_batch(phi_i: Tensor, phi_p: Tensor, margin: float) -> Tensor:
    """Mean triplet hinge over a batch; negative of anchor k is instance k+1 mod B."""
    b = phi_i.data.shape[0]
    if b < 2:
        raise ValueError("triplet batches need at least 2 instances")
    anchors = l2_normalize_rows(phi_i)
    positives = l2_normalize_rows(phi_p)
    negatives = concat_rows([slice_rows(positives, 1, b), slice_rows(positives, 0, 1)])
    d_ap = euclid_dist_rows(anchors, positives)
    d_pn = euclid_dist_rows(positives, negatives)
    return sum_(relu(d_ap - d_pn + margin)) * (1.0 / b)


# -- shared trainer plumbing ----------------------------------------------------


def cosine_centroid_classify(
    support_embs: np.ndarray, support_labels, query_embs: np.ndarray
) -> np.ndarray:
    """Nearest class centroid by cosine similarity (trainer validation rule)."""
    labels = np.asarray(support_labels)
    s = support_embs / np.maximum(
        np.linalg.norm(support_embs, axis=1, keepdims=True), 1e-12
    )
    q = query_embs / np.maximum(
        np.linalg.norm(query_embs, axis=1, keepdims=True), 1e-12
    )
    slots = np.unique(labels)
    centroids = np.stack([s[labels == k].mean(axis=0) for k in slots])
    return slots[np.argmax(q @ centroids.T, axis=1)]


def _instances_of_classes(dataset: Dataset, class_ids) -> list:
    out = []
    for cid in sorted(class_ids):
        out.extend(dataset.instances_of(cid))
    return out


def _epoch_batches(n: int, config: TrainConfig, epoch_rng) -> list:
    """Index batches for one epoch; trailing chunks below 2 are dropped."""
    per_epoch = config.batches_per_epoch
    if per_epoch <= 0:
        per_epoch = max(1, int(np.ceil(n / config.batch_size)))
    needed = per_epoch * config.batch_size
    reps = int(np.ceil(needed / n))
    order = np.concatenate([epoch_rng.permutation(n) for _ in range(reps)])[:needed]
    batches = [
        order[i * config.batch_size:(i + 1) * config.batch_size]
        for i in range(per_epoch)
    ]
    return [b for b in batches if len(b) >= 2]


@dataclass
class _ValEpisode:
    support_idx: np.ndarray  # indices into the val instance list
    support_views: np.ndarray
    support_labels: np.ndarray
    query_idx: np.ndarray
    query_views: np.ndarray
    query_labels: np.ndarray


def _check_val_feasible(dataset: Dataset, val_class_ids, config: TrainConfig):
    classes = sorted(val_class_ids)
    if config.val_n_way > len(classes):
        raise ConfigError(
            f"validation wants {config.val_n_way}-way but split has "
            f"{len(classes)} validation classes"
        )
    need = config.val_m_shot + config.val_q_queries
    for cid in classes:
        members = dataset.instances_of(cid)
        if len(members) < need:
            raise ConfigError(
                f"validation category {cid} has {len(members)} < {need} instances"
            )


def _sample_val_episodes(dataset: Dataset, val_class_ids, config: TrainConfig, epoch: int):
    """N_it fresh validation episodes for one epoch (seed-derived)."""
    classes = sorted(val_class_ids)
    instances = _instances_of_classes(dataset, val_class_ids)
    index_of = {iid: i for i, iid in enumerate(instances)}
    episodes = []
    for k in range(config.val_episodes):
        rng = rng_from(config.seed, "val", epoch, k)
        picked = [classes[i] for i in rng.choice(len(classes), config.val_n_way, replace=False)]
        s_idx, s_view, s_lab, q_idx, q_view, q_lab = [], [], [], [], [], []
        for slot, cid in enumerate(picked):
            members = dataset.instances_of(cid)
            need = config.val_m_shot + config.val_q_queries
            chosen = rng.choice(len(members), size=need, replace=False)
            for j, c in enumerate(chosen):
                iid = members[c]
                view = int(rng.integers(dataset.n_views(iid)))
                if j < config.val_m_shot:
                    s_idx.append(index_of[iid]); s_view.append(view); s_lab.append(slot)
                else:
                    q_idx.append(index_of[iid]); q_view.append(view); q_lab.append(slot)
        episodes.append(
            _ValEpisode(
                np.array(s_idx), np.array(s_view), np.array(s_lab),
                np.array(q_idx), np.array(q_view), np.array(q_lab),
            )
        )
    return episodes


def write_training_log(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["epoch,train_loss,val_accuracy,lr"]
    for epoch, loss, acc, lr in rows:
        loss_s = "" if loss is None else f"{loss:.10g}"
        lines.append(f"{epoch},{loss_s},{acc:.10g},{lr:.10g}")
    path.write_text("\n".join(lines) + "\n")


class _BestTracker:
    def __init__(self):
        self.best_acc = -1.0
        self.best_epoch = -1
        self.params = None

    def offer(self, acc: float, epoch: int, params: dict):
        if acc > self.best_acc:
            self.best_acc = acc
            self.best_epoch = epoch
            self.params = {k: v.copy() for k, v in params.items()}


# -- trainers -------------------------------------------------------------------


def train_shape_embedding(
    dataset: Dataset,
    train_class_ids,
    val_class_ids,
    encoder_config: PointEncoderConfig,
    config: TrainConfig,
):
    """Cross-entropy over augmented clouds; checkpoint on best val episodes."""
    classes = sorted(train_class_ids)
    if len(classes) < 2:
        raise ValueError("shape-embedding training needs at least 2 classes")
    class_index = {cid: i for i, cid in enumerate(classes)}
    instances = _instances_of_classes(dataset, classes)
    labels = np.array([class_index[dataset.category_of(i)] for i in instances])

    encoder = PointEncoder(encoder_config, seed=rng_from(config.seed, "fp-init").integers(2**32))
    head = ClassifierHead(encoder.embed_dim, len(classes), seed=rng_from(config.seed, "head-init").integers(2**32))
    params = encoder.parameters() + head.parameters()
    opt = Optimizer(params, config.optimizer)

    _check_val_feasible(dataset, val_class_ids, config)
    val_instances = _instances_of_classes(dataset, val_class_ids)
    clouds = {iid: dataset.load_points(iid) for iid in instances}
    val_clouds = [dataset.load_points(iid) for iid in val_instances]

    def validate(epoch: int) -> float:
        val_embs = encoder.embed_many(val_clouds)
        accs = []
        for ep in _sample_val_episodes(dataset, val_class_ids, config, epoch):
            preds = cosine_centroid_classify(
                val_embs[ep.support_idx], ep.support_labels, val_embs[ep.query_idx]
            )
            accs.append(float(np.mean(preds == ep.query_labels)))
        return float(np.mean(accs))

    tracker = _BestTracker()
    log_rows = []
    acc0 = validate(0)
    tracker.offer(acc0, 0, params_to_dict(params))
    log_rows.append((0, None, acc0, config.optimizer.learning_rate))

    for epoch in range(1, config.epochs + 1):
        opt.set_epoch(epoch)
        epoch_rng = rng_from(config.seed, "epoch", epoch)
        losses = []
        for batch in _epoch_batches(len(instances), config, epoch_rng):
            batch_clouds = [
                augment_pointcloud(clouds[instances[i]], config.augment, epoch_rng)
                for i in batch
            ]
            opt.zero_grad()
            loss = softmax_cross_entropy(
                head(encoder.forward_batch(batch_clouds)), labels[batch]
            )
            loss.backward()
            opt.step()
            losses.append(loss.item())
        acc = validate(epoch)
        tracker.offer(acc, epoch, params_to_dict(params))
        log_rows.append((epoch, float(np.mean(losses)), acc, opt.lr))

    ckpt = Checkpoint(tracker.params, tracker.best_acc, tracker.best_epoch, method="shape")
    return ckpt, log_rows


def train_image_embedding(
    dataset: Dataset,
    train_class_ids,
    val_class_ids,
    encoder_config: ImageEncoderConfig,
    image_size: int,
    config: TrainConfig,
):
    """Image-only cross-entropy baseline, same procedure as the shape trainer."""
    classes = sorted(train_class_ids)
    if len(classes) < 2:
        raise ValueError("image-embedding training needs at least 2 classes")
    class_index = {cid: i for i, cid in enumerate(classes)}
    instances = _instances_of_classes(dataset, classes)
    labels = np.array([class_index[dataset.category_of(i)] for i in instances])

    encoder = ImageEncoder(encoder_config, image_size, seed=rng_from(config.seed, "fi-init").integers(2**32))
    head = ClassifierHead(encoder.embed_dim, len(classes), seed=rng_from(config.seed, "head-init").integers(2**32))
    params = encoder.parameters() + head.parameters()
    opt = Optimizer(params, config.optimizer)

    _check_val_feasible(dataset, val_class_ids, config)
    val_instances = _instances_of_classes(dataset, val_class_ids)
    n_views = dataset.n_views(instances[0])

    def validate(epoch: int) -> float:
        embs = _embed_all_views(encoder, dataset, val_instances)
        accs = []
        for ep in _sample_val_episodes(dataset, val_class_ids, config, epoch):
            s = embs[ep.support_idx * n_views + ep.support_views]
            q = embs[ep.query_idx * n_views + ep.query_views]
            preds = cosine_centroid_classify(s, ep.support_labels, q)
            accs.append(float(np.mean(preds == ep.query_labels)))
        return float(np.mean(accs))

    tracker = _BestTracker()
    log_rows = []
    acc0 = validate(0)
    tracker.offer(acc0, 0, params_to_dict(params))
    log_rows.append((0, None, acc0, config.optimizer.learning_rate))

    for epoch in range(1, config.epochs + 1):
        opt.set_epoch(epoch)
        epoch_rng = rng_from(config.seed, "epoch", epoch)
        losses = []
        for batch in _epoch_batches(len(instances), config, epoch_rng):
            views = epoch_rng.integers(0, n_views, size=len(batch))
            images = [
                dataset.load_image(instances[i], int(v)) for i, v in zip(batch, views)
            ]
            opt.zero_grad()
            loss = softmax_cross_entropy(
                head(encoder.forward_batch(images)), labels[batch]
            )
            loss.backward()
            opt.step()
            losses.append(loss.item())
        acc = validate(epoch)
        tracker.offer(acc, epoch, params_to_dict(params))
        log_rows.append((epoch, float(np.mean(losses)), acc, opt.lr))

    ckpt = Checkpoint(tracker.params, tracker.best_acc, tracker.best_epoch, method="image")
    return ckpt, log_rows


def _embed_all_views(encoder: ImageEncoder, dataset: Dataset, instances) -> np.ndarray:
    """(n_instances * n_views) x d image embeddings, view-major per instance."""
    images = []
    for iid in instances:
        for v in range(dataset.n_views(iid)):
            images.append(dataset.load_image(iid, v))
    return encoder.embed_many(images)


def _align_core(
    dataset: Dataset,
    align_class_ids,
    val_class_ids,
    point_encoder: PointEncoder,
    encoder_config: ImageEncoderConfig,
    image_size: int,
    config: TrainConfig,
    method: str,
    oracle: bool,
):
    """Shared loop for shape-biased alignment and its oracle variant."""
    instances = _instances_of_classes(dataset, align_class_ids)
    if not instances:
        raise ValueError("alignment needs a nonempty instance set")
    # frozen, unaugmented shape-space targets
    targets = point_encoder.embed_many([dataset.load_points(i) for i in instances])

    encoder = ImageEncoder(encoder_config, image_size, seed=rng_from(config.seed, "fi-init").integers(2**32))
    params = encoder.parameters()
    opt = Optimizer(params, config.optimizer)

    _check_val_feasible(dataset, val_class_ids, config)
    val_instances = _instances_of_classes(dataset, val_class_ids)
    val_shape_embs = point_encoder.embed_many(
        [dataset.load_points(i) for i in val_instances]
    )
    n_views = dataset.n_views(instances[0])

    def validate(epoch: int) -> float:
        image_embs = _embed_all_views(encoder, dataset, val_instances)
        accs = []
        for ep in _sample_val_episodes(dataset, val_class_ids, config, epoch):
            phi_i = image_embs[ep.support_idx * n_views + ep.support_views]
            phi_p = val_shape_embs[ep.support_idx]
            supports = 0.5 * (phi_i + phi_p)  # elementwise average of modalities
            queries = image_embs[ep.query_idx * n_views + ep.query_views]
            preds = cosine_centroid_classify(supports, ep.support_labels, queries)
            accs.append(float(np.mean(preds == ep.query_labels)))
        return float(np.mean(accs))

    tracker = _BestTracker()
    log_rows = []
    acc0 = validate(0)
    tracker.offer(acc0, 0, params_to_dict(params))
    log_rows.append((0, None, acc0, config.optimizer.learning_rate))

    for epoch in range(1, config.epochs + 1):
        opt.set_epoch(epoch)
        epoch_rng = rng_from(config.seed, "epoch", epoch)
        losses = []
        for batch in _epoch_batches(len(instances), config, epoch_rng):
            views = epoch_rng.integers(0, n_views, size=len(batch))
            images = [
                dataset.load_image(instances[i], int(v)) for i, v in zip(batch, views)
            ]
            opt.zero_grad()
            phi_i = encoder.forward_batch(images)
            phi_p = targets[batch]
            loss = config.w1 * loss_align_l1(phi_i, phi_p)
            if config.w2 > 0:
                loss = loss + config.w2 * loss_align_pairwise(phi_i, phi_p)
            loss.backward()
            opt.step()
            losses.append(loss.item())
        acc = validate(epoch)
        tracker.offer(acc, epoch, params_to_dict(params))
        log_rows.append((epoch, float(np.mean(losses)), acc, opt.lr))

    ckpt = Checkpoint(
        tracker.params, tracker.best_acc, tracker.best_epoch, method=method, oracle=oracle
    )
    return ckpt, log_rows


def train_shape_biased_image(
    dataset: Dataset,
    train_class_ids,
    val_class_ids,
    point_encoder: PointEncoder,
    encoder_config: ImageEncoderConfig,
    image_size: int,
    config: TrainConfig,
    method: str = "align",
):
    """Align the image encoder to the frozen shape space on base classes."""
    return _align_core(
        dataset, train_class_ids, val_class_ids, point_encoder,
        encoder_config, image_size, config, method=method, oracle=False,
    )


def train_oracle(
    dataset: Dataset,
    all_class_ids,
    val_class_ids,
    point_encoder: PointEncoder,
    encoder_config: ImageEncoderConfig,
    image_size: int,
    config: TrainConfig,
    acknowledge_test_classes: bool = False,
):
    """Alignment over every split, including test classes; gated by a flag."""
    if not acknowledge_test_classes:
        raise ConfigError(
            "oracle training uses test classes; pass the explicit acknowledgment flag"
        )
    return _align_core(
        dataset, all_class_ids, val_class_ids, point_encoder,
        encoder_config, image_size, config, method="oracle", oracle=True,
    )


def train_triplet(
    dataset: Dataset,
    train_class_ids,
    val_class_ids,
    point_config: PointEncoderConfig,
    image_config: ImageEncoderConfig,
    image_size: int,
    config: TrainConfig,
    triplet: TripletConfig,
):
    """Joint image/shape embedding via the triplet hinge, in-batch negatives."""
    instances = _instances_of_classes(dataset, train_class_ids)
    if len(instances) < 2:
        raise ValueError("triplet training needs at least 2 instances")
    point_encoder = PointEncoder(point_config, seed=rng_from(config.seed, "fp-init").integers(2**32))
    image_encoder = ImageEncoder(image_config, image_size, seed=rng_from(config.seed, "fi-init").integers(2**32))
    params = point_encoder.parameters() + image_encoder.parameters()
    opt = Optimizer(params, config.optimizer)

    _check_val_feasible(dataset, val_class_ids, config)
    val_instances = _instances_of_classes(dataset, val_class_ids)
    clouds = {iid: dataset.load_points(iid) for iid in instances}
    val_clouds = [dataset.load_points(i) for i in val_instances]
    n_views = dataset.n_views(instances[0])

    def validate(epoch: int) -> float:
        image_embs = _embed_all_views(image_encoder, dataset, val_instances)
        shape_embs = point_encoder.embed_many(val_clouds)
        accs = []
        for ep in _sample_val_episodes(dataset, val_class_ids, config, epoch):
            phi_i = image_embs[ep.support_idx * n_views + ep.support_views]
            phi_p = shape_embs[ep.support_idx]
            supports = 0.5 * (phi_i + phi_p)
            queries = image_embs[ep.query_idx * n_views + ep.query_views]
            preds = cosine_centroid_classify(supports, ep.support_labels, queries)
            accs.append(float(np.mean(preds == ep.query_labels)))
        return float(np.mean(accs))

    tracker = _BestTracker()
    log_rows = []
    acc0 = validate(0)
    tracker.offer(acc0, 0, params_to_dict(params))
    log_rows.append((0, None, acc0, config.optimizer.learning_rate))

    for epoch in range(1, config.epochs + 1):
        opt.set_epoch(epoch)
        epoch_rng = rng_from(config.seed, "epoch", epoch)
        losses = []
        for batch in _epoch_batches(len(instances), config, epoch_rng):
            views = epoch_rng.integers(0, n_views, size=len(batch))
            images = [
                dataset.load_image(instances[i], int(v)) for i, v in zip(batch, views)
            ]
            batch_clouds = [clouds[instances[i]] for i in batch]
            opt.zero_grad()
            phi_i = image_encoder.forward_batch(images)
            phi_p = point_encoder.forward_batch(batch_clouds)
            loss = triplet_loss_batch(phi_i, phi_p, triplet.margin)
            loss.backward()
            opt.step()
            losses.append(loss.item())
        acc = validate(epoch)
        tracker.offer(acc, epoch, params_to_dict(params))
        log_rows.append((epoch, float(np.mean(losses)), acc, opt.lr))

    ckpt = Checkpoint(tracker.params, tracker.best_acc, tracker.best_epoch, method="triplet")
    return ckpt, log_rows


def make_point_encoder(config: PointEncoderConfig, checkpoint: Checkpoint) -> PointEncoder:
    enc = PointEncoder(config, seed=0)
    load_param_dict(enc.parameters(), checkpoint.params)
    return enc


def make_image_encoder(
    config: ImageEncoderConfig, image_size: int, checkpoint: Checkpoint
) -> ImageEncoder:
    enc = ImageEncoder(config, image_size, seed=0)
    load_param_dict(enc.parameters(), checkpoint.params)
    return enc
