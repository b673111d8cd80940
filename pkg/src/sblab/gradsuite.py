"""The full gradient-verification suite behind the `gradcheck` subcommand.

Every differentiable op and every composite loss gets at least five random
instantiations checked against central differences (eps=1e-4) at a max
relative error below 1e-4. Instantiation seeds are fixed; random draws are
nudged away from relu/max kinks so the finite-difference probes stay on one
side of each kink.
"""

import numpy as np

from .encoders import (
    ClassifierHead,
    ImageEncoder,
    ImageEncoderConfig,
    PointEncoder,
    PointEncoderConfig,
)
from .numerics import (
    Tensor,
    affine,
    grad_check,
    l2_normalize,
    relu,
    set_max_pool,
    softmax_cross_entropy,
    sum_,
)
from .rng import rng_from
from .training import loss_align_l1, loss_align_pairwise, triplet_loss_batch

TOLERANCE = 1e-4
N_TRIALS = 5


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.normal(size=shape)
    x = np.where(np.abs(x) < margin, x + np.sign(x + 1e-12) * margin, x)
    return x


def _check_affine(trial: int) -> float:
    rng = rng_from("suite-affine", trial)
    b, i, o = rng.integers(2, 6, size=3)
    x = Tensor(rng.normal(size=(b, i)), requires_grad=True)
    w = Tensor(rng.normal(size=(i, o)), requires_grad=True)
    bias = Tensor(rng.normal(size=o), requires_grad=True)
    weights = rng.normal(size=(int(b), int(o)))  # fixed projection to a scalar
    return grad_check(lambda: sum_(affine(x, w, bias) * weights), [x, w, bias])


def _check_relu(trial: int) -> float:
    rng = rng_from("suite-relu", trial)
    x = Tensor(_away_from_zero(rng, (4, 5)), requires_grad=True)
    weights = rng.normal(size=(4, 5))
    return grad_check(lambda: sum_(relu(x) * weights), [x])


def _check_set_max_pool(trial: int) -> float:
    rng = rng_from("suite-maxpool", trial)
    x_data = rng.normal(size=(6, 4))
    # enforce a clear per-column argmax margin so probes cannot flip it
    top = np.argmax(x_data, axis=0)
    x_data[top, np.arange(4)] += 0.1
    x = Tensor(x_data, requires_grad=True)
    weights = rng.normal(size=4)
    return grad_check(lambda: sum_(set_max_pool(x) * weights), [x])


def _check_l2_normalize(trial: int) -> float:
    rng = rng_from("suite-l2norm", trial)
    x = Tensor(rng.normal(size=6) + 0.5, requires_grad=True)
    weights = rng.normal(size=6)
    return grad_check(lambda: sum_(l2_normalize(x) * weights), [x])


def _check_cross_entropy(trial: int) -> float:
    rng = rng_from("suite-ce", trial)
    logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    labels = rng.integers(0, 5, size=4)
    return grad_check(lambda: softmax_cross_entropy(logits, labels), [logits])


def _point_kinks_clear(enc: PointEncoder, clouds) -> bool:
    """True when no relu pre-activation or pooled top-2 margin sits near a kink."""
    for cloud in clouds:
        x = np.asarray(cloud)
        for w, b in enc.point_mlp.layers:
            pre = x @ w.value.data + b.value.data
            if np.any(np.abs(pre) < 5e-4):
                return False
            x = np.maximum(pre, 0.0)
        top2 = np.sort(x, axis=0)[-2:, :]
        if np.any(top2[1] - top2[0] < 5e-3):
            return False
    return True


def _check_point_pipeline(trial: int) -> float:
    # cross-entropy through head(point encoder(cloud)), the shape trainer's loss
    enc = PointEncoder(PointEncoderConfig(point_widths=(6, 8), embed_dim=6), seed=trial)
    head = ClassifierHead(6, 3, seed=trial + 1)
    for attempt in range(100):
        rng = rng_from("suite-fp", trial, attempt)
        clouds = [rng.normal(size=(int(rng.integers(8, 14)), 3)) for _ in range(3)]
        if _point_kinks_clear(enc, clouds):
            break
    labels = rng.integers(0, 3, size=3)
    tensors = [p.value for p in enc.parameters() + head.parameters()]

    def loss():
        return softmax_cross_entropy(head(enc.forward_batch(clouds)), labels)

    return grad_check(loss, tensors)


def _check_image_pipeline(trial: int) -> float:
    # squared-norm of the image embedding w.r.t. all encoder parameters
    rng = rng_from("suite-fi", trial)
    cfg = ImageEncoderConfig(patch_size=4, patch_width=6, trunk_widths=(8,), embed_dim=5)
    enc = ImageEncoder(cfg, image_size=8, seed=trial)
    images = [rng.normal(size=(2, 8, 8)) for _ in range(2)]
    tensors = [p.value for p in enc.parameters()]

    def loss():
        emb = enc.forward_batch(images)
        return sum_(emb * emb)

    return grad_check(loss, tensors)


def _check_alignment_loss(trial: int) -> float:
    # w1*L1 + w2*L2 through the image encoder, the alignment trainer's loss
    rng = rng_from("suite-align", trial)
    cfg = ImageEncoderConfig(patch_size=4, patch_width=5, trunk_widths=(6,), embed_dim=4)
    enc = ImageEncoder(cfg, image_size=8, seed=trial)
    batch = int(rng.integers(2, 5))
    images = [rng.normal(size=(2, 8, 8)) for _ in range(batch)]
    targets = rng.normal(size=(batch, 4))
    tensors = [p.value for p in enc.parameters()]

    def loss():
        phi_i = enc.forward_batch(images)
        return 1.0 * loss_align_l1(phi_i, targets) + 1.0 * loss_align_pairwise(
            phi_i, targets
        )

    return grad_check(loss, tensors)


def _check_alignment_direct(trial: int) -> float:
    # same composite loss probed directly at random small embeddings
    rng = rng_from("suite-align-direct", trial)
    batch = int(rng.integers(2, 5))
    phi_i = Tensor(0.3 * rng.normal(size=(batch, 5)), requires_grad=True)
    targets = 0.3 * rng.normal(size=(batch, 5))

    def loss():
        return loss_align_l1(phi_i, targets) + loss_align_pairwise(phi_i, targets)

    return grad_check(loss, [phi_i])


def _check_triplet_loss(trial: int) -> float:
    rng = rng_from("suite-triplet", trial)
    while True:
        phi_i = rng.normal(size=(3, 4))
        phi_p = rng.normal(size=(3, 4))
        per_row = _triplet_hinge_values(phi_i, phi_p, margin=0.1)
        if np.all(np.abs(per_row) > 1e-2):  # every hinge clearly on one side
            break
    a = Tensor(phi_i, requires_grad=True)
    p = Tensor(phi_p, requires_grad=True)
    return grad_check(lambda: triplet_loss_batch(a, p, margin=0.1), [a, p])


def _triplet_hinge_values(phi_i, phi_p, margin):
    a = phi_i / np.linalg.norm(phi_i, axis=1, keepdims=True)
    p = phi_p / np.linalg.norm(phi_p, axis=1, keepdims=True)
    n = np.roll(p, -1, axis=0)
    d_ap = np.linalg.norm(a - p, axis=1)
    d_pn = np.linalg.norm(p - n, axis=1)
    return d_ap - d_pn + margin


SUITE = [
    ("affine", _check_affine),
    ("relu", _check_relu),
    ("set_max_pool", _check_set_max_pool),
    ("l2_normalize", _check_l2_normalize),
    ("softmax_cross_entropy", _check_cross_entropy),
    ("cross_entropy_over_point_encoder", _check_point_pipeline),
    ("image_encoder_squared_norm", _check_image_pipeline),
    ("alignment_loss_over_image_encoder", _check_alignment_loss),
    ("alignment_loss_direct", _check_alignment_direct),
    ("triplet_loss_both_encoders", _check_triplet_loss),
]


def run_gradcheck_suite():
    """Run all checks; returns [(name, worst error over trials, passed)]."""
    results = []
    for name, check in SUITE:
        worst = max(check(trial) for trial in range(N_TRIALS))
        results.append((name, worst, worst < TOLERANCE))
    return results
