import numpy as np
import pytest

from sblab.encoders import ImageEncoder, ImageEncoderConfig
from sblab.numerics import Tensor, grad_check
from sblab.rng import rng_from
from sblab.training import (
    loss_align_l1,
    loss_align_pairwise,
    loss_triplet,
    triplet_loss_batch,
)


def _pairwise_brute(phi_i: np.ndarray, phi_p: np.ndarray) -> float:
    b = phi_i.shape[0]
    total, count = 0.0, 0
    for k in range(b):
        for l in range(k + 1, b):
            dp = np.sum((phi_p[k] - phi_p[l]) ** 2)
            di = np.sum((phi_i[k] - phi_i[l]) ** 2)
            total += (dp - di) ** 2
            count += 1
    return total / count


def test_l1_zero_when_embeddings_match():
    x = rng_from(0).normal(size=(5, 4))
    assert loss_align_l1(Tensor(x), x).item() == 0.0


def test_l1_single_pair_squared_distance():
    out = loss_align_l1(Tensor([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    assert out.item() == pytest.approx(2.0, abs=1e-15)


def test_l1_mean_over_pairs():
    phi_i = Tensor([[0.0, 0.0], [0.0, 0.0]])
    phi_p = np.array([[1.0, 1.0], [2.0, 0.0]])  # squared distances 2 and 4
    assert loss_align_l1(phi_i, phi_p).item() == pytest.approx(3.0, abs=1e-14)


def test_l1_dim_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        loss_align_l1(Tensor([[1.0, 2.0]]), np.array([[1.0, 2.0, 3.0]]))


def test_pairwise_zero_when_distances_match():
    rng = rng_from(1)
    phi_p = rng.normal(size=(6, 3))
    rot, _ = np.linalg.qr(rng.normal(size=(3, 3)))  # isometry preserves distances
    phi_i = phi_p @ rot
    assert loss_align_pairwise(Tensor(phi_i), phi_p).item() < 1e-24


def test_pairwise_hand_case_batch_of_two():
    phi_p = np.array([[0.0, 0.0], [1.0, 0.0]])
    phi_i = Tensor(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert loss_align_pairwise(phi_i, phi_p).item() == pytest.approx(9.0, abs=1e-14)


def test_pairwise_batch_of_three_matches_brute_force():
    rng = rng_from(2)
    phi_p = rng.normal(size=(3, 5))
    phi_i = rng.normal(size=(3, 5))
    got = loss_align_pairwise(Tensor(phi_i), phi_p).item()
    assert got == pytest.approx(_pairwise_brute(phi_i, phi_p), abs=1e-12)


def test_pairwise_brute_force_equivalence_100_cases():
    rng = rng_from(3)
    for _ in range(100):
        b = int(rng.integers(2, 17))
        d = int(rng.integers(2, 9))
        phi_p = rng.normal(size=(b, d)) * rng.uniform(0.5, 2.0)
        phi_i = rng.normal(size=(b, d)) * rng.uniform(0.5, 2.0)
        got = loss_align_pairwise(Tensor(phi_i), phi_p).item()
        want = _pairwise_brute(phi_i, phi_p)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_pairwise_needs_two():
    with pytest.raises(ValueError, match="at least 2"):
        loss_align_pairwise(Tensor([[1.0, 2.0]]), np.array([[1.0, 2.0]]))


def test_losses_nonnegative_property():
    rng = rng_from(4)
    for _ in range(50):
        b = int(rng.integers(2, 8))
        phi_p = rng.normal(size=(b, 4))
        phi_i = Tensor(rng.normal(size=(b, 4)))
        assert loss_align_l1(phi_i, phi_p).item() >= 0.0
        assert loss_align_pairwise(phi_i, phi_p).item() >= 0.0


def test_triplet_satisfied_margin_is_zero():
    a = np.array([1.0, 0.0])
    n = np.array([0.0, 1.0])  # d(p, n) = sqrt(2) > margin
    assert loss_triplet(a, a, n, margin=0.1).item() == 0.0


def test_triplet_hand_case():
    # unit vectors engineered so d(a,p)=0.5 and d(p,n)=0.2
    def unit_pair(dist):
        # two unit vectors at Euclidean distance dist: angle = 2*asin(dist/2)
        ang = 2 * np.arcsin(dist / 2)
        return np.array([np.cos(ang), np.sin(ang)])

    p = np.array([1.0, 0.0])
    a = unit_pair(0.5)
    n = unit_pair(0.2)
    out = loss_triplet(a, p, n, margin=0.1)
    assert out.item() == pytest.approx(0.5 - 0.2 + 0.1, abs=1e-12)


def test_triplet_hinge_nonnegative_100_random():
    rng = rng_from(5)
    for _ in range(100):
        a, p, n = rng.normal(size=(3, 6))
        assert loss_triplet(a, p, n, margin=0.1).item() >= 0.0


def test_triplet_zero_norm_rejected():
    with pytest.raises(ValueError, match="zero"):
        loss_triplet(np.zeros(3), np.ones(3), np.ones(3), margin=0.1)


def test_triplet_batch_matches_single_triplets():
    rng = rng_from(6)
    b = 5
    phi_i = rng.normal(size=(b, 4))
    phi_p = rng.normal(size=(b, 4))
    batch = triplet_loss_batch(Tensor(phi_i), Tensor(phi_p), margin=0.1).item()
    singles = [
        loss_triplet(phi_i[k], phi_p[k], phi_p[(k + 1) % b], margin=0.1).item()
        for k in range(b)
    ]
    assert batch == pytest.approx(np.mean(singles), abs=1e-12)


def test_alignment_gradient_check_small_batches():
    for b in (2, 3, 4):
        rng = rng_from(10 + b)
        phi_p = rng.normal(size=(b, 5))
        phi_i = Tensor(rng.normal(size=(b, 5)), requires_grad=True)

        def loss():
            return 1.0 * loss_align_l1(phi_i, phi_p) + 1.0 * loss_align_pairwise(
                phi_i, phi_p
            )

        assert grad_check(loss, [phi_i], eps=1e-4) < 1e-4


def test_alignment_gradient_through_image_encoder():
    cfg = ImageEncoderConfig(patch_size=4, patch_width=6, trunk_widths=(8,), embed_dim=5)
    enc = ImageEncoder(cfg, image_size=8, seed=0)
    rng = rng_from(20)
    images = [rng.normal(size=(2, 8, 8)) for _ in range(3)]
    phi_p = rng.normal(size=(3, 5))
    tensors = [p.value for p in enc.parameters()]

    def loss():
        phi_i = enc.forward_batch(images)
        return loss_align_l1(phi_i, phi_p) + loss_align_pairwise(phi_i, phi_p)

    assert grad_check(loss, tensors, eps=1e-4) < 1e-4


def test_triplet_gradient_check_away_from_kinks():
    rng = rng_from(21)
    while True:
        phi_i = rng.normal(size=(3, 4))
        phi_p = rng.normal(size=(3, 4))
        # keep the hinge clearly active so its kink is far from the probe
        probe = triplet_loss_batch(Tensor(phi_i), Tensor(phi_p), margin=0.1)
        if probe.item() > 0.05:
            break
    a = Tensor(phi_i, requires_grad=True)
    p = Tensor(phi_p, requires_grad=True)
    err = grad_check(lambda: triplet_loss_batch(a, p, margin=0.1), [a, p], eps=1e-4)
    assert err < 1e-4
