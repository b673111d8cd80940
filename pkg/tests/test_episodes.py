import numpy as np
import numpy.testing as npt
import pytest

from sblab.episodes import (
    Episode,
    EvalReport,
    SplitSpec,
    build_prototypes_shape_biased,
    confidence_interval,
    logistic_episode_classify,
    make_splits,
    nearest_centroid_classify,
    sample_episode,
    sample_episode_stream,
    score_episodes,
)
from sblab.errors import ConfigError
from sblab.rng import rng_from


class StubDataset:
    """Enough of the Dataset surface for sampling and split tests."""

    def __init__(self, counts: dict, n_views: int = 3):
        self.counts = counts
        self._n_views = n_views

    @property
    def category_ids(self):
        return sorted(self.counts)

    def instances_of(self, cid):
        return [f"c{cid:02d}_i{j:03d}" for j in range(self.counts[cid])]

    def category_name(self, cid):
        return f"cat{cid}"

    def category_of(self, iid):
        return int(iid[1:3])

    def n_views(self, iid):
        return self._n_views


def test_make_splits_counts_and_disjoint():
    ds = StubDataset({c: 10 for c in range(24)})
    split = make_splits(ds, (12, 4, 8), seed=3)
    assert len(split.train_classes) == 12
    assert len(split.val_classes) == 4
    assert len(split.test_classes) == 8
    all_ids = set(split.train_classes) | set(split.val_classes) | set(split.test_classes)
    assert len(all_ids) == 24


def test_make_splits_largest_categories_go_to_train():
    counts = {c: 5 for c in range(10)}
    counts[7] = 50
    counts[2] = 40
    ds = StubDataset(counts)
    split = make_splits(ds, (2, 4, 4), seed=0)
    assert set(split.train_classes) == {7, 2}


def test_make_splits_tie_break_by_category_id():
    ds = StubDataset({c: 10 for c in range(8)})
    split = make_splits(ds, (3, 2, 3), seed=11)
    assert split.train_classes == (0, 1, 2)


def test_make_splits_deterministic():
    ds = StubDataset({c: 10 for c in range(24)})
    a = make_splits(ds, (12, 4, 8), seed=9)
    b = make_splits(ds, (12, 4, 8), seed=9)
    assert a == b


def test_make_splits_infeasible_counts():
    ds = StubDataset({c: 10 for c in range(5)})
    with pytest.raises(ConfigError, match="exceed"):
        make_splits(ds, (4, 1, 1), seed=0)


def test_split_disjointness_enforced():
    with pytest.raises(ConfigError, match="disjoint"):
        SplitSpec(train_classes=(1, 2), val_classes=(2,), test_classes=(3,), seed=0)


def test_sample_episode_counting():
    ds = StubDataset({c: 15 for c in range(6)})
    ep = sample_episode(ds, ds.category_ids, 5, 1, 10, rng_from(0))
    assert len(ep.supports) == 5
    assert len(ep.queries) == 50
    assert len({s.slot for s in ep.supports}) == 5


def test_sample_episode_support_query_disjoint_1000():
    ds = StubDataset({c: 8 for c in range(6)})
    for k in range(1000):
        ep = sample_episode(ds, ds.category_ids, 3, 2, 3, rng_from(k), episode_id=k)
        support_ids = {s.instance_id for s in ep.supports}
        query_ids = {q.instance_id for q in ep.queries}
        assert not (support_ids & query_ids)


def test_sample_episode_infeasible_names_class():
    ds = StubDataset({0: 15, 1: 2})
    with pytest.raises(ValueError, match="cat1"):
        for _ in range(50):  # category 1 must eventually be drawn
            sample_episode(ds, ds.category_ids, 2, 1, 3, rng_from(1))


def test_sample_episode_way_count_precondition():
    ds = StubDataset({c: 15 for c in range(8)})
    with pytest.raises(ValueError, match="10-way"):
        sample_episode(ds, ds.category_ids, 10, 1, 5, rng_from(2))


def test_episode_type_carries_no_query_point_cloud():
    ds = StubDataset({c: 15 for c in range(6)})
    ep = sample_episode(ds, ds.category_ids, 3, 1, 2, rng_from(3))
    for q in ep.queries:
        assert not hasattr(q, "point_cloud")
        assert not hasattr(q, "points")


def test_nearest_centroid_identity_case():
    supports = np.array([[1.0, 0.0], [0.0, 1.0]])
    preds = nearest_centroid_classify(supports, [0, 1], supports.copy())
    npt.assert_array_equal(preds, [0, 1])


def test_nearest_centroid_two_class_case():
    supports = np.array([[1.0, 0.0], [-1.0, 0.0]])
    preds = nearest_centroid_classify(supports, [0, 1], np.array([[0.9, 0.0]]))
    npt.assert_array_equal(preds, [0])


def test_nearest_centroid_brute_force_100_cases():
    rng = rng_from(4)
    for _ in range(100):
        n_way = int(rng.integers(2, 6))
        m = int(rng.integers(1, 4))
        d = int(rng.integers(2, 7))
        supports = rng.normal(size=(n_way * m, d))
        labels = np.repeat(np.arange(n_way), m)
        queries = rng.normal(size=(7, d))
        preds = nearest_centroid_classify(supports, labels, queries, mode="none")
        centroids = np.stack([supports[labels == c].mean(axis=0) for c in range(n_way)])
        expected = []
        for q in queries:
            dists = [np.linalg.norm(q - c) for c in centroids]
            expected.append(int(np.argmin(dists)))
        npt.assert_array_equal(preds, expected)


def test_nearest_centroid_l2_mode_scale_invariant():
    rng = rng_from(5)
    supports = rng.normal(size=(6, 8))
    labels = np.repeat(np.arange(3), 2)
    queries = rng.normal(size=(10, 8))
    a = nearest_centroid_classify(supports, labels, queries, mode="l2")
    b = nearest_centroid_classify(supports * 7.3, labels, queries * 7.3, mode="l2")
    npt.assert_array_equal(a, b)


def test_nearest_centroid_centered_needs_mean():
    with pytest.raises(ConfigError, match="mean"):
        nearest_centroid_classify(
            np.eye(2), [0, 1], np.eye(2), mode="l2_centered", base_mean=None
        )


def test_prototypes_one_shot_is_midpoint():
    img = np.array([[2.0, 0.0]])
    shp = np.array([[0.0, 2.0]])
    proto = build_prototypes_shape_biased(img, shp, [0], n_way=1)
    npt.assert_allclose(proto, [[1.0, 1.0]], atol=1e-15)


def test_prototypes_equal_modalities_match_image_only():
    rng = rng_from(6)
    img = rng.normal(size=(4, 3))
    labels = [0, 0, 1, 1]
    proto = build_prototypes_shape_biased(img, img.copy(), labels, n_way=2)
    image_only = np.stack([img[:2].mean(axis=0), img[2:].mean(axis=0)])
    npt.assert_allclose(proto, image_only, atol=1e-15)


def test_prototypes_five_shot_brute_force():
    rng = rng_from(7)
    img = rng.normal(size=(10, 4))
    shp = rng.normal(size=(10, 4))
    labels = np.repeat(np.arange(2), 5)
    proto = build_prototypes_shape_biased(img, shp, labels, n_way=2)
    for c in range(2):
        rows = np.concatenate([img[labels == c], shp[labels == c]])
        npt.assert_allclose(proto[c], rows.mean(axis=0), atol=1e-12)


def test_prototypes_missing_cloud_rejected():
    with pytest.raises(ValueError, match="point cloud"):
        build_prototypes_shape_biased(np.eye(2), None, [0, 1], n_way=2)


def test_logistic_separable_supports():
    rng = rng_from(8)
    a = rng.normal(size=(5, 3)) + [5.0, 0.0, 0.0]
    b = rng.normal(size=(5, 3)) - [5.0, 0.0, 0.0]
    supports = np.concatenate([a, b])
    labels = np.array([0] * 5 + [1] * 5)
    preds = logistic_episode_classify(supports, labels, supports)
    npt.assert_array_equal(preds, labels)


def test_logistic_single_support_per_class_query_at_support():
    supports = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    labels = np.array([0, 1, 2])
    preds = logistic_episode_classify(supports, labels, supports, reg_strength=0.0)
    npt.assert_array_equal(preds, labels)


def test_logistic_agrees_with_centroid_on_separated_gaussians():
    rng = rng_from(9)
    agree, total = 0, 0
    for _ in range(20):
        centers = rng.normal(size=(3, 6)) * 8.0
        supports = np.concatenate(
            [centers[c] + 0.3 * rng.normal(size=(4, 6)) for c in range(3)]
        )
        labels = np.repeat(np.arange(3), 4)
        queries = np.concatenate(
            [centers[c] + 0.3 * rng.normal(size=(5, 6)) for c in range(3)]
        )
        lp = logistic_episode_classify(supports, labels, queries)
        cp = nearest_centroid_classify(supports, labels, queries)
        agree += int(np.sum(lp == cp))
        total += len(lp)
    assert agree / total >= 0.95


def test_confidence_interval_formula_100_cases():
    rng = rng_from(10)
    for _ in range(100):
        n = int(rng.integers(2, 50))
        accs = rng.uniform(0, 1, size=n)
        mean, half = confidence_interval(accs)
        # independent recomputation from first principles
        mu = sum(accs) / n
        var = sum((a - mu) ** 2 for a in accs) / (n - 1)
        expect = 1.96 * (var**0.5) / (n**0.5)
        assert abs(mean - mu) <= 1e-12
        assert abs(half - expect) <= 1e-12


def test_confidence_interval_singleton_zero():
    mean, half = confidence_interval([0.7])
    assert mean == 0.7
    assert half == 0.0


def test_score_episodes_constant_slot0_gives_chance():
    ds = StubDataset({c: 12 for c in range(6)})
    episodes = sample_episode_stream(ds, ds.category_ids, 4, 1, 5, count=50, seed=0)
    scored = score_episodes(
        episodes,
        lambda ep: {"const": np.zeros(len(ep.queries), dtype=int)},
        ("const",),
    )
    accs, log = scored["const"]
    # balanced queries make the constant classifier land exactly at chance
    assert np.allclose(accs, 1.0 / 4.0)
    assert len(log) == 50 * 20


def test_score_episodes_random_classifier_binomial():
    ds = StubDataset({c: 12 for c in range(6)})
    episodes = sample_episode_stream(ds, ds.category_ids, 4, 1, 5, count=100, seed=1)
    rng = rng_from(11)
    scored = score_episodes(
        episodes,
        lambda ep: {"rand": rng.integers(0, 4, size=len(ep.queries))},
        ("rand",),
    )
    accs, _ = scored["rand"]
    n_total = 100 * 20
    sigma = np.sqrt(0.25 * 0.75 / n_total)
    assert abs(np.mean(accs) - 0.25) <= 4 * sigma


def test_eval_report_deterministic_json():
    accs = [0.5, 0.75, 1.0]
    preds = [(0, 0, 1, 1), (0, 1, 2, 0)]
    a = EvalReport.from_scores("m", "l2", 5, 1, accs, preds, fingerprint="abc")
    b = EvalReport.from_scores("m", "l2", 5, 1, accs, preds, fingerprint="abc")
    assert a.to_json() == b.to_json()


def test_episode_stream_paired_and_deterministic():
    ds = StubDataset({c: 12 for c in range(6)})
    a = sample_episode_stream(ds, ds.category_ids, 3, 1, 4, count=20, seed=5)
    b = sample_episode_stream(ds, ds.category_ids, 3, 1, 4, count=20, seed=5)
    assert a == b
    assert [ep.episode_id for ep in a] == list(range(20))
