import numpy as np
import pytest

from floodkit.features import ProviderSpec
from floodkit.prototypes import (
    ClassSamples,
    Prototype,
    PrototypeBank,
    Provenance,
    build_prototype_bank,
    classify_pixel,
    collect_class_pixels,
    explain_pixel,
    nearest_real_pixel,
    project_prototypes_2d,
    segment_image,
    threshold_confidence,
)
from floodkit.rasters import CLOUD, INVALID, LAND, WATER

from conftest import make_image, three_class_scene

IDENTITY = ProviderSpec(kind="identity")


def bank_from_vectors(vectors, labels, raw=None, per_class=10):
    """Hand-assembled bank for classification tests."""
    vectors = np.asarray(vectors, dtype=np.float64)
    protos = [
        Prototype(
            label=int(c),
            latent=vectors[i],
            raw=vectors[i] if raw is None else np.asarray(raw[i], dtype=np.float64),
            provenance=None,
        )
        for i, c in enumerate(labels)
    ]
    return PrototypeBank(
        method="minibatch-kmeans",
        mode="centroid",
        seed=0,
        latent_dim=vectors.shape[1],
        band_count=protos[0].raw.shape[0],
        per_class=per_class,
        prototypes=protos,
    )


def oracle_classify(query, bank, k):
    """Exhaustive-sort oracle with the documented tie rules."""
    entries = sorted(
        (float(np.linalg.norm(p.latent - query)), i, p.label)
        for i, p in enumerate(bank.prototypes)
    )[:k]
    votes = {}
    sums = {}
    for dist, _, label in entries:
        votes[label] = votes.get(label, 0) + 1
        sums[label] = sums.get(label, 0.0) + dist
    top = max(votes.values())
    tied = [c for c, v in votes.items() if v == top]
    winner = min(tied, key=lambda c: (sums[c], c))
    return winner, top / k


class TestCollectClassPixels:
    def test_all_pixels_collected_when_uncapped(self):
        image, labels = three_class_scene(seed=0)
        samples = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=None)
        per_class = {c: int((labels == c).sum()) for c in (LAND, WATER, CLOUD)}
        for c in (LAND, WATER, CLOUD):
            assert len(samples[c]) == per_class[c]

    def test_single_class_image_errors_on_missing_classes(self):
        image = make_image(np.full((2, 2, 13), 0.5))
        labels = np.full((2, 2), WATER, dtype=np.uint8)
        with pytest.raises(ValueError, match="Land"):
            collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=None)
        samples = collect_class_pixels(
            [(image, labels)], IDENTITY, cap_per_class=None, classes=(WATER,)
        )
        assert len(samples[WATER]) == 4

    def test_cap_is_respected_and_deterministic(self):
        image, labels = three_class_scene(seed=1)
        a = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=2, seed=9)
        b = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=2, seed=9)
        for c in (LAND, WATER, CLOUD):
            assert len(a[c]) == 2
            np.testing.assert_array_equal(a[c].latent, b[c].latent)

    def test_provenance_points_back_to_source_pixel(self):
        image, labels = three_class_scene(seed=2)
        samples = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=5, seed=0)
        for c in (LAND, WATER, CLOUD):
            for i, prov in enumerate(samples[c].provenance):
                assert prov.image_id == image.image_id
                np.testing.assert_array_equal(
                    samples[c].raw[i], image.data[prov.row, prov.col].astype(np.float64)
                )
                assert labels[prov.row, prov.col] == c

    def test_invalid_pixels_never_sampled(self):
        image, labels = three_class_scene(seed=3)
        valid = image.valid_mask.copy()
        valid[:, 0] = False
        masked = make_image(image.data, valid, image_id=image.image_id)
        labels = labels.copy()
        labels[0, :] = INVALID
        samples = collect_class_pixels(
            [(masked, labels)], IDENTITY, cap_per_class=None
        )
        for c in (LAND, WATER, CLOUD):
            for prov in samples[c].provenance:
                assert prov.col != 0 and prov.row != 0


class TestNearestRealPixel:
    def _samples(self, values):
        values = np.asarray(values, dtype=np.float64)
        return ClassSamples(
            latent=values,
            raw=values,
            provenance=[Provenance("img", 0, i) for i in range(len(values))],
        )

    def test_exact_member_matches_itself(self):
        samples = self._samples([[0.0], [2.0]])
        assert nearest_real_pixel([2.0], samples) == 1

    def test_closer_sample_wins(self):
        samples = self._samples([[0.0], [2.0]])
        assert nearest_real_pixel([0.9], samples) == 0

    def test_tie_breaks_to_lower_index(self):
        samples = self._samples([[0.0], [2.0]])
        assert nearest_real_pixel([1.0], samples) == 0


class TestBuildBank:
    def _corpus_samples(self, seed=0, cap=60):
        image, labels = three_class_scene(seed=seed, height=9, width=9)
        return collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=cap, seed=seed)

    def test_bank_size_and_latent_length(self):
        samples = self._corpus_samples()
        bank = build_prototype_bank(samples, "minibatch-kmeans", "nearest-real-pixel",
                                    per_class=5, seed=0, iters=50)
        assert len(bank) == 15
        assert all(p.latent.shape == (13,) for p in bank.prototypes)

    def test_medoid_bank_has_full_provenance(self):
        samples = self._corpus_samples()
        bank = build_prototype_bank(samples, "kmedoids", "nearest-real-pixel",
                                    per_class=4, seed=0)
        assert all(p.provenance is not None for p in bank.prototypes)

    def test_real_pixel_prototypes_match_their_source(self):
        samples = self._corpus_samples()
        bank = build_prototype_bank(samples, "minibatch-kmeans", "nearest-real-pixel",
                                    per_class=4, seed=0, iters=50)
        image, labels = three_class_scene(seed=0, height=9, width=9)
        for p in bank.prototypes:
            assert p.provenance is not None
            np.testing.assert_array_equal(
                p.raw, image.data[p.provenance.row, p.provenance.col].astype(np.float64)
            )
            np.testing.assert_array_equal(p.latent, p.raw)  # identity provider

    def test_centroid_bank_lacks_provenance(self):
        samples = self._corpus_samples()
        bank = build_prototype_bank(samples, "minibatch-kmeans", "centroid",
                                    per_class=3, seed=0, iters=50)
        assert all(p.provenance is None for p in bank.prototypes)

    def test_published_defaults(self):
        from floodkit.prototypes import (
            DEFAULT_CONFIDENCE_THRESHOLD,
            DEFAULT_NEIGHBORS,
            DEFAULT_PROTOTYPES_PER_CLASS,
        )

        assert DEFAULT_PROTOTYPES_PER_CLASS == 100
        assert DEFAULT_NEIGHBORS == 10
        assert DEFAULT_CONFIDENCE_THRESHOLD == 0.8

    def test_hundred_per_class_gives_three_hundred(self):
        image, labels = three_class_scene(seed=8, height=18, width=51)
        samples = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=None)
        bank = build_prototype_bank(
            samples, "minibatch-kmeans", "nearest-real-pixel",
            per_class=100, seed=0, batch_size=256, iters=30,
        )
        assert len(bank) == 300
        assert all(p.latent.shape == (13,) for p in bank.prototypes)

    def test_different_per_class_changes_bank(self):
        samples = self._corpus_samples()
        small = build_prototype_bank(samples, "minibatch-kmeans", "nearest-real-pixel",
                                     per_class=2, seed=0, iters=50)
        large = build_prototype_bank(samples, "minibatch-kmeans", "nearest-real-pixel",
                                     per_class=10, seed=0, iters=50)
        assert len(small) == 6 and len(large) == 30

    def test_serialization_round_trip_and_determinism(self, tmp_path):
        samples = self._corpus_samples()
        bank_a = build_prototype_bank(samples, "kmedoids", "nearest-real-pixel",
                                      per_class=3, seed=5)
        bank_b = build_prototype_bank(samples, "kmedoids", "nearest-real-pixel",
                                      per_class=3, seed=5)
        assert bank_a.to_json() == bank_b.to_json()
        path = tmp_path / "bank.json"
        bank_a.save(path)
        loaded = PrototypeBank.load(path)
        assert loaded.to_json() == bank_a.to_json()
        assert loaded.latent_dim == 13 and loaded.band_count == 13
        np.testing.assert_array_equal(loaded.latent_matrix, bank_a.latent_matrix)

    def test_empty_class_rejected(self):
        samples = self._corpus_samples()
        samples[LAND] = ClassSamples(
            latent=np.empty((0, 13)), raw=np.empty((0, 13)), provenance=[]
        )
        with pytest.raises(ValueError, match="no samples"):
            build_prototype_bank(samples, "minibatch-kmeans", "centroid", per_class=2)


class TestClassifyPixel:
    def test_exact_prototype_hit(self):
        bank = bank_from_vectors([[0.0, 0.0], [5.0, 5.0]], [WATER, LAND])
        label, confidence = classify_pixel([0.0, 0.0], bank, k=1)
        assert (label, confidence) == (WATER, 1.0)

    def test_two_of_three_majority(self):
        bank = bank_from_vectors(
            [[0.0], [0.2], [0.4], [9.0]], [WATER, WATER, LAND, CLOUD]
        )
        label, confidence = classify_pixel([0.1], bank, k=3)
        assert label == WATER
        assert confidence == pytest.approx(2 / 3)

    def test_eight_of_ten_boundary(self):
        vectors = [[float(i)] for i in range(10)]
        labels = [WATER] * 8 + [LAND] * 2
        bank = bank_from_vectors(vectors, labels)
        label, confidence = classify_pixel([4.5], bank, k=10)
        assert label == WATER
        assert confidence == pytest.approx(0.8)
        assert threshold_confidence(np.array([[confidence]]), 0.8)[0, 0]

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(30):
            n_protos = int(rng.integers(5, 60))
            dim = int(rng.integers(1, 6))
            vectors = rng.normal(size=(n_protos, dim))
            labels = rng.integers(1, 4, size=n_protos)
            bank = bank_from_vectors(vectors, labels)
            k = int(rng.integers(1, min(n_protos, 12) + 1))
            query = rng.normal(size=dim)
            assert classify_pixel(query, bank, k) == oracle_classify(query, bank, k)

    def test_duplicate_prototypes_tie_break_by_index(self):
        # two identical prototypes with different classes: k=1 must pick index 0
        bank = bank_from_vectors([[1.0], [1.0]], [CLOUD, LAND])
        label, _ = classify_pixel([1.0], bank, k=1)
        assert label == CLOUD

    def test_class_tie_broken_by_summed_distance(self):
        # one Water at 0.4, one Land at 0.5: counts tie at k=2, Water is nearer
        bank = bank_from_vectors([[0.4], [-0.5]], [WATER, LAND])
        label, confidence = classify_pixel([0.0], bank, k=2)
        assert label == WATER and confidence == 0.5

    def test_k_bounds(self):
        bank = bank_from_vectors([[0.0]], [WATER])
        with pytest.raises(ValueError):
            classify_pixel([0.0], bank, k=2)


class TestSegmentImage:
    def test_uniform_bank_labels_everything(self, rng):
        bank = bank_from_vectors(rng.normal(size=(4, 13)), [LAND] * 4)
        image = make_image(rng.normal(size=(3, 3, 13)))
        labels, confidence = segment_image(image, bank, IDENTITY, k=3)
        assert (labels == LAND).all()
        assert (confidence == 1.0).all()

    def test_invalid_pixels_get_zero(self, rng):
        bank = bank_from_vectors(rng.normal(size=(4, 13)), [LAND, WATER, CLOUD, WATER])
        valid = np.ones((3, 3), dtype=bool)
        valid[1, 1] = False
        image = make_image(rng.normal(size=(3, 3, 13)), valid)
        labels, confidence = segment_image(image, bank, IDENTITY, k=2)
        assert labels[1, 1] == INVALID
        assert confidence[1, 1] == 0.0
        assert (labels[valid] != INVALID).all()

    def test_matches_pixelwise_classify(self, rng):
        bank = bank_from_vectors(rng.normal(size=(20, 13)), rng.integers(1, 4, size=20))
        image = make_image(rng.normal(size=(4, 4, 13)))
        labels, confidence = segment_image(image, bank, IDENTITY, k=5)
        for r in range(4):
            for c in range(4):
                label, conf = classify_pixel(image.data[r, c], bank, k=5)
                assert labels[r, c] == label
                assert confidence[r, c] == pytest.approx(conf)

    def test_confidence_quantization_and_floor(self, rng):
        bank = bank_from_vectors(rng.normal(size=(30, 5)), rng.integers(1, 4, size=30))
        k = 9
        queries = rng.normal(size=(50, 5))
        for q in queries:
            _, conf = classify_pixel(q, bank, k=k)
            assert conf == pytest.approx(round(conf * k) / k)
            assert conf >= np.ceil(k / 3) / k

    def test_training_pixels_classify_to_their_class(self):
        # full-coverage bank: every training pixel is its own prototype
        image, labels = three_class_scene(seed=4, height=6, width=6)
        samples = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=None)
        per_class = max(len(samples[c]) for c in samples)
        bank = build_prototype_bank(
            samples, "minibatch-kmeans", "nearest-real-pixel",
            per_class=per_class, seed=0, iters=20,
        )
        out_labels, confidence = segment_image(image, bank, IDENTITY, k=1)
        np.testing.assert_array_equal(out_labels, labels)
        assert (confidence == 1.0).all()


class TestExplainPixel:
    def _setup(self, rng):
        bank = bank_from_vectors(rng.normal(size=(15, 13)), rng.integers(1, 4, size=15))
        image = make_image(rng.normal(size=(4, 4, 13)))
        return bank, image

    def test_distances_nondecreasing(self, rng):
        bank, image = self._setup(rng)
        info = explain_pixel(image, 1, 2, bank, IDENTITY, k=6)
        dists = [nb.distance for nb in info.neighbors]
        assert dists == sorted(dists)

    def test_agrees_with_segmentation(self, rng):
        bank, image = self._setup(rng)
        labels, confidence = segment_image(image, bank, IDENTITY, k=6)
        info = explain_pixel(image, 2, 3, bank, IDENTITY, k=6)
        assert info.label == labels[2, 3]
        assert info.confidence == pytest.approx(confidence[2, 3])

    def test_invalid_pixel_rejected(self, rng):
        bank, image = self._setup(rng)
        valid = image.valid_mask.copy()
        valid[0, 0] = False
        blocked = make_image(image.data, valid, image_id=image.image_id)
        with pytest.raises(ValueError, match="invalid"):
            explain_pixel(blocked, 0, 0, bank, IDENTITY, k=3)

    def test_medoid_bank_explanations_name_sources(self):
        image, labels = three_class_scene(seed=5)
        samples = collect_class_pixels([(image, labels)], IDENTITY, cap_per_class=10, seed=1)
        bank = build_prototype_bank(samples, "kmedoids", "nearest-real-pixel",
                                    per_class=3, seed=1)
        info = explain_pixel(image, 0, 0, bank, IDENTITY, k=4)
        for nb in info.neighbors:
            assert nb.provenance is not None
            assert nb.provenance.image_id == image.image_id
        doc = info.to_dict()
        assert doc["neighbors"][0]["provenance"]["image_id"] == image.image_id


class TestProjection:
    def test_2d_bank_preserves_pairwise_distances(self, rng):
        vectors = rng.normal(size=(12, 2))
        bank = bank_from_vectors(vectors, rng.integers(1, 4, size=12))
        coords = project_prototypes_2d(bank)
        orig = np.linalg.norm(vectors[:, None] - vectors[None, :], axis=2)
        proj = np.linalg.norm(coords[:, None] - coords[None, :], axis=2)
        np.testing.assert_allclose(proj, orig, atol=1e-9)

    def test_collinear_points_have_flat_second_axis(self):
        line = np.outer(np.arange(6, dtype=np.float64), [1.0, 2.0, -1.0])
        bank = bank_from_vectors(line, [WATER] * 6)
        coords = project_prototypes_2d(bank)
        assert coords[:, 1].std() == pytest.approx(0.0, abs=1e-9)

    def test_matches_eigendecomposition_oracle(self, rng):
        vectors = rng.normal(size=(40, 7))
        bank = bank_from_vectors(vectors, rng.integers(1, 4, size=40))
        coords = project_prototypes_2d(bank)
        centered = vectors - vectors.mean(axis=0)
        eigvals, eigvecs = np.linalg.eigh(np.cov(centered.T))
        axes = eigvecs[:, np.argsort(eigvals)[::-1][:2]]
        for j in range(2):
            nz = np.flatnonzero(np.abs(axes[:, j]) > 1e-12)
            if nz.size and axes[nz[0], j] < 0:
                axes[:, j] = -axes[:, j]
        np.testing.assert_allclose(coords, centered @ axes, atol=1e-6)

    def test_needs_two_prototypes(self):
        bank = bank_from_vectors([[0.0, 1.0]], [WATER])
        with pytest.raises(ValueError):
            project_prototypes_2d(bank)


def test_threshold_confidence_rules():
    conf = np.array([[0.8, 0.7], [0.0, 1.0]])
    high = threshold_confidence(conf, 0.8)
    np.testing.assert_array_equal(high, [[True, False], [False, True]])
    assert threshold_confidence(conf, 0.0).all()
    with pytest.raises(ValueError):
        threshold_confidence(conf, 1.5)
