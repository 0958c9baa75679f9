import numpy as np
import pytest
from sklearn.cluster import HDBSCAN
from sklearn.datasets import make_blobs, make_moons
from sklearn.metrics import adjusted_rand_score

from clustering.cluster_engine import (
    OUTLIER, ClusterAssignment, DegenerateInput, PairsFormatError, TooFewPoints, UnknownId, evaluate_pairs,
    hdbscan, hdbscan_labels, load_assignments, load_matrix, load_pairs_csv, pca_fit_transform, project_2d,
    save_assignments, save_matrix,
)


def _low_rank(n=200, dim=768, stds=(5.0, 4.0, 3.0), noise=1e-3, seed=0):
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, len(stds))))
    latent = rng.normal(size=(n, len(stds))) * np.array(stds)
    return latent @ basis.T + rng.normal(scale=noise, size=(n, dim)) + 0.5


# ---------------------------------------------------------------- PCA

def test_rank_one_keeps_one_component():
    t = np.linspace(-1, 1, 20)
    X = np.outer(t, np.arange(1, 9))
    model, scores = pca_fit_transform(X, 0.95)
    assert model.n_components == 1
    assert scores.shape == (20, 1)
    assert model.explained_variance_ratio[0] == pytest.approx(1.0)


def test_three_latent_directions_match_eigh():
    X = _low_rank()
    model, scores = pca_fit_transform(X, 0.95)
    assert model.n_components == 3
    eigvals = np.linalg.eigvalsh(np.cov(X, rowvar=False))[::-1][:3]
    assert np.allclose(model.explained_variance, eigvals, rtol=1e-6)
    assert np.allclose(scores.var(axis=0, ddof=1), eigvals, rtol=1e-6)


def test_reconstruction_loss_is_small():
    X = _low_rank()
    model, scores = pca_fit_transform(X, 0.95)
    error = np.mean((model.inverse_transform(scores) - X) ** 2)
    assert error < 1e-5
    assert np.allclose(model.transform(X), scores)


def test_component_signs_are_fixed():
    X = _low_rank(n=60, dim=20)
    model, _ = pca_fit_transform(X, 0.99)
    pivots = np.argmax(np.abs(model.components), axis=1)
    assert np.all(model.components[np.arange(model.n_components), pivots] > 0)
    again, _ = pca_fit_transform(X[::-1], 0.99)
    assert np.allclose(again.components, model.components, atol=1e-8)


def test_identical_rows_are_degenerate():
    model, scores = pca_fit_transform(np.ones((6, 4)), 0.95)
    assert model.degenerate and model.n_components == 1
    assert not scores.any()
    assert model.summary(0.95)["degenerate"] is True


def test_standardize_rescales_dimensions():
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.normal(size=50) * 1000, rng.normal(size=50), np.zeros(50)])
    model, _ = pca_fit_transform(X, 0.99, standardize=True)
    assert model.scale[2] == 1.0
    assert model.scale[0] == pytest.approx(X[:, 0].std())
    assert model.summary()["standardized"]


def test_bad_inputs():
    with pytest.raises(DegenerateInput):
        pca_fit_transform(np.zeros((1, 5)))
    with pytest.raises(DegenerateInput):
        pca_fit_transform(np.zeros(5))
    with pytest.raises(ValueError):
        pca_fit_transform(np.eye(3), variance_target=1.5)


def test_project_2d_variances_are_top_eigenvalues():
    X = _low_rank(n=80, dim=10)
    coords = project_2d(X)
    eigvals = np.linalg.eigvalsh(np.cov(X, rowvar=False))[::-1][:2]
    assert np.allclose(coords.var(axis=0, ddof=1), eigvals, rtol=1e-6)


def test_project_2d_rank_deficient():
    X = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    coords = project_2d(X)
    assert np.allclose(coords[:, 1], 0.0)
    assert np.ptp(coords[:, 0]) > 0
    assert not project_2d(np.ones((4, 3))).any()


# ---------------------------------------------------------------- HDBSCAN

def _agreement(points, min_cluster_size=5, min_samples=2):
    ours = hdbscan_labels(points, min_cluster_size, min_samples)
    reference = HDBSCAN(min_cluster_size=min_cluster_size, min_samples=min_samples).fit(points).labels_
    return adjusted_rand_score(reference, ours), ours, reference


def test_blobs_match_reference():
    points, truth = make_blobs(n_samples=90, centers=[[0, 0], [10, 10], [-10, 10]], cluster_std=0.8,
                               random_state=1)
    score, ours, _ = _agreement(points)
    assert score >= 0.95
    assert adjusted_rand_score(truth, ours) >= 0.9
    assert len(set(ours) - {OUTLIER}) == 3


def _point_agreement(ours, reference):
    """Share of points labelled like the reference once each cluster takes its majority reference label."""
    mapped = ours.copy()
    for label in set(ours.tolist()) - {OUTLIER}:
        values, counts = np.unique(reference[ours == label], return_counts=True)
        mapped[ours == label] = values[np.argmax(counts)]
    return float(np.mean(mapped == reference))


def _uniform(seed):
    return np.random.default_rng(seed).uniform(0.0, 10.0, size=(120, 2))


def _nested(seed):
    rng = np.random.default_rng(seed)
    core = rng.normal(scale=0.2, size=(40, 2))
    halo = rng.normal(scale=2.5, size=(60, 2))
    far = rng.normal(loc=(15.0, 0.0), scale=0.6, size=(40, 2))
    return np.vstack([core, halo, far])


def _duplicated(seed):
    points, _ = make_blobs(n_samples=40, centers=[[0, 0], [6, 6]], cluster_std=0.7, random_state=seed)
    return np.repeat(points, 3, axis=0)


def _moons(seed):
    return make_moons(n_samples=120, noise=0.05, random_state=seed)[0]


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("dataset", [_uniform, _nested, _duplicated, _moons])
def test_point_agreement_with_reference(dataset, seed):
    _, ours, reference = _agreement(dataset(seed))
    assert _point_agreement(ours, reference) >= 0.95
    assert _point_agreement(reference, ours) >= 0.95


def test_identical_points_form_one_cluster():
    assert hdbscan_labels(np.zeros((5, 3))).tolist() == [0] * 5


def test_too_small_duplicate_group_is_noise():
    points = np.vstack([np.zeros((4, 2)), [[100.0, 100.0]]])
    assert hdbscan_labels(points).tolist() == [OUTLIER] * 5


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        hdbscan_labels(np.zeros((3, 2)), min_cluster_size=5)
    with pytest.raises(ValueError):
        hdbscan_labels(np.zeros((8, 2)), min_cluster_size=1)


def test_permutation_and_scale_invariance():
    points, _ = make_blobs(n_samples=60, centers=[[0, 0], [8, 0]], cluster_std=0.5, random_state=4)
    base = hdbscan_labels(points)
    order = np.random.default_rng(0).permutation(len(points))
    permuted = hdbscan_labels(points[order])
    assert adjusted_rand_score(base[order], permuted) == pytest.approx(1.0)
    assert np.array_equal(hdbscan_labels(points * 7.5), base)


def test_labels_numbered_by_first_member():
    points = np.vstack([np.full((6, 2), 50.0), np.zeros((6, 2))]) + np.arange(12)[:, None] * 1e-3
    labels = hdbscan_labels(points)
    assert labels[0] == 0 and labels[6] == 1


def test_assignment_accessors():
    assignment = hdbscan(np.vstack([np.zeros((5, 2)), np.full((5, 2), 9.0)]), ids=list("abcdefghij"))
    assert assignment.n_clusters == 2 and assignment.n_outliers == 0
    assert assignment.label_of("a") == 0 and assignment.label_of("j") == 1
    assert assignment.clusters() == {0: list("abcde"), 1: list("fghij")}
    assert "z" not in assignment and len(assignment) == 10
    with pytest.raises(UnknownId):
        assignment.label_of("z")


# ---------------------------------------------------------------- pair evaluation

ASSIGNMENT = ClusterAssignment(("a", "b", "c", "d", "e", "f"), [0, 0, 1, 1, OUTLIER, 0])


def test_pair_metrics():
    pairs = [("a", "b", "similar"), ("c", "d", "similar"), ("a", "f", "different"), ("a", "c", "similar"),
             ("b", "c", "different")]
    metrics = evaluate_pairs(ASSIGNMENT, pairs)
    assert (metrics.tp, metrics.fp, metrics.fn, metrics.tn) == (2, 1, 1, 1)
    assert metrics.precision == pytest.approx(2 / 3)
    assert metrics.recall == pytest.approx(2 / 3)
    assert metrics.accuracy == pytest.approx(3 / 5)


def test_outliers_never_match():
    metrics = evaluate_pairs(ASSIGNMENT, [("e", "a", "similar")])
    assert metrics.fn == 1 and metrics.recall == 0.0
    assert evaluate_pairs(ASSIGNMENT, []).accuracy == 0.0


def test_pair_errors():
    with pytest.raises(UnknownId):
        evaluate_pairs(ASSIGNMENT, [("a", "zz", "similar")])
    with pytest.raises(PairsFormatError):
        evaluate_pairs(ASSIGNMENT, [("a", "a", "similar")])
    with pytest.raises(PairsFormatError):
        evaluate_pairs(ASSIGNMENT, [("a", "b", "maybe")])


def test_load_pairs_with_and_without_header(tmp_path):
    with_header = tmp_path / "h.csv"
    with_header.write_text("id_a,id_b,expected\na,b,similar\n# note\nc, d ,DIFFERENT\n")
    bare = tmp_path / "b.csv"
    bare.write_text("a,b,1\nc,d,0\n")
    expected = [("a", "b", "similar"), ("c", "d", "different")]
    assert load_pairs_csv(str(with_header)) == expected
    assert load_pairs_csv(str(bare)) == expected


# ---------------------------------------------------------------- persistence

def test_matrix_and_assignment_files(tmp_path):
    matrix = np.arange(6, dtype=float).reshape(2, 3) / 7
    save_matrix(str(tmp_path / "m.f32"), ["x", "y"], matrix, tag="t")
    ids, loaded, sidecar = load_matrix(str(tmp_path / "m.f32"))
    assert ids == ["x", "y"] and sidecar["tag"] == "t"
    assert np.allclose(loaded, matrix, atol=1e-7)

    save_assignments(str(tmp_path / "a.csv"), ASSIGNMENT)
    back = load_assignments(str(tmp_path / "a.csv"))
    assert back.ids == ASSIGNMENT.ids and back.labels.tolist() == ASSIGNMENT.labels.tolist()
