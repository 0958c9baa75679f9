# cluster_engine.py
"""PCA reduction, density clustering (HDBSCAN), 2D projection and pair evaluation."""
import json
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from common import config
from common.chart_utils import ChartManager
from common.errors import LookalikeError
from common.utils import atomic_write_bytes, atomic_write_json, write_frame_csv

logger = logging.getLogger(__name__)

OUTLIER = -1
SIMILAR = "similar"
DIFFERENT = "different"


class ClusterError(LookalikeError):
    pass


class DegenerateInput(ClusterError):
    pass


class TooFewPoints(ClusterError):
    pass


class UnknownId(ClusterError):
    pass


class PairsFormatError(ClusterError):
    pass


# ---------------------------------------------------------------- PCA

@dataclass
class PcaModel:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    degenerate: bool = False

    @property
    def n_components(self):
        return int(self.components.shape[0])

    def transform(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.components.T

    def inverse_transform(self, scores):
        return (np.asarray(scores, dtype=np.float64) @ self.components) * self.scale + self.mean

    def summary(self, variance_target=None):
        return {
            "n_components": self.n_components,
            "dim": int(self.mean.shape[0]),
            "explained_variance_ratio": [float(r) for r in self.explained_variance_ratio],
            "retained_variance": float(np.sum(self.explained_variance_ratio)),
            "variance_target": variance_target,
            "standardized": bool(np.any(self.scale != 1.0)),
            "degenerate": self.degenerate,
        }


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DegenerateInput(f"expected a 2-D matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise DegenerateInput(f"need at least 2 rows, got {X.shape[0]}")
    return X


def _svd_fixed_signs(Z):
    """SVD with each component's largest-magnitude loading made positive."""
    U, S, Vt = np.linalg.svd(Z, full_matrices=False)
    pivots = np.argmax(np.abs(Vt), axis=1)
    signs = np.sign(Vt[np.arange(Vt.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return U * signs, S, Vt * signs[:, None]


def pca_fit_transform(embeddings, variance_target=config.VARIANCE_TARGET, standardize=False):
    """
    Fit PCA and keep the smallest number of components reaching variance_target.

    Parameters:
        embeddings: n x D matrix.
        variance_target: cumulative explained-variance ratio to reach.
        standardize: z-score each dimension first (zero-variance dimensions unscaled).

    Returns:
        (PcaModel, n x m score matrix). All-identical rows give a degenerate
        model with m = 1 and zero variance.
    """
    X = _as_matrix(embeddings)
    if not 0 < variance_target <= 1:
        raise ValueError("variance_target must be in (0, 1]")
    n, dim = X.shape
    mean = X.mean(axis=0)
    scale = np.ones(dim)
    if standardize:
        std = X.std(axis=0)
        scale = np.where(std > 0, std, 1.0)

    if np.all(np.ptp(X, axis=0) == 0):
        logger.warning("all %d rows are identical; PCA is degenerate", n)
        components = np.zeros((1, dim))
        components[0, 0] = 1.0
        model = PcaModel(mean, scale, components, np.zeros(1), np.zeros(1), degenerate=True)
        return model, np.zeros((n, 1))

    Z = (X - mean) / scale
    _, S, Vt = _svd_fixed_signs(Z)
    variance = S ** 2 / (n - 1)
    ratio = variance / variance.sum()
    m = int(np.argmax(np.cumsum(ratio) >= variance_target - 1e-12)) + 1
    model = PcaModel(mean, scale, Vt[:m].copy(), variance[:m].copy(), ratio[:m].copy())
    logger.info("PCA kept %d of %d components (%.4f of variance)", m, len(S), float(ratio[:m].sum()))
    return model, Z @ model.components.T


def project_2d(points):
    """Scores on the first two principal components; rank-deficient axes are zero."""
    X = _as_matrix(points)
    Z = X - X.mean(axis=0)
    coords = np.zeros((X.shape[0], 2))
    if not np.any(Z):
        return coords
    _, S, Vt = _svd_fixed_signs(Z)
    tol = S[0] * max(Z.shape) * np.finfo(np.float64).eps
    for axis in range(min(2, len(S))):
        if S[axis] > tol:
            coords[:, axis] = Z @ Vt[axis]
    return coords


# ---------------------------------------------------------------- HDBSCAN

@dataclass
class ClusterAssignment:
    ids: Tuple[str, ...]
    labels: np.ndarray
    _positions: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.ids) != len(self.labels):
            raise ValueError("ids and labels differ in length")
        self._positions = {ext_id: n for n, ext_id in enumerate(self.ids)}

    def __contains__(self, ext_id):
        return ext_id in self._positions

    def __len__(self):
        return len(self.ids)

    def label_of(self, ext_id):
        try:
            return int(self.labels[self._positions[ext_id]])
        except KeyError:
            raise UnknownId(f"{ext_id} is not in the assignment", ext_id) from None

    def members(self, label):
        return [ext_id for ext_id, lab in zip(self.ids, self.labels) if lab == label]

    def clusters(self):
        """label -> member ids, outliers excluded."""
        groups = {}
        for ext_id, label in zip(self.ids, self.labels):
            if label != OUTLIER:
                groups.setdefault(int(label), []).append(ext_id)
        return dict(sorted(groups.items()))

    @property
    def n_clusters(self):
        return len(set(self.labels[self.labels != OUTLIER].tolist()))

    @property
    def n_outliers(self):
        return int(np.sum(self.labels == OUTLIER))

    def to_frame(self):
        return pd.DataFrame({"id": list(self.ids), "label": self.labels.astype(int)})


def _core_distances(dist, min_samples):
    k = min(min_samples, dist.shape[0]) - 1
    return np.sort(dist, axis=1, kind="stable")[:, k]


def _prim_mst(weights):
    """Dense Prim over a complete graph; lowest index wins ties. Returns (a, b, w) rows."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    source = np.zeros(n, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    for step in range(n - 1):
        candidates = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(candidates))
        edges[step] = (source[nxt], nxt, candidates[nxt])
        in_tree[nxt] = True
        closer = ~in_tree & (weights[nxt] < best)
        best[closer] = weights[nxt][closer]
        source[closer] = nxt
    return edges


def _single_linkage(edges, n):
    """Union-find merge of sorted MST edges. Row i creates node n + i: (left, right, dist, size)."""
    edges = edges[np.argsort(edges[:, 2], kind="mergesort")]
    parent = np.arange(2 * n - 1)
    size = np.concatenate([np.ones(n, dtype=np.int64), np.zeros(n - 1, dtype=np.int64)])

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    tree = []
    for i, (a, b, d) in enumerate(edges):
        ra, rb = find(int(a)), find(int(b))
        node = n + i
        size[node] = size[ra] + size[rb]
        parent[ra] = parent[rb] = node
        tree.append((ra, rb, float(d), int(size[node])))
    return tree


def _leaves(tree, n, node):
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            left, right, _, _ = tree[x - n]
            stack.extend((right, left))
    return out


def _condense(tree, n, min_cluster_size):
    """Condensed tree rows (parent, child, lambda, child_size); clusters are labelled from n."""
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    rows = []

    def node_size(x):
        return 1 if x < n else tree[x - n][3]

    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node < n or node not in relabel:
            continue
        left, right, distance, _ = tree[node - n]
        lam = 1.0 / distance if distance > 0 else np.inf
        parent_label = relabel[node]
        big_left = node_size(left) >= min_cluster_size
        big_right = node_size(right) >= min_cluster_size

        if big_left and big_right:
            for child in (left, right):
                relabel[child] = next_label
                rows.append((parent_label, next_label, lam, node_size(child)))
                next_label += 1
                queue.append(child)
            continue
        for child, big in ((left, big_left), (right, big_right)):
            if big:
                relabel[child] = parent_label
                queue.append(child)
            else:
                rows.extend((parent_label, leaf, lam, 1) for leaf in _leaves(tree, n, child))
    return rows


def _stabilities(rows, root):
    births = {root: 0.0}
    for parent, child, lam, _ in rows:
        if child >= root:
            births[child] = lam
    stability = {c: 0.0 for c in births}
    for parent, _, lam, size in rows:
        birth = births[parent]
        if lam != birth:
            stability[parent] += (lam - birth) * size
    return stability


def _select_eom(rows, root):
    stability = _stabilities(rows, root)
    children = {}
    for parent, child, _, _ in rows:
        if child >= root:
            children.setdefault(parent, []).append(child)
    selected = {c: True for c in stability if c != root}
    # children carry larger labels than their parents
    for node in sorted(selected, reverse=True):
        subtree = sum(stability[c] for c in children.get(node, []))
        if subtree > stability[node]:
            selected[node] = False
            stability[node] = subtree
        else:
            stack = list(children.get(node, []))
            while stack:
                sub = stack.pop()
                selected[sub] = False
                stack.extend(children.get(sub, []))
    return {c for c, keep in selected.items() if keep}


def _label_points(rows, n, selected, min_cluster_size):
    root = n
    cluster_parent = {}
    point_parent = np.full(n, root, dtype=np.int64)
    for parent, child, lam, _ in rows:
        if child < n:
            point_parent[child] = parent
        else:
            cluster_parent[child] = parent

    labels = np.full(n, OUTLIER, dtype=np.int64)
    if not selected:
        # Without a selectable child cluster, exact duplicates left in the root still form one cluster.
        dropped = [(child, lam) for parent, child, lam, _ in rows if parent == root and child < n]
        dupes = [child for child, lam in dropped if np.isinf(lam)]
        if len(dupes) >= min_cluster_size:
            labels[dupes] = 0
        return labels

    for point in range(n):
        c = int(point_parent[point])
        while c != root and c not in selected:
            c = cluster_parent[c]
        if c in selected:
            labels[point] = c
    return labels


def _renumber(labels):
    """Dense cluster ids ordered by each cluster's smallest member index."""
    mapping = {}
    for label in labels:
        if label != OUTLIER and label not in mapping:
            mapping[label] = len(mapping)
    return np.array([mapping.get(label, OUTLIER) for label in labels], dtype=np.int64)


def hdbscan_labels(points, min_cluster_size=config.MIN_CLUSTER_SIZE, min_samples=config.MIN_SAMPLES):
    """Label array for a point matrix: dense cluster ids, OUTLIER for noise."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if min_cluster_size < 2 or min_samples < 1:
        raise ValueError("min_cluster_size must be >= 2 and min_samples >= 1")
    if n < min_cluster_size:
        raise TooFewPoints(f"{n} points is fewer than min_cluster_size={min_cluster_size}")

    dist = squareform(pdist(X, metric="euclidean"))
    core = _core_distances(dist, min_samples)
    reach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    tree = _single_linkage(_prim_mst(reach), n)
    rows = _condense(tree, n, min_cluster_size)
    selected = _select_eom(rows, n)
    return _renumber(_label_points(rows, n, selected, min_cluster_size))


def hdbscan(points, ids=None, min_cluster_size=config.MIN_CLUSTER_SIZE, min_samples=config.MIN_SAMPLES):
    """
    Density clustering of an n x m matrix with Euclidean distance.

    Parameters:
        points: n x m matrix (PCA scores).
        ids: extension ids in row order (defaults to "0".."n-1").
        min_cluster_size: smallest group reported as a cluster.
        min_samples: neighbourhood size for core distances, self included.

    Returns:
        ClusterAssignment.
    """
    labels = hdbscan_labels(points, min_cluster_size, min_samples)
    if ids is None:
        ids = [str(i) for i in range(len(labels))]
    assignment = ClusterAssignment(tuple(ids), labels)
    logger.info("HDBSCAN found %d clusters, %d outliers among %d points",
                assignment.n_clusters, assignment.n_outliers, len(assignment))
    return assignment


# ---------------------------------------------------------------- pair evaluation

@dataclass(frozen=True)
class PairVerdict:
    id_a: str
    id_b: str
    expected: str
    predicted: str


@dataclass
class EvalMetrics:
    accuracy: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int
    verdicts: List[PairVerdict] = field(default_factory=list)

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "pairs": len(self.verdicts),
        }


def _normalize_expected(value):
    text = str(value).strip().lower()
    if text in (SIMILAR, "1", "true", "yes"):
        return SIMILAR
    if text in (DIFFERENT, "0", "false", "no", "not_similar"):
        return DIFFERENT
    raise PairsFormatError(f"expected must be similar or different, got {value!r}")


def _ratio(num, den):
    return num / den if den else 0.0


def evaluate_pairs(assignment, pairs):
    """
    Score ground-truth pairs against an assignment; similar is the positive class.

    A pair is predicted similar only when both ids share a non-outlier cluster.
    """
    verdicts = []
    for id_a, id_b, expected in pairs:
        if id_a == id_b:
            raise PairsFormatError(f"pair repeats the same id {id_a}", id_a)
        label_a, label_b = assignment.label_of(id_a), assignment.label_of(id_b)
        same = label_a != OUTLIER and label_a == label_b
        verdicts.append(PairVerdict(id_a, id_b, _normalize_expected(expected), SIMILAR if same else DIFFERENT))

    tp = sum(v.expected == SIMILAR and v.predicted == SIMILAR for v in verdicts)
    fp = sum(v.expected == DIFFERENT and v.predicted == SIMILAR for v in verdicts)
    fn = sum(v.expected == SIMILAR and v.predicted == DIFFERENT for v in verdicts)
    tn = sum(v.expected == DIFFERENT and v.predicted == DIFFERENT for v in verdicts)
    return EvalMetrics(
        accuracy=_ratio(tp + tn, len(verdicts)),
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        tp=tp, fp=fp, fn=fn, tn=tn,
        verdicts=verdicts,
    )


def load_pairs_csv(path):
    """Read id_a,id_b,expected rows; a header line is optional."""
    df = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True, comment="#")
    if df.empty:
        return []
    if df.shape[1] < 3:
        raise PairsFormatError(f"{path}: expected 3 columns, found {df.shape[1]}")
    if str(df.iloc[0, 0]).strip().lower() == "id_a":
        df = df.iloc[1:]
    pairs = []
    for row in df.itertuples(index=False):
        id_a, id_b, expected = (str(v).strip() for v in row[:3])
        pairs.append((id_a, id_b, _normalize_expected(expected)))
    return pairs


# ---------------------------------------------------------------- persistence

def save_matrix(path, ids, matrix, **extra):
    """Little-endian float32 rows plus a JSON sidecar {n, dim, ids}."""
    matrix = np.asarray(matrix, dtype="<f4")
    atomic_write_bytes(path, matrix.tobytes())
    sidecar = {"n": int(matrix.shape[0]), "dim": int(matrix.shape[1]), "ids": list(ids)}
    sidecar.update(extra)
    atomic_write_json(os.path.splitext(path)[0] + ".json", sidecar)


def load_matrix(path):
    with open(os.path.splitext(path)[0] + ".json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    with open(path, "rb") as f:
        data = np.frombuffer(f.read(), dtype="<f4")
    expected = sidecar["n"] * sidecar["dim"]
    if data.size != expected:
        raise DegenerateInput(f"{path} holds {data.size} floats, sidecar says {expected}")
    return list(sidecar["ids"]), data.reshape(sidecar["n"], sidecar["dim"]).astype(np.float64), sidecar


def save_assignments(path, assignment):
    write_frame_csv(path, assignment.to_frame())


def load_assignments(path):
    df = pd.read_csv(path, dtype={"id": str, "label": int})
    return ClusterAssignment(tuple(df["id"]), df["label"].to_numpy())


def save_projection(store_dir, assignment, coords, title="Extension clusters", highlight=None,
                    plot_name="clusters.png"):
    """Write projection.csv (id, x, y, label) and the scatter plot; returns the frame."""
    coords = np.asarray(coords, dtype=np.float64)
    df = pd.DataFrame({
        "id": list(assignment.ids),
        "x": coords[:, 0],
        "y": coords[:, 1],
        "label": assignment.labels.astype(int),
    })
    write_frame_csv(os.path.join(store_dir, "projection.csv"), df)
    plot_path = os.path.join(store_dir, "reports", plot_name)
    os.makedirs(os.path.dirname(plot_path), exist_ok=True)
    ChartManager().plot_clusters(df, title=title, highlight=highlight, save_path=plot_path)
    return df


def load_projection(store_dir):
    path = os.path.join(store_dir, "projection.csv")
    if not os.path.exists(path):
        return None
    return pd.read_csv(path, dtype={"id": str})
