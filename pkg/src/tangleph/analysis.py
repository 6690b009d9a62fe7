"""Isomap embeddings, silhouette scores, and similarity clustering.

Operates on the pairwise distance matrices produced by the metrics layer:
geodesic Isomap for 2-D maps of diagram space, silhouette coefficients for
cluster-separation scores, and single-linkage clustering of sequence
similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    ConnectivityError,
    DegenerateGeometryError,
    IdCollisionError,
    NormalizationError,
    ParameterError,
    ParseError,
    SilhouetteUndefinedError,
)
from .metrics import DistanceMatrix

DEFAULT_N_NEIGHBORS = 5
DEFAULT_SIM_THRESHOLD = 0.7
OTHER_LABEL = "Other"


@dataclass
class Embedding:
    """Low-dimensional coordinates for a set of structures."""

    ids: list[str]
    coords: np.ndarray  # (n, dim)
    n_neighbors: int
    dim: int

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[0] != len(self.ids):
            raise ParameterError(
                f"coords shape {self.coords.shape} does not match {len(self.ids)} ids"
            )
        if self.coords.shape[1] != self.dim:
            raise ParameterError(
                f"coords have {self.coords.shape[1]} columns, expected dim={self.dim}"
            )
        if not np.all(np.isfinite(self.coords)):
            raise ParameterError("embedding coordinates must be finite")

    def distances(self) -> np.ndarray:
        """Euclidean distances between embedded points, exactly symmetric."""
        d2 = np.zeros((len(self.ids), len(self.ids)))
        for c in range(self.coords.shape[1]):
            diff = self.coords[:, c, None] - self.coords[None, :, c]
            d2 += diff * diff
        return np.sqrt(d2)


@dataclass
class ClusterLabels:
    """One class label per structure id ("Other" is an allowed label)."""

    ids: list[str]
    labels: list[str]

    def __post_init__(self):
        if len(self.ids) != len(self.labels):
            raise ParameterError(
                f"{len(self.ids)} ids but {len(self.labels)} labels"
            )
        if len(set(self.ids)) != len(self.ids):
            raise IdCollisionError("duplicate ids in cluster labels")

    def as_dict(self) -> dict[str, str]:
        return dict(zip(self.ids, self.labels))


def _knn_graph(values: np.ndarray, n_neighbors: int) -> csr_matrix:
    # edge if either endpoint lists the other among its k nearest
    n = values.shape[0]
    order = np.argsort(values, axis=1, kind="stable")
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        picked = 0
        for j in order[i]:
            if j == i:
                continue
            adj[i, j] = True
            picked += 1
            if picked == n_neighbors:
                break
    adj |= adj.T
    rows, cols = np.nonzero(adj)
    # explicit zero-weight data entries are preserved by the coo->csr path,
    # so duplicate structures (distance 0) stay connected
    return csr_matrix((values[rows, cols], (rows, cols)), shape=(n, n))


def _components_as_ids(graph: csr_matrix, ids: list[str]) -> list[list[str]]:
    n_comp, member = connected_components(graph, directed=False)
    groups: list[list[str]] = [[] for _ in range(n_comp)]
    for idx, comp in enumerate(member):
        groups[comp].append(ids[idx])
    groups.sort(key=lambda g: g[0])
    return groups


def isomap_embed(
    dm: DistanceMatrix,
    n_neighbors: int = DEFAULT_N_NEIGHBORS,
    dim: int = 2,
) -> Embedding:
    """Classical Isomap: kNN graph -> geodesics -> classical MDS.

    Raises ConnectivityError when the neighborhood graph is disconnected
    (listing the components, so the caller can raise n_neighbors) and
    DegenerateGeometryError when the geodesic geometry cannot support `dim`
    coordinates (non-positive leading eigenvalue).
    """
    n = len(dm.ids)
    if not 1 <= n_neighbors < n:
        raise ParameterError(
            f"n_neighbors must be in [1, {n - 1}] for {n} points, got {n_neighbors}"
        )
    if dim < 1:
        raise ParameterError(f"embedding dimension must be >= 1, got {dim}")

    graph = _knn_graph(dm.values, n_neighbors)
    groups = _components_as_ids(graph, dm.ids)
    if len(groups) > 1:
        raise ConnectivityError(groups)

    if dim >= n:
        # double-centering leaves at most n-1 positive eigenvalues
        raise DegenerateGeometryError(
            f"cannot embed {n} points in {dim} dimensions"
        )
    geo = shortest_path(graph, method="D", directed=False)

    # classical MDS on squared geodesics
    g2 = geo * geo
    centered = g2 - g2.mean(axis=0) - g2.mean(axis=1)[:, None] + g2.mean()
    bmat = -0.5 * centered
    bmat = (bmat + bmat.T) / 2.0
    evals, evecs = np.linalg.eigh(bmat)
    top = np.arange(n - 1, n - 1 - dim, -1)
    # exact zeros of the Gram matrix land at +-eps after eigh, so judge
    # positivity relative to the spectrum's scale
    tol = np.max(np.abs(evals)) * 1e-12
    if evals[top[-1]] <= tol:
        raise DegenerateGeometryError(
            f"cannot embed in {dim} dimensions: eigenvalue "
            f"{evals[top[-1]]:.6g} at position {dim} is not positive"
        )
    coords = evecs[:, top] * np.sqrt(evals[top])
    # fix eigenvector sign: largest-magnitude entry of each column positive
    for c in range(dim):
        pivot = np.argmax(np.abs(coords[:, c]))
        if coords[pivot, c] < 0:
            coords[:, c] = -coords[:, c]
    return Embedding(ids=list(dm.ids), coords=coords, n_neighbors=n_neighbors, dim=dim)


def _silhouette_values(
    values: np.ndarray, ids: list[str], labels: ClusterLabels
) -> np.ndarray:
    lab = labels.as_dict()
    missing = [i for i in ids if i not in lab]
    if missing:
        raise ParameterError(f"unlabeled ids: {', '.join(missing)}")
    assigned = [lab[i] for i in ids]
    classes = sorted(set(assigned))
    if len(classes) < 2:
        raise SilhouetteUndefinedError(
            f"silhouette needs >= 2 clusters, got {len(classes)}"
        )
    members = {
        c: np.array([k for k, a in enumerate(assigned) if a == c]) for c in classes
    }
    scores = np.zeros(len(ids))
    for k in range(len(ids)):
        own = members[assigned[k]]
        if own.shape[0] == 1:
            continue  # singleton contributes 0
        # diagonal is exactly zero, so summing over the whole cluster and
        # dividing by size-1 excludes self
        a = values[k, own].sum() / (own.shape[0] - 1)
        b = min(
            values[k, members[c]].mean() for c in classes if c != assigned[k]
        )
        denom = max(a, b)
        scores[k] = 0.0 if denom == 0 else (b - a) / denom
    return scores


def silhouette(data: DistanceMatrix | Embedding, labels: ClusterLabels) -> float:
    """Mean silhouette score: (b - a) / max(a, b) averaged over points.

    Accepts either a precomputed DistanceMatrix or an Embedding (Euclidean
    distances between coordinates). Singleton clusters score 0.
    """
    if isinstance(data, Embedding):
        values, ids = data.distances(), data.ids
    else:
        values, ids = data.values, data.ids
    return float(_silhouette_values(values, ids, labels).mean())


def single_linkage_clusters(
    sim: DistanceMatrix, threshold: float = DEFAULT_SIM_THRESHOLD
) -> ClusterLabels:
    """Single-linkage clustering of a [0,1] similarity matrix.

    Distances are 1 - similarity; the dendrogram is cut at `threshold`
    (clusters merged at distance <= threshold stay together). The diagonal of
    `sim` is ignored. Each cluster is labeled by its lexicographically
    smallest member id.
    """
    vals = sim.values
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise NormalizationError(
            f"similarity entries must lie in [0, 1], found range "
            f"[{vals.min():.6g}, {vals.max():.6g}]"
        )
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    n = len(sim.ids)
    if n == 1:
        return ClusterLabels(ids=list(sim.ids), labels=[sim.ids[0]])
    iu = np.triu_indices(n, k=1)
    condensed = 1.0 - vals[iu]
    merge = linkage(condensed, method="single")
    flat = fcluster(merge, t=threshold, criterion="distance")
    names: dict[int, str] = {}
    for cluster in np.unique(flat):
        names[cluster] = min(sim.ids[k] for k in np.nonzero(flat == cluster)[0])
    return ClusterLabels(ids=list(sim.ids), labels=[names[c] for c in flat])


def top_k_classes(labels: ClusterLabels, k: int) -> ClusterLabels:
    """Keep the k most populous clusters; relabel the rest "Other".

    Ties in population rank are broken toward the cluster containing the
    lexicographically smallest member id.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    sizes: dict[str, int] = {}
    smallest: dict[str, str] = {}
    for sid, lab in zip(labels.ids, labels.labels):
        sizes[lab] = sizes.get(lab, 0) + 1
        if lab not in smallest or sid < smallest[lab]:
            smallest[lab] = sid
    ranked = sorted(sizes, key=lambda lab: (-sizes[lab], smallest[lab]))
    keep = set(ranked[:k])
    return ClusterLabels(
        ids=list(labels.ids),
        labels=[lab if lab in keep else OTHER_LABEL for lab in labels.labels],
    )


def embedding_to_csv(emb: Embedding) -> str:
    axis = ["x", "y", "z"]
    names = [axis[i] if i < 3 else f"c{i + 1}" for i in range(emb.dim)]
    lines = ["id," + ",".join(names)]
    for i, sid in enumerate(emb.ids):
        row = ",".join("%.17g" % v for v in emb.coords[i])
        lines.append(f"{sid},{row}")
    return "\n".join(lines) + "\n"


def embedding_from_csv(text: str, source: str = "<embedding>") -> Embedding:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("id,"):
        raise ParseError("expected header 'id,x,...'", path=source, line=1)
    dim = len(lines[0].split(",")) - 1
    ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != dim + 1:
            raise ParseError(
                f"expected {dim + 1} fields, got {len(parts)}", path=source, line=lineno
            )
        ids.append(parts[0])
        try:
            rows.append([float(f) for f in parts[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), path=source, line=lineno) from exc
    return Embedding(
        ids=ids, coords=np.array(rows).reshape(len(ids), dim), n_neighbors=0, dim=dim
    )


def labels_to_tsv(labels: ClusterLabels) -> str:
    lines = ["id\tlabel"]
    for sid, lab in zip(labels.ids, labels.labels):
        lines.append(f"{sid}\t{lab}")
    return "\n".join(lines) + "\n"


def labels_from_tsv(text: str, source: str = "<labels>") -> ClusterLabels:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "id\tlabel":
        raise ParseError("expected header 'id<TAB>label'", path=source, line=1)
    ids: list[str] = []
    labs: list[str] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split("\t")
        if len(parts) != 2:
            raise ParseError(
                f"expected 2 tab-separated fields, got {len(parts)}",
                path=source,
                line=lineno,
            )
        ids.append(parts[0])
        labs.append(parts[1])
    return ClusterLabels(ids=ids, labels=labs)
