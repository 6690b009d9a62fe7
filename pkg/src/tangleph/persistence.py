"""Vietoris-Rips filtrations and degree-1 persistent homology.

The scale cap defaults to the enclosing radius of the cloud (the smallest
max-distance any single point has to the rest). At that scale the complex is
a cone, so every degree-1 class has died and nothing is censored. An explicit
smaller cap right-censors unresolved classes at the cap value instead.

All filtration values flow through `pairwise_distances` exactly once per
cloud; the optimized reduction, the brute-force oracle and the generator
search all read the same matrix, so their outputs agree to the float.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _reduction
from .errors import ParameterError, ParseError, UnknownPairError
from .geometry import KnotAnnotation, PointCloud, source_atom_index

ORACLE_MAX_POINTS = 16


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, accumulated coordinate by coordinate.

    Shared by every consumer of filtration values in this package; the fixed
    accumulation order keeps the result reproducible and exactly symmetric.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ParameterError("expected a 2-d point array")
    n, k = points.shape
    d2 = np.zeros((n, n), dtype=np.float64)
    for j in range(k):
        diff = points[:, j, None] - points[None, :, j]
        d2 += diff * diff
    return np.sqrt(d2)


def enclosing_radius(dist: np.ndarray) -> float:
    """min over points of the max distance to all others."""
    return float(np.min(np.max(dist, axis=1)))


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilteredEdge:
    u: int
    v: int
    value: float


@dataclass(frozen=True)
class PersistencePair:
    birth: float
    death: float
    censored: bool = False

    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class CycleRepresentative:
    """A Z/2 cycle attached to a persistence pair.

    edges holds cloud-index pairs (u < v); on_backbone flags edges between
    consecutive cloud points, i.e. pieces of the interpolated backbone.
    """

    pair: PersistencePair
    edges: np.ndarray
    on_backbone: np.ndarray

    def vertices(self) -> np.ndarray:
        return np.unique(self.edges)


@dataclass
class PersistenceDiagram:
    pairs: list[PersistencePair]
    source_id: str | None = None
    degree: int = 1

    def as_array(self) -> np.ndarray:
        if not self.pairs:
            return np.empty((0, 2), dtype=np.float64)
        return np.array([(p.birth, p.death) for p in self.pairs], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.pairs)


def _sorted_pairs(pairs: list[PersistencePair]) -> list[PersistencePair]:
    return sorted(pairs, key=lambda p: (p.birth, p.death))


# ---------------------------------------------------------------------------
# filtration edges
# ---------------------------------------------------------------------------

def _edge_arrays(dist: np.ndarray, max_scale: float):
    n = dist.shape[0]
    iu, iv = np.triu_indices(n, k=1)
    vals = dist[iu, iv]
    keep = vals <= max_scale
    iu, iv, vals = iu[keep], iv[keep], vals[keep]
    order = np.lexsort((iv, iu, vals))
    return (
        np.ascontiguousarray(iu[order], dtype=np.int64),
        np.ascontiguousarray(iv[order], dtype=np.int64),
        np.ascontiguousarray(vals[order], dtype=np.float64),
    )


def _resolve_scale(dist: np.ndarray, max_scale: float | None) -> tuple[float, bool]:
    if max_scale is None:
        return enclosing_radius(dist), True
    if not np.isfinite(max_scale) or max_scale <= 0:
        raise ParameterError(f"max_scale must be positive and finite, got {max_scale}")
    return float(max_scale), False


def _as_points(cloud) -> tuple[np.ndarray, str | None]:
    if isinstance(cloud, PointCloud):
        return cloud.points, cloud.source_id
    return np.asarray(cloud, dtype=np.float64), None


def build_vr_edges(cloud, max_scale: float | None = None) -> list[FilteredEdge]:
    """Edges of the VR filtration up to max_scale (enclosing radius if None),
    sorted ascending by (value, u, v)."""
    points, _ = _as_points(cloud)
    if points.shape[0] < 2:
        raise ParameterError("need at least 2 points to build edges")
    dist = pairwise_distances(points)
    scale, _auto = _resolve_scale(dist, max_scale)
    eu, ev, evals = _edge_arrays(dist, scale)
    return [FilteredEdge(int(u), int(v), float(w)) for u, v, w in zip(eu, ev, evals)]


# ---------------------------------------------------------------------------
# degree-1 persistence (optimized path)
# ---------------------------------------------------------------------------

def compute_ph1(cloud, max_scale: float | None = None) -> PersistenceDiagram:
    """Degree-1 persistence diagram of the VR filtration of a point cloud.

    Zero-persistence pairs are discarded. With max_scale=None the cap is the
    enclosing radius, which resolves every class; with an explicit cap,
    classes still alive at the cap are reported with death = cap and
    censored=True.
    """
    points, source_id = _as_points(cloud)
    if points.shape[0] < 3:
        raise ParameterError("need at least 3 points for degree-1 persistence")
    dist = pairwise_distances(points)
    scale, auto = _resolve_scale(dist, max_scale)
    eu, ev, evals = _edge_arrays(dist, scale)
    births, deaths, ess = _reduction.reduce_h1(dist, eu, ev, evals, scale)
    pairs = [
        PersistencePair(float(b), float(d))
        for b, d in zip(births, deaths)
        if d > b
    ]
    if auto:
        if ess.size:
            raise AssertionError(
                "class survived the enclosing radius; this should be impossible"
            )
    else:
        pairs.extend(
            PersistencePair(float(b), scale, censored=True) for b in ess if b < scale
        )
    return PersistenceDiagram(_sorted_pairs(pairs), source_id=source_id)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_ph(cloud, max_scale: float | None = None) -> PersistenceDiagram:
    """Textbook column reduction over every simplex of dimension <= 2.

    Independent of the optimized path except for the shared distance matrix.
    Limited to small clouds; meant as a cross-check, not for production use.
    """
    points, source_id = _as_points(cloud)
    n = points.shape[0]
    if n < 3:
        raise ParameterError("need at least 3 points for degree-1 persistence")
    if n > ORACLE_MAX_POINTS:
        raise ParameterError(
            f"brute-force oracle handles at most {ORACLE_MAX_POINTS} points, got {n}"
        )
    dist = pairwise_distances(points)
    scale, auto = _resolve_scale(dist, max_scale)

    simplices: list[tuple[float, int, tuple[int, ...]]] = []
    for i in range(n):
        simplices.append((0.0, 0, (i,)))
    for i in range(n):
        for j in range(i + 1, n):
            d = dist[i, j]
            if d <= scale:
                simplices.append((float(d), 1, (i, j)))
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                d = max(dist[i, j], dist[i, k], dist[j, k])
                if d <= scale:
                    simplices.append((float(d), 2, (i, j, k)))
    simplices.sort(key=lambda s: (s[0], s[1], s[2]))
    index = {s[2]: i for i, s in enumerate(simplices)}

    cols: list[set[int]] = []
    for _val, dim, verts in simplices:
        if dim == 0:
            cols.append(set())
        else:
            faces = set()
            for drop in range(len(verts)):
                face = verts[:drop] + verts[drop + 1 :]
                faces.add(index[face])
            cols.append(faces)

    low_to: dict[int, int] = {}
    pairs_idx: list[tuple[int, int]] = []
    for j in range(len(cols)):
        col = cols[j]
        while col:
            low = max(col)
            if low in low_to:
                col = col ^ cols[low_to[low]]
            else:
                break
        cols[j] = col
        if col:
            low = max(col)
            low_to[low] = j
            pairs_idx.append((low, j))

    pairs: list[PersistencePair] = []
    paired_edges: set[int] = set()
    for low, j in pairs_idx:
        if simplices[low][1] == 1:
            paired_edges.add(low)
            b = simplices[low][0]
            d = simplices[j][0]
            if d > b:
                pairs.append(PersistencePair(b, d))
    # essential degree-1 classes: creator edges never used as a pivot
    for j, (val, dim, _verts) in enumerate(simplices):
        if dim == 1 and not cols[j] and j not in paired_edges:
            if auto:
                raise AssertionError(
                    "class survived the enclosing radius; this should be impossible"
                )
            if val < scale:
                pairs.append(PersistencePair(val, scale, censored=True))
    return PersistenceDiagram(_sorted_pairs(pairs), source_id=source_id)


# ---------------------------------------------------------------------------
# cycle representatives
# ---------------------------------------------------------------------------

def compute_generator(cloud, pair: PersistencePair) -> CycleRepresentative:
    """Cycle representative of a persistence pair via homology-mode reduction.

    Triangle columns are reduced in filtration order; the reduced column that
    registers the pair's (birth edge, death triangle) pivot is a cycle whose
    edges all have filtration value <= the birth value.
    """
    points, _ = _as_points(cloud)
    if points.shape[0] < 3:
        raise ParameterError("need at least 3 points")
    if pair.birth >= pair.death:
        raise ParameterError("pair must have positive persistence")
    dist = pairwise_distances(points)
    n = points.shape[0]
    eu, ev, evals = _edge_arrays(dist, pair.death)
    edge_id = np.full(n * n, -1, dtype=np.int64)
    edge_id[eu * n + ev] = np.arange(eu.shape[0], dtype=np.int64)
    ta, tb, tc, tv = _reduction.triangle_list(dist, n, pair.death)
    col = _reduction.find_representative(
        eu, ev, evals, edge_id, n, ta, tb, tc, tv, pair.birth, pair.death
    )
    if col.size == 0:
        raise UnknownPairError(
            f"pair ({pair.birth!r}, {pair.death!r}) is not in the diagram of this cloud"
        )
    edges = np.column_stack((eu[col], ev[col])).astype(np.int64)
    on_backbone = (edges[:, 1] - edges[:, 0]) == 1
    return CycleRepresentative(pair=pair, edges=edges, on_backbone=on_backbone)


def cycle_core_overlap(
    rep: CycleRepresentative, annotation: KnotAnnotation, interp_factor: int
) -> float:
    """Fraction of the cycle's vertices whose source atom lies in the core."""
    verts = rep.vertices()
    if verts.size == 0:
        raise ParameterError("cycle has no vertices")
    atoms = verts // (interp_factor + 1)
    inside = (atoms >= annotation.core_start) & (atoms <= annotation.core_end)
    return float(np.count_nonzero(inside)) / float(verts.size)


# ---------------------------------------------------------------------------
# diagram serialization
# ---------------------------------------------------------------------------

def diagram_to_csv(diagram: PersistenceDiagram) -> str:
    lines = ["birth,death"]
    for p in _sorted_pairs(diagram.pairs):
        lines.append(f"{p.birth:.17g},{p.death:.17g}")
    return "\n".join(lines) + "\n"


def diagram_from_csv(text: str, source_id: str | None = None) -> PersistenceDiagram:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "birth,death":
        raise ParseError("expected 'birth,death' header", path=source_id)
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", path=source_id, line=lineno)
        try:
            b, d = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError("bad float", path=source_id, line=lineno) from None
        pairs.append(PersistencePair(b, d))
    return PersistenceDiagram(_sorted_pairs(pairs), source_id=source_id)
