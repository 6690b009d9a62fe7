"""Wasserstein distances between persistence diagrams.

W_p[L_q] via the standard augmentation: each diagram point gets a diagonal
proxy on the other side, proxy-proxy edges cost nothing, and the partial
matching infimum becomes a square assignment problem solved exactly. The
defaults are p=1, q=inf; p=inf is handled separately as a bottleneck
distance (binary search over candidate costs + bipartite feasibility).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import IdCollisionError, ParameterError, ParseError
from .persistence import PersistenceDiagram


@dataclass(frozen=True)
class WassersteinParams:
    p: float = 1.0
    q: float = math.inf


def _check_exponent(name: str, value: float) -> float:
    if value != math.inf and (not np.isfinite(value) or value < 1):
        raise ParameterError(f"{name} must be >= 1 or inf, got {value}")
    return float(value)


def _ground_costs(a: np.ndarray, b: np.ndarray, q: float):
    """Cross costs (M, N) and diagonal costs for both diagrams under L_q."""
    db = np.abs(a[:, 0, None] - b[None, :, 0])
    dd = np.abs(a[:, 1, None] - b[None, :, 1])
    if q == math.inf:
        cross = np.maximum(db, dd)
        diag_a = (a[:, 1] - a[:, 0]) / 2.0
        diag_b = (b[:, 1] - b[:, 0]) / 2.0
    else:
        cross = (db**q + dd**q) ** (1.0 / q)
        # projection to the diagonal moves birth and death by (d-b)/2 each
        diag_a = (a[:, 1] - a[:, 0]) / 2.0 * 2.0 ** (1.0 / q)
        diag_b = (b[:, 1] - b[:, 0]) / 2.0 * 2.0 ** (1.0 / q)
    return cross, diag_a, diag_b


def _augmented_matrix(cross, diag_a, diag_b, p: float) -> np.ndarray:
    """(M+N) x (N+M) matrix whose assignment optimum is the matching cost^p.

    Rows: the M points of the first diagram, then N diagonal proxies.
    Columns: the N points of the second diagram, then M proxies. A real
    point may take any proxy (the cost only depends on the point), so no
    forbidden entries are needed.
    """
    m, n = cross.shape
    full = np.zeros((m + n, n + m), dtype=np.float64)
    if p == math.inf:
        full[:m, :n] = cross
        full[:m, n:] = diag_a[:, None]
        full[m:, :n] = diag_b[None, :]
    else:
        full[:m, :n] = cross**p
        full[:m, n:] = (diag_a**p)[:, None]
        full[m:, :n] = (diag_b**p)[None, :]
    return full


def _bottleneck(full: np.ndarray) -> float:
    """Smallest threshold t such that edges of cost <= t admit a perfect
    matching of the augmented graph."""
    size = full.shape[0]
    if size == 0:
        return 0.0
    cands = np.unique(full)
    lo, hi = 0, cands.size - 1
    # the largest candidate always works (complete graph)
    while lo < hi:
        mid = (lo + hi) // 2
        adj = csr_matrix((full <= cands[mid]).astype(np.int8))
        match = maximum_bipartite_matching(adj, perm_type="column")
        if np.all(match >= 0):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def wasserstein(
    d1: PersistenceDiagram,
    d2: PersistenceDiagram,
    p: float = 1.0,
    q: float = math.inf,
) -> float:
    """W_p[L_q] distance between two diagrams by exact optimal matching.

    Matched points pay their L_q distance, unmatched ones the L_q distance
    to their diagonal projection. Empty diagrams are fine.
    """
    p = _check_exponent("p", p)
    q = _check_exponent("q", q)
    a = d1.as_array()
    b = d2.as_array()
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    cross, diag_a, diag_b = _ground_costs(a, b, q)
    full = _augmented_matrix(cross, diag_a, diag_b, p)
    if p == math.inf:
        return _bottleneck(full)
    row, col = linear_sum_assignment(full)
    # fsum gives the correctly rounded exact sum, independent of addend order,
    # so any two assignments with the same real total (swapped directions,
    # proxy bookkeeping, exact ties between optima) produce the bit-identical
    # float; plain summation is only ulp-close in those cases
    total = math.fsum(full[row, col])
    if p == 1.0:
        return total
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# distance matrices
# ---------------------------------------------------------------------------

@dataclass
class DistanceMatrix:
    ids: list[str]
    values: np.ndarray  # (n, n) float64, symmetric, zero diagonal

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.ids)
        if v.shape != (n, n):
            raise ParameterError(f"matrix shape {v.shape} does not match {n} ids")
        if np.any(np.diag(v) != 0.0):
            raise ParameterError("distance matrix diagonal must be exactly zero")
        if not np.allclose(v, v.T, atol=1e-12, rtol=0.0):
            raise ParameterError("distance matrix must be symmetric within 1e-12")
        if len(set(self.ids)) != n:
            raise IdCollisionError("duplicate ids in distance matrix")
        self.values = v

    def index_of(self, sid: str) -> int:
        return self.ids.index(sid)

    def submatrix(self, keep: list[str]) -> "DistanceMatrix":
        idx = [self.index_of(s) for s in keep]
        return DistanceMatrix(list(keep), self.values[np.ix_(idx, idx)])


def pairwise_wasserstein(
    diagrams: list[PersistenceDiagram],
    p: float = 1.0,
    q: float = math.inf,
) -> DistanceMatrix:
    """Symmetric matrix of W_p[L_q] distances, one solve per unordered pair."""
    if len(diagrams) < 2:
        raise ParameterError("need at least 2 diagrams")
    ids = [
        d.source_id if d.source_id is not None else str(i)
        for i, d in enumerate(diagrams)
    ]
    if len(set(ids)) != len(ids):
        raise IdCollisionError("duplicate diagram ids")
    n = len(diagrams)
    values = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            w = wasserstein(diagrams[i], diagrams[j], p=p, q=q)
            values[i, j] = w
            values[j, i] = w
    return DistanceMatrix(ids, values)


def matrix_to_csv(dm: DistanceMatrix) -> str:
    lines = ["id," + ",".join(dm.ids)]
    for sid, row in zip(dm.ids, dm.values):
        lines.append(sid + "," + ",".join(f"{v:.12g}" for v in row))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str, source: str | None = None) -> DistanceMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("id,"):
        raise ParseError("expected 'id,...' header", path=source)
    ids = lines[0].split(",")[1:]
    n = len(ids)
    if len(lines) != n + 1:
        raise ParseError(f"expected {n} data rows, got {len(lines) - 1}", path=source)
    values = np.zeros((n, n), dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n + 1:
            raise ParseError(f"expected {n + 1} fields", path=source, line=i)
        if parts[0] != ids[i - 2]:
            raise ParseError(
                f"row label {parts[0]!r} does not match column {ids[i - 2]!r}",
                path=source,
                line=i,
            )
        try:
            values[i - 2] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ParseError("bad float", path=source, line=i) from None
    # round-tripped values can be asymmetric in the last digit; resymmetrize
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(ids, values)
