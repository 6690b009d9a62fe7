"""Persistence landscapes with exact piecewise-linear arithmetic.

A landscape is the sequence lambda_k(t) = k-th largest tent value f_I(t)
over the diagram's pairs, stored as explicit critical-point lists so that
norms, distances and averages are closed-form per linear segment instead of
grid approximations. Layers are peeled off the sorted bar list one at a
time: the current bar either closes cleanly, absorbs a nested bar (which
drops down a layer), or crosses a later bar (valley point; the overlap
drops down a layer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, PCG64

from .errors import NoSuchLayerError, ParameterError, ParseError
from .persistence import PersistenceDiagram, PersistencePair


@dataclass
class Landscape:
    """Layers of critical points; layers[k-1] is an (m, 2) array of (t, value)
    with t strictly increasing. The function is 0 outside the stored points
    and 0 for absent layers."""

    layers: list[np.ndarray] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def layer(self, k: int) -> np.ndarray:
        if k < 1:
            raise ParameterError(f"layer index must be >= 1, got {k}")
        if k > len(self.layers):
            return np.empty((0, 2), dtype=np.float64)
        return self.layers[k - 1]


def landscapes_equal(a: Landscape, b: Landscape) -> bool:
    if a.depth != b.depth:
        return False
    return all(
        x.shape == y.shape and np.array_equal(x, y)
        for x, y in zip(a.layers, b.layers)
    )


@dataclass
class LandscapeSample:
    label: str
    landscapes: list[Landscape]

    def __post_init__(self):
        if not self.landscapes:
            raise ParameterError(f"sample {self.label!r} is empty")


# ---------------------------------------------------------------------------
# diagram -> landscape
# ---------------------------------------------------------------------------

def _peel_layer(bars: list[tuple[float, float]]):
    """One sweep over bars sorted by (birth asc, death desc): returns the
    critical points of the top layer and the leftover bars for the next."""
    pts: list[tuple[float, float]] = []
    leftovers: list[tuple[float, float]] = []
    i = 0
    b, d = bars[0]
    pts.append((b, 0.0))
    pts.append(((b + d) / 2.0, (d - b) / 2.0))
    i = 1
    while i < len(bars):
        b2, d2 = bars[i]
        i += 1
        if d2 <= d:
            # nested under the current hump: invisible here, drops a layer
            leftovers.append((b2, d2))
            continue
        if b2 < d:
            # crossing: valley where the two tents meet, overlap drops down
            pts.append(((b2 + d) / 2.0, (d - b2) / 2.0))
            leftovers.append((b2, d))
        else:
            # disjoint: close this hump, open the next
            pts.append((d, 0.0))
            if b2 > d:
                pts.append((b2, 0.0))
        pts.append(((b2 + d2) / 2.0, (d2 - b2) / 2.0))
        b, d = b2, d2
    pts.append((d, 0.0))
    return pts, leftovers


def diagram_to_landscape(diagram: PersistenceDiagram) -> Landscape:
    """Exact landscape of a diagram via layer peeling. Empty diagram -> no
    layers."""
    bars = sorted(((p.birth, p.death) for p in diagram.pairs), key=lambda x: (x[0], -x[1]))
    layers: list[np.ndarray] = []
    while bars:
        pts, leftovers = _peel_layer(bars)
        arr = np.array(pts, dtype=np.float64)
        assert np.all(np.diff(arr[:, 0]) > 0), "critical t values must increase"
        layers.append(arr)
        leftovers.sort(key=lambda x: (x[0], -x[1]))
        bars = leftovers
    return Landscape(layers)


def tent_value(pair: PersistencePair, t: float) -> float:
    """f_I(t) = max(0, min(t - birth, death - t)) for the pair's interval."""
    return max(0.0, min(t - pair.birth, pair.death - t))


def landscape_eval(l: Landscape, k: int, t) -> float | np.ndarray:
    """lambda_k at t (scalar or array); 0 outside support and absent layers."""
    layer = l.layer(k)
    if layer.shape[0] == 0:
        return np.zeros_like(np.asarray(t, dtype=np.float64)) if np.ndim(t) else 0.0
    out = np.interp(t, layer[:, 0], layer[:, 1], left=0.0, right=0.0)
    return float(out) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# exact L_p integration of piecewise-linear functions
# ---------------------------------------------------------------------------

def _check_norm_p(p) -> int:
    if isinstance(p, float) and not p.is_integer():
        raise ParameterError(f"only integer norms are supported, got {p}")
    p = int(p)
    if p < 1:
        raise ParameterError(f"norm exponent must be >= 1, got {p}")
    return p


def _lp_integral(ts: np.ndarray, vs: np.ndarray, p: int) -> float:
    """Integral of |v(t)|^p for the piecewise-linear v through (ts, vs)."""
    if ts.shape[0] < 2:
        return 0.0
    dt = np.diff(ts)
    v0 = vs[:-1]
    v1 = vs[1:]
    a = np.abs(v0)
    b = np.abs(v1)
    # Same-sign segment: (b^(p+1) - a^(p+1)) / ((p+1)(b - a)) in closed form,
    # but that difference cancels catastrophically when a ~ b, so expand it
    # via the power-sum factorisation (nonnegative addends only).  Covers the
    # flat case a == b as well, where the sum collapses to (p+1) a^p.
    ps = np.zeros_like(a)
    for j in range(p + 1):
        ps = ps + a**j * b ** (p - j)
    out = dt * ps / (p + 1)
    # sign change: two triangles meeting at the zero crossing
    cross = v0 * v1 < 0
    if np.any(cross):
        ac = a[cross]
        bc = b[cross]
        out[cross] = (
            dt[cross] / (ac + bc) * (ac ** (p + 1) + bc ** (p + 1)) / (p + 1)
        )
    return float(out.sum())


def landscape_lp_norm(l: Landscape, p) -> float:
    """(sum_k integral |lambda_k|^p)^(1/p), exact per linear segment."""
    p = _check_norm_p(p)
    total = 0.0
    for layer in l.layers:
        total += _lp_integral(layer[:, 0], layer[:, 1], p)
    return total if p == 1 else total ** (1.0 / p)


def _merged_diff(layer1: np.ndarray, layer2: np.ndarray):
    """Difference of two PL layers on the union of their breakpoints."""
    if layer1.shape[0] == 0 and layer2.shape[0] == 0:
        return None
    if layer1.shape[0] == 0:
        return layer2[:, 0], -layer2[:, 1]
    if layer2.shape[0] == 0:
        return layer1[:, 0], layer1[:, 1]
    ts = np.union1d(layer1[:, 0], layer2[:, 0])
    v1 = np.interp(ts, layer1[:, 0], layer1[:, 1], left=0.0, right=0.0)
    v2 = np.interp(ts, layer2[:, 0], layer2[:, 1], left=0.0, right=0.0)
    return ts, v1 - v2


def landscape_distance(l1: Landscape, l2: Landscape, p=1) -> float:
    """||l1 - l2||_p with the difference formed layer-by-layer on merged
    critical-point grids; layers missing on one side count as zero."""
    p = _check_norm_p(p)
    total = 0.0
    for k in range(1, max(l1.depth, l2.depth) + 1):
        merged = _merged_diff(l1.layer(k), l2.layer(k))
        if merged is None:
            continue
        total += _lp_integral(merged[0], merged[1], p)
    return total if p == 1 else total ** (1.0 / p)


def layer_restricted_distance(l1: Landscape, l2: Landscape, S) -> float:
    """Sum over k in S of the L1 difference of the k-th layers (no root)."""
    ks = sorted(set(int(k) for k in S))
    if not ks:
        raise ParameterError("layer set must be nonempty")
    if ks[0] < 1:
        raise ParameterError(f"layer indices must be >= 1, got {ks[0]}")
    total = 0.0
    for k in ks:
        merged = _merged_diff(l1.layer(k), l2.layer(k))
        if merged is None:
            continue
        total += _lp_integral(merged[0], merged[1], 1)
    return total


# ---------------------------------------------------------------------------
# averages and the randomization test
# ---------------------------------------------------------------------------

def average_landscape(landscapes: list[Landscape] | LandscapeSample) -> Landscape:
    """Pointwise mean per layer over the union of the members' breakpoints.

    Exact: each mean layer is PL with breakpoints contained in the union
    grid. Members shallower than k contribute zero to layer k.
    """
    if isinstance(landscapes, LandscapeSample):
        landscapes = landscapes.landscapes
    if not landscapes:
        raise ParameterError("cannot average an empty list of landscapes")
    depth = max(l.depth for l in landscapes)
    n = len(landscapes)
    layers = []
    for k in range(1, depth + 1):
        grids = [l.layer(k)[:, 0] for l in landscapes if l.layer(k).shape[0]]
        ts = grids[0] if len(grids) == 1 else np.unique(np.concatenate(grids))
        acc = np.zeros_like(ts)
        for l in landscapes:
            layer = l.layer(k)
            if layer.shape[0]:
                acc += np.interp(ts, layer[:, 0], layer[:, 1], left=0.0, right=0.0)
        layers.append(np.column_stack((ts, acc / n)))
    return Landscape(layers)


class _PooledGrids:
    """All member layers evaluated on shared per-layer grids, so group means
    and their distances reduce to row averages and one exact integral."""

    def __init__(self, landscapes: list[Landscape]):
        self.n = len(landscapes)
        self.depth = max((l.depth for l in landscapes), default=0)
        self.grids: list[np.ndarray] = []
        self.values: list[np.ndarray] = []  # (n, len(grid)) per layer
        for k in range(1, self.depth + 1):
            grids = [l.layer(k)[:, 0] for l in landscapes if l.layer(k).shape[0]]
            ts = np.unique(np.concatenate(grids))
            vals = np.zeros((self.n, ts.shape[0]), dtype=np.float64)
            for i, l in enumerate(landscapes):
                layer = l.layer(k)
                if layer.shape[0]:
                    vals[i] = np.interp(ts, layer[:, 0], layer[:, 1], left=0.0, right=0.0)
            self.grids.append(ts)
            self.values.append(vals)

    def statistic(self, idx1: np.ndarray, idx2: np.ndarray, p: int) -> float:
        total = 0.0
        for ts, vals in zip(self.grids, self.values):
            diff = vals[idx1].sum(axis=0) / idx1.shape[0] - vals[idx2].sum(axis=0) / idx2.shape[0]
            total += _lp_integral(ts, diff, p)
        return total if p == 1 else total ** (1.0 / p)


def randomization_test_detail(
    a: LandscapeSample,
    b: LandscapeSample,
    k: int = 1000,
    seed: int = 0,
    norm_p=1,
) -> tuple[float, float]:
    """(p_value, t_obs) of the two-sample permutation test on mean landscapes.

    The statistic is ||mean(a) - mean(b)||_norm_p; k random repartitions of
    the pooled landscapes into groups of the original sizes are drawn from a
    seeded generator, and the p-value is the plain proportion of repartition
    statistics >= the observed one (the observed split is not force-included,
    so 0 means "less than 1/k").
    """
    if k < 1:
        raise ParameterError(f"need at least one repartition, got {k}")
    p = _check_norm_p(norm_p)
    pool = _PooledGrids(a.landscapes + b.landscapes)
    n_a = len(a.landscapes)
    n_total = pool.n
    idx_a = np.arange(n_a)
    idx_b = np.arange(n_a, n_total)
    t_obs = pool.statistic(idx_a, idx_b, p)
    rng = Generator(PCG64(seed))
    hits = 0
    for _ in range(k):
        perm = rng.permutation(n_total)
        stat = pool.statistic(perm[:n_a], perm[n_a:], p)
        if stat >= t_obs:
            hits += 1
    return hits / k, t_obs


def randomization_test(
    a: LandscapeSample,
    b: LandscapeSample,
    k: int = 1000,
    seed: int = 0,
    norm_p=1,
) -> float:
    return randomization_test_detail(a, b, k=k, seed=seed, norm_p=norm_p)[0]


# ---------------------------------------------------------------------------
# peaks and the peak -> pair correspondence
# ---------------------------------------------------------------------------

def layer_peak(l: Landscape, k: int, t_star: float | None = None) -> tuple[float, float]:
    """(t, height) of the global max of layer k, or of the local max nearest
    to t_star when given. Ties go to the smaller t."""
    layer = l.layer(k)
    if layer.shape[0] == 0:
        raise NoSuchLayerError(f"landscape has no layer {k}")
    ts, vs = layer[:, 0], layer[:, 1]
    if t_star is None:
        i = int(np.argmax(vs))
        return float(ts[i]), float(vs[i])
    # local maxima among critical points (endpoints count via zero padding)
    padded = np.concatenate(([0.0], vs, [0.0]))
    is_max = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]) & (vs > 0)
    if not np.any(is_max):
        raise NoSuchLayerError(f"layer {k} has no positive local maximum")
    cand = np.flatnonzero(is_max)
    order = np.lexsort((ts[cand], np.abs(ts[cand] - t_star)))
    i = int(cand[order[0]])
    return float(ts[i]), float(vs[i])


def peak_pair(diagram: PersistenceDiagram, k: int, t_star: float) -> PersistencePair:
    """The diagram pair whose tent realizes the k-th largest value at t_star.

    Ties are broken toward the most persistent pair, then the earliest
    birth, so the answer is deterministic.
    """
    if not diagram.pairs:
        raise NoSuchLayerError("empty diagram has no layers")
    vals = np.array([tent_value(p, t_star) for p in diagram.pairs])
    if k > vals.shape[0]:
        raise NoSuchLayerError(f"diagram has only {vals.shape[0]} pairs, layer {k} absent")
    kth = np.sort(vals)[::-1][k - 1]
    best = None
    for pair, v in zip(diagram.pairs, vals):
        if v == kth:
            cand = (-(pair.death - pair.birth), pair.birth)
            if best is None or cand < best[0]:
                best = (cand, pair)
    return best[1]


# ---------------------------------------------------------------------------
# .lan serialization
# ---------------------------------------------------------------------------

LAN_HEADER = "#landscape v1"


def write_lan(l: Landscape) -> str:
    lines = [LAN_HEADER]
    for k, layer in enumerate(l.layers, start=1):
        if layer.shape[0] == 0:
            continue
        lines.append(f"#lambda {k}")
        for t, v in layer:
            lines.append(f"{t:.17g} {v:.17g}")
    return "\n".join(lines) + "\n"


def read_lan(text: str, source: str | None = None) -> Landscape:
    lines = text.splitlines()
    if not lines or lines[0].strip() != LAN_HEADER:
        raise ParseError(f"expected {LAN_HEADER!r} header", path=source, line=1)
    layers: dict[int, list[tuple[float, float]]] = {}
    current: int | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#lambda"):
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("malformed layer header", path=source, line=lineno)
            try:
                current = int(parts[1])
            except ValueError:
                raise ParseError(
                    f"bad layer index {parts[1]!r}", path=source, line=lineno
                ) from None
            if current < 1:
                raise ParseError(f"layer index must be >= 1, got {current}", path=source, line=lineno)
            if current in layers:
                raise ParseError(f"duplicate layer {current}", path=source, line=lineno)
            layers[current] = []
            continue
        if line.startswith("#"):
            raise ParseError(f"unexpected directive {line!r}", path=source, line=lineno)
        if current is None:
            raise ParseError("data before any #lambda header", path=source, line=lineno)
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 't value', got {len(parts)} fields", path=source, line=lineno)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError("bad float", path=source, line=lineno) from None
        if v < 0:
            raise ParseError(f"negative landscape value {v}", path=source, line=lineno)
        pts = layers[current]
        if pts and t <= pts[-1][0]:
            raise ParseError(
                f"t values must be strictly increasing ({t} after {pts[-1][0]})",
                path=source,
                line=lineno,
            )
        pts.append((t, v))
    depth = max(layers, default=0)
    out = []
    for k in range(1, depth + 1):
        pts = layers.get(k, [])
        out.append(
            np.array(pts, dtype=np.float64) if pts else np.empty((0, 2), dtype=np.float64)
        )
    return Landscape(out)
