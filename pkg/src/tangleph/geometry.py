"""Backbone geometry: file parsing, interpolation, knot depth, perturbation.

Curves are represented as (n, 3) float64 arrays of points in backbone order.
The knot core of a chain is an inclusive index window [core_start, core_end]
on the original atom indices; tails are everything before and after it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, PCG64
from scipy.special import ndtri

from .errors import AnnotationError, ParameterError, ParseError

DEPTH_DEEP = 0.05
DEPTH_SHALLOW = 0.005


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class KnotAnnotation:
    """Knot core location on a chain of `length` atoms, plus derived fields.

    n_tail_len / c_tail_len count atoms strictly before / after the core
    window, so n_tail_len == core_start and c_tail_len == length-1-core_end.
    """

    core_start: int
    core_end: int
    n_tail_len: int
    c_tail_len: int
    depth_class: str


@dataclass
class BackboneChain:
    chain_id: str
    coords: np.ndarray  # (n, 3) float64, consecutive points distinct
    annotation: KnotAnnotation | None = None

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass
class PointCloud:
    source_id: str
    points: np.ndarray  # (m, 3) float64, backbone order
    interp_factor: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class AnnotationRecord:
    """One row of an annotation table (sidecar TSV)."""

    length: int
    core_start: int
    core_end: int
    homology_class: str | None = None


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _validate_coords(coords: np.ndarray, source: str) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] < 2:
        raise ParseError("backbone needs at least 2 points", path=source)
    if not np.all(np.isfinite(coords)):
        raise ParseError("non-finite coordinate", path=source)
    same = np.all(coords[1:] == coords[:-1], axis=1)
    if np.any(same):
        i = int(np.argmax(same))
        raise ParseError(
            f"consecutive duplicate point at positions {i} and {i + 1}", path=source
        )
    return coords


def parse_xyz(text: str, source: str = "<xyz>") -> np.ndarray:
    """Parse a plain-text coordinate file into an (n, 3) array.

    Each data line holds either `x y z` or `index x y z`; when the 4-field
    form is used the leading integer index must be strictly increasing.
    Blank lines and `#` comments (full-line or trailing) are ignored.
    """
    pts: list[tuple[float, float, float]] = []
    last_idx: int | None = None
    n_fields: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (3, 4):
            raise ParseError(
                f"expected 3 or 4 fields, got {len(fields)}", path=source, line=lineno
            )
        if n_fields is None:
            n_fields = len(fields)
        elif len(fields) != n_fields:
            raise ParseError(
                f"inconsistent field count ({len(fields)} after {n_fields})",
                path=source,
                line=lineno,
            )
        if n_fields == 4:
            try:
                idx = int(fields[0])
            except ValueError:
                raise ParseError(
                    f"bad residue index {fields[0]!r}", path=source, line=lineno
                ) from None
            if last_idx is not None and idx <= last_idx:
                raise ParseError(
                    f"residue index {idx} not strictly increasing", path=source, line=lineno
                )
            last_idx = idx
            fields = fields[1:]
        try:
            x, y, z = (float(f) for f in fields)
        except ValueError:
            raise ParseError(f"bad coordinate in {fields!r}", path=source, line=lineno) from None
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise ParseError("non-finite coordinate", path=source, line=lineno)
        pts.append((x, y, z))
    if len(pts) < 2:
        raise ParseError("backbone needs at least 2 points", path=source)
    return _validate_coords(np.array(pts, dtype=np.float64), source)


def extract_ca_from_pdb(text: str, source: str = "<pdb>", chain: str | None = None) -> np.ndarray:
    """Pull the C-alpha trace out of PDB-format text by fixed-column slicing.

    Only ATOM records from the first model are read; alternate locations other
    than blank/'A' are skipped. `chain` restricts to one chain identifier.
    """
    pts: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("ENDMDL"):
            break
        if not raw.startswith("ATOM"):
            continue
        line = raw.ljust(80)
        name = line[12:16].strip()
        if name != "CA":
            continue
        altloc = line[16]
        if altloc not in (" ", "A"):
            continue
        if chain is not None and line[21] != chain:
            continue
        try:
            x = float(line[30:38])
            y = float(line[38:46])
            z = float(line[46:54])
        except ValueError:
            raise ParseError("bad coordinate field in ATOM record", path=source, line=lineno) from None
        pts.append((x, y, z))
    if len(pts) < 2:
        raise ParseError("fewer than 2 CA atoms found", path=source)
    return _validate_coords(np.array(pts, dtype=np.float64), source)


def read_annotation_tsv(text: str, source: str = "<tsv>") -> dict[str, AnnotationRecord]:
    """Read an annotation table: id, length, core_start, core_end, homology_class.

    Tab-separated with a header line; homology_class may be left empty.
    """
    lines = [ln for ln in text.splitlines()]
    rows: dict[str, AnnotationRecord] = {}
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if not header_seen:
            expected = ["id", "length", "core_start", "core_end", "homology_class"]
            if [f.strip() for f in fields] != expected:
                raise ParseError(
                    f"bad header, expected {expected}", path=source, line=lineno
                )
            header_seen = True
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 columns, got {len(fields)}", path=source, line=lineno)
        sid = fields[0].strip()
        if sid in rows:
            raise ParseError(f"duplicate id {sid!r}", path=source, line=lineno)
        try:
            length = int(fields[1])
            core_start = int(fields[2])
            core_end = int(fields[3])
        except ValueError:
            raise ParseError("non-integer length/core field", path=source, line=lineno) from None
        cls = fields[4].strip() or None
        rows[sid] = AnnotationRecord(length, core_start, core_end, cls)
    if not header_seen:
        raise ParseError("missing header line", path=source)
    return rows


# ---------------------------------------------------------------------------
# depth
# ---------------------------------------------------------------------------

def knot_depth(length: int, core_start: int, core_end: int) -> float:
    """Depth of a knot core inside a chain: tail product over squared length.

    All three quantities count atoms; depth = n_tail * c_tail / length**2.
    """
    if length < 2:
        raise ParameterError(f"chain length {length} too short")
    if not (0 <= core_start <= core_end <= length - 1):
        raise ParameterError(
            f"core window [{core_start}, {core_end}] out of range for length {length}"
        )
    n_tail = core_start
    c_tail = length - 1 - core_end
    return (n_tail * c_tail) / float(length) ** 2


def classify_depth(depth: float) -> str:
    """'deep' above 0.05, 'shallow' below 0.005, 'neither' in between.

    Boundary values fall in 'neither'; the comparisons are strict.
    """
    if depth < 0:
        raise ParameterError(f"negative depth {depth}")
    if depth > DEPTH_DEEP:
        return "deep"
    if depth < DEPTH_SHALLOW:
        return "shallow"
    return "neither"


def annotate(length: int, core_start: int, core_end: int) -> KnotAnnotation:
    """Build a KnotAnnotation for a chain, deriving tails and depth class."""
    depth = knot_depth(length, core_start, core_end)
    return KnotAnnotation(
        core_start=core_start,
        core_end=core_end,
        n_tail_len=core_start,
        c_tail_len=length - 1 - core_end,
        depth_class=classify_depth(depth),
    )


def check_annotation(chain_length: int, rec: AnnotationRecord, chain_id: str) -> None:
    if rec.length != chain_length:
        raise AnnotationError(
            f"{chain_id}: annotation length {rec.length} != chain length {chain_length}"
        )
    if not (0 <= rec.core_start <= rec.core_end <= chain_length - 1):
        raise AnnotationError(
            f"{chain_id}: core window [{rec.core_start}, {rec.core_end}] out of range"
        )


# ---------------------------------------------------------------------------
# interpolation and perturbation
# ---------------------------------------------------------------------------

def interpolate(coords: np.ndarray, d: int = 5) -> np.ndarray:
    """Insert d equally spaced points on every backbone segment.

    Point i of segment (p, q) sits at p + i*(q-p)/(d+1), i = 1..d, so the
    output has n + (n-1)*d points and keeps the originals at indices
    k*(d+1). d = 0 returns a copy of the input.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] < 2:
        raise ParameterError("expected an (n, 3) array with n >= 2")
    if d < 0:
        raise ParameterError(f"interpolation factor must be >= 0, got {d}")
    n = coords.shape[0]
    if d == 0:
        return coords.copy()
    step = coords[1:] - coords[:-1]  # (n-1, 3)
    frac = np.arange(1, d + 1, dtype=np.float64) / (d + 1)  # (d,)
    out = np.empty(((n - 1) * (d + 1) + 1, 3), dtype=np.float64)
    out[:: d + 1] = coords
    inner = coords[:-1, None, :] + frac[None, :, None] * step[:, None, :]
    for i in range(1, d + 1):
        out[i :: d + 1][: n - 1] = inner[:, i - 1, :]
    return out


def interpolate_cloud(chain: BackboneChain, d: int = 5) -> PointCloud:
    return PointCloud(chain.chain_id, interpolate(chain.coords, d), interp_factor=d)


def source_atom_index(cloud_index: int, interp_factor: int) -> int:
    """Backbone atom that a cloud point originates from (floor over segments)."""
    return cloud_index // (interp_factor + 1)


def perturb(points: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add independent N(0, sigma^2) offsets to every coordinate.

    Deterministic given (points shape, sigma, seed): draws come from a PCG64
    stream mapped through the inverse normal CDF. Uniforms are taken as
    (k + 0.5) / 2**53 with k a 53-bit integer, so they never hit 0 or 1 and
    the normal offsets are always finite. sigma = 0 returns an exact copy.
    """
    points = np.asarray(points, dtype=np.float64)
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return points.copy()
    rng = Generator(PCG64(seed))
    k = rng.integers(0, 1 << 53, size=points.shape, dtype=np.int64)
    u = (k.astype(np.float64) + 0.5) / float(1 << 53)
    return points + sigma * ndtri(u)
