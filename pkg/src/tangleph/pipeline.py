"""Pipeline orchestration: config files, run manifests, and the six commands.

A run lives in one output directory. `cmd_ingest` parses backbones and writes
interpolated clouds plus the manifest; `cmd_ph` adds diagrams and landscapes;
`cmd_compare`, `cmd_test`, `cmd_generator`, and `cmd_noise` consume them.
Every command is deterministic for a fixed config + inputs + seed, file by
file, byte by byte.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .analysis import (
    ClusterLabels,
    embedding_to_csv,
    isomap_embed,
    silhouette,
)
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    ParameterError,
    PipelineError,
    SilhouetteUndefinedError,
    StructureFailuresError,
)
from .geometry import (
    BackboneChain,
    PointCloud,
    annotate,
    check_annotation,
    interpolate_cloud,
    knot_depth,
    parse_xyz,
    perturb,
    read_annotation_tsv,
)
from .landscapes import (
    LandscapeSample,
    average_landscape,
    diagram_to_landscape,
    landscape_distance,
    layer_peak,
    layer_restricted_distance,
    peak_pair,
    randomization_test_detail,
    read_lan,
    write_lan,
)
from .metrics import DistanceMatrix, matrix_to_csv, pairwise_wasserstein
from .persistence import (
    compute_generator,
    compute_ph1,
    cycle_core_overlap,
    diagram_from_csv,
    diagram_to_csv,
)
from .svgplot import pca_project, svg_backbone, svg_heatmap, svg_line_chart, svg_scatter

MANIFEST_NAME = "manifest.json"
DEFAULT_SIGMAS = tuple(round(0.1 * i, 1) for i in range(1, 11))
METRICS = ("wasserstein", "landscape")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str = ""
    annotation_path: str = ""
    output_dir: str = "out"
    interp_factor: int = 5
    max_scale: float | None = None  # None = AUTO (enclosing radius)
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    seed: int = 0
    n_neighbors: int = 5
    norm_p: int = 1
    k: int = 1000
    workers: int = 0  # 0 = one lane per available core

    def as_json(self) -> dict:
        d = asdict(self)
        d["max_scale"] = "AUTO" if self.max_scale is None else self.max_scale
        d["sigmas"] = list(self.sigmas)
        return d

    def lanes(self, n_jobs: int) -> int:
        w = self.workers if self.workers > 0 else (os.cpu_count() or 1)
        return max(1, min(w, n_jobs))


_CONFIG_KEYS = {
    "input_dir",
    "annotation_path",
    "output_dir",
    "interp_factor",
    "max_scale",
    "sigmas",
    "seed",
    "n_neighbors",
    "norm_p",
    "k",
    "workers",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat key=value lines; `#` starts a comment anywhere; blanks ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _parse_int(raw: dict, key: str, default: int, minimum: int) -> int:
    if key not in raw:
        return default
    try:
        v = int(raw[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw[key]!r}") from None
    if v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def parse_sigma_list(text: str) -> tuple[float, ...]:
    try:
        sigmas = tuple(float(f) for f in text.split(",") if f.strip())
    except ValueError:
        raise ConfigError(f"bad sigma list {text!r}") from None
    if not sigmas:
        raise ConfigError("sigma list is empty")
    if any(s < 0 or not np.isfinite(s) for s in sigmas):
        raise ConfigError(f"sigmas must be finite and >= 0, got {list(sigmas)}")
    return sigmas


def build_config(raw: dict[str, str], overrides: dict | None = None) -> PipelineConfig:
    """Typed config from raw strings; `overrides` wins over file values."""
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = str(value)

    max_scale: float | None = None
    ms = merged.get("max_scale", "AUTO")
    if ms != "AUTO":
        try:
            max_scale = float(ms)
        except ValueError:
            raise ConfigError(f"max_scale must be AUTO or a number, got {ms!r}") from None
        if not (max_scale > 0 and np.isfinite(max_scale)):
            raise ConfigError(f"max_scale must be positive and finite, got {max_scale}")

    sigmas = DEFAULT_SIGMAS
    if "sigmas" in merged:
        sigmas = parse_sigma_list(merged["sigmas"])

    return PipelineConfig(
        input_dir=merged.get("input_dir", ""),
        annotation_path=merged.get("annotation_path", ""),
        output_dir=merged.get("output_dir", "out"),
        interp_factor=_parse_int(merged, "interp_factor", 5, 0),
        max_scale=max_scale,
        sigmas=sigmas,
        seed=_parse_int(merged, "seed", 0, 0),
        n_neighbors=_parse_int(merged, "n_neighbors", 5, 1),
        norm_p=_parse_int(merged, "norm_p", 1, 1),
        k=_parse_int(merged, "k", 1000, 1),
        workers=_parse_int(merged, "workers", 0, 0),
    )


def load_config(path: str, overrides: dict | None = None) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return build_config(parse_config_text(p.read_text(), source=path), overrides)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

@dataclass
class StructureRecord:
    id: str
    length: int
    depth: float | None = None
    depth_class: str | None = None
    homology_class: str | None = None
    core_start: int | None = None
    core_end: int | None = None
    cloud: str = ""
    diagram: str | None = None
    landscape: str | None = None


@dataclass
class RunManifest:
    config: dict
    structures: list[StructureRecord] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)

    def record(self, sid: str) -> StructureRecord:
        for rec in self.structures:
            if rec.id == sid:
                return rec
        raise ParameterError(f"structure {sid!r} not in manifest")

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        self.structures.sort(key=lambda r: r.id)
        for rec in self.structures:
            for rel in (rec.cloud, rec.diagram, rec.landscape):
                if rel and not (out / rel).is_file():
                    raise PipelineError(f"manifest references missing file {rel}")
        for rel in self.artifacts.values():
            if not (out / rel).is_file():
                raise PipelineError(f"manifest references missing file {rel}")
        payload = {
            "config": self.config,
            "structures": [asdict(r) for r in self.structures],
            "artifacts": self.artifacts,
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        tmp = out / (MANIFEST_NAME + ".tmp")
        tmp.write_text(text)
        tmp.replace(out / MANIFEST_NAME)

    @staticmethod
    def read(out_dir: str | Path) -> "RunManifest":
        path = Path(out_dir) / MANIFEST_NAME
        if not path.is_file():
            raise ParameterError(f"no manifest at {path}; run ingest first")
        payload = json.loads(path.read_text())
        return RunManifest(
            config=payload["config"],
            structures=[StructureRecord(**r) for r in payload["structures"]],
            artifacts=payload["artifacts"],
        )


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def _stamped_interp(manifest: RunManifest, cfg: PipelineConfig) -> int:
    # clouds were interpolated at ingest time; later commands must interpret
    # cloud indices with the factor stamped into the manifest, not whatever
    # the current config file says
    return int(manifest.config.get("interp_factor", cfg.interp_factor))


def _write_cloud(path: Path, points: np.ndarray) -> None:
    lines = ["%.17g %.17g %.17g" % (x, y, z) for x, y, z in points]
    path.write_text("\n".join(lines) + "\n")


def _load_cloud(out: Path, rec: StructureRecord, interp_factor: int) -> PointCloud:
    pts = parse_xyz((out / rec.cloud).read_text(), source=str(out / rec.cloud))
    return PointCloud(rec.id, pts, interp_factor)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: PipelineConfig) -> RunManifest:
    """Parse `.xyz` backbones, interpolate, annotate, write the manifest."""
    in_dir = Path(cfg.input_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input_dir is not a directory: {cfg.input_dir}")
    files = sorted(in_dir.glob("*.xyz"))
    if not files:
        raise ConfigError(f"no .xyz files in {cfg.input_dir}")

    annotations = {}
    if cfg.annotation_path:
        ann_path = Path(cfg.annotation_path)
        if not ann_path.is_file():
            raise ConfigError(f"annotation file not found: {cfg.annotation_path}")
        annotations = read_annotation_tsv(ann_path.read_text(), source=str(ann_path))

    out = Path(cfg.output_dir)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    records = []
    for path in files:
        coords = parse_xyz(path.read_text(), source=str(path))
        sid = path.stem
        chain = BackboneChain(sid, coords)
        rec = StructureRecord(id=sid, length=len(chain))
        if sid in annotations:
            ann = annotations[sid]
            check_annotation(len(chain), ann, sid)
            rec.depth = knot_depth(ann.length, ann.core_start, ann.core_end)
            rec.depth_class = annotate(
                ann.length, ann.core_start, ann.core_end
            ).depth_class
            rec.homology_class = ann.homology_class
            rec.core_start = ann.core_start
            rec.core_end = ann.core_end
        cloud = interpolate_cloud(chain, cfg.interp_factor)
        rel = f"clouds/{sid}.xyz"
        _write_cloud(out / rel, cloud.points)
        rec.cloud = rel
        records.append(rec)

    manifest = RunManifest(config=cfg.as_json(), structures=records)
    manifest.write(out)
    return manifest


# ---------------------------------------------------------------------------
# persistent homology
# ---------------------------------------------------------------------------

def _ph_one(args) -> str:
    sid, cloud_path, dgm_path, lan_path, interp_factor, max_scale = args
    pts = parse_xyz(Path(cloud_path).read_text(), source=cloud_path)
    cloud = PointCloud(sid, pts, interp_factor)
    diagram = compute_ph1(cloud, max_scale)
    Path(dgm_path).write_text(diagram_to_csv(diagram))
    Path(lan_path).write_text(write_lan(diagram_to_landscape(diagram)))
    return sid


def cmd_ph(cfg: PipelineConfig) -> RunManifest:
    """Compute one diagram (`.dgm.csv`) and landscape (`.lan`) per structure.

    Structures are independent: failures are collected, the manifest still
    records every success, and a StructureFailuresError is raised at the end.
    """
    out = Path(cfg.output_dir)
    manifest = RunManifest.read(out)
    (out / "diagrams").mkdir(exist_ok=True)
    (out / "landscapes").mkdir(exist_ok=True)
    interp = _stamped_interp(manifest, cfg)

    jobs = []
    for rec in manifest.structures:
        jobs.append(
            (
                rec.id,
                str(out / rec.cloud),
                str(out / "diagrams" / f"{rec.id}.dgm.csv"),
                str(out / "landscapes" / f"{rec.id}.lan"),
                interp,
                cfg.max_scale,
            )
        )

    failures: dict[str, str] = {}
    lanes = cfg.lanes(len(jobs))
    if lanes == 1:
        for job in jobs:
            try:
                _ph_one(job)
            except Exception as exc:  # noqa: BLE001 - isolation boundary
                failures[job[0]] = f"{type(exc).__name__}: {exc}"
    else:
        with ProcessPoolExecutor(max_workers=lanes) as pool:
            futures = {pool.submit(_ph_one, job): job[0] for job in jobs}
            for fut, sid in futures.items():
                exc = fut.exception()
                if exc is not None:
                    failures[sid] = f"{type(exc).__name__}: {exc}"

    for rec in manifest.structures:
        if rec.id not in failures:
            rec.diagram = f"diagrams/{rec.id}.dgm.csv"
            rec.landscape = f"landscapes/{rec.id}.lan"
    manifest.write(out)
    if failures:
        raise StructureFailuresError(failures)
    return manifest


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _load_all_landscapes(out: Path, manifest: RunManifest) -> dict[str, object]:
    lans = {}
    for rec in manifest.structures:
        if rec.landscape is None:
            raise ParameterError(f"{rec.id} has no landscape; run ph first")
        lans[rec.id] = read_lan((out / rec.landscape).read_text(), source=rec.landscape)
    return lans


def _landscape_matrix(ids, lans, norm_p) -> DistanceMatrix:
    n = len(ids)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = landscape_distance(lans[ids[i]], lans[ids[j]], p=norm_p)
            values[i, j] = values[j, i] = d
    return DistanceMatrix(ids=list(ids), values=values)


def _distance_matrix(cfg, out, manifest, metric) -> DistanceMatrix:
    ids = [rec.id for rec in manifest.structures]
    if metric == "wasserstein":
        diagrams = []
        for rec in manifest.structures:
            if rec.diagram is None:
                raise ParameterError(f"{rec.id} has no diagram; run ph first")
            diagrams.append(
                diagram_from_csv((out / rec.diagram).read_text(), source_id=rec.id)
            )
        return pairwise_wasserstein(diagrams)
    lans = _load_all_landscapes(out, manifest)
    return _landscape_matrix(ids, lans, cfg.norm_p)


def _class_labels(manifest, attr) -> ClusterLabels | None:
    ids = [r.id for r in manifest.structures if getattr(r, attr) is not None]
    if not ids:
        return None
    labels = [getattr(r, attr) for r in manifest.structures if getattr(r, attr) is not None]
    return ClusterLabels(ids=ids, labels=labels)


def _compare_core(cfg, out: Path, manifest: RunManifest, metric: str, prefix: str):
    """Distance matrix + embedding + silhouettes; returns artifact dict and
    warning strings. Shared by cmd_compare and the per-sigma noise sub-runs."""
    if metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {metric!r}")
    dm = _distance_matrix(cfg, out, manifest, metric)
    cmp_dir = out / prefix
    cmp_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    warnings: list[str] = []

    rel = f"{prefix}/dist_{metric}.csv"
    (out / rel).write_text(matrix_to_csv(dm))
    artifacts[f"{prefix}:distance_{metric}"] = rel

    embedding = None
    try:
        embedding = isomap_embed(dm, n_neighbors=cfg.n_neighbors, dim=2)
    except DegenerateGeometryError as exc:
        warnings.append(f"embedding skipped: {exc}")
    if embedding is not None:
        rel = f"{prefix}/embed_{metric}.csv"
        (out / rel).write_text(embedding_to_csv(embedding))
        artifacts[f"{prefix}:embedding_{metric}"] = rel

    sil_rows = []
    sils: dict[str, float | None] = {}
    for attr, labeling in (("homology_class", "class"), ("depth_class", "depth")):
        labels = _class_labels(manifest, attr)
        if labels is None:
            sil_rows.append((labeling, 0, "NA", f"no {attr} annotations"))
            sils[labeling] = None
            continue
        if embedding is None:
            sil_rows.append((labeling, len(labels.ids), "NA", "embedding unavailable"))
            sils[labeling] = None
            continue
        pts = {sid: embedding.coords[i] for i, sid in enumerate(embedding.ids)}
        coords = np.array([pts[sid] for sid in labels.ids])
        rel = f"{prefix}/scatter_{metric}_by_{labeling}.svg"
        (out / rel).write_text(
            svg_scatter(
                coords[:, 0],
                coords[:, 1],
                labels.labels,
                title=f"Isomap ({metric}) by {labeling}",
            )
        )
        artifacts[f"{prefix}:scatter_{metric}_{labeling}"] = rel

        emb_dm = DistanceMatrix(ids=list(embedding.ids), values=embedding.distances())
        sub = emb_dm.submatrix(labels.ids)
        try:
            value = silhouette(sub, labels)
        except SilhouetteUndefinedError as exc:
            sil_rows.append((labeling, len(labels.ids), "NA", str(exc)))
            sils[labeling] = None
            warnings.append(f"silhouette by {labeling}: {exc}")
            continue
        sil_rows.append((labeling, len(labels.ids), "%.17g" % value, ""))
        sils[labeling] = value

    rel = f"{prefix}/silhouette_{metric}.tsv"
    lines = ["labeling\tn\tsilhouette\tnote"]
    for labeling, n, value, note in sil_rows:
        lines.append(f"{labeling}\t{n}\t{value}\t{note}")
    (out / rel).write_text("\n".join(lines) + "\n")
    artifacts[f"{prefix}:silhouette_{metric}"] = rel

    return artifacts, warnings, sils


def cmd_compare(cfg: PipelineConfig, metric: str) -> tuple[RunManifest, list[str]]:
    """Pairwise distances, 2-D Isomap, class/depth scatters, silhouettes."""
    out = Path(cfg.output_dir)
    manifest = RunManifest.read(out)
    artifacts, warnings, _ = _compare_core(cfg, out, manifest, metric, "compare")
    manifest.artifacts.update(artifacts)
    manifest.write(out)
    return manifest, warnings


# ---------------------------------------------------------------------------
# randomization test
# ---------------------------------------------------------------------------

def cmd_test(
    cfg: PipelineConfig,
    class_a: str,
    class_b: str,
    layers: list[int] | None = None,
) -> tuple[RunManifest, list[str]]:
    """Average landscapes per class, randomization test, optional heat map."""
    out = Path(cfg.output_dir)
    manifest = RunManifest.read(out)
    members: dict[str, list[StructureRecord]] = {class_a: [], class_b: []}
    for rec in manifest.structures:
        if rec.homology_class in members:
            members[rec.homology_class].append(rec)
    for cls in (class_a, class_b):
        if not members[cls]:
            raise ParameterError(f"no structures with homology class {cls!r}")

    lans = _load_all_landscapes(out, manifest)
    test_dir = out / "test"
    test_dir.mkdir(exist_ok=True)
    artifacts = {}

    for cls in dict.fromkeys((class_a, class_b)):
        avg = average_landscape([lans[r.id] for r in members[cls]])
        rel = f"test/avg_{_safe_name(cls)}.lan"
        (out / rel).write_text(write_lan(avg))
        artifacts[f"test:avg_{_safe_name(cls)}"] = rel

    sample_a = LandscapeSample(class_a, [lans[r.id] for r in members[class_a]])
    sample_b = LandscapeSample(class_b, [lans[r.id] for r in members[class_b]])
    p_value, t_obs = randomization_test_detail(
        sample_a, sample_b, k=cfg.k, seed=cfg.seed, norm_p=cfg.norm_p
    )
    pair_name = f"{_safe_name(class_a)}_vs_{_safe_name(class_b)}"
    rel = f"test/randomization_{pair_name}.tsv"
    (out / rel).write_text(
        "class_a\tclass_b\tt_obs\tp_value\tk\tseed\n"
        f"{class_a}\t{class_b}\t{'%.17g' % t_obs}\t{'%.17g' % p_value}"
        f"\t{cfg.k}\t{cfg.seed}\n"
    )
    artifacts[f"test:randomization_{pair_name}"] = rel

    if layers:
        by_id: dict[str, StructureRecord] = {}
        for rec in members[class_a] + members[class_b]:
            by_id.setdefault(rec.id, rec)
        ids = list(by_id)
        n = len(ids)
        values = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = layer_restricted_distance(lans[ids[i]], lans[ids[j]], layers)
                values[i, j] = values[j, i] = d
        heat = DistanceMatrix(ids=ids, values=values)
        rel = f"test/heatmap_{pair_name}.csv"
        (out / rel).write_text(matrix_to_csv(heat))
        artifacts[f"test:heatmap_{pair_name}"] = rel
        layer_names = ",".join(str(s) for s in sorted(layers))
        rel = f"test/heatmap_{pair_name}.svg"
        (out / rel).write_text(
            svg_heatmap(
                values, ids, title=f"layer-restricted distance (layers {layer_names})"
            )
        )
        artifacts[f"test:heatmap_svg_{pair_name}"] = rel

    manifest.artifacts.update(artifacts)
    manifest.write(out)
    return manifest, []


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def cmd_generator(
    cfg: PipelineConfig,
    struct_id: str,
    k: int = 1,
    t_star: float | None = None,
) -> tuple[RunManifest, dict]:
    """Cycle representative for the layer-k landscape peak of one structure."""
    out = Path(cfg.output_dir)
    manifest = RunManifest.read(out)
    rec = manifest.record(struct_id)
    if rec.diagram is None or rec.landscape is None:
        raise ParameterError(f"{struct_id} has no diagram/landscape; run ph first")

    interp = _stamped_interp(manifest, cfg)
    lan = read_lan((out / rec.landscape).read_text(), source=rec.landscape)
    diagram = diagram_from_csv((out / rec.diagram).read_text(), source_id=struct_id)
    t_peak, _ = layer_peak(lan, k, t_star)
    pair = peak_pair(diagram, k, t_peak)
    cloud = _load_cloud(out, rec, interp)
    rep = compute_generator(cloud, pair)

    gen_dir = out / "generator"
    gen_dir.mkdir(exist_ok=True)
    artifacts = {}

    lines = ["u,v,on_backbone"]
    for (u, v), on_bb in zip(rep.edges, rep.on_backbone):
        lines.append(f"{u},{v},{int(on_bb)}")
    rel = f"generator/{struct_id}.cycle.csv"
    (out / rel).write_text("\n".join(lines) + "\n")
    artifacts[f"generator:cycle_{struct_id}"] = rel

    core_span = None
    overlap = None
    if rec.core_start is not None and rec.core_end is not None:
        ann = annotate(rec.length, rec.core_start, rec.core_end)
        overlap = cycle_core_overlap(rep, ann, interp)
        stride = interp + 1
        core_span = (rec.core_start * stride, rec.core_end * stride)

    proj = pca_project(cloud.points)
    edge_triples = [
        (int(u), int(v), bool(b)) for (u, v), b in zip(rep.edges, rep.on_backbone)
    ]
    rel = f"generator/{struct_id}.cycle.svg"
    (out / rel).write_text(
        svg_backbone(proj, edge_triples, core_span, title=f"{struct_id} cycle")
    )
    artifacts[f"generator:plot_{struct_id}"] = rel

    rel = f"generator/{struct_id}.overlap.tsv"
    (out / rel).write_text(
        "id\tk\tt_peak\tbirth\tdeath\tn_edges\toverlap\n"
        f"{struct_id}\t{k}\t{'%.17g' % t_peak}\t{'%.17g' % pair.birth}"
        f"\t{'%.17g' % pair.death}\t{len(rep.edges)}"
        f"\t{'NA' if overlap is None else '%.17g' % overlap}\n"
    )
    artifacts[f"generator:overlap_{struct_id}"] = rel

    manifest.artifacts.update(artifacts)
    manifest.write(out)
    result = {
        "id": struct_id,
        "k": k,
        "t_peak": t_peak,
        "pair": pair,
        "overlap": overlap,
        "n_edges": len(rep.edges),
    }
    return manifest, result


# ---------------------------------------------------------------------------
# noise sweep
# ---------------------------------------------------------------------------

def cmd_noise(
    cfg: PipelineConfig,
    sigmas: tuple[float, ...] | None = None,
    metric: str = "landscape",
) -> tuple[RunManifest, list[str]]:
    """Perturb clouds at each sigma, rerun ph + compare, report silhouettes.

    The perturbation seed for structure j at sigma index i is
    seed XOR (i * n_structures + j), so every draw is independent and the
    whole sweep is reproducible from one seed.
    """
    out = Path(cfg.output_dir)
    manifest = RunManifest.read(out)
    interp = _stamped_interp(manifest, cfg)
    grid = cfg.sigmas if sigmas is None else sigmas
    n = len(manifest.structures)
    failures: dict[str, str] = {}
    rows = []
    warnings: list[str] = []

    for i, sigma in enumerate(grid):
        sub_rel = f"noise/sigma_{'%g' % sigma}"
        sub = out / sub_rel
        (sub / "clouds").mkdir(parents=True, exist_ok=True)
        sub_records = []
        for j, rec in enumerate(manifest.structures):
            cloud = _load_cloud(out, rec, interp)
            noisy = perturb(cloud.points, sigma, cfg.seed ^ (i * n + j))
            sub_rec = StructureRecord(**asdict(rec))
            sub_rec.cloud = f"clouds/{rec.id}.xyz"
            sub_rec.diagram = None
            sub_rec.landscape = None
            _write_cloud(sub / sub_rec.cloud, noisy)
            sub_records.append(sub_rec)
        sub_cfg = PipelineConfig(
            **{**asdict(cfg), "output_dir": str(sub), "interp_factor": interp}
        )
        sub_manifest = RunManifest(config=sub_cfg.as_json(), structures=sub_records)
        sub_manifest.write(sub)
        try:
            sub_manifest = cmd_ph(sub_cfg)
            _, sub_warnings, sils = _compare_core(
                sub_cfg, sub, sub_manifest, metric, "compare"
            )
            sub_manifest.write(sub)
        except PipelineError as exc:
            failures[f"sigma={'%g' % sigma}"] = f"{type(exc).__name__}: {exc}"
            continue
        warnings += [f"sigma={'%g' % sigma}: {w}" for w in sub_warnings]
        rows.append((sigma, sils.get("class"), sils.get("depth")))

    noise_dir = out / "noise"
    noise_dir.mkdir(exist_ok=True)
    lines = ["sigma\tsilhouette_class\tsilhouette_depth"]
    for sigma, s_cls, s_dep in rows:
        lines.append(
            f"{'%g' % sigma}"
            f"\t{'NA' if s_cls is None else '%.17g' % s_cls}"
            f"\t{'NA' if s_dep is None else '%.17g' % s_dep}"
        )
    rel = "noise/report.tsv"
    (out / rel).write_text("\n".join(lines) + "\n")
    manifest.artifacts["noise:report"] = rel

    series = []
    for name, idx in (("by class", 1), ("by depth", 2)):
        ys = [row[idx] for row in rows if row[idx] is not None]
        if len(ys) == len(rows) and rows:
            series.append((name, ys))
    if series:
        rel = "noise/silhouette.svg"
        (out / rel).write_text(
            svg_line_chart(
                [row[0] for row in rows],
                series,
                title=f"silhouette vs noise ({metric})",
                xlabel="sigma",
                ylabel="silhouette",
            )
        )
        manifest.artifacts["noise:plot"] = rel

    manifest.write(out)
    if failures:
        raise StructureFailuresError(failures)
    return manifest, warnings
