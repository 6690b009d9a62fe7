import json
import math
from pathlib import Path

import numpy as np
import pytest

from tangleph.cli import run as cli_run
from tangleph.errors import (
    AnnotationError,
    ConfigError,
    NoSuchLayerError,
    ParameterError,
    ParseError,
    StructureFailuresError,
)
from tangleph.landscapes import landscape_distance, read_lan
from tangleph.metrics import matrix_from_csv
from tangleph.pipeline import (
    DEFAULT_SIGMAS,
    PipelineConfig,
    RunManifest,
    build_config,
    cmd_compare,
    cmd_generator,
    cmd_ingest,
    cmd_noise,
    cmd_ph,
    cmd_test,
    parse_config_text,
)


def _circle_xyz(n=12, radius=1.0, z_wobble=0.0, offset=0.0):
    ts = np.arange(n) * 2 * math.pi / n + offset
    pts = np.column_stack(
        [
            radius * np.cos(ts),
            radius * np.sin(ts),
            z_wobble * np.sin(3 * ts),
        ]
    )
    return "\n".join("%.17g %.17g %.17g" % tuple(p) for p in pts) + "\n"


def _write_inputs(tmp_path, specs):
    # specs: list of (id, xyz_text)
    in_dir = tmp_path / "inputs"
    in_dir.mkdir(exist_ok=True)
    for sid, text in specs:
        (in_dir / f"{sid}.xyz").write_text(text)
    return in_dir


def _base_cfg(tmp_path, **kw):
    defaults = dict(
        input_dir=str(tmp_path / "inputs"),
        output_dir=str(tmp_path / "out"),
        interp_factor=0,
        n_neighbors=2,
        k=50,
        seed=7,
        workers=1,
    )
    defaults.update(kw)
    return PipelineConfig(**defaults)


def _standard_set(tmp_path, n_structs=4):
    specs = [
        (f"c{i}", _circle_xyz(12, radius=1.0 + 0.2 * i, z_wobble=0.05 * i))
        for i in range(n_structs)
    ]
    return _write_inputs(tmp_path, specs)


def _annotation_text(ids, length=12, core=(3, 8), classes=None, cores=None):
    lines = ["id\tlength\tcore_start\tcore_end\thomology_class"]
    for i, sid in enumerate(ids):
        cls = "" if classes is None else classes[i]
        lo, hi = core if cores is None else cores[i]
        lines.append(f"{sid}\t{length}\t{lo}\t{hi}\t{cls}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- config


def test_config_parsing_and_defaults():
    raw = parse_config_text(
        "# comment\ninput_dir = data   # trailing\nseed=3\n\nmax_scale=AUTO\n"
    )
    cfg = build_config(raw)
    assert cfg.input_dir == "data"
    assert cfg.seed == 3
    assert cfg.max_scale is None
    assert cfg.interp_factor == 5
    assert cfg.n_neighbors == 5
    assert cfg.norm_p == 1
    assert cfg.k == 1000
    assert cfg.sigmas == DEFAULT_SIGMAS


def test_config_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError):
        parse_config_text("bogus_key=1\n")
    with pytest.raises(ConfigError):
        parse_config_text("seed=1\nseed=2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just a line\n")


def test_config_value_validation():
    with pytest.raises(ConfigError):
        build_config({"seed": "x"})
    with pytest.raises(ConfigError):
        build_config({"interp_factor": "-1"})
    with pytest.raises(ConfigError):
        build_config({"max_scale": "0"})
    with pytest.raises(ConfigError):
        build_config({"sigmas": "0.1,nope"})
    with pytest.raises(ConfigError):
        build_config({"norm_p": "0"})
    cfg = build_config({"max_scale": "4.5", "sigmas": "0.5,1.0"})
    assert cfg.max_scale == 4.5
    assert cfg.sigmas == (0.5, 1.0)


def test_config_overrides_win():
    cfg = build_config({"seed": "1"}, overrides={"seed": 9, "output_dir": "elsewhere"})
    assert cfg.seed == 9
    assert cfg.output_dir == "elsewhere"


# ---------------------------------------------------------------- ingest


def test_ingest_writes_clouds_and_manifest(tmp_path):
    _standard_set(tmp_path, 3)
    cfg = _base_cfg(tmp_path, interp_factor=2)
    manifest = cmd_ingest(cfg)
    assert [r.id for r in manifest.structures] == ["c0", "c1", "c2"]
    for rec in manifest.structures:
        assert rec.length == 12
        # cloud sizes n + (n-1)*d
        cloud = (Path(cfg.output_dir) / rec.cloud).read_text()
        assert len(cloud.strip().splitlines()) == 12 + 11 * 2
        assert rec.depth is None and rec.depth_class is None
    on_disk = json.loads((Path(cfg.output_dir) / "manifest.json").read_text())
    assert len(on_disk["structures"]) == 3


def test_ingest_with_annotation(tmp_path):
    in_dir = _standard_set(tmp_path, 2)
    ann = tmp_path / "ann.tsv"
    ann.write_text(_annotation_text(["c0", "c1"], classes=["3_1", "4_1"]))
    cfg = _base_cfg(tmp_path, annotation_path=str(ann))
    manifest = cmd_ingest(cfg)
    rec = manifest.record("c0")
    assert rec.depth == pytest.approx(3 * 3 / 144)
    assert rec.depth_class == "deep"
    assert rec.homology_class == "3_1"
    assert (rec.core_start, rec.core_end) == (3, 8)


def test_ingest_annotation_length_mismatch(tmp_path):
    _standard_set(tmp_path, 1)
    ann = tmp_path / "ann.tsv"
    ann.write_text(_annotation_text(["c0"], length=99))
    with pytest.raises(AnnotationError):
        cmd_ingest(_base_cfg(tmp_path, annotation_path=str(ann)))


def test_ingest_unannotated_chain_left_blank(tmp_path):
    _standard_set(tmp_path, 2)
    ann = tmp_path / "ann.tsv"
    ann.write_text(_annotation_text(["c0"]))
    manifest = cmd_ingest(_base_cfg(tmp_path, annotation_path=str(ann)))
    assert manifest.record("c0").depth is not None
    assert manifest.record("c1").depth is None


def test_ingest_parse_error_aborts(tmp_path):
    in_dir = _standard_set(tmp_path, 2)
    (in_dir / "bad.xyz").write_text("1 2\n")
    with pytest.raises(ParseError) as exc:
        cmd_ingest(_base_cfg(tmp_path))
    assert "bad.xyz" in str(exc.value)


def test_ingest_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        cmd_ingest(_base_cfg(tmp_path, input_dir=str(tmp_path / "nope")))
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ConfigError):
        cmd_ingest(_base_cfg(tmp_path, input_dir=str(empty)))
    _standard_set(tmp_path)
    with pytest.raises(ConfigError):
        cmd_ingest(_base_cfg(tmp_path, annotation_path=str(tmp_path / "missing.tsv")))


# ---------------------------------------------------------------- ph


def test_ph_writes_diagrams_and_landscapes(tmp_path):
    _standard_set(tmp_path, 3)
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    manifest = cmd_ph(cfg)
    out = Path(cfg.output_dir)
    for rec in manifest.structures:
        assert rec.diagram == f"diagrams/{rec.id}.dgm.csv"
        assert rec.landscape == f"landscapes/{rec.id}.lan"
        dgm_text = (out / rec.diagram).read_text()
        assert dgm_text.startswith("birth,death\n")
        assert len(dgm_text.strip().splitlines()) >= 2  # circle has H1
        read_lan((out / rec.landscape).read_text())


def test_ph_rerun_byte_identical(tmp_path):
    _standard_set(tmp_path, 2)
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    out = Path(cfg.output_dir)
    first = {
        p.name: p.read_bytes() for p in (out / "diagrams").iterdir()
    }
    cmd_ph(cfg)
    second = {
        p.name: p.read_bytes() for p in (out / "diagrams").iterdir()
    }
    assert first == second


def test_ph_isolates_per_structure_failures(tmp_path):
    in_dir = _standard_set(tmp_path, 2)
    (in_dir / "tiny.xyz").write_text("0 0 0\n1 0 0\n")  # 2 points: no H1 possible
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    with pytest.raises(StructureFailuresError) as exc:
        cmd_ph(cfg)
    assert set(exc.value.failures) == {"tiny"}
    manifest = RunManifest.read(cfg.output_dir)
    assert manifest.record("tiny").diagram is None
    assert manifest.record("c0").diagram is not None
    assert (Path(cfg.output_dir) / "diagrams" / "c0.dgm.csv").is_file()


def test_ph_parallel_matches_serial(tmp_path):
    _standard_set(tmp_path, 4)
    cfg1 = _base_cfg(tmp_path, workers=1)
    cmd_ingest(cfg1)
    cmd_ph(cfg1)
    out1 = Path(cfg1.output_dir)
    serial = {p.name: p.read_bytes() for p in (out1 / "diagrams").iterdir()}

    cfg2 = _base_cfg(tmp_path, workers=2, output_dir=str(tmp_path / "out2"))
    cmd_ingest(cfg2)
    cmd_ph(cfg2)
    out2 = Path(cfg2.output_dir)
    parallel = {p.name: p.read_bytes() for p in (out2 / "diagrams").iterdir()}
    assert serial == parallel


# ---------------------------------------------------------------- compare


def _annotated_run(tmp_path, n=4, classes=None, **cfg_kw):
    _standard_set(tmp_path, n)
    ids = [f"c{i}" for i in range(n)]
    if classes is None:
        classes = ["3_1" if i % 2 == 0 else "4_1" for i in range(n)]
    # first half deep ((3,8) -> depth 9/144), second half shallow ((0,11) -> 0)
    cores = [(3, 8) if i < n // 2 else (0, 11) for i in range(n)]
    ann = tmp_path / "ann.tsv"
    ann.write_text(_annotation_text(ids, classes=classes, cores=cores))
    cfg = _base_cfg(tmp_path, annotation_path=str(ann), **cfg_kw)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    return cfg


def test_compare_landscape_outputs(tmp_path):
    cfg = _annotated_run(tmp_path)
    manifest, warnings = cmd_compare(cfg, "landscape")
    out = Path(cfg.output_dir)
    dm = matrix_from_csv((out / "compare/dist_landscape.csv").read_text())
    assert dm.ids == ["c0", "c1", "c2", "c3"]
    # wiring check: matrix equals direct landscape distances
    lans = {
        rec.id: read_lan((out / rec.landscape).read_text())
        for rec in manifest.structures
    }
    expect = landscape_distance(lans["c0"], lans["c1"], p=cfg.norm_p)
    assert dm.values[0, 1] == pytest.approx(expect, rel=1e-9)
    assert (out / "compare/embed_landscape.csv").is_file()
    assert (out / "compare/scatter_landscape_by_class.svg").is_file()
    assert (out / "compare/scatter_landscape_by_depth.svg").is_file()
    sil = (out / "compare/silhouette_landscape.tsv").read_text().splitlines()
    assert sil[0] == "labeling\tn\tsilhouette\tnote"
    assert len(sil) == 3
    assert warnings == []


def test_compare_wasserstein_outputs(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_compare(cfg, "wasserstein")
    out = Path(cfg.output_dir)
    dm = matrix_from_csv((out / "compare/dist_wasserstein.csv").read_text())
    assert dm.values[0, 1] > 0
    assert np.all(dm.values == dm.values.T)


def test_compare_identical_structures_degenerate(tmp_path):
    specs = [(f"c{i}", _circle_xyz(12)) for i in range(3)]
    _write_inputs(tmp_path, specs)
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    manifest, warnings = cmd_compare(cfg, "landscape")
    out = Path(cfg.output_dir)
    dm = matrix_from_csv((out / "compare/dist_landscape.csv").read_text())
    assert np.all(dm.values == 0.0)
    assert any("embedding skipped" in w for w in warnings)
    sil = (out / "compare/silhouette_landscape.tsv").read_text()
    assert "NA" in sil


def test_compare_depth_silhouette_separates_classes(tmp_path):
    # two radius groups; depth classes assigned via tails in the annotation
    specs = [("a0", _circle_xyz(12, 1.0)), ("a1", _circle_xyz(12, 1.02)),
             ("b0", _circle_xyz(12, 3.0)), ("b1", _circle_xyz(12, 3.02))]
    _write_inputs(tmp_path, specs)
    ann = tmp_path / "ann.tsv"
    lines = ["id\tlength\tcore_start\tcore_end\thomology_class"]
    lines.append("a0\t12\t3\t8\t3_1")   # depth 9/144 = deep
    lines.append("a1\t12\t3\t8\t3_1")
    lines.append("b0\t12\t0\t11\t3_1")  # depth 0 = shallow
    lines.append("b1\t12\t0\t11\t3_1")
    ann.write_text("\n".join(lines) + "\n")
    cfg = _base_cfg(tmp_path, annotation_path=str(ann), n_neighbors=3)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    cmd_compare(cfg, "landscape")
    sil = (Path(cfg.output_dir) / "compare/silhouette_landscape.tsv").read_text()
    rows = {ln.split("\t")[0]: ln.split("\t") for ln in sil.splitlines()[1:]}
    assert float(rows["depth"][2]) > 0.5
    # homology silhouette undefined: all members share one class
    assert rows["class"][2] == "NA"


# ---------------------------------------------------------------- test cmd


def test_cmd_test_identical_classes_p_one(tmp_path):
    cfg = _annotated_run(tmp_path)
    manifest, _ = cmd_test(cfg, "3_1", "3_1")
    out = Path(cfg.output_dir)
    text = (out / "test/randomization_3_1_vs_3_1.tsv").read_text()
    header, row = text.splitlines()
    assert header == "class_a\tclass_b\tt_obs\tp_value\tk\tseed"
    fields = row.split("\t")
    assert fields[0] == "3_1" and fields[1] == "3_1"
    assert float(fields[2]) == 0.0
    assert float(fields[3]) == 1.0
    assert fields[4] == "50" and fields[5] == "7"
    assert (out / "test/avg_3_1.lan").is_file()


def test_cmd_test_two_classes_and_heatmap(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_test(cfg, "3_1", "4_1", layers=[1])
    out = Path(cfg.output_dir)
    assert (out / "test/avg_3_1.lan").is_file()
    assert (out / "test/avg_4_1.lan").is_file()
    tsv = (out / "test/randomization_3_1_vs_4_1.tsv").read_text()
    p_value = float(tsv.splitlines()[1].split("\t")[3])
    assert 0.0 <= p_value <= 1.0
    heat = matrix_from_csv((out / "test/heatmap_3_1_vs_4_1.csv").read_text())
    assert heat.ids == ["c0", "c2", "c1", "c3"]  # class a members, then class b
    assert (out / "test/heatmap_3_1_vs_4_1.svg").is_file()


def test_cmd_test_absent_layer_zero_heatmap(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_test(cfg, "3_1", "4_1", layers=[5])
    out = Path(cfg.output_dir)
    heat = matrix_from_csv((out / "test/heatmap_3_1_vs_4_1.csv").read_text())
    assert np.all(heat.values == 0.0)


def test_cmd_test_unknown_class(tmp_path):
    cfg = _annotated_run(tmp_path)
    with pytest.raises(ParameterError):
        cmd_test(cfg, "3_1", "nope")


def test_cmd_test_determinism(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_test(cfg, "3_1", "4_1")
    path = Path(cfg.output_dir) / "test/randomization_3_1_vs_4_1.tsv"
    first = path.read_bytes()
    cmd_test(cfg, "3_1", "4_1")
    assert path.read_bytes() == first


# ---------------------------------------------------------------- generator


def test_generator_square_cycle(tmp_path):
    square = "0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
    _write_inputs(tmp_path, [("sq", square)])
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    manifest, result = cmd_generator(cfg, "sq", k=1)
    assert result["n_edges"] == 4
    out = Path(cfg.output_dir)
    text = (out / "generator/sq.cycle.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == "u,v,on_backbone"
    edges = {tuple(int(v) for v in ln.split(",")[:2]) for ln in lines[1:]}
    assert edges == {(0, 1), (1, 2), (2, 3), (0, 3)}
    svg = (out / "generator/sq.cycle.svg").read_text()
    assert svg.startswith("<svg")
    report = (out / "generator/sq.overlap.tsv").read_text()
    assert report.splitlines()[1].endswith("NA")  # no annotation


def test_generator_overlap_with_annotation(tmp_path):
    _standard_set(tmp_path, 1)
    ann = tmp_path / "ann.tsv"
    ann.write_text(_annotation_text(["c0"], core=(0, 11)))
    cfg = _base_cfg(tmp_path, annotation_path=str(ann))
    cmd_ingest(cfg)
    cmd_ph(cfg)
    _, result = cmd_generator(cfg, "c0", k=1)
    assert result["overlap"] == 1.0  # core covers the whole chain


def test_generator_missing_layer(tmp_path):
    _standard_set(tmp_path, 1)
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    with pytest.raises(NoSuchLayerError):
        cmd_generator(cfg, "c0", k=7)


def test_generator_unknown_id(tmp_path):
    _standard_set(tmp_path, 1)
    cfg = _base_cfg(tmp_path)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    with pytest.raises(ParameterError):
        cmd_generator(cfg, "nope", k=1)


# ---------------------------------------------------------------- noise


def test_noise_zero_sigma_matches_base(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_compare(cfg, "landscape")
    out = Path(cfg.output_dir)
    base_sil = (out / "compare/silhouette_landscape.tsv").read_text()
    base_depth = [
        ln.split("\t")[2] for ln in base_sil.splitlines()[1:] if ln.startswith("depth")
    ][0]
    cmd_noise(cfg, sigmas=(0.0,), metric="landscape")
    report = (out / "noise/report.tsv").read_text().splitlines()
    assert report[0] == "sigma\tsilhouette_class\tsilhouette_depth"
    row = report[1].split("\t")
    assert row[0] == "0"
    assert row[2] == base_depth
    # sub-run artifacts exist
    assert (out / "noise/sigma_0/compare/dist_landscape.csv").is_file()


def test_noise_determinism(tmp_path):
    cfg = _annotated_run(tmp_path)
    cmd_noise(cfg, sigmas=(0.1, 0.3), metric="landscape")
    out = Path(cfg.output_dir)
    first = (out / "noise/report.tsv").read_bytes()
    first_cloud = (out / "noise/sigma_0.1/clouds/c0.xyz").read_bytes()
    cmd_noise(cfg, sigmas=(0.1, 0.3), metric="landscape")
    assert (out / "noise/report.tsv").read_bytes() == first
    assert (out / "noise/sigma_0.1/clouds/c0.xyz").read_bytes() == first_cloud


def test_noise_perturbations_differ_between_structures(tmp_path):
    specs = [("c0", _circle_xyz(12)), ("c1", _circle_xyz(12))]
    _write_inputs(tmp_path, specs)
    cfg = _base_cfg(tmp_path, n_neighbors=1)
    cmd_ingest(cfg)
    cmd_ph(cfg)
    cmd_noise(cfg, sigmas=(0.2,), metric="landscape")
    out = Path(cfg.output_dir)
    a = np.loadtxt(out / "noise/sigma_0.2/clouds/c0.xyz")
    b = np.loadtxt(out / "noise/sigma_0.2/clouds/c1.xyz")
    # same base circle, different noise draws
    assert not np.array_equal(a, b)


# ---------------------------------------------------------------- cli


def _write_cfg_file(tmp_path, **kw):
    lines = [f"{key} = {value}" for key, value in kw.items()]
    path = tmp_path / "run.cfg"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_cli_end_to_end(tmp_path, capsys):
    _standard_set(tmp_path, 3)
    ann = tmp_path / "ann.tsv"
    ann.write_text(
        _annotation_text(["c0", "c1", "c2"], classes=["3_1", "4_1", "3_1"])
    )
    cfg_path = _write_cfg_file(
        tmp_path,
        input_dir=str(tmp_path / "inputs"),
        annotation_path=str(ann),
        output_dir=str(tmp_path / "out"),
        interp_factor=0,
        n_neighbors=2,
        k=20,
        workers=1,
    )
    assert cli_run(["ingest", "--config", cfg_path]) == 0
    assert cli_run(["ph", "--config", cfg_path]) == 0
    assert cli_run(["compare", "--config", cfg_path, "--metric", "landscape"]) == 0
    assert (
        cli_run(["test", "--config", cfg_path, "--class-a", "3_1", "--class-b", "4_1"])
        == 0
    )
    assert cli_run(["generator", "--config", cfg_path, "--id", "c0", "--k", "1"]) == 0
    assert (
        cli_run(["noise", "--config", cfg_path, "--sigmas", "0.1"]) == 0
    )
    capsys.readouterr()


def test_cli_exit_codes(tmp_path, capsys):
    # missing config file -> 2
    assert cli_run(["ingest", "--config", str(tmp_path / "none.cfg")]) == 2
    # bad config content -> 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key=1\n")
    assert cli_run(["ingest", "--config", str(bad)]) == 2
    capsys.readouterr()

    # structure failure -> 1
    in_dir = _write_inputs(tmp_path, [("ok", _circle_xyz(12))])
    (in_dir / "tiny.xyz").write_text("0 0 0\n1 0 0\n")
    cfg_path = _write_cfg_file(
        tmp_path,
        input_dir=str(in_dir),
        output_dir=str(tmp_path / "out"),
        interp_factor=0,
        workers=1,
    )
    assert cli_run(["ingest", "--config", cfg_path]) == 0
    assert cli_run(["ph", "--config", cfg_path]) == 1
    err = capsys.readouterr().err
    assert "tiny" in err


def test_cli_connectivity_hint(tmp_path, capsys):
    # two tight pairs of structures, far apart, n_neighbors=1 -> disconnected
    specs = [
        ("a0", _circle_xyz(12, 1.0)),
        ("a1", _circle_xyz(12, 1.001)),
        ("b0", _circle_xyz(12, 9.0)),
        ("b1", _circle_xyz(12, 9.001)),
    ]
    _write_inputs(tmp_path, specs)
    cfg_path = _write_cfg_file(
        tmp_path,
        input_dir=str(tmp_path / "inputs"),
        output_dir=str(tmp_path / "out"),
        interp_factor=0,
        n_neighbors=1,
        workers=1,
    )
    assert cli_run(["ingest", "--config", cfg_path]) == 0
    assert cli_run(["ph", "--config", cfg_path]) == 0
    assert cli_run(["compare", "--config", cfg_path, "--metric", "landscape"]) == 1
    err = capsys.readouterr().err
    assert "n_neighbors" in err and "hint" in err


def test_cli_seed_and_out_overrides(tmp_path, capsys):
    _standard_set(tmp_path, 2)
    cfg_path = _write_cfg_file(
        tmp_path,
        input_dir=str(tmp_path / "inputs"),
        output_dir=str(tmp_path / "ignored"),
        interp_factor=0,
        workers=1,
    )
    alt = str(tmp_path / "alt_out")
    assert cli_run(["ingest", "--config", cfg_path, "--out", alt]) == 0
    assert (Path(alt) / "manifest.json").is_file()
    manifest = RunManifest.read(alt)
    assert manifest.config["output_dir"] == alt
    capsys.readouterr()
