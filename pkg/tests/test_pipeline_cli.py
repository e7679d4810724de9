import numpy as np
import pytest

from scenehog import (
    RunConfig,
    extract_clip,
    extract_clips,
    feature_dim,
    generate_toy,
    parse_config_file,
    read_features,
    read_report,
)
from scenehog.cli import main
from scenehog.errors import ConfigError

SMALL = dict(f_min_hz=80.0, image_size=64, filter_size=3, cell_size=8, n_per_class=3)


def small_config(**kw):
    return RunConfig(**{**SMALL, **kw})


def run_cli(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    table = {}
    for line in out.out.strip().splitlines():
        key, _, value = line.partition("\t")
        table[key] = value
    return rc, table, out.err


class TestRunConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_rejections(self):
        bad = [
            dict(variant="folded"),
            dict(pooling="max"),
            dict(kernel="poly"),
            dict(cell_size=7),
            dict(pooling="grid", grid_freq=7),
            dict(c_grid="1,-2"),
            dict(f_min_hz=500.0, f_max_hz=100.0),
            dict(seg_seconds=-1.0),
            dict(hop_samples=-1),
        ]
        for kw in bad:
            with pytest.raises(ConfigError):
                RunConfig(**kw).validate()

    def test_f_max_capped_to_clip_nyquist(self):
        cfg = small_config()
        clips = generate_toy(cfg)
        cqt_cfg = cfg.cqt_config(clips[0])
        assert cqt_cfg.f_max_hz == pytest.approx(0.95 * 4000.0)

    def test_automatic_hop(self):
        cfg = small_config(hop_samples=0)
        clips = generate_toy(cfg)
        assert cfg.cqt_config(clips[0]).hop_samples == 8000 // 127
        cfg2 = small_config(hop_samples=100)
        assert cfg2.cqt_config(clips[0]).hop_samples == 100

    def test_config_hash_tracks_content(self):
        a = small_config()
        b = small_config()
        c = small_config(cell_size=16)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 40

    def test_with_overrides_does_not_mutate(self):
        a = small_config()
        b = a.with_overrides(["n_orient=4", "include_factors=true"])
        assert a.n_orient == 8 and not a.include_factors
        assert b.n_orient == 4 and b.include_factors

    def test_grid_parsing(self):
        cfg = small_config(c_grid="0.5, 2, 8", sigma_grid="3,30")
        np.testing.assert_allclose(cfg.c_grid_values(), [0.5, 2.0, 8.0])
        assert cfg.sigma_grid_values() == (3.0, 30.0)
        assert small_config(c_grid="").c_grid_values() is None


class TestParseConfigFile:
    def test_file_with_comments_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment line\n"
            "\n"
            "cell_size=16\n"
            "variant=signed\n"
            "include_factors=yes\n"
        )
        cfg = parse_config_file(path, ["variant=unsigned"])
        assert cfg.cell_size == 16
        assert cfg.variant == "unsigned"
        assert cfg.include_factors is True

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("cells=8\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("cell_size 8\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_bad_bool_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_file(None, ["include_factors=maybe"])

    def test_no_file_gives_defaults(self):
        assert parse_config_file(None) == RunConfig()


class TestExtraction:
    def test_dim_follows_layout(self):
        clips = generate_toy(small_config(n_per_class=1))
        cases = [
            (small_config(), (8 + 8) * 24),
            (small_config(variant="signed", pooling="full"), 64 * 16),
            (small_config(variant="unsigned", pooling="grid", grid_freq=4, grid_time=2), 4 * 2 * 8),
            (small_config(include_factors=True), (8 + 8) * 28),
        ]
        for cfg, want in cases:
            vec, timing = extract_clip(clips[0], cfg)
            assert vec.dim == want
            cells = cfg.image_size // cfg.cell_size
            assert want == feature_dim(
                cfg.pool_config(), cfg.n_orient, cells, cells,
                full=cfg.pooling == "full",
            )
            assert set(timing) == {"cqt", "image", "filter", "hog", "pool"}

    def test_extract_clips_order_and_threads(self):
        cfg = small_config()
        clips = generate_toy(cfg)
        x1, labels, ids, timing = extract_clips(clips, cfg, threads=1)
        x2, _, _, _ = extract_clips(clips, cfg, threads=3)
        np.testing.assert_array_equal(x1, x2)
        assert labels == [c.label for c in clips]
        assert ids == [c.source_id for c in clips]
        assert x1.shape == (6, 384)
        assert all(v >= 0 for v in timing.values())

    def test_segmentation_expands_rows(self):
        cfg = small_config(seg_seconds=0.25, n_per_class=1)
        clips = generate_toy(cfg)
        x, labels, ids, _ = extract_clips(clips, cfg)
        assert x.shape[0] == 8  # two 1 s clips in four 0.25 s pieces
        assert ids[0].endswith("#000") and ids[3].endswith("#003")
        assert labels[:4] == [clips[0].label] * 4

    def test_empty_input_rejected(self):
        with pytest.raises(ConfigError):
            extract_clips([], small_config())


@pytest.fixture(scope="module")
def toy_workspace(tmp_path_factory):
    """One CLI toygen/extract/experiment flow shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cliflow")
    cfg_file = root / "run.cfg"
    cfg_file.write_text(
        "f_min_hz=80\n"
        "image_size=64\n"
        "filter_size=3\n"
        "cell_size=8\n"
        "n_per_class=5\n"
        "seed=3\n"
        "n_splits=3\n"
        "fixed_train_count=4\n"
    )
    return root, cfg_file


class TestCli:
    def test_toygen(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        data = root / "data"
        rc, table, _ = run_cli(capsys, "toygen", "--config", cfg_file, "--out", data)
        assert rc == 0
        assert table["clips"] == "10"
        wavs = sorted(p.relative_to(data).as_posix() for p in data.rglob("*.wav"))
        assert len(wavs) == 10
        assert wavs[0].startswith("neg/") and wavs[-1].startswith("pos/")

    def test_toygen_refuses_nonempty_out(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        rc, _, err = run_cli(capsys, "toygen", "--config", cfg_file, "--out", root / "data")
        assert rc == 3
        assert "force" in err

    def test_extract(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        feat = root / "toy.features"
        rc, table, _ = run_cli(
            capsys, "extract", "--config", cfg_file,
            "--data", root / "data", "--out", feat,
        )
        assert rc == 0
        assert table["rows"] == "10"
        assert table["dim"] == "384"
        x, labels, tag = read_features(feat)
        assert x.shape == (10, 384)
        assert sorted(set(labels)) == ["neg", "pos"]
        assert len(tag) == 40

    def test_extract_threads_reproduce_bytes(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        again = root / "again.features"
        rc, _, _ = run_cli(
            capsys, "extract", "--config", cfg_file,
            "--data", root / "data", "--out", again, "--threads", 4,
        )
        assert rc == 0
        assert again.read_bytes() == (root / "toy.features").read_bytes()

    def test_extract_dump_images(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        dump = root / "images"
        rc, _, _ = run_cli(
            capsys, "extract", "--config", cfg_file, "--data", root / "data",
            "--out", root / "imgrun.features", "--dump-images", dump,
        )
        assert rc == 0
        pgms = sorted(dump.glob("*.pgm"))
        assert len(pgms) == 10
        assert pgms[0].read_bytes().startswith(b"P5\n64 64\n255\n")

    def test_experiment(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        report_path = root / "report.txt"
        rc, table, _ = run_cli(
            capsys, "experiment", "--config", cfg_file,
            "--features", root / "toy.features", "--report", report_path,
            "--manifest-dir", root / "splits", "--heatmap", root / "confusion.pgm",
        )
        assert rc == 0
        assert table["n_splits"] == "3"
        assert table["n_train"] == "4" and table["n_test"] == "6"
        report = read_report(report_path)
        assert report.n_splits == 3
        assert 0.0 <= report.map_mean <= 1.0
        assert float(table["map_mean"]) == pytest.approx(report.map_mean, abs=1e-6)
        manifests = sorted((root / "splits").glob("split_*.txt"))
        assert len(manifests) == 3
        assert (root / "confusion.pgm").read_bytes().startswith(b"P5\n2 2\n255\n")

    def test_compare_identical_reports_degenerate(self, toy_workspace, capsys):
        root, _ = toy_workspace
        rc, table, _ = run_cli(
            capsys, "compare",
            "--report-a", root / "report.txt", "--report-b", root / "report.txt",
        )
        assert rc == 0
        assert table["degenerate"] == "yes"
        assert table["p_value"] == "1"
        assert table["significant_at_0.005"] == "no"

    def test_compare_mismatched_reports_rejected(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        other = root / "other_report.txt"
        rc, _, _ = run_cli(
            capsys, "experiment", "--config", cfg_file, "--set", "n_splits=2",
            "--features", root / "toy.features", "--report", other,
        )
        assert rc == 0
        rc, _, err = run_cli(
            capsys, "compare", "--report-a", root / "report.txt", "--report-b", other,
        )
        assert rc == 3
        assert "mismatch" in err

    def test_config_error_exit_code(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        rc, _, err = run_cli(
            capsys, "extract", "--config", cfg_file, "--set", "cell_size=7",
            "--data", root / "data", "--out", root / "x.features",
        )
        assert rc == 2
        assert "config error" in err

    def test_data_error_exit_code(self, toy_workspace, capsys):
        root, cfg_file = toy_workspace
        rc, _, err = run_cli(
            capsys, "extract", "--config", cfg_file,
            "--data", root / "nosuch", "--out", root / "x.features",
        )
        assert rc == 3
        assert "data error" in err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.startswith("scenehog ")
