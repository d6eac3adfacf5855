import numpy as np
import pytest

from maxwellinv.config import (
    ExperimentConfig,
    GeometryConfig,
    InversionConfig,
    MeshConfig,
    config_from_dict,
    config_to_dict,
)
from maxwellinv.errors import ConfigError, NoPeakError
from maxwellinv.forward import read_dataset, read_traces
from maxwellinv.pipeline import (
    ball_depth,
    cmd_complete,
    cmd_invert,
    cmd_pipeline,
    cmd_synth,
    data_mesh,
    inverse_mesh,
    v_mesh,
)
from maxwellinv.supports import Ball


def fast_config(**overrides) -> ExperimentConfig:
    """Coarse meshes and few waves; runs in seconds, accuracy not asserted."""
    base = dict(
        name="fast",
        truth=Ball((-0.4, 0.0), 0.2),
        amplitude=0.1,
        n_waves=4,
        meshes=MeshConfig(h_data=0.06, h_v=0.06, h_inverse=0.08),
        inversion=InversionConfig(max_iter=12),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    artifacts = cmd_pipeline(fast_config(), str(out))
    return artifacts


def test_meshes_respect_geometry():
    cfg = fast_config()
    dm = data_mesh(cfg)
    assert "Gamma0" in dm.curve_tags and "r=0.8" in dm.curve_tags
    vm = v_mesh(cfg)
    assert "Gamma0" in vm.curve_tags and "Gamma_inner" in vm.curve_tags
    im = inverse_mesh(cfg)
    assert "r=0.8" in im.curve_tags


def test_pipeline_artifacts_exist(run):
    for path in (run.dataset, run.completed, run.peaks, run.result,
                 run.field_dump, run.log, *run.figures):
        with open(path, "rb") as f:
            assert f.read(8)


def test_artifacts_embed_config_checksum(run):
    checksum = fast_config().checksum()
    for path in (run.dataset, run.completed, run.peaks, run.result,
                 run.field_dump):
        with open(path) as f:
            assert checksum in f.read(2000)


def test_pipeline_deterministic(tmp_path):
    cfg = fast_config()
    a = cmd_pipeline(cfg, str(tmp_path / "a"))
    b = cmd_pipeline(cfg, str(tmp_path / "b"))
    for pa, pb in ((a.dataset, b.dataset), (a.completed, b.completed),
                   (a.peaks, b.peaks), (a.result, b.result),
                   (a.field_dump, b.field_dump), *zip(a.figures, b.figures)):
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read(), pa


def test_synth_requires_truth(tmp_path):
    with pytest.raises(ConfigError, match="truth"):
        cmd_synth(fast_config(truth=None), str(tmp_path))


def test_synth_round_trip(tmp_path):
    cfg = fast_config()
    path = cmd_synth(cfg, str(tmp_path))
    ds = read_dataset(path)
    assert ds.meas_gamma0.n_waves == cfg.n_waves
    assert np.all(ds.meas_gamma0.norms() > 0.0)


def test_skip_completion_copies_exact_traces(tmp_path):
    cfg = fast_config(skip_completion=True)
    ds_path = cmd_synth(cfg, str(tmp_path))
    completed_path = cmd_complete(cfg, ds_path, str(tmp_path))
    meta, traces = read_traces(completed_path)
    assert "skipped" in meta["completion"]
    ds = read_dataset(ds_path)
    assert np.array_equal(traces["delta_int"].values, ds.diag_delta_int.values)


def test_completion_header_records_settings(run):
    meta, traces = read_traces(run.completed)
    assert meta["completion"] == "quasi-reversibility"
    assert float(meta["delta"]) == 0.1
    assert traces["delta_int"].curve_tag == "r=0.8"


def test_invert_reconstructs_ball(run):
    with open(run.result) as f:
        text = f.read()
    assert "STAGE ball" in text
    assert "rel_error" in text
    depth = float(next(ln.split()[1] for ln in text.splitlines()
                       if ln.startswith("depth ")))
    assert 0.2 < depth < 0.7


def test_invert_no_peak_is_error(tmp_path):
    cfg = fast_config(amplitude=0.0, skip_completion=True)
    ds_path = cmd_synth(cfg, str(tmp_path))
    completed_path = cmd_complete(cfg, ds_path, str(tmp_path))
    with pytest.raises(NoPeakError):
        cmd_invert(cfg, completed_path, str(tmp_path))


def test_field_dump_shape(run):
    cfg = fast_config()
    rows = []
    with open(run.field_dump) as f:
        for line in f:
            if not line.startswith(("MAXWELLINV", "#")):
                rows.append([float(v) for v in line.split()])
    mesh = inverse_mesh(cfg)
    assert len(rows) == mesh.n_triangles
    re = np.array([r[2] for r in rows])
    # perturbed triangles stand out from the background value 1
    assert np.sum(np.abs(re - 1.0) > 1e-3) > 0
    assert np.sum(np.abs(re - 1.0) < 1e-12) > mesh.n_triangles // 2


def test_sweep_rows_and_summary(tmp_path):
    cfg = fast_config(sweep_amplitudes=(0.1, -0.1), skip_completion=True)
    artifacts = cmd_pipeline(cfg, str(tmp_path))
    with open(artifacts.result) as f:
        text = f.read()
    assert text.startswith("MAXWELLINV SWEEP 1")
    rows = [ln for ln in text.splitlines()
            if ln and not ln.startswith(("MAXWELLINV", "#", "TABLE", "SUMMARY"))]
    assert len(rows) == 2
    assert "mean_amp_rel_error" in text
    assert "std_depth" in text


def test_ball_depth():
    assert ball_depth(Ball((-0.4, 0.0), 0.2), 0.8) == pytest.approx(0.4)
    assert ball_depth(object(), 0.8) is None


def test_seed_changes_noisy_data_only(tmp_path):
    noisy = fast_config(noise_eta=0.02, seed=1)
    (tmp_path / "s1").mkdir()
    (tmp_path / "s2").mkdir()
    p1 = cmd_synth(noisy, str(tmp_path / "s1"))
    p2 = cmd_synth(config_from_dict({**config_to_dict(noisy), "seed": 2}),
                   str(tmp_path / "s2"))
    d1, d2 = read_dataset(p1), read_dataset(p2)
    assert not np.array_equal(d1.meas_gamma0.values, d2.meas_gamma0.values)
    # the exact diagnostic traces are untouched by the noise seed
    assert np.array_equal(d1.diag_delta_int.values, d2.diag_delta_int.values)
