import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from tenprox.errors import DimensionError, ParameterError
from tenprox.harness.experiment import (RECORD_FIELDS, ExperimentParams, ExperimentRecord,
                                        emit_records, masked_psnr, read_records,
                                        run_completion_experiment, split_algorithm)
from tenprox.harness.images import (bundled_synthetic, load_image, save_image,
                                    synthetic_image, to_bytes)
from tenprox.harness.masks import MaskSpec, make_mask
from tenprox.harness.plots import plot_records
from tenprox.metrics import psnr, relative_error
from tenprox.solvers import SolverConfig
from tenprox.tensor import frobenius_norm


# -- images -----------------------------------------------------------------

def test_png_fixture_bytes(tmp_path):
    path = tmp_path / "px.png"
    Image.fromarray(np.array([[0, 128], [255, 64]], dtype=np.uint8)).save(path)
    img = load_image(path)
    assert img.shape == (2, 2, 1)
    np.testing.assert_array_equal(img[:, :, 0], [[0.0, 128 / 255], [1.0, 64 / 255]])


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_save_load_round_trip_bytes(tmp_path, suffix):
    data = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    src = tmp_path / f"src{suffix}"
    Image.fromarray(data).save(src)
    dst = tmp_path / f"dst{suffix}"
    save_image(load_image(src), dst)
    np.testing.assert_array_equal(np.asarray(Image.open(dst)), data)


def test_white_image_loads_as_ones(tmp_path):
    path = tmp_path / "white.png"
    Image.new("RGB", (4, 3), (255, 255, 255)).save(path)
    img = load_image(path)
    assert img.shape == (3, 4, 3)
    assert np.all(img == 1.0)


def test_unreadable_image_names_path(tmp_path):
    bad = tmp_path / "nope.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(OSError, match="nope.png"):
        load_image(bad)
    with pytest.raises(OSError, match="missing.png"):
        load_image(tmp_path / "missing.png")


def test_save_rejects_bad_shape(tmp_path):
    with pytest.raises(DimensionError):
        save_image(np.zeros((3, 3)), tmp_path / "x.png")
    with pytest.raises(OSError, match="nodir"):
        save_image(np.zeros((3, 3, 3)), tmp_path / "nodir" / "x.png")


def test_bundled_synthetic_matches_generator():
    img = bundled_synthetic()
    assert img.shape == (64, 64, 3)
    np.testing.assert_array_equal(img, synthetic_image(64))
    np.testing.assert_array_equal(to_bytes(img).astype(float) / 255.0, img)


# -- masks ------------------------------------------------------------------

def test_mask_p_zero_observes_everything():
    assert make_mask((5, 5, 3), MaskSpec(p=0.0, seed=1)).all()


def test_mask_fraction_concentrates():
    mask = make_mask((250, 250, 3), MaskSpec(p=0.55, seed=3))
    assert abs((~mask[:, :, 0]).mean() - 0.55) < 0.02
    # whole pixels go missing together
    assert np.all(mask == mask[:, :, :1])


def test_mask_per_entry_mode():
    mask = make_mask((100, 100, 3), MaskSpec(p=0.3, seed=4, per_pixel=False))
    assert abs((~mask).mean() - 0.3) < 0.02
    assert not np.all(mask == mask[:, :, :1])


def test_mask_deterministic():
    spec = MaskSpec(p=0.5, seed=9)
    np.testing.assert_array_equal(make_mask((20, 20, 3), spec), make_mask((20, 20, 3), spec))


def test_pattern_mask(tmp_path):
    pat = np.full((4, 5, 3), 255, dtype=np.uint8)
    pat[1, 2] = 0
    path = tmp_path / "pat.png"
    Image.fromarray(pat).save(path)
    mask = make_mask((4, 5, 3), MaskSpec(kind="pattern", path=str(path)))
    assert not mask[1, 2].any()
    assert mask.sum() == 3 * 19
    with pytest.raises(DimensionError):
        make_mask((5, 5, 3), MaskSpec(kind="pattern", path=str(path)))


def test_mask_spec_validation():
    with pytest.raises(ParameterError):
        MaskSpec(p=1.0)
    with pytest.raises(ParameterError):
        MaskSpec(kind="pattern")
    with pytest.raises(ParameterError):
        MaskSpec(kind="stripes")


# -- metrics ----------------------------------------------------------------

def test_psnr_examples():
    ref = np.zeros((10, 10))
    assert psnr(ref + 0.1, ref) == pytest.approx(20.0, abs=1e-12)
    assert math.isinf(psnr(ref, ref))
    with pytest.raises(DimensionError):
        psnr(ref, np.zeros((10, 9)))


def test_psnr_matches_two_line_oracle():
    rng = np.random.default_rng(5)
    ref = rng.random((16, 16, 3))
    noisy = ref + 0.05 * rng.standard_normal(ref.shape)
    mse = frobenius_norm(noisy - ref) ** 2 / ref.size
    assert psnr(noisy, ref) == pytest.approx(10 * np.log10(1.0 / mse), abs=1e-10)


def test_relative_error_examples():
    rng = np.random.default_rng(6)
    ref = rng.standard_normal((4, 4))
    x = rng.standard_normal((4, 4))
    assert relative_error(ref, ref) == 0.0
    assert relative_error(2 * ref, ref) == pytest.approx(1.0)
    assert relative_error(x, ref) == pytest.approx(frobenius_norm(x - ref) / frobenius_norm(ref))
    with pytest.raises(ParameterError):
        relative_error(x, np.zeros_like(x))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1), st.floats(0.01, 1))
def test_psnr_and_relative_error_move_inversely(seed, s1, s2):
    rng = np.random.default_rng(seed)
    ref = rng.random((6, 6)) + 0.1
    x1 = ref + s1 * rng.standard_normal(ref.shape)
    x2 = ref + s2 * rng.standard_normal(ref.shape)
    r1, r2 = relative_error(x1, ref), relative_error(x2, ref)
    if r1 < r2:
        assert psnr(x1, ref) > psnr(x2, ref)
    elif r2 < r1:
        assert psnr(x2, ref) > psnr(x1, ref)


# -- experiments ------------------------------------------------------------

def test_split_algorithm():
    assert split_algorithm("tdpg-tet") == ("TDPG", "tet")
    assert split_algorithm("TISTA") == ("TISTA", None)
    with pytest.raises(ParameterError):
        split_algorithm("FISTA")


def test_full_observation_recovers_image():
    img = synthetic_image(16)
    params = ExperimentParams(mu=1e-4, omega="box")
    recs = run_completion_experiment(img, MaskSpec(p=0.0, seed=1), cfg=SolverConfig(),
                                     params=params)
    assert len(recs) == 6
    for r in recs:
        assert r.psnr_db > 40.0, r.algorithm


def test_records_deterministic():
    img = synthetic_image(16)
    spec = MaskSpec(p=0.5, seed=3)
    a = run_completion_experiment(img, spec)
    b = run_completion_experiment(img, spec)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.recovered, rb.recovered)
        assert {k: v for k, v in ra.row().items() if k != "wall_s"} == \
               {k: v for k, v in rb.row().items() if k != "wall_s"}
        assert ra.config == rb.config


def test_observed_entries_match_data_for_small_mu():
    img = synthetic_image(12)
    spec = MaskSpec(p=0.4, seed=2)
    mask = make_mask(img.shape, spec)
    recs = run_completion_experiment(img, spec, cfg=SolverConfig(tol=1e-6, max_outer=5000),
                                     params=ExperimentParams(mu=1e-7, omega="box",
                                                             max_cycles=5000))
    for r in recs:
        assert np.max(np.abs(r.recovered[mask] - img[mask])) < 1e-3, r.algorithm


def test_divergence_is_flagged_and_run_continues():
    img = synthetic_image(8)
    recs = run_completion_experiment(img, MaskSpec(p=0.3, seed=0), ["TISTA", "TDPG"],
                                     cfg=SolverConfig(alpha=50.0),
                                     params=ExperimentParams(omega="none"))
    assert [r.status for r in recs] == ["diverged", "diverged"]
    assert all(math.isnan(r.psnr_db) for r in recs)


def test_tdpg_tet_fewer_base_iterations_than_tdpg():
    img = bundled_synthetic()
    recs = run_completion_experiment(img, MaskSpec(p=0.5, seed=42), ["TDPG", "TDPG-TET"])
    plain, acc = recs
    assert acc.outer_iters < plain.outer_iters


def test_masked_psnr():
    img = synthetic_image(8)
    mask = np.ones(img.shape, dtype=bool)
    assert math.isinf(masked_psnr(img, mask))


# -- emission ---------------------------------------------------------------

def _records():
    return [
        ExperimentRecord("TISTA", 0.5, 21.25, 0.125, 0.5, 62, 0, 42, {"mu": 0.01}),
        ExperimentRecord("TDPG-HM", 0.5, math.inf, 0.0, 0.25, 48, 16, 42, {"mu": 0.05}, "ok"),
        ExperimentRecord("TDPG", 0.5, math.nan, math.nan, 0.1, 3, 0, 42, {}, "diverged"),
    ]


def test_emit_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "r.csv"
    emit_records([], path)
    assert path.read_text().strip() == ",".join(RECORD_FIELDS)


def test_emit_csv_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    recs = _records()
    emit_records(recs, path)
    lines = path.read_text().strip().splitlines()
    assert all(len(line.split(",")) == 8 for line in lines)
    back = read_records(path)
    for r, row in zip(recs, back):
        for k in RECORD_FIELDS:
            v = getattr(r, k)
            if isinstance(v, float) and math.isnan(v):
                assert math.isnan(row[k])
            else:
                assert row[k] == v


def test_emit_jsonl(tmp_path):
    path = tmp_path / "r.jsonl"
    emit_records(_records(), path, "jsonl")
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert list(rows[0])[:8] == list(RECORD_FIELDS)
    assert rows[0]["config"] == {"mu": 0.01}
    assert rows[2]["status"] == "diverged"
    assert read_records(path, "jsonl")[1]["psnr_db"] == math.inf


def test_emit_errors(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_records(_records(), tmp_path / "missing" / "r.csv")
    with pytest.raises(ParameterError):
        emit_records(_records(), tmp_path / "r.txt", "xml")


def test_plot_records_writes_figures(tmp_path):
    img = synthetic_image(12)
    recs = run_completion_experiment(img, MaskSpec(p=0.5, seed=1), ["TISTA", "TISTA-HM"])
    paths = plot_records(recs, tmp_path, "demo")
    assert len(paths) == 3
    for p in paths:
        assert p.exists() and p.stat().st_size > 0
