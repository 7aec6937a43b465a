"""Images, datasets, model checkpoints and reports on disk."""

import math

import numpy as np
import pytest
from PIL import Image

from ghostkit.acquisition import AcquisitionSet, BucketVector, generate_masks
from ghostkit.algorithms import Method
from ghostkit.algorithms.training import TrainTrace
from ghostkit.errors import ContainerError
from ghostkit.io import (
    RunManifest,
    load_acquisition,
    load_model,
    load_phantom_image,
    read_csv,
    read_json,
    read_pgm,
    save_acquisition,
    save_model,
    to_jsonable,
    write_container,
    write_csv,
    write_json,
    write_pgm,
    write_png,
)
from ghostkit.io.dataset import MASKS_FILE
from ghostkit.io.reports import dumps, trace_rows
from ghostkit.models import ModelConfig, build_model
from ghostkit.solvers import CglsConfig


class TestPgm:
    def test_scaled_round_trip(self, tmp_path, small_phantom):
        image = small_phantom * 3.0 - 0.5
        scale = write_pgm(tmp_path / "x.pgm", image)
        assert (scale.low, scale.high) == (-0.5, 2.5)
        restored = read_pgm(tmp_path / "x.pgm", scale)
        np.testing.assert_allclose(restored, image, atol=scale.step)
        unscaled = read_pgm(tmp_path / "x.pgm")
        assert unscaled.min() == 0.0 and unscaled.max() == 1.0

    def test_header(self, tmp_path):
        write_pgm(tmp_path / "x.pgm", np.zeros((3, 4)))
        data = (tmp_path / "x.pgm").read_bytes()
        assert data.startswith(b"P5\n4 3\n65535\n")
        assert len(data) == len(b"P5\n4 3\n65535\n") + 2 * 12

    def test_flat_image(self, tmp_path):
        scale = write_pgm(tmp_path / "flat.pgm", np.full((2, 2), 0.7))
        assert scale.step == 0.0
        np.testing.assert_allclose(read_pgm(tmp_path / "flat.pgm", scale), 0.7)

    def test_eight_bit_with_comment(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))
        np.testing.assert_allclose(read_pgm(path), [[0.0, 1.0]])

    def test_matches_a_pillow_written_file(self, tmp_path):
        levels = np.array([[0, 1000, 65535], [7, 8, 9]], dtype=np.uint16)
        Image.fromarray(levels).save(tmp_path / "p.pgm")
        np.testing.assert_allclose(read_pgm(tmp_path / "p.pgm"), levels / 65535.0)
        write_pgm(tmp_path / "q.pgm", levels.astype(np.float64))
        with Image.open(tmp_path / "q.pgm") as handle:
            assert handle.format == "PPM"
            np.testing.assert_array_equal(np.asarray(handle), levels)

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.pgm"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path, format="PPM")
        with pytest.raises(ContainerError, match="grayscale PGM"):
            read_pgm(path)
        Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(path, format="PNG")
        with pytest.raises(ContainerError, match="grayscale PGM"):
            read_pgm(path)
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(ContainerError, match="truncated"):
            read_pgm(path)
        path.write_bytes(b"P5\n4")
        with pytest.raises(ContainerError):
            read_pgm(path)


class TestPng:
    def test_preview(self, tmp_path, small_phantom):
        write_png(tmp_path / "x.png", small_phantom)
        with Image.open(tmp_path / "x.png") as handle:
            assert handle.mode == "L"
            assert handle.size == (12, 12)
            levels = np.asarray(handle)
        assert levels.min() == 0 and levels.max() == 255

    def test_phantom_from_image(self, tmp_path):
        pixels = np.array([[10, 20], [30, 110]], dtype=np.uint8)
        Image.fromarray(pixels).save(tmp_path / "p.png")
        np.testing.assert_allclose(load_phantom_image(tmp_path / "p.png"), [[0.0, 0.1], [0.2, 1.0]])

    def test_phantom_from_pgm(self, tmp_path, small_phantom):
        write_pgm(tmp_path / "p.pgm", small_phantom)
        loaded = load_phantom_image(tmp_path / "p.pgm")
        np.testing.assert_allclose(loaded, small_phantom, atol=1e-4)

    def test_unreadable_image(self, tmp_path):
        (tmp_path / "p.png").write_bytes(b"not an image")
        with pytest.raises(ContainerError):
            load_phantom_image(tmp_path / "p.png")


class TestDataset:
    def test_round_trip(self, tmp_path, small_acquisition):
        small_acquisition.metadata.update({"photons": 200.0, "seed": 5})
        written = save_acquisition(tmp_path, small_acquisition)
        assert len(written) == 4
        loaded = load_acquisition(tmp_path)
        np.testing.assert_array_equal(loaded.masks.masks, small_acquisition.masks.masks)
        np.testing.assert_array_equal(loaded.y, small_acquisition.y)
        np.testing.assert_array_equal(loaded.buckets.clean, small_acquisition.buckets.clean)
        np.testing.assert_array_equal(loaded.phantom, small_acquisition.phantom)
        assert loaded.metadata == {"photons": 200.0, "seed": 5}

    def test_optional_files_are_skipped(self, tmp_path):
        masks = generate_masks(4, 3, 3, seed=0)
        written = save_acquisition(tmp_path, AcquisitionSet(masks, BucketVector(np.ones(4))))
        assert len(written) == 2
        loaded = load_acquisition(tmp_path)
        assert loaded.phantom is None
        assert loaded.buckets.clean is None

    def test_missing_files(self, tmp_path):
        with pytest.raises(ContainerError, match="missing"):
            load_acquisition(tmp_path)

    def test_inconsistent_files(self, tmp_path):
        masks = generate_masks(4, 3, 3, seed=0)
        save_acquisition(tmp_path, AcquisitionSet(masks, BucketVector(np.ones(4))))
        write_container(tmp_path / MASKS_FILE, generate_masks(5, 3, 3, seed=0).masks)
        with pytest.raises(ContainerError, match="inconsistent"):
            load_acquisition(tmp_path)


class TestModelCheckpoint:
    def test_unet_round_trip(self, tmp_path):
        model = build_model(ModelConfig(features=2, levels=2, seed=7))
        loaded = load_model(save_model(tmp_path / "m.gitk", model))
        assert loaded.config == model.config
        assert loaded.names == model.names
        for a, b in zip(model.parameters, loaded.parameters):
            np.testing.assert_array_equal(a, b)
        image = np.linspace(0, 1, 64).reshape(8, 8)
        np.testing.assert_allclose(loaded(image[None, None]), model(image[None, None]))

    def test_inr_buffers(self, tmp_path):
        model = build_model(ModelConfig(kind="inr", width=4, embeddings=3, hidden_layers=1))
        loaded = load_model(save_model(tmp_path / "inr.gitk", model))
        assert set(loaded.buffers) == set(model.buffers)
        for name in model.buffers:
            np.testing.assert_array_equal(loaded.buffers[name], model.buffers[name])

    def test_not_a_model(self, tmp_path):
        write_container(tmp_path / "x.gitk", np.zeros(3), {"content": "masks"})
        with pytest.raises(ContainerError, match="model"):
            load_model(tmp_path / "x.gitk")

    def test_payload_size_mismatch(self, tmp_path):
        model = build_model(ModelConfig(features=2, levels=1))
        save_model(tmp_path / "m.gitk", model)
        from ghostkit.io import read_container

        flat, meta = read_container(tmp_path / "m.gitk")
        write_container(tmp_path / "m.gitk", np.concatenate([flat, [0.0]]), meta)
        with pytest.raises(ContainerError, match="unused"):
            load_model(tmp_path / "m.gitk")


class TestReports:
    def test_to_jsonable(self, tmp_path):
        value = {
            "method": Method.N2G,
            "cgls": CglsConfig(max_iters=5),
            "values": np.array([1.0, np.inf]),
            "count": np.int64(3),
            "flag": np.bool_(True),
            "bad": float("nan"),
            "low": -math.inf,
            "path": tmp_path,
        }
        assert to_jsonable(value) == {
            "method": "n2g",
            "cgls": {"max_iters": 5, "tol": 1e-8},
            "values": [1.0, "inf"],
            "count": 3,
            "flag": True,
            "bad": "nan",
            "low": "-inf",
            "path": str(tmp_path),
        }

    def test_json_is_deterministic(self, tmp_path):
        assert dumps({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'
        path = write_json(tmp_path / "r.json", {"x": 1.5})
        assert read_json(path) == {"x": 1.5}

    def test_read_json_rejects_non_objects(self, tmp_path):
        (tmp_path / "a.json").write_text("[1]")
        with pytest.raises(ContainerError):
            read_json(tmp_path / "a.json")
        (tmp_path / "b.json").write_text("{")
        with pytest.raises(ContainerError):
            read_json(tmp_path / "b.json")

    def test_csv(self, tmp_path):
        rows = [{"lam": 0.1, "psnr": math.inf}, {"lam": 1.0, "psnr": 12.5}]
        write_csv(tmp_path / "t.csv", rows)
        assert read_csv(tmp_path / "t.csv") == [{"lam": "0.1", "psnr": "inf"}, {"lam": "1.0", "psnr": "12.5"}]
        write_csv(tmp_path / "empty.csv", [], fieldnames=["a"])
        assert (tmp_path / "empty.csv").read_text() == "a\n"

    def test_trace_rows(self):
        trace = TrainTrace(train_loss=[3.0, 2.0], data_loss=[2.5, 1.5], cv_loss=[1.0, 0.5])
        assert trace_rows(trace)[1] == {"epoch": 1, "train_loss": 2.0, "data_loss": 1.5, "cv_loss": 0.5}

    def test_manifest(self, tmp_path):
        (tmp_path / "out.txt").write_text("hello")
        manifest = RunManifest.start("generate", {"size": 8})
        manifest.record([tmp_path / "out.txt"], tmp_path)
        manifest.write(tmp_path)
        loaded = RunManifest.read(tmp_path)
        assert loaded.command == "generate"
        assert loaded.parameters == {"size": 8}
        assert loaded.version == manifest.version != ""
        assert loaded.outputs == {
            "out.txt": "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        }

    def test_manifest_missing_keys(self, tmp_path):
        write_json(tmp_path / "manifest.json", {"command": "sweep"})
        with pytest.raises(ContainerError, match="parameters"):
            RunManifest.read(tmp_path)
