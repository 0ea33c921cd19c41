import json
import struct

import numpy as np
import pytest
from pydantic import ValidationError

from sphereflow.config import ConfigError, ExperimentConfig, load_config
from sphereflow.io import MapFile, read_maps, write_maps
from sphereflow.sampling import Ordering

from helpers import quick_sections, write_config


class TestMapFile:
    def test_round_trip(self, tmp_path, rng):
        data = rng.standard_normal((3, 2, 48))
        write_maps(tmp_path / "m.smap", MapFile(2, Ordering.NESTED, data))
        mf = read_maps(tmp_path / "m.smap")
        assert mf.n_side == 2 and mf.ordering is Ordering.NESTED
        assert np.array_equal(mf.data, data)

    def test_layout(self, tmp_path):
        data = np.arange(2 * 48, dtype=float).reshape(2, 48)
        path = tmp_path / "m.smap"
        write_maps(path, MapFile(2, "RING", data))
        raw = path.read_bytes()
        assert raw[:4] == b"SMAP"
        version, n = struct.unpack_from("<II", raw, 4)
        header = json.loads(raw[12:12 + n])
        assert version == 1
        assert header == {"n_side": 2, "ordering": "RING", "n_channels": 1, "n_maps": 2,
                          "dtype": "f64"}
        payload = np.frombuffer(raw[12 + n:], dtype="<f8")
        assert np.array_equal(payload, data.ravel())

    def test_inconsistent_shape(self):
        with pytest.raises(ValueError):
            MapFile(2, Ordering.NESTED, np.zeros((1, 47)))

    @pytest.mark.parametrize("damage", ["magic", "version", "truncate", "dtype"])
    def test_corrupt(self, tmp_path, damage):
        path = tmp_path / "m.smap"
        write_maps(path, MapFile(1, Ordering.NESTED, np.zeros((1, 12))))
        raw = bytearray(path.read_bytes())
        if damage == "magic":
            raw[:4] = b"PAMS"
        elif damage == "version":
            raw[4:8] = struct.pack("<I", 9)
        elif damage == "truncate":
            raw = raw[:-8]
        else:
            raw = raw.replace(b'"f64"', b'"f32"')
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError):
            read_maps(path)


class TestConfig:
    def test_defaults_and_relative_paths(self, tmp_path):
        path = write_config(tmp_path, [np.ones(5), 2 * np.ones(5)])
        cfg = load_config(path)
        assert cfg.model.K == 3 and cfg.graph.laplacian == "normalized"
        assert cfg.training.batch == 16 and cfg.baseline.bins == 32
        assert cfg.task.spectra[0] == str((tmp_path / "spectrum_0.csv").resolve())
        assert cfg.seed == 0
        assert load_config(path, seed=42).seed == 42

    def test_shipped_configs(self):
        from pathlib import Path
        root = Path(__file__).resolve().parents[1] / "configs"
        for name in ("experiment.json", "experiment_cnn.json"):
            cfg = load_config(root / name)
            assert cfg.task.n_side == 16 and cfg.task.order == 2

    @pytest.mark.parametrize("patch", [
        {"extra": 1},
        {"task": {"n_side": 12}},
        {"task": {"order": 8}},
        {"task": {"sigma_n": -1}},
        {"model": {"variant": "gru"}},
        {"model": {"channels": [4], "pools": ["avg4", "avg4"]}},
        {"model": {"channels": [4, 4, 4], "pools": ["avg4", "avg4", "max4"]}},
        {"graph": {"sigma": -0.1}},
        {"training": {"lr": 0}},
        {"seed": -3},
    ])
    def test_schema_violations(self, tmp_path, patch):
        # n_side 4, order 1: patches of 16 pixels allow at most 2 pools
        path = write_config(tmp_path, [np.ones(5), np.ones(5)])
        raw = json.loads(path.read_text())
        for k, v in patch.items():
            if isinstance(v, dict) and isinstance(raw.get(k), dict):
                raw[k].update(v)
            else:
                raw[k] = v
        path.write_text(json.dumps(raw))
        with pytest.raises(ValidationError):
            load_config(path)

    @pytest.mark.parametrize("spectra", [
        [np.ones(5), np.ones(6)],
        [np.ones(5), -np.ones(5)],
        [np.ones(9), np.ones(9)],  # (8 + 1)^2 coefficients exceed 48 pixels
    ])
    def test_spectrum_problems(self, tmp_path, spectra):
        path = write_config(tmp_path, spectra, task={"n_side": 2})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_spectrum(self, tmp_path):
        path = write_config(tmp_path, [np.ones(3), np.ones(3)])
        (tmp_path / "spectrum_1.csv").unlink()
        with pytest.raises(ConfigError):
            load_config(path)

    def test_one_class_rejected(self, tmp_path):
        path = write_config(tmp_path, [np.ones(3)])
        with pytest.raises(ValidationError):
            load_config(path)

    def test_frozen(self, tmp_path):
        cfg = load_config(write_config(tmp_path, [np.ones(3), np.ones(3)], **quick_sections()))
        with pytest.raises(ValidationError):
            cfg.seed = 3
        assert ExperimentConfig.model_validate(cfg.model_dump()) == cfg
