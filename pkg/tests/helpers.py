"""Small experiment configs written to a temporary directory."""

import json

import numpy as np

from sphereflow.harmonics import write_spectrum_csv


def write_config(directory, spectra, task=None, **sections):
    """Write ``spectrum_{i}.csv`` files and a config referencing them."""
    names = []
    for i, c in enumerate(spectra):
        write_spectrum_csv(np.asarray(c, dtype=float), directory / f"spectrum_{i}.csv")
        names.append(f"spectrum_{i}.csv")
    cfg = {"task": {"n_side": 4, "order": 1, "spectra": names, "sigma_n": 0.0,
                    "train_maps_per_class": 4, "test_maps_per_class": 2, **(task or {})}}
    cfg.update(quick_sections())
    cfg.update(sections)
    path = directory / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def quick_sections():
    return {"model": {"variant": "fcn", "K": 3, "channels": [4, 6],
                      "pools": ["avg4", "none"]},
            "training": {"epochs": 2, "batch": 16, "lr": 0.01}}
