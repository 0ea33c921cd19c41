"""Synthetic two-spectrum classification task on sphere patches.

Each class is a Gaussian random field with its own angular power spectrum.
Full-sphere maps are synthesized from harmonic coefficients, white noise is
added, and every map is split into the ``12 o^2`` NESTED-contiguous patches
of order ``o``.  The optional rotated test split applies a random z-rotation
to each test map in the harmonic domain (exact for band-limited fields)
before adding the same noise realization.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.linear_model import LogisticRegression

from .exceptions import NumericalRankError
from .graph import LaplacianKind
from .harmonics import (eval_harmonics, n_alm, psd, read_spectrum_csv, rotate_z, sht_analysis,
                        sht_synthesis, write_spectrum_csv)
from .io import MapFile, read_maps, write_maps
from .network import (GraphPyramid, Model, ModelSpec, TrainConfig, accuracy, default_spec,
                      predict, train)
from .sampling import Ordering, extract_patch, healpix_new

__all__ = [
    "power_law_spectrum",
    "write_default_spectra",
    "Dataset",
    "generate_dataset",
    "write_dataset",
    "read_dataset",
    "patchify",
    "patch_band",
    "psd_features",
    "histogram_features",
    "run_baseline",
    "model_spec_for",
    "pyramid_for",
    "run_training",
    "evaluate",
    "dump_json",
]

SPLITS = ("train", "test", "test_rotated")


def power_law_spectrum(ell_max, slope, variance=1.0):
    """``C_l ~ (l + 1)^-slope`` scaled to the given pixel variance.

    The pixel variance of a field is ``sum_l (2l + 1) C_l / (4 pi)``.
    """
    ell = np.arange(ell_max + 1)
    c = (ell + 1.0) ** -float(slope)
    return c * variance * 4 * np.pi / np.sum((2 * ell + 1) * c)


def write_default_spectra(directory, ell_max=32, slopes=(1.0, 2.0)):
    """Write one ``ell,C`` CSV per slope; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, s in enumerate(slopes):
        p = directory / f"spectrum_{i}.csv"
        write_spectrum_csv(power_law_spectrum(ell_max, s), p)
        paths.append(p)
    return paths


@dataclass(eq=False)
class Dataset:
    """Full-sphere maps per split, NESTED ordering, one channel."""

    n_side: int
    maps: dict  # split -> (n_maps, n_pix)
    labels: dict  # split -> (n_maps,)
    angles: dict  # split -> (n_maps,)

    def split(self, name):
        return self.maps[name], self.labels[name]


def _load_spectra(paths, n_pix):
    spectra = [read_spectrum_csv(p) for p in paths]
    n = {len(c) for c in spectra}
    if len(n) != 1:
        raise ValueError(f"class spectra have different lengths {sorted(n)}")
    ell_max = n.pop() - 1
    if n_alm(ell_max) > n_pix:
        raise ValueError(f"spectra up to ell={ell_max} cannot be synthesized on {n_pix} pixels")
    return spectra, ell_max


def generate_dataset(cfg, seed=None):
    """Synthesize train / test (and rotated test) maps for an ExperimentConfig.

    Every map draws from its own stream spawned from ``seed``: harmonic
    coefficients, then noise, then the rotation angle.
    """
    t = cfg.task
    seed = cfg.seed if seed is None else seed
    s = healpix_new(t.n_side)
    spectra, ell_max = _load_spectra(t.spectra, s.n_pix)
    hb = eval_harmonics(s, ell_max)
    root = np.random.SeedSequence(seed)
    split_seqs = dict(zip(("train", "test"), root.spawn(2)))
    maps, labels, angles = {}, {}, {}
    for split, per_class in (("train", t.train_maps_per_class), ("test", t.test_maps_per_class)):
        n_classes = len(spectra)
        lab = np.tile(np.arange(n_classes), per_class)
        seqs = split_seqs[split].spawn(len(lab))
        alm = np.empty((hb.n_coeffs, len(lab)))
        noise = np.empty((len(lab), s.n_pix))
        ang = np.empty(len(lab))
        for i, (c, q) in enumerate(zip(lab, seqs)):
            rng = np.random.default_rng(q)
            alm[:, i] = rng.standard_normal(hb.n_coeffs) * np.sqrt(spectra[c][hb.degrees])
            noise[i] = t.sigma_n * rng.standard_normal(s.n_pix)
            ang[i] = rng.uniform(0.0, 2 * np.pi)
        maps[split] = sht_synthesis(hb, alm).T + noise
        labels[split] = lab
        angles[split] = np.zeros(len(lab))
        if split == "test" and t.rotate_test:
            rot = np.stack([rotate_z(alm[:, i], ang[i], hb.degrees, hb.orders)
                            for i in range(len(lab))], axis=1)
            maps["test_rotated"] = sht_synthesis(hb, rot).T + noise
            labels["test_rotated"] = lab.copy()
            angles["test_rotated"] = ang
    return Dataset(t.n_side, maps, labels, angles)


def write_dataset(ds, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for split in SPLITS:
        if split not in ds.maps:
            continue
        write_maps(out / f"{split}.smap", MapFile(ds.n_side, Ordering.NESTED, ds.maps[split]))
        rows += [(split, i, int(l), f"{a:.17g}")
                 for i, (l, a) in enumerate(zip(ds.labels[split], ds.angles[split]))]
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "index", "label", "angle"])
        w.writerows(rows)


def read_dataset(directory):
    directory = Path(directory)
    maps, labels, angles, n_side = {}, {}, {}, None
    with open(directory / "labels.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for split in SPLITS:
        p = directory / f"{split}.smap"
        if not p.exists():
            continue
        mf = read_maps(p)
        if mf.ordering is not Ordering.NESTED or mf.n_channels != 1:
            raise ValueError(f"{p}: expected single-channel NESTED maps")
        n_side = mf.n_side
        r = [row for row in rows if row["split"] == split]
        if len(r) != mf.n_maps:
            raise ValueError(f"{p}: {mf.n_maps} maps but {len(r)} label rows")
        maps[split] = mf.data[:, 0]
        labels[split] = np.array([int(row["label"]) for row in r])
        angles[split] = np.array([float(row["angle"]) for row in r])
    if "train" not in maps:
        raise FileNotFoundError(f"{directory}: no train.smap")
    return Dataset(n_side, maps, labels, angles)


def patchify(maps, labels, order):
    """Split NESTED maps ``(n_maps, n_pix)`` into order-``o`` patches.

    Returns ``(x, y, keys, map_index)`` with ``x`` of shape
    ``(n_maps * 12 o^2, n_pix / (12 o^2))`` and ``keys`` the base index.
    """
    maps = np.asarray(maps)
    n_patches = 12 * order * order
    if maps.shape[1] % n_patches:
        raise ValueError(f"{maps.shape[1]} pixels cannot be split into {n_patches} patches")
    x = maps.reshape(maps.shape[0] * n_patches, -1)
    keys = np.tile(np.arange(n_patches), maps.shape[0])
    idx = np.repeat(np.arange(maps.shape[0]), n_patches)
    return x, np.asarray(labels)[idx], keys, idx


# --------------------------------------------------------------------------
# Baselines

def patch_band(n_side, order, max_condition=1e6):
    """Largest ``ell_max`` whose sampled harmonic Gram matrix has condition
    below ``max_condition`` on every order-``o`` patch, with the patch bases."""
    s = healpix_new(n_side)
    patches = [extract_patch(s, order, b) for b in range(12 * order * order)]
    n = patches[0].n_pix
    for ell_max in range(int(np.sqrt(n)) - 1, -1, -1):
        try:
            bases = [eval_harmonics(p, ell_max) for p in patches]
        except NumericalRankError:
            continue
        if max(b.condition_number ** 2 for b in bases) < max_condition:
            return ell_max, bases
    raise ValueError("no harmonic band is well conditioned on these patches")


def psd_features(x, keys, bases):
    """``C_l`` of each patch from a least-squares SHT on the patch support."""
    out = np.empty((len(x), bases[0].ell_max + 1))
    for k in np.unique(keys):
        sel = keys == k
        b = bases[k]
        out[sel] = psd(sht_analysis(b, x[sel].T), b.degrees).T
    return out


def histogram_features(x, edges):
    """Per-patch pixel histogram (fractions), values outside the range
    counted in the edge bins."""
    xc = np.clip(x, edges[0], edges[-1])
    idx = np.clip(np.searchsorted(edges, xc, side="right") - 1, 0, len(edges) - 2)
    counts = np.zeros((len(x), len(edges) - 1))
    np.add.at(counts, (np.repeat(np.arange(len(x)), x.shape[1]), idx.ravel()), 1.0)
    return counts / x.shape[1]


def _fit_logistic(f_train, y_train, l2):
    mu = f_train.mean(axis=0)
    sd = f_train.std(axis=0)
    if np.all(sd == 0):
        raise ValueError("degenerate features: every training sample is identical")
    sd[sd == 0] = 1.0
    clf = LogisticRegression(C=1.0 / l2, max_iter=10000, tol=1e-10)
    clf.fit((f_train - mu) / sd, y_train)
    return lambda f: clf.predict((f - mu) / sd)


def run_baseline(kind, cfg, ds):
    """Train an L2 logistic regression on PSD or histogram patch features.

    Returns a report with accuracy on every available test split.
    """
    t, b = cfg.task, cfg.baseline
    splits = {name: patchify(*ds.split(name), t.order) for name in ds.maps}
    x_tr, y_tr, k_tr, _ = splits["train"]
    report = {"features": kind, "classifier": "logistic regression (L2)", "l2": b.l2,
              "order": t.order, "n_train": int(len(x_tr))}
    if kind == "psd":
        ell_max, bases = patch_band(ds.n_side, t.order, b.max_gram_condition)
        feat = lambda x, k: np.log(np.maximum(psd_features(x, k, bases), 1e-300))
        report["ell_max"] = ell_max
    elif kind == "hist":
        edges = np.linspace(x_tr.min(), x_tr.max(), b.bins + 1)
        feat = lambda x, k: histogram_features(x, edges)
        report["bins"] = b.bins
        report["range"] = [float(edges[0]), float(edges[-1])]
    else:
        raise ValueError(f"unknown baseline features {kind!r}")
    clf = _fit_logistic(feat(x_tr, k_tr), y_tr, b.l2)
    report["train_accuracy"] = float(np.mean(clf(feat(x_tr, k_tr)) == y_tr))
    for name, (x, y, k, _) in splits.items():
        if name != "train":
            report[f"{name}_accuracy"] = float(np.mean(clf(feat(x, k)) == y))
    return report


# --------------------------------------------------------------------------
# Networks

def model_spec_for(cfg):
    t, m = cfg.task, cfg.model
    n_pix = 12 * t.n_side ** 2 // (12 * t.order ** 2)
    return default_spec(m.variant, t.n_side, n_pix if m.variant == "cnn" else None,
                        len(t.spectra), m.K, tuple(m.channels), list(m.pools), tuple(m.hidden))


def pyramid_for(cfg, spec):
    g = cfg.graph
    return GraphPyramid.for_patches(cfg.task.n_side, cfg.task.order, spec.n_levels,
                                    g.neighbors, g.sigma, LaplacianKind(g.laplacian))


def _val_split(n_maps, labels, fraction):
    """Hold out the last ``fraction`` of the maps of each class."""
    val = np.zeros(n_maps, dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_val = int(round(fraction * len(idx)))
        if n_val:
            val[idx[-n_val:]] = True
    return val


def run_training(cfg, ds, seed=None, pyramid=None):
    """Train the configured variant on the train split.

    Returns ``(model, optimizer, metrics)``; metrics include the per-epoch
    history and the accuracies on the test splits.
    """
    seed = cfg.seed if seed is None else seed
    spec = model_spec_for(cfg)
    pyramid = pyramid or pyramid_for(cfg, spec)
    x, y, keys, midx = patchify(*ds.split("train"), cfg.task.order)
    val = _val_split(len(ds.labels["train"]), ds.labels["train"], cfg.task.val_fraction)[midx]
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    model = Model(spec, seed=init_seq)
    tc = TrainConfig(cfg.training.lr, cfg.training.batch, cfg.training.epochs, shuffle_seq)
    opt, history = train(model, x[~val], y[~val], keys[~val], pyramid, tc,
                         x[val], y[val], keys[val])
    metrics = {"variant": spec.head, "seed": seed, "n_params": model.n_params,
               "n_train": int((~val).sum()), "n_val": int(val.sum()), "history": history}
    metrics.update(evaluate(model, cfg, ds, pyramid))
    return model, opt, metrics


def evaluate(model, cfg, ds, pyramid=None):
    pyramid = pyramid or pyramid_for(cfg, model.spec)
    out = {}
    for name in ds.maps:
        if name == "train":
            continue
        x, y, keys, _ = patchify(*ds.split(name), cfg.task.order)
        out[f"{name}_accuracy"] = accuracy(predict(model, x, keys, pyramid), y)
    return out


def dump_json(obj, path):
    """Deterministic JSON (sorted keys, repr floats, trailing newline)."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
