"""Spherical graph CNNs: Chebyshev conv layers, hierarchical NESTED pooling,
FCN (global average) and CNN (flatten + dense) heads, softmax cross-entropy,
Adam and a deterministic training loop.

Signals inside the network are 2-D arrays ``(B * n, F)``: the ``B`` samples
of a batch are stacked sample-major along the vertex axis and filtered with a
block-diagonal scaled Laplacian, so one sparse product serves the whole
batch.  Because every sample occupies a NESTED-contiguous block whose size is
divisible by 4, pooling is a reshape.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .chebyshev import ChebFilterBank, ScaledLaplacian, cheb_apply, cheb_basis, cheb_grad, \
    scale_laplacian
from .exceptions import OrderingError, ShapeError, TrainingError
from .graph import LaplacianKind, build_healpix_graph
from .sampling import Ordering, extract_patch, healpix_new

__all__ = [
    "Activation",
    "PoolMode",
    "ConvSpec",
    "ModelSpec",
    "default_spec",
    "pool4",
    "pool4_grad",
    "global_avg_pool",
    "softmax_cross_entropy",
    "GraphPyramid",
    "Model",
    "Adam",
    "TrainConfig",
    "train",
    "predict",
    "accuracy",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"SPHF"
CHECKPOINT_VERSION = 1


class Activation(str, Enum):
    RELU = "relu"
    NONE = "none"


class PoolMode(str, Enum):
    NONE = "none"
    AVG4 = "avg4"
    MAX4 = "max4"


@dataclass(frozen=True)
class ConvSpec:
    K: int
    F_out: int
    activation: Activation = Activation.RELU
    pool: PoolMode = PoolMode.AVG4

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "pool", PoolMode(self.pool))
        if self.K < 1 or self.F_out < 1:
            raise ValueError("conv layers need K >= 1 and F_out >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    ``head="fcn"``: global average pooling then one dense layer to the
    classes.  ``head="cnn"``: flatten then ``hidden`` ReLU dense layers and
    a final dense layer; needs ``n_pix`` (input vertices per sample).
    ``n_side`` bounds the number of pooling layers by ``log2(n_side)``.
    """

    layers: tuple
    n_classes: int = 2
    in_channels: int = 1
    head: str = "fcn"
    hidden: tuple = ()
    n_side: int | None = None
    n_pix: int | None = None

    def __post_init__(self):
        layers = tuple(l if isinstance(l, ConvSpec) else ConvSpec(**l) for l in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not layers:
            raise ValueError("a model needs at least one conv layer")
        if self.head not in ("fcn", "cnn"):
            raise ValueError(f"head must be 'fcn' or 'cnn', got {self.head!r}")
        if self.n_classes < 2 or self.in_channels < 1:
            raise ValueError("need n_classes >= 2 and in_channels >= 1")
        if self.n_side is not None and self.n_pools > int(np.log2(self.n_side)):
            raise ValueError(f"{self.n_pools} pooling layers exceed log2(n_side={self.n_side})")
        if self.head == "cnn":
            if self.n_pix is None:
                raise ValueError("the cnn head needs n_pix")
            if self.n_pix % (4 ** self.n_pools):
                raise ValueError(f"n_pix={self.n_pix} is not divisible by 4^{self.n_pools}")

    @property
    def n_pools(self):
        return sum(l.pool is not PoolMode.NONE for l in self.layers)

    @property
    def n_levels(self):
        """Graph resolutions visited by conv layers."""
        pools = [l.pool is not PoolMode.NONE for l in self.layers]
        return 1 + sum(pools[:-1])

    def to_dict(self):
        d = asdict(self)
        d["layers"] = [{"K": l.K, "F_out": l.F_out, "activation": l.activation.value,
                        "pool": l.pool.value} for l in self.layers]
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["layers"] = tuple(ConvSpec(**l) for l in d["layers"])
        d["hidden"] = tuple(d.get("hidden", ()))
        return cls(**d)


def default_spec(head="fcn", n_side=None, n_pix=None, n_classes=2, K=5,
                 channels=(16, 32, 64), pools=None, hidden=()):
    """Three ReLU conv layers (K=5, 16/32/64 channels) with AVG4 pooling."""
    pools = pools or [PoolMode.AVG4] * len(channels)
    layers = tuple(ConvSpec(K, c, Activation.RELU, p) for c, p in zip(channels, pools))
    return ModelSpec(layers, n_classes, 1, head, tuple(hidden), n_side, n_pix)


# --------------------------------------------------------------------------
# Layers

def pool4(x, mode=PoolMode.AVG4, ordering=Ordering.NESTED):
    """Pool groups of 4 NESTED siblings.

    Returns ``(y, argmax)``; ``argmax`` is ``None`` for AVG. Ties in MAX go to
    the first child.
    """
    if Ordering(ordering) is not Ordering.NESTED:
        raise OrderingError("hierarchical pooling needs NESTED ordering")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] % 4:
        raise ShapeError(f"cannot pool {x.shape[0]} vertices by 4")
    g = x.reshape((x.shape[0] // 4, 4) + x.shape[1:])
    mode = PoolMode(mode)
    if mode is PoolMode.AVG4:
        return g.mean(axis=1), None
    if mode is PoolMode.MAX4:
        idx = np.argmax(g, axis=1)
        return np.take_along_axis(g, idx[:, None], axis=1)[:, 0], idx
    raise ValueError("pool4 needs AVG4 or MAX4")


def pool4_grad(dy, mode, argmax=None):
    """Scatter the pooled gradient back to the 4 children."""
    dy = np.asarray(dy, dtype=np.float64)
    if PoolMode(mode) is PoolMode.AVG4:
        dx = np.repeat(dy[:, None] / 4.0, 4, axis=1)
    else:
        dx = np.zeros((dy.shape[0], 4) + dy.shape[1:])
        np.put_along_axis(dx, argmax[:, None], dy[:, None], axis=1)
    return dx.reshape((dy.shape[0] * 4,) + dy.shape[1:])


def global_avg_pool(x, n_samples=1):
    """Per-channel mean over the vertices of each of ``n_samples`` stacked samples."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise ShapeError("cannot average an empty signal")
    if x.shape[0] % n_samples:
        raise ShapeError("vertex count is not a multiple of the sample count")
    return x.reshape((n_samples, -1) + x.shape[1:]).mean(axis=1)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient with respect to ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    b, c = logits.shape
    if labels.shape != (b,) or labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise ValueError(f"labels must be {b} integers in [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(b), labels]))
    p = np.exp(z - lse[:, None])
    p[np.arange(b), labels] -= 1.0
    return loss, p / b


# --------------------------------------------------------------------------
# Graphs per resolution

class GraphPyramid:
    """Scaled Laplacians per pooling level for one or more sample supports.

    A key identifies a support: ``0`` for the full sphere, or the base index
    of an order-``o`` patch.  :meth:`ops` stacks the supports of a batch
    block-diagonally.
    """

    def __init__(self, levels):
        # levels[key] -> [ScaledLaplacian per level]
        self.levels = levels

    @classmethod
    def for_sphere(cls, n_side, n_levels, neighbors="healpix8", sigma="auto",
                   kind=LaplacianKind.NORMALIZED):
        ops, s = [], healpix_new(n_side)
        for _ in range(n_levels):
            ops.append(scale_laplacian(build_healpix_graph(s, neighbors, sigma, kind)))
            if len(ops) < n_levels:
                s = s.coarsen()
        return cls({0: ops})

    @classmethod
    def for_patches(cls, n_side, order, n_levels, neighbors="healpix8", sigma="auto",
                    kind=LaplacianKind.NORMALIZED, keys=None):
        s = healpix_new(n_side)
        full = [s]
        for _ in range(n_levels - 1):
            full.append(full[-1].coarsen())
        graphs = [build_healpix_graph(f, neighbors, sigma, kind) for f in full]
        keys = range(12 * order * order) if keys is None else keys
        levels = {}
        for b in keys:
            p = extract_patch(s, order, b)
            ops = []
            for lvl, g in enumerate(graphs):
                sub = g.subgraph(p.pixel_indices)
                ops.append(scale_laplacian(sub))
                if lvl < n_levels - 1:
                    p = p.coarsen()
            levels[int(b)] = ops
        return cls(levels)

    @property
    def n_levels(self):
        return len(next(iter(self.levels.values())))

    def ops(self, keys):
        keys = [int(k) for k in np.atleast_1d(keys)]
        if len(set(keys)) == 1 and len(keys) == 1:
            return list(self.levels[keys[0]])
        return [ScaledLaplacian.block_diag([self.levels[k][lvl] for k in keys])
                for lvl in range(self.n_levels)]


# --------------------------------------------------------------------------
# Model

class Model:
    """Parameters plus forward/backward passes for a :class:`ModelSpec`.

    Parameters are kept in declaration order: ``theta, bias`` per conv layer,
    then ``W, b`` per dense layer.
    """

    def __init__(self, spec, params=None, seed=0):
        self.spec = spec
        self.names, shapes = self._layout()
        if params is None:
            params = self._init(shapes, np.random.default_rng(seed))
        params = [np.asarray(p, dtype=np.float64) for p in params]
        if [p.shape for p in params] != shapes:
            raise ShapeError("parameter shapes do not match the model spec")
        self.params = params

    def _dense_dims(self):
        s = self.spec
        f_last = s.layers[-1].F_out
        d_in = f_last if s.head == "fcn" else f_last * s.n_pix // 4 ** s.n_pools
        dims = [d_in] + (list(s.hidden) if s.head == "cnn" else []) + [s.n_classes]
        return list(zip(dims[:-1], dims[1:]))

    def _layout(self):
        names, shapes, f_in = [], [], self.spec.in_channels
        for i, l in enumerate(self.spec.layers):
            names += [f"conv{i}.theta", f"conv{i}.bias"]
            shapes += [(l.K, f_in, l.F_out), (l.F_out,)]
            f_in = l.F_out
        for j, (a, b) in enumerate(self._dense_dims()):
            names += [f"dense{j}.W", f"dense{j}.b"]
            shapes += [(a, b), (b,)]
        return names, shapes

    def _init(self, shapes, rng):
        out = []
        for name, shape in zip(self.names, shapes):
            if name.endswith("theta"):
                K, f_in, _ = shape
                out.append(rng.normal(0.0, np.sqrt(1.0 / (K * f_in)), size=shape))
            elif name.endswith(".W"):
                out.append(rng.normal(0.0, np.sqrt(1.0 / shape[0]), size=shape))
            else:
                out.append(np.zeros(shape))
        return out

    @property
    def n_params(self):
        return int(sum(p.size for p in self.params))

    def forward(self, x, ops, return_cache=False):
        """Logits for a batch ``x`` of shape ``(B, n, F_in)`` (or ``(B, n)``).

        ``ops`` lists one scaled Laplacian per level (see :class:`GraphPyramid`)
        matching the stacked batch.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[..., None]
        if x.ndim != 3 or x.shape[2] != self.spec.in_channels:
            raise ShapeError(f"expected a batch (B, n, {self.spec.in_channels}), got {x.shape}")
        B, n = x.shape[:2]
        if self.spec.head == "cnn" and n != self.spec.n_pix:
            raise ShapeError(f"cnn head built for {self.spec.n_pix} vertices, got {n}")
        h = x.reshape(B * n, -1)
        cache, level = [], 0
        for i, l in enumerate(self.spec.layers):
            op = ops[level]
            if op.n != h.shape[0]:
                raise ShapeError(f"layer {i}: graph has {op.n} vertices, signal {h.shape[0]}")
            bank = ChebFilterBank(self.params[2 * i])
            basis = cheb_basis(op, h, l.K)
            z = cheb_apply(bank, op, h, basis) + self.params[2 * i + 1]
            a = np.maximum(z, 0.0) if l.activation is Activation.RELU else z
            entry = {"op": op, "bank": bank, "x": h, "basis": basis, "z": z}
            if l.pool is not PoolMode.NONE:
                a, entry["argmax"] = pool4(a, l.pool)
                if i < len(self.spec.layers) - 1:
                    level += 1
            cache.append(entry)
            h = a
        n_conv, n_out = 2 * len(self.spec.layers), h.shape[0]
        h = global_avg_pool(h, B) if self.spec.head == "fcn" else h.reshape(B, -1)
        dense_in = []
        n_dense = len(self._dense_dims())
        for j in range(n_dense):
            dense_in.append(h)
            h = h @ self.params[n_conv + 2 * j] + self.params[n_conv + 2 * j + 1]
            if j < n_dense - 1:
                h = np.maximum(h, 0.0)
        if return_cache:
            return h, (B, n_out, cache, dense_in)
        return h

    def backward(self, cache, dlogits):
        """Gradients of all parameters for an upstream ``d loss / d logits``."""
        B, n_out, conv_cache, dense_in = cache
        n_conv = 2 * len(self.spec.layers)
        grads = [None] * len(self.params)
        g = dlogits
        for j in range(len(dense_in) - 1, -1, -1):
            W = self.params[n_conv + 2 * j]
            grads[n_conv + 2 * j] = dense_in[j].T @ g
            grads[n_conv + 2 * j + 1] = g.sum(axis=0)
            g = g @ W.T
            if j > 0:
                g = g * (dense_in[j] > 0)
        per = n_out // B
        g = np.repeat(g / per, per, axis=0) if self.spec.head == "fcn" else g.reshape(n_out, -1)
        for i in range(len(self.spec.layers) - 1, -1, -1):
            l, c = self.spec.layers[i], conv_cache[i]
            if l.pool is not PoolMode.NONE:
                g = pool4_grad(g, l.pool, c.get("argmax"))
            if l.activation is Activation.RELU:
                g = g * (c["z"] > 0)
            grads[2 * i + 1] = g.sum(axis=0)
            grads[2 * i], g = cheb_grad(c["bank"], c["op"], c["x"], g, c["basis"])
        return grads

    def loss_and_grad(self, x, labels, ops):
        logits, cache = self.forward(x, ops, return_cache=True)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(cache, dlogits), logits


# --------------------------------------------------------------------------
# Optimization

class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch: int = 32
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch < 1 or self.epochs < 0:
            raise ValueError("need lr > 0, batch >= 1 and epochs >= 0")


def predict(model, x, keys, pyramid, batch=256):
    """Logits for every sample; ``keys[i]`` selects the support of sample ``i``."""
    keys = np.asarray(keys)
    out = []
    for s in range(0, len(x), batch):
        sl = slice(s, s + batch)
        out.append(model.forward(x[sl], pyramid.ops(keys[sl])))
    return np.concatenate(out) if out else np.empty((0, model.spec.n_classes))


def accuracy(logits, labels):
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))


def train(model, x, labels, keys, pyramid, config, x_val=None, labels_val=None,
          keys_val=None, optimizer=None):
    """Minibatch Adam on softmax cross-entropy.

    Shuffling uses ``default_rng(config.seed)``, so a run is reproducible
    bit for bit.  Returns the optimizer and a per-epoch history of train loss,
    train accuracy (running, over the epoch's minibatches) and validation
    accuracy.

    Raises
    ------
    TrainingError
        When the loss becomes non-finite.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    keys = np.asarray(keys)
    if len(x) == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= model.spec.n_classes:
        raise ValueError("labels out of range")
    rng = np.random.default_rng(config.seed)
    opt = optimizer or Adam(model.params, lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        tot_loss, correct = 0.0, 0
        for s in range(0, len(x), config.batch):
            idx = order[s:s + config.batch]
            loss, grads, logits = model.loss_and_grad(x[idx], labels[idx], pyramid.ops(keys[idx]))
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}; "
                                    f"try a smaller learning rate than {opt.lr}")
            opt.step(model.params, grads)
            tot_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == labels[idx]))
        rec = {"epoch": epoch + 1, "train_loss": tot_loss / len(x),
               "train_accuracy": correct / len(x)}
        if x_val is not None and len(x_val):
            rec["val_accuracy"] = accuracy(predict(model, x_val, keys_val, pyramid), labels_val)
        history.append(rec)
    return opt, history


# --------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(path, model, optimizer=None, meta=None):
    """Write ``SPHF | u32 version | u32 header length | JSON | float64 blobs``."""
    blobs = list(model.params)
    header = {"spec": model.spec.to_dict(), "params": [[n, list(p.shape)] for n, p in
                                                     zip(model.names, model.params)],
              "meta": meta or {}}
    if optimizer is not None:
        header["adam"] = {"lr": optimizer.lr, "beta1": optimizer.beta1,
                          "beta2": optimizer.beta2, "eps": optimizer.eps, "t": optimizer.t}
        blobs += optimizer.m + optimizer.v
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(hdr)))
        fh.write(hdr)
        for b in blobs:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(model, optimizer, meta)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a sphereflow checkpoint")
    version, n = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + n])
    off = 12 + n

    def take(shape):
        nonlocal off
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
        return arr

    shapes = [tuple(s) for _, s in header["params"]]
    model = Model(ModelSpec.from_dict(header["spec"]), [take(s) for s in shapes])
    opt = None
    if "adam" in header:
        a = header["adam"]
        opt = Adam(model.params, a["lr"], a["beta1"], a["beta2"], a["eps"])
        opt.t = a["t"]
        opt.m = [take(s) for s in shapes]
        opt.v = [take(s) for s in shapes]
    if off != len(data):
        raise ValueError(f"{path}: trailing or missing parameter bytes")
    return model, opt, header["meta"]
