"""Single-channel circulant CNNs with hand-written backprop and Nesterov SGD.

A depth-k network computes ``A relu(C_k ... relu(C_1 x + b_1) ... + b_k) + b_A``
where each ``C_i`` is a full D x D circulant (see :mod:`modelbench.signal1d`
for the index convention) and ``A`` is an unconstrained D x D matrix.

Training runs on *stacks* of networks: every parameter carries a leading
model axis so that many (run, learning-rate) combinations advance together
in one batched matrix product. A single network is a stack of one.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from modelbench.errors import DomainError
from modelbench.signal1d import Dataset1D

MAX_DEPTH = 3
MOMENTUM = 0.9
_PARAM_NAMES = ("kernels", "conv_bias", "A", "bA")


def _support_mask(D: int, support: int | None) -> np.ndarray:
    """Kernel taps allowed to be nonzero; ``support`` = max cyclic offset."""
    if support is None:
        return np.ones(D)
    k = np.arange(D)
    return (np.minimum(k, D - k) <= support).astype(np.float64)


@dataclass
class TinyNet:
    depth: int
    D: int
    kernels: np.ndarray  # (depth, D) circulant first rows
    conv_bias: np.ndarray  # (depth, D)
    A: np.ndarray  # (D, D)
    bA: np.ndarray  # (D,)
    support: int | None = None

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAM_NAMES}

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params().values())

    def __call__(self, x):
        return forward(self, x)

    def copy(self) -> TinyNet:
        p = {k: v.copy() for k, v in self.params().items()}
        return TinyNet(self.depth, self.D, support=self.support, **p)


def init_network(depth: int, D: int, rng: np.random.Generator, support: int | None = None) -> TinyNet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if depth not in range(MAX_DEPTH + 1):
        raise DomainError(f"depth must be in 0..{MAX_DEPTH}, got {depth}")
    if D < 1:
        raise DomainError("D must be positive")
    mask = _support_mask(D, support)
    bound = 1.0 / np.sqrt(mask.sum())
    kernels = np.empty((depth, D))
    for i in range(depth):
        kernels[i] = rng.uniform(-bound, bound, D) * mask
    A = rng.uniform(-1.0 / np.sqrt(D), 1.0 / np.sqrt(D), (D, D))
    return TinyNet(depth, D, kernels, np.zeros((depth, D)), A, np.zeros(D), support)


# -- stacked math ------------------------------------------------------------

def _circ_index(D: int) -> np.ndarray:
    return (np.arange(D)[None, :] - np.arange(D)[:, None]) % D


def stack(nets: list[TinyNet]) -> dict[str, np.ndarray]:
    first = nets[0]
    for net in nets:
        if (net.depth, net.D, net.support) != (first.depth, first.D, first.support):
            raise DomainError("can only stack networks of identical shape")
    return {name: np.stack([getattr(n, name) for n in nets]) for name in _PARAM_NAMES}


def unstack(params: dict[str, np.ndarray], i: int, support: int | None = None) -> TinyNet:
    depth, D = params["kernels"].shape[1], params["A"].shape[1]
    return TinyNet(depth, D, support=support, **{k: v[i].copy() for k, v in params.items()})


def _forward_stack(params, X):
    """X: (M, B, D). Returns output and the per-layer cache."""
    kernels = params["kernels"]
    M, depth, D = kernels.shape
    idx = _circ_index(D)
    cache = []
    h = X
    for i in range(depth):
        Cd = kernels[:, i][:, idx]  # (M, D, D)
        z = np.matmul(h, Cd.transpose(0, 2, 1)) + params["conv_bias"][:, i, None, :]
        cache.append((h, Cd, z))
        h = np.maximum(z, 0.0)
    out = np.matmul(h, params["A"].transpose(0, 2, 1)) + params["bA"][:, None, :]
    return out, (cache, h)


def _backward_stack(params, cache, dout, mask):
    conv_cache, h = cache
    kernels = params["kernels"]
    M, depth, D = kernels.shape
    grads = {
        "A": np.matmul(dout.transpose(0, 2, 1), h),
        "bA": dout.sum(axis=1),
        "kernels": np.zeros_like(kernels),
        "conv_bias": np.zeros_like(params["conv_bias"]),
    }
    if depth == 0:
        return grads
    rows = np.arange(D)[:, None]
    shift = (rows + np.arange(D)[None, :]) % D  # shift[i, m] = (i + m) mod D
    dh = np.matmul(dout, params["A"])
    for i in reversed(range(depth)):
        h_in, Cd, z = conv_cache[i]
        dz = dh * (z > 0.0)
        G = np.matmul(dz.transpose(0, 2, 1), h_in)  # dL/dC[i, j]
        grads["kernels"][:, i] = G[:, rows, shift].sum(axis=1) * mask
        grads["conv_bias"][:, i] = dz.sum(axis=1)
        if i:
            dh = np.matmul(dz, Cd)
    return grads


def _loss_grads_stack(params, X, Y, mask):
    """Per-model loss (1/(D |batch|)) sum ||f(x) - y||^2 and its gradients."""
    out, cache = _forward_stack(params, X)
    M, B, D = X.shape
    resid = out - Y
    loss = np.sum(resid * resid, axis=(1, 2)) / (D * B)
    grads = _backward_stack(params, cache, 2.0 * resid / (D * B), mask)
    return loss, grads


# -- single-network API ------------------------------------------------------

def forward(net: TinyNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (net.D,):
        raise DomainError(f"expected trailing length {net.D}, got shape {x.shape}")
    batch = x.reshape(1, -1, net.D)
    out, _ = _forward_stack(stack([net]), batch)
    return out.reshape(x.shape)


def loss_and_gradients(net: TinyNet, batch) -> tuple[float, dict[str, np.ndarray]]:
    if not isinstance(batch, Dataset1D):
        batch = Dataset1D.from_pairs(batch)
    if len(batch) == 0:
        raise DomainError("empty batch")
    loss, grads = _loss_grads_stack(
        stack([net]), batch.phi_data[None], batch.phi[None], _support_mask(net.D, net.support)
    )
    return float(loss[0]), {k: v[0] for k, v in grads.items()}


@dataclass
class Optimizer:
    """SGD with Nesterov momentum: v <- mu v + g ; theta <- theta - lr (g + mu v).

    ``learning_rate`` may be an array with one entry per stacked model.
    """

    learning_rate: float | np.ndarray
    momentum: float = MOMENTUM
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.asarray(self.learning_rate) <= 0):
            raise DomainError("learning rate must be positive")

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """In-place update of ``params``."""
        lr = np.asarray(self.learning_rate, dtype=np.float64)
        for name, g in grads.items():
            p = params[name]
            if p.shape != g.shape:
                raise DomainError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
            v = self.velocity.get(name)
            if v is None:
                v = self.velocity[name] = np.zeros_like(p)
            elif v.shape != p.shape:
                raise DomainError(f"velocity shape mismatch for {name}")
            v *= self.momentum
            v += g
            scale = lr.reshape(lr.shape + (1,) * (p.ndim - lr.ndim)) if lr.ndim else lr
            p -= scale * (g + self.momentum * v)


def sgd_nesterov_step(opt: Optimizer, net: TinyNet, grads: dict[str, np.ndarray]) -> TinyNet:
    params = net.params()
    opt.step(params, grads)
    return net


def _shuffled_batches(rng: np.random.Generator, n: int, batch_size: int):
    perm = rng.permutation(n)
    return [perm[s : s + batch_size] for s in range(0, n, batch_size)]


def train_stack(
    params: dict[str, np.ndarray],
    datasets: list[Dataset1D],
    learning_rates: np.ndarray,
    rngs: list[np.random.Generator],
    epochs: int = 50,
    batch_size: int = 10,
    support: int | None = None,
) -> dict[str, np.ndarray]:
    """Train R x E stacked models: run r owns ``datasets[r]`` and ``rngs[r]``.

    Model ``r * E + e`` trains on run r's data with ``learning_rates[e]``. Every
    run draws one permutation per epoch from its own stream, so the batch
    order depends only on (stream, N, epoch), never on the data values.
    """
    R, E = len(datasets), len(learning_rates)
    M = params["A"].shape[0]
    if M != R * E or len(rngs) != R:
        raise DomainError(f"{M} models do not match {R} runs x {E} learning rates")
    n = len(datasets[0])
    if n == 0 or any(len(d) != n for d in datasets):
        raise DomainError("all training sets must be nonempty and equally sized")
    D = datasets[0].D
    mask = _support_mask(D, support)
    X = np.stack([d.phi_data for d in datasets])
    Y = np.stack([d.phi for d in datasets])
    opt = Optimizer(np.tile(np.asarray(learning_rates, dtype=np.float64), R))
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(params, X, Y, E, rngs, opt, epochs, batch_size, mask)
    return params


def _run_epochs(params, X, Y, E, rngs, opt, epochs, batch_size, mask):
    R, n = X.shape[0], X.shape[1]
    run_of = np.arange(R)
    for _ in range(epochs):
        batches = [_shuffled_batches(rng, n, batch_size) for rng in rngs]
        for step in range(len(batches[0])):
            idx = np.stack([b[step] for b in batches])  # (R, B)
            xb = np.repeat(X[run_of[:, None], idx], E, axis=0)
            yb = np.repeat(Y[run_of[:, None], idx], E, axis=0)
            _, grads = _loss_grads_stack(params, xb, yb, mask)
            opt.step(params, grads)


def train(
    net: TinyNet,
    train_set: Dataset1D,
    epochs: int = 50,
    batch_size: int = 10,
    opt: Optimizer | None = None,
    rng: np.random.Generator | None = None,
    learning_rate: float = 0.01,
) -> TinyNet:
    """Mini-batch training for a fixed number of epochs; returns a new network."""
    if len(train_set) == 0:
        raise DomainError("empty training set")
    if rng is None:
        raise DomainError("train needs an explicit random stream")
    lr = opt.learning_rate if opt is not None else learning_rate
    params = stack([net])
    params = train_stack(params, [train_set], np.atleast_1d(lr), [rng], epochs, batch_size, net.support)
    return unstack(params, 0, net.support)


def mean_loss(net: TinyNet, ds: Dataset1D) -> float:
    resid = forward(net, ds.phi_data) - ds.phi
    return float(np.mean(resid * resid))


# -- parameter file ----------------------------------------------------------
# header: magic "TNET", version u16, depth u16, D u32, support i32 (-1 = full),
# then little-endian float64: for each layer kernel[D], bias[D]; then A
# (row-major D x D) and bA[D].
_MAGIC = b"TNET"
_HEADER = struct.Struct("<4sHHIi")


def save_params(path, net: TinyNet) -> None:
    blobs = []
    for i in range(net.depth):
        blobs += [net.kernels[i], net.conv_bias[i]]
    blobs += [net.A.ravel(), net.bA]
    body = np.concatenate(blobs).astype("<f8") if blobs else np.zeros(0)
    support = -1 if net.support is None else net.support
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, net.depth, net.D, support))
        fh.write(body.tobytes())


def load_params(path) -> TinyNet:
    raw = Path(path).read_bytes()
    magic, version, depth, D, support = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise DomainError(f"{path}: not a TNET v1 file")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    if body.size != depth * 2 * D + D * D + D:
        raise DomainError(f"{path}: parameter count mismatch")
    layers = body[: depth * 2 * D].reshape(depth, 2, D)
    A = body[depth * 2 * D : depth * 2 * D + D * D].reshape(D, D)
    return TinyNet(depth, D, layers[:, 0].copy(), layers[:, 1].copy(), A.copy(), body[-D:].copy(),
                   None if support < 0 else support)
