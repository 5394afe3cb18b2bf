"""Small numpy neural substrate: MLP, GRU classifier, SGD, parameter averaging.

Everything is float64 and deterministic.  ``forward`` returns the output plus
a cache; ``backward`` consumes the cache and returns gradients as a new
:class:`ParameterSet` without touching the network's own parameters.

Checkpoint layout (little-endian)::

    u8   version (=1)
    4s   magic b"VRNN"
    u32  array count
    per array:
        u16  name length, then the UTF-8 name
        u8   ndim, then ndim x u32 dims
        f64  data, C order
"""

from __future__ import annotations

import os
import struct
import tempfile
from collections.abc import Iterable, Iterator

import numpy as np

CHECKPOINT_VERSION = 1
_MAGIC = b"VRNN"


class ParameterSet:
    """Ordered mapping of named float64 arrays with a flat view."""

    def __init__(self, arrays: dict[str, np.ndarray] | Iterable[tuple[str, np.ndarray]]):
        items = arrays.items() if isinstance(arrays, dict) else arrays
        self._arrays = {name: np.array(a, dtype=np.float64) for name, a in items}

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        if name in self._arrays and np.shape(value) != self._arrays[name].shape:
            raise ValueError(f"shape mismatch for {name}")
        self._arrays[name] = np.array(value, dtype=np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    @property
    def names(self) -> list[str]:
        return list(self._arrays)

    @property
    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: a.shape for n, a in self._arrays.items()}

    @property
    def size(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def copy(self) -> "ParameterSet":
        return ParameterSet({n: a.copy() for n, a in self._arrays.items()})

    def zeros_like(self) -> "ParameterSet":
        return ParameterSet({n: np.zeros_like(a) for n, a in self._arrays.items()})

    def flat(self) -> np.ndarray:
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in self._arrays.values()])

    def from_flat(self, vec) -> "ParameterSet":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError(f"expected {self.size} values, got {vec.size}")
        out, i = {}, 0
        for n, a in self._arrays.items():
            out[n] = vec[i:i + a.size].reshape(a.shape).copy()
            i += a.size
        return ParameterSet(out)

    def same_layout(self, other: "ParameterSet") -> bool:
        return self.shapes == other.shapes and self.names == other.names

    def prefixed(self, prefix: str) -> "ParameterSet":
        return ParameterSet({f"{prefix}{n}": a for n, a in self._arrays.items()})

    def unprefixed(self, prefix: str) -> "ParameterSet":
        return ParameterSet({n[len(prefix):]: a for n, a in self._arrays.items()
                             if n.startswith(prefix)})

    def equals(self, other: "ParameterSet") -> bool:
        return self.same_layout(other) and all(
            np.array_equal(a, other[n]) for n, a in self._arrays.items())


def sgd_step(params: ParameterSet, grads: ParameterSet, lr: float) -> ParameterSet:
    """Plain descent step, returns ``params - lr * grads``."""
    if not params.same_layout(grads):
        raise ValueError("parameter/gradient layouts differ")
    return ParameterSet({n: a - lr * grads[n] for n, a in params.items()})


def average_parameters(sets: list[ParameterSet]) -> ParameterSet:
    if not sets:
        raise ValueError("nothing to average")
    first = sets[0]
    for s in sets[1:]:
        if not first.same_layout(s):
            raise ValueError("parameter sets have different shapes")
    return ParameterSet({n: np.mean([s[n] for s in sets], axis=0) for n in first})


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Summed cross-entropy over the batch and its gradient w.r.t. logits."""
    labels = np.asarray(labels, dtype=int)
    logp = log_softmax(logits)
    n = logits.shape[0]
    loss = -float(np.sum(logp[np.arange(n), labels]))
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Mlp:
    """Fully connected net: ReLU hidden layers, linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None,
                 params: ParameterSet | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        if params is None:
            if rng is None:
                raise ValueError("need rng or params")
            arrays = {}
            for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
                arrays[f"W{i}"] = glorot(rng, a, b)
                arrays[f"b{i}"] = np.zeros(b)
            params = ParameterSet(arrays)
        self.params = params

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x, params: ParameterSet | None = None):
        p = self.params if params is None else params
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {x.shape[-1]}")
        single = x.ndim == 1
        a = x[None, :] if single else x
        acts = [a]
        for i in range(self.n_layers):
            z = a @ p[f"W{i}"] + p[f"b{i}"]
            a = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
            acts.append(a)
        out = a[0] if single else a
        return out, (acts, single, p)

    def backward(self, cache, dout) -> ParameterSet:
        if cache is None:
            raise ValueError("backward needs the forward cache")
        acts, single, p = cache
        g = np.asarray(dout, dtype=np.float64)
        g = g[None, :] if single else g
        grads = {}
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * (acts[i + 1] > 0)
            grads[f"W{i}"] = acts[i].T @ g
            grads[f"b{i}"] = g.sum(axis=0)
            if i > 0:
                g = g @ p[f"W{i}"].T
        return ParameterSet({n: grads[n] for n in p.names})

    def input_gradient(self, cache, dout) -> np.ndarray:
        acts, single, p = cache
        g = np.asarray(dout, dtype=np.float64)
        g = g[None, :] if single else g
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * (acts[i + 1] > 0)
            g = g @ p[f"W{i}"].T
        return g[0] if single else g


class GruCell:
    """Gated recurrent unit with fused gate weights (update | reset | candidate)."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator | None = None,
                 params: ParameterSet | None = None, prefix: str = ""):
        self.n_in, self.hidden, self.prefix = n_in, hidden, prefix
        if params is None:
            if rng is None:
                raise ValueError("need rng or params")
            h = hidden
            w = np.concatenate([glorot(rng, n_in, h) for _ in range(3)], axis=1)
            u = np.concatenate([glorot(rng, h, h) for _ in range(3)], axis=1)
            params = ParameterSet({f"{prefix}W": w, f"{prefix}U": u,
                                   f"{prefix}b": np.zeros(3 * h)})
        self.params = params

    def step(self, x, h, p):
        """One step; returns the new hidden state and what backprop needs."""
        n = self.prefix
        H = self.hidden
        W, U, b = p[f"{n}W"], p[f"{n}U"], p[f"{n}b"]
        xw = x @ W + b
        zr = _sigmoid(xw[:, :2 * H] + h @ U[:, :2 * H])
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h
        cand = np.tanh(xw[:, 2 * H:] + rh @ U[:, 2 * H:])
        h_new = (1.0 - z) * h + z * cand
        return h_new, (x, h, z, r, rh, cand)

    def step_backward(self, dh_new, saved, p, grads):
        n = self.prefix
        H = self.hidden
        U = p[f"{n}U"]
        x, h, z, r, rh, cand = saved
        dz = dh_new * (cand - h)
        dcand = dh_new * z
        dh = dh_new * (1.0 - z)
        da_h = dcand * (1.0 - cand**2)
        drh = da_h @ U[:, 2 * H:].T
        dr = drh * h
        dh += drh * r
        da_zr = np.concatenate([dz * z * (1.0 - z), dr * r * (1.0 - r)], axis=1)
        dh += da_zr @ U[:, :2 * H].T
        da = np.concatenate([da_zr, da_h], axis=1)
        grads[f"{n}W"] += x.T @ da
        grads[f"{n}U"][:, :2 * H] += h.T @ da_zr
        grads[f"{n}U"][:, 2 * H:] += rh.T @ da_h
        grads[f"{n}b"] += da.sum(axis=0)
        return dh


class GruClassifier:
    """GRU over a window of inputs followed by a softmax output layer."""

    def __init__(self, n_in: int, hidden: int, n_classes: int,
                 rng: np.random.Generator | None = None, params: ParameterSet | None = None):
        self.n_in, self.hidden, self.n_classes = n_in, hidden, n_classes
        if params is None:
            if rng is None:
                raise ValueError("need rng or params")
            cell = GruCell(n_in, hidden, rng, prefix="gru_")
            arrays = dict(cell.params.items())
            arrays["out_W"] = glorot(rng, hidden, n_classes)
            arrays["out_b"] = np.zeros(n_classes)
            params = ParameterSet(arrays)
        self.params = params
        self.cell = GruCell(n_in, hidden, params=self.params, prefix="gru_")

    @classmethod
    def zeros(cls, n_in: int, hidden: int, n_classes: int) -> "GruClassifier":
        net = cls(n_in, hidden, n_classes, rng=np.random.default_rng(0))
        net.params = net.params.zeros_like()
        return net

    def forward(self, xs, params: ParameterSet | None = None):
        """``xs`` has shape (n, T, n_in); returns logits (n, n_classes)."""
        p = self.params if params is None else params
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 3 or xs.shape[2] != self.n_in:
            raise ValueError(f"expected (n, T, {self.n_in}) input, got {xs.shape}")
        h = np.zeros((xs.shape[0], self.hidden))
        saved = []
        for t in range(xs.shape[1]):
            h, s = self.cell.step(xs[:, t, :], h, p)
            saved.append(s)
        logits = h @ p["out_W"] + p["out_b"]
        return logits, (saved, h, p)

    def backward(self, cache, dlogits) -> ParameterSet:
        if cache is None:
            raise ValueError("backward needs the forward cache")
        saved, h_last, p = cache
        grads = p.zeros_like()
        grads["out_W"] = h_last.T @ dlogits
        grads["out_b"] = dlogits.sum(axis=0)
        dh = dlogits @ p["out_W"].T
        gdict = {n: grads[n] for n in grads}
        for s in reversed(saved):
            dh = self.cell.step_backward(dh, s, p, gdict)
        return ParameterSet({n: gdict[n] for n in p.names})

    def probabilities(self, xs, params: ParameterSet | None = None) -> np.ndarray:
        return softmax(self.forward(xs, params)[0])


def save_checkpoint(path, params: ParameterSet) -> None:
    """Write ``params`` atomically in the layout described in the module docstring."""
    chunks = [struct.pack("<B4sI", CHECKPOINT_VERSION, _MAGIC, len(params))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_checkpoint(path) -> ParameterSet:
    with open(path, "rb") as fh:
        data = fh.read()
    version, magic, count = struct.unpack_from("<B4sI", data, 0)
    if version != CHECKPOINT_VERSION or magic != _MAGIC:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    off = struct.calcsize("<B4sI")
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return ParameterSet(arrays)
