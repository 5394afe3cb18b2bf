"""Next-FoV prediction with a GRU trained by BPTT and plain SGD.

One model is shared by all users by default: every user's last ``memory``
FoVs are one-hot encoded and fed through the GRU, and a softmax layer over
the ``n_fov`` tiles gives the next-slot distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .latency import prediction_accuracy
from .neural import GruClassifier, ParameterSet, cross_entropy, load_checkpoint, \
    save_checkpoint, sgd_step, softmax


def one_hot_windows(windows, n_fov: int) -> np.ndarray:
    w = np.asarray(windows, dtype=int)
    if w.size and (w.min() < 0 or w.max() >= n_fov):
        raise ValueError("window holds an invalid FoV index")
    return np.eye(n_fov)[w]


def make_windows(trace: np.ndarray, memory: int, start: int = 0, stop: int | None = None):
    """All (window, next FoV) pairs whose target slot lies in ``[start, stop)``.

    Returns windows of shape (n, memory), targets (n,) and the user of each row.
    """
    trace = np.asarray(trace)
    k, t = trace.shape
    stop = t if stop is None else stop
    first = max(start, memory)
    if stop <= first:
        raise ValueError(f"trace too short for memory {memory}")
    slots = np.arange(first, stop)
    idx = slots[:, None] - memory + np.arange(memory)[None, :]
    windows = trace[:, idx].reshape(-1, memory)
    targets = trace[:, slots].reshape(-1)
    users = np.repeat(np.arange(k), len(slots))
    return windows, targets, users


@dataclass
class Prediction:
    probabilities: np.ndarray
    fov: int
    warm: bool


@dataclass
class PredictorModel:
    net: GruClassifier
    n_fov: int
    memory: int = 20
    learning_rate: float = 0.005
    batch_size: int = 64

    @classmethod
    def create(cls, n_fov: int, rng: np.random.Generator, *, memory=20, hidden=64,
               learning_rate=0.005, batch_size=64) -> "PredictorModel":
        return cls(GruClassifier(n_fov, hidden, n_fov, rng), n_fov, memory, learning_rate,
                   batch_size)

    @property
    def params(self) -> ParameterSet:
        return self.net.params

    def predict_proba(self, windows) -> np.ndarray:
        windows = np.asarray(windows, dtype=int)
        if windows.ndim == 1:
            windows = windows[None, :]
        out = []
        for i in range(0, len(windows), 4096):
            logits, _ = self.net.forward(one_hot_windows(windows[i:i + 4096], self.n_fov))
            out.append(softmax(logits))
        return np.concatenate(out) if out else np.zeros((0, self.n_fov))

    def predict(self, windows) -> np.ndarray:
        """Argmax FoV per window (``np.argmax`` keeps the lowest index on ties)."""
        return np.argmax(self.predict_proba(windows), axis=1)

    def predict_next(self, window) -> Prediction:
        window = list(window)
        if len(window) < self.memory:
            probs = np.full(self.n_fov, 1.0 / self.n_fov)
            return Prediction(probs, 0, warm=False)
        probs = self.predict_proba(np.asarray(window[-self.memory:]))[0]
        return Prediction(probs, int(np.argmax(probs)), warm=True)

    def train_step(self, windows, targets) -> float:
        """One SGD step on the summed cross-entropy of the minibatch."""
        windows = np.asarray(windows, dtype=int)
        if len(windows) == 0:
            raise ValueError("empty minibatch")
        logits, cache = self.net.forward(one_hot_windows(windows, self.n_fov))
        loss, dlogits = cross_entropy(logits, targets)
        grads = self.net.backward(cache, dlogits)
        self.net.params = sgd_step(self.net.params, grads, self.learning_rate)
        return loss

    def save(self, path) -> None:
        save_checkpoint(path, self.net.params)

    def load_params(self, path) -> None:
        params = load_checkpoint(path)
        if not params.same_layout(self.net.params):
            raise ValueError(f"{path} does not match the predictor layout")
        self.net.params = params


class LastValuePredictor:
    """Predicts that each user keeps its most recent FoV."""

    def __init__(self, n_fov: int, memory: int = 1):
        self.n_fov, self.memory = n_fov, memory

    def predict(self, windows) -> np.ndarray:
        return np.asarray(windows, dtype=int)[:, -1]


@dataclass
class FovPredictor:
    """Shared model, or one model per user when ``models`` has K entries."""

    models: list[PredictorModel]
    shared: bool = True

    @property
    def memory(self) -> int:
        return self.models[0].memory

    @property
    def n_fov(self) -> int:
        return self.models[0].n_fov

    def predict(self, windows, users=None) -> np.ndarray:
        windows = np.asarray(windows, dtype=int)
        if self.shared:
            return self.models[0].predict(windows)
        users = np.asarray(users, dtype=int)
        out = np.empty(len(windows), dtype=int)
        for u in np.unique(users):
            sel = users == u
            out[sel] = self.models[u].predict(windows[sel])
        return out


@dataclass
class TrainingCurve:
    epochs: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "accuracy"])
            for row in zip(self.epochs, self.losses, self.accuracies):
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2]))])


def _fit(model, windows, targets, eval_w, eval_t, epochs, batches_per_epoch, rng, curve):
    n = len(windows)
    bs = model.batch_size
    for epoch in range(1, epochs + 1):
        if batches_per_epoch:
            batches = [rng.integers(0, n, size=bs) for _ in range(batches_per_epoch)]
        else:
            order = rng.permutation(n)
            batches = [order[i:i + bs] for i in range(0, n, bs)]
        total = 0.0
        for idx in batches:
            total += model.train_step(windows[idx], targets[idx])
        seen = sum(len(b) for b in batches)
        acc = prediction_accuracy(eval_t, model.predict(eval_w)) / 100.0
        curve.epochs.append(epoch)
        curve.losses.append(total / seen)
        curve.accuracies.append(acc)


def train_predictor(traces: np.ndarray, epochs: int, rng: np.random.Generator, *,
                    n_fov: int, memory: int = 20, hidden: int = 64,
                    learning_rate: float = 0.005, batch_size: int = 64,
                    batches_per_epoch: int | None = 50, holdout: float = 0.2,
                    eval_windows: int | None = 2000, shared: bool = True,
                    init_rng: np.random.Generator | None = None):
    """Train on the first ``1 - holdout`` of every trace, score the rest each epoch.

    Returns ``(FovPredictor, TrainingCurve, final_accuracy)`` where accuracy
    is the exact-match fraction on all held-out windows.
    """
    traces = np.asarray(traces, dtype=int)
    k, t = traces.shape
    if t < memory + 1:
        raise ValueError(f"traces need at least {memory + 1} slots")
    split = int(round(t * (1.0 - holdout)))
    split = min(max(split, memory + 1), t - 1) if holdout > 0 else t
    init_rng = rng if init_rng is None else init_rng
    owners = [None] if shared else list(range(k))
    models = []
    curve = TrainingCurve()
    all_eval_t, all_eval_p = [], []
    for owner in owners:
        sub = traces if owner is None else traces[owner:owner + 1]
        tw, tt, _ = make_windows(sub, memory, 0, split)
        if split < t:
            ew, et, _ = make_windows(sub, memory, split, t)
        else:
            ew, et = tw, tt
        if eval_windows and len(ew) > eval_windows:
            pick = np.sort(rng.choice(len(ew), size=eval_windows, replace=False))
            sw, st = ew[pick], et[pick]
        else:
            sw, st = ew, et
        model = PredictorModel.create(n_fov, init_rng, memory=memory, hidden=hidden,
                                      learning_rate=learning_rate, batch_size=batch_size)
        own_curve = curve if owner in (None, 0) else TrainingCurve()
        _fit(model, tw, tt, sw, st, epochs, batches_per_epoch, rng, own_curve)
        models.append(model)
        all_eval_t.append(et)
        all_eval_p.append(model.predict(ew))
    final = prediction_accuracy(np.concatenate(all_eval_t), np.concatenate(all_eval_p)) / 100.0
    return FovPredictor(models, shared), curve, final
