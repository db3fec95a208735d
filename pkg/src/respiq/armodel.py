"""Self-supervised autoregressive predictor.

A 2-layer LSTM followed by a linear head maps a fixed-length history
window of a waveform to its immediate future. The network is trained only
on trustworthy respiration sequences, so its prediction accuracy on a new
candidate acts as a label-free quality estimate: in-distribution signals
are predicted well, noise and deformed signals are not.

The network, backpropagation through time, and the Adam optimizer are
implemented directly on numpy arrays. This keeps training deterministic
for a fixed seed and lets the finite-difference gradient gate
(:func:`gradient_check`) validate the whole training path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import (
    BadMagic,
    ConfigError,
    DivergedLoss,
    EmptyTrainSet,
    InvariantViolation,
    IoFailure,
    NoQualifyingSequences,
    ShapeMismatch,
    TooShort,
    TruncatedFile,
    VersionMismatch,
)
from . import dsp

MODEL_MAGIC = b"MVM1"
_MODEL_HEADER = struct.Struct("<4sIIIIIIIIIdQ")
_NORM_ZSCORE_HISTORY = 0
_NORM_NAMES = {_NORM_ZSCORE_HISTORY: "zscore-history"}
_STD_FLOOR = 1e-6


@dataclass
class ArHyperParams:
    history_len: int = 200
    future_len: int = 25
    hidden_size: int = 352
    num_layers: int = 2
    batch_size: int = 64
    epochs: int = 20
    learning_rate: float = 1e-4
    window_step: int = 25

    def validate(self) -> "ArHyperParams":
        for name in ("history_len", "future_len", "hidden_size", "num_layers", "batch_size", "window_step"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ConfigError("epochs must be >= 0 and learning_rate positive")
        if self.history_len <= self.future_len:
            raise ConfigError("history_len must exceed future_len")
        return self

    @property
    def window_len(self) -> int:
        return self.history_len + self.future_len


@dataclass
class LstmLayer:
    wx: np.ndarray  # (input_dim, 4*hidden), gate order i, f, g, o
    wh: np.ndarray  # (hidden, 4*hidden)
    b: np.ndarray  # (4*hidden,)


@dataclass
class ArModel:
    hp: ArHyperParams
    layers: list[LstmLayer]
    head_w: np.ndarray  # (hidden, future_len)
    head_b: np.ndarray  # (future_len,)
    input_norm: str = "zscore-history"

    @property
    def dtype(self):
        return self.head_w.dtype

    def param_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for li, layer in enumerate(self.layers):
            out += [(f"layer{li}.wx", layer.wx), (f"layer{li}.wh", layer.wh), (f"layer{li}.b", layer.b)]
        out += [("head_w", self.head_w), ("head_b", self.head_b)]
        return out

    def validate(self) -> "ArModel":
        h, f = self.hp.hidden_size, self.hp.future_len
        if len(self.layers) != self.hp.num_layers:
            raise InvariantViolation("layer count disagrees with hyperparameters")
        in_dim = 1
        for layer in self.layers:
            if layer.wx.shape != (in_dim, 4 * h) or layer.wh.shape != (h, 4 * h) or layer.b.shape != (4 * h,):
                raise InvariantViolation("LSTM weight shapes inconsistent with hidden_size")
            in_dim = h
        if self.head_w.shape != (h, f) or self.head_b.shape != (f,):
            raise InvariantViolation("head shapes inconsistent with hyperparameters")
        for _, tensor in self.param_tensors():
            if not np.all(np.isfinite(tensor)):
                raise InvariantViolation("non-finite model weights")
        return self

    def astype(self, dtype) -> "ArModel":
        return ArModel(
            hp=self.hp,
            layers=[LstmLayer(l.wx.astype(dtype), l.wh.astype(dtype), l.b.astype(dtype)) for l in self.layers],
            head_w=self.head_w.astype(dtype),
            head_b=self.head_b.astype(dtype),
            input_norm=self.input_norm,
        )


def init_model(hp: ArHyperParams, seed: int, dtype=np.float32) -> ArModel:
    """Fresh model with uniform(-1/sqrt(H), 1/sqrt(H)) weights and +1 forget bias."""
    hp.validate()
    rng = np.random.default_rng(seed)
    h = hp.hidden_size
    k = 1.0 / np.sqrt(h)
    layers = []
    in_dim = 1
    for _ in range(hp.num_layers):
        wx = rng.uniform(-k, k, (in_dim, 4 * h))
        wh = rng.uniform(-k, k, (h, 4 * h))
        b = rng.uniform(-k, k, 4 * h)
        b[h : 2 * h] += 1.0
        layers.append(LstmLayer(wx.astype(dtype), wh.astype(dtype), b.astype(dtype)))
        in_dim = h
    head_w = rng.uniform(-k, k, (h, hp.future_len)).astype(dtype)
    head_b = rng.uniform(-k, k, hp.future_len).astype(dtype)
    return ArModel(hp=hp, layers=layers, head_w=head_w, head_b=head_b)


# ---------------------------------------------------------------------------
# forward / backward


def _final_hidden(model: ArModel, x: np.ndarray) -> np.ndarray:
    """Top-layer hidden state after consuming the (B, T) batch ``x``."""
    dtype = model.dtype
    x = x.astype(dtype, copy=False)
    b_sz = x.shape[0]
    h_sz = model.hp.hidden_size
    hs = [np.zeros((b_sz, h_sz), dtype=dtype) for _ in model.layers]
    cs = [np.zeros((b_sz, h_sz), dtype=dtype) for _ in model.layers]
    for t in range(x.shape[1]):
        inp = x[:, t : t + 1]
        for li, layer in enumerate(model.layers):
            z = inp @ layer.wx
            z += hs[li] @ layer.wh
            z += layer.b
            i = expit(z[:, :h_sz])
            f = expit(z[:, h_sz : 2 * h_sz])
            g = np.tanh(z[:, 2 * h_sz : 3 * h_sz])
            o = expit(z[:, 3 * h_sz :])
            cs[li] = f * cs[li] + i * g
            hs[li] = o * np.tanh(cs[li])
            inp = hs[li]
    return hs[-1]


def predict_batch(model: ArModel, histories: np.ndarray) -> np.ndarray:
    """Predicted futures, shape (n, future_len), for (n, history_len) inputs."""
    histories = np.asarray(histories)
    if histories.ndim != 2 or histories.shape[1] != model.hp.history_len:
        raise ShapeMismatch(f"expected (n, {model.hp.history_len}), got {histories.shape}")
    return _final_hidden(model, histories) @ model.head_w + model.head_b


def forward(model: ArModel, history) -> np.ndarray:
    """Deterministic single-window prediction: linear head on the final hidden state."""
    history = np.asarray(history, dtype=np.float64)
    if history.shape != (model.hp.history_len,):
        raise ShapeMismatch(f"expected ({model.hp.history_len},), got {history.shape}")
    if not np.all(np.isfinite(history)):
        raise InvariantViolation("history contains non-finite samples")
    return predict_batch(model, history[np.newaxis, :])[0]


def _forward_cached(model: ArModel, x: np.ndarray):
    """Forward pass storing everything the backward pass needs."""
    dtype = model.dtype
    b_sz, t_len = x.shape
    h_sz = model.hp.hidden_size
    caches = []
    layer_in = x[:, :, np.newaxis].astype(dtype, copy=False)
    for layer in model.layers:
        shape = (t_len, b_sz, h_sz)
        cache = {
            "x": layer_in,
            "i": np.empty(shape, dtype),
            "f": np.empty(shape, dtype),
            "g": np.empty(shape, dtype),
            "o": np.empty(shape, dtype),
            "c": np.empty(shape, dtype),
            "tc": np.empty(shape, dtype),
            "h": np.empty(shape, dtype),
        }
        h = np.zeros((b_sz, h_sz), dtype)
        c = np.zeros((b_sz, h_sz), dtype)
        for t in range(t_len):
            z = layer_in[:, t, :] @ layer.wx
            z += h @ layer.wh
            z += layer.b
            i = expit(z[:, :h_sz])
            f = expit(z[:, h_sz : 2 * h_sz])
            g = np.tanh(z[:, 2 * h_sz : 3 * h_sz])
            o = expit(z[:, 3 * h_sz :])
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t] = i, f, g, o
            cache["c"][t], cache["tc"][t], cache["h"][t] = c, tc, h
        caches.append(cache)
        layer_in = np.moveaxis(cache["h"], 0, 1)
    return caches, caches[-1]["h"][-1]


def _backward(model: ArModel, caches, d_h_final: np.ndarray):
    """Gradients of every LSTM tensor given the loss gradient on the final hidden state."""
    dtype = model.dtype
    grads = [None] * len(model.layers)
    d_from_above = None
    for li in reversed(range(len(model.layers))):
        layer = model.layers[li]
        cache = caches[li]
        t_len, b_sz, h_sz = cache["h"].shape
        dwx = np.zeros_like(layer.wx)
        dwh = np.zeros_like(layer.wh)
        db = np.zeros_like(layer.b)
        d_input = np.empty_like(cache["x"])
        dh = np.zeros((b_sz, h_sz), dtype)
        dc = np.zeros((b_sz, h_sz), dtype)
        dz = np.empty((b_sz, 4 * h_sz), dtype)
        for t in reversed(range(t_len)):
            dht = dh
            if d_from_above is not None:
                dht = dht + d_from_above[:, t, :]
            if li == len(model.layers) - 1 and t == t_len - 1:
                dht = dht + d_h_final
            i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
            tc = cache["tc"][t]
            do = dht * tc
            dct = dc + dht * o * (1.0 - tc * tc)
            c_prev = cache["c"][t - 1] if t > 0 else 0.0
            dz[:, :h_sz] = dct * g * i * (1.0 - i)
            dz[:, h_sz : 2 * h_sz] = dct * c_prev * f * (1.0 - f)
            dz[:, 2 * h_sz : 3 * h_sz] = dct * i * (1.0 - g * g)
            dz[:, 3 * h_sz :] = do * o * (1.0 - o)
            dc = dct * f
            x_t = cache["x"][:, t, :]
            h_prev = cache["h"][t - 1] if t > 0 else np.zeros((b_sz, h_sz), dtype)
            dwx += x_t.T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            d_input[:, t, :] = dz @ layer.wx.T
            dh = dz @ layer.wh.T
        grads[li] = {"wx": dwx, "wh": dwh, "b": db}
        d_from_above = d_input
    return grads


def _loss_and_grads(model: ArModel, histories: np.ndarray, futures: np.ndarray):
    caches, h_final = _forward_cached(model, histories)
    pred = h_final @ model.head_w + model.head_b
    err = pred - futures.astype(model.dtype, copy=False)
    loss = float(np.mean(err.astype(np.float64) ** 2))
    d_pred = (2.0 / err.size) * err
    grads = {
        "head_w": h_final.T @ d_pred,
        "head_b": d_pred.sum(axis=0),
        "layers": _backward(model, caches, d_pred @ model.head_w.T),
    }
    return loss, grads


# ---------------------------------------------------------------------------
# training data


@dataclass
class TrainSet:
    """Window pairs (history, future), z-scored per window by history stats."""

    histories: np.ndarray  # (n, history_len)
    futures: np.ndarray  # (n, future_len)
    sources: list[str] = field(default_factory=list)  # "truth" or "uwb" per window

    def __len__(self) -> int:
        return len(self.histories)


def slice_windows(seq: np.ndarray, hp: ArHyperParams) -> tuple[np.ndarray, np.ndarray]:
    """Raw (history, future) pairs sliding over ``seq`` in window_step increments."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.size < hp.window_len:
        raise TooShort(f"sequence of {seq.size} samples shorter than window {hp.window_len}")
    windows = np.lib.stride_tricks.sliding_window_view(seq, hp.window_len)[:: hp.window_step]
    return windows[:, : hp.history_len].copy(), windows[:, hp.history_len :].copy()


def zscore_windows(
    histories: np.ndarray, futures: np.ndarray, std_floor: float = _STD_FLOOR
) -> tuple[np.ndarray, np.ndarray]:
    """Normalize each window pair by its *history* mean/std.

    Using only history statistics keeps the future segment out of the
    model input scaling, so nothing about the prediction target leaks
    into the input. ``std_floor`` guards windows whose history is nearly
    flat (e.g. the pause between breaths): without it the future segment
    gets scaled by a huge factor and dominates the loss.
    """
    mu = histories.mean(axis=1, keepdims=True)
    sd = np.maximum(histories.std(axis=1, keepdims=True), max(std_floor, _STD_FLOOR))
    return (histories - mu) / sd, (futures - mu) / sd


def sequence_windows(seq: np.ndarray, hp: ArHyperParams) -> tuple[np.ndarray, np.ndarray]:
    """Slice and normalize one sequence.

    The per-window std floor is a quarter of the sequence's overall std:
    a window whose history falls in the quiet pause between breaths is
    then scaled roughly by the sequence scale instead of by its own
    near-zero variance, which would blow the future segment up by an
    order of magnitude.
    """
    seq = np.asarray(seq, dtype=np.float64)
    hist, fut = slice_windows(seq, hp)
    return zscore_windows(hist, fut, std_floor=0.25 * float(seq.std()))


def build_train_set(sessions, r0: float = 0.9, hp: ArHyperParams | None = None) -> TrainSet:
    """Collect training windows from trustworthy sequences.

    ``sessions`` is a list of (CandidateBank, truth) pairs; truth may be a
    GroundTruthWaveform, a plain array, or None. Every truth waveform
    qualifies; a candidate qualifies when its correlation with the
    session's truth reaches ``r0``.
    """
    hp = (hp or ArHyperParams()).validate()
    histories, futures, sources = [], [], []
    for bank, truth in sessions:
        truth_samples = getattr(truth, "samples", truth)
        if truth_samples is None:
            continue
        truth_samples = np.asarray(truth_samples, dtype=np.float64)
        seqs = [(truth_samples, "truth")]
        for cand in bank.candidates:
            r = dsp.pearson_r(cand.samples, truth_samples)
            if r is not None and r >= r0:
                seqs.append((cand.samples, "uwb"))
        for seq, tag in seqs:
            if seq.size < hp.window_len:
                continue
            hist, fut = sequence_windows(seq, hp)
            histories.append(hist)
            futures.append(fut)
            sources += [tag] * len(hist)
    if not histories:
        raise NoQualifyingSequences(f"no sequence passed the r0={r0} filter and no usable truth")
    return TrainSet(np.concatenate(histories), np.concatenate(futures), sources)


# ---------------------------------------------------------------------------
# training


class _Adam:
    def __init__(self, lr: float, dtype, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.dtype = dtype
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray]):
        self.t += 1
        lr_t = self.lr * np.sqrt(1.0 - self.beta2**self.t) / (1.0 - self.beta1**self.t)
        for name, tensor in params:
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor)
                self.v[name] = np.zeros_like(tensor)
            m, v = self.m[name], self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            tensor -= (lr_t * m / (np.sqrt(v) + self.eps)).astype(tensor.dtype)


def _flat_grads(grads) -> dict[str, np.ndarray]:
    flat = {"head_w": grads["head_w"], "head_b": grads["head_b"]}
    for li, layer_grads in enumerate(grads["layers"]):
        for key, value in layer_grads.items():
            flat[f"layer{li}.{key}"] = value
    return flat


def train(
    train_set: TrainSet,
    hp: ArHyperParams | None = None,
    seed: int = 0,
    dtype=np.float32,
) -> tuple[ArModel, list[float]]:
    """Minibatch Adam on the window MSE; returns the model and per-epoch mean loss.

    Deterministic for a fixed seed: initialization, shuffling, and update
    order all derive from ``seed``.
    """
    hp = (hp or ArHyperParams()).validate()
    if len(train_set) == 0:
        raise EmptyTrainSet("training set has no windows")
    model = init_model(hp, seed, dtype=dtype)
    if hp.epochs == 0:
        return model, []
    rng = np.random.default_rng(seed + 1)
    optimizer = _Adam(hp.learning_rate, dtype)
    histories = train_set.histories.astype(dtype)
    futures = train_set.futures.astype(dtype)
    n = len(train_set)
    curve = []
    for _ in range(hp.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hp.batch_size):
            batch = order[start : start + hp.batch_size]
            loss, grads = _loss_and_grads(model, histories[batch], futures[batch])
            if not np.isfinite(loss):
                raise DivergedLoss(f"loss became {loss}")
            optimizer.step(model.param_tensors(), _flat_grads(grads))
            total += loss * len(batch)
        curve.append(total / n)
    return model.validate(), curve


def hold_last_mse(histories: np.ndarray, futures: np.ndarray) -> float:
    """MSE of the predictor that repeats the last history value; a floor any trained model must beat."""
    pred = np.repeat(histories[:, -1:], futures.shape[1], axis=1)
    return float(np.mean((pred - futures) ** 2))


# ---------------------------------------------------------------------------
# gradient gate


def gradient_check(model: ArModel, sample, epsilon: float = 1e-4) -> float:
    """Max relative error between BPTT and central finite differences.

    Runs in double precision on a copy of the model; intended for tiny
    models (hidden <= 8) where perturbing every parameter is tractable.
    """
    history, target = sample
    model = model.astype(np.float64)
    hist = np.asarray(history, dtype=np.float64)[np.newaxis, :]
    fut = np.asarray(target, dtype=np.float64)[np.newaxis, :]
    _, grads = _loss_and_grads(model, hist, fut)
    flat = _flat_grads(grads)

    def loss_only():
        h_final = _final_hidden(model, hist)
        pred = h_final @ model.head_w + model.head_b
        return float(np.mean((pred - fut) ** 2))

    worst = 0.0
    for name, tensor in model.param_tensors():
        analytic = flat[name]
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + epsilon
            up = loss_only()
            tensor[idx] = orig - epsilon
            down = loss_only()
            tensor[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic[idx])
            scale = max(abs(a), abs(numeric), 1e-3)
            worst = max(worst, abs(a - numeric) / scale)
    return worst


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: ArModel, path) -> None:
    """Write an MVM1 checkpoint: header with hyperparameters, then f32 tensors."""
    model.validate()
    norm_id = {v: k for k, v in _NORM_NAMES.items()}[model.input_norm]
    tensors = [t.astype("<f4") for _, t in model.param_tensors()]
    payload = b"".join(t.tobytes() for t in tensors)
    hp = model.hp
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC,
        1,
        hp.history_len,
        hp.future_len,
        hp.hidden_size,
        hp.num_layers,
        hp.batch_size,
        hp.epochs,
        hp.window_step,
        norm_id,
        hp.learning_rate,
        len(payload),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path) -> ArModel:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: shorter than a magic header")
    if raw[:4] != MODEL_MAGIC:
        raise BadMagic(f"{path}: expected {MODEL_MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < _MODEL_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    (_, version, history, future, hidden, layers, batch, epochs, step, norm_id, lr, declared) = _MODEL_HEADER.unpack_from(raw)
    if version != 1:
        raise VersionMismatch(f"{path}: unsupported version {version}")
    if norm_id not in _NORM_NAMES:
        raise VersionMismatch(f"{path}: unknown normalization id {norm_id}")
    hp = ArHyperParams(
        history_len=history,
        future_len=future,
        hidden_size=hidden,
        num_layers=layers,
        batch_size=batch,
        epochs=epochs,
        learning_rate=lr,
        window_step=step,
    ).validate()
    shapes = []
    in_dim = 1
    for _ in range(hp.num_layers):
        shapes += [(in_dim, 4 * hidden), (hidden, 4 * hidden), (4 * hidden,)]
        in_dim = hidden
    shapes += [(hidden, future), (future,)]
    expected = sum(int(np.prod(s)) * 4 for s in shapes)
    if declared != expected:
        raise VersionMismatch(
            f"{path}: header declares {declared} payload bytes, hyperparameters imply {expected}"
        )
    payload = raw[_MODEL_HEADER.size :]
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: payload has {len(payload)} bytes, need {expected}")
    offset = 0
    tensors = []
    for shape in shapes:
        count = int(np.prod(shape))
        tensors.append(np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).copy())
        offset += count * 4
    lstm_layers = [LstmLayer(*tensors[3 * i : 3 * i + 3]) for i in range(hp.num_layers)]
    return ArModel(
        hp=hp,
        layers=lstm_layers,
        head_w=tensors[-2],
        head_b=tensors[-1],
        input_norm=_NORM_NAMES[norm_id],
    ).validate()
