# Python standard library imports
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

# Third-party imports
import numpy as np

# Local imports
from ..exceptions import CheckpointError, DivergenceError, DomainError, ShapeError
from .scenario_helpers import HOURS_PER_DAY

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dronecell-lstm"
CHECKPOINT_VERSION = 1
FEATURES = ("users", "energy_j", "hour_sin", "hour_cos")
ACTIVATIONS = ("relu", "sigmoid", "tanh")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(name, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return _sigmoid(x)
    return np.tanh(x)


def _activate_grad(name, pre, post):
    if name == "relu":
        return (pre > 0).astype(float)
    if name == "sigmoid":
        return post * (1.0 - post)
    return 1.0 - post**2


class LstmModel:
    """
    Single-layer LSTM with optional dense stack and a linear output head.

    Parameters (float64):
    - W (4H x D), U (4H x H), b (4H): gate blocks stacked as forget, input, output, candidate
    - Wd{k} (M x prev), bd{k} (M): dense layers between the final hidden state and the head
    - Wy (1 x last), by (1): linear head

    The model also carries the z-score statistics of its inputs and target so a
    checkpoint predicts in original units.
    """

    def __init__(
        self,
        input_dim,
        hidden_units,
        *,
        forget_bias=1.0,
        dropout_rate=0.0,
        dense_layers=0,
        dense_units=50,
        activation="tanh",
    ):
        if input_dim < 1 or hidden_units < 1:
            raise ShapeError("input_dim and hidden_units must be >= 1")
        if activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {activation!r}")
        if not 0 <= dropout_rate < 1:
            raise DomainError("dropout_rate must lie in [0, 1)")
        self.input_dim = int(input_dim)
        self.hidden_units = int(hidden_units)
        self.forget_bias = float(forget_bias)
        self.dropout_rate = float(dropout_rate)
        self.dense_layers = int(dense_layers)
        self.dense_units = int(dense_units)
        self.activation = activation
        self.feature_mean = np.zeros(self.input_dim)
        self.feature_std = np.ones(self.input_dim)
        self.target_mean = 0.0
        self.target_std = 1.0
        self.window_hours = None
        self.params = {name: np.zeros(shape) for name, shape in self.param_shapes().items()}

    def param_shapes(self):
        d, h = self.input_dim, self.hidden_units
        shapes = {"W": (4 * h, d), "U": (4 * h, h), "b": (4 * h,)}
        prev = h
        for k in range(self.dense_layers):
            shapes[f"Wd{k}"] = (self.dense_units, prev)
            shapes[f"bd{k}"] = (self.dense_units,)
            prev = self.dense_units
        shapes["Wy"] = (1, prev)
        shapes["by"] = (1,)
        return shapes

    @classmethod
    def initialise(cls, input_dim, hidden_units, rng, **kwargs):
        """Uniform(+-1/sqrt(fan)) weights; forget-gate biases start at forget_bias."""
        model = cls(input_dim, hidden_units, **kwargs)
        h = model.hidden_units
        shapes = model.param_shapes()
        fan_in = {"W": h, "U": h, "b": h, "Wy": shapes["Wy"][1], "by": shapes["Wy"][1]}
        for k in range(model.dense_layers):
            fan_in[f"Wd{k}"] = fan_in[f"bd{k}"] = shapes[f"Wd{k}"][1]
        for name, shape in shapes.items():
            bound = 1.0 / math.sqrt(fan_in[name])
            model.params[name] = rng.uniform(-bound, bound, size=shape)
        model.params["b"][:h] = model.forget_bias
        return model

    def copy(self):
        twin = LstmModel(
            self.input_dim,
            self.hidden_units,
            forget_bias=self.forget_bias,
            dropout_rate=self.dropout_rate,
            dense_layers=self.dense_layers,
            dense_units=self.dense_units,
            activation=self.activation,
        )
        twin.params = {k: v.copy() for k, v in self.params.items()}
        twin.feature_mean = self.feature_mean.copy()
        twin.feature_std = self.feature_std.copy()
        twin.target_mean = self.target_mean
        twin.target_std = self.target_std
        twin.window_hours = self.window_hours
        return twin

    def n_params(self):
        return sum(v.size for v in self.params.values())


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def forward_batch(model, windows, *, train=False, rng=None):
    """
    Run a batch of windows (B x T x D) through the network.

    Dropout on the final hidden state is applied only when train is set.
    Returns: (predictions of shape (B,), cache for backward_batch)
    """
    x = np.asarray(windows, dtype=float)
    if x.ndim != 3 or x.shape[2] != model.input_dim:
        raise ShapeError(f"expected (batch, time, {model.input_dim}) windows, got {x.shape}")
    p = model.params
    batch, steps, _ = x.shape
    hu = model.hidden_units

    h = np.zeros((batch, hu))
    c = np.zeros((batch, hu))
    hs, cs, gates = [h], [c], []
    for t in range(steps):
        z = x[:, t, :] @ p["W"].T + h @ p["U"].T + p["b"]
        f = _sigmoid(z[:, :hu])
        i = _sigmoid(z[:, hu : 2 * hu])
        o = _sigmoid(z[:, 2 * hu : 3 * hu])
        g = np.tanh(z[:, 3 * hu :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates.append((f, i, o, g))
        hs.append(h)
        cs.append(c)

    mask = None
    a = h
    if train and model.dropout_rate > 0:
        if rng is None:
            raise DomainError("training-mode dropout needs an rng")
        keep = 1.0 - model.dropout_rate
        mask = (rng.random(h.shape) < keep) / keep
        a = h * mask

    acts, pres = [a], []
    for k in range(model.dense_layers):
        pre = a @ p[f"Wd{k}"].T + p[f"bd{k}"]
        a = _activate(model.activation, pre)
        pres.append(pre)
        acts.append(a)

    y = (a @ p["Wy"].T + p["by"])[:, 0]
    cache = {"x": x, "hs": hs, "cs": cs, "gates": gates, "mask": mask, "acts": acts, "pres": pres}
    return y, cache


def forward(model, window):
    """Single-window inference: returns (prediction, cache)."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ShapeError(f"expected a (time, {model.input_dim}) window, got {window.shape}")
    if model.window_hours is not None and window.shape[0] != model.window_hours:
        raise ShapeError(f"model was trained on {model.window_hours}-hour windows, got {window.shape[0]}")
    y, cache = forward_batch(model, window[None, :, :])
    return float(y[0]), cache


def backward_batch(model, cache, dy):
    """
    Backpropagation through time.

    dy: dLoss/dprediction per batch row.
    Returns: dict of gradients keyed like model.params
    """
    p = model.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dy = np.asarray(dy, dtype=float)[:, None]

    acts = cache["acts"]
    grads["Wy"] = dy.T @ acts[-1]
    grads["by"] = dy.sum(axis=0)
    da = dy @ p["Wy"]
    for k in reversed(range(model.dense_layers)):
        dpre = da * _activate_grad(model.activation, cache["pres"][k], acts[k + 1])
        grads[f"Wd{k}"] = dpre.T @ acts[k]
        grads[f"bd{k}"] = dpre.sum(axis=0)
        da = dpre @ p[f"Wd{k}"]

    dh = da if cache["mask"] is None else da * cache["mask"]
    dc = np.zeros_like(dh)
    x, hs, cs = cache["x"], cache["hs"], cache["cs"]
    for t in reversed(range(x.shape[1])):
        f, i, o, g = cache["gates"][t]
        tc = np.tanh(cs[t + 1])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc**2)
        df = dc * cs[t]
        di = dc * g
        dg = dc * i
        dz = np.concatenate(
            (df * f * (1.0 - f), di * i * (1.0 - i), do * o * (1.0 - o), dg * (1.0 - g**2)),
            axis=1,
        )
        grads["W"] += dz.T @ x[:, t, :]
        grads["U"] += dz.T @ hs[t]
        grads["b"] += dz.sum(axis=0)
        dh = dz @ p["U"]
        dc = dc * f
    return grads


def mse_loss_and_grad(model, windows, targets, *, train=False, rng=None):
    """Mean squared error over the batch and its parameter gradients."""
    targets = np.asarray(targets, dtype=float)
    y, cache = forward_batch(model, windows, train=train, rng=rng)
    err = y - targets
    loss = float(np.mean(err**2))
    grads = backward_batch(model, cache, 2.0 * err / len(err))
    return loss, grads


@dataclass(frozen=True)
class GradientCheck:
    """
    array_error: max over parameter arrays of ||g_a - g_n|| / (||g_a|| + ||g_n||)
    element_error: max over single entries of |g_a - g_n| / (|g_a| + |g_n|);
    entries differing by at most atol count as agreeing
    worst: (parameter name, flat index) of element_error
    """

    array_error: float
    element_error: float
    worst: tuple = ("", -1)


def gradient_check(model, window, target, *, backward=None, h=1e-5, atol=1e-7):
    """
    Compare analytic gradients with central finite differences.

    backward(model, window, target) -> grads overrides the analytic gradient source.

    Returns: GradientCheck
    """
    windows = np.asarray(window, dtype=float)[None, :, :]
    targets = np.array([float(target)])

    if backward is None:
        _, analytic = mse_loss_and_grad(model, windows, targets)
    else:
        analytic = backward(model, window, target)

    def loss_at():
        y, _ = forward_batch(model, windows)
        return float(np.mean((y - targets) ** 2))

    worst = 0.0
    element_worst, where = 0.0, ("", -1)
    for name, values in model.params.items():
        numeric = np.zeros_like(values)
        flat = values.reshape(-1)
        num_flat = numeric.reshape(-1)
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + h
            plus = loss_at()
            flat[j] = saved - h
            minus = loss_at()
            flat[j] = saved
            num_flat[j] = (plus - minus) / (2 * h)

        grad = np.asarray(analytic[name], dtype=float).reshape(-1)
        diff = np.abs(grad - num_flat)
        scale = np.abs(grad) + np.abs(num_flat)
        rel = np.where(diff > atol, diff / np.where(scale > 0, scale, 1.0), 0.0)
        if rel.size and rel.max() > element_worst:
            element_worst, where = float(rel.max()), (name, int(rel.argmax()))

        a_norm = np.linalg.norm(grad)
        n_norm = np.linalg.norm(numeric)
        if a_norm == 0 and n_norm == 0:
            continue
        worst = max(worst, float(np.linalg.norm(grad - num_flat) / (a_norm + n_norm)))
    return GradientCheck(array_error=worst, element_error=element_worst, worst=where)


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@dataclass
class StationHistory:
    """Hourly observations of one station starting at absolute hour start_hour."""

    station: int
    start_hour: int
    users: np.ndarray
    energy_j: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=float)
        self.energy_j = np.asarray(self.energy_j, dtype=float)
        if self.users.shape != self.energy_j.shape:
            raise ShapeError("users and energy_j must have equal length")

    def __len__(self):
        return len(self.users)

    def features(self):
        hours = (self.start_hour + np.arange(len(self))) % HOURS_PER_DAY
        angle = 2 * np.pi * hours / HOURS_PER_DAY
        return np.column_stack((self.users, self.energy_j, np.sin(angle), np.cos(angle)))

    def slice(self, start, stop=None):
        stop = len(self) if stop is None else stop
        return StationHistory(
            self.station, self.start_hour + start, self.users[start:stop], self.energy_j[start:stop]
        )


def history_from_demand(snapshots, energy_per_load):
    """Per-area histories: users u_a and offered-load energy e_BS * R_s."""
    per_area = {}
    for snap in snapshots:
        per_area.setdefault(snap.area_id, []).append(snap)
    histories = []
    for area, snaps in sorted(per_area.items()):
        snaps.sort(key=lambda s: s.hour)
        histories.append(
            StationHistory(
                station=area,
                start_hour=snaps[0].hour,
                users=[s.active_users for s in snaps],
                energy_j=[energy_per_load * s.service_requests for s in snaps],
            )
        )
    return histories


def make_windows(history, window_hours):
    """
    Sliding windows of window_hours feature rows; target is next-hour energy.

    Returns: (X of shape (N, window_hours, 4), y of shape (N,))
    """
    feats = history.features()
    n = len(history) - window_hours
    if n <= 0:
        return np.zeros((0, window_hours, len(FEATURES))), np.zeros(0)
    index = np.arange(window_hours)[None, :] + np.arange(n)[:, None]
    return feats[index], history.energy_j[window_hours:].copy()


@dataclass
class ForecastDataset:
    train: tuple = field(repr=False)
    valid: tuple = field(repr=False)
    test: tuple = field(repr=False)
    heldout: list = field(default_factory=list, repr=False)

    def sizes(self):
        return tuple(len(split[1]) for split in (self.train, self.valid, self.test))


def split_dataset(histories, window_hours, fractions=(0.7, 0.15, 0.15)):
    """
    Chronological train/valid/test split per station, pooled across stations.

    heldout keeps the raw history behind each station's test windows (context
    included) so it can be exported and re-windowed later.
    """
    parts = {"train": [], "valid": [], "test": []}
    heldout = []
    for history in histories:
        x, y = make_windows(history, window_hours)
        n = len(y)
        n_train = int(round(n * fractions[0]))
        n_valid = int(round(n * fractions[1]))
        cuts = (0, n_train, n_train + n_valid, n)
        for name, lo, hi in zip(("train", "valid", "test"), cuts[:-1], cuts[1:]):
            parts[name].append((x[lo:hi], y[lo:hi]))
        if n > cuts[2]:
            heldout.append(history.slice(cuts[2]))

    def pool(chunks):
        if not chunks:
            return np.zeros((0, window_hours, len(FEATURES))), np.zeros(0)
        return np.concatenate([c[0] for c in chunks]), np.concatenate([c[1] for c in chunks])

    return ForecastDataset(
        train=pool(parts["train"]), valid=pool(parts["valid"]), test=pool(parts["test"]), heldout=heldout
    )


def fit_normaliser(model, x_train, y_train):
    """Store z-score statistics of the training split in the model."""
    flat = x_train.reshape(-1, x_train.shape[-1])
    std = flat.std(axis=0)
    model.feature_mean = flat.mean(axis=0)
    model.feature_std = np.where(std > 0, std, 1.0)
    target_std = float(np.std(y_train))
    model.target_mean = float(np.mean(y_train))
    model.target_std = target_std if target_std > 0 else 1.0


def _norm_x(model, x):
    return (x - model.feature_mean) / model.feature_std


def _norm_y(model, y):
    return (y - model.target_mean) / model.target_std


def predict(model, windows, batch_size=1024):
    """Predictions in original units for raw (unnormalised) windows."""
    windows = np.asarray(windows, dtype=float)
    out = []
    for lo in range(0, len(windows), batch_size):
        y, _ = forward_batch(model, _norm_x(model, windows[lo : lo + batch_size]))
        out.append(y)
    if not out:
        return np.zeros(0)
    return np.concatenate(out) * model.target_std + model.target_mean


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    early_stop_patience: int = 10
    batch_size: int = 128
    learning_rate: float = 0.1
    window_hours: int = 24
    seed: int = 7
    hidden_units: int = 32
    forget_bias: float = 1.0
    grad_clip: float = 5.0

    def clean(self):
        errors = {}
        if self.batch_size < 1:
            errors["batch_size"] = ["must be >= 1"]
        if self.window_hours < 1:
            errors["window_hours"] = ["must be >= 1"]
        if self.learning_rate <= 0:
            errors["learning_rate"] = ["must be > 0"]
        if self.max_epochs < 1:
            errors["max_epochs"] = ["must be >= 1"]
        if self.early_stop_patience < 1:
            errors["early_stop_patience"] = ["must be >= 1"]
        if self.hidden_units < 1:
            errors["hidden_units"] = ["must be >= 1"]
        if self.grad_clip <= 0:
            errors["grad_clip"] = ["must be > 0"]
        return errors


@dataclass
class TrainResult:
    model: LstmModel
    train_loss: list
    valid_loss: list
    best_epoch: int

    @property
    def best_valid_loss(self):
        return self.valid_loss[self.best_epoch] if self.valid_loss else math.inf


def _clip(grads, limit):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > limit:
        scale = limit / total
        for g in grads.values():
            g *= scale
    return total


def _batched_loss(model, x, y, batch_size=1024):
    if len(y) == 0:
        return math.nan
    total = 0.0
    for lo in range(0, len(y), batch_size):
        pred, _ = forward_batch(model, x[lo : lo + batch_size])
        total += float(np.sum((pred - y[lo : lo + batch_size]) ** 2))
    return total / len(y)


def train(model, dataset, cfg):
    """
    Mini-batch gradient descent with backpropagation through time.

    Process:
    1. Fit z-score statistics on the training split (stored in the model)
    2. Each epoch: shuffle training windows, SGD with global-norm clipping
    3. Track validation loss; stop after early_stop_patience epochs without improvement
    4. Restore the best-validation weights

    Returns: TrainResult with per-epoch train/valid loss curves
    Raises: DivergenceError on a non-finite loss
    """
    x_train, y_train = dataset.train
    if len(y_train) == 0:
        raise DomainError("training split is empty")
    fit_normaliser(model, x_train, y_train)
    model.window_hours = cfg.window_hours
    xt, yt = _norm_x(model, x_train), _norm_y(model, y_train)
    x_valid, y_valid = dataset.valid
    xv, yv = _norm_x(model, x_valid), _norm_y(model, y_valid)

    rng = np.random.default_rng(cfg.seed)
    train_curve, valid_curve = [], []
    best_params = {k: v.copy() for k, v in model.params.items()}
    best_loss, best_epoch, stale = math.inf, 0, 0

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(yt))
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            loss, grads = mse_loss_and_grad(model, xt[batch], yt[batch], train=True, rng=rng)
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            _clip(grads, cfg.grad_clip)
            for name, g in grads.items():
                model.params[name] -= cfg.learning_rate * g
            epoch_loss += loss * len(batch)
        epoch_loss /= len(order)

        valid_loss = _batched_loss(model, xv, yv) if len(yv) else epoch_loss
        if not (math.isfinite(epoch_loss) and math.isfinite(valid_loss)):
            raise DivergenceError(epoch, valid_loss if math.isfinite(epoch_loss) else epoch_loss)
        train_curve.append(epoch_loss)
        valid_curve.append(valid_loss)
        logger.debug("epoch %d train=%.6f valid=%.6f", epoch, epoch_loss, valid_loss)

        if valid_loss < best_loss:
            best_loss, best_epoch, stale = valid_loss, epoch, 0
            best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break

    model.params = best_params
    return TrainResult(model, train_curve, valid_curve, best_epoch)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForecastMetrics:
    """r2 is None when the target has zero variance."""

    rmse: float
    mae: float
    r2: float | None

    def as_dict(self):
        return {"rmse": self.rmse, "mae": self.mae, "r2": self.r2, "r2_defined": self.r2 is not None}


def metrics_from_predictions(targets, predictions):
    targets = np.asarray(targets, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if len(targets) == 0:
        raise DomainError("evaluation needs at least one sample")
    if targets.shape != predictions.shape:
        raise ShapeError("targets and predictions differ in shape")
    err = predictions - targets
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    r2 = None if ss_tot == 0 else 1.0 - float(np.sum(err**2)) / ss_tot
    return ForecastMetrics(rmse=rmse, mae=mae, r2=r2)


def evaluate(model, test_series):
    """test_series: (windows, targets) in original units."""
    windows, targets = test_series
    return metrics_from_predictions(targets, predict(model, windows))


# ---------------------------------------------------------------------------
# Checkpoint
# ---------------------------------------------------------------------------


def checkpoint_dict(model):
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": model.input_dim,
        "hidden_units": model.hidden_units,
        "forget_bias": model.forget_bias,
        "dropout_rate": model.dropout_rate,
        "dense_layers": model.dense_layers,
        "dense_units": model.dense_units,
        "activation": model.activation,
        "features": list(FEATURES),
        "window_hours": model.window_hours,
        "normaliser": {
            "feature_mean": model.feature_mean.tolist(),
            "feature_std": model.feature_std.tolist(),
            "target_mean": model.target_mean,
            "target_std": model.target_std,
        },
        "params": {
            name: {"shape": list(values.shape), "data": values.reshape(-1).tolist()}
            for name, values in model.params.items()
        },
    }


def save_checkpoint(model, path):
    Path(path).write_text(json.dumps(checkpoint_dict(model)) + "\n", encoding="utf-8")


def model_from_checkpoint(data):
    """Rebuild a model from a parsed checkpoint; every array shape is verified."""
    if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a dronecell LSTM checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {data.get('version')!r}")
    try:
        model = LstmModel(
            data["input_dim"],
            data["hidden_units"],
            forget_bias=data["forget_bias"],
            dropout_rate=data["dropout_rate"],
            dense_layers=data["dense_layers"],
            dense_units=data["dense_units"],
            activation=data["activation"],
        )
        norm = data["normaliser"]
        model.feature_mean = np.asarray(norm["feature_mean"], dtype=float)
        model.feature_std = np.asarray(norm["feature_std"], dtype=float)
        model.target_mean = float(norm["target_mean"])
        model.target_std = float(norm["target_std"])
        window = data.get("window_hours")
        model.window_hours = None if window is None else int(window)
        stored = data["params"]
    except (KeyError, TypeError, ValueError, DomainError, ShapeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc

    if model.feature_mean.shape != (model.input_dim,) or model.feature_std.shape != (model.input_dim,):
        raise CheckpointError("normaliser does not match input_dim")
    expected = model.param_shapes()
    if set(stored) != set(expected):
        raise CheckpointError(f"parameter set mismatch: {sorted(set(stored) ^ set(expected))}")
    for name, shape in expected.items():
        try:
            values = np.asarray(stored[name]["data"], dtype=float)
            declared = tuple(stored[name]["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"parameter {name}: {exc}") from exc
        if declared != shape or values.size != math.prod(shape):
            raise CheckpointError(f"parameter {name}: expected shape {shape}, got {declared}")
        if not np.all(np.isfinite(values)):
            raise CheckpointError(f"parameter {name} holds non-finite values")
        model.params[name] = values.reshape(shape)
    return model


def load_checkpoint(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return model_from_checkpoint(data)
