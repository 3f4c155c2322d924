"""Least-squares training of dense ReLU networks with Adam.

Parameters live in one flat vector: for each layer the row-major weight
matrix followed by its shift vector (the output layer has no shift).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from ._accel import USE_NUMBA, njit
from .exceptions import ParameterError, ShapeError, TrainingError
from .relu_net import ReluNetwork

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8

INITIALIZERS = ("glorot_modified", "increasing_glorot")


@dataclass(frozen=True)
class TrainConfig:
    widths: tuple
    learning_rate: float = 0.001
    decay: float = 0.00021
    epochs: int = 1000
    batch_size: int = 32
    restarts: int = 5
    initializer: str = "glorot_modified"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ParameterError("widths need at least input and output sizes, all positive")
        if self.widths[-1] != 1:
            raise ParameterError("the output width must be 1")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be positive")
        if self.decay < 0:
            raise ParameterError("decay must be non-negative")
        if self.restarts < 1:
            raise ParameterError("restarts must be at least 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ParameterError("epochs must be >= 0 and batch_size >= 1")
        if self.initializer not in INITIALIZERS:
            raise ParameterError(f"unknown initializer {self.initializer!r}")

    @property
    def depth(self):
        return len(self.widths) - 2


# -- layout ---------------------------------------------------------------

def _layout(widths):
    widths = np.asarray(widths, dtype=np.int64)
    nl = len(widths) - 1
    w_off = np.zeros(nl, dtype=np.int64)
    v_off = np.zeros(nl, dtype=np.int64)
    pos = 0
    for l in range(nl):
        w_off[l] = pos
        pos += widths[l] * widths[l + 1]
        v_off[l] = pos
        if l < nl - 1:
            pos += widths[l + 1]
    return widths, w_off, v_off, pos


def net_to_flat(net):
    parts = []
    for W, v in net.layers:
        parts.append(W.ravel())
        if v is not None:
            parts.append(v)
    return np.concatenate(parts).astype(np.float64)


def flat_to_net(theta, widths):
    widths, w_off, v_off, size = _layout(widths)
    if theta.shape != (size,):
        raise ShapeError(f"expected {size} parameters, got {theta.shape}")
    layers = []
    nl = len(widths) - 1
    for l in range(nl):
        W = theta[w_off[l]:w_off[l] + widths[l] * widths[l + 1]].reshape(widths[l + 1], widths[l])
        v = theta[v_off[l]:v_off[l] + widths[l + 1]] if l < nl - 1 else None
        layers.append((W, v))
    return ReluNetwork(tuple(layers))


# -- initializers ---------------------------------------------------------

def _glorot_bound(fan_in, fan_out):
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_glorot_modified(widths, seed):
    """Weights and shifts of layer l uniform on [-b_l, b_l], b_l = sqrt(6/(m_{l-1}+m_l))."""
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(len(widths) - 1):
        b = _glorot_bound(widths[l], widths[l + 1])
        W = rng.uniform(-b, b, size=(widths[l + 1], widths[l]))
        v = rng.uniform(-b, b, size=widths[l + 1]) if l < len(widths) - 2 else None
        layers.append((W, v))
    return ReluNetwork(tuple(layers))


def init_increasing_glorot(widths, seed):
    """Weights uniform on [0, b_l] and biases uniform on [-b_l, 0].

    Units are ``max(w x + bias, 0)`` with ``bias = -v``, so every kink
    ``-bias / w`` of the first layer lies to the right of the origin.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(len(widths) - 1):
        b = _glorot_bound(widths[l], widths[l + 1])
        W = rng.uniform(0.0, b, size=(widths[l + 1], widths[l]))
        v = -rng.uniform(-b, 0.0, size=widths[l + 1]) if l < len(widths) - 2 else None
        layers.append((W, v))
    return ReluNetwork(tuple(layers))


def initialize(config, seed):
    if config.initializer == "increasing_glorot":
        return init_increasing_glorot(config.widths, seed)
    return init_glorot_modified(config.widths, seed)


# -- loss and gradient ------------------------------------------------------

def _forward_store(theta, widths, w_off, v_off, X):
    nl = len(widths) - 1
    acts = [X]
    a = X
    for l in range(nl):
        W = theta[w_off[l]:w_off[l] + widths[l] * widths[l + 1]].reshape(widths[l + 1], widths[l])
        h = a @ W.T
        if l < nl - 1:
            a = np.maximum(h - theta[v_off[l]:v_off[l] + widths[l + 1]], 0.0)
            acts.append(a)
        else:
            a = h
    return acts, a[:, 0]


def _loss_grad_numpy(theta, widths, w_off, v_off, X, y):
    acts, f = _forward_store(theta, widths, w_off, v_off, X)
    r = y - f
    loss = float(np.mean(r * r))
    grad = np.zeros_like(theta)
    delta = (-2.0 / len(y)) * r[:, None]
    nl = len(widths) - 1
    for l in range(nl - 1, -1, -1):
        size = widths[l] * widths[l + 1]
        grad[w_off[l]:w_off[l] + size] = (delta.T @ acts[l]).ravel()
        if l > 0:
            W = theta[w_off[l]:w_off[l] + size].reshape(widths[l + 1], widths[l])
            delta = (delta @ W) * (acts[l] > 0.0)
            grad[v_off[l - 1]:v_off[l - 1] + widths[l]] = -delta.sum(axis=0)
    return loss, grad


@njit
def _loss_grad_kernel(theta, widths, w_off, v_off, X, y, idx, grad, buf, dbuf, unit_off):
    """Accumulates the mean-squared-error gradient over rows ``idx`` into ``grad``."""
    nl = widths.shape[0] - 1
    m = idx.shape[0]
    for z in range(grad.shape[0]):
        grad[z] = 0.0
    loss = 0.0
    for ii in range(m):
        i = idx[ii]
        for k in range(widths[0]):
            buf[k] = X[i, k]
        f = 0.0
        for l in range(nl):
            src = unit_off[l]
            dst = unit_off[l + 1]
            for r in range(widths[l + 1]):
                acc = 0.0
                base = w_off[l] + r * widths[l]
                for c in range(widths[l]):
                    acc += theta[base + c] * buf[src + c]
                if l < nl - 1:
                    acc -= theta[v_off[l] + r]
                    if acc < 0.0:
                        acc = 0.0
                    buf[dst + r] = acc
                else:
                    f = acc
        res = y[i] - f
        loss += res * res
        g_out = -2.0 * res / m
        # backward: dbuf holds dL/d(post-activation) for the current layer
        l = nl - 1
        src = unit_off[l]
        for c in range(widths[l]):
            grad[w_off[l] + c] += g_out * buf[src + c]
            dbuf[src + c] = g_out * theta[w_off[l] + c]
        for l in range(nl - 2, -1, -1):
            src = unit_off[l]
            dst = unit_off[l + 1]
            for c in range(widths[l]):
                dbuf[src + c] = 0.0
            for r in range(widths[l + 1]):
                if buf[dst + r] > 0.0:
                    delta = dbuf[dst + r]
                else:
                    delta = 0.0
                grad[v_off[l] + r] -= delta
                base = w_off[l] + r * widths[l]
                for c in range(widths[l]):
                    grad[base + c] += delta * buf[src + c]
                    dbuf[src + c] += delta * theta[base + c]
    return loss / m


def _unit_offsets(widths):
    return np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)


def loss_and_gradient(net, X, y):
    """Mean squared error on a batch and its gradient as a flat vector."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ShapeError("batch must be non-empty with matching X and y")
    if net.output_dim != 1:
        raise ShapeError("training targets scalar-output networks")
    theta = net_to_flat(net)
    widths, w_off, v_off, _ = _layout(net.widths)
    if USE_NUMBA:
        grad = np.zeros_like(theta)
        uo = _unit_offsets(widths)
        buf = np.zeros(uo[-1])
        dbuf = np.zeros(uo[-1])
        idx = np.arange(X.shape[0], dtype=np.int64)
        loss = _loss_grad_kernel(theta, widths, w_off, v_off, X, y, idx, grad, buf, dbuf, uo)
        return float(loss), grad
    return _loss_grad_numpy(theta, widths, w_off, v_off, X, y)


def full_loss(theta, widths, X, y):
    widths, w_off, v_off, _ = _layout(widths)
    with np.errstate(over="ignore", invalid="ignore"):
        _, f = _forward_store(theta, widths, w_off, v_off, X)
        return float(np.mean((y - f) ** 2))


# -- Adam -------------------------------------------------------------------

def adam_update(theta, grad, m, v, t, lr, decay):
    """One Adam step in place at global step ``t`` (0-based)."""
    lr_t = lr / (1.0 + decay * t)
    m *= BETA1
    m += (1.0 - BETA1) * grad
    v *= BETA2
    v += (1.0 - BETA2) * grad * grad
    mhat = m / (1.0 - BETA1 ** (t + 1))
    vhat = v / (1.0 - BETA2 ** (t + 1))
    theta -= lr_t * mhat / (np.sqrt(vhat) + ADAM_EPS)


@njit(nogil=True)
def _train_kernel(theta, widths, w_off, v_off, X, y, perms, batch, lr, decay, losses):
    """Runs all epochs; ``perms[e]`` is the row order of epoch e.

    Records the full-data loss after each epoch in ``losses``. Returns the
    number of completed epochs (fewer if the loss became non-finite).
    """
    n = X.shape[0]
    P = theta.shape[0]
    uo = np.zeros(widths.shape[0] + 1, dtype=np.int64)
    for l in range(widths.shape[0]):
        uo[l + 1] = uo[l] + widths[l]
    buf = np.zeros(uo[-1])
    dbuf = np.zeros(uo[-1])
    grad = np.zeros(P)
    m = np.zeros(P)
    v = np.zeros(P)
    all_idx = np.arange(n)
    t = 0
    for e in range(perms.shape[0]):
        for start in range(0, n, batch):
            stop = min(start + batch, n)
            _loss_grad_kernel(theta, widths, w_off, v_off, X, y, perms[e, start:stop], grad, buf, dbuf, uo)
            lr_t = lr / (1.0 + decay * t)
            c1 = 1.0 - BETA1 ** (t + 1)
            c2 = 1.0 - BETA2 ** (t + 1)
            for z in range(P):
                g = grad[z]
                m[z] = BETA1 * m[z] + (1.0 - BETA1) * g
                v[z] = BETA2 * v[z] + (1.0 - BETA2) * g * g
                theta[z] -= lr_t * (m[z] / c1) / (math.sqrt(v[z] / c2) + ADAM_EPS)
            t += 1
        loss = _loss_grad_kernel(theta, widths, w_off, v_off, X, y, all_idx, grad, buf, dbuf, uo)
        losses[e] = loss
        if not np.isfinite(loss):
            return e + 1
    return perms.shape[0]


def _train_numpy(theta, widths, w_off, v_off, X, y, perms, batch, lr, decay, losses):
    P = theta.shape[0]
    m = np.zeros(P)
    v = np.zeros(P)
    t = 0
    n = X.shape[0]
    # divergence is detected through the recorded loss, not through warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for e in range(perms.shape[0]):
            for start in range(0, n, batch):
                rows = perms[e, start:start + batch]
                _, grad = _loss_grad_numpy(theta, widths, w_off, v_off, X[rows], y[rows])
                adam_update(theta, grad, m, v, t, lr, decay)
                t += 1
            _, f = _forward_store(theta, widths, w_off, v_off, X)
            losses[e] = float(np.mean((y - f) ** 2))
            if not np.isfinite(losses[e]):
                return e + 1
    return perms.shape[0]


# -- driver -------------------------------------------------------------------

@dataclass
class RestartRecord:
    index: int
    seed: list
    initial_loss: float
    final_loss: float
    losses: list
    failed: bool


@dataclass
class TrainReport:
    config: dict
    restarts: list = field(default_factory=list)
    selected: int = -1
    accelerated: bool = USE_NUMBA

    @property
    def selected_loss(self):
        return self.restarts[self.selected].final_loss

    def to_dict(self):
        return asdict(self)


def _run_restart(k, data_X, data_y, config):
    seed = [int(config.seed), k]
    rng = np.random.default_rng(seed)
    net = initialize(config, rng.integers(2**63))
    widths, w_off, v_off, _ = _layout(config.widths)
    theta = net_to_flat(net)
    initial = full_loss(theta, config.widths, data_X, data_y)
    n = data_X.shape[0]
    perms = np.empty((config.epochs, n), dtype=np.int64)
    for e in range(config.epochs):
        perms[e] = rng.permutation(n)
    losses = np.full(config.epochs, np.nan)
    runner = _train_kernel if USE_NUMBA else _train_numpy
    done = runner(theta, widths, w_off, v_off, data_X, data_y, perms,
                  int(config.batch_size), float(config.learning_rate), float(config.decay), losses)
    final = float(losses[done - 1]) if done else initial
    failed = not (np.isfinite(final) and np.all(np.isfinite(theta)))
    rec = RestartRecord(k, seed, initial, final, [float(x) for x in losses[:done]], failed)
    return rec, theta


def train(data, config):
    """Train ``config.restarts`` networks and keep the one with the smallest final loss.

    Returns ``(network, TrainReport)``. Restarts whose loss turns non-finite are
    marked failed; if all fail a TrainingError is raised.
    """
    X = np.ascontiguousarray(data.X, dtype=np.float64)
    y = np.ascontiguousarray(data.Y, dtype=np.float64).ravel()
    if X.shape[1] != config.widths[0]:
        raise ShapeError(f"data has d={X.shape[1]} but the architecture expects {config.widths[0]} inputs")

    def job(k):
        return _run_restart(k, X, y, config)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(job, range(config.restarts)))
    else:
        results = [job(k) for k in range(config.restarts)]

    report = TrainReport(config=asdict(config))
    best, best_theta = None, None
    for rec, theta in results:
        report.restarts.append(rec)
        if rec.failed:
            continue
        if best is None or rec.final_loss < best.final_loss:
            best, best_theta = rec, theta
    if best is None:
        raise TrainingError("every restart diverged")
    report.selected = best.index
    return flat_to_net(best_theta, config.widths), report
