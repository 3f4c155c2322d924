"""Sparse ReLU networks with shifted activations.

A network of depth ``L`` is ``x -> W_{L+1} s_{v_L} ... W_2 s_{v_1} W_1 x`` where
``s_v(y)_i = max(y_i - v_i, 0)``. Weights are stored densely; sparsity is a
measured quantity.
"""
from dataclasses import dataclass, field
from functools import cached_property
import json

import numpy as np

from ._accel import USE_NUMBA, njit
from .exceptions import ParameterError, ParseError, ShapeError
from .grid import iter_chunks, tensor_grid


@njit
def _eval_sparse(X, widths, row_off, indptr, indices, data, shift_off, shifts):
    n = X.shape[0]
    nl = widths.shape[0] - 1
    maxw = 0
    for w in widths:
        if w > maxw:
            maxw = w
    out = np.empty((n, widths[nl]))
    a = np.empty(maxw)
    b = np.empty(maxw)
    for i in range(n):
        for k in range(widths[0]):
            a[k] = X[i, k]
        for layer in range(nl):
            base = row_off[layer]
            last = layer == nl - 1
            for r in range(widths[layer + 1]):
                acc = 0.0
                for z in range(indptr[base + r], indptr[base + r + 1]):
                    acc += data[z] * a[indices[z]]
                if not last:
                    acc -= shifts[shift_off[layer] + r]
                    if acc < 0.0:
                        acc = 0.0
                b[r] = acc
            a, b = b, a
        for k in range(widths[nl]):
            out[i, k] = a[k]
    return out


def _freeze(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Layers are ``(W, v)`` pairs; the last pair has ``v = None``."""

    layers: tuple

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ShapeError("a network needs at least the output layer")
        frozen = []
        prev = None
        for idx, (W, v) in enumerate(self.layers):
            W = _freeze(W)
            if W.ndim != 2:
                raise ShapeError(f"layer {idx}: W must be a matrix")
            if prev is not None and W.shape[1] != prev:
                raise ShapeError(f"layer {idx}: W has {W.shape[1]} columns, expected {prev}")
            last = idx == len(self.layers) - 1
            if last:
                if v is not None:
                    raise ShapeError("the output layer carries no shift")
            else:
                if v is None:
                    raise ShapeError(f"hidden layer {idx} needs a shift vector")
                v = _freeze(v)
                if v.shape != (W.shape[0],):
                    raise ShapeError(f"layer {idx}: shift has shape {v.shape}, expected ({W.shape[0]},)")
            frozen.append((W, v))
            prev = W.shape[0]
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def depth(self):
        return len(self.layers) - 1

    @property
    def widths(self):
        return (self.layers[0][0].shape[1],) + tuple(W.shape[0] for W, _ in self.layers)

    @property
    def input_dim(self):
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self):
        return self.layers[-1][0].shape[0]

    def sparsity(self):
        s = 0
        for W, v in self.layers:
            s += int(np.count_nonzero(W))
            if v is not None:
                s += int(np.count_nonzero(v))
        return s

    def max_abs_param(self):
        m = 0.0
        for W, v in self.layers:
            if W.size:
                m = max(m, float(np.max(np.abs(W))))
            if v is not None and v.size:
                m = max(m, float(np.max(np.abs(v))))
        return m

    @cached_property
    def _csr(self):
        widths = np.array(self.widths, dtype=np.int64)
        row_off, indptr, indices, data, shift_off, shifts = [], [], [], [], [], []
        nnz = rows = nsh = 0
        for W, v in self.layers:
            r, c = np.nonzero(W)
            counts = np.bincount(r, minlength=W.shape[0])
            row_off.append(rows)
            indptr.append(nnz + np.concatenate([[0], np.cumsum(counts)]))
            indices.append(c)
            data.append(W[r, c])
            rows += W.shape[0] + 1
            nnz += len(c)
            shift_off.append(nsh)
            if v is not None:
                shifts.append(v)
                nsh += len(v)
        return (
            widths,
            np.array(row_off, dtype=np.int64),
            np.concatenate(indptr).astype(np.int64),
            np.concatenate(indices).astype(np.int64),
            np.concatenate(data).astype(np.float64),
            np.array(shift_off, dtype=np.int64),
            np.concatenate(shifts) if shifts else np.zeros(0),
        )

    def _forward_dense(self, X):
        h = X
        for W, v in self.layers:
            h = h @ W.T
            if v is not None:
                h = np.maximum(h - v, 0.0)
        return h

    def forward(self, X):
        """Batch evaluation: ``X`` of shape (n, p_0) -> (n, p_{L+1})."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"expected inputs of shape (n, {self.input_dim}), got {X.shape}")
        if USE_NUMBA:
            return _eval_sparse(np.ascontiguousarray(X), *self._csr)
        return self._forward_dense(X)

    def eval(self, x):
        """Evaluate at one point (1-D ``x``) or a batch (2-D ``x``).

        Scalar-output networks return a float for a single point and a 1-D
        array for a batch.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            if x.shape[0] != self.input_dim:
                raise ShapeError(f"expected input of length {self.input_dim}, got {x.shape[0]}")
            x = x[None, :]
        out = self.forward(x)
        if self.output_dim == 1:
            out = out[:, 0]
            return float(out[0]) if single else out
        return out[0] if single else out

    __call__ = eval

    def hidden_activations(self, X):
        """Post-activation values of every hidden layer for a batch."""
        h = np.asarray(X, dtype=np.float64)
        acts = []
        for W, v in self.layers[:-1]:
            h = np.maximum(h @ W.T - v, 0.0)
            acts.append(h)
        return acts

    def scale_output(self, c):
        W, _ = self.layers[-1]
        return ReluNetwork(self.layers[:-1] + ((c * W, None),))

    def structurally_equal(self, other):
        if self.widths != other.widths:
            return False
        for (W1, v1), (W2, v2) in zip(self.layers, other.layers):
            if not np.array_equal(W1, W2):
                return False
            if (v1 is None) != (v2 is None) or (v1 is not None and not np.array_equal(v1, v2)):
                return False
        return True

    # -- serialization -------------------------------------------------
    def to_dict(self):
        return {
            "depth": self.depth,
            "widths": list(self.widths),
            "layers": [
                {"W": W.tolist(), "v": None if v is None else v.tolist()} for W, v in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict):
            raise ParseError("network document must be an object", "$")
        for key in ("depth", "widths", "layers"):
            if key not in obj:
                raise ParseError(f"missing key {key!r}", "$")
        layers = obj["layers"]
        if not isinstance(layers, list) or not layers:
            raise ParseError("layers must be a non-empty list", "$.layers")
        parsed = []
        for i, layer in enumerate(layers):
            path = f"$.layers[{i}]"
            if not isinstance(layer, dict) or "W" not in layer or "v" not in layer:
                raise ParseError("layer needs keys 'W' and 'v'", path)
            try:
                W = np.array(layer["W"], dtype=np.float64)
                v = None if layer["v"] is None else np.array(layer["v"], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"non-numeric entry: {exc}", path) from None
            if W.ndim != 2:
                raise ParseError("W must be a rectangular nested array", path + ".W")
            parsed.append((W, v))
        try:
            net = cls(tuple(parsed))
        except ShapeError as exc:
            raise ParseError(str(exc), "$.layers") from None
        if net.depth != obj["depth"]:
            raise ParseError(f"depth {obj['depth']} disagrees with {net.depth} layers", "$.depth")
        if list(net.widths) != list(obj["widths"]):
            raise ParseError("widths disagree with layer shapes", "$.widths")
        return net


def serialize(net):
    return json.dumps(net.to_dict()).encode("utf-8")


def deserialize(data):
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("stream is not UTF-8", exc.start) from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.pos) from None
    return ReluNetwork.from_dict(obj)


def save(net, path):
    with open(path, "wb") as fh:
        fh.write(serialize(net))


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())


# -- class membership ---------------------------------------------------

@dataclass(frozen=True)
class Architecture:
    L: int
    p: tuple
    s: int
    F: float

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(int(w) for w in self.p))
        if len(self.p) != self.L + 2:
            raise ParameterError(f"width vector needs L+2 = {self.L + 2} entries")
        if self.F <= 0:
            raise ParameterError("F must be positive")
        if self.s > self.total_params():
            raise ParameterError(f"s = {self.s} exceeds the {self.total_params()} parameters of a dense net")

    def total_params(self):
        p = self.p
        return sum((p[i] + 1) * p[i + 1] for i in range(self.L + 1)) - p[-1]


@dataclass
class ValidationReport:
    max_abs_param: float
    params_ok: bool
    sparsity: int
    sparsity_ok: bool
    sup_norm: float
    sup_ok: bool
    depth: int
    widths: tuple
    architecture_ok: bool
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.params_ok and self.sparsity_ok and self.sup_ok and self.architecture_ok


def validate_class(net, arch, grid_resolution=11):
    if grid_resolution < 2:
        raise ParameterError("grid_resolution must be at least 2")
    X = tensor_grid(net.input_dim, grid_resolution)
    sup = max(float(np.max(np.abs(net.forward(chunk)))) for chunk in iter_chunks(X))
    max_param = net.max_abs_param()
    s = net.sparsity()
    arch_ok = net.depth == arch.L and len(net.widths) == len(arch.p) and all(
        a <= b for a, b in zip(net.widths, arch.p)
    ) and net.widths[0] == arch.p[0] and net.widths[-1] == arch.p[-1]
    return ValidationReport(
        max_abs_param=max_param,
        params_ok=max_param <= 1.0,
        sparsity=s,
        sparsity_ok=s <= arch.s,
        sup_norm=sup,
        sup_ok=sup <= arch.F,
        depth=net.depth,
        widths=net.widths,
        architecture_ok=arch_ok,
    )


# -- composition --------------------------------------------------------

def pad_depth(net, extra, signed=False):
    """Append ``extra`` identity hidden layers in front of the output.

    The unsigned variant uses one weight-1 unit per output channel and is exact
    only when the outputs are non-negative on the domain of interest. The signed
    variant carries ``sigma(y) - sigma(-y)`` with two units per channel.
    """
    if extra <= 0:
        return net
    Wout, _ = net.layers[-1]
    k = Wout.shape[0]
    layers = list(net.layers[:-1])
    if signed:
        layers.append((np.vstack([Wout, -Wout]), np.zeros(2 * k)))
        for _ in range(extra - 1):
            layers.append((np.eye(2 * k), np.zeros(2 * k)))
        layers.append((np.hstack([np.eye(k), -np.eye(k)]), None))
    else:
        layers.append((Wout, np.zeros(k)))
        for _ in range(extra - 1):
            layers.append((np.eye(k), np.zeros(k)))
        layers.append((np.eye(k), None))
    return ReluNetwork(tuple(layers))


def _block_diag(mats):
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def parallel_join(nets, equalize_depth=True, signed=False):
    """Run networks side by side on a shared input; outputs are stacked."""
    nets = list(nets)
    if not nets:
        raise ParameterError("cannot join an empty list of networks")
    d = nets[0].input_dim
    if any(n.input_dim != d for n in nets):
        raise ShapeError("all networks must share the input dimension")
    depth = max(n.depth for n in nets)
    if any(n.depth != depth for n in nets):
        if not equalize_depth:
            raise ShapeError("depths differ and equalize_depth is off")
        nets = [pad_depth(n, depth - n.depth, signed=signed) for n in nets]
    layers = []
    for idx in range(depth + 1):
        Ws = [n.layers[idx][0] for n in nets]
        W = np.vstack(Ws) if idx == 0 else _block_diag(Ws)
        v = None if idx == depth else np.concatenate([n.layers[idx][1] for n in nets])
        layers.append((W, v))
    return ReluNetwork(tuple(layers))
