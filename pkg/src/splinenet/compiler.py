"""Compile MARS and Faber-Schauder models into explicit ReLU networks.

The product of ``r`` numbers in [0,1] is computed by a balanced binary tree of
pairwise multipliers. A pairwise unit uses ``xy = s(u) - s(w)`` with
``u = (x+y)/2``, ``w = |x-y|/2`` and ``s`` the dyadic piecewise-linear
interpolant of ``z^2`` built from scaled tent maps
``T_k(z) = (z/2)_+ - (z - 2^(1-2k))_+``. Every weight is in {+-1, +-1/2} and every
hidden value stays in [0, 1].
"""
from dataclasses import asdict, dataclass, field
import hashlib
import math

import numpy as np

from .exceptions import ModelError, ParameterError
from .faber_schauder import cardinality, cardinality_displayed, fs_to_mars
from .grid import iter_chunks, tensor_grid
from .relu_net import ReluNetwork, _block_diag


def ceil_log2(x):
    """Smallest integer c >= 0 with 2^c >= x."""
    if x <= 1:
        return 0
    c = math.ceil(math.log2(x))
    while 2 ** (c - 1) >= x:
        c -= 1
    while 2**c < x:
        c += 1
    return c


# -- building blocks ----------------------------------------------------

def _pair_block(n_tents, in_dim, ia, ib):
    """Hidden layers (n_tents + 1 of them) of one pairwise multiplier.

    The last layer has a single unit holding the product estimate.
    """
    m = n_tents
    W = np.zeros((4, in_dim))
    # U = s(u), Qu = s(u - 1/2), Wp = s((x-y)/2), Wm = s((y-x)/2)
    W[0, ia] += 0.5; W[0, ib] += 0.5
    W[1, ia] += 0.5; W[1, ib] += 0.5
    W[2, ia] += 0.5; W[2, ib] -= 0.5
    W[3, ia] -= 0.5; W[3, ib] += 0.5
    layers = [(W, np.array([0.0, 0.5, 0.0, 0.0]))]
    # Linear forms on the previous layer, per channel: carry, R (current tent), S (running sum).
    carry = {"u": {0: 1.0}, "w": {2: 1.0, 3: 1.0}}
    R = {"u": {0: 0.5, 1: -1.0}, "w": {2: 0.5, 3: 0.5}}
    S = {"u": {}, "w": {}}
    width = 4
    for level in range(1, m):
        shift = 2.0 ** (-2 * level - 1)
        rows, v = [], []
        new_carry, new_R, new_S = {}, {}, {}
        for ch in ("u", "w"):
            base = len(rows)
            rows.append(carry[ch]); v.append(0.0)
            rows.append(R[ch]); v.append(0.0)
            rows.append(R[ch]); v.append(shift)
            summed = dict(S[ch])
            for key, val in R[ch].items():
                summed[key] = summed.get(key, 0.0) + val
            rows.append(summed); v.append(0.0)
            new_carry[ch] = {base: 1.0}
            new_R[ch] = {base + 1: 0.5, base + 2: -1.0}
            new_S[ch] = {base + 3: 1.0}
        Wl = np.zeros((len(rows), width))
        for r, form in enumerate(rows):
            for key, val in form.items():
                Wl[r, key] += val
        layers.append((Wl, np.array(v)))
        carry, R, S = new_carry, new_R, new_S
        width = len(rows)
    # output unit: [c_u - S_u - R_u] - [c_w - S_w - R_w]
    out = np.zeros((1, width))
    for ch, sign in (("u", 1.0), ("w", -1.0)):
        for form, f in ((carry[ch], 1.0), (S[ch], -1.0), (R[ch], -1.0)):
            for key, val in form.items():
                out[0, key] += sign * f * val
    layers.append((out, np.zeros(1)))
    return layers


def _carry_block(n_layers, in_dim, ia):
    W = np.zeros((1, in_dim))
    W[0, ia] = 1.0
    layers = [(W, np.zeros(1))]
    layers += [(np.ones((1, 1)), np.zeros(1)) for _ in range(n_layers - 1)]
    return layers


def _side_by_side(blocks):
    n = len(blocks[0])
    out = []
    for i in range(n):
        Ws = [b[i][0] for b in blocks]
        W = np.vstack(Ws) if i == 0 else _block_diag(Ws)
        out.append((W, np.concatenate([b[i][1] for b in blocks])))
    return out


def mult_layers(r, N, in_dim=None, inputs=None):
    """Hidden layers of Mult_N^r reading units ``inputs`` of a layer of width ``in_dim``.

    Returns (N+5) * ceil(log2 r) layers; the last has one unit. For r = 1 the
    list is empty.
    """
    in_dim = r if in_dim is None else in_dim
    cur = list(range(r)) if inputs is None else list(inputs)
    layers = []
    per_level = N + 5
    while len(cur) > 1:
        blocks = []
        for i in range(0, len(cur) - 1, 2):
            blocks.append(_pair_block(per_level - 1, in_dim, cur[i], cur[i + 1]))
        if len(cur) % 2:
            blocks.append(_carry_block(per_level, in_dim, cur[-1]))
        layers += _side_by_side(blocks)
        in_dim = len(blocks)
        cur = list(range(in_dim))
    return layers


def _pad_widths(layers, width):
    """Append parameter-free dead units so every hidden layer has ``width`` units."""
    out, prev_extra = [], 0
    for W, v in layers:
        extra = width - W.shape[0]
        W = np.pad(W, ((0, extra), (0, prev_extra)))
        out.append((W, np.pad(v, (0, extra))))
        prev_extra = extra
    return out, prev_extra


def build_mult(r, N, exact_widths=False):
    """Mult_N^r as a stand-alone network on [0,1]^r.

    With ``exact_widths`` every hidden layer is padded to 6r units (the padding
    units have no parameters and output 0).
    """
    if r < 2 or N < 1:
        raise ParameterError("Mult needs arity r >= 2 and precision N >= 1")
    layers = mult_layers(r, N)
    out = np.ones((1, 1))
    if exact_widths:
        layers, extra = _pad_widths(layers, 6 * r)
        out = np.pad(out, ((0, 0), (0, extra)))
    return ReluNetwork(tuple(layers) + ((out, None),))


def const_mult_layers(C):
    """Width-2 hidden layers scaling a non-negative input by 2^c, c = ceil(log2 C).

    Returns (layers, out_weights): 2c-1 layers reading a single input unit, and
    the two output weights C 2^-c that finish the product ``C x``. For C <= 1
    there are no layers and the output weight is C (identity up to scaling).
    """
    c = ceil_log2(C)
    if c == 0:
        return [], np.array([float(C)])
    layers = [(np.ones((2, 1)), np.zeros(2))]
    for _ in range(c - 1):
        layers.append((np.ones((1, 2)), np.zeros(1)))
        layers.append((np.ones((2, 1)), np.zeros(2)))
    return layers, np.full(2, C / 2.0**c)


def build_const_mult(C):
    """Stand-alone ``x -> C x`` network on non-negative scalars (identity for C <= 1)."""
    layers, w = const_mult_layers(C)
    if not layers:
        return ReluNetwork(((np.ones((1, 1)), None),))
    return ReluNetwork(tuple(layers) + ((w[None, :], None),))


def _first_layer(b, d):
    if b.degree != 1:
        raise ModelError(f"cannot compile a degree-{b.degree} basis (piecewise linear only)")
    if not b.distinct:
        raise ModelError("cannot compile a basis with repeated coordinates")
    W = np.zeros((d, d))
    v = -np.ones(d)
    for c, s, t in zip(b.coords, b.signs, b.knots):
        W[c, c] = s
        v[c] = s * t
    return W, v


def compile_basis(b, N, d):
    """Network H with (N+5) ceil(log2 d) + 1 hidden layers approximating ``b``."""
    layers = [_first_layer(b, d)] + mult_layers(d, N)
    return ReluNetwork(tuple(layers) + ((np.ones((1, 1)), None),))


# -- certificates -------------------------------------------------------

@dataclass
class CompileCertificate:
    epsilon: float
    N: int
    r: int
    M: int
    C: float
    predicted_L: int
    predicted_max_width: int
    predicted_s: int
    error_bound: float
    source: str
    source_digest: str
    L: int = 0
    widths: list = field(default_factory=list)
    s: int = 0
    max_abs_param: float = 0.0
    I_cardinality: int | None = None
    I_displayed: int | None = None
    measured_sup_error: float | None = None
    grid_points: int | None = None
    checks: dict = field(default_factory=dict)
    passed: bool | None = None

    def to_dict(self):
        return asdict(self)


def predicted_sparsity(M, d, N, C):
    q, c = ceil_log2(d), ceil_log2(C)
    return M * 42 * d * d * ((N + 5) * q + 2) + 2 + M * (4 * c + 2)


def predicted_depth(d, N, C):
    return (N + 5) * ceil_log2(d) + 2 * ceil_log2(C) + 3


def _digest(model):
    return hashlib.sha256(model.dumps().encode()).hexdigest()


def _check_structure(net, cert):
    cert.L = net.depth
    cert.widths = list(net.widths)
    cert.s = net.sparsity()
    cert.max_abs_param = net.max_abs_param()
    cert.checks.update({
        "depth": cert.L == cert.predicted_L,
        "params_bounded": cert.max_abs_param <= 1.0,
        "width": max(net.widths[1:-1], default=0) <= max(cert.predicted_max_width, 2),
    })
    # the sparsity count presumes at least one basis function
    if cert.M:
        cert.checks["sparsity"] = cert.s <= cert.predicted_s


def compile_mars(m, epsilon):
    """Network within ``epsilon`` of the MARS model in sup norm, with its certificate."""
    if not 0 < epsilon <= 1:
        raise ParameterError("epsilon must lie in (0, 1]")
    C = float(m.C)
    if any(abs(beta) > C for beta, _ in m.terms) or abs(m.intercept) > C:
        raise ModelError("model coefficients exceed its bound C")
    d, M = m.d, m.M
    N = max(1, ceil_log2(C * (M + 1) * 3**d / epsilon))
    q, c = ceil_log2(d), ceil_log2(C)
    L = predicted_depth(d, N, C)
    pre = (N + 5) * q + 1

    if M:
        joined = _side_by_side([
            compile_basis(b, N, d).layers[:-1] for _, b in m.terms
        ])
        widen_in = joined[-1][0].shape[0]
        Wwide = np.zeros((M + 1, widen_in))
        Wwide[1:, :] = np.eye(M)
        layers = joined
    else:
        # constant channel only: parameter-free zero units until the widening layer
        layers = [(np.zeros((1, d)), np.zeros(1))] + [(np.zeros((1, 1)), np.zeros(1))] * (pre - 1)
        Wwide = np.zeros((1, 1))
    vwide = np.zeros(M + 1)
    vwide[0] = -1.0
    layers.append((Wwide, vwide))

    cm_layers, cm_out = const_mult_layers(C)
    pad = L - len(layers) - len(cm_layers)
    for _ in range(pad):
        layers.append((np.eye(M + 1), np.zeros(M + 1)))
    if cm_layers:
        for W, v in cm_layers:
            layers.append((_block_diag([W] * (M + 1)), np.tile(v, M + 1)))
    betas = np.array([m.intercept] + [beta for beta, _ in m.terms]) / C
    Wout = np.kron(betas, cm_out)[None, :]
    net = ReluNetwork(tuple(layers) + ((Wout, None),))

    cert = CompileCertificate(
        epsilon=float(epsilon), N=N, r=d, M=M, C=C,
        predicted_L=L, predicted_max_width=6 * M * d,
        predicted_s=predicted_sparsity(M, d, N, C),
        error_bound=C * (M + 1) * 3**d * 2.0**-N,
        source="mars", source_digest=_digest(m),
    )
    cert.checks["bound_le_epsilon"] = cert.error_bound <= epsilon
    _check_structure(net, cert)
    return net, cert


def compile_fs(m, epsilon):
    net, cert = compile_mars(fs_to_mars(m), epsilon)
    cert.source = "fs"
    cert.source_digest = _digest(m)
    cert.I_cardinality = cardinality(m.M, m.d)
    cert.I_displayed = cardinality_displayed(m.M, m.d)
    return net, cert


def _knots(model):
    if hasattr(model, "knots_by_axis"):
        return model.knots_by_axis()
    # Faber-Schauder: breakpoints on the dyadic grid of the finest level
    ax = np.arange(2 ** (model.M + 1) + 1) / 2.0 ** (model.M + 1)
    return [ax] * model.d


def default_resolution(d):
    return 1001 if d <= 2 else 101


def verify_certificate(net, cert, model, grid_resolution=None):
    """Measure the grid sup error (model breakpoints merged into the grid) and
    re-check the structural claims. Fills and returns ``cert``."""
    d = net.input_dim
    res = default_resolution(d) if grid_resolution is None else grid_resolution
    X = tensor_grid(d, res, axis_extra=_knots(model))
    err = 0.0
    for chunk in iter_chunks(X):
        err = max(err, float(np.max(np.abs(net.forward(chunk)[:, 0] - model.eval(chunk)))))
    cert.measured_sup_error = err
    cert.grid_points = int(X.shape[0])
    _check_structure(net, cert)
    cert.checks["sup_error"] = err <= cert.epsilon
    cert.passed = all(cert.checks.values())
    return cert
