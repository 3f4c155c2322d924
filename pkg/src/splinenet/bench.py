"""Simulation models, Monte Carlo prediction risk and experiment tables."""
from dataclasses import asdict, dataclass, field
import csv
import io
import math
import warnings

import numpy as np

from .data import Dataset
from .exceptions import ParameterError, SplinenetError
from .faber_schauder import fit_least_squares
from .mars import forward_selection
from .training import TrainConfig, train

MODELS = ("sim1", "sim2", "sim3", "sim4", "sim5", "sim6", "sim7")
METHODS = ("mars", "homars", "fs", "dnn")
SIM2_NOISE_SD = 0.2


def _f_square(X):
    return X[:, 0] ** 2


def _f_sine(X):
    return np.sin(10.0 * np.pi * X[:, 0])


def _f_step(X):
    return np.where(X[:, 0] < 0.5, -0.5, 0.5)


def _f_hinge2(X):
    return np.maximum(X[:, 0] + X[:, 1] - 1.0, 0.0)


def _f_sumsq(X):
    return np.maximum(np.sum(X**2, axis=1) - X.shape[1] / 3.0, 0.0)


def _f_sumsq10(X):
    return np.maximum(np.sum(X[:, :10] ** 2, axis=1) - 10.0 / 3.0, 0.0)


_TARGETS = {
    "sim1": _f_square, "sim2": _f_square, "sim3": _f_sine, "sim4": _f_step,
    "sim5": _f_hinge2, "sim6": _f_sumsq, "sim7": _f_sumsq10,
}


def default_dim(model):
    return {"sim5": 2, "sim7": 10}.get(model, 1)


def _check(model, d):
    if model not in _TARGETS:
        raise ParameterError(f"unknown model {model!r}; expected one of {', '.join(MODELS)}")
    if d is None:
        if model == "sim6":
            raise ParameterError("sim6 needs the dimension d")
        d = default_dim(model)
    d = int(d)
    if model in ("sim1", "sim2", "sim3", "sim4") and d != 1:
        raise ParameterError(f"{model} is univariate")
    if model == "sim5" and d != 2:
        raise ParameterError("sim5 is bivariate")
    if model == "sim7" and d < 10:
        raise ParameterError("sim7 needs d >= 10")
    if d < 1:
        raise ParameterError("d must be positive")
    return d


def target(model, d=None):
    """Noiseless regression function of a simulation model."""
    _check(model, d)
    return _TARGETS[model]


def noise_sd(model):
    return SIM2_NOISE_SD if model == "sim2" else 0.0


def generate(model, n, d=None, seed=0):
    """Uniform design on [0,1]^d with responses from the model."""
    d = _check(model, d)
    if n < 1:
        raise ParameterError("n must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    Y = _TARGETS[model](X)
    sd = noise_sd(model)
    if sd:
        Y = Y + rng.normal(0.0, sd, size=n)
    return Dataset(X, Y, generator=model, params={"d": d}, seed=seed, noise_sd=sd)


def prediction_risk(predictor, model, d=None, test_n=100_000, seed=0, noise_inclusive=False):
    """Monte Carlo estimate of E[(fhat(X) - f0(X))^2] on fresh uniform draws.

    With ``noise_inclusive`` the fresh responses carry the model noise and the
    estimate is E[(Y - fhat(X))^2] instead.
    """
    d = _check(model, d)
    if test_n < 1:
        raise ParameterError("test_n must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(test_n, d))
    y = _TARGETS[model](X)
    if noise_inclusive and noise_sd(model):
        y = y + rng.normal(0.0, noise_sd(model), size=test_n)
    pred = np.asarray(predictor(X), dtype=np.float64).ravel()
    return float(np.mean((pred - y) ** 2))


# -- experiments --------------------------------------------------------------

_DNN_DEFAULTS = {
    "sim1": dict(hidden=(5, 5, 5), initializer="increasing_glorot"),
    "sim2": dict(hidden=(5, 5, 5), initializer="increasing_glorot"),
    "sim3": dict(hidden=(10,) * 10, initializer="glorot_modified"),
    "sim4": dict(hidden=(10,) * 10, initializer="glorot_modified"),
    "sim5": dict(hidden=(1,), initializer="increasing_glorot"),
    "sim6": dict(hidden=(10,) * 15, initializer="glorot_modified"),
    "sim7": dict(hidden=(10,) * 15, initializer="glorot_modified"),
}

_HOMARS_DEFAULTS = {
    "sim1": dict(K=3, M=10), "sim2": dict(K=3, M=10),
    "sim3": dict(K=5, M=50), "sim4": dict(K=5, M=50),
    "sim5": dict(K=10, M=20),
    "sim6": dict(K=10, M=30), "sim7": dict(K=10, M=30),
}


def default_params(model, method):
    if method == "dnn":
        return dict(_DNN_DEFAULTS[model])
    if method == "homars":
        return dict(_HOMARS_DEFAULTS[model])
    if method in ("mars", "fs"):
        raise ParameterError(f"method {method!r} needs an explicit M")
    raise ParameterError(f"unknown method {method!r}")


@dataclass
class ExperimentSpec:
    """One benchmark cell. ``params`` count basis functions:

    * ``mars``: ``M`` functions, fitted with (M-1)//2 forward steps;
    * ``homars``: ``K`` (max factors per product) and ``M`` as for mars;
    * ``fs``: ``M`` such that each axis has 1 + 2^M functions;
    * ``dnn``: ``hidden`` widths, ``initializer`` and optional training overrides.
    """

    model: str
    method: str
    params: dict = field(default_factory=dict)
    d: int | None = None
    repetitions: int = 100
    n: int = 1000
    test_n: int = 100_000
    seed: int = 0

    def __post_init__(self):
        self.d = _check(self.model, self.d)
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if not self.params and self.method in ("dnn", "homars"):
            self.params = default_params(self.model, self.method)
        if self.method in ("mars", "homars", "fs") and "M" not in self.params:
            raise ParameterError(f"method {self.method!r} needs M")

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


def _fit(spec, data, fit_seed):
    p = spec.params
    if spec.method in ("mars", "homars"):
        steps = max(1, (int(p["M"]) - 1) // 2)
        mode = "higher_order" if spec.method == "homars" else "plain"
        K = int(p["K"]) if spec.method == "homars" else p.get("K")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return forward_selection(data, steps, max_degree=K, mode=mode, seed=fit_seed).eval
    if spec.method == "fs":
        return fit_least_squares(data, int(p["M"]) - 1).eval
    hidden = tuple(p.get("hidden", _DNN_DEFAULTS[spec.model]["hidden"]))
    cfg = TrainConfig(
        widths=(spec.d,) + hidden + (1,),
        initializer=p.get("initializer", "glorot_modified"),
        epochs=int(p.get("epochs", 1000)),
        batch_size=int(p.get("batch_size", 32)),
        restarts=int(p.get("restarts", 5)),
        learning_rate=float(p.get("learning_rate", 0.001)),
        decay=float(p.get("decay", 0.00021)),
        seed=fit_seed,
    )
    net, _ = train(data, cfg)
    return lambda X: net.forward(X)[:, 0]


def repetition_seeds(seed, rep):
    data_seed, test_seed, fit_seed = np.random.SeedSequence([seed, rep]).generate_state(3)
    return int(data_seed), int(test_seed), int(fit_seed)


@dataclass
class Summary:
    spec: ExperimentSpec
    risks: list
    noisy_risks: list | None = None
    failures: list = field(default_factory=list)

    @property
    def mean(self):
        ok = [r for r in self.risks if math.isfinite(r)]
        return float(np.mean(ok)) if ok else math.nan

    @property
    def std(self):
        ok = [r for r in self.risks if math.isfinite(r)]
        return float(np.std(ok, ddof=1)) if len(ok) > 1 else 0.0

    def to_dict(self):
        out = asdict(self)
        out.update(mean=self.mean, std=self.std)
        return out


def run_experiment(spec, progress=None):
    """Repeat generate, fit, estimate risk. Failed repetitions are recorded as NaN."""
    risks, noisy, failures = [], [], []
    for rep in range(spec.repetitions):
        data_seed, test_seed, fit_seed = repetition_seeds(spec.seed, rep)
        data = generate(spec.model, spec.n, spec.d, data_seed)
        try:
            predictor = _fit(spec, data, fit_seed)
            risks.append(prediction_risk(predictor, spec.model, spec.d, spec.test_n, test_seed))
            if noise_sd(spec.model):
                noisy.append(prediction_risk(predictor, spec.model, spec.d, spec.test_n, test_seed,
                                             noise_inclusive=True))
        except (SplinenetError, np.linalg.LinAlgError) as exc:
            risks.append(math.nan)
            noisy.append(math.nan)
            failures.append({"repetition": rep, "error": str(exc)})
        if progress:
            progress(rep, risks[-1])
    return Summary(spec, risks, noisy if noise_sd(spec.model) else None, failures)


# -- tables ------------------------------------------------------------------------

COLUMNS = ("model", "method", "params", "mean", "std", "n", "reps", "seed")


def fmt_sci(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.2e}"


def _fmt_params(spec):
    items = dict(spec.params)
    if spec.model in ("sim6", "sim7"):
        items = {"d": spec.d, **items}
    parts = []
    for k in sorted(items):
        v = items[k]
        if isinstance(v, (list, tuple)):
            v = "x".join(str(u) for u in v)
        parts.append(f"{k}={v}")
    return ";".join(parts)


def table_rows(summaries):
    rows = []
    for s in summaries:
        sp = s.spec
        rows.append([sp.model, sp.method, _fmt_params(sp), fmt_sci(s.mean), fmt_sci(s.std),
                     str(sp.n), str(sp.repetitions), str(sp.seed)])
    return rows


def emit_table(summaries, path=None):
    """CSV text of the summaries (written to ``path`` if given)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(table_rows(summaries))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def format_table(summaries):
    rows = [list(COLUMNS)] + table_rows(summaries)
    widths = [max(len(r[i]) for r in rows) for i in range(len(COLUMNS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
