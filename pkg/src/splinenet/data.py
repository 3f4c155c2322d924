from dataclasses import dataclass, field
import csv

import numpy as np

from .exceptions import ParseError, ShapeError


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` design points in ``[0,1]^d`` with responses, plus generator metadata."""

    X: np.ndarray
    Y: np.ndarray
    generator: str = "user"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    noise_sd: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ShapeError(f"X has shape {X.shape} but Y has {Y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        if X.size and (X.min() < 0.0 or X.max() > 1.0):
            raise ValueError("design points must lie in [0,1]^d")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.d)] + ["y"])
            for x, y in zip(self.X, self.Y):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError("empty CSV", 0)
        header = rows[0]
        if not header or header[-1] != "y" or any(h != f"x{i + 1}" for i, h in enumerate(header[:-1])):
            raise ParseError("header must be x1,...,xd,y", "line 1")
        try:
            arr = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise ParseError(str(exc), "body") from None
        if arr.ndim != 2 or arr.shape[1] != len(header):
            raise ParseError("ragged rows", "body")
        return cls(arr[:, :-1], arr[:, -1], generator="csv")
