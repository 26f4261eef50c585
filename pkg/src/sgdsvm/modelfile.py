"""Plain-text model files and prediction.

Layout: ``key value`` header lines, then ``weights <n>`` followed by ``n``
lines, one coordinate of ``w = a / (lambda t)`` each, written with ``repr`` so
that load/save round-trips bit for bit. The last coordinate multiplies the
augmentation constant ``rho``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
import scipy.sparse as sp

from .data import LabeledExample

FORMAT_VERSION = 1
_HEADER = ("n_features", "rho", "C", "lambda", "variant", "seed", "T_eff", "M", "t")


class ModelFormatError(ValueError):
    pass


@dataclass
class Model:
    w: np.ndarray
    n_features: int
    rho: float = 0.0
    C: float = 1.0
    lam: float = 1.0
    variant: str = "s"
    seed: int = 0
    T_eff: int = 0
    M: int = 0
    t: int = 0

    @classmethod
    def from_training(cls, state, params, n_features: int) -> "Model":
        return cls(
            w=state.weights(params.lam), n_features=n_features, rho=params.rho, C=params.C, lam=params.lam,
            variant=params.variant, seed=params.seed, T_eff=state.T_eff, M=state.M, t=state.t,
        )

    def decision_function(self, examples: Sequence[LabeledExample]) -> np.ndarray:
        d = max([ex.features.dim for ex in examples] + [int(ex.features.indices[-1]) + 1 for ex in examples if len(ex.features)], default=0)
        if d > self.n_features:
            raise ValueError(f"data has {d} features but the model was trained on {self.n_features}")
        n = len(examples)
        lengths = [len(ex.features) for ex in examples]
        indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        indices = np.concatenate([ex.features.indices for ex in examples]) if n else np.empty(0, np.int64)
        values = np.concatenate([ex.features.values for ex in examples]) if n else np.empty(0)
        X = sp.csr_matrix((values, indices, indptr), shape=(n, self.n_features))
        return X @ self.w[: self.n_features] + self.rho * self.w[self.n_features]

    def predict(self, examples: Sequence[LabeledExample]) -> np.ndarray:
        """Labels in {+1, -1}; a zero score maps to +1."""
        return np.where(self.decision_function(examples) >= 0, 1, -1)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            self.write(fh)

    def write(self, fh: IO[str]) -> None:
        fh.write(f"sgdsvm-model {FORMAT_VERSION}\n")
        values = (self.n_features, repr(float(self.rho)), repr(float(self.C)), repr(float(self.lam)),
                  self.variant, self.seed, self.T_eff, self.M, self.t)
        for key, val in zip(_HEADER, values):
            fh.write(f"{key} {val}\n")
        fh.write(f"weights {self.w.size}\n")
        for x in self.w:
            fh.write(f"{float(x)!r}\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Model":
        with open(path) as fh:
            return cls.read(fh)

    @classmethod
    def read(cls, fh: IO[str]) -> "Model":
        magic = fh.readline().split()
        if len(magic) != 2 or magic[0] != "sgdsvm-model":
            raise ModelFormatError("not a sgdsvm model file")
        if int(magic[1]) != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {magic[1]}")
        header: dict[str, str] = {}
        for line in fh:
            key, _, val = line.strip().partition(" ")
            if key == "weights":
                n = int(val)
                break
            header[key] = val
        else:
            raise ModelFormatError("missing weights section")
        missing = [k for k in _HEADER if k not in header]
        if missing:
            raise ModelFormatError(f"missing header fields: {missing}")
        w = np.array([float(fh.readline()) for _ in range(n)])
        n_features = int(header["n_features"])
        if w.size != n_features + 1:
            raise ModelFormatError(f"expected {n_features + 1} weights, found {w.size}")
        return cls(
            w=w, n_features=n_features, rho=float(header["rho"]), C=float(header["C"]),
            lam=float(header["lambda"]), variant=header["variant"], seed=int(header["seed"]),
            T_eff=int(header["T_eff"]), M=int(header["M"]), t=int(header["t"]),
        )
