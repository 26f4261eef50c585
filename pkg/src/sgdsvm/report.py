"""Per-epoch training log, written as CSV plus a JSON summary.

CSV columns, in order::

    T, T_eff, t, M, J_approx, J_exact, L_T, gap, seconds

``J_exact`` is blank on epochs where it was not computed, ``J_approx`` is
blank where undefined, ``L_T`` and ``gap`` are blank when there is no dual
bound (random selection) and ``gap`` also when ``L_T <= 0``. ``seconds`` is
cumulative wall time since the start of training.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from typing import IO, TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from .engine import Hyperparams, ModelState
    from .objective import EpochMetrics

CSV_COLUMNS = ("T", "T_eff", "t", "M", "J_approx", "J_exact", "L_T", "gap", "seconds")


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


@dataclass
class TrainReport:
    variant: str
    params: Hyperparams
    epochs: list[EpochMetrics] = field(default_factory=list)
    status: str = ""
    seconds: float = 0.0
    state: ModelState | None = None
    norm_trace: tuple[np.ndarray, np.ndarray] = (np.empty(0, dtype=np.int64), np.empty(0))
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def final(self) -> EpochMetrics:
        return self.epochs[-1]

    def write_csv(self, fh: IO[str], timing: bool = True) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for e in self.epochs:
            writer.writerow([
                e.T, e.T_eff, e.t, e.M, _fmt(e.J_approx), _fmt(e.J_exact), _fmt(e.L_T),
                _fmt(e.gap_rel), f"{e.seconds:.6f}" if timing else "",
            ])

    def summary(self) -> dict[str, Any]:
        last = self.final
        last_exact = next((e.J_exact for e in reversed(self.epochs) if e.J_exact is not None), None)
        return {
            "variant": self.variant,
            "status": self.status,
            "seed": self.params.seed,
            "params": dataclasses.asdict(self.params),
            "epochs": last.T,
            "T_eff": last.T_eff,
            "t": last.t,
            "M": last.M,
            "J": last_exact,
            "L_T": last.L_T,
            "gap": last.gap_rel,
            "w_norm": last.w_norm,
            "seconds": self.seconds,
            "diagnostics": self.diagnostics,
        }

    def write_json(self, fh: IO[str]) -> None:
        json.dump(self.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
