"""Two-state Markov chain for demand occurrence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MarkovOccurrence:
    p01: float  # P(demand | no demand in the previous period)
    p11: float  # P(demand | demand in the previous period)

    @property
    def transition(self) -> np.ndarray:
        return np.array([[1 - self.p01, self.p01], [1 - self.p11, self.p11]])

    def stationary(self) -> float:
        denom = 1 - self.p11 + self.p01
        return self.p01 / denom if denom > 0 else 1.0

    def predict_proba(self, current_state: bool, steps: int = 1) -> float:
        """Probability of demand ``steps`` periods after a period in ``current_state``."""
        if steps < 0:
            raise ValueError("steps must be non-negative")
        if steps == 0:
            return float(bool(current_state))
        power = np.linalg.matrix_power(self.transition, int(steps))
        return float(power[int(bool(current_state)), 1])


def fit_markov(occurrence) -> MarkovOccurrence:
    """Transition probabilities with add-one smoothing from a 0/1 (or demand) sequence."""
    x = np.asarray(occurrence, dtype=float) > 0
    if len(x) < 2:
        raise ValueError("a Markov fit needs at least two periods")
    prev, nxt = x[:-1], x[1:]
    n01 = np.sum(~prev & nxt)
    n0 = np.sum(~prev)
    n11 = np.sum(prev & nxt)
    n1 = np.sum(prev)
    return MarkovOccurrence(p01=(n01 + 1) / (n0 + 2), p11=(n11 + 1) / (n1 + 2))
