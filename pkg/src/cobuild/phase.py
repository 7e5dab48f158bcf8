"""Completion-threshold phase schedule shared by the world and the tree agent."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_THRESHOLDS = (0.2, 0.4, 0.6, 0.8)
PHASE_COUNT = 5


@dataclass(frozen=True)
class PhaseThresholds:
    """Ascending completion fractions t1 < t2 < t3 < t4, all inside (0, 1)."""

    values: tuple[float, float, float, float] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if len(self.values) != PHASE_COUNT - 1:
            raise ValueError("exactly four thresholds required")
        if not all(0.0 < t < 1.0 for t in self.values):
            raise ValueError("thresholds must lie strictly inside (0, 1)")
        if not all(a < b for a, b in zip(self.values, self.values[1:])):
            raise ValueError("thresholds must be strictly ascending")


def current_phase(completion: float, thresholds: PhaseThresholds | None = None) -> int:
    """Phase 1..5 for a completion fraction.

    Thresholds are closed lower bounds: a completion exactly at a threshold
    counts as having crossed it, so the phase for 0.0 is 1 and for 1.0 is 5.
    """
    if not 0.0 <= completion <= 1.0:
        raise ValueError(f"completion out of range: {completion}")
    values = (thresholds or PhaseThresholds()).values
    return 1 + sum(1 for t in values if completion >= t)
