"""Outcome probability tables with normalization metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import UndefinedConditionalError

# Joint outcome labels join their per-factor parts with this separator.
LABEL_SEPARATOR = "·"

# A full conditional distribution must sum to 1 within this bound; individual
# entries may undershoot 0 or overshoot 1 by at most ENTRY_SLACK of float noise.
NORMALIZATION_ATOL = 1e-9
ENTRY_SLACK = 1e-12


def join_labels(*parts: str) -> str:
    return LABEL_SEPARATOR.join(parts)


@dataclass(frozen=True)
class ProbabilityTable:
    """Mapping from outcome labels to probabilities for one conditioning cell.

    ``given`` names the outcome that was conditioned on (None for marginal
    tables), ``direction`` records which way the inference ran, and ``factor``
    optionally carries the prediction-to-postdiction normalization constant.
    """

    entries: dict[str, float]
    given: str | None = None
    direction: str = "predict"
    factor: float | None = None
    normalization_defect: float = field(init=False)

    def __post_init__(self):
        if self.direction not in ("predict", "postdict"):
            raise ValueError(f"unknown direction {self.direction!r}")
        cleaned: dict[str, float] = {}
        for label, value in self.entries.items():
            value = float(value)
            if value < -ENTRY_SLACK or value > 1.0 + ENTRY_SLACK:
                raise ValueError(f"probability {value} for outcome {label!r} is out of range")
            cleaned[str(label)] = value
        object.__setattr__(self, "entries", cleaned)
        total = sum(cleaned.values())
        object.__setattr__(self, "normalization_defect", abs(total - 1.0))
        if self.normalization_defect > NORMALIZATION_ATOL:
            raise ValueError(f"table sums to {total}, not normalized within {NORMALIZATION_ATOL}")

    @classmethod
    def from_values(
        cls,
        labels: Sequence[str],
        values: Sequence[float] | np.ndarray,
        given: str | None = None,
        direction: str = "predict",
        factor: float | None = None,
    ) -> "ProbabilityTable":
        values = np.asarray(values, dtype=float)
        if len(labels) != values.size:
            raise ValueError("labels and values must have matching lengths")
        return cls(dict(zip(labels, values.tolist())), given=given, direction=direction, factor=factor)

    def labels(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def probabilities(self) -> np.ndarray:
        return np.array(list(self.entries.values()), dtype=float)

    def __getitem__(self, label: str) -> float:
        return self.entries[str(label)]

    def max_difference(self, other: "ProbabilityTable") -> float:
        """Largest entrywise deviation over the union of labels (missing = 0)."""
        labels = set(self.entries) | set(other.entries)
        return max(abs(self.entries.get(l, 0.0) - other.entries.get(l, 0.0)) for l in labels)


def bayes_invert(
    conditionals: Mapping[str, ProbabilityTable],
    given: str,
    prior: Mapping[str, float] | None = None,
) -> ProbabilityTable:
    """Invert rows P(outcome | alternative) into P(alternative | outcome).

    ``conditionals`` maps each alternative to its forward table; ``prior``
    defaults to the flat distribution over the alternatives.
    """
    alternatives = list(conditionals)
    if not alternatives:
        raise ValueError("at least one conditional row is required")
    if prior is None:
        weights = {a: 1.0 / len(alternatives) for a in alternatives}
    else:
        total = sum(prior[a] for a in alternatives)
        if total <= 0:
            raise ValueError("prior weights must have positive total")
        weights = {a: prior[a] / total for a in alternatives}
    numerators = {a: conditionals[a].entries.get(given, 0.0) * weights[a] for a in alternatives}
    evidence = sum(numerators.values())
    if evidence < ENTRY_SLACK:
        raise UndefinedConditionalError(f"outcome {given!r} has zero probability under the prior")
    return ProbabilityTable(
        {a: numerators[a] / evidence for a in alternatives},
        given=given,
        direction="postdict",
    )
