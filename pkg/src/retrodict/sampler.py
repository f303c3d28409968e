"""Monte Carlo simulation of prepare-transform-measure ensembles.

Counting convention: each trial draws a preparation alternative uniformly,
pushes it through the transformation (sampling the instrument outcome when
there is one), measures the output basis, and records the pair of labels the
task cares about.  Conditioning the counts on the input reproduces the
prediction tables; conditioning on the output reproduces the postdiction
tables, because the uniform preparation realizes the flat prior.

Randomness comes from the Philox 4x64 counter-based generator (numpy's
``np.random.Philox``, 10 rounds, documented constants).  The generator is
keyed by the ensemble seed and yields a fixed block of THREE uniform doubles
per trial, in trial order; trial t consumes exactly slots [3t, 3t+3).  Counts
are therefore reproducible bit-for-bit and independent of how trials are
scheduled: a parallel execution merging per-trial results by summation gives
identical counts to the sequential loop.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import Instrument, apply
from .errors import UndefinedConditionalError
from .inference import InferenceTask
from .tables import ProbabilityTable, join_labels

SLOTS_PER_TRIAL = 3


def trial_uniforms(seed: int, shots: int) -> np.ndarray:
    """The (shots, 3) array of uniform doubles driving an ensemble.

    Raw 64-bit Philox words are mapped to [0, 1) doubles by the standard
    (word >> 11) * 2**-53 conversion.
    """
    bit_generator = np.random.Philox(key=np.uint64(seed))
    raw = bit_generator.random_raw(SLOTS_PER_TRIAL * shots)
    return ((raw >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(shots, SLOTS_PER_TRIAL)


@dataclass(frozen=True)
class EnsembleResult:
    """Joint counts of (input label, output label) pairs over an ensemble."""

    joint_counts: dict[tuple[str, str], int]
    shots: int
    seed: int

    def __post_init__(self):
        total = sum(self.joint_counts.values())
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")


def _restricted_label(indices: tuple[int, ...], mask: tuple[bool, ...]) -> str:
    parts = [str(i) for i, m in zip(indices, mask) if m]
    return join_labels(*parts)


def _inverse_cdf(cdf: np.ndarray, u: float) -> int:
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(cdf) - 1)


def _prepare_alternatives(task: InferenceTask):
    """List of (input label, preparation density matrix) pairs, uniform prior."""
    if task.preparation_states is not None:
        return [(str(i), linalg.projector(psi)) for i, psi in enumerate(task.preparation_states)]
    ranges = [range(d) for d in task.dims_in]
    alternatives = []
    for combo in itertools.product(*ranges):
        label = _restricted_label(combo, task.known_input_mask)
        kets = [linalg.basis_ket(d, i) for d, i in zip(task.dims_in, combo)]
        alternatives.append((label, linalg.projector(linalg.tensor(*kets))))
    return alternatives


def _transformation_stages(task: InferenceTask, rho: np.ndarray):
    """Per-alternative sampling data: outcome CDF and per-outcome measurement CDFs.

    Unitaries and channels are single-outcome; the outcome draw is still
    consumed so every trial advances the stream by the same amount.
    """
    kind = task.transformation_kind()
    dims_out = task.dims_out
    mask_out = task.known_output_mask

    def measurement_cdf(state: np.ndarray) -> np.ndarray:
        probs = np.clip(np.diagonal(state).real, 0.0, None)
        return np.cumsum(probs)

    out_labels = []
    for combo in itertools.product(*[range(d) for d in dims_out]):
        out_labels.append(_restricted_label(combo, mask_out))

    if kind == "unitary":
        u = np.asarray(task.transformation, dtype=complex)
        final = u @ rho @ linalg.dagger(u)
        return np.array([1.0]), [("", measurement_cdf(final))], out_labels
    if kind == "channel":
        final = apply(task.transformation, rho)
        return np.array([1.0]), [("", measurement_cdf(final))], out_labels

    inst: Instrument = task.transformation
    weights = []
    branches = []
    multi = len(inst.outcomes) > 1
    for label, qmap in inst.outcomes:
        image = apply(qmap, rho)
        weight = float(np.trace(image).real)
        weights.append(max(weight, 0.0))
        branches.append((label if multi else "", measurement_cdf(image)))
    return np.cumsum(weights), branches, out_labels


def run_ensemble(task: InferenceTask, shots: int, seed: int) -> EnsembleResult:
    """Simulate ``shots`` independent trials of the task's scenario."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    alternatives = _prepare_alternatives(task)
    n_alt = len(alternatives)
    prepared = [
        (label, _transformation_stages(task, rho)) for label, rho in alternatives
    ]

    uniforms = trial_uniforms(seed, shots)
    counts: dict[tuple[str, str], int] = {}
    for t in range(shots):
        u_in, u_branch, u_meas = uniforms[t]
        alt_index = min(int(u_in * n_alt), n_alt - 1)
        in_label, (branch_cdf, branches, out_labels) = prepared[alt_index]
        branch = _inverse_cdf(branch_cdf, u_branch * branch_cdf[-1])
        branch_label, meas_cdf = branches[branch]
        x = _inverse_cdf(meas_cdf, u_meas * meas_cdf[-1])
        out_label = out_labels[x] if not branch_label else join_labels(branch_label, out_labels[x])
        key = (in_label, out_label)
        counts[key] = counts.get(key, 0) + 1
    return EnsembleResult(joint_counts=counts, shots=shots, seed=seed)


def empirical_conditionals(result: EnsembleResult, direction: str) -> dict[str, ProbabilityTable]:
    """Conditional frequency tables, one per conditioning cell with nonzero count.

    ``predict`` conditions on the input label, ``postdict`` on the output
    label.  Cells that never occurred are simply absent (skipped).
    """
    if direction not in ("predict", "postdict"):
        raise ValueError(f"unknown direction {direction!r}")
    grouped: dict[str, dict[str, int]] = {}
    for (in_label, out_label), n in result.joint_counts.items():
        data, guess = (in_label, out_label) if direction == "predict" else (out_label, in_label)
        grouped.setdefault(data, {})
        grouped[data][guess] = grouped[data].get(guess, 0) + n
    tables = {}
    for data, cells in sorted(grouped.items()):
        total = sum(cells.values())
        tables[data] = ProbabilityTable(
            {guess: n / total for guess, n in sorted(cells.items())},
            given=data,
            direction=direction,
        )
    return tables


def empirical_conditional(result: EnsembleResult, direction: str, given: str) -> ProbabilityTable:
    """The conditional row for one conditioning cell; empty cells are an error."""
    tables = empirical_conditionals(result, direction)
    if given not in tables:
        raise UndefinedConditionalError(f"conditioning cell {given!r} has zero count")
    return tables[given]


@dataclass(frozen=True)
class CompareReport:
    max_deviation: float
    worst_label: str | None
    failures: tuple[str, ...]
    tolerances: dict[str, float]

    @property
    def passed(self) -> bool:
        return not self.failures


def compare(
    empirical: ProbabilityTable,
    analytic: ProbabilityTable,
    shots: int,
    floor: float = 0.01,
) -> CompareReport:
    """Check an empirical row against its closed form, cell by cell.

    The per-cell tolerance is max(floor, 4 sqrt(p (1-p) / shots)) with p the
    analytic probability.  Outcomes absent from the empirical table count as
    frequency zero; an empirical outcome unknown to the analytic table is a
    label mismatch and is rejected.
    """
    unknown = set(empirical.entries) - set(analytic.entries)
    if unknown:
        raise ValueError(f"empirical outcomes {sorted(unknown)} do not appear in the analytic table")
    max_dev = 0.0
    worst = None
    failures = []
    tolerances = {}
    for label, p in analytic.entries.items():
        tol = max(floor, 4.0 * np.sqrt(max(p * (1.0 - p), 0.0) / shots))
        dev = abs(empirical.entries.get(label, 0.0) - p)
        tolerances[label] = tol
        if dev > max_dev:
            max_dev, worst = dev, label
        if dev > tol:
            failures.append(label)
    return CompareReport(
        max_deviation=max_dev,
        worst_label=worst,
        failures=tuple(failures),
        tolerances=tolerances,
    )
