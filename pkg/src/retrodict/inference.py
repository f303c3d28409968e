"""Prediction and postdiction tasks, time reversal, and identity checks.

Prediction conditions on preparation outcomes and guesses test outcomes;
postdiction conditions on test outcomes and guesses preparation outcomes
under a flat prior over the alternatives.  On multi-factor spaces the roles
of the identity operator follow the direction of inference: ignored factors
on the guessing side are discarded with an unnormalized identity, ignored
factors on the data side carry the flat weight I/d.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .channels import (
    Instrument,
    QuantumMap,
    adjoint_map,
    apply,
    check_cptp,
    classify,
    coarse_grain,
    compose_sequential,
    outcome_probabilities,
    random_instrument,
)
from .errors import NoActiveReverseError, UndefinedConditionalError
from .linalg import ATOL_STRUCTURAL, dagger
from .purify import Purification, purify_instrument, stinespring
from .tables import ProbabilityTable, join_labels

Given = Sequence[int | None]
Mask = Sequence[bool]


# ---------------------------------------------------------------------------
# Closed systems
# ---------------------------------------------------------------------------


def _check_unitary_arg(u: np.ndarray, d: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if not linalg.is_unitary(u):
        raise ValueError("transformation matrix is not unitary within tolerance")
    if d is not None and u.shape[0] != d:
        raise ValueError(f"unitary dimension {u.shape[0]} does not match declared dimension {d}")
    return u


def predict_closed(u: np.ndarray, a: int, d: int | None = None) -> ProbabilityTable:
    """Born rule for a closed system: P(x | a) = |<x|U|a>|^2."""
    u = _check_unitary_arg(u, d)
    dim = u.shape[0]
    if not 0 <= a < dim:
        raise ValueError(f"preparation outcome {a} out of range for dimension {dim}")
    probs = np.abs(u[:, a]) ** 2
    labels = [str(x) for x in range(dim)]
    return ProbabilityTable.from_values(labels, probs, given=str(a), direction="predict")


def postdict_closed(u: np.ndarray, x: int, d: int | None = None) -> ProbabilityTable:
    """Flat-prior Bayes inversion of the Born rule; equals the transposed prediction."""
    u = _check_unitary_arg(u, d)
    dim = u.shape[0]
    if not 0 <= x < dim:
        raise ValueError(f"test outcome {x} out of range for dimension {dim}")
    probs = np.abs(u[x, :]) ** 2
    labels = [str(a) for a in range(dim)]
    return ProbabilityTable.from_values(labels, probs, given=str(x), direction="postdict")


# ---------------------------------------------------------------------------
# Open systems
# ---------------------------------------------------------------------------


def _validate_open_args(u, dims_in, dims_out, given, mask):
    u = np.asarray(u, dtype=complex)
    dims_in = tuple(int(d) for d in dims_in)
    dims_out = tuple(int(d) for d in dims_out)
    total_in = linalg.dims_total(dims_in)
    total_out = linalg.dims_total(dims_out)
    if total_in != total_out:
        raise ValueError(f"input and output spaces differ in size: {total_in} vs {total_out}")
    if u.shape != (total_in, total_in):
        raise ValueError(f"unitary shape {u.shape} does not match total dimension {total_in}")
    if not linalg.is_unitary(u):
        raise ValueError("transformation matrix is not unitary within tolerance")
    given = tuple(None if g is None else int(g) for g in given)
    mask = tuple(bool(m) for m in mask)
    return u, dims_in, dims_out, given, mask


def _data_side_operator(dims: Sequence[int], given: Given, normalized: bool) -> np.ndarray:
    """Tensor of outcome projectors on known factors and identities on ignored ones.

    Ignored factors carry I/d when ``normalized`` (data-side flat weight) and a
    bare identity otherwise (guess-side marginalization).
    """
    parts = []
    for d, g in zip(dims, given):
        if g is None:
            parts.append(linalg.maximally_mixed(d) if normalized else linalg.identity(d))
        else:
            if not 0 <= g < d:
                raise ValueError(f"outcome {g} out of range for factor dimension {d}")
            parts.append(linalg.basis_projector(d, g))
    return linalg.tensor(*parts)


def _guessed_labels(dims: Sequence[int], mask: Mask) -> tuple[list[str], list[int]]:
    keep = [k for k, m in enumerate(mask) if m]
    if not keep:
        raise ValueError("at least one factor must be guessed")
    ranges = [range(dims[k]) for k in keep]
    labels = [join_labels(*(str(i) for i in combo)) for combo in itertools.product(*ranges)]
    return labels, keep


def _given_label(given: Given) -> str:
    return join_labels(*(str(g) for g in given if g is not None))


def predict_open(
    u: np.ndarray,
    dims_in: Sequence[int],
    dims_out: Sequence[int],
    known_input: Given,
    guess_output_mask: Mask,
) -> ProbabilityTable:
    """Prediction with partial data: unknown input factors carry the flat prior I/d,
    output factors outside the guess mask are discarded (marginalized)."""
    u, dims_in, dims_out, known_input, mask = _validate_open_args(
        u, dims_in, dims_out, known_input, guess_output_mask
    )
    if len(known_input) != len(dims_in) or len(mask) != len(dims_out):
        raise ValueError("per-factor arguments must match the dimension partitions")
    rho = _data_side_operator(dims_in, known_input, normalized=True)
    sigma = u @ rho @ dagger(u)
    labels, keep = _guessed_labels(dims_out, mask)
    reduced = linalg.partial_trace(sigma, dims_out, keep)
    probs = np.diagonal(reduced).real
    return ProbabilityTable.from_values(labels, probs, given=_given_label(known_input), direction="predict")


def postdict_open(
    u: np.ndarray,
    dims_in: Sequence[int],
    dims_out: Sequence[int],
    known_output: Given,
    guess_input_mask: Mask,
) -> ProbabilityTable:
    """Postdiction with partial data: ignored output factors carry flat weights 1/d,
    input factors outside the guess mask are marginalized with a bare identity."""
    u, dims_in, dims_out, known_output, mask = _validate_open_args(
        u, dims_in, dims_out, known_output, guess_input_mask
    )
    if len(known_output) != len(dims_out) or len(mask) != len(dims_in):
        raise ValueError("per-factor arguments must match the dimension partitions")
    effect = _data_side_operator(dims_out, known_output, normalized=True)
    pulled_back = dagger(u) @ effect @ u
    labels, keep = _guessed_labels(dims_in, mask)
    reduced = linalg.partial_trace(pulled_back, dims_in, keep)
    probs = np.diagonal(reduced).real
    return ProbabilityTable.from_values(labels, probs, given=_given_label(known_output), direction="postdict")


# ---------------------------------------------------------------------------
# Quantum channels
# ---------------------------------------------------------------------------


def predict_channel(channel: QuantumMap, a: int) -> ProbabilityTable:
    """Generalized Born rule P(x | a) = tr |x><x| channel[|a><a|]."""
    check_cptp(channel)
    if not 0 <= a < channel.dim_in:
        raise ValueError(f"preparation outcome {a} out of range for dimension {channel.dim_in}")
    image = apply(channel, linalg.basis_projector(channel.dim_in, a))
    probs = np.diagonal(image).real
    labels = [str(x) for x in range(channel.dim_out)]
    return ProbabilityTable.from_values(labels, probs, given=str(a), direction="predict")


def postdict_channel(channel: QuantumMap, x: int) -> ProbabilityTable:
    """Flat-prior Bayes inversion of the generalized Born rule.

    The table carries the normalization factor f(x) = 1 / tr |x><x| channel[I],
    which multiplies the prediction probabilities into the postdiction ones.
    """
    check_cptp(channel)
    if not 0 <= x < channel.dim_out:
        raise ValueError(f"test outcome {x} out of range for dimension {channel.dim_out}")
    # Heisenberg picture: tr(|x><x| channel[|a><a|]) = <a| adjoint[|x><x|] |a>.
    pulled_back = apply(adjoint_map(channel), linalg.basis_projector(channel.dim_out, x))
    numerators = np.diagonal(pulled_back).real
    evidence = float(numerators.sum())
    if evidence < 1e-12:
        raise UndefinedConditionalError(
            f"test outcome {x} has zero probability under the flat prior"
        )
    labels = [str(a) for a in range(channel.dim_in)]
    return ProbabilityTable.from_values(
        labels, numerators / evidence, given=str(x), direction="postdict", factor=1.0 / evidence
    )


def postdict_channel_via_purification(
    channel: QuantumMap, x: int, purification: Purification | None = None
) -> ProbabilityTable:
    """Postdiction computed on a purification instead of the channel itself.

    Solves the purified open-system postdiction task and conditions on the
    ancilla preparation outcome: P(a | x) = P(a, b | x, U) / P(b | x, U).
    Any purification of the channel gives the same table.
    """
    check_cptp(channel)
    if purification is None:
        purification = stinespring(channel)
    if purification.pointer_partition is not None:
        raise ValueError("expected a channel purification, not an instrument purification")
    d_a, d_b = purification.dims_in
    if d_a != channel.dim_in:
        raise ValueError("purification input dimension does not match the channel")
    # Re-express the task in an ancilla basis whose first element is the
    # ancilla state, so conditioning on it is conditioning on basis slot 0.
    ancilla = purification.ancilla_state
    if np.allclose(ancilla, linalg.basis_ket(d_b, 0), atol=1e-14):
        u_eff = purification.unitary
    else:
        basis_change = linalg.complete_to_unitary(ancilla[:, None], [0])
        u_eff = purification.unitary @ np.kron(np.eye(d_a, dtype=complex), basis_change)
    joint = postdict_open(
        u_eff,
        purification.dims_in,
        purification.dims_out,
        known_output=(x, None),
        guess_input_mask=(True, True),
    )
    numerators = np.array([joint[join_labels(str(a), "0")] for a in range(d_a)])
    evidence = float(numerators.sum())
    if evidence < 1e-12:
        raise UndefinedConditionalError(
            f"test outcome {x} has zero probability under the flat prior"
        )
    labels = [str(a) for a in range(d_a)]
    return ProbabilityTable.from_values(
        labels, numerators / evidence, given=str(x), direction="postdict"
    )


# ---------------------------------------------------------------------------
# General (not necessarily orthogonal) preparations
# ---------------------------------------------------------------------------


def _check_preparation_states(states: Sequence[np.ndarray], d: int | None = None) -> list[np.ndarray]:
    checked = []
    for i, psi in enumerate(states):
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        if d is None:
            d = psi.shape[0]
        if psi.shape != (d,):
            raise ValueError(f"state {i} has length {psi.shape[0]}, expected {d}")
        if abs(np.linalg.norm(psi) - 1.0) > ATOL_STRUCTURAL:
            raise ValueError(f"state {i} is not normalized")
        checked.append(psi)
    if not checked:
        raise ValueError("at least one preparation state is required")
    return checked


def predict_general_prep(states: Sequence[np.ndarray], u: np.ndarray) -> list[ProbabilityTable]:
    """One prediction row per preparation state: P(x | psi_i) = |<x|U|psi_i>|^2."""
    u = _check_unitary_arg(u)
    states = _check_preparation_states(states, u.shape[0])
    labels = [str(x) for x in range(u.shape[0])]
    rows = []
    for i, psi in enumerate(states):
        probs = np.abs(u @ psi) ** 2
        rows.append(ProbabilityTable.from_values(labels, probs, given=str(i), direction="predict"))
    return rows


def postdict_general_prep(states: Sequence[np.ndarray], u: np.ndarray, x: int) -> ProbabilityTable:
    """Flat prior over the listed states; Bayes inversion of the prediction rows."""
    u = _check_unitary_arg(u)
    states = _check_preparation_states(states, u.shape[0])
    if not 0 <= x < u.shape[0]:
        raise ValueError(f"test outcome {x} out of range for dimension {u.shape[0]}")
    numerators = np.array([abs(u[x, :] @ psi) ** 2 for psi in states])
    evidence = float(numerators.sum())
    if evidence < 1e-12:
        raise UndefinedConditionalError(
            f"test outcome {x} has zero probability under the flat prior"
        )
    labels = [str(i) for i in range(len(states))]
    return ProbabilityTable.from_values(
        labels, numerators / evidence, given=str(x), direction="postdict"
    )


def preparation_unitary(states: Sequence[np.ndarray]) -> np.ndarray:
    """Controlled preparation on A (x) B: |a_0>|b_i> -> |psi_i>|b_i>.

    B is an n-dimensional ancilla recording which state was prepared; the
    remaining columns are completed deterministically.
    """
    states = _check_preparation_states(states)
    n = len(states)
    d = states[0].shape[0]
    columns = np.zeros((d * n, n), dtype=complex)
    for i, psi in enumerate(states):
        columns[:, i] = np.kron(psi, linalg.basis_ket(n, i))
    # Column slots for |a_0> (x) |b_i> in the A-first convention are 0*n + i.
    return linalg.complete_to_unitary(columns, list(range(n)))


@dataclass(frozen=True)
class GeneralPrepCheck:
    direct: ProbabilityTable
    purified: ProbabilityTable
    max_defect: float


def general_prep_purified_check(
    states: Sequence[np.ndarray], u: np.ndarray, x: int
) -> GeneralPrepCheck:
    """Verify that postdiction over general preparations is a purified-task ratio.

    Builds U' = (U (x) I) U_P and compares P(psi_i | x, U) with
    P(a_0, b_i | x, U') / P(a_0 | x, U').
    """
    u = _check_unitary_arg(u)
    states = _check_preparation_states(states, u.shape[0])
    n = len(states)
    d = u.shape[0]
    direct = postdict_general_prep(states, u, x)
    u_prime = np.kron(u, np.eye(n, dtype=complex)) @ preparation_unitary(states)
    joint = postdict_open(
        u_prime, (d, n), (d, n), known_output=(x, None), guess_input_mask=(True, True)
    )
    numerators = np.array([joint[join_labels("0", str(i))] for i in range(n)])
    evidence = float(numerators.sum())
    if evidence < 1e-12:
        raise UndefinedConditionalError(
            f"test outcome {x} has zero probability under the flat prior"
        )
    purified = ProbabilityTable.from_values(
        [str(i) for i in range(n)], numerators / evidence, given=str(x), direction="postdict"
    )
    return GeneralPrepCheck(direct, purified, direct.max_difference(purified))


# ---------------------------------------------------------------------------
# Inference tasks and time reversal
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InferenceTask:
    """A prepare-transform-measure inference problem.

    ``known_input_mask`` marks the input factors that take part in the task:
    they carry given outcomes when predicting and are the guessed alternatives
    when postdicting.  ``known_output_mask`` plays the mirrored role on the
    output side.  Factors outside the masks are ignored (flat prior on the
    data side, marginalized on the guessing side).  ``preparation_states``
    switches the input alternatives from a basis to an arbitrary pure-state
    set; ``given_outcome`` conditions on an instrument outcome label when
    postdicting through an instrument.
    """

    transformation: np.ndarray | QuantumMap | Instrument
    dims_in: tuple[int, ...]
    dims_out: tuple[int, ...]
    direction: str
    known_input_mask: tuple[bool, ...]
    known_output_mask: tuple[bool, ...]
    given_input: tuple[int | None, ...] = ()
    given_output: tuple[int | None, ...] = ()
    preparation_states: tuple[np.ndarray, ...] | None = None
    given_outcome: str | None = None

    def __post_init__(self):
        if self.direction not in ("predict", "postdict"):
            raise ValueError(f"unknown direction {self.direction!r}")
        dims_in = tuple(int(d) for d in self.dims_in)
        dims_out = tuple(int(d) for d in self.dims_out)
        object.__setattr__(self, "dims_in", dims_in)
        object.__setattr__(self, "dims_out", dims_out)
        object.__setattr__(self, "known_input_mask", tuple(bool(m) for m in self.known_input_mask))
        object.__setattr__(self, "known_output_mask", tuple(bool(m) for m in self.known_output_mask))
        given_input = tuple(self.given_input) if self.given_input else (None,) * len(dims_in)
        given_output = tuple(self.given_output) if self.given_output else (None,) * len(dims_out)
        object.__setattr__(self, "given_input", given_input)
        object.__setattr__(self, "given_output", given_output)
        if len(self.known_input_mask) != len(dims_in) or len(given_input) != len(dims_in):
            raise ValueError("input masks and outcomes must have one entry per input factor")
        if len(self.known_output_mask) != len(dims_out) or len(given_output) != len(dims_out):
            raise ValueError("output masks and outcomes must have one entry per output factor")
        if self.preparation_states is not None:
            states = tuple(np.asarray(s, dtype=complex) for s in self.preparation_states)
            object.__setattr__(self, "preparation_states", states)
            if len(dims_in) != 1:
                raise ValueError("preparation state sets require a single input factor")
            if not isinstance(self.transformation, np.ndarray):
                raise ValueError("preparation state sets require a unitary transformation")
        total_in = linalg.dims_total(dims_in)
        total_out = linalg.dims_total(dims_out)
        if isinstance(self.transformation, Instrument) or isinstance(self.transformation, QuantumMap):
            if (total_in, total_out) != (self.transformation.dim_in, self.transformation.dim_out):
                raise ValueError("declared dimensions do not match the transformation")
        else:
            u = np.asarray(self.transformation, dtype=complex)
            if total_in != total_out or u.shape != (total_in, total_in):
                raise ValueError("declared dimensions do not match the transformation matrix")

    def transformation_kind(self) -> str:
        if isinstance(self.transformation, Instrument):
            return "instrument"
        if isinstance(self.transformation, QuantumMap):
            return "channel"
        return "unitary"


def _masked_given(given: Given, mask: Mask) -> tuple[int | None, ...]:
    return tuple(g if m else None for g, m in zip(given, mask))


def _require_given(given: Given, mask: Mask, side: str) -> None:
    missing = [k for k, (g, m) in enumerate(zip(given, mask)) if m and g is None]
    if missing:
        raise ValueError(f"solving this task requires given outcomes on {side} factors {missing}")


def solve(task: InferenceTask) -> ProbabilityTable:
    """Dispatch an inference task to the matching closed-form solver.

    Solving needs the data: a predict task must carry outcomes on its known
    input factors, a postdict task on its known output factors.  Tasks without
    them are still valid as ensemble descriptions for the sampler.
    """
    kind = task.transformation_kind()
    if task.direction == "predict" and task.preparation_states is None:
        _require_given(task.given_input, task.known_input_mask, "input")
    if task.direction == "postdict":
        _require_given(task.given_output, task.known_output_mask, "output")
    if kind == "unitary":
        u = np.asarray(task.transformation, dtype=complex)
        if task.preparation_states is not None:
            if task.direction == "predict":
                index = task.given_input[0]
                if index is None or not 0 <= index < len(task.preparation_states):
                    raise ValueError("prediction requires the index of the prepared state")
                return predict_general_prep(task.preparation_states, u)[index]
            x = task.given_output[0]
            return postdict_general_prep(task.preparation_states, u, x)
        if task.direction == "predict":
            return predict_open(
                u,
                task.dims_in,
                task.dims_out,
                _masked_given(task.given_input, task.known_input_mask),
                task.known_output_mask,
            )
        return postdict_open(
            u,
            task.dims_in,
            task.dims_out,
            _masked_given(task.given_output, task.known_output_mask),
            task.known_input_mask,
        )

    if kind == "channel":
        channel = task.transformation
        if task.direction == "predict":
            if task.given_input[0] is None:
                raise ValueError("channel prediction requires the preparation outcome")
            return predict_channel(channel, task.given_input[0])
        return postdict_channel(channel, task.given_output[0])

    inst = task.transformation
    if task.direction == "predict":
        a = task.given_input[0]
        if a is None:
            raise ValueError("instrument prediction requires the preparation outcome")
        rho = linalg.basis_projector(inst.dim_in, a)
        entries = {}
        for label, qmap in inst.outcomes:
            probs = np.diagonal(apply(qmap, rho)).real
            for x in range(inst.dim_out):
                key = join_labels(label, str(x)) if len(inst.outcomes) > 1 else str(x)
                entries[key] = float(probs[x])
        return ProbabilityTable(entries, given=str(a), direction="predict")
    x = task.given_output[0]
    if len(inst.outcomes) > 1 and task.given_outcome is None:
        raise ValueError("postdiction through an instrument requires the observed outcome label")
    label = task.given_outcome if task.given_outcome is not None else inst.outcomes[0][0]
    qmap = inst.map_for(label)
    pulled_back = apply(adjoint_map(qmap), linalg.basis_projector(inst.dim_out, x))
    numerators = np.diagonal(pulled_back).real
    evidence = float(numerators.sum())
    if evidence < 1e-12:
        raise UndefinedConditionalError("observed outcome has zero probability under the flat prior")
    given = join_labels(label, str(x)) if len(inst.outcomes) > 1 else str(x)
    return ProbabilityTable.from_values(
        [str(a) for a in range(inst.dim_in)],
        numerators / evidence,
        given=given,
        direction="postdict",
    )


def time_reverse(task: InferenceTask) -> InferenceTask:
    """The task about the same events with the arrow of time flipped.

    The transformation is replaced by its adjoint and the preparation and test
    sides swap, so the given data stays attached to the same physical factors
    while the inference direction flips.  The reversed task has the same
    solution table as the original when the transformation is unitary or a
    unital channel.  A channel whose adjoint is not a channel has no reversed
    task.
    """
    kind = task.transformation_kind()
    if kind == "unitary":
        reversed_transformation: np.ndarray | QuantumMap = dagger(
            np.asarray(task.transformation, dtype=complex)
        )
    elif kind == "channel":
        candidate = adjoint_map(task.transformation)
        info = classify(candidate)
        if not (info.is_cp and info.is_tp):
            raise NoActiveReverseError(
                "the adjoint map is not trace preserving; only unital channels admit an active reversal"
            )
        reversed_transformation = candidate
    else:
        raise ValueError("time reversal is defined for unitary and channel tasks")
    if task.preparation_states is not None:
        raise ValueError("time reversal requires basis preparations")
    return InferenceTask(
        transformation=reversed_transformation,
        dims_in=task.dims_out,
        dims_out=task.dims_in,
        direction="postdict" if task.direction == "predict" else "predict",
        known_input_mask=task.known_output_mask,
        known_output_mask=task.known_input_mask,
        given_input=task.given_output,
        given_output=task.given_input,
    )


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourTaskReport:
    """The four conceptually distinct probabilities that share one value."""

    predict_forward: float
    postdict_forward: float
    predict_reversed: float
    postdict_reversed: float
    reference: float
    max_defect: float = field(init=False)

    def __post_init__(self):
        defect = max(
            abs(v - self.reference)
            for v in (
                self.predict_forward,
                self.postdict_forward,
                self.predict_reversed,
                self.postdict_reversed,
            )
        )
        object.__setattr__(self, "max_defect", defect)


def four_task_check(transformation: np.ndarray | QuantumMap, a: int, x: int) -> FourTaskReport:
    """Evaluate prediction and postdiction for a transformation and its adjoint.

    For a unitary U the reference is |<x|U|a>|^2; for a unital channel it is
    tr |x><x| channel[|a><a|].  All four task solutions must coincide with it.
    """
    if isinstance(transformation, QuantumMap):
        channel = transformation
        info = classify(channel)
        if not (info.is_cp and info.is_tp and info.is_unital):
            raise ValueError("the four-task equality holds for unital channels only")
        reverse = adjoint_map(channel)
        reference = float(
            np.trace(
                linalg.basis_projector(channel.dim_out, x)
                @ apply(channel, linalg.basis_projector(channel.dim_in, a))
            ).real
        )
        return FourTaskReport(
            predict_forward=predict_channel(channel, a)[str(x)],
            postdict_forward=postdict_channel(channel, x)[str(a)],
            predict_reversed=predict_channel(reverse, x)[str(a)],
            postdict_reversed=postdict_channel(reverse, a)[str(x)],
            reference=reference,
        )
    u = _check_unitary_arg(np.asarray(transformation, dtype=complex))
    reference = float(abs(u[x, a]) ** 2)
    return FourTaskReport(
        predict_forward=predict_closed(u, a)[str(x)],
        postdict_forward=postdict_closed(u, x)[str(a)],
        predict_reversed=predict_closed(dagger(u), x)[str(a)],
        postdict_reversed=postdict_closed(dagger(u), a)[str(x)],
        reference=reference,
    )


def open_reversal_check(
    u: np.ndarray, dims_in: Sequence[int], dims_out: Sequence[int] | None = None
) -> dict[str, float]:
    """Check all six open-system relations between a task and its time reverse.

    Each relation equates a table computed from U with one computed from the
    adjoint of U, with the data and guess sides swapped.  Returns the maximum
    defect per relation plus an overall ``max`` entry.
    """
    dims_in = tuple(int(d) for d in dims_in)
    dims_out = tuple(int(d) for d in dims_out) if dims_out is not None else dims_in
    u = np.asarray(u, dtype=complex)
    ud = dagger(u)
    d_x, d_y = dims_out

    defects: dict[str, float] = {}

    defect = 0.0
    for x in range(d_x):
        for y in range(d_y):
            lhs = predict_open(ud, dims_out, dims_in, (x, y), (True, False))
            rhs = postdict_open(u, dims_in, dims_out, (x, y), (True, False))
            defect = max(defect, lhs.max_difference(rhs))
    defects["pre-a-xy"] = defect

    defect = 0.0
    for x in range(d_x):
        lhs = predict_open(ud, dims_out, dims_in, (x, None), (True, True))
        rhs = postdict_open(u, dims_in, dims_out, (x, None), (True, True))
        defect = max(defect, lhs.max_difference(rhs))
    defects["pre-ab-x"] = defect

    defect = 0.0
    for a in range(dims_in[0]):
        lhs = postdict_open(ud, dims_out, dims_in, (a, None), (True, True))
        rhs = predict_open(u, dims_in, dims_out, (a, None), (True, True))
        defect = max(defect, lhs.max_difference(rhs))
    defects["post-xy-a"] = defect

    defect = 0.0
    for a in range(dims_in[0]):
        for b in range(dims_in[1]):
            lhs = postdict_open(ud, dims_out, dims_in, (a, b), (True, False))
            rhs = predict_open(u, dims_in, dims_out, (a, b), (True, False))
            defect = max(defect, lhs.max_difference(rhs))
    defects["post-x-ab"] = defect

    defect = 0.0
    for x in range(d_x):
        lhs = predict_open(ud, dims_out, dims_in, (x, None), (True, False))
        rhs = postdict_open(u, dims_in, dims_out, (x, None), (True, False))
        defect = max(defect, lhs.max_difference(rhs))
    defects["pre-a-x"] = defect

    defect = 0.0
    for a in range(dims_in[0]):
        lhs = postdict_open(ud, dims_out, dims_in, (a, None), (True, False))
        rhs = predict_open(u, dims_in, dims_out, (a, None), (True, False))
        defect = max(defect, lhs.max_difference(rhs))
    defects["post-x-a"] = defect

    defects["max"] = max(defects.values())
    return defects


@dataclass(frozen=True)
class TowardsPastReport:
    born_value: float
    reversed_postdiction: float
    defect: float


def channel_toward_past_check(
    channel: QuantumMap, a: int, x: int, purification: Purification | None = None
) -> TowardsPastReport:
    """The generalized Born value doubles as a time-reversed postdiction.

    tr |x><x| channel[|a><a|] equals the postdiction of x in the task where
    the purifying unitary runs backwards and the outputs (a, ancilla) are the
    data, whether or not the channel itself admits an active reversal.
    """
    check_cptp(channel)
    if purification is None:
        purification = stinespring(channel)
    born = float(
        np.trace(
            linalg.basis_projector(channel.dim_out, x)
            @ apply(channel, linalg.basis_projector(channel.dim_in, a))
        ).real
    )
    reversed_table = postdict_open(
        dagger(purification.unitary),
        purification.dims_out,
        purification.dims_in,
        known_output=(a, 0),
        guess_input_mask=(True, False),
    )
    value = reversed_table[str(x)]
    return TowardsPastReport(born, value, abs(born - value))


# ---------------------------------------------------------------------------
# No signalling from the further unknown
# ---------------------------------------------------------------------------


def _sequential_joint(e: Instrument, f: Instrument, rho: np.ndarray) -> np.ndarray:
    """Joint outcome probabilities of f o e as a (|e|, |f|) array, by composition."""
    joint_table = outcome_probabilities(compose_sequential(e, f), rho)
    values = joint_table.probabilities().reshape(len(e.outcomes), len(f.outcomes))
    return values


@dataclass(frozen=True)
class NoSignallingReport:
    marginal_defect: float
    purified_defect: float
    conditional_defect: float
    skipped_conditionals: tuple[str, ...]

    @property
    def max_defect(self) -> float:
        return max(self.marginal_defect, self.purified_defect, self.conditional_defect)


def no_signalling_check(
    e: Instrument, f: Instrument, rho: np.ndarray, extra_followers: int = 4, seed: int = 0
) -> NoSignallingReport:
    """Marginalizing a later operation leaves the earlier statistics unchanged.

    Three readings are verified: (i) the prediction marginals of f o e match
    the statistics of e alone, for the given f and ``extra_followers`` random
    ones; (ii) the purified postdiction reading, where both operations are
    dilated and run backwards; (iii) conditioning on the later outcome does
    update the earlier guess, by exactly the sequential probability ratio.
    """
    if e.dim_out != f.dim_in:
        raise ValueError("instruments are not composable: output and input dimensions differ")
    rho = linalg.check_state(rho, e.dim_in)

    alone = outcome_probabilities(e, rho).probabilities()

    followers = [f]
    for t in range(extra_followers):
        followers.append(random_instrument(f.dim_in, len(f.outcomes), 2, seed + 101 * (t + 1)))
    marginal_defect = 0.0
    for follower in followers:
        joint = _sequential_joint(e, follower, rho)
        marginal_defect = max(marginal_defect, float(np.max(np.abs(joint.sum(axis=1) - alone))))

    joint = _sequential_joint(e, f, rho)
    conditional_defect = 0.0
    skipped: list[str] = []
    grained_e = coarse_grain(e)
    evolved = apply(grained_e, rho)
    for j, (label_j, map_j) in enumerate(f.outcomes):
        weight = joint[:, j].sum()
        denominator = float(np.trace(apply(map_j, evolved)).real)
        if weight < 1e-12:
            skipped.append(label_j)
            continue
        for i, (label_i, map_i) in enumerate(e.outcomes):
            direct = float(np.trace(apply(map_j, apply(map_i, rho))).real) / denominator
            conditional_defect = max(conditional_defect, abs(joint[i, j] / weight - direct))

    purified_defect = _purified_no_signalling_defect(e, f)

    return NoSignallingReport(
        marginal_defect=marginal_defect,
        purified_defect=purified_defect,
        conditional_defect=conditional_defect,
        skipped_conditionals=tuple(skipped),
    )


def _purified_no_signalling_defect(e: Instrument, f: Instrument) -> float:
    """Postdiction reading of no signalling on canonical dilations of e and f.

    Both instruments are purified, chained into one unitary, and run backwards:
    summing the guess over the second pointer must reproduce the postdiction
    computed from the first dilation alone, for every data outcome (a, b, c).
    """
    pe = purify_instrument(e)
    pf = purify_instrument(f)
    d_a, d_be = pe.dims_in
    d_d = e.dim_out
    m_e, z_e = pe.pointer_partition
    _, d_bf = pf.dims_in
    d_z2 = f.dim_out
    m_f, z_f = pf.pointer_partition

    # Forward chain on A (x) B_e (x) B_f; the first dilation leaves factors
    # (D, P_e, Z_e), the second consumes D and leaves (Z2, P_f, Z_f).
    step1 = np.kron(pe.unitary, np.eye(d_bf, dtype=complex))
    perm = linalg.permutation_matrix((d_d, m_e, z_e, d_bf), (0, 3, 1, 2))
    step2 = np.kron(pf.unitary, np.eye(m_e * z_e, dtype=complex))
    chain = step2 @ perm @ step1

    dims_fwd_in = (d_a, d_be, d_bf)
    dims_fwd_out = (d_z2, m_f, z_f, m_e, z_e)
    chain_back = dagger(chain)

    defect = 0.0
    for a in range(d_a):
        joint = postdict_open(
            chain_back,
            dims_fwd_out,
            dims_fwd_in,
            known_output=(a, 0, 0),
            guess_input_mask=(False, True, False, True, False),
        )
        single = postdict_open(
            dagger(pe.unitary),
            (d_d, m_e, z_e),
            pe.dims_in,
            known_output=(a, 0),
            guess_input_mask=(False, True, False),
        )
        for x in range(m_e):
            summed = sum(joint[join_labels(str(y), str(x))] for y in range(m_f))
            defect = max(defect, abs(summed - single[str(x)]))
    return defect


# ---------------------------------------------------------------------------
# Inference symmetry and the deterministic effect
# ---------------------------------------------------------------------------


def _table_asymmetry(channel: QuantumMap) -> float:
    """Max |P_pre(x|a) - P_post(a|x)| over the computational bases."""
    worst = 0.0
    predictions = np.stack(
        [predict_channel(channel, a).probabilities() for a in range(channel.dim_in)], axis=1
    )  # indexed [x, a]
    for x in range(channel.dim_out):
        try:
            post = postdict_channel(channel, x).probabilities()
        except UndefinedConditionalError:
            # Zero-evidence outcome: the postdiction row cannot match any
            # normalized prediction column, so symmetry fails outright.
            return 1.0
        worst = max(worst, float(np.max(np.abs(predictions[x, :] - post))))
    return worst


def _rotated_channel(channel: QuantumMap, v: np.ndarray, w: np.ndarray) -> QuantumMap:
    """The same channel expressed in rotated preparation and test bases."""
    kraus = tuple(dagger(w) @ k @ v for k in channel.kraus)
    return QuantumMap(kraus, channel.dim_in, channel.dim_out)


def is_inference_symmetric(
    channel: QuantumMap, tol: float = ATOL_STRUCTURAL, basis_samples: int = 5, seed: int = 0
) -> bool:
    """Prediction and postdiction tables coincide for every basis pair.

    The identity-preservation criterion decides the answer; the tables are
    additionally compared over the computational bases and ``basis_samples``
    Haar-rotated basis pairs, and a disagreement raises, since the criterion
    quantifies over all bases while sampling can only corroborate it.
    """
    check_cptp(channel)
    verdict = classify(channel).is_unital
    samples = [_table_asymmetry(channel)]
    if channel.dim_in == channel.dim_out:
        for t in range(basis_samples):
            v = linalg.haar_random_unitary(channel.dim_in, seed + 2 * t)
            w = linalg.haar_random_unitary(channel.dim_out, seed + 2 * t + 1)
            samples.append(_table_asymmetry(_rotated_channel(channel, v, w)))
    sampled = max(samples) < max(tol, 1e-9)
    if sampled != verdict:
        raise RuntimeError(
            f"identity-preservation criterion ({verdict}) disagrees with sampled tables ({sampled})"
        )
    return verdict


@dataclass(frozen=True)
class DeterministicEffectReport:
    """Solution of sum_x w(x) adjoint[|x><x|] = I and its uniqueness margins."""

    weights: tuple[float, ...]
    solution_defect: float
    min_singular_value: float
    min_alternative_residual: float

    @property
    def unique_flat_solution(self) -> bool:
        return self.solution_defect < 1e-8 and self.min_singular_value > 1e-6


def deterministic_effect_check(
    channel: QuantumMap, n_random_candidates: int = 3, seed: int = 0
) -> DeterministicEffectReport:
    """Only the flat weighting w = 1 turns the output basis into a sure effect.

    Solves the linear system tr(sum_x w(x)|x><x| channel[rho]) = 1 for all rho
    and reports how far alternative weightings miss it.
    """
    check_cptp(channel)
    adj = adjoint_map(channel)
    columns = [apply(adj, linalg.basis_projector(channel.dim_out, x)) for x in range(channel.dim_out)]
    m = np.stack([c.reshape(-1) for c in columns], axis=1)
    target = np.eye(channel.dim_in, dtype=complex).reshape(-1)
    m_real = np.vstack([m.real, m.imag])
    t_real = np.concatenate([target.real, target.imag])
    weights, _, _, singular_values = np.linalg.lstsq(m_real, t_real, rcond=None)
    solution_defect = float(np.max(np.abs(weights - 1.0)))

    rng = np.random.default_rng(seed)
    candidates = []
    for x in range(channel.dim_out):
        bump = np.ones(channel.dim_out)
        bump[x] += 0.5
        candidates.append(bump)
    for _ in range(n_random_candidates):
        w = rng.uniform(0.0, 2.0, channel.dim_out)
        if np.max(np.abs(w - 1.0)) < 0.25:
            w = w + 0.5  # keep candidates visibly away from the flat weighting
        candidates.append(w)
    min_residual = min(
        float(np.linalg.norm(m_real @ w - t_real)) for w in candidates
    )
    return DeterministicEffectReport(
        weights=tuple(float(w) for w in weights),
        solution_defect=solution_defect,
        min_singular_value=float(singular_values.min()) if singular_values.size else 0.0,
        min_alternative_residual=min_residual,
    )
