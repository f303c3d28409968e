"""Purifications: channels and instruments as unitaries on system + ancilla.

The canonical construction stacks the (zero-padded) Kraus operators into the
isometry V = sum_k K_k (x) |k>, embeds its columns into a unitary at the
ancilla-|0> column slots, and completes the remaining columns
deterministically.  Countless purifications represent the same map; this
module builds exactly one and verifies any candidate against the original.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import Instrument, QuantumMap, apply, check_cptp
from .linalg import ATOL_STRUCTURAL, dagger


@dataclass(frozen=True, eq=False)
class Purification:
    """A unitary on A (x) B, a pure ancilla state on B, and the dimension split.

    ``dims_in`` is (d_A, d_B), ``dims_out`` is (d_X, d_Y).  For purified
    instruments ``pointer_partition`` splits Y into (pointer, discard) factors;
    outcome i corresponds to pointer basis slot i.
    """

    unitary: np.ndarray
    ancilla_state: np.ndarray
    dims_in: tuple[int, int]
    dims_out: tuple[int, int]
    pointer_partition: tuple[int, int] | None = None

    def __post_init__(self):
        u = np.array(self.unitary, dtype=complex)
        b = np.array(self.ancilla_state, dtype=complex).reshape(-1)
        d_a, d_b = (int(x) for x in self.dims_in)
        d_x, d_y = (int(x) for x in self.dims_out)
        if d_a * d_b != d_x * d_y:
            raise ValueError(f"dimension mismatch: {d_a}*{d_b} != {d_x}*{d_y}")
        if u.shape != (d_a * d_b, d_a * d_b):
            raise ValueError(f"unitary shape {u.shape} does not match total dimension {d_a * d_b}")
        if not linalg.is_unitary(u, ATOL_STRUCTURAL):
            raise ValueError("purifying matrix is not unitary within tolerance")
        if b.shape != (d_b,):
            raise ValueError(f"ancilla state length {b.shape} does not match d_B = {d_b}")
        if abs(np.linalg.norm(b) - 1.0) > ATOL_STRUCTURAL:
            raise ValueError("ancilla state is not normalized")
        if self.pointer_partition is not None:
            d_p, d_z = (int(x) for x in self.pointer_partition)
            if d_p * d_z != d_y:
                raise ValueError(f"pointer partition {(d_p, d_z)} does not factor d_Y = {d_y}")
            object.__setattr__(self, "pointer_partition", (d_p, d_z))
        u.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "ancilla_state", b)
        object.__setattr__(self, "dims_in", (d_a, d_b))
        object.__setattr__(self, "dims_out", (d_x, d_y))


def _padded_count(raw_count: int, d_x: int, d_a: int, outcomes: int = 1) -> int:
    """Smallest Kraus count r >= raw_count with d_A dividing d_X * outcomes * r."""
    r = max(raw_count, 1)
    while (d_x * outcomes * r) % d_a != 0:
        r += 1
    return r


def _embed_isometry(isometry: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """Complete V: A -> X(x)Y to a unitary with U(|a>(x)|0>_B) = V|a>."""
    gram_defect = np.max(np.abs(dagger(isometry) @ isometry - np.eye(d_a)))
    if gram_defect > 1e-12:
        raise ValueError(f"Kraus columns are not isometric: defect {gram_defect:.3e}")
    positions = [a * d_b for a in range(d_a)]
    return linalg.complete_to_unitary(isometry, positions)


def stinespring(channel: QuantumMap) -> Purification:
    """Canonical dilation of a CPTP map, with ancilla state |0>_B."""
    check_cptp(channel)
    d_a, d_x = channel.dim_in, channel.dim_out
    r = _padded_count(len(channel.kraus), d_x, d_a)
    isometry = np.zeros((d_x * r, d_a), dtype=complex)
    for k, op in enumerate(channel.kraus):
        isometry += np.kron(op, linalg.basis_ket(r, k)[:, None])
    d_b = (d_x * r) // d_a
    unitary = _embed_isometry(isometry, d_a, d_b)
    return Purification(
        unitary=unitary,
        ancilla_state=linalg.basis_ket(d_b, 0),
        dims_in=(d_a, d_b),
        dims_out=(d_x, r),
    )


def purify_instrument(inst: Instrument) -> Purification:
    """Dilation of an instrument with a pointer factor carrying the outcome label.

    Outcome i of the instrument is recovered by projecting the pointer factor
    onto basis slot i and discarding the pointer and the extra factor.
    """
    d_a, d_x = inst.dim_in, inst.dim_out
    m = len(inst.outcomes)
    r = _padded_count(max(len(qmap.kraus) for _, qmap in inst.outcomes), d_x, d_a, outcomes=m)
    isometry = np.zeros((d_x * m * r, d_a), dtype=complex)
    for i, (_, qmap) in enumerate(inst.outcomes):
        for k, op in enumerate(qmap.kraus):
            pointer = np.kron(linalg.basis_ket(m, i), linalg.basis_ket(r, k))
            isometry += np.kron(op, pointer[:, None])
    d_b = (d_x * m * r) // d_a
    unitary = _embed_isometry(isometry, d_a, d_b)
    return Purification(
        unitary=unitary,
        ancilla_state=linalg.basis_ket(d_b, 0),
        dims_in=(d_a, d_b),
        dims_out=(d_x, m * r),
        pointer_partition=(m, r),
    )


def reconstruct_channel_action(purification: Purification, rho: np.ndarray) -> np.ndarray:
    """tr_Y U (rho (x) |b><b|) U', the channel the purification represents."""
    d_a, _ = purification.dims_in
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d_a, d_a):
        raise ValueError(f"operator shape {rho.shape} does not match d_A = {d_a}")
    u = purification.unitary
    joint = np.kron(rho, linalg.projector(purification.ancilla_state))
    evolved = u @ joint @ dagger(u)
    return linalg.partial_trace(evolved, purification.dims_out, keep=[0])


def reconstruct_outcome_action(
    purification: Purification, outcome_index: int, rho: np.ndarray
) -> np.ndarray:
    """Project the pointer onto slot ``outcome_index`` and discard the ancilla output."""
    if purification.pointer_partition is None:
        raise ValueError("purification has no pointer factor")
    d_x, _ = purification.dims_out
    d_p, d_z = purification.pointer_partition
    u = purification.unitary
    joint = np.kron(np.asarray(rho, dtype=complex), linalg.projector(purification.ancilla_state))
    evolved = u @ joint @ dagger(u)
    proj = linalg.tensor(
        np.eye(d_x, dtype=complex), linalg.basis_projector(d_p, outcome_index), np.eye(d_z, dtype=complex)
    )
    return linalg.partial_trace(proj @ evolved @ proj, (d_x, d_p, d_z), keep=[0])


def verify_purification(
    original: QuantumMap | Instrument,
    purification: Purification,
    trials: int = 10,
    seed: int = 0,
) -> float:
    """Maximum entrywise round-trip defect on the operator basis plus random states."""
    d_a = purification.dims_in[0]
    probes = linalg.matrix_units(d_a)
    probes += [linalg.random_density_matrix(d_a, seed + t) for t in range(trials)]
    defect = 0.0
    if isinstance(original, Instrument):
        for i, (_, qmap) in enumerate(original.outcomes):
            for rho in probes:
                expected = apply(qmap, rho)
                got = reconstruct_outcome_action(purification, i, rho)
                defect = max(defect, float(np.max(np.abs(expected - got))))
    else:
        for rho in probes:
            expected = apply(original, rho)
            got = reconstruct_channel_action(purification, rho)
            defect = max(defect, float(np.max(np.abs(expected - got))))
    return defect


def rotate_ancilla(purification: Purification, seed: int) -> Purification:
    """An equivalent channel purification with Haar-rotated ancilla bases.

    The input-side rotation moves the ancilla state off |0>; the output-side
    rotation reshuffles the discarded factor.  Both leave the represented
    channel unchanged.  Pointer factors must stay aligned with outcome labels,
    so instrument purifications are not rotated.
    """
    if purification.pointer_partition is not None:
        raise ValueError("refusing to rotate the pointer basis of an instrument purification")
    d_a, d_b = purification.dims_in
    d_x, d_y = purification.dims_out
    v = linalg.haar_random_unitary(d_b, seed)
    w = linalg.haar_random_unitary(d_y, seed + 1)
    rotated = np.kron(np.eye(d_x), w) @ purification.unitary @ np.kron(np.eye(d_a), v)
    return Purification(
        unitary=rotated,
        ancilla_state=dagger(v) @ purification.ancilla_state,
        dims_in=(d_a, d_b),
        dims_out=(d_x, d_y),
    )
