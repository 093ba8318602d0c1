"""Dense complex linear algebra: states, density matrices, signed Pauli
strings, channels, Choi matrices, distances, and the QRAM diagonal/resource
state.

Qubit k (0-based) is bit k of the basis index, so the first address bit is
the least significant bit, matching `boolfn`. ``tensor(a, b)`` places a on
the low qubits and b above it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .boolfn import DataTable
from .errors import DimensionMismatchError, InvariantViolation, SizeCapError

REGISTER_QUBIT_CAP = 6    # dense pure registers (resource states)
JOINT_QUBIT_CAP = 12      # dense joint density matrices

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = -1e-8           # absorbs roundoff from long channel compositions
NORM_TOL = 1e-9
TP_TOL = 1e-8

_VALIDATE = True


def set_validation(enabled: bool) -> None:
    """Toggle invariant checking at construction (on by default)."""
    global _VALIDATE
    _VALIDATE = bool(enabled)


def validation_enabled() -> bool:
    return _VALIDATE


def check_register_cap(num_qubits: int) -> None:
    if num_qubits > REGISTER_QUBIT_CAP:
        raise SizeCapError(
            f"register of {num_qubits} qubits exceeds cap {REGISTER_QUBIT_CAP}")


def check_joint_cap(num_qubits: int) -> None:
    if num_qubits > JOINT_QUBIT_CAP:
        raise SizeCapError(
            f"joint system of {num_qubits} qubits exceeds cap {JOINT_QUBIT_CAP}")


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (1 << self.num_qubits,):
            raise DimensionMismatchError("amplitude vector length is not 2^q")
        if _VALIDATE and abs(np.vdot(amps, amps).real - 1.0) > NORM_TOL:
            raise InvariantViolation("state vector is not normalized")

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits


@dataclass(frozen=True)
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", mat)
        d = 1 << self.num_qubits
        if mat.shape != (d, d):
            raise DimensionMismatchError("density matrix is not 2^q x 2^q")
        if _VALIDATE:
            if np.abs(mat - mat.conj().T).max() > HERMITICITY_TOL:
                raise InvariantViolation("density matrix is not Hermitian")
            if abs(np.trace(mat).real - 1.0) > TRACE_TOL:
                raise InvariantViolation("density matrix trace differs from 1")
            if np.linalg.eigvalsh(mat)[0] < PSD_TOL:
                raise InvariantViolation("density matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def pure_density(psi: StateVector) -> DensityMatrix:
    v = psi.amplitudes
    return DensityMatrix(psi.num_qubits, np.outer(v, v.conj()))


def plus_state(n: int) -> StateVector:
    check_register_cap(n)
    d = 1 << n
    return StateVector(n, np.full(d, 1.0 / np.sqrt(d), dtype=np.complex128))


def qram_unitary(g: DataTable) -> np.ndarray:
    """Diagonal of the dataset phase unitary: entry x is (-1)^g(x)."""
    check_register_cap(g.n)
    return 1.0 - 2.0 * g.to_array().astype(np.float64)


def resource_state(g: DataTable) -> StateVector:
    """The phase state with amplitude (-1)^g(x) / 2^(n/2) at x."""
    check_register_cap(g.n)
    d = 1 << g.n
    return StateVector(g.n, qram_unitary(g).astype(np.complex128) / np.sqrt(d))


# ---------------------------------------------------------------------------
# Signed Pauli strings: canonical form i^(a.b mod 2) (-1)^s X^b Z^a.

class PauliSubset(Enum):
    IDENTITY = "P0"
    MINUS_IDENTITY = "P1"
    Z_TYPE = "PZ"
    EVEN = "Peven"
    ODD = "Podd"


@dataclass(frozen=True, slots=True)
class PauliString:
    """Signed n-qubit Pauli i^(a.b) (-1)^s X^b Z^a with a, b packed as ints.

    Two PauliStrings are equal iff (s, a, b) are equal; the i factor makes
    every element Hermitian.
    """

    n: int
    s: int
    a: int
    b: int

    def __post_init__(self):
        top = 1 << self.n
        if not (0 <= self.a < top and 0 <= self.b < top and self.s in (0, 1)):
            raise DimensionMismatchError("Pauli components out of range")

    @property
    def phase(self) -> complex:
        p = 1j if (self.a & self.b).bit_count() & 1 else 1.0
        return -p if self.s else p


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense realization; Hermitian and unitary by construction."""
    check_register_cap(p.n)
    d = 1 << p.n
    x = np.arange(d)
    za = 1.0 - 2.0 * _dot_bits(x, p.a)  # (-1)^(a.x)
    mat = np.zeros((d, d), dtype=np.complex128)
    mat[x ^ p.b, x] = p.phase * za
    return mat


def _dot_bits(x: np.ndarray, mask: int) -> np.ndarray:
    """Parity of popcount(x AND mask) as a float array."""
    v = (np.asarray(x, dtype=np.int64) & mask).astype(np.int64)
    out = np.zeros(v.shape, dtype=np.int64)
    while v.any():
        out ^= v & 1
        v >>= 1
    return out.astype(np.float64)


def pauli_product(p: PauliString, q: PauliString) -> tuple[PauliString, complex]:
    """Canonical form of the operator product: p @ q = extra * canonical.

    ``extra`` is 1 when the two strings commute and +/-i otherwise (the
    product of two Hermitian Paulis is Hermitian only in the commuting case).
    """
    if p.n != q.n:
        raise DimensionMismatchError("Pauli sizes differ")
    a, b = p.a ^ q.a, p.b ^ q.b
    t = ((p.a & p.b).bit_count() & 1) + ((q.a & q.b).bit_count() & 1)
    t += 2 * (p.s + q.s + ((p.a & q.b).bit_count() & 1))
    delta = (t - ((a & b).bit_count() & 1)) % 4
    s = 1 if delta in (2, 3) else 0
    extra = 1j if delta % 2 else 1.0
    return PauliString(p.n, s, a, b), extra


def pauli_subset(p: PauliString) -> PauliSubset:
    if p.a == 0 and p.b == 0:
        return PauliSubset.MINUS_IDENTITY if p.s else PauliSubset.IDENTITY
    if p.b == 0:
        return PauliSubset.Z_TYPE
    if (p.a & p.b).bit_count() & 1:
        return PauliSubset.ODD
    return PauliSubset.EVEN


def subset_size(kind: PauliSubset, n: int) -> int:
    """Cardinalities of the canonical partition (verified by enumeration)."""
    if kind in (PauliSubset.IDENTITY, PauliSubset.MINUS_IDENTITY):
        return 1
    if kind is PauliSubset.Z_TYPE:
        return 2 * ((1 << n) - 1)
    # EVEN and ODD each contain 2^n (2^n - 1) elements.
    return (1 << n) * ((1 << n) - 1)


def enumerate_paulis(n: int):
    for s in (0, 1):
        for a in range(1 << n):
            for b in range(1 << n):
                yield PauliString(n, s, a, b)


def match_signed_pauli(matrix: np.ndarray, tol: float = 1e-9):
    """Return the PauliString whose dense form equals `matrix`, else None."""
    d = matrix.shape[0]
    n = d.bit_length() - 1
    nz = np.flatnonzero(np.abs(matrix[:, 0]) > 0.5)
    if len(nz) != 1:
        return None
    b = int(nz[0])
    x = np.arange(d)
    vals = matrix[x ^ b, x]  # phase * (-1)^(a.x)
    if np.abs(np.abs(vals) - 1.0).max() > tol:
        return None
    rel = vals / vals[0]  # (-1)^(a.x) when the input is a Pauli
    if np.abs(rel.imag).max() > tol:
        return None
    a = 0
    for i in range(n):
        if rel.real[1 << i] < 0:
            a |= 1 << i
    for s in (0, 1):
        cand = PauliString(n, s, a, b)
        if np.abs(pauli_matrix(cand) - matrix).max() <= tol:
            return cand
    return None


# ---------------------------------------------------------------------------
# Channels.

@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive trace-preserving map given by a Kraus list."""

    in_qubits: int
    out_qubits: int
    kraus: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in self.kraus)
        object.__setattr__(self, "kraus", ops)
        din, dout = 1 << self.in_qubits, 1 << self.out_qubits
        for k in ops:
            if k.shape != (dout, din):
                raise DimensionMismatchError("Kraus operator has wrong shape")
        if _VALIDATE:
            acc = sum(k.conj().T @ k for k in ops)
            if np.abs(acc - np.eye(din)).max() > TP_TOL:
                raise InvariantViolation("channel is not trace preserving")

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.num_qubits != self.in_qubits:
            raise DimensionMismatchError("channel/state size mismatch")
        out = apply_kraus(self.kraus, rho.matrix)
        return DensityMatrix(self.out_qubits, out)


def apply_kraus(kraus, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((kraus[0].shape[0], kraus[0].shape[0]), dtype=np.complex128)
    for k in kraus:
        out += k @ mat @ k.conj().T
    return out


def apply_channel(ch: QuantumChannel, rho: DensityMatrix) -> DensityMatrix:
    return ch.apply(rho)


def identity_channel(n: int) -> QuantumChannel:
    return QuantumChannel(n, n, (np.eye(1 << n),))


def unitary_channel(u: np.ndarray) -> QuantumChannel:
    d = u.shape[0]
    n = d.bit_length() - 1
    return QuantumChannel(n, n, (u,))


def compose(after: QuantumChannel, before: QuantumChannel) -> QuantumChannel:
    """after . before as a single Kraus list."""
    if before.out_qubits != after.in_qubits:
        raise DimensionMismatchError("channel composition size mismatch")
    ops = tuple(a @ b for a in after.kraus for b in before.kraus)
    return QuantumChannel(before.in_qubits, after.out_qubits, ops)


def dephasing_channel(n: int, qubits) -> QuantumChannel:
    """Complete dephasing of the given qubits (projectors onto their values)."""
    d = 1 << n
    qubits = sorted(qubits)
    ops = []
    x = np.arange(d)
    for outcome in range(1 << len(qubits)):
        sel = np.ones(d, dtype=bool)
        for j, q in enumerate(qubits):
            sel &= ((x >> q) & 1) == ((outcome >> j) & 1)
        proj = np.zeros((d, d), dtype=np.complex128)
        idx = np.flatnonzero(sel)
        proj[idx, idx] = 1.0
        ops.append(proj)
    return QuantumChannel(n, n, tuple(ops))


def tensor(a, b):
    """Joint system with `a` on the low qubits and `b` above it."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        nq = a.num_qubits + b.num_qubits
        check_joint_cap(nq)
        return StateVector(nq, np.kron(b.amplitudes, a.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        nq = a.num_qubits + b.num_qubits
        check_joint_cap(nq)
        return DensityMatrix(nq, np.kron(b.matrix, a.matrix))
    raise DimensionMismatchError("tensor expects two states or two densities")


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out all qubits not in `keep`; kept qubits are re-packed in order."""
    q = rho.num_qubits
    keep = sorted(keep)
    traced = [i for i in range(q) if i not in keep]
    t = rho.matrix.reshape([2] * (2 * q))
    # axis of row-bit k is q-1-k, of column-bit k is 2q-1-k
    row = {k: q - 1 - k for k in range(q)}
    col = {k: 2 * q - 1 - k for k in range(q)}
    labels = [0] * (2 * q)
    nxt = 0
    for k in traced:
        labels[row[k]] = labels[col[k]] = nxt
        nxt += 1
    out_row, out_col = [], []
    for k in reversed(keep):  # most significant kept bit first
        labels[row[k]] = nxt
        out_row.append(nxt)
        nxt += 1
    for k in reversed(keep):
        labels[col[k]] = nxt
        out_col.append(nxt)
        nxt += 1
    res = np.einsum(t, labels, out_row + out_col)
    d = 1 << len(keep)
    return DensityMatrix(len(keep), res.reshape(d, d))


def measure_computational(rho: DensityMatrix, qubits):
    """Projective measurement of `qubits` in the computational basis.

    Returns (outcome, probability, post_state) triples over all outcomes;
    the post state keeps the full register (collapsed and renormalized) and
    is None for zero-probability outcomes.
    """
    q = rho.num_qubits
    qubits = sorted(qubits)
    d = 1 << q
    x = np.arange(d)
    results = []
    for outcome in range(1 << len(qubits)):
        sel = np.ones(d, dtype=bool)
        for j, qq in enumerate(qubits):
            sel &= ((x >> qq) & 1) == ((outcome >> j) & 1)
        idx = np.flatnonzero(sel)
        prob = float(rho.matrix[idx, idx].real.sum())
        if prob < 1e-15:
            results.append((outcome, max(prob, 0.0), None))
            continue
        post = np.zeros_like(rho.matrix)
        post[np.ix_(idx, idx)] = rho.matrix[np.ix_(idx, idx)] / prob
        results.append((outcome, prob, DensityMatrix(q, post)))
    return results


def choi(ch: QuantumChannel) -> np.ndarray:
    """Normalized Choi matrix (trace one): (id x ch) on the maximally
    entangled pair, with the reference register on the low qubits."""
    din = 1 << ch.in_qubits
    check_joint_cap(ch.in_qubits + ch.out_qubits)
    k = np.stack(ch.kraus)  # (K, dout, din)
    vecs = k.reshape(k.shape[0], -1)  # row k = K_k flattened as (out, ref)
    return (vecs.T @ vecs.conj()) / din


def trace_distance(a, b) -> float:
    """Half the trace norm of the difference of two Hermitian matrices."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    if ma.shape != mb.shape:
        raise DimensionMismatchError("trace distance of unequal shapes")
    return 0.5 * float(np.abs(np.linalg.eigvalsh(ma - mb)).sum())


def fidelity_pure(rho: DensityMatrix, psi: StateVector) -> float:
    if rho.num_qubits != psi.num_qubits:
        raise DimensionMismatchError("fidelity size mismatch")
    v = psi.amplitudes
    return float(np.real(v.conj() @ rho.matrix @ v))


def principal_eig(rho: DensityMatrix) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its eigenvector."""
    vals, vecs = np.linalg.eigh(rho.matrix)
    return float(vals[-1]), vecs[:, -1]
