"""Resource-state teleportation, the adaptive correction protocol, the
Clifford-hierarchy membership check, and the cost formulas.

Teleportation of a resource state phi into an address register acts, for
measurement outcome m, as elementwise multiplication of the address density
matrix by the m-shifted resource matrix:
rho[x, y] -> phi[x xor m, y xor m] * rho[x, y] (subnormalized; the trace is
the outcome probability). This closed form is exercised against the dense
CNOT-and-measure circuit in the tests and drives both protocol modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import boolfn
from .boolfn import NEG_INF, DataTable, SignedDataTable
from .device import NoisyDevice, apply_encoding_noise, noisy_resource_state
from .distill import CopySource, iterated_swap_test, qpca_simple, swap_test_levels
from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    PreconditionError,
    SizeCapError,
)
from .qcore import (
    DensityMatrix,
    QuantumChannel,
    check_joint_cap,
    choi,
    match_signed_pauli,
    measure_computational,
    partial_trace,
    pure_density,
    qram_unitary,
    resource_state,
    set_validation,
    tensor,
    trace_distance,
    validation_enabled,
)
from .rngutil import derive_rng
from .twirlset import twirled_state

ENUMERATE_CAP = 4  # total register qubits for exact branch enumeration


# ---------------------------------------------------------------------------
# Teleportation channels.

def ideal_teleport_channel(g: DataTable) -> QuantumChannel:
    """The mixture over outcomes m of applying the m-shifted dataset phase,
    with m recorded in a classical register above the data qubits."""
    n = g.n
    check_joint_cap(2 * n)
    d = 1 << n
    kraus = []
    scale = 1.0 / np.sqrt(d)
    for m in range(d):
        diag = qram_unitary(boolfn.shift(g, m))
        op = np.zeros((d * d, d), dtype=np.complex128)
        op[m * d + np.arange(d), np.arange(d)] = scale * diag
        kraus.append(op)
    return QuantumChannel(n, 2 * n, tuple(kraus))


def teleport_channel_from_resource(phi: DensityMatrix) -> QuantumChannel:
    """Teleportation with an arbitrary resource state, as a Kraus channel.

    Decomposing phi into eigenvectors v_i, the Kraus operator for outcome m
    and component i is sqrt(q_i) diag_x(v_i[x xor m]) stacked under |m>.
    """
    n = phi.num_qubits
    check_joint_cap(2 * n)
    d = 1 << n
    vals, vecs = np.linalg.eigh(phi.matrix)
    keep = vals > 1e-14
    vals, vecs = vals[keep], vecs[:, keep]
    kraus = []
    x = np.arange(d)
    for m in range(d):
        for i in range(vecs.shape[1]):
            op = np.zeros((d * d, d), dtype=np.complex128)
            op[m * d + x, x] = np.sqrt(vals[i]) * vecs[x ^ m, i]
            kraus.append(op)
    return QuantumChannel(n, 2 * n, tuple(kraus))


def teleport_once(rho_addr: DensityMatrix, resource: DensityMatrix,
                  rng: np.random.Generator) -> tuple[int, DensityMatrix]:
    """Dense teleportation circuit: tensor the registers, apply the
    transversal CNOTs (address controls, resource targets), measure the
    resource register, and return (outcome, post address state)."""
    n = rho_addr.num_qubits
    if resource.num_qubits != n:
        raise DimensionMismatchError("register sizes differ")
    joint = tensor(rho_addr, resource)
    d = 1 << n
    z = np.arange(d * d)
    addr, res = z % d, z // d
    perm = addr + d * (res ^ addr)  # CNOT fan: resource bit k ^= address bit k
    mat = joint.matrix[np.ix_(perm, perm)]
    post = DensityMatrix(2 * n, mat)
    outcomes = measure_computational(post, range(n, 2 * n))
    probs = np.array([p for _, p, _ in outcomes])
    m = int(rng.choice(len(outcomes), p=probs / probs.sum()))
    collapsed = outcomes[m][2]
    return m, partial_trace(collapsed, range(n))


def branch_multiplier(phi_matrix: np.ndarray, m: int) -> np.ndarray:
    """Elementwise factor applied to the address density matrix by the
    teleportation branch with outcome m (subnormalized by the outcome
    probability)."""
    d = phi_matrix.shape[0]
    idx = np.arange(d) ^ m
    return phi_matrix[np.ix_(idx, idx)]


def choi_gap(phi: DensityMatrix, g: DataTable) -> float:
    """Half the trace distance between the Choi matrices of the ideal
    teleportation channel for g and the channel using phi; a lower bound on
    the diamond distance, and itself bounded by the resource-state trace
    distance."""
    ideal = choi(ideal_teleport_channel(g))
    appr = choi(teleport_channel_from_resource(phi))
    return trace_distance(ideal, appr)


# ---------------------------------------------------------------------------
# Protocol configuration and trace.

@dataclass(frozen=True)
class DistillerSpec:
    kind: str = "none"             # none | swap_test | qpca_simple
    eps_dist: float = 0.0
    gamma: float | None = None     # qpca_simple only
    max_levels: int = 60

    def __post_init__(self):
        if self.kind not in ("none", "swap_test", "qpca_simple"):
            raise PreconditionError(f"unknown distiller {self.kind!r}")
        if self.kind != "none" and not 0 < self.eps_dist < 1:
            raise PreconditionError("eps_dist must lie in (0, 1)")


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    b: int = 0
    device: NoisyDevice | None = None
    encoding: object = None        # EncodingNoise | None
    twirl_mode: str = "off"        # off | exact | mc
    twirl_samples: int | None = None
    distiller: DistillerSpec = field(default_factory=DistillerSpec)
    max_rounds: int | None = None
    seed: int = 0
    branch_mode: str = "trajectory"
    copy_budget: int = 10**6

    def __post_init__(self):
        rounds_needed = self.n + (1 if self.b else 0)
        if self.max_rounds is not None and self.max_rounds < rounds_needed:
            raise PreconditionError("max_rounds below the protocol's round bound")
        if self.branch_mode not in ("trajectory", "enumerate_branches"):
            raise PreconditionError(f"unknown branch mode {self.branch_mode!r}")
        if self.twirl_mode not in ("off", "exact", "mc"):
            raise PreconditionError(f"unknown twirl mode {self.twirl_mode!r}")

    @property
    def total_qubits(self) -> int:
        return self.n + self.b

    @property
    def round_limit(self) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        return self.n + (1 if self.b else 0)


@dataclass
class RoundRecord:
    round_index: int
    degree_before: float
    m_outcome: int | None
    copies: int
    overlap: float


@dataclass
class ProtocolTrace:
    rounds: list[RoundRecord] = field(default_factory=list)
    terminal_constant: int | None = None
    total_copies: int = 0
    gates_used: int = 0

    def degrees(self) -> list[float]:
        return [r.degree_before for r in self.rounds]

    def strictly_decreasing_degrees(self) -> bool:
        degs = self.degrees()
        return all(b < a for a, b in zip(degs, degs[1:]))

    def to_json(self) -> str:
        return json.dumps({
            "rounds": [
                {"round": r.round_index,
                 "degree": None if r.degree_before == NEG_INF else r.degree_before,
                 "m_hex": None if r.m_outcome is None else format(r.m_outcome, "x"),
                 "copies": r.copies,
                 "overlap": r.overlap}
                for r in self.rounds
            ],
            "terminal_constant": self.terminal_constant,
            "total_copies": self.total_copies,
        }, sort_keys=True)

    def to_csv_rows(self) -> list[str]:
        rows = ["round,degree,m_hex,copies,overlap"]
        for r in self.rounds:
            deg = "" if r.degree_before == NEG_INF else str(int(r.degree_before))
            mfx = "" if r.m_outcome is None else format(r.m_outcome, "x")
            rows.append(f"{r.round_index},{deg},{mfx},{r.copies},{r.overlap:.12g}")
        return rows


@dataclass
class EffectiveAction:
    """Net diagonal applied along one trajectory, with the phase-invariant
    comparison against the target dataset diagonal."""
    diagonal: np.ndarray
    target_diagonal: np.ndarray
    max_deviation: float
    matches: bool


@dataclass
class ComposedChannel:
    choi_matrix: np.ndarray
    target_choi: np.ndarray
    choi_gap: float
    rounds_used: int


# ---------------------------------------------------------------------------
# Dataset plumbing shared by both protocol modes.

def _flat_table(f) -> DataTable:
    return boolfn.hat_function(f) if isinstance(f, SignedDataTable) else f


def _flat_degree(f):
    return boolfn.degree(_flat_table(f))


def _apply_update(f, m: int):
    if isinstance(f, SignedDataTable):
        return boolfn.update_rule_signed(f, m)
    return boolfn.update_rule(f, m)


def _is_constant(f) -> bool:
    d = _flat_degree(f)
    return d == NEG_INF or d == 0


def _resource_density(cfg: ProtocolConfig, table: DataTable,
                      stream: tuple) -> DensityMatrix:
    """Per-copy state entering distillation for the current dataset."""
    device = cfg.device
    if cfg.twirl_mode == "off":
        if device is None:
            rho = pure_density(resource_state(table))
        else:
            rho = noisy_resource_state(device, table)
        if cfg.encoding is not None:
            rho = apply_encoding_noise(cfg.encoding, rho)
        return rho
    if device is None:
        raise PreconditionError("twirling requires a device model")
    if cfg.twirl_mode == "exact":
        return twirled_state(table, device, mode="exact",
                             encoding=cfg.encoding).state
    seed = derive_rng(cfg.seed, *stream).integers(1 << 62)
    return twirled_state(table, device, mode="mc",
                         num_samples=cfg.twirl_samples, seed=int(seed),
                         encoding=cfg.encoding).state


def _distill(cfg: ProtocolConfig, rho: DensityMatrix, stream: tuple):
    """Returns (dense distilled state, copies consumed, overlap)."""
    spec = cfg.distiller
    if spec.kind == "none":
        lam = np.linalg.eigvalsh(rho.matrix)
        return rho.matrix, 1, float(lam[-1])
    src = CopySource.from_density(rho.matrix)
    if spec.kind == "swap_test":
        levels, _ = swap_test_levels(src.spectrum, spec.max_levels)
        k = next((i for i, lv in enumerate(levels) if 1 - lv[0] <= spec.eps_dist),
                 None)
        if k is None:
            raise BudgetExceededError("swap-test recursion cannot reach eps_dist")
        rep = iterated_swap_test(src, k, derive_rng(cfg.seed, 0xD15, *stream),
                                 budget=cfg.copy_budget)
        if not rep.success:
            raise BudgetExceededError("distillation copy budget exhausted")
        return rep.output, rep.copies_consumed, rep.overlap
    gamma = spec.gamma if spec.gamma is not None else float(src.spectrum[0])
    rep = qpca_simple(src, gamma, spec.eps_dist, budget=cfg.copy_budget)
    return rep.output, rep.copies_consumed, rep.overlap


# ---------------------------------------------------------------------------
# Trajectory mode.

def _run_trajectory(f, cfg: ProtocolConfig, trial: int):
    nq = cfg.total_qubits
    d = 1 << nq
    rng = derive_rng(cfg.seed, trial, 0xA11CE)
    current = f
    diag = np.ones(d, dtype=np.complex128)
    trace = ProtocolTrace()
    rounds = 0
    while not _is_constant(current) and rounds < cfg.round_limit:
        table = _flat_table(current)
        deg = boolfn.degree(table)
        phi, copies, overlap = _distill(
            cfg, _resource_density(cfg, table, (trial, rounds)), (trial, rounds))
        vals, vecs = np.linalg.eigh(phi)
        vals = np.clip(vals, 0.0, None)
        comp = int(rng.choice(len(vals), p=vals / vals.sum()))
        m = int(rng.integers(d))  # outcomes are uniform for any pure component
        component = vecs[:, comp]
        diag = diag * component[np.arange(d) ^ m] * np.sqrt(d)
        trace.rounds.append(RoundRecord(rounds + 1, deg, m, copies, overlap))
        trace.total_copies += copies
        # controlled swaps per consumed copy, the teleportation CNOT fan, and
        # the restoring twirl Cliffords (unit-constant accounting)
        trace.gates_used += copies * nq + nq
        if cfg.twirl_mode != "off":
            trace.gates_used += copies * nq * nq
        current = _apply_update(current, m)
        rounds += 1
    trace.terminal_constant = None if not _is_constant(current) else (
        1 if _flat_table(current).bits else 0)

    target = qram_unitary(_flat_table(f)).astype(np.complex128)
    ratio = diag / target
    anchor = ratio[0] / abs(ratio[0]) if abs(ratio[0]) > 1e-12 else 1.0
    deviation = float(np.abs(ratio - anchor).max())
    action = EffectiveAction(diag, target, deviation, deviation <= 0.5)
    return action, trace


# ---------------------------------------------------------------------------
# Exact branch enumeration.

def _run_enumeration(f, cfg: ProtocolConfig):
    nq = cfg.total_qubits
    if nq > ENUMERATE_CAP:
        raise SizeCapError(f"branch enumeration capped at {ENUMERATE_CAP} qubits")
    check_joint_cap(2 * nq)
    d = 1 << nq
    pipeline_cache: dict[tuple, np.ndarray] = {}

    def pipeline(current) -> np.ndarray:
        table = _flat_table(current)
        key = (table.n, table.bits)
        if key not in pipeline_cache:
            stream = (table.bits & ((1 << 32) - 1), 0x3B1)
            phi, _, _ = _distill(cfg, _resource_density(cfg, table, stream),
                                 stream)
            pipeline_cache[key] = np.asarray(phi)
        return pipeline_cache[key]

    # maximally entangled input: reference register low, system high
    omega = np.zeros(d * d, dtype=np.complex128)
    omega[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    rho0 = np.outer(omega, omega.conj())
    depth_degrees: dict[int, float] = {}

    def recurse(current, rho: np.ndarray, depth: int) -> np.ndarray:
        if _is_constant(current):
            return rho
        if depth >= cfg.round_limit:
            raise BudgetExceededError("round limit hit with nonconstant dataset")
        deg = _flat_degree(current)
        depth_degrees[depth] = max(depth_degrees.get(depth, NEG_INF), deg)
        phi = pipeline(current)
        t4 = rho.reshape(d, d, d, d)  # (sys, ref, sys', ref')
        acc = np.zeros_like(rho)
        for m in range(d):
            factor = branch_multiplier(phi, m)
            branch = (t4 * factor[:, None, :, None]).reshape(d * d, d * d)
            acc += recurse(_apply_update(current, m), branch, depth + 1)
        return acc

    final = recurse(f, rho0, 0)

    if isinstance(f, SignedDataTable):
        # conjugate input and output by the bus Hadamards to express the
        # composed action in the data-load picture; on the Choi matrix the
        # input-side conjugation lands on the reference register transposed
        had = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
        w = np.eye(1 << f.n)
        for _ in range(f.b):
            w = np.kron(had, w)
        full = np.kron(w, w)  # w is real symmetric
        final = full @ final @ full.conj().T
        target_u = data_load_unitary(f)
    else:
        target_u = np.diag(qram_unitary(f).astype(np.complex128))

    target_vec = (target_u / np.sqrt(d)).reshape(-1)
    target_choi = np.outer(target_vec, target_vec.conj())
    gap = trace_distance(final, target_choi)
    trace = ProtocolTrace()
    trace.rounds = [RoundRecord(depth + 1, depth_degrees[depth], None, 0, 1.0)
                    for depth in sorted(depth_degrees)]
    record = ComposedChannel(final, target_choi, gap, len(depth_degrees))
    return record, trace


def data_load_unitary(f: SignedDataTable) -> np.ndarray:
    """|x>|u> -> (-1)^sign(x) |x>|u xor data(x)> as a dense matrix."""
    d = 1 << (f.n + f.b)
    size = 1 << f.n
    mat = np.zeros((d, d), dtype=np.complex128)
    for x in range(size):
        sgn = -1.0 if f.f_sign.value(x) else 1.0
        load = f.data_value(x)
        for u in range(1 << f.b):
            mat[x + size * (u ^ load), x + size * u] = sgn
    return mat


def run_protocol(f, cfg: ProtocolConfig, trial: int = 0):
    """Run the adaptive protocol; returns (record, trace).

    Trajectory mode samples one adaptive run and records the net diagonal
    actually applied (exact per trajectory because each round's resource
    collapses onto one eigenvector). Enumeration mode composes the exact
    adaptive channel over all outcome branches and reports its Choi matrix
    against the target action.
    """
    if isinstance(f, SignedDataTable):
        if f.n != cfg.n or f.b != cfg.b:
            raise DimensionMismatchError("dataset does not match the configuration")
    elif f.n != cfg.n or cfg.b:
        raise DimensionMismatchError("dataset does not match the configuration")
    was = validation_enabled()
    set_validation(False)
    try:
        if cfg.branch_mode == "trajectory":
            return _run_trajectory(f, cfg, trial)
        return _run_enumeration(f, cfg)
    finally:
        set_validation(was)


# ---------------------------------------------------------------------------
# Clifford hierarchy membership.

HIERARCHY_N_CAP = 3


def verify_clifford_hierarchy(f: DataTable) -> int:
    """Smallest k such that conjugating the dataset phase unitary by the
    X/Z generators recursively lands in the signed Paulis after k-1 steps."""
    if f.n > HIERARCHY_N_CAP:
        raise SizeCapError(f"hierarchy check capped at n <= {HIERARCHY_N_CAP}")
    n = f.n
    d = 1 << n
    u0 = np.diag(qram_unitary(f).astype(np.complex128))
    gens = []
    x = np.arange(d)
    for q in range(n):
        xm = np.zeros((d, d), dtype=np.complex128)
        xm[x ^ (1 << q), x] = 1.0
        gens.append(xm)
        zm = np.zeros((d, d), dtype=np.complex128)
        zm[x, x] = 1.0 - 2.0 * ((x >> q) & 1)
        gens.append(zm)
    cache: dict[bytes, int] = {}

    def level(u: np.ndarray, depth: int) -> int:
        if depth > n + 2:
            raise PreconditionError("hierarchy recursion exceeded its bound")
        key = np.round(u, 9).tobytes()
        if key in cache:
            return cache[key]
        if match_signed_pauli(u) is not None:
            cache[key] = 1
            return 1
        worst = 1
        for g in gens:
            worst = max(worst, level(u @ g @ u.conj().T, depth + 1))
        cache[key] = worst + 1
        return worst + 1

    return level(u0, 0)


# ---------------------------------------------------------------------------
# Cost formulas (unit-constant estimates, not guarantees).

@dataclass(frozen=True)
class CostEstimate:
    queries: float          # physical device queries / encodings
    gates: float            # additional fault-tolerant operations
    nonclifford: float      # non-Clifford estimate for the b-bit variant


def estimate_costs(n: int, b: int, fidelity: float, eps: float) -> CostEstimate:
    if not 0 < fidelity <= 1:
        raise PreconditionError("fidelity must lie in (0, 1]")
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    q = n * (1 - fidelity) / fidelity**2 * (n / eps + 1 / fidelity)
    q_prime = (n + b) ** 2 * q
    nonclifford = n**2 * (n + b) / (2 * eps)
    return CostEstimate(q, q_prime, nonclifford)
