"""Classical update-rule engines: the packed reference engine, an O(n)-depth
shallow circuit with a fixed 1D layout and wire-length accounting, and the
two reductions between the update rule and the Walsh-Hadamard transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boolfn
from .boolfn import DataTable
from .errors import DimensionMismatchError, PreconditionError

CIRCUIT_N_CAP = 12

COPY = "COPY"
XOR_INTO = "XOR_INTO"
CSWAP = "CSWAP"
NEGATE = "NEGATE"


@dataclass(frozen=True, slots=True)
class Gate:
    kind: str
    cells: tuple[int, ...]


@dataclass
class ClassicalCircuit:
    """Layered reversible bit-cell circuit with a fixed 1D layout.

    Gates within one layer touch disjoint cells. ``positions`` holds the
    integer 1D coordinate of each cell; the wire length of a gate is the
    maximum pairwise distance among its cells.
    """

    width: int
    layers: list[list[Gate]]
    positions: np.ndarray
    roles: dict = field(default_factory=dict)

    def __post_init__(self):
        for layer in self.layers:
            seen = set()
            for gate in layer:
                if any(c in seen for c in gate.cells):
                    raise PreconditionError("gates within a layer must be disjoint")
                if any(not 0 <= c < self.width for c in gate.cells):
                    raise DimensionMismatchError("gate cell index out of range")
                seen.update(gate.cells)


def build_shallow_ur_circuit(n: int) -> ClassicalCircuit:
    """Depth 2n+1 circuit computing the update rule with all-to-all gates.

    Cells: data bit for address x at 2x, its working copy at 2x+1; the n
    outcome bits, each followed by 2^(n-1)-1 copy cells, appended after.
    Layer plan: one copy layer, n-1 doubling layers that fan each outcome
    bit out to 2^(n-1) copies, n layers of outcome-controlled swaps walking
    the copies along the hypercube directions, one final xor layer.
    """
    if not 1 <= n <= CIRCUIT_N_CAP:
        raise PreconditionError(f"n must be within [1, {CIRCUIT_N_CAP}]")
    size = 1 << n
    half = 1 << (n - 1)
    data = [2 * x for x in range(size)]
    work = [2 * x + 1 for x in range(size)]
    m_base = 2 * size
    m_block = [[m_base + i * half + j for j in range(half)] for i in range(n)]
    width = 2 * size + n * half

    layers: list[list[Gate]] = []
    layers.append([Gate(COPY, (data[x], work[x])) for x in range(size)])

    copies = [1] * n
    for _ in range(n - 1):
        layer = []
        for i in range(n):
            have = copies[i]
            new = min(have, half - have)
            for j in range(new):
                layer.append(Gate(COPY, (m_block[i][j], m_block[i][have + j])))
            copies[i] += new
        layers.append(layer)

    for i in range(n):
        layer = []
        pair = 0
        for x in range(size):
            if (x >> i) & 1:
                continue
            layer.append(Gate(CSWAP, (m_block[i][pair], work[x], work[x ^ (1 << i)])))
            pair += 1
        layers.append(layer)

    layers.append([Gate(XOR_INTO, (work[x], data[x])) for x in range(size)])

    roles = {"data": data, "work": work, "m_blocks": m_block, "n": n}
    return ClassicalCircuit(width, layers, np.arange(width), roles)


def _initial_cells(circ: ClassicalCircuit, g_arr: np.ndarray,
                   m_arr: np.ndarray) -> np.ndarray:
    """Batched cell state: shape (batch, width)."""
    batch = g_arr.shape[0]
    cells = np.zeros((batch, circ.width), dtype=np.uint8)
    cells[:, circ.roles["data"]] = g_arr
    for i, block in enumerate(circ.roles["m_blocks"]):
        cells[:, block[0]] = m_arr[:, i]
    return cells


def _apply_layer(cells: np.ndarray, layer: list[Gate]) -> None:
    by_kind: dict[str, list[tuple[int, ...]]] = {}
    for gate in layer:
        by_kind.setdefault(gate.kind, []).append(gate.cells)
    for kind, cell_lists in by_kind.items():
        idx = np.array(cell_lists, dtype=np.int64)
        if kind == COPY:
            cells[:, idx[:, 1]] = cells[:, idx[:, 0]]
        elif kind == XOR_INTO:
            cells[:, idx[:, 1]] ^= cells[:, idx[:, 0]]
        elif kind == CSWAP:
            ctrl = cells[:, idx[:, 0]]
            a = cells[:, idx[:, 1]]
            b = cells[:, idx[:, 2]]
            t = (a ^ b) & ctrl
            cells[:, idx[:, 1]] = a ^ t
            cells[:, idx[:, 2]] = b ^ t
        elif kind == NEGATE:
            cells[:, idx[:, 0]] ^= 1
        else:
            raise PreconditionError(f"unknown gate kind {kind}")


def simulate_circuit(circ: ClassicalCircuit, g: DataTable, m: int,
                     record_steps: bool = False):
    """Run the circuit on one input; optionally capture the cell state after
    every layer."""
    n = circ.roles["n"]
    if g.n != n or not 0 <= m < (1 << n):
        raise DimensionMismatchError("input size does not match the circuit")
    g_arr = g.to_array()[None, :]
    m_arr = np.array([[(m >> i) & 1 for i in range(n)]], dtype=np.uint8)
    cells = _initial_cells(circ, g_arr, m_arr)
    snapshots = [cells[0].copy()] if record_steps else None
    for layer in circ.layers:
        _apply_layer(cells, layer)
        if record_steps:
            snapshots.append(cells[0].copy())
    out = DataTable.from_array(cells[0, circ.roles["data"]])
    return (out, snapshots) if record_steps else out


def simulate_circuit_batch(circ: ClassicalCircuit, g_arrs: np.ndarray,
                           m_bits: np.ndarray) -> np.ndarray:
    """Vectorized run over a batch of (truth table, outcome bits) pairs."""
    cells = _initial_cells(circ, np.asarray(g_arrs, dtype=np.uint8),
                           np.asarray(m_bits, dtype=np.uint8))
    for layer in circ.layers:
        _apply_layer(cells, layer)
    return cells[:, circ.roles["data"]]


def circuit_metrics(circ: ClassicalCircuit) -> dict:
    total = 0
    for layer in circ.layers:
        for gate in layer:
            pos = circ.positions[list(gate.cells)]
            total += int(pos.max() - pos.min())
    return {
        "depth": len(circ.layers),
        "width": circ.width,
        "total_wire_length_1d": total,
    }


# ---------------------------------------------------------------------------
# Update-rule engines.

def ur_naive(g: DataTable, m: int) -> DataTable:
    """Word-packed reference engine (shift and xor on the packed table)."""
    return boolfn.update_rule(g, m)


def ur_shallow_circuit(g: DataTable, m: int) -> DataTable:
    return simulate_circuit(build_shallow_ur_circuit(g.n), g, m)


# ---------------------------------------------------------------------------
# Walsh-Hadamard transform engines. fwht is unnormalized: it computes
# 2^(n/2) H v in exact integer arithmetic, so fwht(fwht(v)) = 2^n v.

@dataclass(frozen=True)
class IntVector:
    values: np.ndarray
    width: int = 32

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", vals)
        size = len(vals)
        if size & (size - 1) or size == 0:
            raise DimensionMismatchError("length must be a power of two")
        _check_width(vals, self.width)


def _check_width(values: np.ndarray, width: int) -> None:
    bound = 1 << (width - 1)
    if np.abs(values).max(initial=0) >= bound:
        raise OverflowError(f"entries exceed the configured {width}-bit width")


def _as_values(v) -> np.ndarray:
    if isinstance(v, IntVector):
        return v.values.copy()
    return np.array(v, dtype=np.int64, copy=True)


def fwht(v) -> np.ndarray:
    """In-place butterfly; output = 2^(n/2) H v with integer entries."""
    vals = _as_values(v)
    size = len(vals)
    if size & (size - 1):
        raise DimensionMismatchError("length must be a power of two")
    h = 1
    while h < size:
        vals = vals.reshape(-1, 2, h)
        a = vals[:, 0, :].copy()
        vals[:, 0, :] = a + vals[:, 1, :]
        vals[:, 1, :] = a - vals[:, 1, :]
        vals = vals.reshape(size)
        h *= 2
    return vals


def wh_factor(n: int, i: int) -> np.ndarray:
    """Dense sparse-factor H^(i): the bit-i butterfly stage, scaled by 2^(1/2)."""
    d = 1 << n
    mat = np.zeros((d, d))
    x = np.arange(d)
    mat[x, x ^ (1 << i)] = 1.0
    mat[x, x] = 1.0 - 2.0 * ((x >> i) & 1)
    return mat


def ur_via_fwht(g: DataTable, m: int, width: int = 32) -> DataTable:
    """Transform, mask the frequencies aligned with m, transform back.

    The masked spectrum doubles entries with m.x = 0 and zeroes the rest;
    dividing by 2^n and reducing mod 2 recovers the update rule exactly.
    """
    n = g.n
    if not 0 <= m < (1 << n):
        raise DimensionMismatchError("m does not have length n")
    if 2 * n + 2 >= width:
        raise OverflowError("configured width too small for exact arithmetic")
    vals = g.to_array().astype(np.int64)
    freq = fwht(vals)
    x = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=np.int64)
    vm = x & m
    while vm.any():
        parity ^= vm & 1
        vm >>= 1
    freq *= 2 * (1 - parity)
    back = fwht(freq)
    assert not (back & ((1 << n) - 1)).any()
    return DataTable.from_array((back >> n) & 1)


def fwht_via_ur(v, ur_engine=None, width: int = 16) -> np.ndarray:
    """Walsh-Hadamard transform built from bit-plane update-rule calls.

    Applies the n sparse factors in sequence; each factor uses one
    update-rule call per bit plane of the entries (n * width calls total)
    plus local copy, xor, negate, and add steps. Entries must stay within
    the configured two's-complement width throughout.
    """
    vals = _as_values(v)
    _check_width(vals, width)
    size = len(vals)
    n = size.bit_length() - 1
    if 1 << n != size:
        raise DimensionMismatchError("length must be a power of two")
    engine = ur_engine if ur_engine is not None else boolfn.update_rule
    mask = (1 << width) - 1
    x = np.arange(size)
    for i in range(n):
        # bit planes of the two's-complement representation
        unsigned = vals & mask
        swapped = np.zeros(size, dtype=np.int64)
        for j in range(width):
            plane_bits = (unsigned >> j) & 1
            ur_out = engine(DataTable.from_array(plane_bits), 1 << i)
            # xor the local plane back in to obtain the neighbor's bit
            swapped |= (ur_out.to_array().astype(np.int64) ^ plane_bits) << j
        neighbor = swapped - ((swapped >> (width - 1)) << width)
        signed_local = np.where((x >> i) & 1, -vals, vals)
        vals = neighbor + signed_local
        _check_width(vals, width)
    return vals


class CountingEngine:
    """Wraps an update-rule engine and counts invocations."""

    def __init__(self, engine=None):
        self.engine = engine if engine is not None else boolfn.update_rule
        self.calls = 0

    def __call__(self, g: DataTable, m: int) -> DataTable:
        self.calls += 1
        return self.engine(g, m)
