"""State-agnostic purity amplification.

All distillers here consume identical copies of an input state and aim to
output its principal eigenvector. The swap-test recursion and both QPCA
variants act within the eigenbasis of the input, so they are computed on the
spectrum where possible; dense outputs are reconstructed from the stored
eigenvectors. Dimensions are general (qudits), not restricted to powers of
two.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, DimensionMismatchError, PreconditionError

DEFAULT_COPY_BUDGET = 10**6

_PLUS = np.full((2, 2), 0.5, dtype=np.complex128)
_KB1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)  # |1><1|


def _as_matrix(state) -> np.ndarray:
    if hasattr(state, "matrix"):
        return np.asarray(state.matrix, dtype=np.complex128)
    return np.asarray(state, dtype=np.complex128)


class CopySource:
    """A stream of fresh, identical copies of one input state.

    Every yielded copy equals the configured input exactly; the counter
    increments once per copy. ``take(k)`` draws k copies at once.
    """

    def __init__(self, spectrum: np.ndarray, vectors: np.ndarray | None):
        order = np.argsort(spectrum)[::-1]
        self.spectrum = np.asarray(spectrum, dtype=np.float64)[order]
        self.vectors = None if vectors is None else np.asarray(vectors)[:, order]
        self.dim = len(self.spectrum)
        self.count = 0
        if abs(self.spectrum.sum() - 1.0) > 1e-9 or self.spectrum[-1] < -1e-10:
            raise PreconditionError("spectrum is not a probability vector")

    @classmethod
    def from_density(cls, rho) -> "CopySource":
        mat = _as_matrix(rho)
        vals, vecs = np.linalg.eigh(mat)
        return cls(np.clip(vals, 0.0, None), vecs)

    @classmethod
    def from_spectrum(cls, spectrum) -> "CopySource":
        return cls(np.asarray(spectrum, dtype=np.float64), None)

    def take(self, k: int = 1) -> np.ndarray | None:
        """Draw k copies; returns the dense input when vectors are stored."""
        self.count += k
        return self.matrix()

    def matrix(self) -> np.ndarray | None:
        if self.vectors is None:
            return None
        return (self.vectors * self.spectrum) @ self.vectors.conj().T

    def rebuild(self, weights: np.ndarray) -> np.ndarray | None:
        """Dense state with the given weights in the stored eigenbasis."""
        if self.vectors is None:
            return None
        return (self.vectors * weights) @ self.vectors.conj().T


@dataclass
class DistillReport:
    distiller: str
    params: dict
    copies_consumed: int
    steps: int
    success: bool
    overlap: float
    output: np.ndarray | None = None
    seed: int | None = None
    success_probability: float | None = None
    storage_slots: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "distiller": self.distiller,
            "params": self.params,
            "copies": self.copies_consumed,
            "steps": self.steps,
            "success": self.success,
            "overlap": self.overlap,
            "seed": self.seed,
        }
        if self.success_probability is not None:
            payload["success_probability"] = self.success_probability
        return json.dumps(payload, sort_keys=True)


# ---------------------------------------------------------------------------
# Swap test.

def swap_test_step(rho) -> tuple[float, np.ndarray]:
    """Success probability and post-state of one swap test on two copies:
    p = (1 + tr(rho^2)) / 2 and rho_out = (rho + rho^2) / (1 + tr(rho^2))."""
    mat = _as_matrix(rho)
    sq = mat @ mat
    purity = float(np.trace(sq).real)
    p = (1.0 + purity) / 2.0
    return p, (mat + sq) / (1.0 + purity)


def swap_test_spectrum(eigs: np.ndarray) -> tuple[float, np.ndarray]:
    """The same step on a spectrum (the test preserves the eigenbasis)."""
    eigs = np.asarray(eigs, dtype=np.float64)
    purity = float((eigs**2).sum())
    return (1.0 + purity) / 2.0, (eigs + eigs**2) / (1.0 + purity)


def swap_test_levels(spectrum: np.ndarray, k: int):
    """Spectra and pass probabilities of k successive successful swap tests.

    Returns (levels, p_pass) where levels[i] is the spectrum after i
    successes and p_pass[i] is the probability that the test producing
    level i+1 passes.
    """
    levels = [np.asarray(spectrum, dtype=np.float64)]
    p_pass = []
    for _ in range(k):
        p, nxt = swap_test_spectrum(levels[-1])
        p_pass.append(p)
        levels.append(nxt)
    return levels, p_pass


def sample_swap_test_copies(p_pass, rng: np.random.Generator,
                            trials: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Sample (copies, tests) needed for one success at the top level.

    The streaming recursion consumes two fresh level-(i-1) successes per
    attempt at level i, with attempts geometric in the pass probability;
    the totals therefore compose as negative binomials level by level,
    which is sampled here directly (same process law, vectorized).
    """
    k = len(p_pass)
    need = np.ones(trials, dtype=np.int64)
    tests = np.zeros(trials, dtype=np.int64)
    for i in range(k - 1, -1, -1):
        attempts = need + rng.negative_binomial(need, p_pass[i])
        tests += attempts
        need = 2 * attempts
    return need, tests


def iterated_swap_test(src: CopySource, k: int, rng: np.random.Generator, *,
                       budget: int = DEFAULT_COPY_BUDGET) -> DistillReport:
    """k successful swap-test iterations in the streaming arrangement.

    The output state is the k-th level of the swap-test recursion; the
    streaming schedule stores at most one copy of each intermediate level,
    so storage never exceeds k+1 register slots. Copy and test counters are
    sampled from the exact process law; exceeding the budget is reported as
    a failure with the partial counters.
    """
    if k < 0:
        raise PreconditionError("k must be >= 0")
    levels, p_pass = swap_test_levels(src.spectrum, k)
    if k == 0:
        src.take(1)
        return DistillReport("iterated_swap_test", {"k": 0}, 1, 0, True,
                             float(levels[0][0]), src.matrix(),
                             storage_slots=1)
    copies, tests = sample_swap_test_copies(p_pass, rng)
    copies, tests = int(copies[0]), int(tests[0])
    if copies > budget:
        src.take(budget)
        return DistillReport("iterated_swap_test", {"k": k}, budget, tests, False,
                             float(src.spectrum[0]), None,
                             storage_slots=k + 1,
                             extra={"reason": "copy budget exhausted"})
    src.take(copies)
    out = src.rebuild(levels[k])
    return DistillReport("iterated_swap_test", {"k": k}, copies, tests, True,
                         float(levels[k][0]), out, storage_slots=k + 1)


# ---------------------------------------------------------------------------
# Fractional swap and LMR density matrix exponentiation.

def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    hi, lo = np.divmod(np.arange(d * d), d)  # joint index = lo + d * hi
    s[lo + d * hi, hi + d * lo] = 1.0
    return s


def fractional_swap_unitary(t: float, d: int) -> np.ndarray:
    """exp(-i S t) = cos(t) I - i sin(t) S on two d-dimensional systems."""
    if not 0 <= t <= np.pi / 2:
        raise PreconditionError("t must lie in [0, pi/2]")
    return np.cos(t) * np.eye(d * d) - 1j * np.sin(t) * swap_operator(d)


def theta_angles(t: float) -> tuple[float, float]:
    ct, st = np.cos(t), np.sin(t)
    plus = np.arccos((ct - st) / 2.0)
    minus = np.arccos((ct + st) / 2.0)
    return (plus + minus) / 2.0, (plus - minus) / 2.0


_X1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y1 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z1 = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    return np.cos(angle) * np.eye(2) + 1j * np.sin(angle) * axis


def block_encoding_sequence(t: float, d: int) -> list[tuple[str, np.ndarray]]:
    """Gate factors realizing the fractional swap with 3 controlled swaps and
    4 single-qubit gates on one ancilla (one oblivious amplitude
    amplification round of the single-controlled-swap block encoding).

    Factors are listed in application order; their product U satisfies
    U[ancilla 0-block] = -exp(-i S t). The ancilla is the top tensor factor.
    """
    tp, tm = theta_angles(t)
    cs = np.zeros((2 * d * d, 2 * d * d), dtype=np.complex128)
    cs[: d * d, : d * d] = np.eye(d * d)
    cs[d * d:, d * d:] = swap_operator(d)

    def anc(u: np.ndarray) -> np.ndarray:
        return np.kron(u, np.eye(d * d))

    seq = [
        ("Rx(-theta_minus)", anc(_rot(_X1, -tm))),
        ("CSWAP", cs),
        ("Ry(-theta_plus) Z Ry(theta_plus)", anc(_rot(_Y1, -tp) @ _Z1 @ _rot(_Y1, tp))),
        ("CSWAP", cs),
        ("Rx(-theta_minus) Z Rx(theta_minus)", anc(_rot(_X1, -tm) @ _Z1 @ _rot(_X1, tm))),
        ("CSWAP", cs),
        ("Ry(theta_plus)", anc(_rot(_Y1, tp))),
    ]
    return seq


def sequence_product(seq) -> np.ndarray:
    u = None
    for _, factor in seq:
        u = factor if u is None else factor @ u
    return u


def lmr_step(varsigma, varrho, t: float, *, dim_a: int = 1) -> np.ndarray:
    """One fractional-swap step: couple the trailing system of `varsigma`
    to a fresh copy `varrho` for time t and discard the copy.

    Computed by the four-term closed form
    cos^2 s + i cos sin [s, I_A x r] + sin^2 TrS1[s] x r,
    where the A register occupies the leading (low) indices.
    """
    s = _as_matrix(varsigma)
    r = _as_matrix(varrho)
    d1 = r.shape[0]
    if s.shape[0] % d1 != 0 or s.shape[0] // d1 != dim_a:
        raise DimensionMismatchError("system dimensions do not match")
    ct, st = np.cos(t), np.sin(t)
    full = np.kron(r, np.eye(dim_a))
    traced = np.einsum("iaib->ab", s.reshape(d1, dim_a, d1, dim_a))
    out = ((ct**2) * s + 1j * ct * st * (s @ full - full @ s)
           + (st**2) * np.kron(r, traced))
    return out


# ---------------------------------------------------------------------------
# Simple QPCA (single postselected phase-discrimination run).

def qpca_simple_parameters(gamma: float, eps_dist: float) -> tuple[int, float]:
    r = int(np.ceil(3 * np.pi**2 * (1 - gamma) / (2 * gamma**3 * eps_dist)))
    t = np.pi / (2 * r * gamma)
    return r, t


def qpca_lambda2_bound(gamma: float, eps_dist: float) -> float:
    return gamma * np.sqrt(8 * gamma * eps_dist / (3 * np.pi**2 * (1 - gamma)))


def qpca_simple(src: CopySource, gamma: float, eps_dist: float, *,
                budget: int = DEFAULT_COPY_BUDGET) -> DistillReport:
    """One run of the ancilla-driven LMR loop with postselection on the
    minus outcome; success probability computed exactly from the final
    state, no sampling."""
    lam = src.spectrum
    if not (gamma <= lam[0] <= 3 * gamma):
        raise PreconditionError("principal eigenvalue outside [gamma, 3 gamma]")
    if eps_dist > 1 - gamma:
        raise PreconditionError("eps_dist must be at most 1 - gamma")
    if len(lam) > 1 and lam[1] > qpca_lambda2_bound(gamma, eps_dist) + 1e-12:
        raise PreconditionError("second eigenvalue above the distillation bound")
    r, t = qpca_simple_parameters(gamma, eps_dist)
    if r + 1 > budget:
        raise BudgetExceededError(f"r+1 = {r + 1} exceeds copy budget {budget}")

    # per-eigencomponent ancilla evolution; the fresh copies |1><1| x rho_in
    # enter through a fixed affine step for each eigenvalue
    sig = np.repeat(_PLUS[None, :, :], len(lam), axis=0)
    c2, cs, s2 = np.cos(t)**2, np.cos(t) * np.sin(t), np.sin(t)**2
    for _ in range(r):
        comm = sig @ _KB1 - _KB1 @ sig
        sig = c2 * sig + 1j * cs * lam[:, None, None] * comm + s2 * _KB1[None, :, :]
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    p_minus = np.real(np.einsum("a,nab,b->n", minus, sig, minus))
    success_prob = float((lam * p_minus).sum())
    weights = lam * p_minus / success_prob
    overlap = float(weights[0])
    src.take(r + 1)
    return DistillReport(
        "qpca_simple",
        {"gamma": gamma, "eps_dist": eps_dist, "r": r, "t": t},
        r + 1, r, True, overlap, src.rebuild(weights),
        success_probability=success_prob, storage_slots=None,
    )


# ---------------------------------------------------------------------------
# Recursive QPCA with iterative eigenvalue filtering.

#: Repetition constant of the one-bit phase discriminator; any estimator
#: meeting the (precision, failure probability) contract is valid here.
CHERNOFF_CONSTANT = 32


def _component_step_matrix(lam: float, t: float) -> np.ndarray:
    """Linear part of the per-component ancilla update, as a 4x4 map on
    vec(2x2)."""
    c2, cs = np.cos(t)**2, np.cos(t) * np.sin(t)
    basis = np.eye(4, dtype=np.complex128)
    cols = []
    for i in range(4):
        m = basis[:, i].reshape(2, 2)
        out = c2 * m + 1j * cs * lam * (m @ _KB1 - _KB1 @ m)
        cols.append(out.reshape(4))
    return np.stack(cols, axis=1)


def _evolve_components(lam: np.ndarray, t: float, r: int):
    """Affine closed form of r LMR steps applied to w * |+><+| per
    component: returns (linear images of |+><+|, constant terms)."""
    s2 = np.sin(t)**2
    plus_vec = _PLUS.reshape(4)
    kb_vec = _KB1.reshape(4)
    lin_out = np.empty((len(lam), 4), dtype=np.complex128)
    const_out = np.empty((len(lam), 4), dtype=np.complex128)
    for j, lj in enumerate(lam):
        l_mat = _component_step_matrix(lj, t)
        l_pow = np.linalg.matrix_power(l_mat, r)
        c = s2 * lj * kb_vec
        # geometric sum (I + L + ... + L^(r-1)) c = (I - L)^-1 (I - L^r) c
        geo = np.linalg.solve(np.eye(4) - l_mat, (np.eye(4) - l_pow) @ c)
        lin_out[j] = l_pow @ plus_vec
        const_out[j] = geo
    return lin_out, const_out


_PLUS_VEC = np.array([1.0, 1.0]) / np.sqrt(2)
_MINUS_VEC = np.array([1.0, -1.0]) / np.sqrt(2)
_PLUS_I_VEC = np.array([1.0, 1.0j]) / np.sqrt(2)
_MINUS_I_VEC = np.array([1.0, -1.0j]) / np.sqrt(2)


def _measure_probs(mats: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("a,nab,b->n", vec.conj(), mats, vec))


def _phase_schedule(gamma: float, alpha: float, eps_dist: float):
    """(epsilon_i, zeta_i) pairs: a coarse doubling phase when gamma < 2/3,
    then a fine halving phase down to eps_dist."""
    schedule = []
    if gamma < 2.0 / 3.0:
        ell_a = int(np.ceil(np.log2(1.0 / (3.0 * gamma)))) + 1
        for i in range(1, ell_a + 1):
            e = 2.0 ** ((1 - i) / 2.0) / 16.0
            schedule.append((e, e))
    if eps_dist <= 1.0 / 3.0:
        ell = max(int(np.ceil(np.log2((1.0 - gamma) / eps_dist))), 1)
        for i in range(1, ell + 1):
            schedule.append((2.0 ** (-4 - ell + i), 2.0 ** (-3 - i)))
    return schedule


def qpca_recursive(src: CopySource, gamma: float, alpha: float,
                   eps_dist: float, rng: np.random.Generator, *,
                   budget: int = DEFAULT_COPY_BUDGET,
                   chernoff: int = CHERNOFF_CONSTANT) -> DistillReport:
    """Iterative eigenvalue filtering via one-bit phase discrimination.

    Each iteration estimates (cos, sin) of the component phases at a single
    evolution time tau = pi / (3 gamma + delta) from repeated Hadamard tests
    (X- then Y-basis ancilla measurements, each repeated
    R = ceil(chernoff ln(2/eps_i) / delta^2) times), accepts when the
    estimate clears the threshold (1+alpha) gamma / 2, and restarts from
    scratch otherwise. The single-time estimator is valid when
    6 gamma + 2 delta > 1, which covers every configuration exercised here.
    """
    lam = src.spectrum
    if lam[0] < gamma - 1e-12:
        raise PreconditionError("principal eigenvalue below gamma")
    if len(lam) > 1 and lam[1] > alpha * gamma + 1e-12:
        raise PreconditionError("second eigenvalue above alpha * gamma")
    if eps_dist >= 1 - gamma:
        raise PreconditionError("eps_dist must be below 1 - gamma")

    delta = (1 - alpha) * gamma / 2.0
    tau = np.pi / (3 * gamma + delta)
    threshold = (1 + alpha) * gamma / 2.0
    schedule = _phase_schedule(gamma, alpha, eps_dist)

    copies = 0
    iterations = 0
    restarts = 0
    weights = lam.copy()
    idx = 0
    while idx < len(schedule):
        eps_i, zeta_i = schedule[idx]
        r_reps = int(np.ceil(chernoff * np.log(2.0 / eps_i) / delta**2))
        total_time = 2 * r_reps * tau
        t_step = zeta_i / (3.0 * total_time)
        r_lmr = int(np.ceil(tau / t_step))
        t_step = tau / r_lmr
        cost = 2 * r_reps * r_lmr
        if copies + cost > budget:
            return DistillReport(
                "qpca_recursive",
                {"gamma": gamma, "alpha": alpha, "eps_dist": eps_dist},
                copies, iterations, False, float(weights[0]), None,
                extra={"reason": "copy budget exhausted", "restarts": restarts},
            )
        src.take(cost)
        copies += cost
        iterations += 1

        lin, const = _evolve_components(lam, t_step, r_lmr)
        w = weights
        for basis_vec, reps in ((_PLUS_VEC, r_reps), (_PLUS_I_VEC, r_reps)):
            counts = 0
            for _ in range(reps):
                mats = (w[:, None] * lin + const).reshape(-1, 2, 2)
                p_pos = np.clip(_measure_probs(mats, basis_vec), 0.0, None)
                p_neg = np.clip(_measure_probs(
                    mats, _MINUS_VEC if basis_vec is _PLUS_VEC else _MINUS_I_VEC),
                    0.0, None)
                total_pos = p_pos.sum()
                total = total_pos + p_neg.sum()
                if rng.random() < total_pos / total:
                    counts += 1
                    w = p_pos / total_pos
                else:
                    w = p_neg / p_neg.sum()
            if basis_vec is _PLUS_VEC:
                cos_est = 2.0 * counts / reps - 1.0
            else:
                sin_est = -(2.0 * counts / reps - 1.0)
        lam_est = (np.angle(cos_est + 1j * sin_est) % (2 * np.pi)) / tau
        if lam_est > threshold:
            weights = w
            idx += 1
        else:
            weights = lam.copy()
            idx = 0
            restarts += 1

    overlap = float(weights[0])
    return DistillReport(
        "qpca_recursive",
        {"gamma": gamma, "alpha": alpha, "eps_dist": eps_dist,
         "chernoff": chernoff},
        copies, iterations, True, overlap, src.rebuild(weights),
        extra={"restarts": restarts},
    )
