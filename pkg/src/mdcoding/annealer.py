"""Gibbs-sampling simulated annealing over reconstruction triples.

One iteration draws a position ``i`` uniformly and resamples ``y_i``, then
``z_i``, then ``w_i`` from their Boltzmann conditionals at the current inverse
temperature.  Two interchangeable backends run the chain:

``"numba"``
    compiled sweep over dense context arrays; used whenever the joint table
    has at most ``2**22`` cells.
``"python"``
    the reference path built on the sparse tables of
    :mod:`mdcoding.empirical_stats`; slow but unrestricted.

Both consume the same random stream, so a seed fixes the outcome.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .empirical_stats import (
    apply_substitution,
    build_counts,
    build_joint_counts,
    xlog2x_table,
)
from .energy import (
    DistortionMeasure,
    EnergyBreakdown,
    LagrangianWeights,
    compute_energy,
    delta_bound,
    energy_delta,
)
from .exceptions import InstanceTooLargeError, InvalidInputError
from .validation import check_orders, check_sequence

logger = logging.getLogger(__name__)

__all__ = [
    "AnnealReport",
    "AnnealSchedule",
    "AnnealState",
    "anneal",
    "conditional_pmf",
    "exhaustive_minimize",
    "sample_states",
]

CHUNK = 1 << 16
EXHAUSTIVE_LIMIT = 1 << 24
_ROLES = ("y", "z", "w")


@dataclass(frozen=True)
class AnnealSchedule:
    """Inverse-temperature sequence ``beta_t`` for iterations ``t = 1, 2, ...``.

    kind='logarithmic'
        ``beta_t = ln(floor(t / n) + 1) / T0``
    kind='power_law'
        ``beta_t = c * t**exponent``; ``c`` defaults to ``2 n``
    kind='constant'
        ``beta_t = beta``
    """

    kind: str = "power_law"
    T0: float | None = None
    c: float | None = None
    exponent: float = 0.1
    beta: float | None = None

    def __post_init__(self):
        if self.kind == "logarithmic":
            if self.T0 is None or not self.T0 > 0:
                raise InvalidInputError("logarithmic schedule needs T0 > 0")
        elif self.kind == "power_law":
            if self.exponent < 0 or (self.c is not None and self.c < 0):
                raise InvalidInputError("power-law schedule needs c >= 0 and exponent >= 0")
        elif self.kind == "constant":
            if self.beta is None or not self.beta >= 0:
                raise InvalidInputError("constant schedule needs beta >= 0")
        else:
            raise InvalidInputError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def logarithmic(cls, T0: float) -> "AnnealSchedule":
        return cls("logarithmic", T0=float(T0))

    @classmethod
    def power_law(cls, c: float | None = None, exponent: float = 0.1) -> "AnnealSchedule":
        return cls("power_law", c=None if c is None else float(c), exponent=float(exponent))

    @classmethod
    def constant(cls, beta: float) -> "AnnealSchedule":
        return cls("constant", beta=float(beta))

    @classmethod
    def from_delta_bound(cls, wts, d, k, k1, n, margin: float = 1.01) -> "AnnealSchedule":
        """Logarithmic schedule with ``T0 = margin * n * max(delta bounds)``."""
        top = max(delta_bound(wts, d, k, k1, n))
        return cls.logarithmic(margin * n * top if top > 0 else 1.0)

    def betas(self, t, n: int) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "logarithmic":
            return np.log(np.floor(t / n) + 1.0) / self.T0
        if self.kind == "power_law":
            c = 2.0 * n if self.c is None else self.c
            return c * t ** self.exponent
        return np.full(t.shape, self.beta, dtype=np.float64)

    def beta_at(self, t: int, n: int) -> float:
        return float(self.betas(np.array([t]), n)[0])

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "logarithmic":
            out["T0"] = self.T0
        elif self.kind == "power_law":
            out.update(c=self.c, exponent=self.exponent)
        else:
            out["beta"] = self.beta
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AnnealSchedule":
        d = dict(d)
        kind = d.pop("kind", "power_law")
        return cls(kind, **d)


class AnnealState:
    """Working state of the reference chain: sequences, cached tables and energy."""

    def __init__(self, x, y, z, w, weights: LagrangianWeights, distortion: DistortionMeasure, k: int, k1: int):
        A = distortion.alphabet_size
        self.x = check_sequence(x, A, name="x")
        self.y = check_sequence(y, A, name="y")
        self.z = check_sequence(z, A, name="z")
        self.w = check_sequence(w, A, name="w")
        self.n = len(self.x)
        check_orders(self.n, k, k1)
        self.alphabet_size = A
        self.weights = weights
        self.distortion = distortion
        self.k, self.k1 = k, k1
        self.counts_y = build_counts(self.y, k, A)
        self.counts_z = build_counts(self.z, k, A)
        self.joint_counts = build_joint_counts(self.w, self.y, self.z, k, k1, A)
        self.breakdown = compute_energy(self.x, self.y, self.z, self.w, weights, distortion, k, k1)
        self.energy = self.breakdown.total
        self.t = 0

    @classmethod
    def from_source(cls, x, weights, distortion, k, k1) -> "AnnealState":
        return cls(x, x, x, x, weights, distortion, k, k1)

    def sequence(self, which: str) -> np.ndarray:
        return {"y": self.y, "z": self.z, "w": self.w}[which]

    def substitute(self, which: str, i: int, a: int) -> float:
        """Commit ``which[i] = a``; returns the energy change."""
        delta = energy_delta(self, which, i, a)
        if delta == 0.0 and int(self.sequence(which)[i]) == a:
            return 0.0
        triple = (self.w, self.y, self.z)
        if which == "y":
            apply_substitution(self.counts_y, self.y, i, a, "y")
        elif which == "z":
            apply_substitution(self.counts_z, self.z, i, a, "y")
        apply_substitution(self.joint_counts, triple, i, a, which)
        self.sequence(which)[i] = a
        self.energy += delta
        return delta

    def refresh(self) -> EnergyBreakdown:
        """Recompute the energy exactly from the sequences."""
        self.breakdown = compute_energy(
            self.x, self.y, self.z, self.w, self.weights, self.distortion, self.k, self.k1
        )
        self.energy = self.breakdown.total
        return self.breakdown

    def audit(self) -> None:
        """Raise ``AssertionError`` if a cached table disagrees with a rebuild."""
        A = self.alphabet_size
        if self.counts_y != build_counts(self.y, self.k, A):
            raise AssertionError("cached y counts disagree with a rebuild")
        if self.counts_z != build_counts(self.z, self.k, A):
            raise AssertionError("cached z counts disagree with a rebuild")
        if self.joint_counts != build_joint_counts(self.w, self.y, self.z, self.k, self.k1, A):
            raise AssertionError("cached joint counts disagree with a rebuild")


def _softmin_pick(deltas: np.ndarray, beta: float, u: float) -> int:
    dmin = min(deltas)
    weights = [math.exp(-beta * (dl - dmin)) for dl in deltas]
    target = u * sum(weights)
    acc = 0.0
    for a, wt in enumerate(weights):
        acc += wt
        if target < acc:
            return a
    return len(deltas) - 1


def conditional_pmf(state: AnnealState, which: str, i: int, beta: float) -> np.ndarray:
    """Boltzmann conditional of ``which[i]`` given everything else, at ``beta``."""
    if beta < 0:
        raise InvalidInputError("beta must be non-negative")
    deltas = np.array([energy_delta(state, which, i, a) for a in range(state.alphabet_size)])
    logits = -beta * (deltas - deltas.min())
    p = np.exp(logits)
    return p / p.sum()


@dataclass
class AnnealReport:
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    trace: np.ndarray
    breakdown: EnergyBreakdown
    iterations: int
    seed: int | None
    backend: str = "numba"
    extras: dict = field(default_factory=dict)

    @property
    def triple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.z, self.w


def _pick_backend(backend: str, k: int, k1: int, A: int) -> str:
    if backend == "auto":
        return "numba" if _kernel.dense_size(k, k1, A) <= _kernel.DENSE_LIMIT else "python"
    if backend not in ("numba", "python"):
        raise InvalidInputError(f"unknown backend {backend!r}")
    if backend == "numba" and _kernel.dense_size(k, k1, A) > _kernel.DENSE_LIMIT:
        raise InvalidInputError("context tables too large for the dense backend")
    return backend


def _draws(rng: np.random.Generator, n: int, size: int):
    return rng.integers(0, n, size=size), rng.random((size, 3))


def anneal(x, weights: LagrangianWeights | None = None, distortion: DistortionMeasure | None = None,
           k: int = 5, k1: int = 1, schedule: AnnealSchedule | None = None, r: int = 0,
           seed: int | None = None, *, backend: str = "auto", debug: bool = False) -> AnnealReport:
    """Run ``r`` iterations of the annealed Gibbs sampler starting from ``(x, x, x)``.

    Parameters
    ----------
    x : array-like of int
        Source sequence.
    weights : LagrangianWeights, default all ones
    distortion : DistortionMeasure, default Hamming on the inferred alphabet
    k, k1 : int
        Context orders.
    schedule : AnnealSchedule, default power law ``2 n t**0.1``
    r : int
        Number of iterations (each updates y, z and w at one position).
    seed : int, optional
        Seed of the only random generator used.
    backend : {"auto", "numba", "python"}
    debug : bool
        Audit the cached tables against rebuilds every ``n`` iterations.

    Returns
    -------
    AnnealReport
        Final triple, the energy every ``n`` iterations (``floor(r/n) + 1``
        values, the last one being the final energy) and the final breakdown.
    """
    weights = weights or LagrangianWeights()
    x = check_sequence(x, None if distortion is None else distortion.alphabet_size, name="x")
    if distortion is None:
        distortion = DistortionMeasure.hamming(max(2, int(x.max()) + 1))
    A = distortion.alphabet_size
    n = len(x)
    check_orders(n, k, k1)
    if r < 0:
        raise InvalidInputError("iteration count r must be >= 0")
    schedule = schedule or AnnealSchedule.power_law()
    backend = _pick_backend(backend, k, k1, A)
    rng = np.random.default_rng(seed)
    n_trace = r // n + 1
    trace = np.empty(n_trace, dtype=np.float64)
    run = _run_numba if backend == "numba" else _run_python
    y, z, w, trace = run(x, weights, distortion, k, k1, schedule, r, rng, trace, debug)
    breakdown = compute_energy(x, y, z, w, weights, distortion, k, k1)
    trace[-1] = breakdown.total
    return AnnealReport(y, z, w, trace, breakdown, r, seed, backend)


def _run_numba(x, weights, distortion, k, k1, schedule, r, rng, trace, debug):
    A = distortion.alphabet_size
    n = len(x)
    seqs = np.vstack([x, x, x]).astype(np.int64)
    tables = _kernel.dense_tables(seqs, k, k1, A)
    flog = xlog2x_table(n)
    wts = weights.as_array()
    dmat = np.ascontiguousarray(distortion.matrix)
    energy = _dense_energy(x, seqs, tables, flog, wts, dmat)
    trace[0] = energy
    empty_hist = np.zeros(0, dtype=np.int64)
    t0 = 0
    while t0 < r:
        size = min(CHUNK, r - t0)
        pos, u = _draws(rng, n, size)
        betas = schedule.betas(np.arange(t0 + 1, t0 + size + 1), n)
        step = n if debug else size
        for lo in range(0, size, step):
            hi = min(lo + step, size)
            energy = _kernel.run_chunk(x, seqs, *tables, flog, wts, dmat, k, k1, A,
                                       pos[lo:hi], u[lo:hi], betas[lo:hi], t0 + lo,
                                       energy, trace, empty_hist, 1)
            if debug:
                fresh = _kernel.dense_tables(seqs, k, k1, A)
                if not all(np.array_equal(h, f) for h, f in zip(tables, fresh)):
                    raise AssertionError("dense table cache diverged from rebuild")
        t0 += size
        # resync the running energy exactly; drift is only rounding
        energy = _dense_energy(x, seqs, tables, flog, wts, dmat)
        if t0 % n == 0:
            trace[t0 // n] = energy
    return seqs[0].copy(), seqs[1].copy(), seqs[2].copy(), trace


def _dense_energy(x, seqs, tables, flog, wts, dmat) -> float:
    n = len(x)
    cnt_y, col_y, cnt_z, col_z, cnt_j, col_j = tables
    comps = np.array([
        _kernel.dense_nh(cnt_y, col_y, flog) / n,
        _kernel.dense_nh(cnt_z, col_z, flog) / n,
        _kernel.dense_nh(cnt_j, col_j, flog) / n,
        dmat[x, seqs[0]].mean(),
        dmat[x, seqs[1]].mean(),
        dmat[x, seqs[2]].mean(),
    ])
    return float(np.dot(wts, comps))


def _run_python(x, weights, distortion, k, k1, schedule, r, rng, trace, debug):
    state = AnnealState.from_source(x, weights, distortion, k, k1)
    A = state.alphabet_size
    n = state.n
    trace[0] = state.energy
    t0 = 0
    while t0 < r:
        size = min(CHUNK, r - t0)
        pos, u = _draws(rng, n, size)
        betas = schedule.betas(np.arange(t0 + 1, t0 + size + 1), n)
        for s in range(size):
            i = int(pos[s])
            for c, which in enumerate(_ROLES):
                deltas = [energy_delta(state, which, i, a) for a in range(A)]
                a = _softmin_pick(deltas, float(betas[s]), float(u[s, c]))
                state.substitute(which, i, a)
            state.t = t0 + s + 1
            if state.t % n == 0:
                trace[state.t // n] = state.energy
                if debug:
                    state.audit()
        t0 += size
        state.refresh()
    return state.y.copy(), state.z.copy(), state.w.copy(), trace


def sample_states(x, weights: LagrangianWeights, distortion: DistortionMeasure, k: int, k1: int,
                  beta: float, n_samples: int, thin: int = 1, burn_in: int = 0,
                  seed: int | None = None) -> np.ndarray:
    """Histogram of the chain at fixed ``beta`` over all ``A**(3n)`` triples.

    Index order is lexicographic in the concatenation ``(y, z, w)``, matching
    :func:`exhaustive_minimize`.  Only for tiny instances.
    """
    x = check_sequence(x, distortion.alphabet_size, name="x")
    A = distortion.alphabet_size
    n = len(x)
    check_orders(n, k, k1)
    if A ** (3 * n) > EXHAUSTIVE_LIMIT:
        raise InstanceTooLargeError(f"A**(3n) = {A ** (3 * n)} exceeds {EXHAUSTIVE_LIMIT}")
    rng = np.random.default_rng(seed)
    seqs = np.vstack([x, x, x]).astype(np.int64)
    tables = _kernel.dense_tables(seqs, k, k1, A)
    flog = xlog2x_table(n)
    wts = weights.as_array()
    dmat = np.ascontiguousarray(distortion.matrix)
    hist = np.zeros(A ** (3 * n), dtype=np.int64)
    no_hist = np.zeros(0, dtype=np.int64)
    dummy_trace = np.zeros(0, dtype=np.float64)
    total = burn_in + n_samples * thin
    t0 = 0
    while t0 < total:
        size = min(CHUNK, total - t0)
        pos, u = _draws(rng, n, size)
        betas = np.full(size, float(beta))
        # split at the end of burn-in so no burn-in state is counted
        cut = min(max(burn_in - t0, 0), size)
        if cut:
            _kernel.run_chunk(x, seqs, *tables, flog, wts, dmat, k, k1, A,
                              pos[:cut], u[:cut], betas[:cut], t0, 0.0, dummy_trace, no_hist, thin)
        if cut < size:
            _kernel.run_chunk(x, seqs, *tables, flog, wts, dmat, k, k1, A,
                              pos[cut:], u[cut:], betas[cut:], t0 + cut - burn_in, 0.0,
                              dummy_trace, hist, thin)
        t0 += size
    return hist


def _all_sequences(n: int, A: int) -> np.ndarray:
    return np.array(list(itertools.product(range(A), repeat=n)), dtype=np.int64).reshape(-1, n)


def _count_nh(cells: np.ndarray, ctx: np.ndarray) -> np.ndarray:
    """Row-wise ``n*H`` from per-position cell and context ids: sum_j log2(#ctx_j / #cell_j)."""
    same_cell = (cells[..., :, None] == cells[..., None, :]).sum(-1)
    same_ctx = (ctx[..., :, None] == ctx[..., None, :]).sum(-1)
    return np.log2(same_ctx / same_cell).sum(-1)


def exhaustive_minimize(x, weights: LagrangianWeights, distortion: DistortionMeasure, k: int, k1: int):
    """Global minimizer of the energy by enumerating every triple.

    Returns ``((y, z, w), energy)``.  Ties (within 1e-12) go to the
    lexicographically smallest concatenation ``(y, z, w)``.  Guarded by
    ``A**(3n) <= 2**24``.
    """
    A = distortion.alphabet_size
    x = check_sequence(x, A, name="x")
    n = len(x)
    check_orders(n, k, k1)
    if A ** (3 * n) > EXHAUSTIVE_LIMIT:
        raise InstanceTooLargeError(f"A**(3n) = {A ** (3 * n)} exceeds {EXHAUSTIVE_LIMIT}")
    energies = _all_energies(x, weights, distortion, k, k1)
    best = energies.min()
    idx = int(np.flatnonzero(energies <= best + 1e-12)[0])
    seqs = _all_sequences(n, A)
    iy, rest = divmod(idx, A ** (2 * n))
    iz, iw = divmod(rest, A ** n)
    return (seqs[iy].copy(), seqs[iz].copy(), seqs[iw].copy()), float(energies[idx])


def _all_energies(x, weights, distortion, k, k1) -> np.ndarray:
    """Energy of every triple, flattened in lexicographic ``(y, z, w)`` order."""
    A = distortion.alphabet_size
    n = len(x)
    m = 2 * k1 + 1
    seqs = _all_sequences(n, A)
    N = len(seqs)
    pos = np.arange(n)[:, None]
    past = (pos + np.arange(-k, 0)[None, :]) % n
    win = (pos + np.arange(-k1, k1 + 1)[None, :]) % n

    def pack(digits):
        if digits.shape[-1] == 0:
            return np.zeros(digits.shape[:-1], dtype=np.int64)
        return (digits * A ** np.arange(digits.shape[-1] - 1, -1, -1)).sum(-1)

    past_key = pack(seqs[:, past])          # (N, n)
    win_key = pack(seqs[:, win])            # (N, n)
    own_h = _count_nh(past_key * A + seqs, past_key) / n
    dist = distortion.matrix[x[None, :], seqs].mean(axis=1)
    g1, g2, g0, a1, a2, a0 = weights.as_array()
    side = g1 * own_h + a1 * dist           # y terms
    side2 = g2 * own_h + a2 * dist          # z terms
    cen = a0 * dist                         # w distortion
    out = np.empty((N, N, N), dtype=np.float64)
    wz_ctx = (past_key[None, :, :] * A ** m) * A ** m + win_key[:, None, :]  # (z, w, n) missing y
    for iy in range(N):
        ctx = wz_ctx + (win_key[iy] * A ** m)[None, None, :]
        cells = ctx * A + seqs[None, :, :]
        hj = _count_nh(cells, ctx) / n       # (z, w)
        out[iy] = side[iy] + side2[:, None] + g0 * hj + cen[None, :]
    return out.reshape(-1)
