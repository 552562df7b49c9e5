"""NK landscapes over the probe-selection vector, and three exact/heuristic solvers.

A landscape holds one lookup table of ``2**(K+1)`` values per output; the
objective ``f(x) = (1/N) sum_i f_i(x)`` is always maximized.  Every solver
breaks ties toward the lexicographically smallest bit vector, and every
reported value is recomputed with :func:`evaluate`, whose summation order is
fixed (subfunction 0 first), so optima from different solvers compare with
exact equality.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import MaskTable, Neighborhood

FORMAT_TAG = "nkesn.landscape/1"
MAX_EXHAUSTIVE_N = 30
_CHUNK_BITS = 18


class SolverKind(str, enum.Enum):
    DP = "dp"
    EXHAUSTIVE = "exhaustive"
    LOCAL_SEARCH = "local_search"


@dataclass(frozen=True)
class Solution:
    x: tuple
    value: float
    provenance: SolverKind = field(compare=False)

    @property
    def bits(self) -> np.ndarray:
        return np.array(self.x, dtype=np.int8)

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.x)


class NkLandscape:
    """Lookup tables ``tables[i][p]`` indexed by canonical sub-pattern ``p``."""

    def __init__(self, masks: MaskTable, tables, neighborhood: Neighborhood | None = None):
        tables = np.array(tables, dtype=np.float64)
        if tables.shape != (masks.n, 2 ** masks.arity):
            raise ValueError(f"tables must have shape {(masks.n, 2 ** masks.arity)}, "
                             f"got {tables.shape}")
        if not np.all(np.isfinite(tables)):
            raise ValueError("landscape tables must be finite")
        tables.flags.writeable = False
        self.masks = masks
        self.tables = tables
        if neighborhood is None:
            neighborhood = Neighborhood.ADJACENT if masks.is_adjacent() else Neighborhood.RANDOM
        self.neighborhood = Neighborhood(neighborhood)

    @property
    def n(self) -> int:
        return self.masks.n

    @property
    def k_plus_1(self) -> int:
        return self.masks.arity

    @property
    def k(self) -> int:
        return self.masks.arity - 1

    def evaluate(self, x) -> float:
        return evaluate(self, x)

    def subfunction_values(self, x) -> np.ndarray:
        bits = _check_bits(x, self.n)
        return np.array([self.tables[i, pattern(bits, row)] for i, row in enumerate(self.masks.rows)])

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "n": self.n,
            "k": self.k,
            "neighborhood": self.neighborhood.value,
            "masks": self.masks.rows.tolist(),
            "tables": self.tables.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NkLandscape":
        if doc.get("format") != FORMAT_TAG:
            raise ValueError(f"not a landscape document (format={doc.get('format')!r})")
        masks = MaskTable(doc["masks"])
        if masks.n != doc["n"] or masks.arity != doc["k"] + 1:
            raise ValueError("landscape header disagrees with its mask table")
        return cls(masks, doc["tables"], doc["neighborhood"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "NkLandscape":
        return cls.from_dict(json.loads(Path(path).read_text()))


def random_landscape(n: int, k: int, rng: np.random.Generator,
                     neighborhood: Neighborhood = Neighborhood.ADJACENT) -> NkLandscape:
    """Uniform [0, 1) tables; handy for tests and demos."""
    if Neighborhood(neighborhood) is Neighborhood.ADJACENT:
        masks = MaskTable.adjacent(n, k)
    else:
        masks = MaskTable.random(n, k, rng)
    return NkLandscape(masks, rng.random((n, 2 ** (k + 1))), neighborhood)


def _check_bits(x, n: int) -> np.ndarray:
    bits = np.asarray(x, dtype=np.int64).ravel()
    if bits.shape != (n,):
        raise ValueError(f"bit vector must have length {n}, got {bits.size}")
    return bits


def pattern(x, mask_row) -> int:
    """Pack the bits of ``x`` selected by ``mask_row`` into a table index.

    Bit ``j`` of the index is ``x`` at the ``j``-th smallest index in the row.
    """
    p = 0
    for j, q in enumerate(sorted(int(v) for v in mask_row)):
        if x[q]:
            p |= 1 << j
    return p


def evaluate(landscape: NkLandscape, x) -> float:
    bits = _check_bits(x, landscape.n)
    acc = 0.0
    for i, row in enumerate(landscape.masks.rows):
        acc += float(landscape.tables[i, pattern(bits, row)])
    return acc / landscape.n


def _evaluate_block(landscape: NkLandscape, bits: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate` over the rows of ``bits`` (same summation order)."""
    acc = np.zeros(bits.shape[0])
    for i, row in enumerate(landscape.masks.rows):
        idx = np.zeros(bits.shape[0], dtype=np.int64)
        for j, q in enumerate(row):
            idx |= bits[:, q].astype(np.int64) << j
        acc = acc + landscape.tables[i][idx]
    return acc / landscape.n


def solve_exhaustive(landscape: NkLandscape, max_n: int = MAX_EXHAUSTIVE_N) -> Solution:
    """Global optimum by enumerating all ``2**N`` selection vectors."""
    n = landscape.n
    if n > max_n:
        raise ValueError(f"exhaustive enumeration refused for N={n} > {max_n}")
    total = 1 << n
    chunk = min(total, 1 << _CHUNK_BITS)
    # x_0 is the most significant bit, so enumeration order is lexicographic
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_val, best_idx = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        vals = _evaluate_block(landscape, bits)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), start + j
    x = tuple(int(b) for b in (best_idx >> shifts) & 1)
    return Solution(x, evaluate(landscape, x), SolverKind.EXHAUSTIVE)


def solve_adjacent_dp(landscape: NkLandscape) -> Solution:
    """Global optimum of a wrapped adjacent landscape in ``O(N 4^K)`` table lookups.

    The first ``K`` bits are fixed as a prefix; the remaining bits are swept
    with the last ``K`` chosen bits as DP state.  Subfunctions that wrap past
    ``N-1`` are scored at the end from (prefix, final state).  A backward pass
    records the better bit for every (position, prefix, state); the forward
    reconstruction takes 0 on ties, which yields the lexicographically smallest
    optimum.
    """
    if not landscape.masks.is_adjacent():
        raise ValueError("dynamic programming requires an adjacent (wrapped) mask table")
    n, k = landscape.n, landscape.k
    tables = landscape.tables
    n_states = 1 << k
    prefixes = np.arange(n_states, dtype=np.int64)[:, None]
    states = np.arange(n_states, dtype=np.int64)[None, :]

    # terminal value: wrapped subfunctions f_{N-K} .. f_{N-1}
    g = np.zeros((n_states, n_states))
    for i in range(n - k, n):
        idx = np.zeros((n_states, n_states), dtype=np.int64)
        for j, q in enumerate(landscape.masks.rows[i]):
            if q >= n - k:
                bit = (states >> (q - (n - k))) & 1
            else:
                bit = (prefixes >> q) & 1
            idx = idx | (bit << j)
        g = g + tables[i][idx]

    window = np.arange(n_states, dtype=np.int64)
    choices = {}
    for j in range(n - 1, k - 1, -1):
        f = tables[j - k]
        w0 = window
        w1 = window | (1 << k)
        v0 = f[w0][None, :] + g[:, w0 >> 1]
        v1 = f[w1][None, :] + g[:, w1 >> 1]
        choices[j] = v1 > v0
        g = np.maximum(v0, v1)

    totals = g[np.arange(n_states), np.arange(n_states)]
    best = totals.max()
    candidates = [int(p) for p in np.nonzero(totals == best)[0]]
    # lexicographic comparison on (x_0, x_1, ...); prefix bit t is x_t
    prefix = min(candidates, key=lambda p: [(p >> t) & 1 for t in range(k)])

    x = [(prefix >> t) & 1 for t in range(k)]
    s = prefix
    for j in range(k, n):
        b = int(choices[j][prefix, s])
        x.append(b)
        s = (s | (b << k)) >> 1
    x = tuple(x)
    return Solution(x, evaluate(landscape, x), SolverKind.DP)


class FlipDeltas:
    """Incrementally maintained gains of every single-bit flip.

    ``delta[q]`` is the change in ``sum_i f_i`` (not divided by N) when bit
    ``q`` flips.  Flipping ``q`` touches only the subfunctions whose mask
    contains ``q``.
    """

    def __init__(self, landscape: NkLandscape, x):
        self.landscape = landscape
        self.x = _check_bits(x, landscape.n).astype(np.int8).copy()
        rows = landscape.masks.rows
        self._incidence = [[] for _ in range(landscape.n)]
        for i, row in enumerate(rows):
            for j, q in enumerate(row):
                self._incidence[q].append((i, j))
        self.patterns = np.array([pattern(self.x, row) for row in rows], dtype=np.int64)
        self.delta = np.zeros(landscape.n)
        for i in range(landscape.n):
            self._apply(i, +1.0)

    def _apply(self, i: int, sign: float):
        table = self.landscape.tables[i]
        p = int(self.patterns[i])
        here = table[p]
        for j, q in enumerate(self.landscape.masks.rows[i]):
            self.delta[q] += sign * (table[p ^ (1 << j)] - here)

    def flip(self, q: int) -> None:
        touched = self._incidence[q]
        for i, _ in touched:
            self._apply(i, -1.0)
        for i, j in touched:
            self.patterns[i] ^= 1 << j
        for i, _ in touched:
            self._apply(i, +1.0)
        self.x[q] ^= 1


def _hill_climb(landscape: NkLandscape, x0) -> np.ndarray:
    tracker = FlipDeltas(landscape, x0)
    while True:
        while True:
            q = int(np.argmax(tracker.delta))
            if not tracker.delta[q] > 0.0:
                break
            tracker.flip(q)
        # audit with the exact objective; incremental deltas can round to 0
        x = tracker.x
        here = evaluate(landscape, x)
        gains = []
        for q in range(landscape.n):
            x[q] ^= 1
            gains.append(evaluate(landscape, x) - here)
            x[q] ^= 1
        q = int(np.argmax(gains))
        if not gains[q] > 0.0:
            return x.copy()
        x_next = x.copy()
        x_next[q] ^= 1
        tracker = FlipDeltas(landscape, x_next)


def solve_local_search(landscape: NkLandscape, seed: int = 0, restarts: int = 50,
                       radius: int = 1) -> Solution:
    """Best-improvement bit-flip hill climbing from ``restarts`` random starts."""
    if radius != 1:
        raise ValueError("only radius-1 neighborhoods are supported")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best_x, best_val = None, -np.inf
    for _ in range(restarts):
        x0 = rng.integers(0, 2, size=landscape.n)
        x = tuple(int(b) for b in _hill_climb(landscape, x0))
        val = evaluate(landscape, x)
        if val > best_val or (val == best_val and x < best_x):
            best_x, best_val = x, val
    return Solution(best_x, best_val, SolverKind.LOCAL_SEARCH)


def solve(landscape: NkLandscape, solver: SolverKind, seed: int = 0, restarts: int = 50) -> Solution:
    solver = SolverKind(solver)
    if solver is SolverKind.DP:
        return solve_adjacent_dp(landscape)
    if solver is SolverKind.EXHAUSTIVE:
        return solve_exhaustive(landscape)
    return solve_local_search(landscape, seed=seed, restarts=restarts)
