"""Pick-Freeze, U-statistic and rank-based estimators of universal indices.

All three estimators work for any :class:`~wassgsa.indices.TestFunctionFamily`:
the family is bound once to the design and queried block by block, so the
same code handles scalar outputs and distribution-valued outputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .errors import DegenerateOutputError, DomainError, InsufficientSampleError, UnsupportedFeatureError
from .indices import OUTPUT_LAW, IndexEstimate, OutputSample, TestFunctionFamily, as_sample

PICK_FREEZE = "PickFreeze"
USTAT = "UStat"
RANK = "Rank"

# Largest number of kernel evaluations a complete U-statistic may cost
# before the incomplete version is used instead.
USTAT_WORK_CAP = 2 * 10**8
USTAT_DEFAULT_BUDGET = 10**5

# Target number of matrix entries per block when enumerating parameter tuples.
_BLOCK_ENTRIES = 1 << 21


@dataclass
class PickFreezeDesign:
    """Outputs ``Z_j``, their Pick-Freeze copies ``Z_j^u`` and optional parameter pools.

    ``aux`` holds ``m`` pools of length ``N``. When it is left empty the
    estimator reuses ``z`` for output-law families and draws fresh pools for
    the other sources.
    """

    z: Any
    z_pf: Any
    aux: Sequence[Any] = field(default_factory=tuple)

    def __post_init__(self):
        self.z = as_sample(self.z)
        self.z_pf = as_sample(self.z_pf)
        self.aux = tuple(self.aux)
        N = len(self.z)
        if len(self.z_pf) != N:
            raise DomainError(f"z has {N} entries but z_pf has {len(self.z_pf)}")
        if N < 2:
            raise InsufficientSampleError("a Pick-Freeze design needs N >= 2")
        for l, pool in enumerate(self.aux):
            if len(pool) != N:
                raise DomainError(f"aux row {l + 1} has {len(pool)} entries, expected {N}")

    @property
    def N(self) -> int:
        return len(self.z)

    @property
    def m(self) -> int:
        return len(self.aux)


@dataclass
class RankDesign:
    """A single sample: one real input column ``x`` and the outputs ``z``."""

    x: np.ndarray
    z: Any
    aux: Sequence[Any] = field(default_factory=tuple)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.z = as_sample(self.z)
        self.aux = tuple(self.aux)
        if len(self.z) != self.x.size:
            raise DomainError(f"x has {self.x.size} entries but z has {len(self.z)}")
        if self.x.size < 2:
            raise InsufficientSampleError("a rank design needs N >= 2")
        for l, pool in enumerate(self.aux):
            if len(pool) != self.x.size:
                raise DomainError(f"aux row {l + 1} has {len(pool)} entries, expected {self.x.size}")

    @property
    def N(self) -> int:
        return self.x.size


def _pools(fam: TestFunctionFamily, given: Sequence[Any], z: OutputSample, rng: np.random.Generator):
    if len(given) == fam.m:
        pools = [as_sample(p) if fam.param_source == OUTPUT_LAW else p for p in given]
        return pools, "design"
    if given:
        raise DomainError(f"family {fam.name!r} has arity {fam.m} but the design carries {len(given)} aux rows")
    if fam.param_source == OUTPUT_LAW:
        return [z] * fam.m, "reused"
    return [fam.sample_params(rng, len(z)) for _ in range(fam.m)], "drawn"


def _tuple_blocks(sizes: tuple[int, ...], width: int, budget: int | None,
                  rng: np.random.Generator) -> Iterator[tuple[np.ndarray, ...]]:
    """Index arrays of parameter tuples, in blocks sized for ``width``-column matrices."""
    rows = max(1, _BLOCK_ENTRIES // max(1, width))
    if not sizes:
        yield ()
        return
    total = math.prod(sizes)
    if budget is None or budget >= total:
        for start in range(0, total, rows):
            yield np.unravel_index(np.arange(start, min(total, start + rows)), sizes)
        return
    drawn = tuple(rng.integers(0, s, size=budget) for s in sizes)
    for start in range(0, budget, rows):
        yield tuple(d[start:start + rows] for d in drawn)


def _tuple_count(sizes: tuple[int, ...], budget: int | None) -> int:
    total = math.prod(sizes) if sizes else 1
    return total if budget is None or budget >= total else budget


def _ratio(num: float, den: float, method: str, N: int, m: int, meta: dict) -> IndexEstimate:
    if not den > 0:
        raise DegenerateOutputError(
            f"{method} estimate is undefined: variance term is {den!r}", numerator=num, denominator=den
        )
    return IndexEstimate(num / den, num, den, method, N, m, meta)


def _count_le(sorted_scores: np.ndarray, cutoffs: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_scores, cutoffs, side="right")


def pick_freeze_estimate(d: PickFreezeDesign, fam: TestFunctionFamily, budget: int | None = None,
                         seed: int | None = 0, fast: bool = True) -> IndexEstimate:
    """Double Monte-Carlo Pick-Freeze estimate of the universal index.

    For every parameter tuple the Sobol part is estimated with the empirical
    covariance of ``T(Z)`` and ``T(Z^u)`` over the symmetrized variance; both
    parts are then averaged over all ``N^m`` tuples, or over ``budget`` tuples
    drawn uniformly with replacement.
    """
    rng = np.random.default_rng(seed)
    N = d.N
    pools, aux_origin = _pools(fam, d.aux, d.z, rng)
    kernel = fam.bind(pools, [d.z, d.z_pf])
    sizes = tuple(len(p) for p in pools)
    count = _tuple_count(sizes, budget)
    num_parts: list[float] = []
    den_parts: list[float] = []
    groups = kernel.threshold_groups() if fast and (budget is None or budget >= count) else None
    if groups is not None:
        for scores, cutoffs in groups:
            g0, g1 = scores[0], scores[1]
            a = _count_le(np.sort(g0), cutoffs) / N
            b = _count_le(np.sort(g1), cutoffs) / N
            c = _count_le(np.sort(np.maximum(g0, g1)), cutoffs) / N
            mean = 0.5 * (a + b)
            num_parts.append(float(np.sum(c - mean**2)))
            den_parts.append(float(np.sum(mean - mean**2)))
    else:
        for idx in _tuple_blocks(sizes, N, budget, rng):
            t0 = kernel.values(idx, 0)
            t1 = kernel.values(idx, 1)
            mean = 0.5 * (t0.mean(axis=1) + t1.mean(axis=1))
            cross = (t0 * t1).mean(axis=1)
            second = 0.5 * (np.square(t0).mean(axis=1) + np.square(t1).mean(axis=1))
            num_parts.append(float(np.sum(cross - mean**2)))
            den_parts.append(float(np.sum(second - mean**2)))
    num = math.fsum(num_parts) / count
    den = math.fsum(den_parts) / count
    meta = {"family": fam.name, "aux": aux_origin, "tuples": count, "seed": seed}
    return _ratio(num, den, PICK_FREEZE, N, fam.m, meta)


def _falling(N: int, k: int) -> int:
    return math.perm(N, k)


def _pairs(z) -> tuple[OutputSample, OutputSample]:
    if isinstance(z, PickFreezeDesign):
        return z.z, z.z_pf
    if isinstance(z, tuple) and len(z) == 2 and not isinstance(z[0], tuple):
        return as_sample(z[0]), as_sample(z[1])
    z = list(z)
    return as_sample([p[0] for p in z]), as_sample([p[1] for p in z])


def ustat_estimate(z, fam: TestFunctionFamily, budget: int | str | None = None,
                   seed: int | None = 0) -> IndexEstimate:
    """U-statistic estimate built from the four kernels ``Phi_1 .. Phi_4``.

    ``z`` is a sequence of pairs ``(Z_j, Z_j^u)``, a ``(z, z_pf)`` tuple or a
    :class:`PickFreezeDesign`. Parameters of the test functions are taken from
    the sample itself, so only output-law families qualify.

    ``budget=None`` computes the complete statistic when it is affordable and
    otherwise averages over :data:`USTAT_DEFAULT_BUDGET` random subsets;
    ``budget="all"`` forces the complete statistic; an integer requests an
    incomplete statistic over that many random subsets per kernel.
    """
    if fam.param_source != OUTPUT_LAW:
        raise UnsupportedFeatureError(
            "U-statistics need test-function parameters drawn from the output law"
        )
    zs, zu = _pairs(z)
    N, m = len(zs), fam.m
    if len(zu) != N:
        raise DomainError("the two members of each pair must come in equal numbers")
    if N < m + 2:
        raise InsufficientSampleError(f"U-statistics with arity {m} need N >= {m + 2}, got {N}")
    kernel = fam.bind([zs] * m, [zs, zu])
    if budget is None:
        complete = N ** (m + 1) <= USTAT_WORK_CAP
        budget = None if complete else USTAT_DEFAULT_BUDGET
    elif budget == "all":
        complete, budget = True, None
    else:
        complete = False
        budget = int(budget)
    rng = np.random.default_rng(seed)
    if complete:
        u = _ustat_complete(kernel, N, m, rng)
    else:
        u = _ustat_incomplete(kernel, N, m, budget, rng)
    num, den = u[0] - u[1], u[2] - u[3]
    meta = {"family": fam.name, "complete": complete, "budget": budget, "U": tuple(u), "seed": seed}
    if not den > 0:
        raise DegenerateOutputError(f"U-statistic denominator is {den!r}", numerator=num, denominator=den)
    return IndexEstimate(num / den, num, den, USTAT, N, m, meta)


def _ustat_complete(kernel, N: int, m: int, rng) -> list[float]:
    # Averaging a symmetrized kernel over subsets equals averaging the raw
    # kernel over ordered tuples of distinct indices; the free output indices
    # are then summed in closed form.
    parts = [[], [], [], []]
    for idx in _tuple_blocks((N,) * m, N, None, rng):
        if m:
            stacked = np.column_stack(idx)
            distinct = np.array([len(set(row)) == m for row in stacked]) if m > 1 else np.ones(len(stacked), bool)
            idx = tuple(i[distinct] for i in idx)
            if idx[0].size == 0:
                continue
        t0 = np.array(kernel.values(idx, 0), dtype=float)
        t1 = np.array(kernel.values(idx, 1), dtype=float)
        rows = np.arange(t0.shape[0])
        for i in idx:
            t0[rows, i] = 0.0
            t1[rows, i] = 0.0
        prod = (t0 * t1).sum(axis=1)
        s0, s1 = t0.sum(axis=1), t1.sum(axis=1)
        sq = np.square(t0).sum(axis=1)
        parts[0].append(float(prod.sum()))
        parts[1].append(float((s0 * s1 - prod).sum()))
        parts[2].append(float(sq.sum()))
        parts[3].append(float((s0 * s0 - sq).sum()))
    n1, n2 = _falling(N, m + 1), _falling(N, m + 2)
    return [math.fsum(parts[0]) / n1, math.fsum(parts[1]) / n2,
            math.fsum(parts[2]) / n1, math.fsum(parts[3]) / n2]


def _random_subsets(N: int, k: int, count: int, rng) -> np.ndarray:
    subs = rng.integers(0, N, size=(count, k))
    while True:
        bad = np.array([len(set(r)) < k for r in subs]) if k > 1 else np.zeros(count, bool)
        if not bad.any():
            return np.sort(subs, axis=1)
        subs[bad] = rng.integers(0, N, size=(int(bad.sum()), k))


def _phi_symmetrized(kernel, l: int, subsets: np.ndarray, m: int) -> np.ndarray:
    k = subsets.shape[1]
    total = np.zeros(subsets.shape[0])
    perms = list(itertools.permutations(range(k)))
    for tau in perms:
        cols = subsets[:, list(tau)]
        params = tuple(cols[:, i] for i in range(m))
        first = kernel.at(params, cols[:, m], 0)
        if l == 1:
            total += first * kernel.at(params, cols[:, m], 1)
        elif l == 2:
            total += first * kernel.at(params, cols[:, m + 1], 1)
        elif l == 3:
            total += first * first
        else:
            total += first * kernel.at(params, cols[:, m + 1], 0)
    return total / len(perms)


def _ustat_incomplete(kernel, N: int, m: int, budget: int, rng) -> list[float]:
    out = []
    for l, k in ((1, m + 1), (2, m + 2), (3, m + 1), (4, m + 2)):
        if budget >= math.comb(N, k):
            subsets = np.array(list(itertools.combinations(range(N), k)), dtype=np.int64).reshape(-1, k)
        else:
            subsets = _random_subsets(N, k, budget, rng)
        vals = [_phi_symmetrized(kernel, l, subsets[s:s + 4096], m) for s in range(0, len(subsets), 4096)]
        out.append(math.fsum(float(v.sum()) for v in vals) / len(subsets))
    return out


def rank_order(x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """Permutation sorting ``x``; ties are broken by a random key drawn from ``rng``."""
    x = np.asarray(x, dtype=float)
    order = np.lexsort((rng.permutation(x.size), x))
    ties = bool(np.any(np.diff(x[order]) == 0))
    return order, ties


def successor_map(order: np.ndarray) -> np.ndarray:
    """``N(j)``: index whose input has the next rank, wrapping the largest to the smallest."""
    succ = np.empty_like(order)
    succ[order] = np.roll(order, -1)
    return succ


def rank_estimate(d: RankDesign, fam: TestFunctionFamily, budget: int | None = None,
                  seed: int | None = 0, fast: bool = True) -> IndexEstimate:
    """First-order index from a single sample, pairing each output with its rank successor.

    The successor in the ordering of ``x`` stands in for the Pick-Freeze copy.
    Parameter tuples of output-law families range over the sample itself.
    """
    rng = np.random.default_rng(seed)
    N = d.N
    order, ties = rank_order(d.x, rng)
    succ = successor_map(order)
    pools, aux_origin = _pools(fam, d.aux, d.z, rng)
    kernel = fam.bind(pools, [d.z])
    sizes = tuple(len(p) for p in pools)
    count = _tuple_count(sizes, budget)
    num_parts: list[float] = []
    den_parts: list[float] = []
    groups = kernel.threshold_groups() if fast and (budget is None or budget >= count) else None
    if groups is not None:
        for scores, cutoffs in groups:
            g = scores[0]
            a = _count_le(np.sort(g), cutoffs) / N
            c = _count_le(np.sort(np.maximum(g, g[succ])), cutoffs) / N
            num_parts.append(float(np.sum(c - a**2)))
            den_parts.append(float(np.sum(a - a**2)))
    else:
        for idx in _tuple_blocks(sizes, N, budget, rng):
            t = kernel.values(idx, 0)
            mean = t.mean(axis=1)
            cross = (t * t[:, succ]).mean(axis=1)
            second = np.square(t).mean(axis=1)
            num_parts.append(float(np.sum(cross - mean**2)))
            den_parts.append(float(np.sum(second - mean**2)))
    num = math.fsum(num_parts) / count
    den = math.fsum(den_parts) / count
    meta = {"family": fam.name, "aux": aux_origin, "tuples": count, "seed": seed, "ties": ties}
    return _ratio(num, den, RANK, N, fam.m, meta)


def chatterjee_xi(x, y, seed: int | None = 0) -> float:
    """Chatterjee's rank correlation ``1 - 3 sum |r_{j+1} - r_j| / (N^2 - 1)``.

    ``r_j`` counts the ``y`` values not exceeding the ``j``-th one once pairs
    are sorted by ``x``. Ties in ``x`` are broken at random (seeded).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DomainError(f"x and y differ in length: {x.size} vs {y.size}")
    N = x.size
    if N < 2:
        raise InsufficientSampleError("the coefficient needs at least two pairs")
    order, _ = rank_order(x, np.random.default_rng(seed))
    ys = y[order]
    r = np.searchsorted(np.sort(ys), ys, side="right")
    return 1.0 - 3.0 * float(np.abs(np.diff(r)).sum()) / (N * N - 1.0)
