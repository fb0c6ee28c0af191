"""Empirical probability measures on the real line and transport costs between them.

Every measure is stored as its sorted atoms with uniform weights, so the
quantile function is a step function and one-dimensional optimal transport
reduces to integrating a cost along matched quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError

# Slack on v*n before taking the ceiling, so that v = k/n typed in decimal
# (0.7 with n = 10) lands on atom k rather than k + 1.
_QUANTILE_SLACK = 1e-12


class EmpiricalDistribution:
    """Finitely supported measure ``(1/n) sum_k delta_{x_k}``.

    Parameters
    ----------
    atoms : array_like
        Support points, in any order. Ties are allowed.
    """

    __slots__ = ("_atoms",)

    def __init__(self, atoms: Iterable[float]):
        arr = np.sort(np.asarray(atoms, dtype=float).ravel())
        if arr.size == 0:
            raise DomainError("an empirical distribution needs at least one atom")
        if not np.all(np.isfinite(arr)):
            raise DomainError("atoms must be finite")
        arr.flags.writeable = False
        self._atoms = arr

    @classmethod
    def _from_sorted(cls, atoms: np.ndarray) -> "EmpiricalDistribution":
        obj = cls.__new__(cls)
        arr = np.array(atoms, dtype=float)
        arr.flags.writeable = False
        obj._atoms = arr
        return obj

    @classmethod
    def from_quantile_function(
        cls, qfun: Callable[[np.ndarray], np.ndarray], grid: "QuantileGrid | None" = None
    ) -> "EmpiricalDistribution":
        """Discretize a quantile function on the nodes of ``grid``."""
        grid = grid or QuantileGrid.midpoint()
        return cls(qfun(grid.nodes))

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def n(self) -> int:
        return self._atoms.size

    def quantile(self, v):
        return quantile(self, v)

    def mean(self) -> float:
        return float(self._atoms.mean())

    def shift(self, c: float) -> "EmpiricalDistribution":
        return EmpiricalDistribution._from_sorted(self._atoms + c)

    def scale(self, lam: float) -> "EmpiricalDistribution":
        if lam < 0:
            return EmpiricalDistribution(self._atoms * lam)
        return EmpiricalDistribution._from_sorted(self._atoms * lam)

    def __add__(self, c: float) -> "EmpiricalDistribution":
        return self.shift(float(c))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmpiricalDistribution):
            return NotImplemented
        return np.array_equal(self._atoms, other._atoms)

    def __hash__(self) -> int:
        return hash(self._atoms.tobytes())

    def __repr__(self) -> str:
        if self.n <= 6:
            body = ", ".join(f"{a:g}" for a in self._atoms)
        else:
            body = f"{self._atoms[0]:g}, ..., {self._atoms[-1]:g}; n={self.n}"
        return f"EmpiricalDistribution([{body}])"


@dataclass(frozen=True)
class ContrastFunction:
    """Cost ``c(x, y)`` with the measure property (nonpositive rectangle increments).

    Use the constructors :meth:`power`, :meth:`pinball` and :meth:`custom`.
    A custom evaluator must accept numpy arrays and is trusted to satisfy the
    measure property; nothing checks it.
    """

    kind: str
    q: float = 2.0
    alpha: float = 0.5
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None, compare=False
    )

    @classmethod
    def power(cls, q: float = 2.0) -> "ContrastFunction":
        if not q >= 1:
            raise DomainError(f"power contrast needs q >= 1, got {q}")
        return cls("power", q=float(q))

    @classmethod
    def squared(cls) -> "ContrastFunction":
        return cls.power(2.0)

    @classmethod
    def pinball(cls, alpha: float) -> "ContrastFunction":
        if not 0 < alpha < 1:
            raise DomainError(f"pinball level must lie in (0, 1), got {alpha}")
        return cls("pinball", alpha=float(alpha))

    @classmethod
    def custom(cls, evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ContrastFunction":
        return cls("custom", evaluator=evaluator)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "power":
            return np.abs(x - y) ** self.q
        if self.kind == "pinball":
            a = self.alpha
            return np.where(x < y, (1 - a) * (y - x), a * (x - y))
        return np.asarray(self.evaluator(x, y), dtype=float)


@dataclass(frozen=True)
class QuantileGrid:
    """Quadrature nodes and weights for integrals over ``v`` in (0, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise DomainError("nodes and weights must be non-empty 1-d arrays of equal length")
        if np.any(nodes <= 0) or np.any(nodes >= 1) or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing inside (0, 1)")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError("grid weights must be positive and sum to 1")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def midpoint(cls, size: int = 512) -> "QuantileGrid":
        """Equally spaced midpoints ``(k - 1/2)/size`` with uniform weights."""
        if size < 1:
            raise DomainError("grid size must be positive")
        nodes = (np.arange(1, size + 1) - 0.5) / size
        return cls(nodes, np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return self.nodes.size


def quantile(d: EmpiricalDistribution, v):
    """Generalized inverse ``inf{x : F(x) >= v}`` of the distribution function.

    Accepts a scalar or an array of levels in (0, 1).
    """
    v_arr = np.asarray(v, dtype=float)
    if np.any(~(v_arr > 0)) or np.any(~(v_arr < 1)):
        raise DomainError("quantile levels must lie in the open interval (0, 1)")
    idx = quantile_index(v_arr, d.n)
    out = d.atoms[idx]
    return float(out) if out.ndim == 0 else out


def quantile_index(v, n: int) -> np.ndarray:
    """0-based atom index of the generalized inverse at level(s) ``v`` for ``n`` atoms."""
    k = np.ceil(np.asarray(v, dtype=float) * n - _QUANTILE_SLACK * n).astype(np.int64)
    return np.clip(k, 1, n) - 1


def _merged_grid(n1: int, n2: int):
    # Jump points i/n1 and j/n2 scaled by n1*n2 are integers: exact merge.
    ends = np.union1d(np.arange(1, n1 + 1, dtype=np.int64) * n2,
                      np.arange(1, n2 + 1, dtype=np.int64) * n1)
    lengths = np.diff(ends, prepend=0) / float(n1 * n2)
    return (ends - 1) // n2, (ends - 1) // n1, lengths


def _matched(d1: EmpiricalDistribution, d2: EmpiricalDistribution):
    """Pairs of quantile values and the length of the level interval carrying them."""
    if d1.n == d2.n:
        return d1.atoms, d2.atoms, None
    i1, i2, lengths = _merged_grid(d1.n, d2.n)
    return d1.atoms[i1], d2.atoms[i2], lengths


def wasserstein(d1: EmpiricalDistribution, d2: EmpiricalDistribution, q: float = 2.0) -> float:
    """``W_q`` distance between two empirical measures on the line."""
    if not q >= 1:
        raise DomainError(f"Wasserstein order must be >= 1, got {q}")
    return wasserstein_power(d1, d2, q) ** (1.0 / q)


def wasserstein_power(d1: EmpiricalDistribution, d2: EmpiricalDistribution, q: float = 2.0) -> float:
    """``W_q^q`` without the final root; monotone in the distance, cheaper to compare."""
    x, y, lengths = _matched(d1, d2)
    diff = np.abs(x - y) ** q
    if lengths is None:
        return float(diff.mean())
    return float(np.dot(diff, lengths))


def wasserstein_cost(d1: EmpiricalDistribution, d2: EmpiricalDistribution, c: ContrastFunction) -> float:
    """Transport cost ``int_0^1 c(F^-(v), G^-(v)) dv`` under the monotone coupling."""
    x, y, lengths = _matched(d1, d2)
    vals = c(x, y)
    if lengths is None:
        return float(vals.mean())
    return float(np.dot(vals, lengths))


def stack_atoms(dists: Sequence[EmpiricalDistribution]) -> np.ndarray | None:
    """Rows of sorted atoms when all members share one atom count, else ``None``."""
    if not dists:
        return None
    n = dists[0].n
    if any(d.n != n for d in dists):
        return None
    return np.vstack([d.atoms for d in dists])


def pairwise_wasserstein_power(
    left: Sequence[EmpiricalDistribution] | np.ndarray,
    right: Sequence[EmpiricalDistribution] | np.ndarray,
    q: float = 2.0,
    chunk_bytes: int = 1 << 26,
) -> np.ndarray:
    """Matrix of ``W_q^q`` between every member of ``left`` and every member of ``right``.

    Stacked atom arrays (equal counts) take a vectorized path; anything else
    falls back to the merged-grid computation pair by pair.
    """
    a = left if isinstance(left, np.ndarray) else stack_atoms(list(left))
    b = right if isinstance(right, np.ndarray) else stack_atoms(list(right))
    if a is not None and b is not None and a.shape[1] == b.shape[1]:
        n = a.shape[1]
        out = np.empty((a.shape[0], b.shape[0]))
        rows = max(1, chunk_bytes // (8 * n * max(1, b.shape[0])))
        for start in range(0, a.shape[0], rows):
            block = a[start:start + rows, None, :] - b[None, :, :]
            if q == 2.0:
                np.square(block, out=block)
            else:
                block = np.abs(block) ** q
            out[start:start + rows] = block.mean(axis=2)
        return out
    ls = _as_dists(left)
    rs = _as_dists(right)
    return np.array([[wasserstein_power(x, y, q) for y in rs] for x in ls]).reshape(len(ls), len(rs))


def _as_dists(obj) -> list[EmpiricalDistribution]:
    if isinstance(obj, np.ndarray):
        return [EmpiricalDistribution._from_sorted(row) for row in obj]
    return list(obj)
