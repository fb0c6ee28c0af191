"""Built-in test models.

``toy``: outputs are the uniform laws on ``[0, L]`` with ``L = 1 + x1 + x2 + x1 x3``,
with Bernoulli inputs for the closed-form indices.
``gremaud``: the scalar map ``2 x2 exp(-2 x1) + x3^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import EmpiricalDistribution, QuantileGrid
from .errors import DomainError
from .indices import OutputSample
from .stochastic import IndependentInputs, StochasticCode

U1, U2, U3, U13 = (1,), (2,), (3,), (1, 3)
TOY_SETS = (U1, U2, U3, U13)


@dataclass(frozen=True)
class ToyModelParams:
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        for name in ("p1", "p2", "p3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")

    @classmethod
    def of(cls, p) -> "ToyModelParams":
        return p if isinstance(p, cls) else cls(*map(float, p))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)


def toy_level(X) -> np.ndarray:
    """Upper end ``L = 1 + x1 + x2 + x1 x3`` of the output support, row by row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if np.any(X < 0):
        raise DomainError("toy inputs must be nonnegative")
    return 1.0 + X[:, 0] + X[:, 1] + X[:, 0] * X[:, 2]


@dataclass(frozen=True)
class ToyCode:
    """Toy output at one input point."""

    level: float

    def quantile(self, v):
        return np.asarray(v, dtype=float) * self.level

    def ideal(self, grid: QuantileGrid | None = None) -> EmpiricalDistribution:
        """The exact output law read on ``grid``."""
        grid = grid or QuantileGrid.midpoint()
        return EmpiricalDistribution(grid.nodes * self.level)


def toy_cdf_code(x1: float, x2: float, x3: float) -> ToyCode:
    return ToyCode(float(toy_level([x1, x2, x3])[0]))


def toy_ideal_outputs(X, grid: QuantileGrid | None = None) -> OutputSample:
    """Exact toy outputs for every row of ``X``, as rows of grid quantiles."""
    grid = grid or QuantileGrid.midpoint()
    return OutputSample.from_atoms(toy_level(X)[:, None] * grid.nodes[None, :])


def _toy_batch(X, n, rng):
    return rng.random((X.shape[0], n)) * toy_level(X)[:, None]


def _toy_single(x, seed):
    return float(np.random.default_rng(seed).random() * toy_level(x)[0])


def toy_stochastic_code() -> StochasticCode:
    """Simulator drawing one value uniformly on ``[0, L(x)]`` per call."""
    return StochasticCode(_toy_single, 3, batch=_toy_batch, reentrant=True, name="toy")


def toy_inputs(p) -> IndependentInputs:
    return IndependentInputs.bernoulli(ToyModelParams.of(p).as_tuple())


def toy_frechet_indices(p) -> dict[tuple[int, ...], float]:
    """Closed-form Fréchet-mean indices for Bernoulli inputs."""
    p1, p2, p3 = ToyModelParams.of(p).as_tuple()
    v1, v2, v3 = p1 * (1 - p1), p2 * (1 - p2), p3 * (1 - p3)
    num = {
        U1: (1 + p3) ** 2 * v1,
        U2: v2,
        U3: p1**2 * v3,
        U13: v1 * v3 + v1 * (1 + p3) ** 2 + v3 * p1**2,
    }
    den = num[U13] + v2
    return {u: val / den for u, val in num.items()}


def _level_probs(p1, p2, p3):
    return (
        (1 - p1) * (1 - p2),
        (1 - p1) * p2 + p1 * (1 - p2) * (1 - p3),
        p1 * ((1 - p2) * p3 + p2 * (1 - p3)),
        p1 * p2 * p3,
    )


def _var13_case2(p1, p2, p3):
    return p1 * (1 - p1) * (1 - (1 - p2) * (1 - p3)) ** 2 + p1 * (1 - p2) ** 2 * p3 * (1 - p3)


def _var13_case6(p1, p2, p3):
    return p1 * (1 - p1) * (p2 - (1 - p2) * (1 - p3)) ** 2 + p1 * (1 - p2) ** 2 * p3 * (1 - p3)


def _var13_case11(p1, p2, p3):
    return p1 * (1 - p1) * (p2 + (1 - 2 * p2) * p3) ** 2 + p1 * (1 - 2 * p2) ** 2 * p3 * (1 - p3)


def _var13_case15(p1, p2, p3):
    return p1 * (1 - p1) * (p2 + (1 - p2) * p3) ** 2 + p1 * (1 - p2) ** 2 * p3 * (1 - p3)


def _zero(p1, p2, p3):
    return 0.0


# Shared table entries, in the order (Num 1, Num 2, Num 3, Num 1,3, q Den).
_A = (
    lambda p1, p2, p3: p1 * (1 - p1) * (1 - p2) ** 2,
    lambda p1, p2, p3: (1 - p1) ** 2 * p2 * (1 - p2),
    _zero,
    lambda p1, p2, p3: p1 * (1 - p1) * (1 - p2) ** 2,
)
_B = (
    lambda p1, p2, p3: p1 * (1 - p1) * p2**2 * p3**2,
    lambda p1, p2, p3: p1**2 * p2 * (1 - p2) * p3**2,
    lambda p1, p2, p3: p1**2 * p2**2 * p3 * (1 - p3),
    lambda p1, p2, p3: p1 * p2**2 * p3 * (1 - p1 * p3),
)
_NONE = (_zero, _zero, _zero, _zero)

# (i, j) -> entries for F1 = U[0, i], F2 = U[0, j].
TOY_WBALL_TABLE = {
    (1, 1): _A + (lambda p1, p2, p3: (1 - p1) * (1 - p2),),
    (1, 2): (
        lambda p1, p2, p3: p1 * (1 - p1) * (p2 + p3 - p2 * p3) ** 2,
        lambda p1, p2, p3: p1**2 * p2 * (1 - p2) * (1 - p3) ** 2,
        lambda p1, p2, p3: p1**2 * (1 - p2) ** 2 * p3 * (1 - p3),
        _var13_case2,
        lambda p1, p2, p3: (1 - p1) + p1 * (1 - p2) * (1 - p3),
    ),
    (1, 3): _B + (lambda p1, p2, p3: 1 - p1 * p2 * p3,),
    (1, 4): _NONE + (_zero,),
    (2, 1): _B + (lambda p1, p2, p3: 1 - p1 * p2 * p3,),
    (2, 2): (
        lambda p1, p2, p3: p1 * (1 - p1) * (p2 - (1 - p2) * (1 - p3)) ** 2,
        lambda p1, p2, p3: p2 * (1 - p2) * (p1 * (1 - p3) - (1 - p1)) ** 2,
        lambda p1, p2, p3: p1**2 * (1 - p2) ** 2 * p3 * (1 - p3),
        _var13_case6,
        lambda p1, p2, p3: (1 - p1) * p2 + p1 * (1 - p2) * (1 - p3),
    ),
    (2, 3): _B + (lambda p1, p2, p3: 1 - p1 * p2 * p3,),
    (2, 4): _NONE + (_zero,),
    (3, 1): _NONE + (_zero,),
    (3, 2): _A + (lambda p1, p2, p3: (1 - p1) * p2 + p1,),
    (3, 3): (
        lambda p1, p2, p3: p1 * (1 - p1) * (p2 * (1 - p3) + (1 - p2) * p3) ** 2,
        lambda p1, p2, p3: p1**2 * p2 * (1 - p2) * (2 * p3 - 1) ** 2,
        lambda p1, p2, p3: p1**2 * (2 * p2 - 1) ** 2 * p3 * (1 - p3),
        _var13_case11,
        lambda p1, p2, p3: p1 * (p2 * (1 - p3) + (1 - p2) * p3),
    ),
    (3, 4): _A + (lambda p1, p2, p3: (1 - p1) * p2 + p1,),
    (4, 1): _NONE + (_zero,),
    (4, 2): _A + (lambda p1, p2, p3: (1 - p1) * p2 + p1,),
    (4, 3): (
        lambda p1, p2, p3: p1 * (1 - p1) * (p2 + (1 - p2) * p3) ** 2,
        lambda p1, p2, p3: p1**2 * p2 * (1 - p2) * (1 - p3) ** 2,
        lambda p1, p2, p3: p1**2 * (1 - p2) ** 2 * p3 * (1 - p3),
        _var13_case15,
        lambda p1, p2, p3: p1 * (p2 + (1 - p2) * p3),
    ),
    (4, 4): _B + (lambda p1, p2, p3: p1 * p2 * p3,),
}


def toy_wball_indices(p) -> dict[tuple[int, ...], float]:
    """Closed-form Wasserstein-ball indices for Bernoulli inputs, summed over the 16 cases."""
    pp = ToyModelParams.of(p).as_tuple()
    q = _level_probs(*pp)
    num = dict.fromkeys(TOY_SETS, 0.0)
    den = 0.0
    for (i, j), entries in TOY_WBALL_TABLE.items():
        w = q[i - 1] * q[j - 1]
        for u, f in zip(TOY_SETS, entries[:4]):
            num[u] += w * f(*pp)
        qd = entries[4](*pp)
        den += w * qd * (1 - qd)
    return {u: val / den for u, val in num.items()}


def gremaud_code(x1, x2, x3):
    """``2 x2 exp(-2 x1) + x3^2``; accepts scalars or arrays."""
    out = 2.0 * np.asarray(x2, dtype=float) * np.exp(-2.0 * np.asarray(x1, dtype=float)) + np.asarray(x3, dtype=float) ** 2
    return float(out) if out.ndim == 0 else out


def gremaud_rows(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return gremaud_code(X[..., 0], X[..., 1], X[..., 2])


def gremaud_inputs() -> IndependentInputs:
    return IndependentInputs.uniform(3)
