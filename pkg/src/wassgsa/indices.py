"""Test-function families ``T_a`` and the sensitivity indices they generate.

A family bundles an arity ``m``, a rule for drawing the parameter ``a`` and the
evaluation ``T_a(z)``. Every index in the package is the ratio

    int Var(E[T_a(Z) | X_u]) dQ(a) / int Var(T_a(Z)) dQ(a)

for some family. Estimators never evaluate ``T`` point by point: they call
:meth:`TestFunctionFamily.bind` once per design and query the resulting
:class:`Kernel` for whole blocks of values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .distributions import (
    EmpiricalDistribution,
    pairwise_wasserstein_power,
    quantile_index,
    stack_atoms,
    wasserstein_power,
)
from .errors import DomainError, UnsupportedFeatureError

OUTPUT_LAW = "output_law"
UNIFORM_UNIT = "uniform_unit"
CUSTOM = "custom"

SCALAR = "scalar"
DISTRIBUTION = "distribution"


class OutputSample:
    """A sequence of code outputs, either reals or empirical distributions.

    Distributions sharing one atom count are kept as a 2-d array of sorted
    atoms, which is what the vectorized kernels work on.
    """

    def __init__(self, points: Sequence[Any] | np.ndarray):
        if isinstance(points, OutputSample):
            self.kind, self.values, self.atoms, self.dists = points.kind, points.values, points.atoms, points.dists
            return
        if isinstance(points, np.ndarray) and points.dtype != object:
            self.kind = SCALAR
            self.values = np.asarray(points, dtype=float).ravel()
            self.atoms = None
            self.dists = None
            return
        points = list(points)
        if points and all(isinstance(p, EmpiricalDistribution) for p in points):
            self.kind = DISTRIBUTION
            self.dists = points
            self.atoms = stack_atoms(points)
            self.values = None
        elif all(not isinstance(p, EmpiricalDistribution) for p in points):
            self.kind = SCALAR
            self.values = np.asarray(points, dtype=float).ravel()
            self.atoms = None
            self.dists = None
        else:
            raise DomainError("an output sample cannot mix scalars and distributions")

    @classmethod
    def from_atoms(cls, atoms: np.ndarray) -> "OutputSample":
        """Wrap an ``(N, n)`` array whose rows are already sorted."""
        obj = cls.__new__(cls)
        obj.kind = DISTRIBUTION
        obj.atoms = np.asarray(atoms, dtype=float)
        obj.values = None
        obj.dists = None
        return obj

    def __len__(self) -> int:
        if self.kind == SCALAR:
            return self.values.size
        return self.atoms.shape[0] if self.atoms is not None else len(self.dists)

    def point(self, i: int):
        if self.kind == SCALAR:
            return float(self.values[i])
        if self.dists is not None:
            return self.dists[i]
        return EmpiricalDistribution._from_sorted(self.atoms[i])

    def distributions(self) -> list[EmpiricalDistribution]:
        if self.dists is None:
            self.dists = [EmpiricalDistribution._from_sorted(row) for row in self.atoms]
        return self.dists

    def take(self, idx) -> "OutputSample":
        idx = np.asarray(idx)
        if self.kind == SCALAR:
            return OutputSample(self.values[idx])
        if self.atoms is not None:
            return OutputSample.from_atoms(self.atoms[idx])
        return OutputSample([self.dists[i] for i in idx])

    def matrix_or_list(self):
        return self.atoms if self.atoms is not None else self.distributions()


def as_sample(points) -> OutputSample:
    return points if isinstance(points, OutputSample) else OutputSample(points)


class Kernel:
    """Family bound to concrete parameter pools and output samples.

    ``values(idx, s)`` returns the matrix ``T_{a(b)}(z_k)`` for parameter tuples
    ``a(b) = (pool_1[idx[0][b]], ..., pool_m[idx[m-1][b]])`` against every point
    of output sample ``s``. ``at(idx, out, s)`` evaluates only the diagonal pairs
    ``(a(b), z_{out[b]})``.
    """

    m: int = 0

    def __init__(self, pools: Sequence[Any], outputs: Sequence[OutputSample]):
        self.pools = list(pools)
        self.outputs = list(outputs)
        self.sizes = tuple(len(p) for p in self.pools)

    def values(self, idx: tuple[np.ndarray, ...], s: int) -> np.ndarray:
        raise NotImplementedError

    def at(self, idx: tuple[np.ndarray, ...], out: np.ndarray, s: int) -> np.ndarray:
        out = np.asarray(out)
        res = np.empty(out.size)
        for b in range(out.size):
            row = tuple(np.asarray([i[b]]) for i in idx)
            res[b] = self.values(row, s)[0, out[b]]
        return res

    def threshold_groups(self) -> Iterator[tuple[dict[int, np.ndarray], np.ndarray]] | None:
        """Indicator families ``T = 1{score <= cutoff}`` may expose their scores here.

        Yields ``(scores, cutoffs)`` where ``scores[s]`` holds one score per
        point of output ``s`` and ``cutoffs`` one cutoff per parameter tuple of
        the group; the groups together cover every tuple exactly once.
        Returns ``None`` when the family has no such structure.
        """
        return None


@dataclass(frozen=True)
class TestFunctionFamily:
    """Parameterized test functions ``T_a`` together with the law of ``a``.

    Attributes
    ----------
    name : str
        Short identifier used in reports.
    m : int
        Number of parameters in a tuple ``a``.
    param_source : str
        ``OUTPUT_LAW`` (parameters are outputs of the code), ``UNIFORM_UNIT``
        (levels drawn uniformly on (0, 1)) or ``CUSTOM``.
    output_kind : str
        ``SCALAR`` or ``DISTRIBUTION``.
    """

    __test__ = False  # not a pytest class despite the name

    name: str
    m: int
    param_source: str
    output_kind: str
    evaluator: Callable[[tuple, Any], float] = field(compare=False)
    binder: Callable[[Sequence[Any], Sequence[OutputSample]], Kernel] = field(compare=False)
    sampler: Callable[[np.random.Generator, int], Any] | None = field(default=None, compare=False)
    options: tuple = ()

    def evaluate(self, params: Sequence[Any], z) -> float:
        params = tuple(params)
        if len(params) != self.m:
            raise DomainError(f"family {self.name!r} takes {self.m} parameters, got {len(params)}")
        return float(self.evaluator(params, z))

    def sample_params(self, rng: np.random.Generator, size: int):
        """Draw one parameter pool of length ``size`` for sources other than the output law."""
        if self.param_source == UNIFORM_UNIT:
            # Generator.random is in [0, 1); 0 is excluded to stay inside (0, 1)
            v = rng.random(size)
            while np.any(v == 0.0):
                v[v == 0.0] = rng.random(int(np.sum(v == 0.0)))
            return v
        if self.param_source == CUSTOM:
            return self.sampler(rng, size)
        raise UnsupportedFeatureError("parameters of an output-law family come from the code outputs")

    def bind(self, pools: Sequence[Any], outputs: Sequence[Any]) -> Kernel:
        if len(pools) != self.m:
            raise DomainError(f"family {self.name!r} needs {self.m} parameter pools, got {len(pools)}")
        outs = [as_sample(o) for o in outputs]
        if self.output_kind == SCALAR and any(o.kind != SCALAR for o in outs):
            raise DomainError(f"family {self.name!r} works on scalar outputs")
        if self.output_kind == DISTRIBUTION and any(o.kind != DISTRIBUTION for o in outs):
            raise DomainError(f"family {self.name!r} works on distribution-valued outputs")
        if self.param_source == OUTPUT_LAW:
            pools = [as_sample(p) for p in pools]
        return self.binder(list(pools), outs)

    @classmethod
    def custom(
        cls,
        name: str,
        m: int,
        evaluate: Callable[[tuple, Any], float],
        param_source: str = CUSTOM,
        output_kind: str = SCALAR,
        sampler: Callable[[np.random.Generator, int], Any] | None = None,
    ) -> "TestFunctionFamily":
        """Family from a plain pointwise evaluator; slow but fully general."""
        if param_source == CUSTOM and sampler is None and m > 0:
            raise DomainError("a custom parameter source needs a sampler")

        def binder(pools, outputs):
            return _PointwiseKernel(pools, outputs, evaluate, param_source)

        return cls(name, m, param_source, output_kind, evaluate, binder, sampler)


# --- pointwise fallback -------------------------------------------------------


class _PointwiseKernel(Kernel):
    def __init__(self, pools, outputs, evaluate, param_source):
        super().__init__(pools, outputs)
        self.evaluate = evaluate
        self.m = len(pools)
        self._param_source = param_source

    def _param(self, l: int, i: int):
        pool = self.pools[l]
        return pool.point(i) if isinstance(pool, OutputSample) else pool[i]

    def values(self, idx, s):
        out = self.outputs[s]
        B = len(idx[0]) if idx else 1
        res = np.empty((B, len(out)))
        points = [out.point(k) for k in range(len(out))]
        for b in range(B):
            params = tuple(self._param(l, idx[l][b]) for l in range(self.m))
            res[b] = [self.evaluate(params, z) for z in points]
        return res

    def at(self, idx, out, s):
        sample = self.outputs[s]
        out = np.asarray(out)
        return np.array([
            self.evaluate(tuple(self._param(l, idx[l][b]) for l in range(self.m)), sample.point(out[b]))
            for b in range(out.size)
        ])


# --- Sobol --------------------------------------------------------------------


class _IdentityKernel(Kernel):
    m = 0

    def values(self, idx, s):
        return self.outputs[s].values[None, :]

    def at(self, idx, out, s):
        return self.outputs[s].values[np.asarray(out)]


def family_sobol() -> TestFunctionFamily:
    """Identity test function; the index is the classical Sobol index."""
    return TestFunctionFamily(
        "sobol", 0, OUTPUT_LAW, SCALAR,
        evaluator=lambda params, z: float(z),
        binder=lambda pools, outputs: _IdentityKernel(pools, outputs),
    )


# --- Cramér-von-Mises -----------------------------------------------------------


class _HalfLineKernel(Kernel):
    m = 1

    def values(self, idx, s):
        a = self.pools[0].values[idx[0]]
        return (self.outputs[s].values[None, :] <= a[:, None]).astype(float)

    def at(self, idx, out, s):
        a = self.pools[0].values[idx[0]]
        return (self.outputs[s].values[np.asarray(out)] <= a).astype(float)

    def threshold_groups(self):
        scores = {s: o.values for s, o in enumerate(self.outputs)}
        return iter([(scores, self.pools[0].values)])


def family_cvm() -> TestFunctionFamily:
    """Half-line indicators ``1{z <= a}`` with ``a`` drawn from the output law."""
    return TestFunctionFamily(
        "cvm", 1, OUTPUT_LAW, SCALAR,
        evaluator=lambda params, z: float(z <= params[0]),
        binder=lambda pools, outputs: _HalfLineKernel(pools, outputs),
    )


# --- Wasserstein balls ---------------------------------------------------------


class _BallKernel(Kernel):
    m = 2

    def __init__(self, pools, outputs, q, rtol):
        super().__init__(pools, outputs)
        self.q = q
        self.rtol = rtol
        cache: dict[tuple[int, int], np.ndarray] = {}

        def dist(a: OutputSample, b: OutputSample) -> np.ndarray:
            key = (id(a), id(b))
            if key not in cache:
                cache[key] = pairwise_wasserstein_power(a.matrix_or_list(), b.matrix_or_list(), q)
            return cache[key]

        self.radius = dist(pools[0], pools[1]) * (1.0 + rtol)
        self.centre_dist = [dist(pools[0], o) for o in outputs]

    def values(self, idx, s):
        i1, i2 = idx
        return (self.centre_dist[s][i1] <= self.radius[i1, i2][:, None]).astype(float)

    def at(self, idx, out, s):
        i1, i2 = idx
        return (self.centre_dist[s][i1, np.asarray(out)] <= self.radius[i1, i2]).astype(float)

    def threshold_groups(self):
        for i1 in range(self.radius.shape[0]):
            yield {s: d[i1] for s, d in enumerate(self.centre_dist)}, self.radius[i1]


def _ball_indicator(params, z, q, rtol):
    f1, f2 = params
    return float(wasserstein_power(f1, z, q) <= wasserstein_power(f1, f2, q) * (1.0 + rtol))


def family_wasserstein_ball(q: float = 2.0, rtol: float = 1e-9) -> TestFunctionFamily:
    """Ball indicators ``1{W_q(F1, F) <= W_q(F1, F2)}`` with ``(F1, F2)`` from the output law.

    ``rtol`` widens the radius by a relative amount so that ties which hold in
    exact arithmetic survive rounding in the distance computation.
    """
    if not q >= 1:
        raise DomainError(f"Wasserstein order must be >= 1, got {q}")
    q = float(q)
    return TestFunctionFamily(
        "wball", 2, OUTPUT_LAW, DISTRIBUTION,
        evaluator=lambda params, z: _ball_indicator(params, z, q, rtol),
        binder=lambda pools, outputs: _BallKernel(pools, outputs, q, rtol),
        options=(("q", q), ("rtol", rtol)),
    )


# --- quantile evaluation -------------------------------------------------------


class _QuantileKernel(Kernel):
    m = 1

    def __init__(self, pools, outputs):
        super().__init__(pools, outputs)
        self.levels = np.asarray(pools[0], dtype=float)

    def values(self, idx, s):
        v = self.levels[idx[0]]
        out = self.outputs[s]
        if out.atoms is not None:
            return out.atoms[:, quantile_index(v, out.atoms.shape[1])].T
        return np.column_stack([d.atoms[quantile_index(v, d.n)] for d in out.dists])

    def at(self, idx, out, s):
        v = self.levels[idx[0]]
        sample = self.outputs[s]
        out = np.asarray(out)
        if sample.atoms is not None:
            return sample.atoms[out, quantile_index(v, sample.atoms.shape[1])]
        return np.array([sample.dists[k].atoms[quantile_index(vb, sample.dists[k].n)] for k, vb in zip(out, v)])


def family_quantile_eval() -> TestFunctionFamily:
    """``T_v(F) = F^-(v)`` with ``v`` uniform on (0, 1); yields the Fréchet-mean index."""

    def evaluator(params, z):
        return float(z.atoms[quantile_index(params[0], z.n)])

    return TestFunctionFamily(
        "quantile", 1, UNIFORM_UNIT, DISTRIBUTION,
        evaluator=evaluator,
        binder=lambda pools, outputs: _QuantileKernel(pools, outputs),
    )


FAMILIES = {
    "sobol": family_sobol,
    "cvm": family_cvm,
    "wball": family_wasserstein_ball,
    "quantile": family_quantile_eval,
}


def family_by_name(name: str, **kwargs) -> TestFunctionFamily:
    try:
        return FAMILIES[name](**kwargs)
    except KeyError:
        raise UnsupportedFeatureError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None


@dataclass
class IndexEstimate:
    """One estimated index together with the pieces of the ratio."""

    value: float
    numerator: float
    denominator: float
    method: str
    N: int
    m: int
    meta: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value
