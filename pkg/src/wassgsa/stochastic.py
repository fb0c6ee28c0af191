"""Stochastic simulators seen as distribution-valued codes.

A stochastic code returns one random draw per call. Repeating the call ``n``
times at a fixed input gives an empirical measure, which then plays the role
of the code output in the distribution-valued estimators.

Seeding
-------
Everything hangs off one integer master seed. Independent streams are split
from it with :class:`numpy.random.SeedSequence` spawn keys:

* ``(0,)`` input sampling (plain sample, then Pick-Freeze redraws),
* ``(1,)`` hidden draws of the plain branch,
* ``(2,)`` hidden draws of the Pick-Freeze branch,
* ``(3,)`` the estimator seed (rank tie breaking, parameter pools).

A batch-capable code receives one generator per branch. A scalar code gets
one 32-bit seed per draw taken from ``SeedSequence(seed, spawn_key=(branch, j))``.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import EmpiricalDistribution
from .errors import CalibrationInfeasibleError, DomainError, SimulatorError, UnsupportedFeatureError
from .estimators import (
    PICK_FREEZE,
    RANK,
    USTAT,
    PickFreezeDesign,
    RankDesign,
    pick_freeze_estimate,
    rank_estimate,
    ustat_estimate,
)
from .indices import IndexEstimate, OutputSample, TestFunctionFamily, as_sample

PLAIN_BRANCH = 1
PF_BRANCH = 2

WORKERS_ENV = "WASSGSA_WORKERS"
SEED_ENV = "WASSGSA_SEED"


class StochasticCode:
    """Wrapper around a simulator ``f_s(x, D)``.

    Parameters
    ----------
    evaluate : callable ``(x, seed) -> float``
        One draw at input ``x``; the hidden variable is driven by ``seed``.
    input_dim : int
    batch : callable ``(X, n, rng) -> array (len(X), n)``, optional
        Vectorized alternative drawing ``n`` values per row of ``X``.
    reentrant : bool
        Whether ``evaluate`` may be called from several threads at once.
    """

    def __init__(self, evaluate: Callable[[np.ndarray, int], float] | None, input_dim: int,
                 batch: Callable[[np.ndarray, int, np.random.Generator], np.ndarray] | None = None,
                 reentrant: bool = False, name: str = "code"):
        if evaluate is None and batch is None:
            raise DomainError("a stochastic code needs evaluate or batch")
        if input_dim < 1:
            raise DomainError("input_dim must be positive")
        self._evaluate = evaluate
        self._batch = batch
        self.input_dim = int(input_dim)
        self.reentrant = reentrant
        self.name = name
        self.calls = 0

    @property
    def has_batch(self) -> bool:
        return self._batch is not None

    def evaluate(self, x, seed: int) -> float:
        x = np.asarray(x, dtype=float)
        self.calls += 1
        if self._evaluate is None:
            out = self._batch(x[None, :], 1, np.random.default_rng(seed))
            return float(np.asarray(out).ravel()[0])
        try:
            return float(self._evaluate(x, seed))
        except SimulatorError:
            raise
        except Exception as exc:
            raise SimulatorError(f"simulator {self.name!r} failed: {exc}", {"x": x.tolist(), "seed": seed}) from exc

    def draw(self, X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.calls += X.shape[0] * n
        try:
            out = np.asarray(self._batch(X, n, rng), dtype=float)
        except Exception as exc:
            raise SimulatorError(f"simulator {self.name!r} failed: {exc}", {"rows": X.shape[0], "n": n}) from exc
        if out.shape != (X.shape[0], n):
            raise SimulatorError(f"batch returned shape {out.shape}, expected {(X.shape[0], n)}")
        return out


class ExternalProcessCode(StochasticCode):
    """Simulator run as an external command, one process per draw.

    The input values go to standard input as one space-separated line and the
    draw is read back from standard output. The draw seed is passed in the
    ``WASSGSA_SEED`` environment variable.
    """

    def __init__(self, command: str | Sequence[str], input_dim: int, timeout: float | None = 60.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        super().__init__(self._run, input_dim, reentrant=True, name=" ".join(self.command))

    def _run(self, x: np.ndarray, seed: int) -> float:
        line = " ".join(repr(float(v)) for v in x) + "\n"
        env = dict(os.environ, **{SEED_ENV: str(int(seed))})
        proc = subprocess.run(self.command, input=line, capture_output=True, text=True,
                              env=env, timeout=self.timeout)
        if proc.returncode != 0:
            raise SimulatorError(
                f"command exited with status {proc.returncode}: {proc.stderr.strip()[:200]}",
                {"x": x.tolist(), "seed": seed, "status": proc.returncode},
            )
        try:
            return float(proc.stdout.split()[0])
        except (IndexError, ValueError):
            raise SimulatorError(f"could not read a number from {proc.stdout[:80]!r}",
                                 {"x": x.tolist(), "seed": seed}) from None


def _draw_seeds(seed: int, n: int, key: tuple[int, ...] = ()) -> np.ndarray:
    return np.random.SeedSequence(seed, spawn_key=key).generate_state(n, dtype=np.uint32)


def empirical_output_measure(code: StochasticCode, x, n: int, seed: int) -> EmpiricalDistribution:
    """``(1/n) sum_k delta_{f_s(x, D_k)}`` with per-draw seeds split from ``seed``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    x = np.asarray(x, dtype=float)
    seeds = _draw_seeds(seed, n)
    return EmpiricalDistribution([code.evaluate(x, int(s)) for s in seeds])


class IndependentInputs:
    """Independent input coordinates, each given by a sampler ``(rng, size) -> array``."""

    def __init__(self, marginals: Sequence[Callable[[np.random.Generator, int], np.ndarray]]):
        self.marginals = list(marginals)
        if not self.marginals:
            raise DomainError("at least one input is needed")

    @property
    def dim(self) -> int:
        return len(self.marginals)

    def sample(self, rng: np.random.Generator, N: int) -> np.ndarray:
        return np.column_stack([np.asarray(f(rng, N), dtype=float) for f in self.marginals])

    @property
    def width(self) -> int:
        return len(self.marginals)

    def pick_freeze(self, X: np.ndarray, u: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        """Copy of ``X`` keeping the inputs in ``u`` and redrawing the others."""
        u = check_u(u, self.dim)
        Xu = np.array(X, dtype=float, copy=True)
        for i in range(self.dim):
            if i + 1 not in u:
                Xu[:, i] = self.marginals[i](rng, X.shape[0])
        return Xu

    def rank_input(self, X: np.ndarray, i: int) -> np.ndarray:
        return X[:, i - 1]

    @classmethod
    def uniform(cls, dim: int, low: float = 0.0, high: float = 1.0) -> "IndependentInputs":
        return cls([lambda rng, size: rng.uniform(low, high, size)] * dim)

    @classmethod
    def bernoulli(cls, probs: Sequence[float]) -> "IndependentInputs":
        return cls([(lambda p: lambda rng, size: (rng.random(size) < p).astype(float))(p) for p in probs])


def check_u(u: Sequence[int], dim: int) -> frozenset[int]:
    """Validate a 1-based index set."""
    u = frozenset(int(i) for i in u)
    if not u or any(i < 1 or i > dim for i in u):
        raise DomainError(f"index set {sorted(u)} must be a non-empty subset of 1..{dim}")
    return u


@dataclass
class StochasticDesignResult:
    """Empirical output measures of both branches of the design, stored as sorted atoms."""

    atoms: np.ndarray
    atoms_pf: np.ndarray | None
    X: np.ndarray
    X_pf: np.ndarray | None
    N: int
    n: int
    calls: int

    @property
    def measures(self) -> list[EmpiricalDistribution]:
        return OutputSample.from_atoms(self.atoms).distributions()

    @property
    def measures_pf(self) -> list[EmpiricalDistribution]:
        if self.atoms_pf is None:
            return []
        return OutputSample.from_atoms(self.atoms_pf).distributions()


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def output_atoms(code: StochasticCode, X: np.ndarray, n: int, seed: int, branch: int) -> np.ndarray:
    """Sorted ``(len(X), n)`` draws for every row of ``X`` on the given branch stream."""
    if code.has_batch:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(branch,)))
        return np.sort(code.draw(X, n, rng), axis=1)

    def row(j: int) -> np.ndarray:
        seeds = _draw_seeds(seed, n, (branch, j))
        return np.array([code.evaluate(X[j], int(s)) for s in seeds])

    workers = _workers() if code.reentrant else 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, range(X.shape[0])))
    else:
        rows = [row(j) for j in range(X.shape[0])]
    return np.sort(np.vstack(rows), axis=1)


def stochastic_design(code: StochasticCode, sampler: IndependentInputs, u: Sequence[int] | None,
                      N: int, n: int, seed: int) -> StochasticDesignResult:
    """Draw inputs and build the empirical measures; ``u=None`` skips the Pick-Freeze branch."""
    if N < 2 or n < 1:
        raise DomainError("need N >= 2 and n >= 1")
    if sampler.width != code.input_dim:
        raise DomainError(f"sampler produces {sampler.width} columns, code expects {code.input_dim}")
    start = code.calls
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    X = sampler.sample(rng, N)
    X_pf = sampler.pick_freeze(X, u, rng) if u is not None else None
    atoms = output_atoms(code, X, n, seed, PLAIN_BRANCH)
    atoms_pf = output_atoms(code, X_pf, n, seed, PF_BRANCH) if X_pf is not None else None
    return StochasticDesignResult(atoms, atoms_pf, X, X_pf, N, n, code.calls - start)


def estimator_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(3,)).generate_state(1)[0])


_METHODS = {"pf": PICK_FREEZE, "pickfreeze": PICK_FREEZE, "ustat": USTAT, "rank": RANK}


def normalize_method(method: str) -> str:
    try:
        return _METHODS[method.lower().replace("-", "").replace("_", "")]
    except KeyError:
        raise UnsupportedFeatureError(f"unknown method {method!r}; use pf, ustat or rank") from None


def estimate_from_outputs(method: str, fam: TestFunctionFamily, z: OutputSample, z_pf: OutputSample | None,
                          x: np.ndarray | None, seed: int, budget=None) -> IndexEstimate:
    """Dispatch to one of the three estimators."""
    method = normalize_method(method)
    if method == PICK_FREEZE:
        return pick_freeze_estimate(PickFreezeDesign(z, z_pf), fam, budget=budget, seed=seed)
    if method == USTAT:
        return ustat_estimate((z, z_pf), fam, budget=budget, seed=seed)
    return rank_estimate(RankDesign(x, z), fam, budget=budget, seed=seed)


def stochastic_gsa(code: StochasticCode, sampler: IndependentInputs, u: Sequence[int],
                   fam: TestFunctionFamily, N: int, n: int, method: str = "pf",
                   seed: int = 0, budget=None) -> IndexEstimate:
    """Index of a stochastic code with respect to the inputs in ``u`` (1-based).

    Pick-Freeze and U-statistics spend ``2 N n`` simulator calls, the rank
    method ``N n``.
    """
    method = normalize_method(method)
    u = sorted(check_u(u, sampler.dim))
    if method == RANK and len(u) != 1:
        raise UnsupportedFeatureError("the rank estimator only handles first-order indices")
    design = stochastic_design(code, sampler, None if method == RANK else u, N, n, seed)
    z = OutputSample.from_atoms(design.atoms)
    z_pf = OutputSample.from_atoms(design.atoms_pf) if design.atoms_pf is not None else None
    est = estimate_from_outputs(method, fam, z, z_pf, sampler.rank_input(design.X, u[0]), estimator_seed(seed), budget)
    est.meta.update(u=tuple(u), n=n, calls=design.calls, master_seed=seed)
    return est


# --- approximation size -------------------------------------------------------

UNIFORM_SUPPORT = "uniform_support"
LOG_CONCAVE = "log_concave"
GAUSSIAN_MIXTURE = "gaussian_mixture"
GENERIC = "generic"

DEFAULT_CONSTANTS = {UNIFORM_SUPPORT: 4.0 / math.log(2.0), LOG_CONCAVE: 1.0, GAUSSIAN_MIXTURE: 1.0}
DEFAULT_CEILING = 10**12


class CalibrationWarning(UserWarning):
    """The returned size comes from a fallback rule, not from a bound."""


def _tail_threshold(f: Callable[[int], float], target: float, start: int, peak: int) -> int:
    """Smallest ``n >= start`` with ``f(k) <= target`` for every ``k >= n``.

    ``f`` must be non-decreasing up to ``peak`` and non-increasing after it.
    """
    if f(peak) <= target:
        return start
    lo, hi = peak, peak + 1
    while f(hi) > target:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def calibrate_n(N: int, regime: str, *, b_minus_a: float = 1.0, sigma: float = 1.0,
                const: float | None = None, ceiling: int = DEFAULT_CEILING) -> int:
    """Approximation size ``n`` for an outer sample of size ``N``.

    With ``delta(N) = 1/N`` the regimes ask for

    * ``uniform_support``: ``C (b-a)^2 / (n+1) <= N^-3``, ``C = 4/ln 2``;
    * ``log_concave``: ``C sigma^2 log(n) / n <= N^-3``, ``C = 1``;
    * ``gaussian_mixture``: ``C loglog(n) / n <= N^-2`` over ``n >= 3``, ``C = 1``;
    * ``generic``: ``n = N^2`` (a :class:`CalibrationWarning` is issued).

    For the two non-monotone bounds the returned ``n`` is the point from which
    the bound stays below target.
    """
    if N < 2:
        raise DomainError("calibration needs N >= 2")
    if regime == GENERIC:
        warnings.warn("no bound available for this regime; using n = N^2", CalibrationWarning, stacklevel=2)
        n = N * N
    else:
        if regime not in DEFAULT_CONSTANTS:
            raise UnsupportedFeatureError(f"unknown regime {regime!r}")
        c = DEFAULT_CONSTANTS[regime] if const is None else float(const)
        if c <= 0:
            raise DomainError("the bound constant must be positive")
        if regime == UNIFORM_SUPPORT:
            if b_minus_a <= 0:
                raise DomainError("support length must be positive")
            n = max(1, math.ceil(c * b_minus_a**2 * N**3) - 1)
        elif regime == LOG_CONCAVE:
            if sigma <= 0:
                raise DomainError("sigma must be positive")
            n = _tail_threshold(lambda k: c * sigma**2 * math.log(k) / k, float(N) ** -3, 1, 3)
        else:
            n = _tail_threshold(lambda k: c * math.log(math.log(k)) / k, float(N) ** -2, 3, 6)
    if n > ceiling:
        raise CalibrationInfeasibleError(f"required n = {n} exceeds the ceiling {ceiling}", required_n=n)
    return int(n)


def direct_gsa(code: Callable[[np.ndarray], object], sampler, u: Sequence[int], fam: TestFunctionFamily,
               N: int, method: str = "pf", seed: int = 0, budget=None) -> IndexEstimate:
    """Same design as :func:`stochastic_gsa` for a deterministic code.

    ``code`` maps an ``(N, p)`` input array to the outputs: an array of reals
    or an :class:`~wassgsa.indices.OutputSample` of distributions.
    """
    method = normalize_method(method)
    u = sorted(check_u(u, sampler.dim))
    if method == RANK and len(u) != 1:
        raise UnsupportedFeatureError("the rank estimator only handles first-order indices")
    if N < 2:
        raise DomainError("need N >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    X = sampler.sample(rng, N)
    z = as_sample(code(X))
    z_pf = None
    if method != RANK:
        X_pf = sampler.pick_freeze(X, u, rng)
        z_pf = as_sample(code(X_pf))
    est = estimate_from_outputs(method, fam, z, z_pf, sampler.rank_input(X, u[0]), estimator_seed(seed), budget)
    est.meta.update(u=tuple(u), master_seed=seed)
    return est
