"""Sensitivity to the choice of input distributions.

Each input ``X_i`` follows a law ``mu_theta`` from a parametric family, with
``theta`` itself random. Drawing the ``theta`` and then ``n`` inputs from the
resulting laws turns the model into a stochastic code whose inputs are the
parameters, so the whole machinery of :mod:`wassgsa.stochastic` applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedFeatureError
from .estimators import RANK
from .indices import IndexEstimate, TestFunctionFamily, family_wasserstein_ball
from .models import gremaud_rows
from .stochastic import StochasticCode, check_u, normalize_method, stochastic_gsa


@dataclass(frozen=True)
class ParametricFamily:
    """Laws ``mu_theta`` with a prior on ``theta``.

    ``prior(rng, N)`` returns an ``(N, theta_dim)`` array, ``realize(theta, n, rng)``
    returns ``(len(theta), n)`` draws, and ``sort_key(theta)`` maps each row to
    the real number used to order parameters in the rank estimator.
    """

    name: str
    theta_dim: int
    prior: Callable[[np.random.Generator, int], np.ndarray] = field(compare=False)
    realize: Callable[[np.ndarray, int, np.random.Generator], np.ndarray] = field(compare=False)
    sort_key: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)


def uniform_interval_family(a_low: float, a_high: float, b_low: float, b_high: float,
                            sort_key: Callable[[np.ndarray], np.ndarray] | None = None) -> ParametricFamily:
    """``U[A, B]`` with ``A ~ U[a_low, a_high]`` and ``B ~ U[b_low, b_high]``.

    The default rank ordering uses ``A + B``.
    """
    if not (a_low <= a_high <= b_low <= b_high) or a_low == b_high:
        raise DomainError(
            f"need a_low <= a_high <= b_low <= b_high with a non-empty interval, got "
            f"({a_low}, {a_high}, {b_low}, {b_high})"
        )

    def prior(rng, N):
        A = a_low + (a_high - a_low) * rng.random(N)
        B = b_low + (b_high - b_low) * rng.random(N)
        return np.column_stack([A, B])

    def realize(theta, n, rng):
        A, B = theta[:, :1], theta[:, 1:2]
        return A + (B - A) * rng.random((theta.shape[0], n))

    return ParametricFamily(
        f"uniform[{a_low},{a_high}]x[{b_low},{b_high}]", 2, prior, realize,
        sort_key or (lambda theta: theta[:, 0] + theta[:, 1]),
    )


def point_mass_family(theta: Sequence[float],
                      realize: Callable[[np.ndarray, int, np.random.Generator], np.ndarray],
                      sort_key: Callable[[np.ndarray], np.ndarray] | None = None) -> ParametricFamily:
    """Family whose prior puts all mass on ``theta``."""
    theta = np.asarray(theta, dtype=float).ravel()

    def prior(rng, N):
        return np.tile(theta, (N, 1))

    return ParametricFamily("fixed", theta.size, prior, realize, sort_key)


class ParameterPrior:
    """Joint prior on the parameters of all families; behaves like an input sampler.

    Columns are the concatenated parameter vectors; index sets refer to
    families (1-based), each family being one input group.
    """

    def __init__(self, families: Sequence[ParametricFamily]):
        self.families = list(families)
        if not self.families:
            raise DomainError("at least one family is needed")
        widths = [f.theta_dim for f in self.families]
        self.offsets = np.concatenate([[0], np.cumsum(widths)]).astype(int)

    @property
    def dim(self) -> int:
        return len(self.families)

    @property
    def width(self) -> int:
        return int(self.offsets[-1])

    def block(self, theta: np.ndarray, i: int) -> np.ndarray:
        return theta[:, self.offsets[i]:self.offsets[i + 1]]

    def sample(self, rng: np.random.Generator, N: int) -> np.ndarray:
        return np.hstack([np.asarray(f.prior(rng, N), dtype=float).reshape(N, f.theta_dim) for f in self.families])

    def pick_freeze(self, theta: np.ndarray, u: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        u = check_u(u, self.dim)
        out = np.array(theta, dtype=float, copy=True)
        N = theta.shape[0]
        for i, f in enumerate(self.families):
            if i + 1 not in u:
                out[:, self.offsets[i]:self.offsets[i + 1]] = np.asarray(f.prior(rng, N)).reshape(N, f.theta_dim)
        return out

    def rank_input(self, theta: np.ndarray, i: int) -> np.ndarray:
        f = self.families[i - 1]
        block = self.block(theta, i - 1)
        if f.sort_key is None:
            if f.theta_dim != 1:
                raise UnsupportedFeatureError(f"family {f.name!r} needs a sort_key for the rank estimator")
            return block[:, 0]
        key = np.asarray(f.sort_key(block), dtype=float)
        if key.ndim != 1 or key.size != theta.shape[0]:
            raise UnsupportedFeatureError("sort_key must return one real number per parameter draw")
        return key


@dataclass
class SecondLevelProblem:
    """Families of input laws, a deterministic model acting on rows of inputs, and sizes."""

    families: Sequence[ParametricFamily]
    inner_code: Callable[[np.ndarray], np.ndarray]
    N: int
    n: int

    def __post_init__(self):
        self.families = list(self.families)
        if self.N < 2 or self.n < 1:
            raise DomainError("need N >= 2 and n >= 1")

    @property
    def prior(self) -> ParameterPrior:
        return ParameterPrior(self.families)

    def stochastic_code(self) -> StochasticCode:
        """The induced simulator: input is the parameter row, hidden variables are the inputs."""
        prior = self.prior
        fams = self.families
        inner = self.inner_code

        def batch(theta, n, rng):
            # one family after another, each filling all rows at once
            X = np.stack([np.asarray(f.realize(prior.block(theta, i), n, rng), dtype=float)
                          for i, f in enumerate(fams)], axis=-1)
            return inner(X)

        return StochasticCode(None, prior.width, batch=batch, reentrant=True, name="second-level")


def second_level_gsa(prob: SecondLevelProblem, u: Sequence[int], fam: TestFunctionFamily | None = None,
                     method: str = "pf", seed: int = 0, budget=None) -> IndexEstimate:
    """Index of the output law with respect to the laws of the inputs in ``u`` (1-based).

    Pick-Freeze keeps the parameters of the families in ``u``, redraws the
    others and always redraws the inputs themselves. The rank method orders
    the parameter draws of the single family in ``u`` by its ``sort_key``.
    """
    fam = fam or family_wasserstein_ball()
    method = normalize_method(method)
    if method == RANK and len(set(u)) != 1:
        raise UnsupportedFeatureError("the rank estimator only handles a single family")
    est = stochastic_gsa(prob.stochastic_code(), prob.prior, u, fam, prob.N, prob.n,
                         method=method, seed=seed, budget=budget)
    est.meta["second_level"] = True
    return est


PRIORS = {
    "tight": [(0.0, 0.1, 0.9, 1.0)] * 3,
    "wide": [(0.0, 0.45, 0.55, 1.0)] * 3,
    "mixed": [(0.0, 0.1, 0.9, 1.0), (0.0, 0.1, 0.9, 1.0), (0.0, 0.1, 0.5, 1.0)],
}

GREMAUD_SETS = ((1,), (2,), (3,), (1, 2), (1, 3), (2, 3))


def gremaud_problem(prior: str | Sequence[tuple[float, float, float, float]] = "tight",
                    N: int = 500, n: int = 500) -> SecondLevelProblem:
    """Gremaud model with uniform inputs on random intervals.

    ``prior`` names one of :data:`PRIORS` or gives the three
    ``(a_low, a_high, b_low, b_high)`` tuples directly.
    """
    if isinstance(prior, str):
        try:
            bounds = PRIORS[prior]
        except KeyError:
            raise UnsupportedFeatureError(f"unknown prior {prior!r}; choose from {sorted(PRIORS)}") from None
    else:
        bounds = list(prior)
    return SecondLevelProblem([uniform_interval_family(*b) for b in bounds], gremaud_rows, N, n)
