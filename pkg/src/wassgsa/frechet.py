"""Fréchet features of a random distribution function.

Under a contrast with the measure property the optimal coupling is the
quantile coupling, so a Fréchet feature is obtained node by node: at each
level ``v`` one minimizes the contrast over the sample of quantiles
``{F_j^-(v)}``. Results live on a :class:`QuantileGrid`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import ContrastFunction, EmpiricalDistribution, QuantileGrid, quantile_index, stack_atoms
from .errors import DomainError, InsufficientSampleError, UnsupportedFeatureError


@dataclass(frozen=True)
class DistributionEnsemble:
    """``N`` realizations of a random distribution function, read on a common grid."""

    members: tuple
    grid: QuantileGrid = field(default_factory=QuantileGrid.midpoint)

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 1:
            raise DomainError("an ensemble needs at least one member")
        if not all(isinstance(m, EmpiricalDistribution) for m in members):
            raise DomainError("ensemble members must be EmpiricalDistribution instances")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    def quantile_matrix(self) -> np.ndarray:
        """Array of shape ``(N, len(grid))`` holding ``F_j^-(v_k)``."""
        nodes = self.grid.nodes
        stacked = stack_atoms(self.members)
        if stacked is not None:
            return stacked[:, quantile_index(nodes, stacked.shape[1])]
        return np.vstack([m.atoms[quantile_index(nodes, m.n)] for m in self.members])


def frechet_feature(e: DistributionEnsemble, c: ContrastFunction) -> EmpiricalDistribution:
    """Fréchet mean (``power(2)``) or Fréchet alpha-quantile (``pinball(alpha)``) of ``e``.

    The result carries one atom per grid node.
    """
    return EmpiricalDistribution(frechet_quantiles(e, c))


def frechet_quantiles(e: DistributionEnsemble, c: ContrastFunction) -> np.ndarray:
    """Per-node minimizers, in grid order, before they are packed into a distribution."""
    Q = e.quantile_matrix()
    if c.kind == "power" and c.q == 2.0:
        values = Q.mean(axis=0)
    elif c.kind == "pinball":
        # lower empirical alpha-quantile, same convention as `quantile`
        k = quantile_index(c.alpha, e.size)
        values = np.sort(Q, axis=0)[int(k)]
    else:
        raise UnsupportedFeatureError(
            f"no pointwise minimizer available for contrast {c.kind!r}"
            + (f" with q={c.q}" if c.kind == "power" else "")
        )
    return values


def frechet_mean(e: DistributionEnsemble) -> EmpiricalDistribution:
    return frechet_feature(e, ContrastFunction.squared())


def frechet_median(e: DistributionEnsemble) -> EmpiricalDistribution:
    return frechet_feature(e, ContrastFunction.pinball(0.5))


def wasserstein_variance(e: DistributionEnsemble) -> float:
    """Mean squared ``W_2`` spread around the Fréchet mean, ``int Var(F^-(v)) dv``.

    Uses the biased ``1/N`` variance at each node.
    """
    if e.size < 2:
        raise InsufficientSampleError("the Wasserstein variance needs at least two members")
    Q = e.quantile_matrix()
    return float(np.dot(e.grid.weights, Q.var(axis=0)))


def ensemble(members: Sequence[EmpiricalDistribution], grid: QuantileGrid | None = None) -> DistributionEnsemble:
    return DistributionEnsemble(tuple(members), grid or QuantileGrid.midpoint())
