"""scikit-learn style front end to the solver.

``fit`` solves the pricing problem for a market configuration; the fitted
estimator then maps user types to their optimal congestion (``predict``)
or to ``[congestion, price, surplus]`` rows (``transform``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidParameterError
from .numerics import DEFAULT_NUMERICS, NumericsConfig
from .primitives import (QualityModel, canonical_quality, derive_virtual_functions,
                         inverse_congestion_quality, linear_quality, make_power_distribution,
                         payg_transform)
from .schedule import indirect_utility, profit, recover_prices, user_surplus
from .solver import CapacityCost, expansion_cost, solve_fixed, solve_variable

__all__ = ["ServiceDifferentiation"]

QUALITY_MODELS = {
    "canonical": canonical_quality,
    "inverse": inverse_congestion_quality,
    "linear": linear_quality,
}


class ServiceDifferentiation(TransformerMixin, BaseEstimator):
    """Profit-maximising service menu for a power-law user population.

    Parameters
    ----------
    alpha : float
        Exponent of the type distribution ``F(theta) = theta**alpha``.
    capacity : float
        Network capacity for the fixed-capacity problem. Ignored when
        ``cost`` is given.
    cost : None, float or CapacityCost
        Capacity cost for the variable-capacity problem. A number ``t``
        selects the expansion family ``t * max(c - 0.1, 0)**2``.
    quality : {"canonical", "inverse", "linear"} or QualityModel
    payg : bool
        Pay-as-you-go pricing (unit capacity ``w`` replaced by ``w * v``).
    numerics : NumericsConfig, optional
    """

    def __init__(self, alpha=1.0, capacity=0.1, cost=None, quality="canonical",
                 payg=False, numerics=None):
        self.alpha = alpha
        self.capacity = capacity
        self.cost = cost
        self.quality = quality
        self.payg = payg
        self.numerics = numerics

    def _quality_model(self):
        if isinstance(self.quality, QualityModel):
            model = self.quality
        elif self.quality in QUALITY_MODELS:
            model = QUALITY_MODELS[self.quality]()
        else:
            raise InvalidParameterError(f"unknown quality model {self.quality!r}")
        return payg_transform(model) if self.payg else model

    def fit(self, X=None, y=None):
        """Solve the market; ``X`` and ``y`` are ignored."""
        numerics = self.numerics if self.numerics is not None else DEFAULT_NUMERICS
        if not isinstance(numerics, NumericsConfig):
            raise InvalidParameterError("numerics must be a NumericsConfig")
        dist = make_power_distribution(self.alpha)
        self.virtuals_ = derive_virtual_functions(dist, self._quality_model(), numerics)
        if self.cost is None:
            self.schedule_ = solve_fixed(self.virtuals_, self.capacity)
        else:
            cost = self.cost if isinstance(self.cost, CapacityCost) else expansion_cost(self.cost)
            self.schedule_ = solve_variable(self.virtuals_, cost)
        self.prices_ = recover_prices(self.schedule_)
        self.regime_ = self.schedule_.regime
        self.mu_ = self.schedule_.mu
        self.theta_hat_ = self.schedule_.theta_hat
        self.theta_bar_ = self.schedule_.theta_bar
        self.W_total_ = self.schedule_.W_total
        self.profit_ = profit(self.schedule_, self.prices_)
        return self

    def _types(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise InvalidParameterError("X must hold a single column of user types")
            X = X[:, 0]
        if np.any((X < 0) | (X > 1)):
            raise InvalidParameterError("user types must lie in [0, 1]")
        return X

    def predict(self, X):
        """Optimal congestion level of each type in ``X``."""
        check_is_fitted(self, "schedule_")
        return self.schedule_.choice(self._types(X))

    def transform(self, X):
        """Rows ``[q*, price paid, indirect utility]`` for each type."""
        check_is_fitted(self, "schedule_")
        theta = self._types(X)
        q = self.schedule_.choice(theta)
        V = np.atleast_1d(indirect_utility(self.schedule_, theta))
        v = self.virtuals_.quality.v
        p = np.where(q >= 1.0, 0.0, theta * v(q) - V)
        return np.column_stack([q, p, V])

    def score(self, X=None, y=None):
        """Optimal profit (net of capacity cost)."""
        check_is_fitted(self, "schedule_")
        return self.profit_

    def surplus(self):
        """Total user surplus of the fitted menu."""
        check_is_fitted(self, "schedule_")
        return user_surplus(self.schedule_, self.prices_)[0]
