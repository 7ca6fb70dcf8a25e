"""List-level reward H(sum_k g_k(mu_k)), optimal slates and regret."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from . import matching
from .glm import PROB_EPS

if TYPE_CHECKING:
    from .simenv import Context, Environment, Slate


class AggKind(str, Enum):
    ADDITIVE = "additive"
    REVENUE = "revenue"
    CLICK_THROUGH = "click_through"


@dataclass(frozen=True)
class AggregationSpec:
    kind: AggKind = AggKind.CLICK_THROUGH
    prices: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AggKind(self.kind))
        if self.kind is AggKind.REVENUE:
            if not self.prices or any(not p > 0 for p in self.prices):
                raise ValueError("revenue spec needs positive prices")
            object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        elif self.prices is not None:
            raise ValueError(f"{self.kind.value} spec takes no prices")

    @classmethod
    def additive(cls):
        return cls(AggKind.ADDITIVE)

    @classmethod
    def revenue(cls, prices):
        return cls(AggKind.REVENUE, tuple(prices))

    @classmethod
    def click_through(cls):
        return cls(AggKind.CLICK_THROUGH)

    def check_items(self, N: int) -> None:
        if self.kind is AggKind.REVENUE and len(self.prices) != N:
            raise ValueError(f"revenue spec has {len(self.prices)} prices for {N} items")

    def outcome_scale(self, items) -> np.ndarray:
        """Value of a success for each item (its price under Revenue, else 1)."""
        items = np.asarray(items, dtype=int)
        if self.kind is AggKind.REVENUE:
            return np.asarray(self.prices)[items]
        return np.ones(items.shape)

    def g(self, mu, items) -> np.ndarray:
        """Per-item transform g_k; raises outside its domain."""
        mu = np.asarray(mu, dtype=float)
        if self.kind is AggKind.CLICK_THROUGH:
            if np.any((mu < 0) | (mu >= 1)) or np.any(np.isnan(mu)):
                raise ValueError("click-through means must lie in [0, 1)")
            return -np.log1p(-mu)
        return mu * self.outcome_scale(items)

    def H(self, s: float) -> float:
        if self.kind is AggKind.CLICK_THROUGH:
            return float(-np.expm1(-s))
        return float(s)

    def weights(self, mu: np.ndarray) -> np.ndarray:
        """Matching weights g(mu) for an (N, K) matrix of means, clamped into g's domain."""
        mu = np.asarray(mu, dtype=float)
        if self.kind is AggKind.CLICK_THROUGH:
            return -np.log1p(-np.clip(mu, 0.0, 1.0 - PROB_EPS))
        if self.kind is AggKind.REVENUE:
            return mu * np.asarray(self.prices)[:, None]
        return mu

    def to_dict(self) -> dict:
        if self.kind is AggKind.REVENUE:
            return {"kind": "revenue", "prices": list(self.prices)}
        return {"kind": self.kind.value}

    @classmethod
    def from_dict(cls, d: dict) -> "AggregationSpec":
        d = dict(d)
        kind = AggKind(d.pop("kind"))
        prices = d.pop("prices", None)
        if d:
            raise ValueError(f"unexpected spec keys: {sorted(d)}")
        return cls(kind, tuple(prices) if prices is not None else None)


def aggregate(spec: AggregationSpec, mus, items) -> float:
    mus = np.asarray(mus, dtype=float)
    items = np.asarray(items, dtype=int)
    if mus.shape != items.shape:
        raise ValueError("mus and items must have the same length")
    return spec.H(float(np.sum(spec.g(mus, items))))


def _slate_means(env: "Environment", ctx: "Context", items) -> np.ndarray:
    mu = env.true_means(ctx)
    return mu[np.asarray(items), np.arange(len(items))]


def expected_list_reward(env: "Environment", spec: AggregationSpec, ctx: "Context", slate: "Slate") -> float:
    if slate.N != env.N or slate.K != env.K:
        raise ValueError("slate does not fit the environment")
    mus = _slate_means(env, ctx, slate.items)
    if spec.kind is AggKind.CLICK_THROUGH:
        mus = np.clip(mus, 0.0, 1.0 - PROB_EPS)
    return aggregate(spec, mus, slate.items)


def optimal_slate(env: "Environment", spec: AggregationSpec, ctx: "Context") -> tuple["Slate", float]:
    """Best slate for the true model; H is increasing so the weight-sum argmax is the reward argmax."""
    from .simenv import Slate

    w = spec.weights(env.true_means(ctx))
    best = matching.solve(w)
    slate = Slate(best.item_at, env.N)
    return slate, expected_list_reward(env, spec, ctx, slate)


def instant_regret(env: "Environment", spec: AggregationSpec, ctx: "Context", chosen: "Slate") -> float:
    _, best = optimal_slate(env, spec, ctx)
    return best - expected_list_reward(env, spec, ctx, chosen)
