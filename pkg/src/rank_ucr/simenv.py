"""Synthetic ranking environments: true item parameters, contexts and outcomes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .glm import GlmFamily, Kind, augmented_features
from .rewards import AggregationSpec


@dataclass(frozen=True)
class Context:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))

    @property
    def d(self) -> int:
        return self.x.shape[0]

    def features(self, K: int) -> np.ndarray:
        """(K, d+1) array of augmented features, one row per display position."""
        return augmented_features(self.x, K)


@dataclass(frozen=True)
class Slate:
    """Items shown at positions 0..K-1, in display order."""

    items: tuple[int, ...]
    N: int

    def __post_init__(self):
        items = tuple(int(i) for i in self.items)
        object.__setattr__(self, "items", items)
        if len(set(items)) != len(items):
            raise ValueError(f"slate has repeated items: {items}")
        if any(not 0 <= i < self.N for i in items):
            raise ValueError(f"slate items {items} outside [0, {self.N})")
        if len(items) > self.N or not items:
            raise ValueError("slate must hold between 1 and N items")

    @property
    def K(self) -> int:
        return len(self.items)


def sample_unit_ball(rng: np.random.Generator, d: int, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the closed unit ball in R^d."""
    shape = (d,) if size is None else (size, d)
    g = rng.standard_normal(shape)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = rng.uniform(size=None if size is None else (size, 1)) ** (1.0 / d)
    return g * r


@dataclass(frozen=True)
class Environment:
    """Ground truth for one simulated run.

    Item j responds at rescaled position ``pos`` and context feature ``xs``
    with mean A'(beta_j . xs - alpha_j * pos), so ``true_theta[j]`` is
    ``(-alpha_j, beta_j)`` in the learner's parameterisation.
    """

    N: int
    K: int
    d: int
    alpha: np.ndarray
    beta: np.ndarray
    family: GlmFamily = field(default_factory=GlmFamily.logistic)
    spec: AggregationSpec = field(default_factory=AggregationSpec.click_through)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).reshape(self.N))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(self.N, self.d))
        self.spec.check_items(self.N)

    @property
    def true_theta(self) -> np.ndarray:
        return np.column_stack([-self.alpha, self.beta])

    def true_means(self, ctx: Context) -> np.ndarray:
        """(N, K) matrix of true per-item means at every position."""
        Z = ctx.features(self.K)
        return self.family.link_mean(self.true_theta @ Z.T)

    def to_dict(self) -> dict:
        return {
            "n": self.N,
            "k": self.K,
            "d": self.d,
            "family": self.family.to_dict(),
            "spec": self.spec.to_dict(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Environment":
        return cls(
            N=d["n"], K=d["k"], d=d["d"],
            alpha=d["alpha"], beta=d["beta"],
            family=GlmFamily.from_dict(d["family"]),
            spec=AggregationSpec.from_dict(d["spec"]),
            seed=d["seed"],
        )

    @classmethod
    def from_json(cls, s: str) -> "Environment":
        return cls.from_dict(json.loads(s))


def generate_environment(seed: int, N: int, K: int, d: int,
                         family: GlmFamily | None = None,
                         spec: AggregationSpec | None = None) -> Environment:
    if not (N >= K >= 1 and d >= 1):
        raise ValueError(f"need N >= K >= 1 and d >= 1, got N={N}, K={K}, d={d}")
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, size=N)
    beta = sample_unit_ball(rng, d, size=N)
    return Environment(
        N, K, d, alpha, beta,
        family=family or GlmFamily.logistic(),
        spec=spec or AggregationSpec.click_through(),
        seed=seed,
    )


def generate_context(rng: np.random.Generator, d: int) -> Context:
    return Context(sample_unit_ball(rng, d))


def sample_outcomes(env: Environment, ctx: Context, slate: Slate, rng: np.random.Generator) -> np.ndarray:
    """Observed outcome for each displayed position, in slate order."""
    if slate.N != env.N or slate.K != env.K:
        raise ValueError("slate does not fit the environment")
    items = np.asarray(slate.items)
    Z = ctx.features(env.K)
    mu = env.family.link_mean(np.einsum("kp,kp->k", env.true_theta[items], Z))
    if env.family.kind is Kind.LOGISTIC:
        y = (rng.uniform(size=env.K) < mu).astype(float)
        return y * env.spec.outcome_scale(items)
    noisy = mu + env.family.noise * rng.standard_normal(env.K)
    return np.clip(noisy, 0.0, env.family.bound)
