"""Ranking policies: UCR, greedy G-MLE, uniform random and a true-model oracle.

All policies share :class:`PolicyState`, which keeps one design covariance
and one interaction log per item. The first ``T0`` rounds are always uniform
random slates; afterwards each policy builds an (N, K) weight matrix and
hands it to :func:`rank_ucr.matching.solve`.
"""
from __future__ import annotations

import numpy as np

from . import matching
from .glm import GlmFamily, InteractionLog, Kind, TheoryConstants, batch_widths, fit_mle, fit_mle_batch, theoretical_xi
from .rewards import AggregationSpec, optimal_slate
from .simenv import Context, Environment, Slate


class SingularCovarianceError(np.linalg.LinAlgError):
    def __init__(self, item: int):
        super().__init__(f"covariance of item {item} is singular; initialization too short to cover it")
        self.item = item


class PolicyState:
    """Per-run learner state.

    ``V[j]`` is ``cov_ridge * I`` plus the outer products of every feature
    logged for item j. Logged outcomes are divided by the item's outcome
    scale (its price under the revenue spec) so the GLM is always fitted on
    the success indicator.
    """

    def __init__(self, N: int, K: int, d: int,
                 family: GlmFamily | None = None,
                 spec: AggregationSpec | None = None,
                 T0: int = 0,
                 cov_ridge: float = 0.0,
                 mle_ridge: float = 1e-8,
                 capacity: int = 64):
        if not (N >= K >= 1 and d >= 1):
            raise ValueError(f"need N >= K >= 1 and d >= 1, got N={N}, K={K}, d={d}")
        self.N, self.K, self.d = N, K, d
        self.family = family or GlmFamily.logistic()
        self.spec = spec or AggregationSpec.click_through()
        self.spec.check_items(N)
        self.T0 = T0
        self.cov_ridge = cov_ridge
        self.mle_ridge = mle_ridge
        p = d + 1
        self.V = np.repeat(cov_ridge * np.eye(p)[None], N, axis=0)
        self._Z = np.zeros((N, capacity, p))
        self._y = np.zeros((N, capacity))
        self.counts = np.zeros(N, dtype=int)
        self._theta = np.zeros((N, p))
        self._dirty = np.zeros(N, dtype=bool)
        self.t = 0
        if self.family.kind is Kind.LOGISTIC:
            self.R0 = float(np.max(self.spec.outcome_scale(np.arange(N))))
        else:
            self.R0 = self.family.bound

    @property
    def phase(self) -> str:
        return "init" if self.t < self.T0 else "confident"

    def log(self, j: int) -> InteractionLog:
        n = self.counts[j]
        return InteractionLog(self._Z[j, :n].copy(), self._y[j, :n].copy())

    def theta_hat(self) -> np.ndarray:
        """(N, d+1) MLEs, refitting only items whose log changed (warm-started)."""
        dirty = np.flatnonzero(self._dirty)
        if dirty.size == 0:
            return self._theta
        if self.mle_ridge > 0:
            n = int(self.counts[dirty].max())
            self._theta[dirty] = fit_mle_batch(
                self.family, self._Z[dirty, :n], self._y[dirty, :n], self.mle_ridge, self._theta[dirty]
            )
        else:
            for j in dirty:
                self._theta[j] = fit_mle(self.family, self.log(j), ridge=0.0, theta0=self._theta[j]).vector
        self._dirty[dirty] = False
        return self._theta

    def _grow(self):
        cap = self._Z.shape[1] * 2
        Z = np.zeros((self.N, cap, self._Z.shape[2]))
        y = np.zeros((self.N, cap))
        Z[:, : self._Z.shape[1]] = self._Z
        y[:, : self._y.shape[1]] = self._y
        self._Z, self._y = Z, y


def update(state: PolicyState, ctx: Context, slate: Slate, fb) -> PolicyState:
    """Log one round of feedback (outcome per displayed position)."""
    fb = np.asarray(fb, dtype=float)
    if slate.K != state.K or fb.shape != (state.K,):
        raise ValueError("slate and feedback must both have length K")
    if np.any(fb < 0) or np.any(fb > state.R0) or np.any(np.isnan(fb)):
        raise ValueError(f"outcomes must lie in [0, {state.R0}], got {fb}")
    Z = ctx.features(state.K)
    y = fb / state.spec.outcome_scale(slate.items)
    for k, j in enumerate(slate.items):
        if state.counts[j] == state._Z.shape[1]:
            state._grow()
        n = state.counts[j]
        state._Z[j, n] = Z[k]
        state._y[j, n] = y[k]
        state.counts[j] = n + 1
        state.V[j] += np.outer(Z[k], Z[k])
        state._dirty[j] = True
    state.t += 1
    return state


def _select(state: PolicyState, w: np.ndarray) -> Slate:
    return Slate(matching.solve(w).item_at, state.N)


def mle_means(state: PolicyState, ctx: Context, xi: float = 0.0) -> np.ndarray:
    """(N, K) plug-in means, shifted by ``xi`` confidence widths inside the link."""
    if xi < 0:
        raise ValueError("xi must be >= 0")
    Z = ctx.features(state.K)
    u = state.theta_hat() @ Z.T
    if xi > 0:
        try:
            u = u + xi * batch_widths(state.V, Z)
        except np.linalg.LinAlgError as e:
            raise SingularCovarianceError(getattr(e, "item", -1)) from None
    return state.family.link_mean(u)


def ucr_weights(state: PolicyState, ctx: Context, xi: float) -> np.ndarray:
    return state.spec.weights(mle_means(state, ctx, xi))


def ucr_select(state: PolicyState, ctx: Context, xi: float) -> Slate:
    return _select(state, ucr_weights(state, ctx, xi))


def gmle_select(state: PolicyState, ctx: Context) -> Slate:
    return _select(state, ucr_weights(state, ctx, 0.0))


def random_select(rng: np.random.Generator, N: int, K: int) -> Slate:
    """Uniform ordered K-subset of range(N)."""
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    return Slate(rng.permutation(N)[:K], N)


# --------------------------------------------------------------------------
# Policy objects driven by the harness


class Policy:
    label = "policy"
    xi_label = ""

    def reset(self, env: Environment) -> None:
        pass

    def choose(self, state: PolicyState, ctx: Context, rng: np.random.Generator) -> Slate:
        raise NotImplementedError

    def select(self, state: PolicyState, ctx: Context, rng: np.random.Generator) -> Slate:
        if state.phase == "init":
            return random_select(rng, state.N, state.K)
        return self.choose(state, ctx, rng)

    def __repr__(self):
        return f"{type(self).__name__}({self.xi_label})"


class UCR(Policy):
    """Upper confidence ranking with a constant ``xi`` or the theory schedule."""

    label = "ucr"

    def __init__(self, xi: float | str = 1.0, constants: TheoryConstants | None = None):
        if xi == "theory":
            self.constants = constants or TheoryConstants()
        elif not float(xi) >= 0:
            raise ValueError("xi must be >= 0")
        else:
            xi = float(xi)
        self.xi = xi
        self.xi_label = "theory" if xi == "theory" else repr(xi)

    def xi_at(self, state: PolicyState) -> float:
        if self.xi == "theory":
            return theoretical_xi(self.constants, state.d, max(state.t, 1))
        return self.xi

    def choose(self, state, ctx, rng):
        return ucr_select(state, ctx, self.xi_at(state))


class GMLE(Policy):
    label = "gmle"

    def choose(self, state, ctx, rng):
        return gmle_select(state, ctx)


class RandomPolicy(Policy):
    label = "random"

    def choose(self, state, ctx, rng):
        return random_select(rng, state.N, state.K)


class Oracle(Policy):
    """Plays the true optimal slate every round, including the init phase."""

    label = "oracle"

    def reset(self, env):
        self.env = env

    def select(self, state, ctx, rng):
        return optimal_slate(self.env, self.env.spec, ctx)[0]
