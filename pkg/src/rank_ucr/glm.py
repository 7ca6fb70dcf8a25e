"""GLM machinery: link functions, Newton MLE, confidence widths and theory constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

PROB_EPS = 1e-12
CTX_RADIUS = math.sqrt(3.0) / 2.0


class Kind(str, Enum):
    LOGISTIC = "logistic"
    LINEAR = "linear"


@dataclass(frozen=True)
class GlmFamily:
    """Exponential-family mean model.

    For the linear family ``noise`` is the Gaussian noise scale used by the
    simulator and ``bound`` the upper end of the outcome range.
    """

    kind: Kind = Kind.LOGISTIC
    noise: float = 0.1
    bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.LINEAR and not (self.noise > 0 and self.bound > 0):
            raise ValueError("linear family needs noise > 0 and bound > 0")

    @classmethod
    def logistic(cls) -> "GlmFamily":
        return cls(Kind.LOGISTIC)

    @classmethod
    def linear(cls, noise: float = 0.1, bound: float = 1.0) -> "GlmFamily":
        return cls(Kind.LINEAR, noise, bound)

    def link_mean(self, u):
        """A'(u)."""
        if self.kind is Kind.LOGISTIC:
            return expit(u)
        return u

    def link_var(self, u):
        """A''(u)."""
        if self.kind is Kind.LOGISTIC:
            p = expit(u)
            return p * (1.0 - p)
        return np.ones_like(np.asarray(u, dtype=float))

    def cumulant(self, u):
        """A(u)."""
        if self.kind is Kind.LOGISTIC:
            return np.logaddexp(0.0, u)
        return 0.5 * np.square(u)

    def to_dict(self) -> dict:
        if self.kind is Kind.LOGISTIC:
            return {"kind": "logistic"}
        return {"kind": "linear", "noise": self.noise, "bound": self.bound}

    @classmethod
    def from_dict(cls, d: dict) -> "GlmFamily":
        d = dict(d)
        kind = Kind(d.pop("kind"))
        if kind is Kind.LOGISTIC:
            if d:
                raise ValueError(f"unexpected keys for logistic family: {sorted(d)}")
            return cls.logistic()
        unknown = set(d) - {"noise", "bound"}
        if unknown:
            raise ValueError(f"unexpected keys for linear family: {sorted(unknown)}")
        return cls.linear(**d)


@dataclass(frozen=True)
class ItemParams:
    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(([self.alpha], self.beta))

    @classmethod
    def from_vector(cls, theta) -> "ItemParams":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1:])

    @property
    def d(self) -> int:
        return self.beta.shape[0]


def rescale_position(k: int, K: int) -> float:
    """Map the 0-based display slot ``k`` to ``(k+1)/K - 1/2``."""
    if not 0 <= k < K:
        raise ValueError(f"position {k} outside [0, {K})")
    return (k + 1) / K - 0.5


def augmented_features(x, K: int) -> np.ndarray:
    """Rows z_k = (rescaled position k, sqrt(3)/2 * x) for k = 0..K-1.

    ``x`` is a raw context with norm <= 1; every row then has norm <= 1.
    """
    x = np.asarray(x, dtype=float)
    Z = np.empty((K, x.shape[0] + 1))
    Z[:, 0] = (np.arange(1, K + 1) / K) - 0.5
    Z[:, 1:] = CTX_RADIUS * x
    return Z


def _as_theta(theta) -> np.ndarray:
    if isinstance(theta, ItemParams):
        return theta.vector
    return np.asarray(theta, dtype=float)


def linear_predictor(theta, z) -> float:
    th, z = _as_theta(theta), np.asarray(z, dtype=float)
    if th.shape[-1] != z.shape[-1]:
        raise ValueError(f"dimension mismatch: theta has {th.shape[-1]}, z has {z.shape[-1]}")
    return z @ th


def mean(family: GlmFamily, theta, z):
    """A'(theta . z). Works for a single z or a stack of rows."""
    return family.link_mean(linear_predictor(theta, z))


def clamp_prob(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


# --------------------------------------------------------------------------
# Maximum likelihood


class DegenerateDesignError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, theta: np.ndarray, grad_norm: float):
        super().__init__(f"{msg} (|grad| = {grad_norm:.3e}, |theta| = {np.linalg.norm(theta):.3e})")
        self.theta = theta
        self.grad_norm = grad_norm


@dataclass
class InteractionLog:
    """Features and outcomes observed for one item, row-aligned."""

    Z: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    y: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.Z.size and self.Z.shape[0] != self.y.shape[0]:
            raise ValueError("Z and y have different lengths")

    @classmethod
    def from_pairs(cls, pairs) -> "InteractionLog":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def __len__(self):
        return self.y.shape[0]


def log_likelihood(family: GlmFamily, theta, Z, y, ridge: float = 0.0) -> float:
    u = Z @ theta
    return float(y @ u - np.sum(family.cumulant(u)) - 0.5 * ridge * theta @ theta)


def score(family: GlmFamily, theta, Z, y, ridge: float = 0.0) -> np.ndarray:
    """Gradient of :func:`log_likelihood` in theta."""
    return Z.T @ (y - family.link_mean(Z @ theta)) - ridge * theta


# a penalised fit whose Newton decrement stays below the floating-point
# resolution of the objective for this many iterations is at its maximum
STALL_ITERS = 2


def fit_mle(
    family: GlmFamily,
    log: InteractionLog,
    ridge: float = 0.0,
    theta0=None,
    tol: float = 1e-8,
    max_iter: int = 100,
    max_halvings: int = 30,
) -> ItemParams:
    """Newton-Raphson with step halving for the (ridge-penalised) GLM MLE.

    With ``ridge > 0`` the objective is strictly concave and the iteration
    ends when ``|grad| <= tol``, or when the Newton decrement g'H^{-1}g / 2
    (the predicted remaining gain) has stayed below the floating-point
    resolution of the objective for two iterations. Near-separable logs put
    the maximiser at |theta| in the thousands, where the gradient can stall
    just above ``tol`` with nothing left to gain.
    With ``ridge == 0`` the Newton step must vanish as well: on separable
    data the gradient decays geometrically while the iterates run off to
    infinity, and only the step size exposes that.
    """
    Z, y = log.Z, log.y
    if len(log) == 0:
        raise ValueError("empty interaction log")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    p = Z.shape[1]
    if ridge == 0.0 and np.linalg.matrix_rank(Z) < p:
        raise DegenerateDesignError("degenerate design: Z'Z is singular and ridge = 0")

    theta = np.zeros(p) if theta0 is None else np.array(_as_theta(theta0), dtype=float)
    u = Z @ theta
    ll = _penalised_ll(family, theta, u, y, ridge)
    g = Z.T @ (y - family.link_mean(u)) - ridge * theta
    stalled = 0
    for _ in range(max_iter):
        H = (Z.T * family.link_var(u)) @ Z
        if ridge:
            H.flat[:: p + 1] += ridge
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not math.isfinite(float(step @ step)):
            msg = "Hessian became singular; iterates diverging"
            raise ConvergenceError(msg, theta, float(np.linalg.norm(g)))
        gnorm = float(np.linalg.norm(g))
        if ridge > 0:
            stalled = stalled + 1 if 0.5 * float(g @ step) <= _resolution(family, y, u) else 0
            if gnorm <= tol or stalled >= STALL_ITERS:
                return ItemParams.from_vector(theta)
        elif gnorm <= tol and np.linalg.norm(step) <= 1e-6 * (1.0 + np.linalg.norm(theta)):
            return ItemParams.from_vector(theta)

        t = 1.0
        for _ in range(max_halvings + 1):
            cand = theta + t * step
            u_c = Z @ cand
            ll_c = _penalised_ll(family, cand, u_c, y, ridge)
            if ll_c >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        theta, u, ll = cand, u_c, ll_c
        g = Z.T @ (y - family.link_mean(u)) - ridge * theta

    gnorm = float(np.linalg.norm(g))
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations", theta, gnorm)


def fit_mle_batch(
    family: GlmFamily,
    Z: np.ndarray,
    y: np.ndarray,
    ridge: float,
    theta0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 100,
    max_halvings: int = 30,
) -> np.ndarray:
    """:func:`fit_mle` for a stack of B independent problems at once.

    ``Z`` is (B, n, p) and ``y`` is (B, n); all-zero rows are padding and
    contribute nothing. Requires ``ridge > 0`` so every Hessian is definite.
    Each problem follows the same Newton path as the single version.
    """
    if not ridge > 0:
        raise ValueError("batched fitting needs ridge > 0")
    B, _, p = Z.shape
    theta = np.array(theta0, dtype=float)
    pad = ~np.any(Z != 0.0, axis=2)
    u = _bmv(Z, theta)

    def ll_of(rows, th, uu):
        c = np.where(pad[rows], 0.0, family.cumulant(uu))
        return np.einsum("bn,bn->b", y[rows], uu) - c.sum(axis=1) - 0.5 * ridge * np.einsum("bp,bp->b", th, th)

    ll = ll_of(slice(None), theta, u)
    active = np.ones(B, dtype=bool)
    stalled = np.zeros(B, dtype=int)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        Za, ua = Z[idx], u[idx]
        ZaT = Za.transpose(0, 2, 1)
        g = _bmv(ZaT, y[idx] - family.link_mean(ua)) - ridge * theta[idx]
        H = (ZaT * family.link_var(ua)[:, None, :]) @ Za
        H[:, np.arange(p), np.arange(p)] += ridge
        step = np.linalg.solve(H, g[..., None])[..., 0]
        gnorm = np.linalg.norm(g, axis=1)
        res = np.finfo(float).eps * (
            np.abs(y[idx] * ua).sum(axis=1) + np.where(pad[idx], 0.0, family.cumulant(ua)).sum(axis=1)
        )
        flat = 0.5 * np.einsum("bp,bp->b", g, step) <= res
        stalled[idx] = np.where(flat, stalled[idx] + 1, 0)
        done = (gnorm <= tol) | (stalled[idx] >= STALL_ITERS)
        active[idx[done]] = False
        keep = ~done
        idx, step = idx[keep], step[keep]
        if idx.size == 0:
            return theta
        t = np.ones(idx.size)
        cand = theta[idx] + step
        u_c = _bmv(Z[idx], cand)
        ll_c = ll_of(idx, cand, u_c)
        for _ in range(max_halvings):
            bad = ll_c < ll[idx] - 1e-12 * np.abs(ll[idx])
            if not bad.any():
                break
            t[bad] *= 0.5
            cand[bad] = theta[idx[bad]] + t[bad, None] * step[bad]
            u_c[bad] = _bmv(Z[idx[bad]], cand[bad])
            ll_c[bad] = ll_of(idx[bad], cand[bad], u_c[bad])
        theta[idx], u[idx], ll[idx] = cand, u_c, ll_c
    j = int(np.flatnonzero(active)[0])
    g = Z[j].T @ (y[j] - family.link_mean(u[j])) - ridge * theta[j]
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations for problem {j}", theta[j], float(np.linalg.norm(g)))


def _bmv(A, x):
    """Batched matrix-vector product."""
    return (A @ x[..., None])[..., 0]


def _resolution(family, y, u) -> float:
    """Rough floating-point resolution of the log-likelihood at ``u``."""
    return float(np.finfo(float).eps * (np.abs(y * u).sum() + family.cumulant(u).sum()))


def _penalised_ll(family, theta, u, y, ridge):
    return float(y @ u - np.sum(family.cumulant(u)) - 0.5 * ridge * (theta @ theta))


# --------------------------------------------------------------------------
# Confidence widths


# squared Cholesky pivots at or below this (relative to max(1, largest diagonal))
# mean the matrix is singular for our purposes
SINGULAR_TOL = 1e-9


def _is_singular(L: np.ndarray, V: np.ndarray) -> np.ndarray:
    piv = np.diagonal(L, axis1=-2, axis2=-1) ** 2
    scale = np.maximum(1.0, np.max(np.diagonal(V, axis1=-2, axis2=-1), axis=-1))
    return np.min(piv, axis=-1) <= SINGULAR_TOL * scale


def cholesky_jitter(V: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with 1e-10 added to the diagonal.

    Raises ``LinAlgError`` if both attempts fail or the factor shows the
    matrix to be numerically singular.
    """
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        try:
            L = np.linalg.cholesky(V + 1e-10 * np.eye(V.shape[-1]))
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError("covariance matrix is singular") from None
    if _is_singular(L, V):
        raise np.linalg.LinAlgError("covariance matrix is singular")
    return L


def mahalanobis_width(V, z) -> float:
    """sqrt(z' V^{-1} z) through a Cholesky solve."""
    V = np.asarray(V, dtype=float)
    z = np.asarray(z, dtype=float)
    L = cholesky_jitter(V)
    w = np.linalg.solve(L, z)
    return float(math.sqrt(w @ w))


def batch_widths(Vs: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Widths for every (item, row) pair: ``out[j, k] = |Z[k]|_{Vs[j]^{-1}}``.

    Raises ``LinAlgError`` carrying the index of the first singular item.
    """
    try:
        L = np.linalg.cholesky(Vs)
        bad = np.flatnonzero(_is_singular(L, Vs))
    except np.linalg.LinAlgError:
        L, bad = None, np.empty(0, dtype=int)
    if L is None or bad.size:
        L = np.empty_like(Vs)
        for j, V in enumerate(Vs):
            try:
                L[j] = cholesky_jitter(V)
            except np.linalg.LinAlgError:
                err = np.linalg.LinAlgError(f"covariance of item {j} is singular")
                err.item = j
                raise err from None
    W = np.linalg.solve(L, np.broadcast_to(Z.T, (Vs.shape[0],) + Z.T.shape))
    return np.sqrt(np.einsum("jpk,jpk->jk", W, W))


class Side(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


def confidence_mean(family: GlmFamily, theta, V, z, xi: float, side: Side = Side.UPPER) -> float:
    if xi < 0:
        raise ValueError("xi must be >= 0")
    u = float(linear_predictor(theta, z))
    if xi == 0.0:
        return float(family.link_mean(u))
    w = xi * mahalanobis_width(V, z)
    return float(family.link_mean(u + w if Side(side) is Side.UPPER else u - w))


# --------------------------------------------------------------------------
# Theory constants


@dataclass(frozen=True)
class TheoryConstants:
    sigma_bar: float = 0.5
    kappa: float = 0.1
    M1: float = 0.25
    M2: float = 0.1  # documented only
    c_x: float = 0.08
    delta: float = 0.1
    R0: float = 1.0

    def __post_init__(self):
        for name in ("sigma_bar", "kappa", "M1", "M2", "c_x", "delta", "R0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.delta < 1:
            raise ValueError("delta must be < 1")


def logistic_kappa(radius: float) -> float:
    """Smallest logistic curvature A'' on |u| <= radius."""
    p = float(expit(radius))
    return p * (1.0 - p)


def theoretical_xi(c: TheoryConstants, d: int, T: int) -> float:
    if T < 1 or d < 1:
        raise ValueError("need T >= 1 and d >= 1")
    inner = (d + 1) * math.log(1.0 + 2.0 * T / d) + math.log(2.0 / c.delta)
    return math.sqrt(3.0) * c.sigma_bar / c.kappa * math.sqrt(inner)


def curvature_floor(c: TheoryConstants, N: int, K: int) -> float:
    if K == N:
        return min(1.0 / 12.0 + 1.0 / (6.0 * K * K), c.c_x)
    return min(1.0 / (2.0 * K), c.c_x)


def t0_terms(c: TheoryConstants, d: int, T: int, N: int, K: int) -> tuple[float, float]:
    """The two lower bounds whose max is the required initialization length."""
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    if T < 1 or d < 1:
        raise ValueError("need T >= 1 and d >= 1")
    c1 = curvature_floor(c, N, K)
    growth = (d + 1) * math.log(1.0 + 2.0 * T / d)
    scale = 6.0 * c.sigma_bar**2 / (c1 * c.kappa**2)
    if K == N:
        first = (32.0 / (3.0 * c1) + 256.0 / c1**2) * math.log((4.0 * d + 4.0) / c.delta)
        second = scale * (growth + math.log(2.0 / c.delta))
    else:
        first = (16.0 / (3.0 * c1) + 32.0 * (K + N) ** 2 / (N**2 * c1)) * math.log(2.0 * (d + 1) / c.delta)
        second = scale * (growth + math.log(1.0 / c.delta))
    return first, second


def t0_lower_bound(c: TheoryConstants, d: int, T: int, N: int, K: int) -> float:
    return max(t0_terms(c, d, T, N, K))
