"""Multi-seed regret experiments and their CSV output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .glm import ConvergenceError, GlmFamily, TheoryConstants, t0_lower_bound, theoretical_xi
from .policies import GMLE, UCR, Oracle, Policy, PolicyState, RandomPolicy, SingularCovarianceError, update
from .rewards import AggregationSpec, expected_list_reward, optimal_slate
from .simenv import Context, Environment, generate_context, generate_environment, sample_outcomes

log = logging.getLogger(__name__)

RAW_HEADER = ["policy", "xi", "run", "t", "inst_regret", "cum_regret"]
AGG_HEADER = ["policy", "xi", "t", "mean_cum", "std_cum", "stderr_cum"]
THREADS_ENV = "RANK_UCR_THREADS"
MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Config


@dataclass
class ExperimentConfig:
    n: int
    k: int
    d: int
    t: int
    t0: int
    runs: int = 1
    base_seed: int = 0
    policies: list = field(default_factory=lambda: [{"kind": "ucr", "xi": 1.0}, {"kind": "gmle"}])
    family: dict = field(default_factory=lambda: {"kind": "logistic"})
    spec: dict = field(default_factory=lambda: {"kind": "click_through"})
    output: str = "results/experiment"
    cov_ridge: float = 1.0
    mle_ridge: float = 1e-8
    update_every: int = 1
    theory: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def check(self) -> None:
        """Raise ConfigError on any violated invariant."""
        for name in ("n", "k", "d", "t", "t0", "runs", "base_seed", "update_every"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not 0 <= self.t0 < self.t:
            raise ConfigError(f"need 0 <= t0 < t, got t0={self.t0}, t={self.t}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not 0 <= self.base_seed <= MASK64:
            raise ConfigError("base_seed must fit in 64 bits")
        if self.update_every < 1:
            raise ConfigError("update_every must be >= 1")
        if self.cov_ridge < 0 or self.mle_ridge < 0:
            raise ConfigError("ridges must be >= 0")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        try:
            self.make_policies()
            self.make_family()
            self.make_spec().check_items(self.n)
            self.make_theory()
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(str(e)) from None
        labels = [(p.label, p.xi_label) for p in self.make_policies()]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate policies: {labels}")

    def warnings(self) -> list[str]:
        out = []
        if self.t0 * self.k < 2 * self.n:
            out.append(f"t0*k = {self.t0 * self.k} < 2n = {2 * self.n}: some items may never be shown during initialization")
        if self.cov_ridge == 0 and self.t0 * self.k < self.n * (self.d + 1):
            out.append("cov_ridge = 0 and t0*k < n*(d+1): covariances are likely singular after initialization")
        return out

    def make_family(self) -> GlmFamily:
        return GlmFamily.from_dict(self.family)

    def make_spec(self) -> AggregationSpec:
        return AggregationSpec.from_dict(self.spec)

    def make_theory(self) -> TheoryConstants:
        return TheoryConstants(**self.theory)

    def make_policies(self) -> list[Policy]:
        out = []
        for p in self.policies:
            p = dict(p)
            kind = p.pop("kind")
            if kind == "ucr":
                xi = p.pop("xi")
                pol = UCR(xi, self.make_theory() if xi == "theory" else None)
            elif kind == "gmle":
                pol = GMLE()
            elif kind == "random":
                pol = RandomPolicy()
            elif kind == "oracle":
                pol = Oracle()
            else:
                raise ValueError(f"unknown policy kind {kind!r}")
            if p:
                raise ValueError(f"unexpected keys for policy {kind}: {sorted(p)}")
            out.append(pol)
        return out


# --------------------------------------------------------------------------
# Seeding


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run_seed(base_seed: int, run_index: int) -> int:
    """64-bit seed for one run: splitmix64 of the base advanced by run_index steps."""
    return splitmix64((base_seed + run_index * 0x9E3779B97F4A7C15) & MASK64)


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32, tag])


# --------------------------------------------------------------------------
# Runs


@dataclass
class RegretCurve:
    policy: str
    xi: str
    run: int
    inst: np.ndarray
    cum: np.ndarray

    @classmethod
    def from_inst(cls, policy, xi, run, inst) -> "RegretCurve":
        inst = np.asarray(inst, dtype=float)
        return cls(policy, xi, run, inst, np.cumsum(inst))


class World:
    """Everything shared by all policies for one run index: the environment,
    the context sequence and the per-round optimal value."""

    def __init__(self, config: ExperimentConfig, run_index: int):
        self.seed = run_seed(config.base_seed, run_index)
        self.env: Environment = generate_environment(
            self.seed & MASK64, config.n, config.k, config.d, config.make_family(), config.make_spec()
        )
        ctx_rng = stream(self.seed, 1)
        self.contexts: list[Context] = [generate_context(ctx_rng, config.d) for _ in range(config.t)]
        self.best = np.array([optimal_slate(self.env, self.env.spec, c)[1] for c in self.contexts])


def run_one(config: ExperimentConfig, policy: Policy, run_index: int, world: World | None = None) -> RegretCurve:
    world = world or World(config, run_index)
    env = world.env
    policy.reset(env)
    state = PolicyState(config.n, config.k, config.d, env.family, env.spec, T0=config.t0,
                        cov_ridge=config.cov_ridge, mle_ridge=config.mle_ridge, capacity=max(8, config.t))
    select_rng = stream(world.seed, 2)
    outcome_rng = stream(world.seed, 3)
    inst = np.empty(config.t)
    pending = []
    for t, ctx in enumerate(world.contexts):
        try:
            slate = policy.select(state, ctx, select_rng)
        except (SingularCovarianceError, ConvergenceError) as e:
            raise RunError(f"{policy.label}({policy.xi_label}) run {run_index} round {t + 1}: {e}") from e
        r = world.best[t] - expected_list_reward(env, env.spec, ctx, slate)
        if r < -1e-9:  # pragma: no cover - guarded by the matching tie tolerance
            raise RunError(f"negative regret {r} at round {t + 1}")
        inst[t] = max(r, 0.0)
        fb = sample_outcomes(env, ctx, slate, outcome_rng)
        pending.append((ctx, slate, fb))
        if t < config.t0 or len(pending) >= config.update_every:
            for item in pending:
                update(state, *item)
            pending.clear()
    return RegretCurve.from_inst(policy.label, policy.xi_label, run_index, inst)


def _run_index(args) -> list[RegretCurve]:
    config, run_index = args
    world = World(config, run_index)
    return [run_one(config, pol, run_index, world) for pol in config.make_policies()]


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> list[RegretCurve]:
    """Every (policy, run) curve; output does not depend on ``threads``."""
    threads = thread_count() if threads is None else threads
    tasks = [(config, i) for i in range(config.runs)]
    if threads <= 1 or config.runs == 1:
        batches = map(_run_index, tasks)
        return [c for batch in batches for c in batch]
    with ProcessPoolExecutor(max_workers=min(threads, config.runs)) as ex:
        return [c for batch in ex.map(_run_index, tasks) for c in batch]


# --------------------------------------------------------------------------
# Aggregation


@dataclass
class Aggregate:
    mean: np.ndarray
    std: np.ndarray
    stderr: np.ndarray
    n: int


def aggregate(curves: list[RegretCurve]) -> Aggregate:
    """Pointwise mean, sample std (ddof=1) and std error of cumulative regret.

    A single curve has undefined sample std; it is reported as 0.
    """
    if not curves:
        raise ValueError("no curves to aggregate")
    lengths = {len(c.cum) for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"curves have different lengths: {sorted(lengths)}")
    M = np.stack([c.cum for c in sorted(curves, key=lambda c: (c.policy, c.xi, c.run))])
    n = M.shape[0]
    mean = M.mean(axis=0)
    std = M.std(axis=0, ddof=1) if n > 1 else np.zeros(M.shape[1])
    return Aggregate(mean, std, std / math.sqrt(n), n)


def group(curves: list[RegretCurve]) -> dict[tuple[str, str], list[RegretCurve]]:
    out: dict[tuple[str, str], list[RegretCurve]] = {}
    for c in curves:
        out.setdefault((c.policy, c.xi), []).append(c)
    return out


def paired_gap(a: list[RegretCurve], b: list[RegretCurve], t: int | None = None) -> tuple[float, float]:
    """Mean and std error of cum_a - cum_b at round ``t`` (default: last), paired by run."""
    ra = {c.run: c for c in a}
    rb = {c.run: c for c in b}
    runs = sorted(set(ra) & set(rb))
    if not runs:
        raise ValueError("no common runs")
    idx = -1 if t is None else t - 1
    diff = np.array([ra[r].cum[idx] - rb[r].cum[idx] for r in runs])
    se = diff.std(ddof=1) / math.sqrt(len(diff)) if len(diff) > 1 else 0.0
    return float(diff.mean()), float(se)


# --------------------------------------------------------------------------
# CSV


def _xi_key(xi: str):
    try:
        return (0, float(xi), xi)
    except ValueError:
        return (1, math.inf, xi)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def render_csv(curves: list[RegretCurve]) -> tuple[str, str]:
    ordered = sorted(curves, key=lambda c: (c.policy, _xi_key(c.xi), c.run))
    raw = io.StringIO()
    w = csv.writer(raw, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for c in ordered:
        for t in range(len(c.inst)):
            w.writerow([c.policy, c.xi, c.run, t + 1, _fmt(c.inst[t]), _fmt(c.cum[t])])

    agg = io.StringIO()
    groups = group(ordered)
    if any(len(g) == 1 for g in groups.values()):
        agg.write("# std_cum undefined for a single run; reported as 0\n")
    w = csv.writer(agg, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for (policy, xi), cs in sorted(groups.items(), key=lambda kv: (kv[0][0], _xi_key(kv[0][1]))):
        a = aggregate(cs)
        for t in range(len(a.mean)):
            w.writerow([policy, xi, t + 1, _fmt(a.mean[t]), _fmt(a.std[t]), _fmt(a.stderr[t])])
    return raw.getvalue(), agg.getvalue()


def write_csv(curves: list[RegretCurve], path) -> tuple[Path, Path]:
    """Write ``<path>_raw.csv`` and ``<path>_agg.csv``; returns both paths."""
    base = str(path)
    raw_path, agg_path = Path(base + "_raw.csv"), Path(base + "_agg.csv")
    raw, agg = render_csv(curves)
    try:
        raw_path.parent.mkdir(parents=True, exist_ok=True)
        raw_path.write_text(raw)
        agg_path.write_text(agg)
    except OSError as e:
        raise OSError(f"cannot write results to {base}: {e}") from e
    return raw_path, agg_path


def read_raw_csv(path) -> list[RegretCurve]:
    rows: dict[tuple[str, str, int], list[tuple[int, float]]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["policy"], row["xi"], int(row["run"]))
            rows.setdefault(key, []).append((int(row["t"]), float(row["inst_regret"]), float(row["cum_regret"])))
    out = []
    for (policy, xi, run), vals in rows.items():
        vals.sort()
        out.append(RegretCurve(policy, xi, run, np.array([v[1] for v in vals]), np.array([v[2] for v in vals])))
    return out


# --------------------------------------------------------------------------
# Theory report


def theory_report(config: ExperimentConfig) -> dict:
    c = config.make_theory()
    return {
        "theoretical_xi": theoretical_xi(c, config.d, config.t),
        "t0_lower_bound": t0_lower_bound(c, config.d, config.t, config.n, config.k),
        "t0_configured": config.t0,
    }
