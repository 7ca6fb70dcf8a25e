"""Empirical coverage of the confidence band for a range of xi.

After ``rounds`` random slates, checks whether the true mean of every item
lies inside [Lower, Upper] on a 100-context x K grid, and reports the
fraction of replications where it does.

    python scripts/coverage.py --reps 200 --scales 1 0.1 0.03
"""
import argparse
import math

import numpy as np

from rank_ucr.glm import GlmFamily, TheoryConstants, batch_widths, logistic_kappa, theoretical_xi
from rank_ucr.policies import PolicyState, random_select, update
from rank_ucr.simenv import generate_context, generate_environment, sample_outcomes


def covered(rep: int, xis, N=7, K=5, d=7, rounds=200, grid=100):
    rng = np.random.default_rng([rep, 3])
    env = generate_environment(10_000 + rep, N, K, d)
    state = PolicyState(N, K, d, T0=0, cov_ridge=0.0)
    for _ in range(rounds):
        ctx = generate_context(rng, d)
        slate = random_select(rng, N, K)
        update(state, ctx, slate, sample_outcomes(env, ctx, slate, rng))
    theta = state.theta_hat()
    ok = np.ones(len(xis), dtype=bool)
    link = GlmFamily.logistic().link_mean
    for _ in range(grid):
        F = generate_context(rng, d).features(K)
        u, w = theta @ F.T, batch_widths(state.V, F)
        truth = link(env.true_theta @ F.T)
        for i, xi in enumerate(xis):
            ok[i] &= bool(np.all((link(u - xi * w) <= truth) & (truth <= link(u + xi * w))))
    return ok


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--rounds", type=int, default=200)
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.05, 0.03])
    args = ap.parse_args()
    c = TheoryConstants(sigma_bar=0.5, kappa=logistic_kappa(1 + math.sqrt(2)), delta=0.1)
    xi = theoretical_xi(c, 7, args.rounds)
    xis = [s * xi for s in args.scales]
    hits = sum(covered(r, xis, rounds=args.rounds) for r in range(args.reps))
    print(f"theoretical xi = {xi:.2f}")
    for s, x, h in zip(args.scales, xis, hits):
        print(f"  scale {s:5.2f}  xi = {x:7.3f}  coverage = {h}/{args.reps}")


if __name__ == "__main__":
    main()
