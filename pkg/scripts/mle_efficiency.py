"""Compare the logistic MLE's error with the Fisher-information prediction.

For the d=7 design (ball contexts scaled by sqrt(3)/2, uniform rescaled
positions) the error norm of an efficient estimator concentrates near
sqrt(trace(I^-1)). This prints both, for several sample sizes, over 20 seeds.

    python scripts/mle_efficiency.py --sizes 20000 40000
"""
import argparse
import math

import numpy as np

from rank_ucr.glm import GlmFamily, InteractionLog, fit_mle
from rank_ucr.simenv import generate_environment, sample_unit_ball


def one(seed: int, n: int, d: int = 7, K: int = 5):
    rng = np.random.default_rng(seed)
    theta = generate_environment(seed, K, K, d).true_theta[0]
    pos = np.arange(1, K + 1) / K - 0.5
    Z = np.column_stack([pos[rng.integers(0, K, size=n)], math.sqrt(3) / 2 * sample_unit_ball(rng, d, size=n)])
    p = 1 / (1 + np.exp(-Z @ theta))
    y = (rng.uniform(size=n) < p).astype(float)
    est = fit_mle(GlmFamily.logistic(), InteractionLog(Z, y), ridge=0.0).vector
    info = (Z.T * (p * (1 - p))) @ Z
    return np.linalg.norm(est - theta), math.sqrt(np.trace(np.linalg.inv(info)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[5_000, 20_000, 40_000, 80_000])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    print(f"{'n':>7} {'median |err|':>13} {'median rms bound':>17}")
    for n in args.sizes:
        errs, bounds = zip(*(one(s, n) for s in range(args.seeds)))
        print(f"{n:7d} {np.median(errs):13.4f} {np.median(bounds):17.4f}")


if __name__ == "__main__":
    main()
