"""Sample the feature count on a table with no observed cells.

With nothing observed, the posterior over Z reduces to the buffet prior, so
the post-burn-in average of K_plus should match alpha * sum_{i<=N} 1/i. A
mismatch here points at the row updates or the birth step, not at any
likelihood.
"""

import argparse

import numpy as np

from glfm.data import AttributeKind, AttributeSpec, DataMatrix
from glfm.engine import Hyperparams, run_chain


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=5)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--kmax", type=int, default=30)
    ap.add_argument("--iters", type=int, default=21000)
    ap.add_argument("--burn-in", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20)
    args = ap.parse_args()

    data = DataMatrix(
        cells=np.zeros((args.rows, 1)),
        missing=np.ones((args.rows, 1), dtype=bool),
        specs=[AttributeSpec("x", AttributeKind.REAL)],
    )
    hp = Hyperparams(
        alpha=args.alpha,
        K_max=args.kmax,
        K_init=1,
        bias=False,
        iterations=args.iters,
        burn_in=args.burn_in,
        seed=args.seed,
    )
    res = run_chain(data, hp)
    ks = np.array(
        [t["K_plus"] for t in res.trace if t["iteration"] > hp.burn_in], dtype=float
    )
    target = args.alpha * float(np.sum(1.0 / np.arange(1, args.rows + 1)))

    print(f"post-burn-in sweeps: {ks.size}")
    print(f"mean K_plus:         {ks.mean():.4f}")
    print(f"prior expectation:   {target:.4f}")
    print(f"difference:          {ks.mean() - target:+.4f}")
    hist = np.bincount(ks.astype(int))
    for k, c in enumerate(hist):
        print(f"  K_plus={k}: {c / ks.size:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
