"""Compare the three scoring strategies on the same two-logit head.

The softmax of (z_true, z_false) and their raw difference induce the same
ranking (the softmax is a strictly increasing transform of the difference),
but only the difference and the single-logit forms are usable as direct
training-time scores for a ranking loss.

Run:  python3 demos/02_scoring_strategies.py
"""

import numpy as np

from distilrank import LogitPair, ScoreStrategy, score

pairs = [
    LogitPair(1.0, -1.0),
    LogitPair(0.0, 0.0),
    LogitPair(3.2, 0.4),
    LogitPair(-0.5, 2.0),
    LogitPair(5.0, 4.5),
]

print(f"{'z_true':>8} {'z_false':>8} {'softmax':>10} {'single':>8} {'difference':>11}")
for p in pairs:
    print(
        f"{p.z_true:>8.2f} {p.z_false:>8.2f}"
        f" {score(p, ScoreStrategy.SOFTMAX_TRUE_FALSE):>10.6f}"
        f" {score(p, ScoreStrategy.SINGLE_LOGIT):>8.2f}"
        f" {score(p, ScoreStrategy.LOGIT_DIFFERENCE):>11.2f}"
    )

softmax = [score(p, ScoreStrategy.SOFTMAX_TRUE_FALSE) for p in pairs]
diff = [score(p, ScoreStrategy.LOGIT_DIFFERENCE) for p in pairs]
print("\nargsort by softmax:   ", [int(i) for i in np.argsort(softmax)[::-1]])
print("argsort by difference:", [int(i) for i in np.argsort(diff)[::-1]])
