"""Evaluation statistics: win-rate identities, error reduction, agreement.

Everything here is a pure function over in-memory data, shown on synthetic
inputs: the split-credit win-rate identities, diagnostic error reduction,
Gwet's AC1 with its confidence interval, Fleiss' kappa, a majority-vote
ranking matrix, and a bootstrap interval.
"""

import random

from askalign.gateway import MockBackend
from askalign.mocks import positional_responder, ranking_responder
from askalign.reports import agreement_table
from askalign.stats import (RatingsMatrix, bootstrap_ci, error_reduction,
                            fleiss_kappa, gwet_ac1, majority_vote_rankings,
                            winrate)

contexts = [f"patient case {i}" for i in range(6)]
candidate = lambda ctx: f"Targeted follow-up for {ctx}? [better]"  # noqa: E731
baseline = lambda ctx: f"Generic follow-up for {ctx}?"             # noqa: E731

marker_judge = MockBackend(default=ranking_responder(
    lambda t: 0 if "[better]" in t else 1))
print(f"win-rate, judge prefers the candidate: "
      f"{winrate(contexts, candidate, baseline, marker_judge.complete).rate:.1f}%")

posbias_judge = MockBackend(default=positional_responder())
print(f"win-rate, position-biased judge (all splits): "
      f"{winrate(contexts, candidate, baseline, posbias_judge.complete).rate:.1f}%")

selfplay_judge = MockBackend(default=ranking_responder(lambda t: t))
print(f"win-rate of a model against itself: "
      f"{winrate(contexts, candidate, candidate, selfplay_judge.complete).rate:.1f}%")

print(f"\nerror reduction from accuracy 72.52% to 88.08%: "
      f"{error_reduction(72.52, 88.08):.2f}%")

# Agreement: a high-consensus panel vs a coin-flip panel.
rng = random.Random(0)
consensus_rows = [["a", "a", "a"]] * 66 + [["b", "b", "b"]] \
    + [["a", "a", "b"]] * 33
noisy_rows = [[rng.choice("ab") for _ in range(3)] for _ in range(100)]
rows = [("high consensus", consensus_rows), ("coin flips", noisy_rows)]
table = [(name, gwet_ac1(RatingsMatrix.from_rows(r, categories=("a", "b"))))
         for name, r in rows]
print()
print(agreement_table(table))
# Kappa collapses under skewed category prevalence (0.78 raw agreement,
# yet near-zero kappa); AC1's chance correction is robust to it.
print(f"fleiss kappa on the same high-consensus panel: "
      f"{fleiss_kappa(RatingsMatrix.from_rows(consensus_rows)).kappa:.3f}")

# Majority-vote pairwise matrix over full rankings from three raters.
candidates = ["base", "aligned", "human"]
rankings = []
for _ in range(20):
    item = []
    for _ in range(3):
        ranking = ["aligned", "human", "base"]
        if rng.random() < 0.2:            # occasional dissent
            rng.shuffle(ranking)
        item.append(ranking)
    rankings.append(item)
majority = majority_vote_rankings(rankings, baseline="base")
for cand, rate in sorted(majority.baseline_winrates.items()):
    print(f"majority-vote win-rate of {cand!r} over baseline: {rate:.0f}%")

scores = [rng.random() < 0.7 for _ in range(400)]
low, high = bootstrap_ci([float(s) for s in scores], seed=1)
print(f"\nbootstrap 95% interval for a 0.7-ish success rate: "
      f"[{low:.3f}, {high:.3f}]")
