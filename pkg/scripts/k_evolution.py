#!/usr/bin/env python3
"""Trace how the learned cluster count evolves over sweeps.

Runs the sampler on one planted corpus for several minimum-size settings and
writes a wide CSV (iteration, one K column per r) for plotting.
"""

import argparse
import csv
from pathlib import Path

from tripclust import dpmm
from tripclust.dpmm import Hyperparams
from tripclust.generator import make_planted_spec, sample_finite_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-docs", type=int, default=500)
    parser.add_argument("--k-true", type=int, default=5)
    parser.add_argument("--vocab", default="20,20,24")
    parser.add_argument("--mean-length", type=float, default=8.0)
    parser.add_argument("--r-values", default="5,20,60")
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--beta", type=float, default=0.01)
    parser.add_argument("--max-iter", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/k_evolution.csv")
    args = parser.parse_args()

    vocab = tuple(int(v) for v in args.vocab.split(","))
    spec = make_planted_spec(
        args.k_true, args.n_docs, vocab, mean_doc_length=args.mean_length, seed=args.seed
    )
    corpus, _ = sample_finite_corpus(spec)
    r_values = [int(v) for v in args.r_values.split(",")]
    traces = {}
    for r in r_values:
        params = Hyperparams(
            alpha=args.alpha, beta_o=args.beta, beta_d=args.beta, beta_t=args.beta,
            r=r, max_iter=args.max_iter, seed=args.seed,
        )
        result = dpmm.run(corpus, params)
        traces[r] = result.k_trace
        print(f"r={r}: final K={result.state.K}, trace tail {result.k_trace[-5:]}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + [f"K_r{r}" for r in r_values])
        for it in range(args.max_iter + 1):
            writer.writerow([it] + [traces[r][it] for r in r_values])
    print(f"# trace: {out}")


if __name__ == "__main__":
    main()
