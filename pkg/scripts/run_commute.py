#!/usr/bin/env python3
"""Commutativity experiment: train networks to commute with the evolution
rule from two seeds, certify the non-uniqueness of exact commuters, and
measure how differently the two runs end up behaving."""

import argparse
from pathlib import Path

import numpy as np

from blockca.ca import Phase, random_grid, step
from blockca.cli import write_manifest
from blockca.learn import (
    TrainConfig,
    commute_experiment,
    exact_phase_step,
    verify_commuting_solutions,
)
from blockca.learn.rollout import apply_model_binary
from blockca.nn import save_network


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results/commute")
    parser.add_argument("--n", type=int, default=16)
    parser.add_argument("--count", type=int, default=4000)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seeds", type=int, nargs=2, default=(1001, 2002))
    parser.add_argument("--verify-trials", type=int, default=100)
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    evolution = exact_phase_step(Phase.ALIGNED)

    nets = {}
    for init_seed in args.seeds:
        config = TrainConfig(epochs=args.epochs, seed=init_seed + 7)
        history, net = commute_experiment(evolution, init_seed, config,
                                          n=args.n, count=args.count)
        nets[init_seed] = net
        (outdir / f"commute-{init_seed}.csv").write_text(history.to_csv())
        save_network(net, outdir / f"commute-{init_seed}.ckpt")
        write_manifest(outdir / f"commute-{init_seed}.manifest.txt", {
            "n": args.n, "count": args.count, "epochs": args.epochs,
            "init_seed": init_seed, "data_seed": init_seed + 7,
        })
        print(f"seed {init_seed}: final commute loss "
              f"{history.final.test_loss:.4g}")

    candidates = [
        ("identity", lambda g: g),
        ("evolution", lambda g: step(g, Phase.ALIGNED)),
        ("evolution-squared",
         lambda g: step(step(g, Phase.ALIGNED), Phase.ALIGNED)),
        ("trained-" + str(args.seeds[0]), nets[args.seeds[0]]),
        ("trained-" + str(args.seeds[1]), nets[args.seeds[1]]),
    ]
    cert = verify_commuting_solutions(candidates, args.verify_trials,
                                      seed=555, evolution=evolution, n=args.n)
    (outdir / "verification.txt").write_text(cert.summary())
    print(cert.summary(), end="")

    rng = np.random.default_rng(777)
    probes = np.stack([random_grid(args.n, 0.5, rng) for _ in range(100)])
    outs = [apply_model_binary(nets[s], probes) for s in args.seeds]
    disagreement = float((outs[0] != outs[1]).mean())
    print(f"different seeds disagree on {100 * disagreement:.2f}% "
          f"of output cells")


if __name__ == "__main__":
    main()
