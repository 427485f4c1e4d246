"""Size, power and band-coverage sweep over the simulation grid.

Writes one CSV row per (setting, jump type, distribution, a, n, statistic).
The full grid takes hours on one core; narrow it with the flags.

    python scripts/table_sweep.py --output sweep.csv --reps 500
"""

import argparse
import itertools
import sys
import time

from fdbreak.inference import PipelineConfig
from fdbreak.simgen import CSV_HEADER, JUMP_TYPES, SCHEMES, SCORE_DISTS, SimConfig, mc_study, summary_rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--settings", type=int, nargs="+", default=list(SCHEMES))
    ap.add_argument("--jumps", nargs="+", default=list(JUMP_TYPES))
    ap.add_argument("--dists", nargs="+", default=list(SCORE_DISTS))
    ap.add_argument("--a", type=float, nargs="+", default=[0.0, 0.25, 0.5, 1.0])
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200])
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--mc-draws", type=int, default=500)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--output", required=True)
    args = ap.parse_args(argv)

    pipe = PipelineConfig(mc_draws=args.mc_draws, seed=args.seed)
    with open(args.output, "w") as fh:
        fh.write(",".join(CSV_HEADER + ("reps",)) + "\n")
        for setting, jump, dist, a, n in itertools.product(args.settings, args.jumps, args.dists, args.a, args.n):
            if a == 0.0 and jump != args.jumps[0]:
                continue  # the null cell does not depend on the jump shape
            cfg = SimConfig(n=n, sampling_scheme=setting, jump_type=jump, a=a, score_dist=dist, seed=args.seed)
            start = time.time()
            summary = mc_study(cfg, args.reps, pipe, workers=args.workers)
            for row in summary_rows(cfg, summary):
                fh.write(",".join(str(v) for v in row + (args.reps,)) + "\n")
            fh.flush()
            print(f"setting {setting} type {jump} {dist} a={a} n={n}: {time.time() - start:.0f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
