# v1.0.0 - Work Package 6: Desk-Scale Reproduction Sweep
"""
generate -> fit (cpd and em) -> eval over the four synthetic families, one
sweep row per (family, method, sample size, trial).

    python reproduce.py --out-dir runs --samples 10000 30000 --trials 2
"""
import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from app import main as cli
from console import log, warn
from models import FAMILIES


def run_step(argv: List[str]) -> bool:
    code = cli(argv)
    if code != 0:
        warn("Reproduce", f"'{' '.join(argv[:1])}' exited with code {code}")
    return code == 0


def reproduce(out_dir: str, families, sample_sizes, trials: int, n_vars: int, rank: int,
              bins: int, restarts: int, seed: int) -> int:
    table = os.path.join(out_dir, "sweep.csv")
    failures = 0
    for family in families:
        for M in sample_sizes:
            for t in range(trials):
                tag = f"{family}_M{M}_t{t}"
                data = os.path.join(out_dir, f"{tag}.csv")
                truth = os.path.join(out_dir, f"{tag}.truth.json")
                run_seed = seed + 100 * t
                log("Reproduce", f"{family}: M={M}, trial {t + 1}/{trials}")
                ok = run_step(["generate", "--family", family, "--n-vars", str(n_vars),
                               "--rank", str(rank), "--samples", str(M), "--seed", str(run_seed),
                               "--out", data])
                if not ok:
                    failures += 1
                    continue
                for method in ("cpd", "em"):
                    model = os.path.join(out_dir, f"{tag}.{method}.json")
                    ok = run_step(["fit", "--data", data, "--out", model, "--method", method,
                                   "--bins", str(bins), "--rank", str(rank), "--restarts", str(restarts),
                                   "--seed", str(run_seed)])
                    ok = ok and run_step(["eval", "--truth", truth, "--model", model, "--data", data,
                                          "--seed", str(run_seed), "--out",
                                          os.path.join(out_dir, f"{tag}.{method}.eval.json"), "--table", table])
                    failures += 0 if ok else 1
    log("Reproduce", f"Sweep table at {table}; {failures} failed steps.")
    return 0 if failures == 0 else 1


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = argparse.ArgumentParser(description="Chain generate, fit and eval over the synthetic families.")
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--families", nargs="+", default=list(FAMILIES), choices=list(FAMILIES))
    parser.add_argument("--samples", type=int, nargs="+", default=[10000, 30000, 100000])
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--n-vars", type=int, default=10)
    parser.add_argument("--rank", type=int, default=5)
    parser.add_argument("--bins", type=int, default=10)
    parser.add_argument("--restarts", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    return reproduce(args.out_dir, args.families, args.samples, args.trials, args.n_vars, args.rank,
                     args.bins, args.restarts, args.seed)


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
