"""Noise-power x rho sweep: P_MD and SCNR per cell for static CRAP and SCRAP.

Writes the per-frame CSV and prints the summary table, which shows the
missed-detection and SCNR trends versus noise level and smoothing factor.

    python3 scripts/sweep.py --seeds 0 1 2 3 --out sweep.csv
"""

import argparse
import sys
import time
from dataclasses import replace

from scrap.config import load_config
from scrap.experiments import CampaignConfig, run_campaign, summary_table, write_csv


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", help="campaign config (JSON); default: desk profile")
    p.add_argument("--full", action="store_true", help="full-size profile (slow)")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    p.add_argument("--noise-db", type=float, nargs="+")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="per-frame CSV path")
    args = p.parse_args(argv)

    if args.config:
        cfg = load_config(args.config)
    elif args.full:
        cfg = CampaignConfig.full_size()
    else:
        cfg = CampaignConfig()
    cfg = replace(cfg, seeds=args.seeds, noise_db=args.noise_db or cfg.noise_db)

    t0 = time.perf_counter()
    records, summary = run_campaign(cfg, workers=args.workers)
    print(summary_table(summary))
    print(f"{len(records)} records in {time.perf_counter() - t0:.0f} s", file=sys.stderr)
    if args.out:
        write_csv(args.out, records)


if __name__ == "__main__":
    main()
