"""Residual clutter power one frame before and one frame after each SCRAP update.

Optionally dumps the two periodograms around every update so they can be
plotted side by side.

    python3 scripts/before_after_update.py --rho 0.5 --noise-db -30 --dump-dir dumps/
"""

import argparse

import numpy as np

from scrap.experiments import CampaignConfig, run_cell


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--noise-db", type=float, default=-30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-dir", help="write periodograms around each update here")
    args = p.parse_args(argv)

    base = CampaignConfig(modes=("scrap",), rho_grid=(args.rho,), noise_db=(args.noise_db,))
    per = base.frames_per_update
    edges = [i for i in range(per - 1, base.total_frames - 1, per)]
    dumps = tuple(x for i in edges for x in (i, i + 1)) if args.dump_dir else ()
    cfg = CampaignConfig(
        modes=base.modes, rho_grid=base.rho_grid, noise_db=base.noise_db, dump_frames=dumps, dump_dir=args.dump_dir
    )
    recs = run_cell(cfg, args.noise_db, args.seed)

    print(f"{'epoch':>5} {'t [s]':>7} {'before [dB]':>12} {'after [dB]':>11} {'drop [dB]':>10} {'L':>3}")
    drops = []
    for epoch, i in enumerate(edges, start=1):
        before, after = recs[i].clutter_power, recs[i + 1].clutter_power
        drop = 10 * np.log10(before / after)
        drops.append(drop)
        print(
            f"{epoch:5d} {recs[i + 1].t:7.2f} {10 * np.log10(before):12.2f} "
            f"{10 * np.log10(after):11.2f} {drop:10.2f} {recs[i + 1].order:3d}"
        )
    print(f"residual lower after the update in {sum(d > 0 for d in drops)}/{len(drops)} epochs")


if __name__ == "__main__":
    main()
