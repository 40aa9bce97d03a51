"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O or
format error.  Errors are printed to stderr as ``error[<kind>]: message``.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .clutter import OrderSelector, acquire_initial, estimate_noise_sigma, remove_clutter, scrap_update
from .errors import FormatError, NumericalFailure, ValidationError
from .experiments import records_to_csv, replay, run_campaign, summary_table

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
CONFIG_ENV = "SCRAP_CONFIG"

# Frames whose clutter-subspace component is below this fraction of their norm
# are passed through untouched by ``scrub`` (already clean up to f32 storage).
SCRUB_CLEAN_RTOL = 1e-6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _config_path(arg):
    path = arg or os.environ.get(CONFIG_ENV)
    if not path:
        raise ValidationError(f"no config given (pass a path or set {CONFIG_ENV})")
    return path


def _emit(text, out):
    from .formats import atomic_write_bytes

    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_bytes(out, text.encode("utf-8"))


def cmd_simulate(args):
    from dataclasses import replace

    from .config import load_config

    cfg = load_config(_config_path(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.timing:
        overrides["record_timing"] = True
    if args.frames_dir:
        overrides["frames_dir"] = args.frames_dir
    if overrides:
        cfg = replace(cfg, **overrides)
    records, summary = run_campaign(cfg, workers=args.threads)
    _emit(records_to_csv(records), args.out)
    if not args.quiet:
        print(summary_table(summary), file=sys.stderr)
    return EXIT_OK


def _selector(args, frames, sigma=None):
    sigma = args.sigma if getattr(args, "sigma", None) is not None else sigma
    mode = getattr(args, "order", "mp_threshold")
    if sigma is None and mode == "mp_threshold":
        sigma = estimate_noise_sigma(frames)
    return OrderSelector(mode, sigma if sigma else None, args.l_max)


def cmd_acquire(args):
    from .formats import read_frames, save_state

    container = read_frames(args.frames)
    k0 = container.count if args.k0 is None else min(args.k0, container.count)
    frames = [container.frame(k) for k in range(k0)]
    sel = _selector(args, frames)
    state = acquire_initial(frames, sel)
    save_state(args.out, state)
    print(f"acquired L={state.order} from K0={k0} frames (sigma_n={sel.sigma_n:.6g})")
    return EXIT_OK


def cmd_update(args):
    from .formats import load_state, read_frames, save_state

    state = load_state(args.state)
    container = read_frames(args.frames)
    frames = [container.frame(k) for k in range(container.count)]
    sel = _selector(args, frames, sigma=state.sigma_n or None)
    new = scrap_update(state, frames, args.rho, sel)
    save_state(args.out or args.state, new)
    print(f"updated epoch {state.epoch} -> {new.epoch}: L {state.order} -> {new.order}")
    return EXIT_OK


def cmd_scrub(args):
    from .formats import FrameWriter, load_state, read_frames

    state = load_state(args.state)
    container = read_frames(args.frames)
    if container.N * container.M != state.q:
        raise ValidationError(f"frames have Q={container.N * container.M}, state has Q={state.q}")
    with FrameWriter(args.out, container.N, container.M, container.t_base, container.period) as w:
        for k in range(container.count):
            frame = container.frame(k)
            h = frame.astype(np.complex128).reshape(-1)
            if state.order:
                coeffs = state.subspace.conj().T @ h
                if np.linalg.norm(coeffs) <= SCRUB_CLEAN_RTOL * np.linalg.norm(h):
                    w.append(frame)
                    continue
            w.append(remove_clutter(state, frame.astype(np.complex128)))
    return EXIT_OK


def cmd_replay(args):
    from .config import load_config
    from .formats import load_state

    cfg = load_config(_config_path(args.config))
    state = load_state(args.state) if args.state else None
    records = replay(args.frames, cfg, state=state, noise_db=args.noise_db, seed=args.seed)
    _emit(records_to_csv(records), args.out)
    return EXIT_OK


def cmd_inspect(args):
    from .formats import FRAME_MAGIC, STATE_MAGIC, load_state, read_frames

    with open(args.path, "rb") as fh:
        magic = fh.read(4)
    if magic == STATE_MAGIC:
        s = load_state(args.path)
        print(f"state {args.path}")
        print(f"  Q = {s.q}")
        print(f"  L = {s.order}")
        print(f"  epoch = {s.epoch}")
        print(f"  sigma_n = {s.sigma_n:.6g}")
        print("  singular = [" + ", ".join(repr(float(x)) for x in s.singular) + "]")
    elif magic == FRAME_MAGIC:
        c = read_frames(args.path)
        power = float(np.mean(np.abs(c.payload.astype(np.complex128)) ** 2)) if c.count else 0.0
        print(f"frames {args.path}")
        print(f"  N = {c.N}")
        print(f"  M = {c.M}")
        print(f"  count = {c.count}")
        print(f"  t_base = {c.t_base!r}")
        print(f"  period = {c.period!r}")
        print(f"  mean_power = {power:.6g}")
    else:
        raise FormatError(f"unrecognised file magic {magic!r}", offset=0)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="scrap", description="Clutter tracking and removal for OFDM sensing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a simulation campaign and write per-frame CSV")
    s.add_argument("config", nargs="?", help=f"campaign config (JSON); defaults to ${CONFIG_ENV}")
    s.add_argument("--out", help="CSV output path (default stdout)")
    s.add_argument("--seed", type=int, help="run only this seed")
    s.add_argument("--threads", type=int, default=1, help="worker processes for independent cells")
    s.add_argument("--format", choices=["csv"], default="csv")
    s.add_argument("--timing", action="store_true", help="record per-frame removal wall time")
    s.add_argument("--frames-dir", help="also write each cell's frame stream as a container")
    s.add_argument("--quiet", action="store_true", help="do not print the summary table")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("acquire", help="initial clutter acquisition from a frame container")
    a.add_argument("frames")
    a.add_argument("--out", required=True, help="state blob to write")
    a.add_argument("--sigma", type=float, help="noise std per element (default: estimated)")
    a.add_argument("--k0", type=int, help="use only the first K0 frames")
    a.add_argument("--l-max", type=int, default=10)
    a.add_argument("--order", choices=["mp_threshold", "mdl"], default="mp_threshold")
    a.set_defaults(func=cmd_acquire)

    u = sub.add_parser("update", help="one smoothed subspace update")
    u.add_argument("state")
    u.add_argument("frames")
    u.add_argument("--rho", type=float, required=True)
    u.add_argument("--out", help="output state (default: overwrite input state)")
    u.add_argument("--sigma", type=float, help="override the state's noise std")
    u.add_argument("--l-max", type=int, default=10)
    u.add_argument("--order", choices=["mp_threshold", "mdl"], default="mp_threshold")
    u.set_defaults(func=cmd_update)

    c = sub.add_parser("scrub", help="remove clutter from every frame of a container")
    c.add_argument("state")
    c.add_argument("frames")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_scrub)

    r = sub.add_parser("replay", help="run the sensing pipeline over recorded frames")
    r.add_argument("frames")
    r.add_argument("--config", help=f"campaign config (JSON); defaults to ${CONFIG_ENV}")
    r.add_argument("--state", help="start from this state instead of acquiring from the first k0 frames")
    r.add_argument("--noise-db", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="CSV output path (default stdout)")
    r.add_argument("--format", choices=["csv"], default="csv")
    r.set_defaults(func=cmd_replay)

    i = sub.add_parser("inspect", help="summarise a state blob or frame container")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error[validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FormatError, OSError) as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
