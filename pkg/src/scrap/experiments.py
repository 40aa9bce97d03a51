"""Dynamic-clutter campaigns: simulate, track, detect and aggregate.

A campaign is a grid of cells ``(noise_db, seed)``.  Each cell synthesises
one frame stream (target-free acquisition frames followed by sensing frames)
and feeds it, frame by frame, to every arm ``(mode, rho)``, so all arms see
identical scene and noise realisations.  Cells are independent and may run in
worker processes; frames inside a cell are strictly sequential.
"""

import csv
import io
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np

from .channel import DESK_RF, FULL_RF, RfConfig, ScenarioParams, make_rng, drifting_scenario, synthesize_frame
from .clutter import ClutterState, OrderSelector, acquire_initial, estimate_noise_sigma, remove_clutter, scrap_update
from .errors import UndefinedScnrError, ValidationError
from .radar import bin_of, is_detection, periodogram, strongest_peak

__all__ = [
    "CampaignConfig",
    "MetricsRecord",
    "Arm",
    "CellStream",
    "run_campaign",
    "run_cell",
    "run_arms",
    "replay",
    "summarize",
    "write_csv",
    "records_to_csv",
    "CSV_HEADER",
    "summary_table",
]

CSV_HEADER = ("trial", "t", "rho", "noise_db", "detected", "scnr_db", "order", "removal_s")
MODES = ("crap_static", "scrap", "crap_recompute")


@dataclass
class CampaignConfig:
    rf: RfConfig = DESK_RF
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    k0: int = 100
    k_update: int = 10
    update_period: float = 1.0
    frame_period: float = 0.01
    total_frames: int = 1000
    rho_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0)
    modes: Sequence[str] = ("crap_static", "scrap")
    noise_db: Sequence[float] = tuple(range(-40, 1, 5))
    l_max: int = 10
    seeds: Sequence[int] = (0,)
    tol_bins: int = 3
    pad_r: int = 1
    pad_v: int = 1
    order_mode: str = "mp_threshold"
    sigma_mode: str = "known"
    record_timing: bool = False
    dump_frames: Sequence[int] = ()
    dump_dir: Optional[str] = None
    frames_dir: Optional[str] = None

    def __post_init__(self):
        self.rho_grid = tuple(float(r) for r in self.rho_grid)
        self.modes = tuple(self.modes)
        self.noise_db = tuple(float(x) for x in self.noise_db)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.dump_frames = tuple(int(i) for i in self.dump_frames)
        if self.k0 < 1:
            raise ValidationError("k0 must be >= 1")
        if self.k_update < 1:
            raise ValidationError("k_update must be >= 1")
        if self.frame_period <= 0 or self.update_period < self.frame_period:
            raise ValidationError("need 0 < frame_period <= update_period")
        if self.total_frames < 1:
            raise ValidationError("total_frames must be >= 1")
        for r in self.rho_grid:
            if not 0 < r <= 1:
                raise ValidationError(f"rho must lie in (0, 1], got {r}")
        for m in self.modes:
            if m not in MODES:
                raise ValidationError(f"unknown mode {m!r}; choose from {MODES}")
        if self.sigma_mode not in ("known", "estimate"):
            raise ValidationError("sigma_mode must be 'known' or 'estimate'")
        if self.l_max < 0:
            raise ValidationError("l_max must be non-negative")

    @property
    def duration(self):
        return self.total_frames * self.frame_period

    @property
    def frames_per_update(self):
        return max(1, int(round(self.update_period / self.frame_period)))

    @property
    def n_updates(self):
        return int(math.floor(self.total_frames * self.frame_period / self.update_period + 1e-9))

    def arms(self):
        out = []
        for mode in self.modes:
            if mode == "scrap":
                out.extend(Arm(mode, rho) for rho in self.rho_grid)
            else:
                out.append(Arm(mode, 1.0 if mode == "crap_recompute" else 0.0))
        return out

    def scene_params(self):
        return replace(self.scenario, duration=self.duration)

    @classmethod
    def full_size(cls, **overrides):
        """Full-size profile: full RF numerology, 10^4 frames, 10 s update period."""
        base = dict(
            rf=FULL_RF,
            update_period=10.0,
            total_frames=10000,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class Arm:
    """``crap_static`` arms are labelled ``rho = 0`` (no updates ever happen)."""

    mode: str
    rho: float


@dataclass
class MetricsRecord:
    trial: int
    t: float
    rho: float
    noise_db: float
    detected: bool
    scnr_db: Optional[float]
    order: int
    removal_s: Optional[float] = None
    frame: int = 0
    clutter_power: Optional[float] = None
    mode: str = "scrap"

    def csv_row(self):
        return (
            str(self.trial),
            repr(float(self.t)),
            repr(float(self.rho)),
            repr(float(self.noise_db)),
            "1" if self.detected else "0",
            "" if self.scnr_db is None else repr(float(self.scnr_db)),
            str(self.order),
            "" if self.removal_s is None else repr(float(self.removal_s)),
        )


def noise_sigma(noise_db, ref_amplitude=1.0):
    """Per-element noise std for a noise level in dB relative to the strongest clutter path.

    The reference is the strongest clutter return's power over the band,
    ``N |alpha|^2``, against ``P_n``; per element this is ``|alpha|^2`` vs ``sigma_n^2``.
    """
    return float(ref_amplitude * 10 ** (noise_db / 20.0))


def _quantize(data):
    # Storage precision of the frame container; keeps simulation and replay identical.
    return data.astype(np.complex64).astype(np.complex128)


@dataclass
class CellStream:
    """Frames and ground truth for one ``(noise_db, seed)`` cell."""

    cfg: CampaignConfig
    noise_db: float
    seed: int

    def __post_init__(self):
        self.scene_base = drifting_scenario(self.cfg.rf, self.seed, self.cfg.scene_params())
        ref = max((abs(p.alpha) for p in self.scene_base.clutter), default=1.0)
        self.sigma_n = noise_sigma(self.noise_db, ref)
        self.scene = self.scene_base.with_noise(self.cfg.rf.N * self.sigma_n ** 2)

    @property
    def t_base(self):
        return -self.cfg.k0 * self.cfg.frame_period

    def timestamps(self):
        """Acquisition and sensing times, ``t_base + k * frame_period`` as stored in containers."""
        fp = self.cfg.frame_period
        times = [self.t_base + k * fp for k in range(self.cfg.k0 + self.cfg.total_frames)]
        return times[: self.cfg.k0], times[self.cfg.k0 :]

    def frames(self):
        """Yield ``(data, t, is_acquisition)`` for the whole cell in time order."""
        rng = make_rng(self.seed, 1)
        acq, sensing = self.timestamps()
        for t in acq:
            f = synthesize_frame(self.scene, self.cfg.rf, t, rng, include_targets=False)
            yield _quantize(f.data), t, True
        for t in sensing:
            f = synthesize_frame(self.scene, self.cfg.rf, t, rng)
            yield _quantize(f.data), t, False

    def ground_truth(self, t):
        return ground_truth(self.scene, t)


def ground_truth(scene, t):
    targets = [(p.range(t), p.velocity(t)) for p in scene.targets]
    clutter = [(p.range(t), p.velocity(t)) for p in scene.clutter]
    return (targets[0] if targets else None), clutter


class _ArmTracker:
    def __init__(self, arm, cfg, sel, state):
        self.arm = arm
        self.cfg = cfg
        self.sel = sel
        self.state = state
        self.recent = deque(maxlen=cfg.k_update)

    def observe(self, data):
        self.recent.append(data)

    def maybe_update(self, frame_idx):
        if self.arm.mode == "crap_static":
            return
        if (frame_idx + 1) % self.cfg.frames_per_update:
            return
        frames = list(self.recent)
        if self.arm.mode == "scrap":
            self.state = scrap_update(self.state, frames, self.arm.rho, self.sel)
        else:
            fresh = acquire_initial(frames, self.sel)
            self.state = replace(fresh, epoch=self.state.epoch + 1)


class _RegionCache:
    """Ellipse masks keyed by the clutter ground-truth bins."""

    def __init__(self, pgram_shape, cfg, pad_r, pad_v, scale=5.0):
        self.shape = pgram_shape
        self.a = scale * pad_r
        self.b = scale * pad_v
        self._cache = {}
        self._n = np.arange(pgram_shape[0])[:, None]
        self._m = np.arange(pgram_shape[1])[None, :]

    def mask(self, bins):
        key = tuple(bins)
        hit = self._cache.get(key)
        if hit is None:
            mask = np.zeros(self.shape, dtype=bool)
            m_bins = self.shape[1]
            for n0, m0 in key:
                d = (self._m - m0) % m_bins
                dm = np.minimum(d, m_bins - d)
                mask |= ((self._n - n0) / self.a) ** 2 + (dm / self.b) ** 2 <= 1.0
            if len(self._cache) > 4096:
                self._cache.clear()
            hit = self._cache[key] = mask
        return hit


def run_arms(cfg, frames, ground_truth_fn, sigma_n, trial, noise_db, state=None, dump=None):
    """Drive every arm of ``cfg`` through one frame stream.

    ``frames`` yields ``(data, t, is_acquisition)``.  Acquisition frames are
    collected for the initial state unless ``state`` is given.  Returns one
    list of :class:`MetricsRecord` per arm, in ``cfg.arms()`` order.
    """
    arms = cfg.arms()
    acquisition = []
    trackers = None
    records = [[] for _ in arms]
    cache = None
    sensing_idx = 0
    sel = None

    for data, t, is_acq in frames:
        if is_acq and state is None:
            acquisition.append(data)
            continue
        if trackers is None:
            sigma = sigma_n
            if sigma is None:
                sigma = estimate_noise_sigma(acquisition) if acquisition else None
            if not (sigma and sigma > 0):
                # Noise-free stream: only the numerical-rank cutoff applies.
                sigma = np.finfo(float).tiny
            sel = OrderSelector(cfg.order_mode, sigma, cfg.l_max)
            if state is not None:
                init = state
            elif acquisition:
                init = acquire_initial(acquisition, sel)
            else:
                init = ClutterState.empty(data.size, 0, sigma)
            trackers = [_ArmTracker(a, cfg, sel, init) for a in arms]

        target, clutter = ground_truth_fn(t)
        for tracker, out in zip(trackers, records):
            t0 = time.perf_counter()
            cleaned = remove_clutter(tracker.state, data)
            elapsed = time.perf_counter() - t0
            pg = periodogram(cleaned, cfg.rf, cfg.pad_r, cfg.pad_v)
            if cache is None:
                cache = _RegionCache(pg.power.shape, cfg.rf, cfg.pad_r, cfg.pad_v)
            rec = _score(pg, target, clutter, cfg, cache)
            out.append(
                MetricsRecord(
                    trial=trial,
                    t=t,
                    rho=tracker.arm.rho,
                    noise_db=noise_db,
                    detected=rec[0],
                    scnr_db=rec[1],
                    order=tracker.state.order,
                    removal_s=elapsed if cfg.record_timing else None,
                    frame=sensing_idx,
                    clutter_power=rec[2],
                    mode=tracker.arm.mode,
                )
            )
            if dump is not None and sensing_idx in cfg.dump_frames:
                dump(tracker.arm, sensing_idx, pg)
            tracker.observe(data)
            tracker.maybe_update(sensing_idx)
        sensing_idx += 1
    return records


def _score(pg, target, clutter, cfg, cache):
    clutter_bins = []
    for r, v in clutter:
        try:
            clutter_bins.append(bin_of(r, v, pg))
        except ValidationError:
            continue
    p_c = None
    if clutter_bins:
        mask = cache.mask(clutter_bins)
        p_c = float(pg.power[mask].mean())
    if target is None:
        return False, None, p_c
    det = strongest_peak(pg)
    hit = is_detection(det, target, pg, cfg.tol_bins)
    scnr_db = None
    if p_c is not None and p_c > 0:
        n, m = bin_of(*target, pg)
        with np.errstate(divide="ignore"):
            scnr_db = float(10 * np.log10(pg.power[n, m] / p_c))
    return hit, scnr_db, p_c


def _dump_writer(cfg, noise_db, seed):
    if cfg.dump_dir is None or not cfg.dump_frames:
        return None
    from .formats import write_real_matrix

    out_dir = FsPath(cfg.dump_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def dump(arm, idx, pg):
        name = f"pgram_n{noise_db:+.1f}_s{seed}_{arm.mode}_rho{arm.rho:.2f}_f{idx:06d}.csif"
        write_real_matrix(out_dir / name, pg.power, t=idx * cfg.frame_period)

    return dump


def run_cell(cfg, noise_db, seed):
    """All arms for one ``(noise_db, seed)`` cell; returns a flat record list."""
    stream = CellStream(cfg, noise_db, seed)
    sigma = stream.sigma_n if cfg.sigma_mode == "known" else None
    frames = stream.frames()
    writer = None
    if cfg.frames_dir is not None:
        from .formats import FrameWriter

        out_dir = FsPath(cfg.frames_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = FrameWriter(
            out_dir / cell_frames_name(noise_db, seed), cfg.rf.N, cfg.rf.M, stream.t_base, cfg.frame_period
        )
        frames = _tee(frames, writer)
    per_arm = run_arms(
        cfg,
        frames,
        stream.ground_truth,
        sigma,
        trial=seed,
        noise_db=noise_db,
        dump=_dump_writer(cfg, noise_db, seed),
    )
    if writer is not None:
        writer.close()
    return [r for arm_records in per_arm for r in arm_records]


def cell_frames_name(noise_db, seed):
    return f"frames_n{noise_db:+.1f}_s{seed}.csif"


def _tee(frames, writer):
    for data, t, is_acq in frames:
        writer.append(data)
        yield data, t, is_acq


def _run_cell_args(args):
    return run_cell(*args)


def run_campaign(cfg, workers=1):
    """Run every ``(noise_db, seed)`` cell; returns ``(records, summary)``.

    Output order is fixed by the config regardless of ``workers``.
    """
    cells = [(cfg, db, seed) for db in cfg.noise_db for seed in cfg.seeds]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, cells))
    else:
        chunks = [_run_cell_args(c) for c in cells]
    records = [r for chunk in chunks for r in chunk]
    return records, summarize(records)


def replay(frames_path, cfg, state=None, noise_db=None, seed=None):
    """Run the sensing pipeline on a recorded frame container.

    Without ``state`` the first ``cfg.k0`` frames form the initial acquisition.
    Ground truth comes from the config's scenario at the frame timestamps
    (seed and noise level default to the first configured ones).  With
    ``sigma_mode = "estimate"`` the noise level is estimated from the
    acquisition frames.
    """
    from .formats import read_frames

    container = read_frames(frames_path)
    if (container.N, container.M) != (cfg.rf.N, cfg.rf.M):
        raise ValidationError(
            f"container frames are {container.N}x{container.M}, config expects {cfg.rf.N}x{cfg.rf.M}"
        )
    if state is not None and state.q != cfg.rf.Q:
        raise ValidationError(f"state has Q={state.q}, frames have Q={cfg.rf.Q}")
    seed = cfg.seeds[0] if seed is None else seed
    noise_db = cfg.noise_db[0] if noise_db is None else noise_db
    stream = CellStream(cfg, noise_db, seed)
    sigma = stream.sigma_n if cfg.sigma_mode == "known" else None
    if state is not None and cfg.sigma_mode == "estimate":
        sigma = state.sigma_n or None

    def frames():
        for k in range(container.count):
            data = container.frame(k).astype(np.complex128)
            yield data, container.timestamp(k), state is None and k < cfg.k0

    per_arm = run_arms(cfg, frames(), stream.ground_truth, sigma, trial=seed, noise_db=noise_db, state=state)
    return [r for arm_records in per_arm for r in arm_records]


@dataclass
class SummaryRow:
    rho: float
    noise_db: float
    mode: str
    n_frames: int
    p_md: float
    scnr_median: Optional[float]
    scnr_q25: Optional[float]
    scnr_q75: Optional[float]
    scnr_mean: Optional[float]
    mean_order: float


def summarize(records):
    """Aggregate per ``(mode, rho, noise_db)`` cell; empty cells are omitted."""
    cells = {}
    for r in records:
        cells.setdefault((r.mode, r.rho, r.noise_db), []).append(r)
    rows = []
    for (mode, rho, db), recs in sorted(cells.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
        if not recs:
            continue
        missed = sum(not r.detected for r in recs)
        scnrs = np.array([r.scnr_db for r in recs if r.scnr_db is not None], dtype=float)
        if scnrs.size:
            q25, med, q75 = (float(x) for x in np.percentile(scnrs, [25, 50, 75]))
            mean = float(scnrs.mean())
        else:
            q25 = med = q75 = mean = None
        rows.append(
            SummaryRow(
                rho=rho,
                noise_db=db,
                mode=mode,
                n_frames=len(recs),
                p_md=missed / len(recs),
                scnr_median=med,
                scnr_q25=q25,
                scnr_q75=q75,
                scnr_mean=mean,
                mean_order=float(np.mean([r.order for r in recs])),
            )
        )
    return rows


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def write_csv(path, records):
    from .formats import atomic_write_bytes

    atomic_write_bytes(path, records_to_csv(records).encode("utf-8"))


def summary_table(rows):
    """Plain-text rendering of :func:`summarize` output."""
    lines = [f"{'mode':<15}{'rho':>6}{'noise_db':>10}{'frames':>8}{'P_MD':>8}{'SCNR med':>10}{'mean L':>8}"]
    for r in rows:
        med = "n/a" if r.scnr_median is None else f"{r.scnr_median:.2f}"
        lines.append(
            f"{r.mode:<15}{r.rho:>6.2f}{r.noise_db:>10.1f}{r.n_frames:>8d}{r.p_md:>8.3f}{med:>10}{r.mean_order:>8.2f}"
        )
    return "\n".join(lines)
