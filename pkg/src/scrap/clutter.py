"""Clutter subspace acquisition, smoothed tracking and removal.

Acquisition stacks vectorised CSI frames as rows, takes a compact SVD and
keeps the dominant right singular vectors as the clutter subspace.  Tracking
(``scrap_update``) merges new acquisitions with the singular-value-weighted
previous subspace by exponential smoothing and re-runs the SVD.  Removal
subtracts the projection onto the subspace using a precomputed factor, so it
costs two matrix-vector products and never forms a ``Q x Q`` projector.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .channel import CsiFrame
from .errors import SingularGramError, ValidationError
from .numerics import compact_svd, solve_hermitian_posdef

__all__ = [
    "ClutterState",
    "OrderSelector",
    "stack_acquisitions",
    "mp_sv_threshold",
    "mdl_order",
    "acquire_initial",
    "scrap_update",
    "remove_clutter",
    "projection_factor",
    "estimate_noise_sigma",
    "mp_median",
]

GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class OrderSelector:
    """How the clutter order is chosen from the singular values.

    ``mode`` is ``"mp_threshold"`` (default) or ``"mdl"``.  ``rho_scaling``
    toggles the multiplication of the update threshold by the smoothing
    factor; it is on by default.
    """

    mode: str = "mp_threshold"
    sigma_n: float = None
    l_max: int = 10
    rho_scaling: bool = True

    def __post_init__(self):
        if self.mode not in ("mp_threshold", "mdl"):
            raise ValidationError(f"unknown order-selection mode {self.mode!r}")
        if self.l_max < 0:
            raise ValidationError("l_max must be non-negative")
        if self.sigma_n is not None and not self.sigma_n > 0:
            raise ValidationError("sigma_n must be positive")


@dataclass(frozen=True)
class ClutterState:
    """Snapshot of the tracked clutter subspace.

    ``subspace`` holds the retained right singular vectors as columns
    (``Q x L``), ``proj_factor`` is ``subspace (subspace^H subspace)^-1``.
    """

    subspace: np.ndarray
    singular: np.ndarray
    proj_factor: np.ndarray
    epoch: int = 0
    sigma_n: float = 0.0

    @property
    def q(self):
        return self.subspace.shape[0]

    @property
    def order(self):
        return self.subspace.shape[1]

    @classmethod
    def empty(cls, q, epoch=0, sigma_n=0.0):
        z = np.zeros((q, 0), dtype=np.complex128)
        return cls(z, np.zeros(0), z.copy(), epoch, sigma_n)

    def weighted_components(self):
        """``subspace @ diag(singular)``, the only history the update needs."""
        return self.subspace * self.singular


def _frame_array(f):
    return f.data if isinstance(f, CsiFrame) else np.asarray(f)


def stack_acquisitions(frames):
    """Stack frames as rows of a ``K x Q`` matrix (row-major vectorisation)."""
    frames = list(frames)
    if not frames:
        raise ValidationError("need at least one frame to stack")
    arrays = [_frame_array(f) for f in frames]
    shape = arrays[0].shape
    for i, a in enumerate(arrays):
        if a.shape != shape:
            raise ValidationError(f"frame {i} has shape {a.shape}, expected {shape}")
    return np.stack([a.reshape(-1) for a in arrays]).astype(np.complex128, copy=False)


def mp_sv_threshold(sel, k_t, q, rho_t=1.0, t=0):
    """Singular-value threshold from the Marchenko-Pastur upper edge.

    ``sigma_n * (1 + sqrt(Q / K_t))``, scaled by ``rho_t`` for updates (t > 0).
    """
    if sel.sigma_n is None:
        raise ValidationError("sigma_n is not set; the MP threshold needs the noise level")
    if k_t < 1 or q < 1:
        raise ValidationError(f"need K_t >= 1 and Q >= 1, got K_t={k_t}, Q={q}")
    if not 0 < rho_t <= 1:
        raise ValidationError(f"rho_t must lie in (0, 1], got {rho_t}")
    eta = sel.sigma_n * (1.0 + np.sqrt(q / k_t))
    if t > 0 and sel.rho_scaling:
        eta *= rho_t
    return float(eta)


def _mdl_scores(eigs, n_snapshots):
    p = len(eigs)
    scores = np.empty(p)
    for k in range(p):
        tail = eigs[k:]
        arith = tail.mean()
        if arith <= 0:
            fit = 0.0
        elif np.any(tail <= 0):
            fit = np.inf
        else:
            log_ratio = np.mean(np.log(tail)) - np.log(arith)
            fit = -n_snapshots * (p - k) * log_ratio
        scores[k] = fit + 0.5 * k * (2 * p - k) * np.log(n_snapshots)
    return scores


def mdl_order(singular, k, q):
    """Wax-Kailath MDL order estimate from singular values of ``C / sqrt(K)``.

    Eigenvalues are ``s_i**2``; ``K`` snapshots.  Candidate orders run over
    ``0 .. len(singular) - 1``.
    """
    s = np.asarray(singular, dtype=float)
    if s.size == 0:
        return 0
    if np.any(np.diff(s) > 1e-12 * max(s[0], 1e-300)) or np.any(s < 0):
        raise ValidationError("singular values must be non-negative and descending")
    n_snapshots = max(int(k), 2)
    scores = _mdl_scores(s ** 2, n_snapshots)
    return int(np.argmin(scores))


def projection_factor(subspace):
    """Return ``(subspace, P)`` with ``P = C (C^H C)^-1``.

    If the Gram matrix is ill conditioned the trailing column is dropped and
    the factor recomputed; the possibly trimmed subspace is returned too.
    """
    c = subspace
    while c.shape[1] > 0:
        gram = c.conj().T @ c
        if np.linalg.cond(gram) <= GRAM_COND_LIMIT:
            try:
                inv = solve_hermitian_posdef(gram, np.eye(c.shape[1], dtype=np.complex128))
            except SingularGramError:
                pass
            else:
                return c, c @ inv
        c = c[:, :-1]
    return c, c.copy()


def _select_order(sel, singular, k_rows, k_t, q, rho_t, t):
    if sel.mode == "mdl":
        order = mdl_order(singular, k_rows, q)
    else:
        eta = mp_sv_threshold(sel, k_t, q, rho_t, t)
        order = int(np.count_nonzero(singular > eta))
    if singular.size and singular[0] > 0:
        numerical_rank = int(np.count_nonzero(singular > singular[0] * np.finfo(float).eps * max(k_rows, q)))
        order = min(order, numerical_rank)
    return min(order, sel.l_max)


def _state_from_matrix(composite, sel, k_t, rho_t, t):
    q = composite.shape[1]
    if not np.any(composite):
        return ClutterState.empty(q, t, sel.sigma_n or 0.0)
    svd = compact_svd(composite)
    order = _select_order(sel, svd.singular, composite.shape[0], k_t, q, rho_t, t)
    # Rows of V^H laid out as columns (transpose, no conjugation). Column-major
    # storage keeps each component contiguous for the O(QL) removal.
    subspace = np.asfortranarray(svd.right_h[:order].T)
    subspace, proj = projection_factor(subspace)
    proj = np.asfortranarray(proj)
    singular = svd.singular[: subspace.shape[1]].copy()
    return ClutterState(subspace, singular, proj, t, sel.sigma_n or 0.0)


def acquire_initial(frames, sel):
    """Initial clutter acquisition from ``K0`` frames (t = 0)."""
    c = stack_acquisitions(frames)
    k0 = c.shape[0]
    return _state_from_matrix((1.0 / np.sqrt(k0)) * c, sel, k0, 1.0, 0)


def smoothed_matrix(state, frames, rho_t):
    """Composite matrix of new acquisitions over the weighted previous components."""
    c = stack_acquisitions(frames)
    if c.shape[1] != state.q:
        raise ValidationError(f"frames have Q={c.shape[1]}, state has Q={state.q}")
    k_t = c.shape[0]
    top = (rho_t / np.sqrt(k_t)) * c
    w_hist = np.sqrt(max(0.0, 1.0 - rho_t ** 2))
    if state.order == 0 or w_hist == 0.0:
        return top
    history = w_hist * state.weighted_components().T
    return np.vstack([top, history])


def scrap_update(state, frames, rho_t, sel):
    """Smoothed subspace update at epoch ``state.epoch + 1``."""
    if not 0 < rho_t <= 1:
        raise ValidationError(f"rho_t must lie in (0, 1], got {rho_t}")
    frames = list(frames)
    composite = smoothed_matrix(state, frames, rho_t)
    return _state_from_matrix(composite, sel, len(frames), rho_t, state.epoch + 1)


def remove_clutter(state, frame):
    """Subtract the projection of ``frame`` onto the clutter subspace.

    Accepts a :class:`CsiFrame` (returns one) or an array of any shape with
    ``Q`` elements (returns an array of that shape).
    """
    data = _frame_array(frame)
    h = np.asarray(data, dtype=np.complex128).reshape(-1)
    if h.size != state.q:
        raise ValidationError(f"frame has {h.size} elements, state expects Q={state.q}")
    if state.order == 0:
        out = h.copy()
    else:
        coeffs = (h.conj() @ state.subspace).conj()
        out = h - state.proj_factor @ coeffs
    out = out.reshape(np.shape(data))
    if isinstance(frame, CsiFrame):
        return CsiFrame(out, frame.timestamp)
    return out


@lru_cache(maxsize=64)
def mp_median(ratio):
    """Median of the unit-variance Marchenko-Pastur law with aspect ratio ``ratio`` <= 1."""
    y = float(ratio)
    if not 0 < y <= 1:
        raise ValidationError(f"MP aspect ratio must lie in (0, 1], got {y}")
    a, b = (1 - np.sqrt(y)) ** 2, (1 + np.sqrt(y)) ** 2

    def density(x):
        return np.sqrt(max((b - x) * (x - a), 0.0)) / (2 * np.pi * y * x)

    def cdf(x):
        return integrate.quad(density, a, x, limit=200)[0]

    return optimize.brentq(lambda x: cdf(x) - 0.5, a, b, xtol=1e-12)


def estimate_noise_sigma(frames):
    """Noise level from the median singular value of ``C / sqrt(K)``.

    Divides by the scaled MP median, so a few strong clutter components do
    not bias the estimate much.
    """
    c = stack_acquisitions(frames)
    k, q = c.shape
    s = np.linalg.svd(c / np.sqrt(k), compute_uv=False)
    lo, hi = min(k, q), max(k, q)
    # Eigenvalues of C C^H / K  ~  sigma^2 * (hi / k) * MP(lo / hi)
    scale = np.sqrt(hi / k * mp_median(lo / hi))
    return float(np.median(s) / scale)
