"""Clutter acquisition, tracking and removal for OFDM sensing."""

__version__ = "0.1.0"

from .channel import (
    DESK_RF,
    FULL_RF,
    CsiFrame,
    Path,
    RfConfig,
    ScenarioParams,
    Scene,
    drifting_scenario,
    range_steering,
    synthesize_frame,
    velocity_steering,
)
from .clutter import (
    ClutterState,
    OrderSelector,
    acquire_initial,
    mdl_order,
    mp_sv_threshold,
    remove_clutter,
    scrap_update,
    stack_acquisitions,
)
from .errors import (
    FormatError,
    NumericalFailure,
    ScrapError,
    SingularGramError,
    UndefinedScnrError,
    ValidationError,
)
from .experiments import CampaignConfig, MetricsRecord, replay, run_campaign, summarize
from .numerics import SvdResult, compact_svd
from .radar import Detection, Periodogram, bin_of, is_detection, periodogram, scnr, strongest_peak
