"""Campaign configuration files (JSON syntax, strict keys).

Top-level keys are the fields of :class:`~scrap.experiments.CampaignConfig`.
``rf`` is either a profile name (``"desk"`` or ``"full"``) or an object with
``f_c``, ``N``, ``delta_f``, ``M`` and optional ``T0``; ``scenario`` is an
object with fields of :class:`~scrap.channel.ScenarioParams`.  Unknown keys
anywhere are rejected.
"""

import json
from dataclasses import asdict, fields
from pathlib import Path

from .channel import DESK_RF, FULL_RF, RfConfig, ScenarioParams
from .errors import ValidationError
from .experiments import CampaignConfig

RF_PROFILES = {"desk": DESK_RF, "full": FULL_RF}


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def rf_from_value(value):
    if isinstance(value, str):
        try:
            return RF_PROFILES[value]
        except KeyError:
            raise ValidationError(f"rf: unknown profile {value!r}; choose from {sorted(RF_PROFILES)}")
    return _strict(RfConfig, value, "rf")


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be an object")
    data = dict(data)
    if "rf" in data:
        data["rf"] = rf_from_value(data["rf"])
    if "scenario" in data:
        data["scenario"] = _strict(ScenarioParams, data["scenario"], "scenario")
    return _strict(CampaignConfig, data, "config")


def load_config(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg):
    out = asdict(cfg)
    out["rf"] = {f.name: getattr(cfg.rf, f.name) for f in fields(RfConfig)}
    out["scenario"] = asdict(cfg.scenario)
    for key, value in list(out.items()):
        if isinstance(value, tuple):
            out[key] = list(value)
    out["scenario"]["clutter_range"] = list(cfg.scenario.clutter_range)
    return out
