"""JSON configuration for the pipeline.

Every key is optional; missing keys take the library defaults::

    {
      "simulation": {"n_panels": 1000, "noise_sd": 0.1, "seed": 7, ...},
      "features": {"span": 0.5, "in_ratio": "as_printed",
                   "readiness": {"low_redox": 0.07, "high_redox": 0.2,
                                 "max_hours": 16.0, "fast_cutoff_hours": 8.0}},
      "selection": {"candidate_features": [...], "exhaustive_cap": 12, "top_k": 10},
      "loss_weights": {"w1": 5, "w2": 1, "w3": 0},
      "call_threshold": 0.9,
      "split": {"train_fraction": 0.65, "seed": 0},
      "breakpoints": {"susceptible_max": 8, "resistant_min": 32}
    }
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Mapping

from .evaluation import SirBreakpoints
from .features import FEATURE_NAMES
from .mic import LossWeights
from .pipeline import FeatureConfig, PipelineConfig
from .readiness import ReadinessParams
from .sim import SimulationConfig

__all__ = ["config_from_dict", "config_to_dict", "load_config"]

_TOP_KEYS = {"simulation", "features", "selection", "loss_weights", "call_threshold", "split", "breakpoints"}


def _build(cls, data: Mapping | None, section: str):
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: Mapping) -> PipelineConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    sim = dict(data.get("simulation") or {})
    for key in ("dilutions", "growth_rate_range", "inflection_time_range", "asymptote_range", "redox_asymptote_range"):
        if key in sim:
            sim[key] = tuple(sim[key])
    feats = dict(data.get("features") or {})
    feats["readiness"] = _build(ReadinessParams, feats.get("readiness"), "features.readiness")
    selection = dict(data.get("selection") or {})
    split = dict(data.get("split") or {})
    bp = data.get("breakpoints")
    cfg = PipelineConfig(
        simulation=_build(SimulationConfig, sim, "simulation"),
        features=_build(FeatureConfig, feats, "features"),
        candidate_features=tuple(selection.pop("candidate_features", FEATURE_NAMES)),
        exhaustive_cap=int(selection.pop("exhaustive_cap", 12)),
        top_k=int(selection.pop("top_k", 10)),
        weights=_build(LossWeights, data.get("loss_weights"), "loss_weights"),
        call_threshold=float(data.get("call_threshold", 0.9)),
        train_fraction=float(split.pop("train_fraction", 0.65)),
        split_seed=int(split.pop("seed", 0)),
        breakpoints=None if bp is None else _build(SirBreakpoints, bp, "breakpoints"),
    )
    for name, rest in (("selection", selection), ("split", split)):
        if rest:
            raise ValueError(f"unknown keys in {name!r}: {sorted(rest)}")
    return cfg


def config_to_dict(config: PipelineConfig) -> dict:
    return {
        "simulation": dataclasses.asdict(config.simulation),
        "features": dataclasses.asdict(config.features),
        "selection": {
            "candidate_features": list(config.candidate_features),
            "exhaustive_cap": config.exhaustive_cap,
            "top_k": config.top_k,
        },
        "loss_weights": dataclasses.asdict(config.weights),
        "call_threshold": config.call_threshold,
        "split": {"train_fraction": config.train_fraction, "seed": config.split_seed},
        "breakpoints": None if config.breakpoints is None else dataclasses.asdict(config.breakpoints),
    }


def load_config(path) -> PipelineConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
