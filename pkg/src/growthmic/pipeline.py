"""Panel-level pipeline: readiness, feature extraction, training and prediction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .evaluation import (
    AgreementReport,
    CategoricalReport,
    SirBreakpoints,
    categorical_agreement,
    essential_agreement,
    mic_to_bin,
    split_panels,
)
from .features import FEATURE_NAMES, DegenerateControlError, FeatureVector, LabeledWell, extract_features, label_growth
from .mic import LossWeights, MicCall, MicDistribution, call_mic, mic_distribution
from .readiness import Failed, IncubationStatus, ReadinessParams, Ready, assess_readiness
from .select import GrowthModel, TrainingSet, train_growth_model
from .sim import RawPanel, SimulationConfig, simulate_dataset
from .smooth import DEFAULT_SPAN, SmoothedCurve, loess_fit

log = logging.getLogger(__name__)

__all__ = [
    "FeatureConfig",
    "PanelFeatures",
    "PanelPrediction",
    "PipelineConfig",
    "PipelineResult",
    "smooth_series",
    "panel_status",
    "extract_panel",
    "labeled_wells",
    "train",
    "predict_panel",
    "run_pipeline",
]


@dataclass(frozen=True)
class FeatureConfig:
    span: float = DEFAULT_SPAN
    in_ratio: Literal["as_printed", "integral"] = "as_printed"
    readiness: ReadinessParams = ReadinessParams()


@dataclass(frozen=True)
class PanelFeatures:
    panel_id: str
    status: IncubationStatus
    dilutions: tuple[float, ...]
    features: tuple[FeatureVector, ...] = ()
    reference_mic: float = math.nan

    @property
    def ready(self) -> bool:
        return isinstance(self.status, Ready)

    @property
    def t_result(self) -> float:
        return self.status.time_to_result if self.ready else math.nan


@dataclass(frozen=True)
class PanelPrediction:
    panel_id: str
    status: IncubationStatus
    dilutions: tuple[float, ...]
    pi: np.ndarray | None = None
    distribution: MicDistribution | None = None
    call: MicCall | None = None

    @property
    def ready(self) -> bool:
        return self.call is not None


def smooth_series(times, values, span: float = DEFAULT_SPAN) -> SmoothedCurve:
    """LOESS fit, widening ``span`` when the series is too short for 3-point windows."""
    n = len(times)
    if n < 3:
        raise ValueError(f"series too short to smooth ({n} samples)")
    return loess_fit(times, values, min(1.0, max(span, 3.0 / n)))


def panel_status(panel: RawPanel, config: FeatureConfig = FeatureConfig()) -> IncubationStatus:
    """Replay incubation tick by tick, smoothing only the samples seen so far.

    Ready is fixed at the first tick whose check fires, so the decision
    never looks past the time-to-result.  A panel never ready is assessed
    one tick after its last sample, which makes it Failed past the limit.
    """
    times, redox = panel.times, panel.control.redox
    params = config.readiness
    for i in range(2, len(times)):
        if times[i] > params.max_hours:
            break
        status = assess_readiness(smooth_series(times[: i + 1], redox[: i + 1], config.span), times[i], params)
        if isinstance(status, Ready):
            t = float(times[i])
            return Ready(t, "fast" if t <= params.fast_cutoff_hours else "slow")
    tick = times[1] - times[0] if len(times) > 1 else 1.0 / 3.0
    curve = smooth_series(times, redox, config.span)
    return assess_readiness(curve, float(times[-1] + tick), params)


def extract_panel(panel: RawPanel, config: FeatureConfig = FeatureConfig()) -> PanelFeatures:
    """Features of every test well, from curves smoothed over [0, time-to-result]."""
    status = panel_status(panel, config)
    dilutions = tuple(float(d) for d in panel.dilutions)
    if not isinstance(status, Ready):
        return PanelFeatures(panel.panel_id, status, dilutions, (), panel.reference_mic)
    keep = panel.times <= status.time_to_result
    t = panel.times[keep]
    ctrl_turb = smooth_series(t, panel.control.turbidity[keep], config.span)
    ctrl_red = smooth_series(t, panel.control.redox[keep], config.span)
    try:
        feats = tuple(
            extract_features(
                smooth_series(t, w.turbidity[keep], config.span),
                smooth_series(t, w.redox[keep], config.span),
                ctrl_turb,
                ctrl_red,
                status.time_to_result,
                in_ratio=config.in_ratio,
            )
            for w in panel.wells
        )
    except DegenerateControlError as exc:
        # Readiness fired on noise before the control showed any turbidity.
        log.warning("panel %s: %s; treating as failed", panel.panel_id, exc)
        return PanelFeatures(panel.panel_id, Failed(math.nan), dilutions, (), panel.reference_mic)
    return PanelFeatures(panel.panel_id, status, dilutions, feats, panel.reference_mic)


def labeled_wells(panels: Sequence[PanelFeatures]) -> list[LabeledWell]:
    """Training rows for every ready panel with a known reference MIC."""
    out = []
    for pf in panels:
        if not pf.ready or math.isnan(pf.reference_mic):
            continue
        for d, fv in zip(pf.dilutions, pf.features):
            out.append(LabeledWell(pf.panel_id, d, fv, label_growth(d, pf.reference_mic)))
    return out


def train(
    panels: Sequence[PanelFeatures],
    candidates: Sequence[str] = FEATURE_NAMES,
    *,
    exhaustive_cap: int = 12,
    top_k: int = 10,
    seed: int = 0,
) -> GrowthModel:
    data = TrainingSet.from_wells(labeled_wells(panels))
    return train_growth_model(data, candidates, exhaustive_cap=exhaustive_cap, top_k=top_k, seed=seed)


def predict_panel(
    model: GrowthModel,
    pf: PanelFeatures,
    weights: LossWeights = LossWeights(),
    threshold: float = 0.9,
) -> PanelPrediction:
    if not pf.ready:
        return PanelPrediction(pf.panel_id, pf.status, pf.dilutions)
    values = np.array([fv.values for fv in pf.features])
    columns = {name: values[:, i] for i, name in enumerate(FEATURE_NAMES)}
    pi = np.atleast_1d(np.asarray(model.predict(columns), dtype=float))
    if len(pi) == 1 and len(pf.features) > 1:
        pi = np.full(len(pf.features), pi[0])
    dist = mic_distribution(pi, pf.dilutions)
    return PanelPrediction(pf.panel_id, pf.status, pf.dilutions, pi, dist, call_mic(dist, weights, threshold))


@dataclass(frozen=True)
class PipelineConfig:
    simulation: SimulationConfig = SimulationConfig()
    features: FeatureConfig = FeatureConfig()
    candidate_features: tuple[str, ...] = FEATURE_NAMES
    exhaustive_cap: int = 12
    top_k: int = 10
    weights: LossWeights = LossWeights()
    call_threshold: float = 0.9
    train_fraction: float = 0.65
    split_seed: int = 0
    breakpoints: SirBreakpoints | None = None


@dataclass(frozen=True)
class PipelineResult:
    model: GrowthModel
    train_ids: tuple[str, ...]
    predictions: tuple[PanelPrediction, ...]
    modal: AgreementReport
    dt: AgreementReport
    modal_categorical: CategoricalReport | None = None
    dt_categorical: CategoricalReport | None = None
    references: dict = field(default_factory=dict)


def agreement_calls(predictions: Sequence[PanelPrediction], references: dict, which: str):
    """(estimate, reference) bin pairs for ready panels; ``which`` is 'modal' or 'dt'."""
    calls = []
    for p in predictions:
        if not p.ready or p.panel_id not in references:
            continue
        est = p.call.modal_index if which == "modal" else p.call.dt_index
        calls.append((est, mic_to_bin(references[p.panel_id], p.dilutions)))
    return calls


def run_pipeline(config: PipelineConfig, panels: Sequence[RawPanel] | None = None) -> PipelineResult:
    """Simulate (unless ``panels`` given), split, train, predict and evaluate."""
    if panels is None:
        panels, _ = simulate_dataset(config.simulation)
    train_panels, valid_panels = split_panels(panels, config.train_fraction, config.split_seed)
    train_feats = [extract_panel(p, config.features) for p in train_panels]
    model = train(
        train_feats,
        config.candidate_features,
        exhaustive_cap=config.exhaustive_cap,
        top_k=config.top_k,
        seed=config.split_seed,
    )
    preds = tuple(
        predict_panel(model, extract_panel(p, config.features), config.weights, config.call_threshold)
        for p in valid_panels
    )
    refs = {p.panel_id: p.reference_mic for p in valid_panels}
    modal_calls = agreement_calls(preds, refs, "modal")
    dt_calls = agreement_calls(preds, refs, "dt")
    cat_m = cat_d = None
    if config.breakpoints is not None:
        grid = valid_panels[0].dilutions
        cat_m = categorical_agreement(modal_calls, config.breakpoints, grid)
        cat_d = categorical_agreement(dt_calls, config.breakpoints, grid)
    return PipelineResult(
        model=model,
        train_ids=tuple(p.panel_id for p in train_panels),
        predictions=preds,
        modal=essential_agreement(modal_calls),
        dt=essential_agreement(dt_calls),
        modal_categorical=cat_m,
        dt_categorical=cat_d,
        references=refs,
    )
