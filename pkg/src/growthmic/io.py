"""File formats: dataset/reference/feature/prediction CSVs and the model JSON.

Floats in CSV files are written with ``repr`` (shortest exact round trip);
the model JSON uses canonical key order and 17 significant digits so that
load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import FEATURE_NAMES, FeatureVector
from .glm import LogisticFit, PolyBasis
from .mic import MicDistribution
from .pipeline import FeatureConfig, PanelFeatures, PanelPrediction
from .readiness import Failed, Ready, ReadinessParams
from .select import GrowthModel, ModelScore, SearchResult
from .sim import ABOVE_GRID, RawPanel, Well

__all__ = [
    "DataFormatError",
    "SchemaVersionError",
    "SCHEMA_VERSION",
    "atomic_write",
    "write_dataset",
    "read_dataset",
    "write_references",
    "read_references",
    "write_json",
    "write_features",
    "read_features",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
    "write_search_report",
    "write_predictions",
    "read_predictions",
]

SCHEMA_VERSION = 1
ABOVE_GRID_TOKEN = ">MAX"
DATASET_HEADER = ["panel_id", "well", "dilution", "is_control", "time_hours", "turbidity", "redox"]


class DataFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)
        self.path = path
        self.line = line


class SchemaVersionError(ValueError):
    pass


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x) and x > 0:
        return ABOVE_GRID_TOKEN
    return repr(x)


def _mic_value(text: str, path, line) -> float:
    text = text.strip()
    if text == ABOVE_GRID_TOKEN:
        return ABOVE_GRID
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"bad MIC value {text!r}", path, line) from None
    if not value > 0 or math.isinf(value):
        raise DataFormatError(f"MIC must be positive and finite or {ABOVE_GRID_TOKEN}", path, line)
    return value


def _read_rows(path, header: Sequence[str] | None = None, prefix: bool = False):
    """Yield ``(line_number, row_dict)``; check the header when given."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", path, 1) from None
        if header is not None:
            ok = found[: len(header)] == list(header) if prefix else found == list(header)
            if not ok:
                raise DataFormatError(f"expected header {','.join(header)}", path, 1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(found):
                raise DataFormatError(f"expected {len(found)} fields, got {len(row)}", path, line)
            yield line, dict(zip(found, row))


def _float(row, key, path, line) -> float:
    try:
        value = float(row[key])
    except ValueError:
        raise DataFormatError(f"field {key!r}: not a number: {row[key]!r}", path, line) from None
    if not math.isfinite(value):
        raise DataFormatError(f"field {key!r}: non-finite value", path, line)
    return value


def _int(row, key, path, line) -> int:
    try:
        return int(row[key])
    except ValueError:
        raise DataFormatError(f"field {key!r}: not an integer: {row[key]!r}", path, line) from None


# -- datasets ---------------------------------------------------------------


def write_dataset(panels: Sequence[RawPanel], path) -> None:
    """One row per sample; the control is well 0 with ``is_control=1``."""

    def rows():
        for p in panels:
            for k, w in enumerate((p.control,) + tuple(p.wells)):
                for t, turb, red in zip(p.times, w.turbidity, w.redox):
                    yield [p.panel_id, k, _fmt(w.dilution), int(k == 0), _fmt(t), _fmt(turb), _fmt(red)]

    atomic_write(path, _csv_text(DATASET_HEADER, rows()))


def write_references(panels: Sequence[RawPanel], path) -> None:
    atomic_write(
        path,
        _csv_text(["panel_id", "reference_mic"], ([p.panel_id, _fmt(p.reference_mic)] for p in panels)),
    )


def read_references(path) -> dict[str, float]:
    out = {}
    for line, row in _read_rows(path, ["panel_id", "reference_mic"]):
        if row["panel_id"] in out:
            raise DataFormatError(f"duplicate panel {row['panel_id']!r}", path, line)
        out[row["panel_id"]] = _mic_value(row["reference_mic"], path, line)
    return out


def read_dataset(path, references: Mapping[str, float] | None = None) -> list[RawPanel]:
    """Parse a dataset CSV into panels (in file order of first appearance).

    Panels absent from ``references`` get a NaN reference MIC.
    """
    samples = defaultdict(lambda: defaultdict(list))
    meta = {}
    first_line = {}
    for line, row in _read_rows(path, DATASET_HEADER):
        pid = row["panel_id"]
        first_line.setdefault(pid, line)
        well = _int(row, "well", path, line)
        is_control = _int(row, "is_control", path, line)
        if is_control not in (0, 1):
            raise DataFormatError("is_control must be 0 or 1", path, line)
        dilution = _float(row, "dilution", path, line)
        key = (pid, well)
        if key in meta and meta[key] != (dilution, is_control):
            raise DataFormatError(f"inconsistent well metadata for {pid} well {well}", path, line)
        meta[key] = (dilution, is_control)
        samples[pid][well].append(
            (
                _float(row, "time_hours", path, line),
                _float(row, "turbidity", path, line),
                _float(row, "redox", path, line),
            )
        )

    panels = []
    for pid, wells in samples.items():
        line = first_line[pid]
        controls = [w for w in wells if meta[(pid, w)][1] == 1]
        if len(controls) != 1:
            raise DataFormatError(
                f"panel {pid!r} has {len(controls)} control wells (need exactly 1)", path, line
            )
        series = {}
        times = None
        for w, rows in wells.items():
            arr = np.array(rows)
            if times is None:
                times = arr[:, 0]
            elif len(arr) != len(times) or np.any(arr[:, 0] != times):
                raise DataFormatError(f"panel {pid!r}: wells do not share a time grid", path, line)
            series[w] = arr
        if np.any(np.diff(times) <= 0):
            raise DataFormatError(f"panel {pid!r}: times not strictly increasing", path, line)
        ctrl = series[controls[0]]
        tests = sorted((meta[(pid, w)][0], w) for w in wells if w != controls[0])
        test_wells = tuple(Well(d, series[w][:, 1], series[w][:, 2]) for d, w in tests)
        ref = math.nan if references is None else references.get(pid, math.nan)
        panels.append(
            RawPanel(pid, times, test_wells, Well(0.0, ctrl[:, 1], ctrl[:, 2]), ref)
        )
    return panels


def _canonical_json(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_canonical_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple)) for v in obj):
            return "[" + ", ".join(_canonical_json(v) for v in obj) + "]"
        items = [inner + _canonical_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite float in JSON output")
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(obj, path) -> None:
    atomic_write(path, _canonical_json(obj) + "\n")


# -- features ---------------------------------------------------------------

FEATURE_HEADER = ["panel_id", "well", "dilution", "reference_mic", "label", "status", "t_result"]


def write_features(panels: Sequence[PanelFeatures], path) -> None:
    """One row per test well of a ready panel; unready panels get one row with blank features."""

    def rows():
        for pf in panels:
            status = _status_name(pf.status)
            ref = "" if math.isnan(pf.reference_mic) else _fmt(pf.reference_mic)
            if not pf.ready:
                yield [pf.panel_id, "", "", ref, "", status, ""] + [""] * len(FEATURE_NAMES)
                continue
            for k, (d, fv) in enumerate(zip(pf.dilutions, pf.features), start=1):
                label = "" if math.isnan(pf.reference_mic) else int(d < pf.reference_mic)
                yield (
                    [pf.panel_id, k, _fmt(d), ref, label, status, _fmt(pf.t_result)]
                    + [_fmt(v) for v in fv.values]
                )

    atomic_write(path, _csv_text(FEATURE_HEADER + list(FEATURE_NAMES), rows()))


def _status_name(status) -> str:
    if isinstance(status, Ready):
        return f"ready_{status.growth_class}"
    return type(status).__name__.lower()


def read_features(path) -> list[PanelFeatures]:
    groups: dict[str, list] = {}
    for line, row in _read_rows(path, FEATURE_HEADER + list(FEATURE_NAMES)):
        groups.setdefault(row["panel_id"], []).append((line, row))
    out = []
    for pid, rows in groups.items():
        line, first = rows[0]
        ref = math.nan if first["reference_mic"] == "" else _mic_value(first["reference_mic"], path, line)
        status_text = first["status"]
        if not status_text.startswith("ready_"):
            out.append(PanelFeatures(pid, Failed(math.nan), (), (), ref))
            continue
        t_result = _float(first, "t_result", path, line)
        status = Ready(t_result, status_text[len("ready_") :])
        rows = sorted(rows, key=lambda lr: _int(lr[1], "well", path, lr[0]))
        dilutions = tuple(_float(r, "dilution", path, ln) for ln, r in rows)
        feats = tuple(
            FeatureVector([_float(r, name, path, ln) for name in FEATURE_NAMES]) for ln, r in rows
        )
        out.append(PanelFeatures(pid, status, dilutions, feats, ref))
    return out


# -- models -----------------------------------------------------------------


def model_to_json(
    model: GrowthModel, dilutions: Sequence[float], feature_config: FeatureConfig
) -> dict:
    rp = feature_config.readiness
    return {
        "schema_version": SCHEMA_VERSION,
        "dilution_grid": [float(d) for d in dilutions],
        "term_list": [[f, int(k)] for f, k in model.basis.terms],
        "basis_parameters": model.basis.to_dict(),
        "coefficients": [float(c) for c in model.fit.coef],
        "training_n": int(model.fit.n),
        "loglik": float(model.fit.loglik),
        "bic_score": float(model.score.bic),
        "posterior_prob": float(model.score.posterior),
        "separated": bool(model.fit.separated),
        "feature_config": {
            "span": float(feature_config.span),
            "in_ratio": feature_config.in_ratio,
            "readiness": {
                "low_redox": float(rp.low_redox),
                "high_redox": float(rp.high_redox),
                "max_hours": float(rp.max_hours),
                "fast_cutoff_hours": float(rp.fast_cutoff_hours),
            },
        },
    }


def model_from_json(data: Mapping) -> tuple[GrowthModel, tuple[float, ...], FeatureConfig]:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"model schema_version {version!r}; this build reads {SCHEMA_VERSION}")
    try:
        basis = PolyBasis.from_dict(data["basis_parameters"])
        terms = tuple((str(f), int(k)) for f, k in data["term_list"])
        if terms != basis.terms:
            raise ValueError("term_list disagrees with basis_parameters")
        coef = np.array([float(c) for c in data["coefficients"]])
        if len(coef) != len(terms) + 1:
            raise ValueError("coefficient count must be number of terms + 1")
        n = int(data["training_n"])
        loglik = float(data["loglik"])
        fit = LogisticFit(coef, loglik, n, terms, separated=bool(data.get("separated", False)))
        score = ModelScore(
            tuple((fb.feature, fb.degree) for fb in basis.features),
            loglik,
            len(coef),
            n,
            float(data.get("posterior_prob", float("nan"))),
            fit.separated,
        )
        fc = data["feature_config"]
        feature_config = FeatureConfig(
            float(fc["span"]), fc["in_ratio"], ReadinessParams(**{k: float(v) for k, v in fc["readiness"].items()})
        )
        dilutions = tuple(float(d) for d in data["dilution_grid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid model file: {exc}") from exc
    return GrowthModel(basis, fit, score), dilutions, feature_config


def save_model(model: GrowthModel, dilutions, feature_config: FeatureConfig, path) -> None:
    write_json(model_to_json(model, dilutions, feature_config), path)


def load_model(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    return model_from_json(data)


def _terms_text(spec) -> str:
    return ";".join(f"{f}^{d}" for f, d in spec) or "(intercept)"


def write_search_report(stages: Mapping[str, SearchResult], path) -> None:
    header = ["stage", "rank", "terms", "loglik", "d", "n", "bic_score", "posterior_prob", "separated"]
    rows = []
    for stage, result in stages.items():
        if result is None:
            continue
        for rank, m in enumerate(result.ranked, start=1):
            rows.append(
                [stage, rank, _terms_text(m.spec), _fmt(m.loglik), m.d, m.n, _fmt(m.bic), _fmt(m.posterior), int(m.separated)]
            )
    atomic_write(path, _csv_text(header, rows))


# -- predictions ------------------------------------------------------------


def _prediction_header(n_bins: int) -> list[str]:
    return (
        ["panel_id", "status", "t_result", "valid_sequence_prob", "modal_index", "modal_dilution",
         "modal_prob", "dt_index", "dt_dilution", "dt_expected_loss", "window_prob", "decision"]
        + [f"rho_{j}" for j in range(1, n_bins + 1)]
        + [f"loss_{j}" for j in range(1, n_bins + 1)]
        + [f"pi_{j}" for j in range(1, n_bins)]
        + [f"dilution_{j}" for j in range(1, n_bins)]
    )  # fmt: skip


def write_predictions(predictions: Sequence[PanelPrediction], path, weights=None) -> None:
    from .mic import LossWeights, expected_losses

    weights = weights or LossWeights()
    n_bins = max((len(p.dilutions) + 1 for p in predictions if p.dilutions), default=1)
    header = _prediction_header(n_bins)

    def rows():
        for p in predictions:
            if not p.ready:
                yield [p.panel_id, _status_name(p.status)] + [""] * (len(header) - 2)
                continue
            d, c = p.distribution, p.call
            yield (
                [p.panel_id, _status_name(p.status), _fmt(p.status.time_to_result),
                 _fmt(d.valid_sequence_prob), c.modal_index, _fmt(d.dilution(c.modal_index)),
                 _fmt(c.modal_prob), c.dt_index, _fmt(d.dilution(c.dt_index)),
                 _fmt(c.dt_expected_loss), _fmt(c.window_prob), c.call_decision.value]
                + [_fmt(r) for r in d.rho]
                + [_fmt(v) for v in expected_losses(d, weights)]
                + [_fmt(v) for v in p.pi]
                + [_fmt(v) for v in p.dilutions]
            )  # fmt: skip

    atomic_write(path, _csv_text(header, rows()))


def read_predictions(path) -> list[dict]:
    """Rows as dicts with ``distribution`` rebuilt for ready panels."""
    out = []
    for line, row in _read_rows(path, ["panel_id", "status"], prefix=True):
        rec = {"panel_id": row["panel_id"], "status": row["status"], "line": line}
        if row["status"].startswith("ready_"):
            rho = []
            j = 1
            while f"rho_{j}" in row and row[f"rho_{j}"] != "":
                rho.append(_float(row, f"rho_{j}", path, line))
                j += 1
            grid = tuple(_float(row, f"dilution_{k}", path, line) for k in range(1, len(rho)))
            rec.update(
                modal_index=_int(row, "modal_index", path, line),
                dt_index=_int(row, "dt_index", path, line),
                decision=row["decision"],
                distribution=MicDistribution(
                    np.array(rho), _float(row, "valid_sequence_prob", path, line), grid
                ),
            )
        out.append(rec)
    return out
