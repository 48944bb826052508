"""Persistence: signal files, result bundles and CSV tables, all written atomically."""

from __future__ import annotations

import base64
import csv
import io
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SchemaError, parse_json, validate
from .errors import GridError, InvalidSignal
from .grid import AxisSpec, SampledSignal
from .wavefront import AgreementMatrix, WaveFrontReport

ENCODING = "base64-float64-le-interleaved"


def tool_version() -> str:
    from . import __version__

    return __version__


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_") or "signal"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# signals


def signal_to_dict(u: SampledSignal) -> dict:
    vals = np.ascontiguousarray(u.values, dtype="<c16")
    return {
        "format": "wfg-signal",
        "version": 1,
        "d": u.axis.d,
        "L": u.axis.half_width,
        "n": u.axis.n,
        "label": u.label,
        "boundary_mass": float(u.boundary_mass),
        "meta": _jsonable(u.meta),
        "encoding": ENCODING,
        "payload": base64.b64encode(vals.view("<f8").tobytes()).decode("ascii"),
    }


def signal_from_dict(doc: dict, source: str = "signal") -> SampledSignal:
    try:
        validate(doc, "signal", source)
    except SchemaError as exc:
        raise InvalidSignal(str(exc)) from None
    try:
        axis = AxisSpec(float(doc["L"]), int(doc["n"]), int(doc["d"]))
    except GridError as exc:
        raise InvalidSignal(f"{source}: {exc}") from None
    try:
        raw = base64.b64decode(doc["payload"], validate=True)
    except ValueError:
        raise InvalidSignal(f"{source}: payload is not valid base64") from None
    expect = 16 * int(np.prod(axis.shape))
    if len(raw) != expect:
        raise InvalidSignal(f"{source}: payload holds {len(raw)} bytes, expected {expect}")
    vals = np.frombuffer(raw, dtype="<f8").view("<c16").reshape(axis.shape).astype(complex)
    if not np.all(np.isfinite(vals)):
        raise InvalidSignal(f"{source}: payload contains non-finite samples")
    return SampledSignal(axis, vals, doc["label"], dict(doc.get("meta", {})))


def write_signal(path, u: SampledSignal) -> Path:
    return atomic_write(path, canonical_json(signal_to_dict(u)))


def read_signal(path) -> SampledSignal:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise InvalidSignal(f"{path}: not a UTF-8 JSON document") from None
    try:
        doc = parse_json(text, str(path))
    except SchemaError as exc:
        raise InvalidSignal(str(exc)) from None
    return signal_from_dict(doc, str(path))


# ---------------------------------------------------------------------------
# result bundles


@dataclass
class ResultBundle:
    config: dict
    reports: list = field(default_factory=list)
    agreements: list = field(default_factory=list)  # (label_a, label_b, AgreementMatrix)
    timing: dict = field(default_factory=dict)
    version: str = field(default_factory=tool_version)

    def to_dict(self, timing: bool = True) -> dict:
        doc = {
            "format": "wfg-bundle",
            "version": 1,
            "tool_version": self.version,
            "config": _jsonable(self.config),
            "reports": [_jsonable(r.to_dict()) for r in self.reports],
            "agreements": [{"a": a, "b": b, "matrix": m.to_dict()} for a, b, m in self.agreements],
        }
        if timing:
            doc["timing"] = dict(self.timing)
        return doc

    @classmethod
    def from_dict(cls, doc: dict, source: str = "bundle") -> "ResultBundle":
        validate(doc, "bundle", source)
        return cls(
            doc["config"],
            [WaveFrontReport.from_dict(r) for r in doc["reports"]],
            [(a["a"], a["b"], AgreementMatrix.from_dict(a["matrix"])) for a in doc["agreements"]],
            dict(doc.get("timing", {})),
            doc["tool_version"],
        )

    def canonical(self) -> str:
        """Byte-stable serialization without timing fields."""
        return canonical_json(self.to_dict(timing=False))


def write_bundle(path, bundle: ResultBundle) -> Path:
    return atomic_write(path, canonical_json(bundle.to_dict()))


def read_bundle(path) -> ResultBundle:
    text = Path(path).read_text(encoding="utf-8")
    return ResultBundle.from_dict(parse_json(text, str(path)), str(path))


# ---------------------------------------------------------------------------
# CSV

REPORT_COLUMNS = ("direction_deg", "abscissa", "sup", "fitted_order", "class")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x: float) -> str:
    return repr(float(x))


def report_rows(report: WaveFrontReport):
    for d in report.directions:
        fit = d.fit
        for a, s in zip(fit.abscissae, fit.sup_values):
            yield (_num(d.angle_deg), _num(a), _num(s), _num(fit.fitted_order), fit.classification.value)


def report_csv(report: WaveFrontReport) -> str:
    return _csv(report_rows(report), REPORT_COLUMNS)


def write_report_csv(path, report: WaveFrontReport) -> Path:
    return atomic_write(path, report_csv(report))


def agreement_csv(m: AgreementMatrix) -> str:
    rows = [
        (sig, _num(ang), ca.value, cb.value, int(ca == cb)) for sig, ang, ca, cb in m.pairs
    ]
    text = _csv(rows, ("signal", "direction_deg", f"class_{m.method_a}", f"class_{m.method_b}", "agree"))
    return text + f"# summary agreement={m.agreement:.6f} indeterminate_fraction={m.indeterminate_fraction:.6f} pairs={len(m.pairs)}\n"
