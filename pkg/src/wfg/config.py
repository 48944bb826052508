"""Run configuration: JSON schema validation and construction of pipeline objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ConfigError, GridError
from .grid import AxisSpec, Direction, SampledSignal
from .metaplectic import SymplecticWord, apply_unitary
from .synthesis import CORPUS, PrescribedSpec, max_k, standard_signal, synth_prescribed
from .wavefront import EstimatorParams

DEFAULT_AXIS = {"L": 76.0, "n": 4096, "d": 1}


class SchemaError(ConfigError):
    """A document failed JSON schema validation."""


def load_schema(name: str) -> dict:
    text = resources.files("wfg").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def _where(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(doc, schema_name: str, source: str = "document") -> None:
    """Raise SchemaError listing every violation with its field path."""
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{source}: field {_where(e)}: {e.message}" for e in errors]
        raise SchemaError("\n".join(lines))


def parse_json(text: str, source: str = "document"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


@dataclass
class RunConfig:
    axis: AxisSpec
    signals: list = field(default_factory=list)  # (kind, params) pairs
    prescribed: dict | None = None
    word: SymplecticWord = field(default_factory=SymplecticWord)
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    out: str = "wfg-out"
    seed: int = 0
    threads: int | None = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, source: str = "config") -> "RunConfig":
        validate(data, "run_config", source)
        ax = {**DEFAULT_AXIS, **data.get("axis", {})}
        try:
            axis = AxisSpec(float(ax["L"]), int(ax["n"]), int(ax.get("d", 1)))
        except GridError as exc:
            raise ConfigError(f"{source}: axis: {exc}") from None
        signals = [(s["kind"], dict(s.get("params", {}))) for s in data.get("signals", [])]
        if data.get("corpus"):
            signals = list(CORPUS) + signals
        try:
            est = EstimatorParams.from_dict(data.get("estimator", {}))
        except TypeError as exc:
            raise ConfigError(f"{source}: estimator: {exc}") from None
        return cls(
            axis,
            signals,
            data.get("prescribed"),
            SymplecticWord.parse(data.get("word", [])),
            est,
            data.get("out", "wfg-out"),
            int(data.get("seed", 0)),
            data.get("threads"),
            copy.deepcopy(data),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_dict(parse_json(text, str(path)), str(path))

    def snapshot(self) -> dict:
        """Canonical, fully resolved form of the configuration."""
        return {
            "axis": self.axis.to_dict(),
            "signals": [{"kind": k, "params": p} for k, p in self.signals],
            "prescribed": self.prescribed,
            "word": self.word.to_list(),
            "estimator": self.estimator.to_dict(),
            "seed": self.seed,
        }

    def prescribed_spec(self) -> PrescribedSpec | None:
        p = self.prescribed
        if p is None:
            return None
        if "directions" in p:
            dirs = tuple(Direction.from_vector(v) for v in p["directions"])
        elif "random" in p:
            rng = np.random.default_rng(self.seed)
            angles = np.sort(rng.uniform(0.0, 360.0, int(p["random"])))
            dirs = tuple(Direction.from_angle(float(a)) for a in angles)
        else:
            dirs = tuple(Direction.from_angle(a) for a in p.get("angles", []))
        if "K_max" in p:
            k_max = int(p["K_max"])
        else:
            k_max = max(2, min((max_k(self.axis, d) for d in dirs), default=2))
        return PrescribedSpec(dirs, self.axis, k_max, p.get("J_max"))

    def build_signals(self) -> list[SampledSignal]:
        out = [standard_signal(k, p, self.axis) for k, p in self.signals]
        spec = self.prescribed_spec()
        if spec is not None:
            out.append(synth_prescribed(spec))
        if len(self.word):
            out = [apply_unitary(self.word, u) for u in out]
        return out
