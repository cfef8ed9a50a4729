"""Experiment configuration: a sectioned key = value format with strict
validation and line-numbered errors.

Example::

    [model]
    nx = 24
    ny = 24
    t = 1
    t_prime = 0.1
    v = 1
    phi = pi/2
    bc_x = dirichlet
    bc_y = dirichlet

    [pipeline]
    gap_threshold = 0.25

    [outputs]
    dir = out/run
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import ConfigTypeError, MissingKey, UnknownKey
from .lattice import BoundaryCondition

REQUIRED_MODEL_KEYS = ("nx", "ny", "t", "t_prime", "v", "phi")
MODEL_KEYS = REQUIRED_MODEL_KEYS + ("bc_x", "bc_y", "sigma2", "seed")
PIPELINE_KEYS = ("position", "gap_threshold", "manual_merges", "fermi_level")
OUTPUT_KEYS = ("dir", "emit")
EMIT_TOKENS = ("gwf_vectors", "amplitude_maps")

_PI_RE = re.compile(r"^(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


@dataclass
class ModelConfig:
    nx: int
    ny: int
    t: float
    t_prime: float
    v: float
    phi: float
    bc_x: BoundaryCondition = BoundaryCondition.DIRICHLET
    bc_y: BoundaryCondition = BoundaryCondition.DIRICHLET
    sigma2: float = 0.0
    seed: int = 0


@dataclass
class PipelineConfig:
    position: str = "standard"
    position_file: str | None = None
    gap_threshold: float | None = 0.25
    manual_merges: tuple = ()
    fermi_level: float = 0.0


@dataclass
class OutputConfig:
    dir: str = "out"
    emit: tuple = ("gwf_vectors",)


@dataclass
class ExperimentConfig:
    model: ModelConfig
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)


def parse_angle(text: str, line_no: int = 0):
    """Floats plus the forms 'pi', 'pi/2', '0.5pi', '-3*pi/4'."""
    s = text.strip().lower()
    try:
        return float(s)
    except ValueError:
        pass
    m = _PI_RE.match(s)
    if m:
        coeff = m.group(1)
        num = float(coeff) if coeff not in ("", "-") else (-1.0 if coeff == "-" else 1.0)
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    raise ConfigTypeError(f"line {line_no}: cannot parse angle '{text}'")


def _to_int(key, text, line_no, minimum=None):
    try:
        value = int(text)
    except ValueError:
        raise ConfigTypeError(f"line {line_no}: {key} expects an integer, got '{text}'") from None
    if minimum is not None and value < minimum:
        raise ConfigTypeError(f"line {line_no}: {key} must be >= {minimum}, got {value}")
    return value


def _to_float(key, text, line_no):
    try:
        return float(text)
    except ValueError:
        raise ConfigTypeError(f"line {line_no}: {key} expects a number, got '{text}'") from None


def _to_bc(key, text, line_no):
    try:
        return BoundaryCondition(text.strip().lower())
    except ValueError:
        raise ConfigTypeError(
            f"line {line_no}: {key} must be 'periodic' or 'dirichlet', got '{text}'") from None


def _to_merges(text, line_no):
    merges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.match(r"^(\d+)\s*-\s*(\d+)$", part)
        if not m:
            raise ConfigTypeError(
                f"line {line_no}: manual_merges expects 'first-last' ranges, got '{part}'")
        merges.append((int(m.group(1)), int(m.group(2))))
    return tuple(merges)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate configuration text.

    Unknown sections or keys are rejected; types are checked with the
    offending line number before any computation starts.
    """
    sections: dict[str, dict[str, tuple[str, int]]] = {"model": {}, "pipeline": {}, "outputs": {}}
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise UnknownKey(f"line {line_no}: unknown section [{name}]")
            section = name
            continue
        if "=" not in line:
            raise ConfigTypeError(f"line {line_no}: expected 'key = value', got '{raw.strip()}'")
        if section is None:
            raise UnknownKey(f"line {line_no}: key outside any section")
        key, value = (part.strip() for part in line.split("=", 1))
        allowed = {"model": MODEL_KEYS, "pipeline": PIPELINE_KEYS, "outputs": OUTPUT_KEYS}[section]
        if key not in allowed:
            raise UnknownKey(f"line {line_no}: unknown key {section}.{key}")
        if key in sections[section]:
            raise ConfigTypeError(f"line {line_no}: duplicate key {section}.{key}")
        sections[section][key] = (value, line_no)

    model_raw = sections["model"]
    for key in REQUIRED_MODEL_KEYS:
        if key not in model_raw:
            raise MissingKey(f"missing required key model.{key}")

    def model_val(key, conv, default=None, **kw):
        if key not in model_raw:
            return default
        value, ln = model_raw[key]
        return conv(f"model.{key}", value, ln, **kw)

    model = ModelConfig(
        nx=model_val("nx", _to_int, minimum=1),
        ny=model_val("ny", _to_int, minimum=1),
        t=model_val("t", _to_float),
        t_prime=model_val("t_prime", _to_float),
        v=model_val("v", _to_float),
        phi=parse_angle(*model_raw["phi"]),
        bc_x=model_val("bc_x", _to_bc, BoundaryCondition.DIRICHLET),
        bc_y=model_val("bc_y", _to_bc, BoundaryCondition.DIRICHLET),
        sigma2=model_val("sigma2", _to_float, 0.0),
        seed=model_val("seed", _to_int, 0, minimum=0),
    )
    if model.sigma2 < 0:
        _, ln = model_raw["sigma2"]
        raise ConfigTypeError(f"line {ln}: model.sigma2 must be nonnegative")

    pipe = PipelineConfig()
    pipe_raw = sections["pipeline"]
    if "position" in pipe_raw:
        value, ln = pipe_raw["position"]
        v = value.strip()
        if v in ("standard", "rotated"):
            pipe.position = v
        elif v.startswith("custom_file:"):
            pipe.position = "custom_file"
            pipe.position_file = v.split(":", 1)[1].strip()
            if not pipe.position_file:
                raise ConfigTypeError(f"line {ln}: custom_file position needs a path")
        else:
            raise ConfigTypeError(
                f"line {ln}: position must be standard, rotated, or custom_file:<path>")
    if "gap_threshold" in pipe_raw:
        value, ln = pipe_raw["gap_threshold"]
        if value.strip().lower() == "auto":
            pipe.gap_threshold = None
        else:
            pipe.gap_threshold = _to_float("pipeline.gap_threshold", value, ln)
            if pipe.gap_threshold <= 0:
                raise ConfigTypeError(f"line {ln}: gap_threshold must be positive (or 'auto')")
    if "manual_merges" in pipe_raw:
        pipe.manual_merges = _to_merges(*pipe_raw["manual_merges"])
    if "fermi_level" in pipe_raw:
        value, ln = pipe_raw["fermi_level"]
        pipe.fermi_level = _to_float("pipeline.fermi_level", value, ln)

    out = OutputConfig()
    out_raw = sections["outputs"]
    if "dir" in out_raw:
        out.dir = out_raw["dir"][0].strip()
    if "emit" in out_raw:
        value, ln = out_raw["emit"]
        tokens = tuple(tok.strip() for tok in value.split(",") if tok.strip())
        for tok in tokens:
            if tok not in EMIT_TOKENS:
                raise UnknownKey(f"line {ln}: unknown emit flag '{tok}'")
        out.emit = tokens

    return ExperimentConfig(model, pipe, out)


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_echo(cfg: ExperimentConfig) -> dict:
    """JSON-serializable snapshot for run manifests."""
    return {
        "model": {
            "nx": cfg.model.nx, "ny": cfg.model.ny, "t": cfg.model.t,
            "t_prime": cfg.model.t_prime, "v": cfg.model.v, "phi": cfg.model.phi,
            "bc_x": cfg.model.bc_x.value, "bc_y": cfg.model.bc_y.value,
            "sigma2": cfg.model.sigma2, "seed": cfg.model.seed,
        },
        "pipeline": {
            "position": cfg.pipeline.position,
            "position_file": cfg.pipeline.position_file,
            "gap_threshold": cfg.pipeline.gap_threshold,
            "manual_merges": list(map(list, cfg.pipeline.manual_merges)),
            "fermi_level": cfg.pipeline.fermi_level,
        },
        "outputs": {"dir": cfg.outputs.dir, "emit": list(cfg.outputs.emit)},
    }
