"""Run configuration: flat key=value files with sections, CLI overrides.

The grammar is deliberately small and diff-friendly::

    # comment
    [section]
    key = value

Sections and keys are fixed (unknown ones are rejected); every command
echoes its effective configuration into its outputs so a run is reproducible
from the config file alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .evaluation import PipelineConfig, SplitProtocol
from .projection import DEFAULT_OUTPUT_DIM, EPSILON_REG_DEFAULT
from .spectral import DEFAULT_BASELINE_DIM, DEFAULT_DESCRIPTOR_DIM
from .svm import DEFAULT_C_GRID, TrainConfig


@dataclass
class RunConfig:
    """Flat record of every knob a command can use."""

    # paths
    mesh_dir: str = ""
    manifest: str = ""
    cache: str = ""
    out: str = ""
    # descriptor
    kind: str = "gps"
    p: int = DEFAULT_DESCRIPTOR_DIM
    baseline_p: int = DEFAULT_BASELINE_DIM
    # coding
    method: str = "nnls"
    ridge_lambda: float | None = None
    # projection
    d: int = DEFAULT_OUTPUT_DIM
    epsilon_reg: float = EPSILON_REG_DEFAULT
    # svm
    c_grid: tuple = DEFAULT_C_GRID
    svm_tolerance: float = 1e-4
    svm_max_passes: int = 1000
    svm_seed: int = 0
    # protocol
    protocol_mode: str = "fraction"
    train_fraction: float = 0.7
    folds: int = 10
    repetitions: int = 100
    seed: int = 0
    stratified: bool = True
    # pipeline
    variant: str = "crp"

    def pipeline_config(self):
        return PipelineConfig(
            variant=self.variant,
            coding_method=self.method,
            ridge_lambda=self.ridge_lambda,
            d=self.d,
            epsilon_reg=self.epsilon_reg,
            baseline_dim=self.baseline_p,
            svm=TrainConfig(
                c=self.c_grid[0],
                tolerance=self.svm_tolerance,
                max_passes=self.svm_max_passes,
                seed=self.svm_seed,
            ),
            c_grid=self.c_grid,
        )

    def split_protocol(self):
        return SplitProtocol(
            mode=self.protocol_mode,
            train_fraction=self.train_fraction,
            folds=self.folds,
            repetitions=self.repetitions,
            seed=self.seed,
            stratified=self.stratified,
        )


# section -> key -> RunConfig field name
_SCHEMA = {
    "paths": {
        "mesh_dir": "mesh_dir",
        "manifest": "manifest",
        "cache": "cache",
        "out": "out",
    },
    "descriptor": {
        "kind": "kind",
        "p": "p",
        "baseline_p": "baseline_p",
    },
    "coding": {
        "method": "method",
        "lambda": "ridge_lambda",
    },
    "projection": {
        "d": "d",
        "epsilon_reg": "epsilon_reg",
    },
    "svm": {
        "c_grid": "c_grid",
        "tolerance": "svm_tolerance",
        "max_passes": "svm_max_passes",
        "seed": "svm_seed",
    },
    "protocol": {
        "mode": "protocol_mode",
        "train_fraction": "train_fraction",
        "folds": "folds",
        "repetitions": "repetitions",
        "seed": "seed",
        "stratified": "stratified",
    },
    "pipeline": {
        "variant": "variant",
    },
}

_FIELD_SECTION = {
    field_name: (section, key)
    for section, keys in _SCHEMA.items()
    for key, field_name in keys.items()
}


class ConfigError(ValueError):
    """Unparseable or unknown configuration input (a usage error)."""


def _convert(field_name, raw):
    kinds = {f.name: f for f in fields(RunConfig)}
    raw = raw.strip()
    if field_name in ("p", "baseline_p", "d", "folds", "repetitions",
                      "seed", "svm_seed", "svm_max_passes"):
        return int(raw)
    if field_name in ("train_fraction", "epsilon_reg", "svm_tolerance"):
        return float(raw)
    if field_name == "ridge_lambda":
        return None if raw.lower() in ("auto", "none", "") else float(raw)
    if field_name == "stratified":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"boolean expected for 'stratified', got {raw!r}")
    if field_name == "c_grid":
        grid = tuple(float(tok) for tok in raw.replace(",", " ").split())
        if not grid:
            raise ConfigError("c_grid must list at least one value")
        return grid
    assert field_name in kinds, field_name
    return raw


def parse_config_text(text, base=None):
    """Parse config text over ``base`` (default :class:`RunConfig`)."""
    cfg = base if base is not None else RunConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        if cut >= 0:
            raw = raw[:cut]
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        field_name = _SCHEMA[section][key]
        try:
            setattr(cfg, field_name, _convert(field_name, value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return cfg


def load_config(path, base=None):
    with open(path, encoding="utf-8") as handle:
        return parse_config_text(handle.read(), base=base)


def render_config(cfg):
    """Serialize back to the key=value grammar (the effective-config echo)."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, field_name in keys.items():
            value = getattr(cfg, field_name)
            if field_name == "c_grid":
                value = ",".join(repr(v) for v in value)
            elif field_name == "ridge_lambda":
                value = "auto" if value is None else repr(value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
