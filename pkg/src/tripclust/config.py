"""Pipeline configuration and the flat key=value config file format.

Config files hold one ``key = value`` pair per line; blank lines and lines
starting with ``#`` are ignored.  Keys are the :class:`RunConfig` field
names.  Booleans accept true/false, yes/no, on/off, 1/0; optional paths
accept ``none``.  Defaults follow the reference operating point
(h=4, gamma=0.7, r=45, alpha=beta_o=beta_d=0.01, beta_t=0.042).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import get_type_hints

from .corpus import TripSchema
from .dpmm import Hyperparams
from .errors import ValidationError

METRIC_SPACES = ("remapped", "original")

# Parameters the sweep verb may vary (sampler knobs only).
GRID_PARAMS = ("alpha", "beta_o", "beta_d", "beta_t", "r", "max_iter", "k0", "seed")


@dataclass
class RunConfig:
    # inputs
    trips: str | None = None
    hops: str | None = None
    poi: str | None = None
    labels: str | None = None
    out_dir: str = "runs/out"
    # graph preprocessing
    use_graphs: bool = False
    h: int = 4
    gamma: float = 0.7
    # sampler
    alpha: float = 0.01
    beta_o: float = 0.01
    beta_d: float = 0.01
    beta_t: float = 0.042
    r: int = 45
    max_iter: int = 50
    k0: int = 1
    seed: int = 0
    crp_prior: bool = False
    # evaluation
    normalize_docs: bool = False
    weighted_ch: bool = False
    metric_space: str = "remapped"
    # ingestion
    delimiter: str = ","
    n_time_slots: int = 24
    min_trips: int = 1
    passenger_col: str = "passenger_id"
    origin_col: str = "origin"
    destination_col: str = "destination"
    time_col: str = "time"

    def validate(self) -> None:
        if self.use_graphs and not (self.hops and self.poi):
            raise ValidationError("use_graphs requires both the hops and poi matrix paths")
        if self.metric_space not in METRIC_SPACES:
            raise ValidationError(
                f"metric_space must be one of {METRIC_SPACES}, got {self.metric_space!r}"
            )
        if self.k0 < 1:
            raise ValidationError(f"k0 must be >= 1, got {self.k0}")
        self.hyperparams().validate()

    def hyperparams(self, seed: int | None = None) -> Hyperparams:
        return Hyperparams(
            alpha=self.alpha,
            beta_o=self.beta_o,
            beta_d=self.beta_d,
            beta_t=self.beta_t,
            r=self.r,
            max_iter=self.max_iter,
            seed=self.seed if seed is None else seed,
            crp_prior=self.crp_prior,
        )

    def schema(self) -> TripSchema:
        return TripSchema(
            passenger_col=self.passenger_col,
            origin_col=self.origin_col,
            destination_col=self.destination_col,
            time_col=self.time_col,
            delimiter=self.delimiter,
            n_time_slots=self.n_time_slots,
            min_trips=self.min_trips,
        )


_HINTS = get_type_hints(RunConfig)
_FIELDS = {f.name for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    hint = _HINTS[key]
    raw = raw.strip()
    if hint is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValidationError(f"config key {key}: expected a boolean, got {raw!r}")
    if hint is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise ValidationError(f"config key {key}: expected an integer, got {raw!r}") from exc
    if hint is float:
        try:
            return float(raw)
        except ValueError as exc:
            raise ValidationError(f"config key {key}: expected a number, got {raw!r}") from exc
    # str or str | None
    if raw.lower() == "none" or raw == "":
        if hint is str:
            raise ValidationError(f"config key {key} cannot be empty")
        return None
    return raw


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    updates = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line {line_no}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ValidationError(f"config line {line_no}: unknown key {key!r}")
        updates[key] = _parse_value(key, raw)
    return replace(base or RunConfig(), **updates)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def write_config(config: RunConfig, path) -> None:
    def fmt(value) -> str:
        if value is None:
            return "none"
        if isinstance(value, bool):
            return "true" if value else "false"
        return str(value)

    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(RunConfig):
            fh.write(f"{f.name} = {fmt(getattr(config, f.name))}\n")
