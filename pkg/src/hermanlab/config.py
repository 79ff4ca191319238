"""Run configuration shared by the command line and the artifacts it writes."""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from . import SCHEMA_VERSION, __version__


@dataclass
class RunConfig:
    command: str = "selftest"
    action: str | None = None
    d0: int = 2
    dinf: int = 4
    d: int = 2
    theta: str | None = None
    p_over_q: str | None = None
    seed: list | None = None          # [re, im]
    depth: int = 16
    levels: int = 12
    n: int = 6
    tol: float = 1e-12
    precision: str = "double"
    validation: str | None = None
    alpha: float = 3.0
    interval: list | None = None      # [a, b] in turns
    resolution: int = 256
    pieces: int = 4
    radius: float = 0.5
    scales: list | None = None
    center: list = field(default_factory=lambda: [0.0, 0.0])
    width: float = 4.0
    px: int = 512
    maxiter: int = 2000
    param: list | None = None         # [re, im]; overrides --cand for render julia
    cand: str | None = None
    round: bool = False
    overlay: bool = False
    out: str | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.precision not in ("double", "extended"):
            raise ValueError("precision must be 'double' or 'extended'")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def thread_budget(self) -> int:
        env = os.environ.get("HERMANLAB_THREADS")
        if env:
            return max(1, int(env))
        if self.threads:
            return max(1, int(self.threads))
        return os.cpu_count() or 1


def provenance(cfg: RunConfig) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tool": f"hermanlab {__version__}",
            "config": cfg.to_json()}


def dumps(cfg: RunConfig, result) -> str:
    doc = provenance(cfg)
    doc["result"] = result
    return json.dumps(doc, indent=1, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
