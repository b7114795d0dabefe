"""Flat ``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored. Recognised keys::

    task            binary | multiclass
    mode            stack | single
    train           labelled TSV (required)
    validation      labelled TSV merged into train for the binary task
    output          output directory
    k, seed         fold count and fold-shuffle seed
    learners        comma list of name:kind:features
    threads         worker threads for fold fitting (outputs unchanged)
    lm_order, lm_add_k, lm_min_count, bin_edges, lm_source, nb_add_k,
    learning_rate, l2_strength, max_epochs, batch_size, tolerance
                    base-learner defaults
    learner.<name>.<param>
                    per-learner override of one of the keys above
    meta_learning_rate, meta_l2_strength, meta_max_epochs, meta_tolerance
                    meta-model trainer
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .classifiers import TrainConfig
from .corpus import LabelSpace
from .errors import InputError
from .stacking import DEFAULT_PARAMS, BaseLearnerSpec

DEFAULT_LEARNERS = {
    "binary": (
        "nb_tokens:naive_bayes:tokens,lr_surface:logreg:surface,lr_lm:logreg:lm,"
        "lr_both:logreg:both,mean_ll:mean_likelihood:lm"
    ),
    "multiclass": "nb_tokens:naive_bayes:tokens",
}

DEFAULTS = {
    "task": "binary",
    "k": "5",
    "seed": "42",
    "threads": "1",
    "meta_learning_rate": "0.1",
    "meta_l2_strength": "0.001",
    "meta_max_epochs": "2000",
    "meta_tolerance": "1e-8",
}

# keys that locate files rather than change results; excluded from the config hash
_LOCATION_KEYS = {"output"}


def parse_config_text(content: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InputError(f"config line {lineno}: empty key")
        values[key] = value
    return values


def _parse_param(key: str, value: str):
    default = DEFAULT_PARAMS[key]
    if isinstance(default, tuple):
        return tuple(int(v) for v in value.split(",") if v.strip())
    if isinstance(default, str):
        return value
    if isinstance(default, int):
        return int(value)
    return float(value)


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None, overrides: Mapping[str, str] = ()) -> "RunConfig":
        values = dict(DEFAULTS)
        if path is not None:
            values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        values.update(dict(overrides))
        values.setdefault("mode", "stack" if values["task"] == "binary" else "single")
        values.setdefault("learners", DEFAULT_LEARNERS.get(values["task"], ""))
        cfg = cls(values)
        cfg.validate()
        return cfg

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    @property
    def task(self) -> str:
        return self.values["task"]

    @property
    def mode(self) -> str:
        return self.values["mode"]

    @property
    def space(self) -> LabelSpace:
        return LabelSpace.for_task(self.task)

    @property
    def k(self) -> int:
        return int(self.values["k"])

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def threads(self) -> int:
        return int(self.values["threads"])

    def validate(self) -> None:
        LabelSpace.for_task(self.task)
        if self.mode not in ("stack", "single"):
            raise InputError(f"mode must be 'stack' or 'single', not {self.mode!r}")
        if "train" not in self.values:
            raise InputError("config needs a 'train' path")
        for key in ("train", "validation"):
            if key in self.values and not Path(self.values[key]).is_file():
                raise InputError(f"{key} file not found: {self.values[key]}")
        try:
            k, _, threads = self.k, self.seed, self.threads
        except ValueError as err:
            raise InputError(f"k, seed and threads must be integers ({err})")
        if self.mode == "stack" and k < 2:
            raise InputError("stacked runs need k >= 2")
        if threads < 1:
            raise InputError("threads must be >= 1")
        known = set(DEFAULT_PARAMS) | set(DEFAULTS) | {
            "mode", "train", "validation", "output", "learners", "test",
        }
        for key in self.values:
            if key.startswith("learner."):
                continue
            if key not in known:
                raise InputError(f"unknown config key {key!r}")
        self.learner_specs()
        self.meta_config()

    def learner_specs(self) -> list[BaseLearnerSpec]:
        base = {
            key: _parse_param(key, self.values[key])
            for key in DEFAULT_PARAMS
            if key in self.values
        }
        specs = []
        for item in self.values["learners"].split(","):
            item = item.strip()
            if not item:
                continue
            parts = item.split(":")
            if len(parts) != 3:
                raise InputError(f"learner {item!r} must be name:kind:features")
            name, kind, features = parts
            params = dict(base)
            prefix = f"learner.{name}."
            for key, value in self.values.items():
                if key.startswith(prefix):
                    param = key[len(prefix):]
                    if param not in DEFAULT_PARAMS:
                        raise InputError(f"unknown learner parameter {key!r}")
                    params[param] = _parse_param(param, value)
            specs.append(BaseLearnerSpec(name, kind, features, params))
        if not specs:
            raise InputError("config lists no learners")
        if len({s.name for s in specs}) != len(specs):
            raise InputError("learner names must be unique")
        return specs

    def meta_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(self.values["meta_learning_rate"]),
            l2_strength=float(self.values["meta_l2_strength"]),
            max_epochs=int(self.values["meta_max_epochs"]),
            tolerance=float(self.values["meta_tolerance"]),
            seed=self.seed,
        )

    def canonical(self) -> str:
        lines = [f"{k} = {v}" for k, v in sorted(self.values.items()) if k not in _LOCATION_KEYS]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()
