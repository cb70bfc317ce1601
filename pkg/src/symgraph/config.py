"""Experiment configuration for the command line runner.

A config is a JSON object::

    {
      "schema": 1,
      "n": 10,
      "partition": {"source": "balanced", "k": 2},
      "constraint": {"type": "budget", "costs": [1, 2], "budget": 12},
      "epsilon": 0.5, "trials": 1000, "seed": 0, "strategy": "enumeration",
      "caps": {"enumeration": 10000000},
      "mcmc": {"burn_in": 100000, "thinning": null},
      "allow_approx": false,
      "out": "out", "jobs": 1
    }

Partition sources: ``explicit`` (``path`` to a partition file, relative to
the config file), ``cost-binned`` (``costs`` per edge and ``delta``),
``balanced`` (``k``), ``sizes`` (``sizes``, parts not tied to a vertex set)
and ``groups`` (vertex ``groups``, the group-pair partition).
``constraint`` is ``null`` or a tagged union understood by
:func:`symgraph.constraints.spec_from_dict`.

``out`` and ``jobs`` only steer where and how the run happens; they are
left out of the content hash so that outputs do not depend on them.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

from .constraints import DEFAULT_ENUMERATION_CAP, spec_from_dict
from .exceptions import InvalidInputError, SymGraphError
from .graphspace import (
    Partition,
    balanced_partition,
    partition_from_costs,
    partition_from_groups,
    read_partition,
)

__all__ = ["SCHEMA_VERSION", "ConfigError", "ExperimentConfig", "load_config"]

SCHEMA_VERSION = 1
_SOURCES = ("explicit", "cost-binned", "balanced", "sizes", "groups")
_STRATEGY_NAMES = {"enum": "enumeration", "enumeration": "enumeration", "dp": "budget-dp",
                   "budget-dp": "budget-dp", "mcmc": "mcmc"}
_RUNTIME_FIELDS = ("out", "jobs")
_KNOWN = {"schema", "n", "partition", "constraint", "epsilon", "trials", "seed", "strategy", "caps", "mcmc",
          "allow_approx", "out", "jobs"}


class ConfigError(SymGraphError):
    """Malformed configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


def _int(d, key, default=None, minimum=None):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {v}")
    return v


@dataclass
class ExperimentConfig:
    n: int | None
    partition: dict
    constraint: dict | None = None
    epsilon: float | None = None
    trials: int = 0
    seed: int = 0
    strategy: str = "enumeration"
    caps: dict = field(default_factory=lambda: {"enumeration": DEFAULT_ENUMERATION_CAP})
    mcmc: dict = field(default_factory=lambda: {"burn_in": 100_000, "thinning": None})
    allow_approx: bool = False
    out: str = "out"
    jobs: int = 1
    schema: int = SCHEMA_VERSION
    base_dir: str = field(default=".", compare=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = sorted(set(d) - _KNOWN)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        schema = d.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError("schema", f"unsupported schema version {schema!r}; expected {SCHEMA_VERSION}")
        part = d.get("partition")
        if not isinstance(part, dict) or part.get("source") not in _SOURCES:
            raise ConfigError("partition", f"must be an object with 'source' in {_SOURCES}")
        constraint = d.get("constraint")
        if constraint is not None and not isinstance(constraint, dict):
            raise ConfigError("constraint", "must be null or an object")
        eps = d.get("epsilon")
        if eps is not None and (isinstance(eps, bool) or not isinstance(eps, (int, float)) or not 0 < eps < 1):
            raise ConfigError("epsilon", f"must be a number in (0, 1), got {eps!r}")
        seed = _int(d, "seed", 0, 0)
        if seed >= 1 << 64:
            raise ConfigError("seed", "must fit in 64 bits")
        strategy = d.get("strategy", "enumeration")
        if strategy not in _STRATEGY_NAMES:
            raise ConfigError("strategy", f"unknown strategy {strategy!r}; expected one of {sorted(_STRATEGY_NAMES)}")
        caps = d.get("caps", {"enumeration": DEFAULT_ENUMERATION_CAP})
        if not isinstance(caps, dict):
            raise ConfigError("caps", "must be an object")
        _int(caps, "enumeration", DEFAULT_ENUMERATION_CAP, 1)
        mcmc = d.get("mcmc", {"burn_in": 100_000, "thinning": None})
        if not isinstance(mcmc, dict):
            raise ConfigError("mcmc", "must be an object")
        _int(mcmc, "burn_in", 100_000, 0)
        _int(mcmc, "thinning", None, 1)
        allow = d.get("allow_approx", False)
        if not isinstance(allow, bool):
            raise ConfigError("allow_approx", "must be true or false")
        out = d.get("out", "out")
        if not isinstance(out, str):
            raise ConfigError("out", "must be a path string")
        return cls(
            n=_int(d, "n", None, 2),
            partition=copy.deepcopy(part),
            constraint=copy.deepcopy(constraint),
            epsilon=None if eps is None else float(eps),
            trials=_int(d, "trials", 0, 0),
            seed=seed,
            strategy=_STRATEGY_NAMES[strategy],
            caps={"enumeration": DEFAULT_ENUMERATION_CAP, **caps},
            mcmc={"burn_in": 100_000, "thinning": None, **mcmc},
            allow_approx=allow,
            out=out,
            jobs=_int(d, "jobs", 1, 1),
            schema=schema,
            base_dir=base_dir,
        )

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "n": self.n,
            "partition": copy.deepcopy(self.partition),
            "constraint": copy.deepcopy(self.constraint),
            "epsilon": self.epsilon,
            "trials": self.trials,
            "seed": self.seed,
            "strategy": self.strategy,
            "caps": dict(self.caps),
            "mcmc": dict(self.mcmc),
            "allow_approx": self.allow_approx,
            "out": self.out,
            "jobs": self.jobs,
        }

    def canonical(self) -> str:
        """Sorted, whitespace-free JSON of the content fields (runtime fields dropped)."""
        d = {k: v for k, v in self.to_dict().items() if k not in _RUNTIME_FIELDS}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    @property
    def cap(self) -> int:
        return int(self.caps["enumeration"])

    def build_partition(self) -> Partition:
        d, n = self.partition, self.n
        src = d["source"]
        try:
            if src == "explicit":
                if "path" not in d:
                    raise ConfigError("partition.path", "required for an explicit partition")
                path = os.path.join(self.base_dir, d["path"])
                try:
                    with open(path) as fh:
                        part = read_partition(fh)
                except OSError as exc:
                    raise ConfigError("partition.path", f"cannot read {path}: {exc.strerror}") from None
                if n is not None and part.n != n:
                    raise ConfigError("n", f"config says n={n} but the partition file has n={part.n}")
                return part
            if src == "cost-binned":
                for key in ("costs", "delta"):
                    if key not in d:
                        raise ConfigError(f"partition.{key}", "required for a cost-binned partition")
                part = partition_from_costs(d["costs"], d["delta"])
                if n is not None and part.n != n:
                    raise ConfigError("n", f"config says n={n} but {len(d['costs'])} costs give n={part.n}")
                return part
            if src == "balanced":
                if n is None:
                    raise ConfigError("n", "required for a balanced partition")
                if "k" not in d:
                    raise ConfigError("partition.k", "required for a balanced partition")
                return balanced_partition(n, _int(d, "k", None, 1))
            if src == "sizes":
                if "sizes" not in d:
                    raise ConfigError("partition.sizes", "required")
                return Partition.from_sizes(d["sizes"], n)
            part = partition_from_groups(d.get("groups", []))
            if n is not None and part.n != n:
                raise ConfigError("n", f"config says n={n} but groups cover {part.n} vertices")
            return part
        except InvalidInputError as exc:
            raise ConfigError("partition", str(exc)) from None

    def build_spec(self, part: Partition):
        if self.constraint is None:
            return None
        try:
            spec = spec_from_dict(self.constraint)
            spec.validate(part)
        except InvalidInputError as exc:
            raise ConfigError("constraint", str(exc)) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError("constraint", f"malformed: {exc}") from None
        return spec


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))

