"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .baselines import KINDS
from .embeddings import EmbeddingError, SimilaritySpec
from .lbp import EdgePotentialSpec, InferenceConfig, InferenceError

OUTPUT_DIR_ENV = "PHISHGRAPH_OUTPUT_DIR"

PATH_KEYS = ("dataset", "enrichment", "output_dir")

# key -> (type, default)
SCHEMA: dict[str, tuple[type, Any]] = {
    "dataset": (str, ""),
    "enrichment": (str, ""),
    "output_dir": (str, "out"),
    "seed": (int, 0),
    "n_folds": (int, 5),
    "parallelism": (int, 1),
    "features.domain_contains_address": (bool, False),
    "baseline.kinds": (str, ",".join(KINDS)),
    "rf.n_trees": (int, 100),
    "rf.max_depth": (int, 12),
    "lr.epochs": (int, 500),
    "lr.rate": (float, 0.5),
    "lr.l2": (float, 1e-4),
    "nb.var_floor": (float, 1e-9),
    "prior.source": (str, "random_forest"),
    "embed.dim": (int, 32),
    "embed.window": (int, 5),
    "embed.epochs": (int, 5),
    "embed.negatives": (int, 5),
    "sim.kernel": (str, "cosine"),
    "sim.sigma": (float, 1.0),
    "sim.rbf_positive_exponent": (bool, False),
    "edge.mode": (str, "similarity"),
    "edge.epsilon": (float, 0.1),
    "edge.ths_plus": (float, 0.6),
    "edge.ths_minus": (float, 1.0),
    "lbp.strategy": (str, "delete_cycles"),
    "lbp.k": (int, 6),
    "lbp.tolerance": (float, 1e-6),
    "lbp.max_sweeps": (int, 100),
    "lbp.threshold": (float, 0.5),
    "lbp.tie_to_phishing": (bool, True),
    "lbp.normalize": (bool, True),
    "eval.positive": (str, "benign"),
    "sweep.grid": (str, "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"),
    "enrich.policy": (str, "skip"),
}

PRIOR_SOURCES = ("uniform",) + KINDS


class ConfigError(ValueError):
    pass


class MissingPathError(ConfigError):
    pass


def _coerce(key: str, raw: Any) -> Any:
    typ, _ = SCHEMA[key]
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None


def parse_assignments(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any], base_dir: str | Path | None = None) -> "RunConfig":
        values = {k: d for k, (_, d) in SCHEMA.items()}
        unknown = sorted(set(mapping) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in mapping.items():
            values[k] = _coerce(k, v)
        cfg = cls(values, Path(base_dir) if base_dir else Path.cwd())
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        path = Path(path)
        mapping: dict[str, Any] = parse_assignments(path.read_text(encoding="utf-8").splitlines(), str(path))
        mapping.update(overrides or {})
        env_out = os.environ.get(OUTPUT_DIR_ENV)
        if env_out:
            mapping["output_dir"] = env_out
        return cls.from_mapping(mapping, path.parent)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        mapping = dict(self.values)
        mapping.update({k.replace("__", "."): v for k, v in overrides.items()})
        return RunConfig.from_mapping(mapping, self.base_dir)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def path(self, key: str) -> Path | None:
        raw = self.values[key]
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else Path(os.path.normpath(self.base_dir / p))

    def validate(self) -> None:
        v = self.values
        if v["n_folds"] < 2:
            raise ConfigError("n_folds must be >= 2")
        if v["parallelism"] < 1:
            raise ConfigError("parallelism must be >= 1")
        if v["prior.source"] not in PRIOR_SOURCES:
            raise ConfigError(f"prior.source must be one of {PRIOR_SOURCES}")
        if v["eval.positive"] not in ("benign", "phishing"):
            raise ConfigError("eval.positive must be 'benign' or 'phishing'")
        if v["enrich.policy"] not in ("skip", "resolve"):
            raise ConfigError("enrich.policy must be 'skip' or 'resolve'")
        for kind in self.baseline_kinds:
            if kind not in KINDS:
                raise ConfigError(f"unknown baseline kind {kind!r}")
        self.sweep_grid()
        try:
            self.edge_spec()
            self.inference_config()
        except (InferenceError, EmbeddingError) as exc:
            raise ConfigError(str(exc)) from None

    def check_paths(self) -> None:
        for key in ("dataset", "enrichment"):
            p = self.path(key)
            if key == "dataset" and p is None:
                raise ConfigError("dataset path is required")
            if p is not None and not p.exists():
                raise MissingPathError(f"{key} path does not exist: {p}")

    @property
    def baseline_kinds(self) -> list[str]:
        return [k.strip() for k in self.values["baseline.kinds"].split(",") if k.strip()]

    @property
    def positive_label(self) -> int:
        return 0 if self.values["eval.positive"] == "benign" else 1

    def sweep_grid(self) -> list[float]:
        raw = self.values["sweep.grid"]
        try:
            grid = [float(x) for x in raw.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"sweep.grid: cannot parse {raw!r}") from None
        if not grid:
            raise ConfigError("sweep.grid is empty")
        return grid

    def similarity_spec(self) -> SimilaritySpec:
        v = self.values
        return SimilaritySpec(v["sim.kernel"], v["sim.sigma"], v["sim.rbf_positive_exponent"])

    def edge_spec(self) -> EdgePotentialSpec:
        v = self.values
        return EdgePotentialSpec(
            mode=v["edge.mode"], epsilon=v["edge.epsilon"], ths_plus=v["edge.ths_plus"],
            ths_minus=v["edge.ths_minus"], similarity=self.similarity_spec(),
        )

    def inference_config(self) -> InferenceConfig:
        v = self.values
        return InferenceConfig(
            strategy=v["lbp.strategy"], k=v["lbp.k"], tolerance=v["lbp.tolerance"],
            max_sweeps=v["lbp.max_sweeps"], threshold=v["lbp.threshold"], seed=v["seed"],
            tie_to_phishing=v["lbp.tie_to_phishing"], normalize=v["lbp.normalize"],
        )

    def dump(self) -> str:
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in sorted(self.values))


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)
