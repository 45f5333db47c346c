"""Run configuration: documented defaults, ``key = value`` config files and the
effective-config echo written next to every command's output."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class RunConfig:
    # global
    seed: int = 0
    threads: int = 0                 # 0 leaves the BLAS default
    block_size: int = 1024
    # vocabularies / corpus import
    min_df: int = 1
    top_k_drop: int = 0
    min_distinct_terms: int = 0
    hub: str = ""                    # empty: first language of the alignment table
    test_fraction: float = 0.0
    test_empty_pairs: str = ""       # comma-separated pairs such as "es-de"
    # projection models
    method: str = "hubcca"
    k: int = 100                     # kmeans / lsi / cca dimension
    k_lsi: int = 500
    k_cca: int = 0                   # 0 means k_cca = k_lsi
    kappa: float = 0.1
    oversample: int = 10
    power_iters: int = 2
    cca_langs: str = ""              # two comma-separated languages for cca on a larger corpus
    # search and streams
    knn_k: int = 10
    threshold: float = 0.4
    max_age_days: float = 4.0
    idf_window_days: int = 10
    promote_at: int = 3
    window_hours: float = 96.0       # kNN time window for linking; <= 0 disables it
    # linker
    C: float = 1.0
    folds: int = 10
    feature_groups: str = "all"      # "all" or comma-separated of link, concept, misc
    # benchmark
    bench_dim: int = 500
    bench_queries: int = 10_000
    bench_targets: int = 10_000
    bench_repeats: int = 1

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def update(self, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown configuration key {key!r}")
            setattr(self, key, _coerce(types[key], raw, key))
        return self

    def echo(self) -> str:
        return "".join(f"{k} = {_fmt(getattr(self, k))}\n" for k in self.keys())


def _coerce(type_name, raw, key: str):
    name = type_name if isinstance(type_name, str) else type_name.__name__
    try:
        if name == "int":
            return int(raw)
        if name == "float":
            return float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"config key {key!r} expects {name}, got {raw!r}") from None
    return str(raw)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are ignored.
    Dashes in keys are read as underscores."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
