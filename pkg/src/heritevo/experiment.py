"""Experiment configuration and the batch runner that produces an artifact directory.

Layout of an artifact directory::

    <output_dir>/
        config.toml
        run_000/  config.toml  manifest.json  traits_g00.csv ...  lineage_g01.csv ...
        run_001/  ...
        analysis/ heritability.csv  diversity.csv  medians.csv  selection.csv
        figures/  *.svg                      (after ``render``)
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from heritevo import __version__
from heritevo.analysis import write_analysis
from heritevo.encoding_lsystem import GrammarRates, LSystemEncoding
from heritevo.encoding_tree import TreeEncoding, TreeRates
from heritevo.evolution import EvolutionConfig, Evaluator, read_runlog, run, write_runlog
from heritevo.morphology import BodyLimits
from heritevo.simulator import SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

ENCODINGS = ("tree", "lsystem")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    encoding: str = "tree"
    population_size: int = 100
    generations: int = 50
    repetitions: int = 1
    seed: int = 0
    module_cap: int = 30
    mutation_rate: float = 0.59
    sim_duration: float = 30.0
    sim_timestep: float = 0.005
    sim_sample_period: float = 0.1
    lsystem_iterations: int = 3
    output_dir: str = "results"
    dump_trajectories: bool = False
    dump_genotypes: bool = False

    def __post_init__(self):
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")
        for name in ("population_size", "generations", "repetitions", "module_cap", "lsystem_iterations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2 (offspring need two distinct parents)")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must be in [0, 1]")
        try:
            self.sim
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def sim(self) -> SimConfig:
        return SimConfig(self.sim_duration, self.sim_timestep, self.sim_sample_period)

    @property
    def evolution(self) -> EvolutionConfig:
        return EvolutionConfig(self.population_size, self.generations, 2, self.sim)

    def replace(self, **kw) -> ExperimentConfig:
        return ExperimentConfig(**{**asdict(self), **kw})


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    defaults = ExperimentConfig()
    for key, value in data.items():
        expected = type(getattr(defaults, key))
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            data[key] = float(value)
        elif not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
            raise ConfigError(f"{key} must be {expected.__name__}, got {value!r}")
    return ExperimentConfig(**data)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: ExperimentConfig, include_output: bool = True) -> str:
    lines = []
    for key, value in asdict(cfg).items():
        if key == "output_dir" and not include_output:
            continue  # a location, not a parameter; keeps relocated reruns byte-identical
        if isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        elif isinstance(value, str):
            lines.append(f"{key} = {json.dumps(value)}")
        else:
            lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def make_encoding(cfg: ExperimentConfig):
    limits = BodyLimits(max_modules=cfg.module_cap)
    if cfg.encoding == "tree":
        return TreeEncoding(limits, TreeRates.from_aggregate(cfg.mutation_rate))
    return LSystemEncoding(limits, GrammarRates(probability=cfg.mutation_rate), iterations=cfg.lsystem_iterations)


def manifest(cfg: ExperimentConfig, run_id: int, seed: int, failures: int) -> dict:
    initial = cfg.population_size
    offspring = cfg.population_size * cfg.generations
    return {
        "code_version": __version__,
        "encoding": cfg.encoding,
        "run_id": run_id,
        "seed": seed,
        "population_size": cfg.population_size,
        "generations": cfg.generations,
        "evaluations": {"initial_population": initial, "offspring": offspring, "total": initial + offspring},
        "evaluation_budget_note": (
            "the quoted budget of population x generations counts offspring only; "
            "the random initial population is evaluated on top of it"
        ),
        "failed_evaluations": failures,
    }


def run_experiment(cfg: ExperimentConfig, output_dir=None, workers: int | None = None) -> Path:
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(format_config(cfg, include_output=False))
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc}") from None
    runlogs = []
    for rep in range(cfg.repetitions):
        seed = cfg.seed + rep
        encoding = make_encoding(cfg)
        rng = np.random.default_rng(seed)
        with Evaluator(encoding, cfg.sim, workers) as evaluator:
            runlog = run(cfg.evolution, encoding, rng, evaluate=evaluator, run_id=rep, seed=seed,
                         keep_trajectories=cfg.dump_trajectories)
        run_dir = out / f"run_{rep:03d}"
        write_runlog(runlog, run_dir, encoding.format if cfg.dump_genotypes else None)
        (run_dir / "config.toml").write_text(format_config(cfg, include_output=False))
        (run_dir / "manifest.json").write_text(
            json.dumps(manifest(cfg, rep, seed, len(runlog.failures)), indent=2, sort_keys=True) + "\n"
        )
        log.info("run %d (seed %d) written to %s", rep, seed, run_dir)
        runlogs.append(runlog)
    write_analysis(runlogs, out / "analysis")
    return out


def run_dirs(artifact_dir) -> list[Path]:
    dirs = sorted(p for p in Path(artifact_dir).glob("run_*") if p.is_dir())
    if not dirs:
        raise FileNotFoundError(f"no run_* directories in {artifact_dir}")
    return dirs


def analyze_artifact(artifact_dir) -> Path:
    runlogs = [read_runlog(d) for d in run_dirs(artifact_dir)]
    return write_analysis(runlogs, Path(artifact_dir) / "analysis")
