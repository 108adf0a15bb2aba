"""Generational EA with tournament selection and full lineage bookkeeping."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from heritevo.morphology import embed
from heritevo.simulator import SimConfig, simulate
from heritevo.traits import TRAIT_NAMES, Trajectory, TraitVector, trait_vector

log = logging.getLogger(__name__)

WORKERS_ENV = "HERITEVO_WORKERS"


@dataclass
class Individual:
    id: int
    generation: int
    genotype: object
    traits: TraitVector

    @property
    def fitness(self) -> float:
        return self.traits.speed


@dataclass(frozen=True)
class LineageRecord:
    offspring_id: int
    generation: int
    parent1_id: int
    parent2_id: int
    offspring: TraitVector
    parent1: TraitVector
    parent2: TraitVector

    def midparent(self, trait: str) -> float:
        return (self.parent1[trait] + self.parent2[trait]) / 2.0


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    generations: int = 50
    tournament_size: int = 2
    sim: SimConfig = field(default_factory=SimConfig)


@dataclass
class RunLog:
    run_id: int
    seed: int | None
    generations: list[list[Individual]] = field(default_factory=list)
    lineage: list[list[LineageRecord]] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)
    trajectories: dict[int, Trajectory] = field(default_factory=dict)

    @property
    def evaluations(self) -> int:
        return sum(len(g) for g in self.generations)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def evaluate_genotype(genotype, encoding, cfg: SimConfig) -> tuple[TraitVector, Trajectory | None, str | None]:
    """Develop, simulate and measure one genotype; failures get zero fitness."""
    body, controller = encoding.develop(genotype)
    e = embed(body)
    try:
        traj = simulate(body, controller, cfg)
    except Exception as exc:  # noqa: BLE001 - any simulator fault is scored, not raised
        traj = Trajectory.stationary(cfg.n_samples, cfg.sample_period)
        return trait_vector(body, e, traj), None, repr(exc)
    return trait_vector(body, e, traj), traj, None


def worker_count() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


class Evaluator:
    """Maps genotypes to results, in a process pool when more than one worker is configured."""

    def __init__(self, encoding, cfg: SimConfig, workers: int | None = None):
        self.encoding = encoding
        self.cfg = cfg
        self.workers = workers if workers is not None else worker_count()
        self._pool = None

    def __call__(self, genotypes: list) -> list[tuple[TraitVector, Trajectory | None, str | None]]:
        fn = partial(evaluate_genotype, encoding=self.encoding, cfg=self.cfg)
        if self.workers <= 1 or len(genotypes) < 2:
            return [fn(g) for g in genotypes]
        if self._pool is None:
            self._pool = ProcessPoolExecutor(self.workers)
        chunk = max(1, len(genotypes) // (4 * self.workers))
        return list(self._pool.map(fn, genotypes, chunksize=chunk))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# --------------------------------------------------------------------------
# selection and reproduction
# --------------------------------------------------------------------------

def tournament_select(pop: list[Individual], rng: np.random.Generator, k: int = 2) -> Individual:
    k = min(k, len(pop))
    picks = rng.choice(len(pop), size=k, replace=False)
    best = max(pop[i].fitness for i in picks)
    winners = [i for i in picks if pop[i].fitness == best]
    return pop[winners[rng.integers(len(winners))]] if len(winners) > 1 else pop[winners[0]]


def uniform_select(pop: list[Individual], rng: np.random.Generator) -> Individual:
    return pop[rng.integers(len(pop))]


def _pick_parents(pop, rng, select) -> tuple[Individual, Individual]:
    p1 = select(pop, rng)
    if len(pop) == 1:
        return p1, p1
    for _ in range(1000):
        p2 = select(pop, rng)
        if p2 is not p1:
            return p1, p2
    others = [p for p in pop if p is not p1]
    return p1, others[rng.integers(len(others))]


class _Ids:
    def __init__(self, start: int = 0):
        self.next = start

    def __call__(self) -> int:
        self.next += 1
        return self.next - 1


def _make_individuals(genotypes, results, generation, new_id, runlog: RunLog | None, keep_traj: bool):
    out = []
    for g, (traits, traj, err) in zip(genotypes, results):
        ind = Individual(new_id(), generation, g, traits)
        if err is not None:
            log.warning("evaluation of individual %d failed: %s", ind.id, err)
            if runlog is not None:
                runlog.failures.append((ind.id, err))
        if keep_traj and traj is not None and runlog is not None:
            runlog.trajectories[ind.id] = traj
        out.append(ind)
    return out


def next_generation(
    pop: list[Individual],
    rng: np.random.Generator,
    encoding,
    evaluate,
    *,
    select=None,
    new_id=None,
    mutate: bool = True,
    runlog: RunLog | None = None,
    keep_trajectories: bool = False,
) -> tuple[list[Individual], list[LineageRecord]]:
    """Replace ``pop`` entirely with offspring; one lineage record per child."""
    select = select or tournament_select
    new_id = new_id or _Ids(max(p.id for p in pop) + 1)
    generation = pop[0].generation + 1
    genotypes, parents = [], []
    for _ in range(len(pop)):
        p1, p2 = _pick_parents(pop, rng, select)
        child = encoding.crossover(p1.genotype, p2.genotype, rng, p1.fitness >= p2.fitness)
        if mutate:
            child = encoding.mutate(child, rng)
        genotypes.append(child)
        parents.append((p1, p2))
    offspring = _make_individuals(genotypes, evaluate(genotypes), generation, new_id, runlog, keep_trajectories)
    lineage = [
        LineageRecord(c.id, generation, p1.id, p2.id, c.traits, p1.traits, p2.traits)
        for c, (p1, p2) in zip(offspring, parents)
    ]
    return offspring, lineage


def run(
    config: EvolutionConfig,
    encoding,
    rng: np.random.Generator,
    *,
    evaluate=None,
    run_id: int = 0,
    seed: int | None = None,
    keep_trajectories: bool = False,
) -> RunLog:
    own = evaluate is None
    evaluate = evaluate or Evaluator(encoding, config.sim)
    runlog = RunLog(run_id, seed)
    new_id = _Ids()
    select = partial(tournament_select, k=config.tournament_size)
    try:
        genotypes = [encoding.random(rng) for _ in range(config.population_size)]
        pop = _make_individuals(genotypes, evaluate(genotypes), 0, new_id, runlog, keep_trajectories)
        runlog.generations.append(pop)
        for gen in range(1, config.generations + 1):
            pop, lineage = next_generation(
                pop, rng, encoding, evaluate, select=select, new_id=new_id,
                runlog=runlog, keep_trajectories=keep_trajectories,
            )
            runlog.generations.append(pop)
            runlog.lineage.append(lineage)
            log.info("run %d generation %d: median speed %.4f", run_id, gen,
                     float(np.median([p.fitness for p in pop])))
    finally:
        if own:
            evaluate.close()
    return runlog


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


TRAITS_HEADER = ["run_id", "generation", "individual_id", *TRAIT_NAMES]
LINEAGE_HEADER = (
    ["run_id", "generation", "offspring_id", "parent1_id", "parent2_id"]
    + list(TRAIT_NAMES)
    + [f"parent1_{t}" for t in TRAIT_NAMES]
    + [f"parent2_{t}" for t in TRAIT_NAMES]
)
TRAJECTORY_HEADER = ["t", "x", "y", "z", "roll", "pitch", "yaw"]


def write_runlog(runlog: RunLog, directory, genotype_format=None) -> Path:
    """Write per-generation trait and lineage tables (and optional extras) to ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for g, pop in enumerate(runlog.generations):
        with open(d / f"traits_g{g:02d}.csv", "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(TRAITS_HEADER)
            for ind in pop:
                w.writerow([runlog.run_id, g, ind.id, *(_fmt(v) for v in ind.traits.as_tuple())])
        if genotype_format is not None:
            with open(d / f"genotypes_g{g:02d}.txt", "w") as fh:
                for ind in pop:
                    fh.write(f"# individual {ind.id}\n{genotype_format(ind.genotype).rstrip()}\n")
    for lineage in runlog.lineage:
        g = lineage[0].generation
        with open(d / f"lineage_g{g:02d}.csv", "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(LINEAGE_HEADER)
            for r in lineage:
                w.writerow(
                    [runlog.run_id, r.generation, r.offspring_id, r.parent1_id, r.parent2_id]
                    + [_fmt(v) for v in r.offspring.as_tuple()]
                    + [_fmt(v) for v in r.parent1.as_tuple()]
                    + [_fmt(v) for v in r.parent2.as_tuple()]
                )
    if runlog.trajectories:
        td = d / "trajectories"
        td.mkdir(exist_ok=True)
        for ind_id in sorted(runlog.trajectories):
            write_trajectory(runlog.trajectories[ind_id], td / f"individual_{ind_id:05d}.csv")
    return d


def write_trajectory(t: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for time, p, o in zip(t.times, t.positions, t.orientations):
            w.writerow([_fmt(time), *(_fmt(v) for v in p), *(_fmt(v) for v in o)])


def read_trajectory(path, sample_period: float) -> Trajectory:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(sample_period, rows[:, 1:4], rows[:, 4:7])


def read_runlog(directory) -> RunLog:
    """Load the trait and lineage tables back; genotypes are not restored."""
    d = Path(directory)
    trait_files = sorted(d.glob("traits_g*.csv"), key=lambda p: int(p.stem.split("_g")[1]))
    if not trait_files:
        raise FileNotFoundError(f"no traits_gXX.csv files in {d}")
    runlog = None
    for path in trait_files:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if runlog is None:
            runlog = RunLog(int(rows[0]["run_id"]) if rows else 0, None)
        g = int(path.stem.split("_g")[1])
        runlog.generations.append([
            Individual(int(r["individual_id"]), g, None, TraitVector.from_values([r[t] for t in TRAIT_NAMES]))
            for r in rows
        ])
    lineage_files = sorted(d.glob("lineage_g*.csv"), key=lambda p: int(p.stem.split("_g")[1]))
    for path in lineage_files:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        runlog.lineage.append([
            LineageRecord(
                int(r["offspring_id"]), int(r["generation"]), int(r["parent1_id"]), int(r["parent2_id"]),
                TraitVector.from_values([r[t] for t in TRAIT_NAMES]),
                TraitVector.from_values([r[f"parent1_{t}"] for t in TRAIT_NAMES]),
                TraitVector.from_values([r[f"parent2_{t}"] for t in TRAIT_NAMES]),
            )
            for r in rows
        ])
    return runlog
