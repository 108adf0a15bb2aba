"""Heritability, diversity and selection-response statistics over run logs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from heritevo.evolution import RunLog
from heritevo.traits import TRAIT_NAMES

DEGENERATE_VARIANCE = 1e-12
ALL = "ALL"


@dataclass(frozen=True)
class VarianceDecomposition:
    """Phenotypic variance split into genetic parts; the environment term is zero on flat ground."""

    additive: float
    epistatic: float
    mutation: float
    environment: float = 0.0

    def __post_init__(self):
        if min(self.additive, self.epistatic, self.mutation, self.environment) < 0:
            raise ValueError("variance components must be non-negative")

    @property
    def genetic(self) -> float:
        return self.additive + self.epistatic + self.mutation

    @property
    def phenotypic(self) -> float:
        return self.genetic + self.environment

    @property
    def broad_sense(self) -> float:
        return self.genetic / self.phenotypic

    @property
    def narrow_sense(self) -> float:
        return self.additive / self.phenotypic


@dataclass(frozen=True)
class HeritabilityEstimate:
    trait: str
    slope: float
    intercept: float
    n: int
    generation: int = 0
    degenerate: bool = False

    @property
    def out_of_range(self) -> bool:
        return not self.degenerate and not 0.0 <= self.slope <= 1.0


def midparent_regression(pairs, trait: str = "", generation: int = 0) -> HeritabilityEstimate:
    """OLS of offspring value on mid-parent value; the slope is the h^2 estimate.

    The slope is reported raw, not clamped to [0, 1].  When the mid-parent
    values have (almost) no spread the fit is meaningless and the estimate is
    flagged ``degenerate`` with NaN slope and intercept.
    """
    xy = np.asarray(pairs, dtype=float).reshape(-1, 2)
    n = len(xy)
    if n < 2:
        raise ValueError("need at least two (mid-parent, offspring) pairs")
    x, y = xy[:, 0], xy[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx / n < DEGENERATE_VARIANCE:
        return HeritabilityEstimate(trait, math.nan, math.nan, n, generation, degenerate=True)
    slope = float(dx @ (y - y.mean())) / sxx
    return HeritabilityEstimate(trait, slope, float(y.mean() - slope * x.mean()), n, generation)


def lineage_pairs(records, trait: str) -> np.ndarray:
    return np.array([(r.midparent(trait), r.offspring[trait]) for r in records], dtype=float).reshape(-1, 2)


def heritability_per_generation(runlog: RunLog) -> list[HeritabilityEstimate]:
    """One estimate per trait for every parent->offspring transition."""
    out = []
    for records in runlog.lineage:
        parent_gen = records[0].generation - 1
        for trait in TRAIT_NAMES:
            out.append(midparent_regression(lineage_pairs(records, trait), trait, parent_gen))
    return out


def pooled_heritability(runlogs, transition: int = 0) -> list[HeritabilityEstimate]:
    """Estimates over the lineage of one transition pooled across runs (gen 0 by default)."""
    records = [r for log in runlogs for r in log.lineage[transition]]
    return [midparent_regression(lineage_pairs(records, t), t, transition) for t in TRAIT_NAMES]


def per_individual_distances(values) -> np.ndarray:
    """Mean absolute difference of each value against every other one."""
    v = np.asarray(values, dtype=float).reshape(-1)
    n = len(v)
    if n < 2:
        raise ValueError("diversity needs at least two individuals")
    return np.abs(v[:, None] - v[None, :]).sum(axis=1) / (n - 1)


def trait_diversity(values) -> float:
    return float(per_individual_distances(values).mean())


def normalize(vectors, lower, upper) -> np.ndarray:
    v = np.asarray(vectors, dtype=float)
    lower = np.asarray(lower, dtype=float)
    span = np.asarray(upper, dtype=float) - lower
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (v - lower) / safe, 0.0)


def population_diversity(vectors, lower=None, upper=None) -> float:
    """Mean over individuals of the mean Euclidean distance to the others in min-max normalised trait space.

    ``lower``/``upper`` are the normalisation bounds; they default to the
    population's own range but should come from the whole run.
    """
    v = np.asarray(vectors, dtype=float)
    if len(v) < 2:
        raise ValueError("diversity needs at least two individuals")
    lower = v.min(axis=0) if lower is None else lower
    upper = v.max(axis=0) if upper is None else upper
    z = normalize(v, lower, upper)
    d = np.sqrt(((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=2))
    return float((d.sum(axis=1) / (len(v) - 1)).mean())


def selection_differential(selected_values, population_values) -> float:
    return float(np.mean(selected_values) - np.mean(population_values))


def response_to_selection(h2: float, s: float) -> float:
    return h2 * s


def rate_of_change(series) -> np.ndarray:
    s = np.asarray(series, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least two generations")
    return np.diff(s)


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def _trait_matrix(pop) -> np.ndarray:
    return np.array([ind.traits.as_tuple() for ind in pop], dtype=float)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    return repr(float(v))


def heritability_rows(runlogs) -> list[list]:
    rows = []
    for log in runlogs:
        for est in heritability_per_generation(log):
            rows.append([log.run_id, est.generation, est.trait, est.slope, est.intercept, est.n, est.degenerate])
    if runlogs:
        for k in range(min(len(log.lineage) for log in runlogs)):
            for est in pooled_heritability(runlogs, k):
                rows.append([ALL, est.generation, est.trait, est.slope, est.intercept, est.n, est.degenerate])
    return rows


def diversity_rows(runlogs) -> list[list]:
    """Per-trait median diversity and overall (ALL) mean diversity per generation."""
    rows = []
    per_run = []
    for log in runlogs:
        everything = np.vstack([_trait_matrix(pop) for pop in log.generations])
        lower, upper = everything.min(axis=0), everything.max(axis=0)
        table = {}
        for g, pop in enumerate(log.generations):
            m = _trait_matrix(pop)
            for k, trait in enumerate(TRAIT_NAMES):
                table[(g, trait)] = float(np.median(per_individual_distances(m[:, k])))
            table[(g, ALL)] = population_diversity(m, lower, upper)
        per_run.append(table)
        for (g, trait), value in table.items():
            rows.append([log.run_id, g, trait, value])
    if per_run:
        keys = [k for k in per_run[0] if all(k in t for t in per_run)]
        for key in keys:
            rows.append([ALL, key[0], key[1], float(np.mean([t[key] for t in per_run]))])
    return rows


def median_rows(runlogs) -> list[list]:
    rows = []

    def emit(run, gens):
        for k, trait in enumerate(TRAIT_NAMES):
            medians = [float(np.median(m[:, k])) for m in gens]
            for g, med in enumerate(medians):
                inc = medians[g] - medians[g - 1] if g > 0 else ""
                rows.append([run, g, trait, med, inc])

    for log in runlogs:
        emit(log.run_id, [_trait_matrix(pop) for pop in log.generations])
    if runlogs:
        n = min(len(log.generations) for log in runlogs)
        emit(ALL, [np.vstack([_trait_matrix(log.generations[g]) for log in runlogs]) for g in range(n)])
    return rows


def selection_rows(runlogs) -> list[list]:
    """Predicted response h^2 * S next to the observed change of the population mean."""
    rows = []
    for log in runlogs:
        estimates = {(e.generation, e.trait): e for e in heritability_per_generation(log)}
        for records in log.lineage:
            g = records[0].generation - 1
            parents = _trait_matrix(log.generations[g])
            children = _trait_matrix(log.generations[g + 1])
            for k, trait in enumerate(TRAIT_NAMES):
                s = selection_differential([r.midparent(trait) for r in records], parents[:, k])
                h2 = estimates[(g, trait)].slope
                observed = float(children[:, k].mean() - parents[:, k].mean())
                rows.append([log.run_id, g, trait, s, h2, response_to_selection(h2, s), observed])
    return rows


HERITABILITY_HEADER = ["run", "generation", "trait", "slope", "intercept", "n", "degenerate_flag"]
DIVERSITY_HEADER = ["run", "generation", "trait", "value"]
MEDIANS_HEADER = ["run", "generation", "trait", "median", "increment"]
SELECTION_HEADER = ["run", "generation", "trait", "selection_differential", "heritability",
                    "predicted_response", "observed_response"]


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_analysis(runlogs, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write(d / "heritability.csv", HERITABILITY_HEADER, heritability_rows(runlogs))
    _write(d / "diversity.csv", DIVERSITY_HEADER, diversity_rows(runlogs))
    _write(d / "medians.csv", MEDIANS_HEADER, median_rows(runlogs))
    _write(d / "selection.csv", SELECTION_HEADER, selection_rows(runlogs))
    return d
