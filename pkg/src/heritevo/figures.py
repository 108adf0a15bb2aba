"""SVG figures drawn from an artifact directory's CSV files (views only, no new statistics)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from heritevo.analysis import ALL  # noqa: E402
from heritevo.traits import TRAIT_NAMES  # noqa: E402

plt.rcParams["svg.hashsalt"] = "heritevo"
plt.rcParams["svg.fonttype"] = "none"

_LABELS = {
    "proportion": "Proportion", "size": "Size", "limbs": "Number of limbs",
    "coverage": "Coverage", "speed": "Speed (cm/s)", "balance": "Balance",
}


class MissingArtifact(FileNotFoundError):
    pass


def _read(path: Path) -> list[dict]:
    if not path.exists():
        raise MissingArtifact(f"missing {path.name} (expected at {path})")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path: Path, description: str = "") -> Path:
    meta = {"Date": None, "Creator": "heritevo"}
    if description:
        meta["Description"] = description
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    return path


def _series(rows, trait: str, column: str):
    pts = sorted((int(r["generation"]), r[column]) for r in rows if r["run"] == ALL and r["trait"] == trait)
    pts = [(g, float(v)) for g, v in pts if v != ""]
    return np.array([g for g, _ in pts]), np.array([v for _, v in pts])


def _line(path: Path, x, y, xlabel: str, ylabel: str, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, y, color="tab:blue", marker=".")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def scatter(path: Path, midparent, offspring, slope: float, intercept: float, trait: str) -> Path:
    """Gen-0 mid-parent vs offspring with the fitted line and the 45 degree reference."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(midparent, offspring, s=8, color="0.4", alpha=0.6)
    lo = float(min(np.min(midparent), np.min(offspring)))
    hi = float(max(np.max(midparent), np.max(offspring)))
    xs = np.array([lo, hi])
    ax.plot(xs, xs, color="red", label="perfect heritability")
    if np.isfinite(slope):
        ax.plot(xs, intercept + slope * xs, color="blue", label=f"regression, slope {slope:.2f}")
    ax.set_xlabel(f"mid-parent {_LABELS[trait].lower()}")
    ax.set_ylabel(f"offspring {_LABELS[trait].lower()}")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return _save(fig, path, f"slope={slope!r}")


def render_figures(artifact_dir) -> list[Path]:
    root = Path(artifact_dir)
    analysis = root / "analysis"
    heritability = _read(analysis / "heritability.csv")
    diversity = _read(analysis / "diversity.csv")
    medians = _read(analysis / "medians.csv")
    runs = sorted(p for p in root.glob("run_*") if p.is_dir())
    if not runs:
        raise MissingArtifact(f"no run_* directories in {root}")
    lineage0 = [r for d in runs for r in _read(d / "lineage_g01.csv")]
    gen0 = [r for d in runs for r in _read(d / "traits_g00.csv")]

    out = root / "figures"
    out.mkdir(exist_ok=True)
    written = []
    for trait in TRAIT_NAMES:
        mid = np.array([(float(r[f"parent1_{trait}"]) + float(r[f"parent2_{trait}"])) / 2 for r in lineage0])
        off = np.array([float(r[trait]) for r in lineage0])
        est = next(r for r in heritability if r["run"] == ALL and r["generation"] == "0" and r["trait"] == trait)
        written.append(scatter(out / f"scatter_{trait}.svg", mid, off, float(est["slope"]), float(est["intercept"]), trait))

        g, m = _series(medians, trait, "median")
        written.append(_line(out / f"median_{trait}.svg", g, m, "generation", _LABELS[trait],
                             f"Median {_LABELS[trait].lower()} per generation"))
        g, inc = _series(medians, trait, "increment")
        written.append(_line(out / f"increment_{trait}.svg", g, inc, "generation", "increment of median",
                             f"Increment of median {_LABELS[trait].lower()}"))
        g, h = _series(heritability, trait, "slope")
        written.append(_line(out / f"heritability_{trait}.svg", g, h, "generation", "heritability (slope)",
                             f"{_LABELS[trait]} heritability per generation"))
        g, d = _series(diversity, trait, "value")
        written.append(_line(out / f"diversity_{trait}.svg", g, d, "generation", "median diversity",
                             f"Median diversity of {_LABELS[trait].lower()}"))

    g, d = _series(diversity, ALL, "value")
    written.append(_line(out / "diversity_overall.svg", g, d, "generation", "mean distance in trait space",
                         "Diversity per generation"))

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist([float(r["speed"]) for r in gen0], bins=20, color="tab:blue")
    ax.set_xlabel("speed (cm/s)")
    ax.set_ylabel("individuals")
    ax.set_title("Fitness in the random initial population")
    fig.tight_layout()
    written.append(_save(fig, out / "fitness_gen0.svg"))
    return written
