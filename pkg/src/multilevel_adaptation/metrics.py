"""Aggregation, interaction/offsetting coefficients, significance tests and table output."""
from __future__ import annotations

import csv
import math
import numbers
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np
from scipy import stats

MEASURES = ("final", "mean")
SIGNIFICANCE_LEVEL = 0.01
TESTS = ("welch", "mannwhitney")


@dataclass
class ScenarioReport:
    """Replication-averaged normalized performance of one scenario."""

    label: str
    series: np.ndarray      # mean normalized performance per period
    final: float
    mean: float
    finals: np.ndarray      # per replication, last period
    time_means: np.ndarray  # per replication, averaged over periods
    n_replications: int
    scenario: object = None
    traces: list | None = field(default=None, repr=False)

    def measure(self, name: str) -> float:
        if name not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}, got {name!r}")
        return self.final if name == "final" else self.mean

    def samples(self, name: str) -> np.ndarray:
        if name not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}, got {name!r}")
        return self.finals if name == "final" else self.time_means


def aggregate(traces, label: str = "") -> ScenarioReport:
    """Average normalized traces over replications.

    ``traces`` is a sequence of ``RunTrace`` objects or an (R, T) array of
    normalized performances.
    """
    if isinstance(traces, np.ndarray):
        rows = traces
    else:
        traces = list(traces)
        if not traces:
            raise ValueError("cannot aggregate an empty set of traces")
        lengths = {len(t.normalized) for t in traces}
        if len(lengths) != 1:
            raise ValueError(f"length mismatch: traces have horizons {sorted(lengths)}")
        rows = np.array([t.normalized for t in traces])
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
        raise ValueError("cannot aggregate an empty set of traces")
    series = rows.mean(axis=0)
    return ScenarioReport(
        label=label,
        series=series,
        final=float(series[-1]),
        mean=float(series.mean()),
        finals=rows[:, -1].copy(),
        time_means=rows.mean(axis=1),
        n_replications=rows.shape[0],
    )


def _value(x, measure: str) -> float:
    if isinstance(x, numbers.Real):
        return float(x)
    return x.measure(measure)


def interaction_coefficient(baseline, learn_only, adapt_only, joint, measure: str = "final") -> float:
    """Joint gain over the sum of isolated gains; NaN when the isolated gains cancel.

    Arguments are reports or plain performance values.
    """
    base = _value(baseline, measure)
    d_learn = _value(learn_only, measure) - base
    d_adapt = _value(adapt_only, measure) - base
    d_joint = _value(joint, measure) - base
    denom = d_learn + d_adapt
    if denom == 0:
        return math.nan
    return d_joint / denom


def offsetting_effects(first_stage, joint, measure: str = "final") -> float:
    """Relative change from promoting the second design parameter; NaN on a zero base."""
    first = _value(first_stage, measure)
    if first == 0:
        return math.nan
    return (_value(joint, measure) - first) / first


@dataclass
class EffectReport:
    baseline: ScenarioReport
    learn_only: ScenarioReport
    adapt_only: ScenarioReport
    joint: ScenarioReport
    deltas: dict = field(default_factory=dict)
    ie: dict = field(default_factory=dict)
    oe_learning: dict = field(default_factory=dict)
    oe_adaptation: dict = field(default_factory=dict)


def effects(baseline, learn_only, adapt_only, joint) -> EffectReport:
    """All differences, the interaction coefficient and both offsetting effects, per measure."""
    rep = EffectReport(baseline, learn_only, adapt_only, joint)
    for m in MEASURES:
        b, l, a, j = (r.measure(m) for r in (baseline, learn_only, adapt_only, joint))
        rep.deltas[m] = {
            "learning": l - b, "adaptation": a - b, "joint": j - b,
            "learning_after_adaptation": j - a, "adaptation_after_learning": j - l,
        }
        rep.ie[m] = interaction_coefficient(b, l, a, j)
        rep.oe_learning[m] = offsetting_effects(a, j)
        rep.oe_adaptation[m] = offsetting_effects(l, j)
    return rep


@dataclass(frozen=True)
class SignificanceResult:
    stars: str
    p_value: float
    statistic: float


def significance(sample_a, sample_b, test: str = "welch", level: float = SIGNIFICANCE_LEVEL) -> SignificanceResult:
    """Two-sided comparison of per-replication values; ``**`` when p < ``level``."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    if test not in TESTS:
        raise ValueError(f"test must be one of {TESTS}, got {test!r}")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        if a[0] == b[0]:
            return SignificanceResult("n.s.", 1.0, 0.0)
        return SignificanceResult("**", 0.0, math.copysign(math.inf, a[0] - b[0]))
    with warnings.catch_warnings():
        # near-constant samples (runs that all hit the optimum) trip a precision warning
        warnings.simplefilter("ignore", RuntimeWarning)
        if test == "welch":
            res = stats.ttest_ind(a, b, equal_var=False)
        else:
            res = stats.mannwhitneyu(a, b, alternative="two-sided")
    p = float(res.pvalue)
    return SignificanceResult("**" if p < level else "n.s.", p, float(res.statistic))


# ---------------------------------------------------------------- tables

LEARNING_NAMES = {0.0: "Zero", 0.25: "Moderate", 0.5: "High"}
STRUCTURE_NAMES = {"decomposed": "Decomposed", "interdependent": "Interdependent",
                   "roll": "Roll", "custom": "Custom"}


def composition_name(tau) -> str:
    return {None: "Long-term", 10: "Medium-term", 1: "Short-term"}.get(tau, f"tau={tau}")


def learning_name(p: float) -> str:
    return LEARNING_NAMES.get(p, f"P={p:g}")


def fmt4(x: float) -> str:
    """Four decimals, rounding half up."""
    if x is None or math.isnan(x):
        return "NA"
    return str(Decimal(repr(float(x))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def fmt2(x: float) -> str:
    if math.isnan(x):
        return "NA"
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt_pct(x: float) -> str:
    if math.isnan(x):
        return "NA"
    return str(Decimal(repr(float(x) * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)) + "%"


class GridLayout:
    """Reports indexed by (structure, learning probability, tau) for one table family."""

    def __init__(self, reports):
        self.cells: dict[tuple, ScenarioReport] = {}
        self.groups: list[str] = []
        alphas = {r.scenario.alpha for r in reports}
        for r in reports:
            sc = r.scenario
            if sc is None:
                raise ValueError(f"report {r.label!r} carries no scenario")
            group = self.group_name(sc, multi_scheme=len(alphas) > 1)
            if group not in self.groups:
                self.groups.append(group)
            self.cells[(group, sc.learn_prob, sc.tau)] = r
        self.learning = sorted({k[1] for k in self.cells})
        taus = {k[2] for k in self.cells}
        self.taus = ([None] if None in taus else []) + sorted((t for t in taus if t is not None), reverse=True)
        missing = [(g, p, t) for g in self.groups for p in self.learning for t in self.taus
                   if (g, p, t) not in self.cells]
        if missing:
            raise ValueError(f"incomplete grid: missing cells {missing[:5]}")
        if 0.0 not in self.learning or None not in self.taus:
            raise ValueError("incomplete grid: need a zero-learning, single-auction baseline")

    @staticmethod
    def group_name(sc, multi_scheme: bool = False) -> str:
        name = STRUCTURE_NAMES[sc.structure]
        if sc.structure != "decomposed" and sc.structure != "interdependent":
            name += f" K={sc.k}"
        if multi_scheme:
            name += f" alpha={sc.alpha:g}"
        return name

    def __getitem__(self, key) -> ScenarioReport:
        return self.cells[key]


def performance_rows(layout: GridLayout):
    header = ["group_composition", "measure"] + [
        f"{g}/{learning_name(p)}" for g in layout.groups for p in layout.learning
    ]
    rows = []
    for tau in layout.taus:
        for measure in ("mean", "final"):
            rows.append([composition_name(tau), measure.capitalize()] + [
                fmt4(layout[(g, p, tau)].measure(measure)) for g in layout.groups for p in layout.learning
            ])
    return header, rows


def interaction_rows(layout: GridLayout):
    learns = [p for p in layout.learning if p != 0.0]
    taus = [t for t in layout.taus if t is not None]
    header = ["group_composition", "measure"] + [
        f"{g}/Zero to {learning_name(p).lower()}" for g in layout.groups for p in learns
    ]
    rows = []
    for tau in taus:
        for measure in ("mean", "final"):
            row = [f"{composition_name(None)} to {composition_name(tau).lower()}", measure.capitalize()]
            for g in layout.groups:
                for p in learns:
                    row.append(fmt2(interaction_coefficient(
                        layout[(g, 0.0, None)], layout[(g, p, None)], layout[(g, 0.0, tau)],
                        layout[(g, p, tau)], measure)))
            rows.append(row)
    return header, rows


def learning_offset_rows(layout: GridLayout):
    learns = [p for p in layout.learning if p != 0.0]
    header = ["group_composition", "measure"] + [
        f"{g}/Zero to {learning_name(p).lower()}" for g in layout.groups for p in learns
    ]
    rows = []
    for tau in layout.taus:
        for measure in ("mean", "final"):
            rows.append([composition_name(tau), measure.capitalize()] + [
                fmt_pct(offsetting_effects(layout[(g, 0.0, tau)], layout[(g, p, tau)], measure))
                for g in layout.groups for p in learns
            ])
    return header, rows


def adaptation_offset_rows(layout: GridLayout):
    taus = [t for t in layout.taus if t is not None]
    header = ["learning", "measure"] + [
        f"{g}/{composition_name(None)} to {composition_name(t).lower()}" for g in layout.groups for t in taus
    ]
    rows = []
    for p in layout.learning:
        for measure in ("mean", "final"):
            rows.append([learning_name(p), measure.capitalize()] + [
                fmt_pct(offsetting_effects(layout[(g, p, None)], layout[(g, p, t)], measure))
                for g in layout.groups for t in taus
            ])
    return header, rows


def significance_rows(layout: GridLayout, test: str = "welch"):
    """Stars for stepwise promotion of learning (per tau) and of adaptation (per learning level)."""
    header = ["comparison", "structure", "held_fixed", "step", "measure", "stars", "p_value"]
    rows = []
    for g in layout.groups:
        for tau in layout.taus:
            for lo, hi in zip(layout.learning, layout.learning[1:]):
                step = f"{learning_name(lo)} to {learning_name(hi).lower()}"
                for measure in ("mean", "final"):
                    res = significance(layout[(g, lo, tau)].samples(measure),
                                       layout[(g, hi, tau)].samples(measure), test)
                    rows.append(["learning", g, composition_name(tau), step, measure.capitalize(),
                                 res.stars, f"{res.p_value:.3g}"])
        for p in layout.learning:
            for lo, hi in zip(layout.taus, layout.taus[1:]):
                step = f"{composition_name(lo)} to {composition_name(hi).lower()}"
                for measure in ("mean", "final"):
                    res = significance(layout[(g, p, lo)].samples(measure),
                                       layout[(g, p, hi)].samples(measure), test)
                    rows.append(["adaptation", g, learning_name(p), step, measure.capitalize(),
                                 res.stars, f"{res.p_value:.3g}"])
    return header, rows


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_series(report: ScenarioReport, path) -> Path:
    rows = [[t + 1, f"{v:.6f}"] for t, v in enumerate(report.series)]
    return _write(Path(path), ["period", "mean_normalized_performance"], rows)


def emit_tables(reports, out_dir, test: str = "welch") -> dict[str, Path]:
    """Write the performance, interaction, offsetting and significance tables plus series files.

    With one replication per scenario the significance file holds only a header.
    """
    reports = list(reports)
    layout = GridLayout(reports)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {
        "table2": _write(out / "table2.csv", *performance_rows(layout)),
        "table3": _write(out / "table3.csv", *interaction_rows(layout)),
        "table4": _write(out / "table4.csv", *learning_offset_rows(layout)),
        "table5": _write(out / "table5.csv", *adaptation_offset_rows(layout)),
    }
    if min(r.n_replications for r in reports) >= 2:
        written["significance"] = _write(out / "significance.csv", *significance_rows(layout, test))
    else:
        header = ["comparison", "structure", "held_fixed", "step", "measure", "stars", "p_value"]
        written["significance"] = _write(out / "significance.csv", header, [])
    series_dir = out / "series"
    series_dir.mkdir(exist_ok=True)
    for r in reports:
        written[f"series/{r.label}"] = write_series(r, series_dir / f"{r.label}.csv")
    return written
