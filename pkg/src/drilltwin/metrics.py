"""Force-safety metrics over run logs.

Per structure, counted over the ticks attributed to it by the controller:

    contact    |F| above the contact threshold
    high       |F| above the structure's force limit
    undesired  |F| above the limit plus the activation margin (the hard bound)

The headline number is the proportion of a structure's contact time spent
above the hard bound; a total-duration normalization is reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .runlog import RunLog


@dataclass
class StructureMetrics:
    index: int
    name: str
    force_limit_n: float
    contact_time_s: float = 0.0
    contact_mean_n: Optional[float] = None
    contact_max_n: Optional[float] = None
    high_time_s: float = 0.0
    high_count: int = 0
    high_mean_n: Optional[float] = None
    high_max_n: Optional[float] = None
    undesired_time_s: float = 0.0
    undesired_count: int = 0
    undesired_mean_n: Optional[float] = None
    undesired_max_n: Optional[float] = None
    proportion_above_limit: Optional[float] = None    # of contact time
    proportion_of_total: float = 0.0                  # of run duration

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MetricsReport:
    duration_s: float
    contact_threshold_n: float
    activation_margin_n: float
    structures: list[StructureMetrics]
    breach_count: int = 0
    carved_voxels: int = 0
    assist_enabled: bool = True
    seed: int = 0
    scenario_name: str = ""

    def by_index(self, index: int) -> StructureMetrics:
        for s in self.structures:
            if s.index == index:
                return s
        raise KeyError(f"no structure {index} in report")

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "assist_enabled": self.assist_enabled,
            "duration_s": self.duration_s,
            "contact_threshold_n": self.contact_threshold_n,
            "activation_margin_n": self.activation_margin_n,
            "breach_count": self.breach_count,
            "carved_voxels": self.carved_voxels,
            "structures": [s.to_dict() for s in self.structures],
        }

    def table(self) -> str:
        lines = [
            f"scenario {self.scenario_name!r}  seed {self.seed}  "
            f"assist {'on' if self.assist_enabled else 'off'}  "
            f"duration {self.duration_s:.3f} s  breaches {self.breach_count}  "
            f"carved {self.carved_voxels}",
            f"{'structure':<16} {'limit N':>8} {'contact s':>10} {'mean N':>8} "
            f"{'max N':>8} {'high s':>8} {'undes s':>8} {'prop':>7}",
        ]
        for s in self.structures:
            prop = "-" if s.proportion_above_limit is None else f"{s.proportion_above_limit:.3f}"
            mean = "-" if s.contact_mean_n is None else f"{s.contact_mean_n:.3f}"
            mx = "-" if s.contact_max_n is None else f"{s.contact_max_n:.3f}"
            lines.append(
                f"{s.name:<16} {s.force_limit_n:>8.2f} {s.contact_time_s:>10.3f} "
                f"{mean:>8} {mx:>8} {s.high_time_s:>8.3f} {s.undesired_time_s:>8.3f} "
                f"{prop:>7}")
        return "\n".join(lines)


def compute_metrics(log: RunLog) -> MetricsReport:
    """Reduce a run log to the per-structure safety metrics.

    Requires per-tick structure attribution in the log; logs without it (or
    without force magnitudes) are rejected.
    """
    r = log.records
    for col in ("structure", "f_tip_mag", "t"):
        if col not in r.dtype.names:
            raise ValueError(f"run log lacks required column {col!r}")

    header = log.header
    scen = header.get("scenario", {})
    ctrl = scen.get("controller", {})
    threshold = float(ctrl.get("contact_threshold_n", 0.3))
    margin = float(ctrl.get("activation_margin_n", 0.2))
    dt = 1.0 / float(header["rates"]["sim_hz"])
    duration = len(r) * dt

    f = r["f_tip_mag"]
    attributed = r["structure"].astype(int)

    out = []
    for s in header["structures"]:
        idx = int(s["index"])
        limit = float(s["force_limit_n"])
        hard = limit + margin
        mine = attributed == idx
        contact = mine & (f > threshold)
        high = mine & (f > limit)
        undesired = mine & (f > hard)
        m = StructureMetrics(index=idx, name=str(s["name"]), force_limit_n=limit)
        n_contact = int(np.count_nonzero(contact))
        m.contact_time_s = n_contact * dt
        if n_contact:
            m.contact_mean_n = float(f[contact].mean())
            m.contact_max_n = float(f[contact].max())
        m.high_count = int(np.count_nonzero(high))
        m.high_time_s = m.high_count * dt
        if m.high_count:
            m.high_mean_n = float(f[high].mean())
            m.high_max_n = float(f[high].max())
        m.undesired_count = int(np.count_nonzero(undesired))
        m.undesired_time_s = m.undesired_count * dt
        if m.undesired_count:
            m.undesired_mean_n = float(f[undesired].mean())
            m.undesired_max_n = float(f[undesired].max())
        if n_contact:
            m.proportion_above_limit = m.undesired_time_s / m.contact_time_s
        m.proportion_of_total = m.undesired_time_s / duration if duration > 0 else 0.0
        out.append(m)

    breaches = sum(1 for e in log.events if e.get("kind") == "breach")
    carved = int(r["carved"][-1]) if ("carved" in r.dtype.names and len(r)) else 0
    return MetricsReport(
        duration_s=duration,
        contact_threshold_n=threshold,
        activation_margin_n=margin,
        structures=out,
        breach_count=breaches,
        carved_voxels=carved,
        assist_enabled=bool(scen.get("assist_enabled", True)),
        seed=int(header.get("seed", 0)),
        scenario_name=str(scen.get("name", "")),
    )


def _comparable_scenario(header: dict) -> dict:
    # names are labels, not config; only physical settings gate comparability
    scen = dict(header.get("scenario", {}))
    scen.pop("assist_enabled", None)
    scen.pop("name", None)
    return scen


@dataclass
class StructureDelta:
    """Per-structure A-vs-B deltas across the four metric families."""

    index: int
    name: str
    contact_time_a: float
    contact_time_b: float
    high_time_a: float
    high_time_b: float
    undesired_time_a: float
    undesired_time_b: float
    proportion_a: Optional[float]
    proportion_b: Optional[float]
    proportion_delta: Optional[float]
    relative_reduction: Optional[float]   # (a - b) / a, when a is defined and > 0
    max_force_a: Optional[float]
    max_force_b: Optional[float]
    improved: Optional[bool] = None       # None when neither run distinguishes the two

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _judge_improved(sa: StructureMetrics, sb: StructureMetrics) -> Optional[bool]:
    # Undesired exposure decides; peak contact force breaks ties.
    if sa.undesired_time_s != sb.undesired_time_s:
        return sb.undesired_time_s < sa.undesired_time_s
    a, b = sa.contact_max_n, sb.contact_max_n
    if a is not None and b is not None and a != b:
        return b < a
    return None


@dataclass
class ComparisonReport:
    seed: int
    assist_a: bool
    assist_b: bool
    structures: list[StructureDelta]

    @property
    def improved_count(self) -> int:
        return sum(1 for s in self.structures if s.improved is True)

    @property
    def worsened_count(self) -> int:
        return sum(1 for s in self.structures if s.improved is False)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "assist_a": self.assist_a, "assist_b": self.assist_b,
                "improved": self.improved_count, "worsened": self.worsened_count,
                "structures": [s.to_dict() for s in self.structures]}

    def table(self) -> str:
        lines = [
            f"seed {self.seed}  A assist {'on' if self.assist_a else 'off'}"
            f"  B assist {'on' if self.assist_b else 'off'}"
            f"  improved {self.improved_count}  worsened {self.worsened_count}",
            f"{'structure':<16} {'prop A':>8} {'prop B':>8} {'delta':>8} "
            f"{'rel red':>8} {'max A':>8} {'max B':>8} {'undes A':>8} {'undes B':>8} {'sign':>5}",
        ]
        for s in self.structures:
            def fmt(v, spec=".3f"):
                return "-" if v is None else format(v, spec)
            sign = "-" if s.improved is None else ("+" if s.improved else "x")
            lines.append(f"{s.name:<16} {fmt(s.proportion_a):>8} {fmt(s.proportion_b):>8} "
                         f"{fmt(s.proportion_delta):>8} {fmt(s.relative_reduction):>8} "
                         f"{fmt(s.max_force_a):>8} {fmt(s.max_force_b):>8} "
                         f"{fmt(s.undesired_time_a):>8} {fmt(s.undesired_time_b):>8} {sign:>5}")
        return "\n".join(lines)


def compare_runs(log_a: RunLog, log_b: RunLog) -> ComparisonReport:
    """Paired comparison of two runs differing only in assist enablement.

    Seeds and every other scenario field must match, otherwise the comparison
    would not be apples to apples and is refused.
    """
    if int(log_a.header.get("seed", -1)) != int(log_b.header.get("seed", -2)):
        raise ValueError("runs use different seeds; comparison refused")
    if _comparable_scenario(log_a.header) != _comparable_scenario(log_b.header):
        raise ValueError("runs differ beyond assist enablement; comparison refused")

    ma = compute_metrics(log_a)
    mb = compute_metrics(log_b)
    deltas = []
    for sa in ma.structures:
        sb = mb.by_index(sa.index)
        pa, pb = sa.proportion_above_limit, sb.proportion_above_limit
        delta = None if (pa is None or pb is None) else pb - pa
        rel = None
        if pa is not None and pb is not None and pa > 0:
            rel = (pa - pb) / pa
        deltas.append(StructureDelta(
            sa.index, sa.name,
            sa.contact_time_s, sb.contact_time_s,
            sa.high_time_s, sb.high_time_s,
            sa.undesired_time_s, sb.undesired_time_s,
            pa, pb, delta, rel,
            sa.contact_max_n, sb.contact_max_n,
            improved=_judge_improved(sa, sb)))
    return ComparisonReport(int(log_a.header["seed"]),
                            bool(log_a.header["scenario"].get("assist_enabled", True)),
                            bool(log_b.header["scenario"].get("assist_enabled", True)),
                            deltas)
