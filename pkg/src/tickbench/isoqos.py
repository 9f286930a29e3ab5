"""Platform ranking at a fixed QoS target.

Given per-option latency (S/Opt) and energy (J/Opt) measurements for each
platform, a contract count and a session's update count, a platform is
feasible at time budget G when it prices the whole book inside one gap,
N_opt * S_opt <= G. Feasible platforms are ranked by the total energy spent
pricing over the session: the per-gap energy N_opt * J_Opt times the number
of gaps actually served, floor(Y% of the session's updates). Idle power is
excluded throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

from .gaps import QosCurve, gap_for_qos

__all__ = [
    "PlatformRecord",
    "RankingEntry",
    "Ranking",
    "feasible",
    "gap_count",
    "session_energy",
    "rank",
    "load_platforms",
    "write_platforms",
    "ranking_table",
    "write_ranking_csv",
]


@dataclass(frozen=True)
class PlatformRecord:
    """One measured (platform, configuration) row.

    ``config`` is the free-form nodes x cores x threads label (e.g. "16x4x1")
    and ``vec_type`` names how the binary was vectorised; both are opaque
    here. s_opt is seconds per option, j_opt joules per option.
    """

    name: str
    config: str
    vec_type: str
    s_opt: float
    j_opt: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("platform name must be non-empty")
        if not self.s_opt > 0:
            raise ValueError(f"s_opt must be > 0, got {self.s_opt}")
        if not self.j_opt > 0:
            raise ValueError(f"j_opt must be > 0, got {self.j_opt}")

    @property
    def label(self) -> str:
        return f"{self.name}({self.config})" if self.config else self.name


@dataclass(frozen=True)
class RankingEntry:
    """Feasibility verdict and session energy for one platform at one target."""

    platform: PlatformRecord
    required_time: float  # N_opt * s_opt, seconds
    feasible: bool
    n_gaps: int
    gap_energy: float  # joules per served gap
    session_energy: float  # joules over the session

    @property
    def energy_kj(self) -> float:
        return self.session_energy / 1000.0


def feasible(platform: PlatformRecord, g: float, n_opt: int) -> bool:
    """True when the book fits in the budget: n_opt * s_opt <= g (inclusive)."""
    if g <= 0:
        raise ValueError(f"time budget must be > 0, got {g}")
    if n_opt < 1:
        raise ValueError(f"n_opt must be >= 1, got {n_opt}")
    return n_opt * platform.s_opt <= g


def gap_count(y: float, total_updates: int) -> int:
    """Number of gaps served at QoS Y%: floor(Y/100 * total updates).

    Computed with exact decimal arithmetic so integer boundaries are not lost
    to binary rounding (e.g. Y=30 of 10 updates is exactly 3).
    """
    if not 0 < y <= 100:
        raise ValueError(f"QoS target must be in (0, 100], got {y}")
    if total_updates < 0:
        raise ValueError("total_updates must be >= 0")
    return int(Fraction(str(y)) * total_updates / 100)


def session_energy(platform: PlatformRecord, y: float, total_updates: int, n_opt: int) -> float:
    """Joules spent pricing over the session at QoS Y%, idle power excluded."""
    return gap_count(y, total_updates) * n_opt * platform.j_opt


@dataclass(frozen=True)
class Ranking:
    """Feasible platforms ordered by ascending session energy, plus the rest."""

    ranked: tuple[RankingEntry, ...]
    excluded: tuple[RankingEntry, ...]
    g: float
    y: float
    total_updates: int
    n_opt: int


def rank(
    platforms,
    y: float,
    total_updates: int,
    n_opt: int,
    curve: QosCurve | None = None,
    g: float | None = None,
) -> Ranking:
    """Rank platforms by session energy under the iso-QoS constraint.

    The time budget comes from the QoS curve at target Y unless an explicit
    ``g`` is given. Infeasible platforms are excluded from the ranking but
    reported alongside; ties break by ascending s_opt, then name.
    """
    if not platforms:
        raise ValueError("platform list must be non-empty")
    if (curve is None) == (g is None):
        raise ValueError("provide exactly one of curve or g")
    budget = g if g is not None else gap_for_qos(curve, y)
    if budget <= 0:
        raise ValueError(f"time budget must be > 0, got {budget}")
    n = gap_count(y, total_updates)
    entries = []
    for platform in platforms:
        energy = n * n_opt * platform.j_opt
        entries.append(
            RankingEntry(
                platform=platform,
                required_time=n_opt * platform.s_opt,
                feasible=feasible(platform, budget, n_opt),
                n_gaps=n,
                gap_energy=n_opt * platform.j_opt,
                session_energy=energy,
            )
        )
    order = lambda e: (e.session_energy, e.platform.s_opt, e.platform.name)
    ranked = tuple(sorted((e for e in entries if e.feasible), key=order))
    excluded = tuple(sorted((e for e in entries if not e.feasible), key=order))
    return Ranking(
        ranked=ranked,
        excluded=excluded,
        g=budget,
        y=y,
        total_updates=total_updates,
        n_opt=n_opt,
    )


def _parse_float(path, lineno, field, text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: bad {field} value {text!r}") from None


def load_platforms(path) -> list[PlatformRecord]:
    """Read `name,config,vec_type,s_opt,j_opt` rows; a header row is optional."""
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].startswith("#")):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            if lineno == 1 and row[3].strip().lower() in ("s_opt", "s/opt"):
                continue
            records.append(
                PlatformRecord(
                    name=row[0].strip(),
                    config=row[1].strip(),
                    vec_type=row[2].strip(),
                    s_opt=_parse_float(path, lineno, "s_opt", row[3].strip()),
                    j_opt=_parse_float(path, lineno, "j_opt", row[4].strip()),
                )
            )
    if not records:
        raise ValueError(f"{path}: no platform records found")
    return records


def write_platforms(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "config", "vec_type", "s_opt", "j_opt"])
        for rec in records:
            writer.writerow([rec.name, rec.config, rec.vec_type, repr(rec.s_opt), repr(rec.j_opt)])


def ranking_table(ranking: Ranking) -> str:
    """Aligned text report: the ranked table plus the excluded platforms."""
    headers = ["Platform", "VEC TYPE", "S/Opt", "J/Opt", "Energy(KJ)"]
    rows = [
        [e.platform.label, e.platform.vec_type, f"{e.platform.s_opt:.4f}",
         f"{e.platform.j_opt:.4f}", f"{e.energy_kj:.2f}"]
        for e in ranking.ranked
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        f"QoS target {ranking.y:g}%  G = {ranking.g:g} s  "
        f"updates = {ranking.total_updates}  options = {ranking.n_opt}  "
        f"gaps served = {ranking.ranked[0].n_gaps if ranking.ranked else gap_count(ranking.y, ranking.total_updates)}",
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    if not rows:
        lines.append("(no feasible platform)")
    if ranking.excluded:
        lines.append("")
        lines.append(f"Excluded (book needs more than G = {ranking.g:g} s):")
        for e in ranking.excluded:
            lines.append(
                f"  {e.platform.label}  {e.platform.vec_type}  "
                f"requires {e.required_time:.4f} s"
            )
    return "\n".join(lines) + "\n"


def write_ranking_csv(ranking: Ranking, path) -> None:
    """Ranked rows with the table's five columns, in ranking order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["platform", "vec_type", "s_opt", "j_opt", "energy_kj"])
        for e in ranking.ranked:
            writer.writerow(
                [e.platform.label, e.platform.vec_type,
                 f"{e.platform.s_opt:.4f}", f"{e.platform.j_opt:.4f}", f"{e.energy_kj:.2f}"]
            )
