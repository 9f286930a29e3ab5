"""Inter-arrival gap statistics and the QoS curve they induce.

A tick trace becomes a histogram of the time gaps between consecutive
updates. Reading the cumulative frequency of that histogram from the far end
gives the quality-of-service curve: QoS(G) is the fraction of gaps at least G
long, i.e. the share of update windows in which a batch that needs G seconds
would have finished. Order arrival is Poisson-like, so the curve is also fit
with a cumulative-Poisson model whose single rate parameter lambda is in bin
units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, stats

__all__ = [
    "GapHistogram",
    "QosCurve",
    "PoissonFit",
    "build_histogram",
    "histogram_from_gaps",
    "empirical_qos",
    "fit_poisson",
    "poisson_qos",
    "exponential_qos",
    "gap_for_qos",
    "write_curve_csv",
    "read_curve_csv",
]


@dataclass(frozen=True)
class GapHistogram:
    """Binned inter-arrival gaps: counts[i] gaps fell in [i*w, (i+1)*w)."""

    bin_width: float  # seconds
    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        if sum(self.counts) != self.total:
            raise ValueError("histogram counts do not sum to total")

    @property
    def mean_bin(self) -> float:
        """Average bin index, i.e. the mean binned gap in bin units."""
        return sum(i * c for i, c in enumerate(self.counts)) / self.total


@dataclass(frozen=True)
class QosCurve:
    """Survival curve of gaps at bin-edge resolution plus the Poisson fit.

    survival[i] is the fraction of gaps >= i*bin_width; it starts at 1, never
    increases, and carries one trailing 0 past the largest observed gap.
    fitted_lambda is None when the histogram was degenerate (all gaps in
    bin 0, where the Poisson mean estimate collapses to zero).
    """

    bin_width: float
    survival: tuple[float, ...]
    fitted_lambda: float | None
    total_updates: int

    def qos_at(self, g: float) -> float:
        """Empirical QoS for a time budget of g seconds (inclusive edges)."""
        if g < 0:
            raise ValueError("time budget must be >= 0")
        idx = math.ceil(g / self.bin_width)  # smallest edge covering g
        if idx >= len(self.survival):
            return 0.0
        return self.survival[idx]


def _gaps_to_histogram(gaps_s: Sequence[float], bin_width: float) -> GapHistogram:
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    bins = [int(g // bin_width) for g in gaps_s]
    counts = [0] * (max(bins) + 1)
    for b in bins:
        counts[b] += 1
    return GapHistogram(bin_width=bin_width, counts=tuple(counts), total=len(bins))


def build_histogram(ticks, bin_width: float = 1.0) -> GapHistogram:
    """Histogram of gaps between consecutive ticks of a trace.

    Gap k is t_{k+1} - t_k in seconds, assigned to bin floor(gap/bin_width);
    a trace of U ticks yields U-1 gaps.
    """
    if len(ticks) < 2:
        raise ValueError(f"need at least 2 ticks to form gaps, got {len(ticks)}")
    stamps = [t.timestamp_ns for t in ticks]
    gaps = [(b - a) * 1e-9 for a, b in zip(stamps, stamps[1:])]
    if any(g < 0 for g in gaps):
        raise ValueError("trace timestamps are not non-decreasing")
    return _gaps_to_histogram(gaps, bin_width)


def histogram_from_gaps(gaps_s: Sequence[float], bin_width: float = 1.0) -> GapHistogram:
    """Histogram directly from a list of gap durations in seconds."""
    if len(gaps_s) < 1:
        raise ValueError("need at least one gap")
    if any(g < 0 for g in gaps_s):
        raise ValueError("gaps must be >= 0")
    return _gaps_to_histogram(gaps_s, bin_width)


@dataclass(frozen=True)
class PoissonFit:
    """Fitted Poisson rate (bin units) and its fit quality.

    max_abs_deviation is the largest gap between the model survival and the
    empirical survival across bin edges, both using the inclusive edge
    convention P(bin >= i).
    """

    lam: float
    max_abs_deviation: float


def _model_survival(lam: float, edges: int) -> np.ndarray:
    """P(bin >= i) for i = 0..edges-1 under a Poisson(lam) bin distribution."""
    out = np.empty(edges)
    out[0] = 1.0
    if edges > 1:
        out[1:] = stats.poisson.sf(np.arange(edges - 1), lam)  # P(X > i-1) = P(X >= i)
    return out


def _survival_from_counts(counts: Sequence[int], total: int) -> tuple[float, ...]:
    tail = 0
    survival = [0.0] * (len(counts) + 1)
    for i in range(len(counts) - 1, -1, -1):
        tail += counts[i]
        survival[i] = tail / total
    return tuple(survival)


def fit_poisson(hist: GapHistogram, method: str = "mle") -> PoissonFit:
    """Fit the Poisson rate of the binned gap distribution.

    ``mle`` uses the closed-form maximum-likelihood estimator (the mean binned
    gap); ``lsq`` minimises the squared deviation between the model and the
    empirical survival curve. Both are reported by the CLI; MLE is the
    default everywhere else.
    """
    if hist.total < 2:
        raise ValueError(f"need at least 2 gaps to fit, got {hist.total}")
    if len(hist.counts) == 1:
        raise ValueError("degenerate histogram: all gaps fall in bin 0")
    empirical = np.array(_survival_from_counts(hist.counts, hist.total))
    mle = hist.mean_bin
    if method == "mle":
        lam = mle
    elif method == "lsq":
        def cost(lam):
            return float(np.sum((_model_survival(lam, len(empirical)) - empirical) ** 2))

        res = optimize.minimize_scalar(cost, bounds=(1e-9, max(4.0 * mle, 1.0)), method="bounded")
        lam = float(res.x)
    else:
        raise ValueError(f"unknown fit method {method!r}; expected 'mle' or 'lsq'")
    deviation = float(np.max(np.abs(_model_survival(lam, len(empirical)) - empirical)))
    return PoissonFit(lam=lam, max_abs_deviation=deviation)


def empirical_qos(hist: GapHistogram) -> QosCurve:
    """QoS curve of a gap histogram: the reflected cumulative frequency.

    survival[i] = (# gaps >= i*bin_width) / total. The Poisson rate is fitted
    alongside when the histogram supports it.
    """
    if hist.total < 1:
        raise ValueError("histogram holds no gaps")
    try:
        lam = fit_poisson(hist).lam
    except ValueError:
        lam = None
    return QosCurve(
        bin_width=hist.bin_width,
        survival=_survival_from_counts(hist.counts, hist.total),
        fitted_lambda=lam,
        total_updates=hist.total + 1,
    )


def poisson_qos(t: float, lam: float, bin_width: float = 1.0) -> float:
    """Model QoS at time t: 1 - PoissonCDF(floor(t/bin_width); lam)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(stats.poisson.sf(math.floor(t / bin_width), lam))


def exponential_qos(t: float, mean_gap: float) -> float:
    """Continuous-time comparison model: survival of exponential gaps."""
    if mean_gap <= 0:
        raise ValueError("mean_gap must be > 0")
    return math.exp(-t / mean_gap)


def gap_for_qos(curve: QosCurve, target_pct: float, use_fitted: bool = False) -> float:
    """Largest time budget G (bin-edge resolution) with QoS(G) >= target.

    A gap qualifies when gap >= G: finishing exactly as the next update
    arrives still counts. By default the empirical survival decides; with
    ``use_fitted`` the Poisson model survival (same inclusive edge convention)
    is scanned instead.
    """
    if not 0 < target_pct <= 100:
        raise ValueError(f"target QoS must be in (0, 100], got {target_pct}")
    target = target_pct / 100.0
    if use_fitted:
        if curve.fitted_lambda is None:
            raise ValueError("curve has no fitted lambda")
        lam = curve.fitted_lambda
        i = 0
        while float(stats.poisson.sf(i, lam)) >= target:  # P(bin >= i+1)
            i += 1
        return i * curve.bin_width
    best = 0
    for i, level in enumerate(curve.survival):
        if level >= target:
            best = i
    return best * curve.bin_width


def write_curve_csv(curve: QosCurve, path) -> None:
    """Emit `bin_start_s,empirical_qos,fitted_qos` rows for plotting."""
    lam = curve.fitted_lambda
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start_s", "empirical_qos", "fitted_qos"])
        model = _model_survival(lam, len(curve.survival)) if lam is not None else None
        for i, level in enumerate(curve.survival):
            fitted = f"{model[i]:.9f}" if model is not None else ""
            writer.writerow([f"{i * curve.bin_width:.9g}", f"{level:.9f}", fitted])


def read_curve_csv(path) -> QosCurve:
    """Load a curve CSV back; the fitted column is informational only."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty curve file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (IndexError, ValueError):
                raise ValueError(f"{path}:{lineno}: bad curve row {row!r}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: curve needs at least two bin edges")
    starts = [r[0] for r in rows]
    widths = {round(b - a, 12) for a, b in zip(starts, starts[1:])}
    if len(widths) != 1:
        raise ValueError(f"{path}: bin starts are not evenly spaced")
    survival = tuple(r[1] for r in rows)
    if survival[0] != 1.0 or any(b > a + 1e-12 for a, b in zip(survival, survival[1:])):
        raise ValueError(f"{path}: survival column must start at 1 and be non-increasing")
    return QosCurve(
        bin_width=widths.pop(),
        survival=survival,
        fitted_lambda=None,
        total_updates=0,
    )
