"""Per-option cost measurement.

Times a pricing kernel over a contract book and attributes average power to
it, yielding the two numbers the ranking needs: seconds per option and
joules per option. Power comes from one of three sources: a fixed wattage,
a recorded `t_seconds,watts` trace integrated over the run, or a cumulative
joule counter polled while the benchmark executes.
"""

from __future__ import annotations

import csv
import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .isoqos import PlatformRecord

__all__ = [
    "ConstantPower",
    "TracePower",
    "CounterPower",
    "parse_power_spec",
    "BenchResult",
    "bench_kernel",
    "export_platform_record",
]


class ConstantPower:
    """Fixed draw in watts, for platforms without instrumentation."""

    def __init__(self, watts: float):
        if not watts > 0 or not math.isfinite(watts):
            raise ValueError(f"watts must be a positive finite number, got {watts}")
        self.watts = float(watts)

    def start(self) -> None:
        pass

    def finish(self, elapsed: float) -> float:
        if elapsed <= 0:
            raise ValueError(f"elapsed must be > 0, got {elapsed}")
        return self.watts


class TracePower:
    """Average of a recorded power profile over the run's duration.

    The trace is `t_seconds,watts` rows with strictly increasing times
    (header optional). Samples are integrated with the trapezoid rule from
    t=0 to the elapsed time; a trace that ends before the run does is an
    error rather than an extrapolation.
    """

    def __init__(self, path):
        times = []
        watts = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if lineno == 1 and row[0].strip().lower() in ("t_seconds", "t", "time"):
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
                try:
                    t, w = float(row[0]), float(row[1])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad sample {row!r}") from None
                if times and t <= times[-1]:
                    raise ValueError(f"{path}:{lineno}: times must be strictly increasing")
                if w < 0:
                    raise ValueError(f"{path}:{lineno}: negative power {w}")
                times.append(t)
                watts.append(w)
        if len(times) < 2:
            raise ValueError(f"{path}: need at least 2 power samples")
        self._t = np.asarray(times)
        self._w = np.asarray(watts)

    def start(self) -> None:
        pass

    def finish(self, elapsed: float) -> float:
        if elapsed <= 0:
            raise ValueError(f"elapsed must be > 0, got {elapsed}")
        if elapsed > self._t[-1]:
            raise RuntimeError(
                f"power trace ends at {self._t[-1]:g} s but the run took {elapsed:g} s"
            )
        mask = self._t < elapsed
        tt = np.concatenate([self._t[mask], [elapsed]])
        ww = np.concatenate([self._w[mask], [np.interp(elapsed, self._t, self._w)]])
        if tt[0] > 0.0:
            # hold the first sample back to t=0 rather than extrapolate
            tt = np.concatenate([[0.0], tt])
            ww = np.concatenate([[ww[0]], ww])
        return float(np.trapezoid(ww, tt) / elapsed)


class CounterPower:
    """Cumulative energy counter exposed as a single ASCII float in a file.

    A background thread samples the file while the benchmark runs so that a
    counter moving backwards is caught even if it recovers by the end. The
    average draw is the joule delta over the elapsed wall time.
    """

    def __init__(self, path, interval: float = 0.05):
        if interval <= 0:
            raise ValueError(f"poll interval must be > 0, got {interval}")
        self.path = path
        self.interval = interval
        self._samples: list[float] = []
        self._rollback = False
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _read(self, retries: int = 5) -> float:
        last_err: Exception | None = None
        for _ in range(retries):
            try:
                with open(self.path) as fh:
                    return float(fh.read().strip())
            except ValueError as err:
                # writer may be mid-update; retry shortly
                last_err = err
                time.sleep(0.01)
        raise ValueError(f"{self.path}: unreadable counter value") from last_err

    def _record(self, value: float) -> None:
        if self._samples and value < self._samples[-1]:
            self._rollback = True
        self._samples.append(value)

    def _poll(self) -> None:
        while not self._stop.wait(self.interval):
            try:
                value = self._read(retries=1)
            except ValueError:
                continue
            self._record(value)

    def start(self) -> None:
        self._samples.clear()
        self._rollback = False
        self._stop.clear()
        self._record(self._read())
        self._thread = threading.Thread(target=self._poll, daemon=True)
        self._thread.start()

    def finish(self, elapsed: float) -> float:
        if self._thread is None:
            raise RuntimeError("finish() called before start()")
        self._stop.set()
        self._thread.join()
        self._thread = None
        self._record(self._read())
        if elapsed <= 0:
            raise ValueError(f"elapsed must be > 0, got {elapsed}")
        if self._rollback:
            raise RuntimeError(f"{self.path}: energy counter rolled back during the run")
        return (self._samples[-1] - self._samples[0]) / elapsed


def parse_power_spec(spec: str):
    """Build a power model from `const:WATTS`, `trace:FILE` or `counter:FILE[:DT]`."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise ValueError(f"power spec {spec!r} must look like kind:value")
    if kind == "const":
        try:
            return ConstantPower(float(rest))
        except ValueError as err:
            raise ValueError(f"bad constant power {rest!r}: {err}") from None
    if kind == "trace":
        return TracePower(rest)
    if kind == "counter":
        path, sep, dt = rest.rpartition(":")
        if sep and path:
            return CounterPower(path, interval=float(dt))
        return CounterPower(rest)
    raise ValueError(f"unknown power source {kind!r} (expected const, trace or counter)")


@dataclass(frozen=True)
class BenchResult:
    kernel: str
    options_priced: int
    elapsed: float  # seconds, warm-up excluded
    s_opt: float
    avg_power: float  # watts
    j_opt: float


def bench_kernel(pricer, book, power, repetitions: int, kernel: str = "custom") -> BenchResult:
    """Time `repetitions` passes over the book and attribute power to them.

    One untimed pass runs first so caches and lazy setup do not pollute the
    measurement. The total priced count must reach 100 or the per-option
    figures are too noisy to report.
    """
    contracts = list(book)
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if not contracts:
        raise ValueError("contract book must be non-empty")
    total = repetitions * len(contracts)
    if total < 100:
        raise ValueError(
            f"benchmark would price only {total} options; need at least 100 "
            f"(raise --reps or use a bigger book)"
        )
    sink = 0.0
    for contract in contracts:  # warm-up, untimed
        sink += float(pricer(contract))
    power.start()
    start = time.perf_counter()
    for _ in range(repetitions):
        for contract in contracts:
            sink += float(pricer(contract))
    elapsed = time.perf_counter() - start
    if elapsed <= 0:
        raise RuntimeError("clock reported a non-positive benchmark duration")
    avg_power = power.finish(elapsed)
    if avg_power < 0:
        raise RuntimeError(f"average power came out negative ({avg_power} W)")
    if not math.isfinite(sink):
        raise RuntimeError("kernel produced non-finite prices during the benchmark")
    s_opt = elapsed / total
    return BenchResult(
        kernel=kernel,
        options_priced=total,
        elapsed=elapsed,
        s_opt=s_opt,
        avg_power=avg_power,
        j_opt=avg_power * s_opt,
    )


def export_platform_record(result: BenchResult, name: str, config: str, vec_type: str) -> PlatformRecord:
    """Shape a benchmark result as a row the ranking tools accept."""
    return PlatformRecord(
        name=name,
        config=config,
        vec_type=vec_type,
        s_opt=result.s_opt,
        j_opt=result.j_opt,
    )
