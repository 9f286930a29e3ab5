"""Market data replay and consumption over UDP multicast.

A recorded tick trace is replayed onto a multicast group with its original
inter-arrival gaps (optionally rescaled), one ASCII datagram per tick. The
consumer joins the group, re-prices a book of contracts whenever the traded
price actually changes, and abandons a half-priced book the moment a newer
price supersedes it. Session counters capture how often the book was fully
re-priced before being overtaken, which is the delivered quality of service.
"""

from __future__ import annotations

import csv
import json
import math
import socket
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .pricing import OptionContract, OptionKind

__all__ = [
    "Tick",
    "load_trace",
    "write_trace",
    "encode_tick",
    "decode_tick",
    "parse_group",
    "ContractBook",
    "load_book",
    "ReplayReport",
    "replay",
    "SessionStats",
    "consume",
]

_RECV_TIMEOUT = 0.05
_SPIN_WINDOW = 0.002  # busy-wait tail of each scheduled send, seconds


@dataclass(frozen=True)
class Tick:
    """One price update: nanosecond timestamp, instrument symbol, trade price."""

    timestamp_ns: int
    symbol: str
    price: float

    def __post_init__(self):
        if self.timestamp_ns < 0:
            raise ValueError(f"timestamp_ns must be >= 0, got {self.timestamp_ns}")
        if not self.symbol or any(c in self.symbol for c in ",\n\r"):
            raise ValueError(f"bad symbol {self.symbol!r}")
        if not math.isfinite(self.price) or self.price <= 0:
            raise ValueError(f"price must be positive and finite, got {self.price}")


def load_trace(path) -> list[Tick]:
    """Read `timestamp_ns,symbol,price` rows (header optional, must be time-ordered)."""
    ticks: list[Tick] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "timestamp_ns":
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                tick = Tick(int(row[0]), row[1].strip(), float(row[2]))
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
            if ticks and tick.timestamp_ns < ticks[-1].timestamp_ns:
                raise ValueError(
                    f"{path}:{lineno}: timestamps must be non-decreasing "
                    f"({tick.timestamp_ns} after {ticks[-1].timestamp_ns})"
                )
            ticks.append(tick)
    return ticks


def write_trace(ticks, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_ns", "symbol", "price"])
        for tick in ticks:
            writer.writerow([tick.timestamp_ns, tick.symbol, repr(tick.price)])


def encode_tick(tick: Tick) -> bytes:
    return f"{tick.timestamp_ns},{tick.symbol},{tick.price!r}\n".encode("ascii")


def decode_tick(data: bytes) -> Tick:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise ValueError("datagram is not ASCII") from None
    parts = text.rstrip("\n").split(",")
    if len(parts) != 3:
        raise ValueError(f"datagram has {len(parts)} fields, expected 3")
    return Tick(int(parts[0]), parts[1], float(parts[2]))


def parse_group(group: str) -> tuple[str, int]:
    """Split `ADDR:PORT` and validate both halves."""
    addr, sep, port_text = group.rpartition(":")
    if not sep or not addr:
        raise ValueError(f"group {group!r} must look like ADDR:PORT")
    try:
        socket.inet_aton(addr)
    except OSError:
        raise ValueError(f"bad multicast address {addr!r}") from None
    try:
        port = int(port_text)
    except ValueError:
        raise ValueError(f"bad port {port_text!r}") from None
    if not 1 <= port <= 65535:
        raise ValueError(f"port {port} out of range")
    return addr, port


@dataclass(frozen=True)
class ContractBook:
    """The option chain re-priced on every underlying move.

    Contracts are stored with a placeholder spot; `priced_at` stamps the
    live price onto every contract.
    """

    contracts: tuple[OptionContract, ...]
    underlying: str | None = None

    def __post_init__(self):
        if not self.contracts:
            raise ValueError("book must contain at least one contract")

    @property
    def n_opt(self) -> int:
        return len(self.contracts)

    def priced_at(self, spot: float) -> tuple[OptionContract, ...]:
        return tuple(replace(c, spot=spot) for c in self.contracts)


def load_book(path, underlying: str | None = None, spot: float = 100.0) -> ContractBook:
    """Read `strike,expiry_years,rate,volatility,kind` rows (header optional)."""
    contracts: list[OptionContract] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "strike":
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                contracts.append(
                    OptionContract(
                        spot=spot,
                        strike=float(row[0]),
                        expiry=float(row[1]),
                        rate=float(row[2]),
                        volatility=float(row[3]),
                        kind=OptionKind.parse(row[4]),
                    )
                )
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
    if not contracts:
        raise ValueError(f"{path}: no contracts found")
    return ContractBook(contracts=tuple(contracts), underlying=underlying)


@dataclass(frozen=True)
class ReplayReport:
    datagrams_sent: int
    duration: float  # seconds from first to last send
    max_schedule_error: float  # worst |actual - scheduled| send time, seconds


def _wait_until(deadline: float) -> None:
    # coarse sleep, then spin the last stretch for low send jitter
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        if remaining > _SPIN_WINDOW:
            time.sleep(remaining - _SPIN_WINDOW)


def replay(ticks, group: str, scale: float = 1.0, interface: str = "127.0.0.1") -> ReplayReport:
    """Send each tick to the multicast group on its recorded schedule.

    Gaps between ticks are multiplied by `scale`; the schedule is anchored
    to the first send so latencies do not accumulate tick over tick.
    """
    if scale <= 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    ticks = list(ticks)
    if not ticks:
        return ReplayReport(datagrams_sent=0, duration=0.0, max_schedule_error=0.0)
    addr, port = parse_group(group)
    payloads = [encode_tick(t) for t in ticks]
    offsets = [(t.timestamp_ns - ticks[0].timestamp_ns) * 1e-9 * scale for t in ticks]
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
    try:
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 1)
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_IF, socket.inet_aton(interface))
        worst = 0.0
        start = time.perf_counter()
        for i, (payload, offset) in enumerate(zip(payloads, offsets)):
            deadline = start + offset
            _wait_until(deadline)
            try:
                sock.sendto(payload, (addr, port))
            except OSError as err:
                raise RuntimeError(f"send failed at tick {i}: {err}") from err
            worst = max(worst, abs(time.perf_counter() - deadline))
        duration = time.perf_counter() - start
    finally:
        sock.close()
    return ReplayReport(
        datagrams_sent=len(payloads), duration=duration, max_schedule_error=worst
    )


@dataclass(frozen=True)
class SessionStats:
    """Counters for one consumption session.

    Every triggering update opens exactly one batch, so priced plus
    abandoned batches equals triggering updates, and each batch accounts
    for n_opt options between priced and abandoned.
    """

    total_updates: int
    triggering_updates: int
    priced_batches: int
    abandoned_batches: int
    options_priced: int
    options_abandoned: int
    malformed_datagrams: int
    n_opt: int
    batch_times: tuple[float, ...]  # durations of fully priced batches, seconds

    @property
    def measured_qos(self) -> float | None:
        """Fraction of triggering updates whose whole book got priced."""
        if self.triggering_updates == 0:
            return None
        return self.priced_batches / self.triggering_updates

    @property
    def option_qos(self) -> float | None:
        """Fraction of demanded option prices actually produced."""
        demanded = self.triggering_updates * self.n_opt
        if demanded == 0:
            return None
        return self.options_priced / demanded

    @property
    def mean_batch_time(self) -> float | None:
        if not self.batch_times:
            return None
        return sum(self.batch_times) / len(self.batch_times)

    def to_dict(self) -> dict:
        return {
            "total_updates": self.total_updates,
            "triggering_updates": self.triggering_updates,
            "priced_batches": self.priced_batches,
            "abandoned_batches": self.abandoned_batches,
            "options_priced": self.options_priced,
            "options_abandoned": self.options_abandoned,
            "malformed_datagrams": self.malformed_datagrams,
            "n_opt": self.n_opt,
            "measured_qos": self.measured_qos,
            "option_qos": self.option_qos,
            "mean_batch_time": self.mean_batch_time,
            "batch_times": list(self.batch_times),
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


class _Batch:
    """One book re-pricing in flight; cancellation is observed between options."""

    def __init__(self, contracts, pricer, workers: int, executor: ThreadPoolExecutor):
        self.n_opt = len(contracts)
        self.cancel = threading.Event()
        self.done = 0
        self.start = time.perf_counter()
        self.end: float | None = None
        self._lock = threading.Lock()
        self._pricer = pricer
        slices = [contracts[i::workers] for i in range(workers)]
        self.futures = [executor.submit(self._run, s) for s in slices if s]

    def _run(self, contracts) -> None:
        priced = 0
        for contract in contracts:
            if self.cancel.is_set():
                break
            self._pricer(contract)
            priced += 1
        now = time.perf_counter()
        with self._lock:
            self.done += priced
            if self.done == self.n_opt:
                self.end = now

    @property
    def completed(self) -> bool:
        return self.done == self.n_opt

    @property
    def duration(self) -> float:
        return (self.end if self.end is not None else time.perf_counter()) - self.start


def consume(
    group: str,
    book: ContractBook,
    pricer,
    workers: int = 1,
    max_ticks: int | None = None,
    duration: float | None = None,
    idle_timeout: float | None = None,
    interface: str = "127.0.0.1",
) -> SessionStats:
    """Join the group and re-price the book on every price change.

    A fresh price change cancels any batch still running; cancelled workers
    stop at the next option boundary. The loop ends after `max_ticks`
    matching updates, after `duration` seconds, or once the feed has been
    silent for `idle_timeout` seconds; at least one bound must be given.
    The final batch is allowed to finish before counters are read.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if max_ticks is None and duration is None and idle_timeout is None:
        raise ValueError("set max_ticks, duration or idle_timeout so the session can end")
    if max_ticks is not None and max_ticks < 1:
        raise ValueError(f"max_ticks must be >= 1, got {max_ticks}")
    addr, port = parse_group(group)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
    batches: list[_Batch] = []
    malformed = 0
    total = 0
    symbol = book.underlying
    last_price: float | None = None
    executor = ThreadPoolExecutor(max_workers=workers)
    try:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
        sock.bind((addr, port))
        mreq = struct.pack("4s4s", socket.inet_aton(addr), socket.inet_aton(interface))
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        sock.settimeout(_RECV_TIMEOUT)
        started = time.perf_counter()
        last_rx = started
        current: _Batch | None = None
        while True:
            now = time.perf_counter()
            if duration is not None and now - started >= duration:
                break
            if idle_timeout is not None and now - last_rx >= idle_timeout:
                break
            try:
                data = sock.recv(65536)
            except socket.timeout:
                continue
            last_rx = time.perf_counter()
            try:
                tick = decode_tick(data)
            except ValueError:
                malformed += 1
                continue
            if symbol is None:
                symbol = tick.symbol
            if tick.symbol != symbol:
                continue
            total += 1
            if last_price is None or tick.price != last_price:
                if current is not None:
                    current.cancel.set()
                current = _Batch(book.priced_at(tick.price), pricer, workers, executor)
                batches.append(current)
            last_price = tick.price
            if max_ticks is not None and total >= max_ticks:
                break
    finally:
        executor.shutdown(wait=True)
        sock.close()
    priced = [b for b in batches if b.completed]
    abandoned = [b for b in batches if not b.completed]
    return SessionStats(
        total_updates=total,
        triggering_updates=len(batches),
        priced_batches=len(priced),
        abandoned_batches=len(abandoned),
        options_priced=sum(b.done for b in batches),
        options_abandoned=sum(b.n_opt - b.done for b in batches),
        malformed_datagrams=malformed,
        n_opt=book.n_opt,
        batch_times=tuple(b.duration for b in priced),
    )
