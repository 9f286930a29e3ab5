import pytest

from tickbench.feed import Tick, write_trace
from tickbench.isoqos import PlatformRecord
from tickbench.pricing import OptionContract, OptionKind

NS = 1_000_000_000

# measured rows for the five platform configurations used across the suite
PLATFORM_ROWS = [
    ("Viridis", "16x4x1", "INTRINSICS", 0.0038, 0.3830),
    ("Intel", "2x8x1", "AUTOVECT", 0.0044, 0.3794),
    ("XeonPhi", "1x60x1", "KNC512", 0.0046, 0.2234),
    ("XeonPhi", "1x60x2", "NOVECT", 0.0036, 0.1856),
    ("XeonPhi", "1x60x4", "INTRINSICS", 0.0030, 0.1584),
]


@pytest.fixture
def ref_call():
    return OptionContract(
        spot=100.0, strike=100.0, expiry=1.0, rate=0.05, volatility=0.2,
        kind=OptionKind.CALL,
    )


@pytest.fixture
def ref_put():
    return OptionContract(
        spot=100.0, strike=100.0, expiry=1.0, rate=0.05, volatility=0.2,
        kind=OptionKind.PUT,
    )


@pytest.fixture
def platforms():
    return [PlatformRecord(*row) for row in PLATFORM_ROWS]


def make_ticks(gaps_s, symbol="FB", start_price=100.0):
    """Ticks whose consecutive gaps are `gaps_s`; every tick moves the price."""
    ticks = [Tick(0, symbol, start_price)]
    t = 0.0
    for i, gap in enumerate(gaps_s):
        t += gap
        ticks.append(Tick(int(round(t * NS)), symbol, start_price + (i % 2) + 1))
    return ticks


@pytest.fixture
def trace_writer(tmp_path):
    def write(gaps_s, name="trace.csv", symbol="FB"):
        path = tmp_path / name
        write_trace(make_ticks(gaps_s, symbol=symbol), path)
        return path

    return write


@pytest.fixture
def book_csv(tmp_path):
    path = tmp_path / "book.csv"
    path.write_text(
        "strike,expiry_years,rate,volatility,kind\n"
        "90,1.0,0.05,0.2,call\n"
        "100,1.0,0.05,0.2,call\n"
        "110,1.0,0.05,0.2,put\n"
    )
    return path
