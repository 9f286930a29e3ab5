"""Tick-driven option pricing: kernels, feed replay, QoS fitting and ranking."""

from .pricing import (
    BtParams,
    KernelSpec,
    McParams,
    NormalStream,
    OptionContract,
    OptionKind,
    ScreenedMcResult,
    bs_price,
    bt_price,
    mc_price,
    mc_price_screened,
    mc_threshold,
)
from .gaps import (
    GapHistogram,
    PoissonFit,
    QosCurve,
    build_histogram,
    empirical_qos,
    exponential_qos,
    fit_poisson,
    gap_for_qos,
    histogram_from_gaps,
    poisson_qos,
    read_curve_csv,
    write_curve_csv,
)
from .isoqos import (
    PlatformRecord,
    Ranking,
    RankingEntry,
    feasible,
    gap_count,
    load_platforms,
    rank,
    ranking_table,
    session_energy,
    write_platforms,
    write_ranking_csv,
)
from .metrics import (
    BenchResult,
    ConstantPower,
    CounterPower,
    TracePower,
    bench_kernel,
    export_platform_record,
    parse_power_spec,
)
from .feed import (
    ContractBook,
    ReplayReport,
    SessionStats,
    Tick,
    consume,
    decode_tick,
    encode_tick,
    load_book,
    load_trace,
    parse_group,
    replay,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BtParams",
    "KernelSpec",
    "McParams",
    "NormalStream",
    "OptionContract",
    "OptionKind",
    "ScreenedMcResult",
    "bs_price",
    "bt_price",
    "mc_price",
    "mc_price_screened",
    "mc_threshold",
    "GapHistogram",
    "PoissonFit",
    "QosCurve",
    "build_histogram",
    "empirical_qos",
    "exponential_qos",
    "fit_poisson",
    "gap_for_qos",
    "histogram_from_gaps",
    "poisson_qos",
    "read_curve_csv",
    "write_curve_csv",
    "PlatformRecord",
    "Ranking",
    "RankingEntry",
    "feasible",
    "gap_count",
    "load_platforms",
    "rank",
    "ranking_table",
    "session_energy",
    "write_platforms",
    "write_ranking_csv",
    "BenchResult",
    "ConstantPower",
    "CounterPower",
    "TracePower",
    "bench_kernel",
    "export_platform_record",
    "parse_power_spec",
    "ContractBook",
    "ReplayReport",
    "SessionStats",
    "Tick",
    "consume",
    "decode_tick",
    "encode_tick",
    "load_book",
    "load_trace",
    "parse_group",
    "replay",
    "write_trace",
]
