"""End-to-end acceptance checks. Each test prints one verdict line; the
timing limits are part of the contract, so they are asserted, not logged."""

import math
import threading
import time
from dataclasses import replace

import numpy as np
import pytest

from tickbench.feed import ContractBook, Tick, consume, replay
from tickbench.gaps import (
    empirical_qos,
    fit_poisson,
    gap_for_qos,
    histogram_from_gaps,
)
from tickbench.isoqos import PlatformRecord, rank
from tickbench.pricing import (
    BtParams,
    McParams,
    OptionContract,
    OptionKind,
    bs_price,
    bt_price,
    mc_price,
    mc_price_screened,
)

from conftest import PLATFORM_ROWS

EXPECTED_KJ = [99.19, 116.26, 139.92, 237.58, 239.85]


def random_contract(rng, i, strike_lo=90.0, strike_hi=110.0, vol_lo=0.15, vol_hi=0.5):
    return OptionContract(
        spot=100.0,
        strike=float(rng.uniform(strike_lo, strike_hi)),
        expiry=float(rng.uniform(0.5, 2.0)),
        rate=float(rng.uniform(0.0, 0.05)),
        volatility=float(rng.uniform(vol_lo, vol_hi)),
        kind=OptionKind.CALL if i % 2 == 0 else OptionKind.PUT,
    )


def test_criterion_1_session_energy_ranking():
    """Five measured platforms rank by session energy at the 10% target."""
    platforms = [PlatformRecord(*row) for row in PLATFORM_ROWS]
    start = time.perf_counter()
    ranking = rank(platforms, y=10.0, total_updates=10_156, n_opt=617, g=4.0)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    assert len(ranking.ranked) == 5
    first = ranking.ranked[0].platform
    assert (first.name, first.config, first.vec_type) == ("XeonPhi", "1x60x4", "INTRINSICS")
    for entry, want in zip(ranking.ranked, EXPECTED_KJ):
        assert entry.energy_kj == pytest.approx(want, abs=0.05)
    print(
        f"criterion 1: PASS ranking "
        f"{[round(e.energy_kj, 2) for e in ranking.ranked]} KJ in {elapsed:.3f}s"
    )


def test_criterion_2_simulation_kernels_track_closed_form(ref_call):
    """Monte Carlo at 1e7 draws stays within 0.5% of the closed form and the
    5000-level lattice within 0.05%, on the reference contract plus twenty
    randomized ones."""
    rng = np.random.default_rng(2024)
    contracts = [ref_call] + [random_contract(rng, i) for i in range(20)]
    start = time.perf_counter()
    worst_mc = worst_bt = 0.0
    for i, contract in enumerate(contracts):
        reference = bs_price(contract)
        mc = mc_price(contract, McParams(10_000_000, seed=100 + i))
        bt = bt_price(contract, BtParams(5000))
        worst_mc = max(worst_mc, abs(mc - reference) / reference)
        worst_bt = max(worst_bt, abs(bt - reference) / reference)
        assert abs(mc - reference) / reference <= 0.005
        assert abs(bt - reference) / reference <= 0.0005
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(
        f"criterion 2: PASS worst mc {worst_mc:.2e}, worst bt {worst_bt:.2e} "
        f"over {len(contracts)} contracts in {elapsed:.1f}s"
    )


def test_criterion_3_screened_route_is_identical():
    """With a shared seed the screened estimator reproduces the plain one to
    1e-6 relative on one hundred randomized contracts."""
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        contract = random_contract(
            rng, i, strike_lo=70.0, strike_hi=140.0, vol_lo=0.1, vol_hi=0.6
        )
        params = McParams(100_000, seed=i)
        screened = mc_price_screened(contract, params).price
        naive = mc_price(contract, params)
        if naive == 0.0:
            assert abs(screened) <= 1e-12
            continue
        rel = abs(screened - naive) / abs(naive)
        worst = max(worst, rel)
        assert rel <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"criterion 3: PASS worst relative gap {worst:.2e} in {elapsed:.1f}s")


def test_criterion_4_rate_recovery():
    """The fitted arrival rate lands within 5% of the true one on at least
    95 of 100 independent 10k-sample draws."""
    start = time.perf_counter()
    hits = 0
    for trial in range(100):
        gaps = np.random.default_rng(trial).poisson(2.3, size=10_000).astype(float)
        fit = fit_poisson(histogram_from_gaps(gaps, bin_width=1.0))
        hits += abs(fit.lam - 2.3) / 2.3 <= 0.05
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    assert hits >= 95
    print(f"criterion 4: PASS {hits}/100 trials within 5% in {elapsed:.1f}s")


def test_criterion_5_end_to_end_loopback_qos():
    """Replaying a 1000-tick trace at 0.1x over loopback, the session QoS
    matches the gap-analysis prediction within two percentage points."""
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    # bimodal gaps: at 0.1x the short mode (30-50 ms) preempts an ~80 ms
    # batch and the long mode (130-170 ms) lets it finish
    n_ticks = 1000
    short = rng.uniform(0.30, 0.50, size=n_ticks - 1)
    long_ = rng.uniform(1.30, 1.70, size=n_ticks - 1)
    gaps = np.where(rng.random(n_ticks - 1) < 0.45, short, long_)
    stamps = np.concatenate([[0.0], np.cumsum(gaps)])
    ticks = [
        Tick(int(round(t * 1e9)), "FB", 100.0 + (i % 2))
        for i, t in enumerate(stamps)
    ]

    contract = OptionContract(100.0, 100.0, 1.0, 0.05, 0.2, OptionKind.CALL)
    book = ContractBook(contracts=(contract,) * 16, underlying="FB")

    def stub_kernel(c):
        time.sleep(0.005)
        return 1.0

    group = "239.196.77.1:32500"
    out = {}

    def consumer():
        out["stats"] = consume(
            group, book, stub_kernel, workers=1, max_ticks=n_ticks, idle_timeout=5.0
        )

    thread = threading.Thread(target=consumer)
    thread.start()
    time.sleep(0.5)
    report = replay(ticks, group, scale=0.1)
    thread.join(timeout=240.0)
    assert not thread.is_alive()
    stats = out["stats"]

    assert report.datagrams_sent == n_ticks
    assert stats.total_updates == n_ticks
    assert stats.triggering_updates == n_ticks

    scaled_gaps = np.diff(stamps) * 0.1
    curve = empirical_qos(histogram_from_gaps(scaled_gaps, bin_width=0.01))
    predicted = curve.qos_at(stats.mean_batch_time)
    measured = stats.measured_qos
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    assert measured == pytest.approx(predicted, abs=0.02)
    print(
        f"criterion 5: PASS measured {100 * measured:.2f}% vs predicted "
        f"{100 * predicted:.2f}% (batch ~{1e3 * stats.mean_batch_time:.0f} ms) "
        f"in {elapsed:.0f}s"
    )


class TestCriterion6Properties:
    def test_qos_curves_are_monotone(self):
        rng = np.random.default_rng(606)
        for _ in range(25):
            mean = rng.uniform(0.2, 5.0)
            gaps = rng.exponential(mean, size=int(rng.integers(2, 400)))
            curve = empirical_qos(histogram_from_gaps(gaps, bin_width=0.25))
            values = np.asarray(curve.survival)
            assert values[0] == 1.0
            assert np.all(np.diff(values) <= 0.0)
            assert np.all((values >= 0.0) & (values <= 1.0))
        print("criterion 6a: PASS survival curves monotone")

    def test_budget_and_feasibility_monotone_in_target(self):
        rng = np.random.default_rng(616)
        platforms = [
            PlatformRecord(f"P{i}", "1x1x1", "NOVECT", float(s), float(s) * 10.0)
            for i, s in enumerate(rng.uniform(0.0005, 0.01, size=8))
        ]
        targets = [1.0, 5.0, 20.0, 50.0, 80.0, 95.0, 100.0]
        for _ in range(10):
            gaps = rng.exponential(rng.uniform(1.0, 3.0), size=500)
            curve = empirical_qos(histogram_from_gaps(gaps, bin_width=0.25))
            budgets = [gap_for_qos(curve, y) for y in targets]
            assert budgets == sorted(budgets, reverse=True)
            feasible_counts = []
            for y in targets:
                if gap_for_qos(curve, y) <= 0.0:
                    feasible_counts.append(0)
                    continue
                ranking = rank(platforms, y=y, total_updates=1000, n_opt=500, curve=curve)
                feasible_counts.append(len(ranking.ranked))
            assert feasible_counts == sorted(feasible_counts, reverse=True)
        print("criterion 6b: PASS budgets and feasible sets shrink with the target")

    def test_ranking_is_ascending_energy_per_option(self):
        rng = np.random.default_rng(626)
        for _ in range(20):
            platforms = [
                PlatformRecord(
                    f"P{i}", "1x1x1", "NOVECT",
                    float(rng.uniform(1e-4, 5e-3)), float(rng.uniform(0.05, 0.5)),
                )
                for i in range(6)
            ]
            ranking = rank(platforms, y=30.0, total_updates=5000, n_opt=100, g=60.0)
            assert len(ranking.ranked) == 6
            j_opts = [e.platform.j_opt for e in ranking.ranked]
            assert j_opts == sorted(j_opts)
        print("criterion 6c: PASS ranking order follows per-option energy")

    def test_put_call_parity_across_kernels(self):
        rng = np.random.default_rng(99)
        for i in range(20):
            call = random_contract(rng, 0)
            put = replace(call, kind=OptionKind.PUT)
            rhs = call.spot - call.strike * math.exp(-call.rate * call.expiry)
            assert bs_price(call) - bs_price(put) == pytest.approx(rhs, abs=1e-10)
            params = BtParams(500)
            assert bt_price(call, params) - bt_price(put, params) == pytest.approx(
                rhs, abs=1e-9
            )
            mc_params = McParams(400_000, seed=1000 + i)
            lhs = mc_price(call, mc_params) - mc_price(put, mc_params)
            bound = 4.0 * call.spot * call.volatility * math.sqrt(call.expiry) / math.sqrt(400_000)
            assert abs(lhs - rhs) <= bound
        print("criterion 6d: PASS parity holds on all three routes")
