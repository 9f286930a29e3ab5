"""Command line front end.

Five subcommands cover the workflow end to end: `replay` a recorded trace
onto a multicast group, `consume` it while re-pricing a contract book,
`bench` a kernel to get per-option time and energy, `fit` the gap model to
a trace, and `rank` platforms by session energy at a QoS target.

Options may also come from a `key=value` config file (`--config-file`);
explicit flags win over the file, which wins over built-in defaults.
Exit codes: 0 on success, 1 for usage problems, 2 for bad data or I/O.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from .feed import consume, load_book, load_trace, replay
from .gaps import (
    build_histogram,
    empirical_qos,
    exponential_qos,
    fit_poisson,
    poisson_qos,
    read_curve_csv,
    write_curve_csv,
)
from .isoqos import (
    load_platforms,
    rank,
    ranking_table,
    write_platforms,
    write_ranking_csv,
)
from .metrics import bench_kernel, export_platform_record, parse_power_spec
from .pricing import KernelSpec

DEFAULT_GROUP = "239.192.0.1:30001"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


@dataclass(frozen=True)
class _OptSpec:
    caster: type
    default: object
    required: bool = False
    choices: tuple | None = None
    repeatable: bool = False


def _add(sub, specs, *flags, caster=str, default=None, required=False,
         choices=None, repeatable=False, help=None, metavar=None):
    kwargs = {"default": None, "type": caster, "help": help}
    if metavar:
        kwargs["metavar"] = metavar
    if repeatable:
        kwargs["action"] = "append"
    action = sub.add_argument(*flags, **kwargs)
    specs[action.dest] = _OptSpec(
        caster=caster,
        default=default,
        required=required,
        choices=tuple(choices) if choices else None,
        repeatable=repeatable,
    )
    return action


def _load_config(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise _UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(args) -> None:
    specs = getattr(args, "_specs", None)
    if specs is None:
        return
    config = {}
    if getattr(args, "config_file", None):
        try:
            config = _load_config(args.config_file)
        except OSError as err:
            raise _UsageError(f"cannot read config file: {err}") from None
    for dest, spec in specs.items():
        value = getattr(args, dest)
        if value is None:
            raw = config.get(dest)
            if raw is not None:
                try:
                    value = [spec.caster(raw)] if spec.repeatable else spec.caster(raw)
                except ValueError:
                    raise _UsageError(
                        f"bad config value {raw!r} for {dest.replace('_', '-')}"
                    ) from None
            else:
                value = spec.default
        if value is None and spec.required:
            raise _UsageError(f"--{dest.replace('_', '-')} is required")
        if spec.choices is not None and value is not None and value not in spec.choices:
            raise _UsageError(
                f"--{dest.replace('_', '-')} must be one of: {', '.join(spec.choices)}"
            )
        setattr(args, dest, value)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _UsageError(message)


def _kernel_spec(args) -> KernelSpec:
    _require(args.mc_iters >= 1, "--mc-iters must be >= 1")
    _require(0 <= args.mc_seed < 2**32, "--mc-seed must fit in 32 bits")
    _require(args.bt_levels >= 1, "--bt-levels must be >= 1")
    return KernelSpec(
        args.kernel,
        mc_iterations=args.mc_iters,
        mc_seed=args.mc_seed,
        bt_levels=args.bt_levels,
    )


def _add_kernel_opts(sub, specs) -> None:
    _add(sub, specs, "--kernel", default="bs", choices=KernelSpec.KNOWN,
         help="pricing kernel (default bs)")
    _add(sub, specs, "--mc-iters", caster=int, default=500_000,
         help="Monte Carlo iterations per option")
    _add(sub, specs, "--mc-seed", caster=int, default=0, help="Monte Carlo seed")
    _add(sub, specs, "--bt-levels", caster=int, default=1000, help="lattice levels")


def _cmd_replay(args) -> int:
    _require(args.scale > 0, "--scale must be > 0")
    ticks = load_trace(args.trace)
    report = replay(ticks, args.group, scale=args.scale, interface=args.iface)
    print(
        f"sent {report.datagrams_sent} datagrams in {report.duration:.3f} s "
        f"(max schedule error {report.max_schedule_error * 1e3:.2f} ms)"
    )
    return 0


def _cmd_consume(args) -> int:
    _require(args.workers >= 1, "--workers must be >= 1")
    _require(args.max_ticks is None or args.max_ticks >= 1, "--max-ticks must be >= 1")
    _require(args.spot > 0, "--spot must be > 0")
    pricer = _kernel_spec(args).build()
    book = load_book(args.book, underlying=args.symbol, spot=args.spot)
    stats = consume(
        args.group,
        book,
        pricer,
        workers=args.workers,
        max_ticks=args.max_ticks,
        duration=args.duration,
        idle_timeout=args.idle_timeout,
        interface=args.iface,
    )
    if stats.triggering_updates == 0:
        print("error: no triggering updates received", file=sys.stderr)
        return 2
    print(f"updates            {stats.total_updates}")
    print(f"triggering         {stats.triggering_updates}")
    print(f"batches priced     {stats.priced_batches}")
    print(f"batches abandoned  {stats.abandoned_batches}")
    print(f"options priced     {stats.options_priced}")
    print(f"options abandoned  {stats.options_abandoned}")
    print(f"malformed          {stats.malformed_datagrams}")
    print(f"measured QoS       {100.0 * stats.measured_qos:.2f}%")
    print(f"option QoS         {100.0 * stats.option_qos:.2f}%")
    if stats.mean_batch_time is not None:
        print(f"mean batch time    {stats.mean_batch_time * 1e3:.3f} ms")
    if args.out:
        stats.write_json(args.out)
    return 0


def _cmd_bench(args) -> int:
    _require(args.reps >= 1, "--reps must be >= 1")
    _require(args.spot > 0, "--spot must be > 0")
    spec = _kernel_spec(args)
    pricer = spec.build()
    book = load_book(args.book, spot=args.spot)
    power = parse_power_spec(args.power)
    result = bench_kernel(pricer, book.contracts, power, args.reps, kernel=spec.describe())
    record = export_platform_record(result, args.name, args.config, args.vec)
    print(
        f"{record.name}({record.config}) {record.vec_type or '-'}: "
        f"{result.options_priced} options in {result.elapsed:.3f} s, "
        f"s_opt={result.s_opt:.6g} s, avg_power={result.avg_power:.6g} W, "
        f"j_opt={result.j_opt:.6g} J"
    )
    if args.out:
        existing = []
        if os.path.exists(args.out) and os.path.getsize(args.out) > 0:
            existing = load_platforms(args.out)
        write_platforms(existing + [record], args.out)
    return 0


def _cmd_fit(args) -> int:
    _require(args.bin_width > 0, "--bin-width must be > 0")
    ticks = load_trace(args.trace)
    hist = build_histogram(ticks, bin_width=args.bin_width)
    curve = empirical_qos(hist)
    mean_gap = hist.mean_bin * hist.bin_width
    print(f"updates    {curve.total_updates}")
    print(f"gaps       {hist.total}")
    print(f"bin width  {hist.bin_width:g} s")
    print(f"mean gap   {mean_gap:.6g} s (binned)")
    if curve.fitted_lambda is None:
        print("model      degenerate gap distribution; no Poisson fit")
    else:
        mle = fit_poisson(hist, method="mle")
        lsq = fit_poisson(hist, method="lsq")
        print(f"lambda     {mle.lam:.6g} (max-likelihood, max dev {mle.max_abs_deviation:.4f})")
        print(f"lambda     {lsq.lam:.6g} (least-squares,  max dev {lsq.max_abs_deviation:.4f})")
        t = mean_gap
        print(
            f"QoS({t:.3g} s)  model {100.0 * poisson_qos(t, mle.lam, hist.bin_width):.2f}%  "
            f"memoryless {100.0 * exponential_qos(t, mean_gap):.2f}%"
        )
    if args.out:
        write_curve_csv(curve, args.out)
    if args.fig:
        from .plots import save_qos_figure

        save_qos_figure(curve, args.fig)
    return 0


def _cmd_rank(args) -> int:
    _require(0 < args.qos <= 100, "--qos must be in (0, 100]")
    _require(args.updates >= 0, "--updates must be >= 0")
    _require(args.nopt >= 1, "--nopt must be >= 1")
    _require(
        (args.curve is None) != (args.gap is None),
        "provide exactly one of --curve or --gap",
    )
    _require(args.gap is None or args.gap > 0, "--gap must be > 0")
    platforms = load_platforms(args.platforms)
    curve = read_curve_csv(args.curve) if args.curve is not None else None
    ranking = rank(
        platforms,
        y=args.qos,
        total_updates=args.updates,
        n_opt=args.nopt,
        curve=curve,
        g=args.gap,
    )
    text = ranking_table(ranking)
    sys.stdout.write(text)
    for out in args.out or []:
        if out.endswith(".csv"):
            write_ranking_csv(ranking, out)
        elif out.endswith(".txt"):
            with open(out, "w") as fh:
                fh.write(text)
        else:
            raise _UsageError(f"--out {out!r} must end in .csv or .txt")
    if args.fig:
        from .plots import save_energy_figure

        save_energy_figure(ranking, args.fig)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="tickbench", description=__doc__.split("\n\n")[1])
    try:
        from importlib.metadata import version

        parser.add_argument("--version", action="version", version=version("tickbench"))
    except Exception:  # running from a raw checkout
        pass
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser)

    p = sub.add_parser("replay", help="send a recorded trace to a multicast group")
    specs: dict[str, _OptSpec] = {}
    _add(p, specs, "--trace", required=True, help="tick trace CSV")
    _add(p, specs, "--group", default=DEFAULT_GROUP, help="multicast ADDR:PORT")
    _add(p, specs, "--scale", caster=float, default=1.0,
         help="gap multiplier (0.1 replays 10x faster)")
    _add(p, specs, "--iface", default="127.0.0.1", help="outgoing interface address")
    p.add_argument("--config-file", default=None, help="key=value defaults")
    p.set_defaults(func=_cmd_replay, _specs=specs)

    p = sub.add_parser("consume", help="re-price a book from a live feed")
    specs = {}
    _add(p, specs, "--group", default=DEFAULT_GROUP, help="multicast ADDR:PORT")
    _add(p, specs, "--book", required=True, help="contract book CSV")
    _add_kernel_opts(p, specs)
    _add(p, specs, "--workers", caster=int, default=1, help="pricing threads")
    _add(p, specs, "--max-ticks", caster=int, help="stop after this many updates")
    _add(p, specs, "--duration", caster=float, help="stop after this many seconds")
    _add(p, specs, "--idle-timeout", caster=float, default=2.0,
         help="stop once the feed is silent this long (seconds)")
    _add(p, specs, "--symbol", help="only react to this symbol (default: first seen)")
    _add(p, specs, "--spot", caster=float, default=100.0, help="placeholder spot for the book")
    _add(p, specs, "--iface", default="127.0.0.1", help="interface to join on")
    _add(p, specs, "--out", help="write session stats JSON here")
    p.add_argument("--config-file", default=None, help="key=value defaults")
    p.set_defaults(func=_cmd_consume, _specs=specs)

    p = sub.add_parser("bench", help="measure per-option time and energy")
    specs = {}
    _add_kernel_opts(p, specs)
    _add(p, specs, "--book", required=True, help="contract book CSV")
    _add(p, specs, "--power", required=True,
         help="power source: const:WATTS, trace:FILE or counter:FILE[:DT]")
    _add(p, specs, "--reps", caster=int, required=True, help="passes over the book")
    _add(p, specs, "--name", required=True, help="platform name for the record")
    _add(p, specs, "--config", default="", help="platform configuration label")
    _add(p, specs, "--vec", default="", help="vectorisation label")
    _add(p, specs, "--spot", caster=float, default=100.0, help="spot used while timing")
    _add(p, specs, "--out", help="append the record to this platforms CSV")
    p.add_argument("--config-file", default=None, help="key=value defaults")
    p.set_defaults(func=_cmd_bench, _specs=specs)

    p = sub.add_parser("fit", help="fit the gap model of a trace")
    specs = {}
    _add(p, specs, "--trace", required=True, help="tick trace CSV")
    _add(p, specs, "--bin-width", caster=float, default=1.0, help="histogram bin, seconds")
    _add(p, specs, "--out", help="write the QoS curve CSV here")
    _add(p, specs, "--fig", help="render the curve to this image file")
    p.add_argument("--config-file", default=None, help="key=value defaults")
    p.set_defaults(func=_cmd_fit, _specs=specs)

    p = sub.add_parser("rank", help="rank platforms by session energy at a QoS target")
    specs = {}
    _add(p, specs, "--platforms", required=True, help="platform records CSV")
    _add(p, specs, "--qos", caster=float, required=True, help="QoS target percent")
    _add(p, specs, "--updates", caster=int, required=True, help="session update count")
    _add(p, specs, "--nopt", caster=int, required=True, help="options per update")
    _add(p, specs, "--curve", help="QoS curve CSV to derive the time budget")
    _add(p, specs, "--gap", caster=float, help="explicit time budget, seconds")
    _add(p, specs, "--out", repeatable=True,
         help="write the ranking here (.csv or .txt, repeatable)")
    _add(p, specs, "--fig", help="render the energy chart to this image file")
    p.add_argument("--config-file", default=None, help="key=value defaults")
    p.set_defaults(func=_cmd_rank, _specs=specs)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        _merge_config(args)
        return args.func(args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
