"""Command-line front end.

Three subcommands share one flag vocabulary (a key=value config file can
supply any of them; explicit flags win):

    mptaylor integrate   advance a system and write a trajectory file
    mptaylor cns         paired-run verification; writes trajectory + report
    mptaylor bench       worker-scaling probe; prints a timing table

Exit codes: 0 success, 1 configuration error, 2 runtime/arithmetic error.
"""

from __future__ import annotations

import argparse
import sys

from . import bench as bench_mod
from .cns import CnsConfig, cns_run, default_verify_margins
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    output_digits,
    parse_config,
    semantic_config,
)
from .mp import PrecisionContext, mp_from_decimal
from .persist import load_checkpoint, write_checkpoint, write_trajectory
from .reduction import ReducePlan, make_reducer
from .systems import BUILTIN_SYSTEMS, builtin_system, parse_system
from .taylor import StepConfig, integrate


def _system_source(cfg: RunConfig):
    """Returns (factory(ctx) -> system, file text or None)."""
    if cfg.system in BUILTIN_SYSTEMS:
        return (lambda ctx: builtin_system(cfg.system, ctx)), None
    with open(cfg.system, "r", encoding="utf-8") as fh:
        text = fh.read()
    return (lambda ctx: parse_system(text, ctx)), text


def _plan(cfg: RunConfig, workers: int | None = None) -> ReducePlan:
    return ReducePlan(
        num_chunks=cfg.chunks,
        workers=workers if workers is not None else cfg.workers,
        serial_threshold=cfg.serial_threshold,
    )


def cmd_integrate(cfg: RunConfig) -> int:
    if cfg.out is None:
        raise ConfigError(["integrate requires an output path (--out)"])
    factory, system_text = _system_source(cfg)
    semantic = semantic_config(cfg, system_text)
    hash_hex = config_hash(semantic)
    ctx = PrecisionContext(cfg.prec_bits)
    system = factory(ctx)
    if len(cfg.init) != system.dim:
        raise ConfigError(
            [f"init has {len(cfg.init)} components, system dim is {system.dim}"]
        )
    start_step = 0
    state0 = tuple(mp_from_decimal(t, ctx) for t in cfg.init)
    if cfg.resume is not None:
        ck = load_checkpoint(cfg.resume)
        if ck.config_hash != hash_hex:
            raise ConfigError(
                [
                    f"checkpoint {cfg.resume} was written by a different config "
                    f"(hash {ck.config_hash[:12]}.. != {hash_hex[:12]}..)"
                ]
            )
        if not 0 <= ck.step <= cfg.n_steps:
            raise ConfigError(
                [f"checkpoint step {ck.step} outside run range 0..{cfg.n_steps}"]
            )
        start_step = ck.step
        state0 = ck.state
    sc = StepConfig(tau_text=cfg.tau, order_n=cfg.order, workers=cfg.workers)

    checkpoints_written = []

    def observer(n, t, state):
        if cfg.checkpoint_every > 0 and n % cfg.checkpoint_every == 0:
            path = f"{cfg.out}.ckpt-{n}"
            write_checkpoint(path, n, str(t), cfg.prec_bits, hash_hex, state)
            checkpoints_written.append(path)

    reducer = make_reducer(_plan(cfg))
    try:
        traj = integrate(
            system,
            state0,
            sc,
            cfg.n_steps,
            ctx,
            reducer,
            observer=observer,
            record_stride=cfg.stride,
            start_step=start_step,
        )
    finally:
        reducer.close()
    write_trajectory(cfg.out, traj, semantic, hash_hex, output_digits(cfg))
    print(f"wrote {cfg.out} ({len(traj.points)} rows)")
    for path in checkpoints_written:
        print(f"checkpoint {path}")
    return 0


def cmd_cns(cfg: RunConfig, allow_equal_verify: bool = False) -> int:
    if cfg.out is None:
        raise ConfigError(["cns requires an output path (--out)"])
    if cfg.t_end is None:
        raise ConfigError(["cns requires --t-end (a time horizon, not a step count)"])
    factory, system_text = _system_source(cfg)
    verify_bits, verify_order = cfg.verify_prec_bits, cfg.verify_order
    if verify_bits is None or verify_order is None:
        default_bits, default_order = default_verify_margins(cfg.prec_bits, cfg.order)
        verify_bits = verify_bits if verify_bits is not None else default_bits
        verify_order = verify_order if verify_order is not None else default_order
    cns_cfg = CnsConfig(
        base_bits=cfg.prec_bits,
        base_order=cfg.order,
        verify_bits=verify_bits,
        verify_order=verify_order,
        tau_text=cfg.tau,
        t_end_text=cfg.t_end,
        agreement_digits=cfg.agree_digits,
        stride=cfg.stride,
        allow_equal_verify=allow_equal_verify,
    )
    traj, report = cns_run(factory, cfg.init, cns_cfg, _plan(cfg))
    semantic = semantic_config(cfg, system_text)
    semantic.update(
        verify_prec_bits=str(verify_bits),
        verify_order=str(verify_order),
        agree_digits=str(cfg.agree_digits),
    )
    hash_hex = config_hash(semantic)
    write_trajectory(cfg.out, traj, semantic, hash_hex, output_digits(cfg))
    with open(cfg.out + ".tc.kv", "w", encoding="utf-8") as fh:
        fh.write(report.to_kv())
    with open(cfg.out + ".tc.txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(cfg.out + ".agreement.tsv", "w", encoding="utf-8") as fh:
        fh.write(report.agreement_tsv())
    print(f"wrote {cfg.out} ({len(traj.points)} rows)")
    print(f"t_c = {report.t_c} (t_end = {report.t_end}, d = {cfg.agree_digits})")
    return 0


def cmd_bench(cfg: RunConfig, worker_counts) -> int:
    factory, _ = _system_source(cfg)
    records = bench_mod.run_benchmark(
        factory,
        cfg.init,
        cfg.tau,
        cfg.order,
        cfg.prec_bits,
        worker_counts,
        probe_steps=cfg.probe_steps,
        num_chunks=cfg.chunks,
        serial_threshold=cfg.serial_threshold,
    )
    table = bench_mod.bench_table(records)
    sys.stdout.write(table)
    if cfg.out is not None:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(table)
    return 0


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--system", help=f"built-in name ({', '.join(BUILTIN_SYSTEMS)}) or description file")
    p.add_argument("--init", help="comma-separated decimal initial state, e.g. -15.8,-17.48,35.64")
    p.add_argument("--tau", help="step size as a decimal string")
    p.add_argument("--order", type=int, help="Taylor method order N")
    p.add_argument("--prec-bits", type=int, dest="prec_bits", help="working precision in bits")
    p.add_argument("--prec-digits", type=int, dest="prec_digits", help="working precision in decimal digits")
    p.add_argument("--steps", type=int, help="number of steps (alternative to --t-end)")
    p.add_argument("--t-end", dest="t_end", help="time horizon; must be a whole number of steps")
    p.add_argument("--chunks", type=int, help="fixed reduction chunk count (default 64)")
    p.add_argument(
        "--serial-threshold",
        type=int,
        dest="serial_threshold",
        help="orders shorter than this run the plain serial loop (default 256)",
    )
    p.add_argument("--out", help="output path")
    p.add_argument("--digits", type=int, help="significant digits in trajectory output")
    p.add_argument("--stride", type=int, help="record/comparison stride in steps (default 100)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mptaylor",
        description="arbitrary-precision Taylor integration with verified trajectories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_int = sub.add_parser("integrate", help="integrate and write a trajectory file")
    _add_common_flags(p_int)
    p_int.add_argument("--workers", type=int, help="reduction worker processes (default 1)")
    p_int.add_argument("--checkpoint-every", type=int, dest="checkpoint_every",
                       help="write a checkpoint every this many steps (0 = never)")
    p_int.add_argument("--resume", help="resume from a checkpoint file")
    p_int.set_defaults(func=_dispatch_integrate)

    p_cns = sub.add_parser("cns", help="paired-run verification of a trajectory")
    _add_common_flags(p_cns)
    p_cns.add_argument("--workers", type=int, help="reduction worker processes per run (default 1)")
    p_cns.add_argument("--verify-order", type=int, dest="verify_order",
                       help="verify-run order (default: order + ceil(order/3))")
    p_cns.add_argument("--verify-prec-bits", type=int, dest="verify_prec_bits",
                       help="verify-run precision in bits (default: ceil(1.33 * prec_bits))")
    p_cns.add_argument("--agree-digits", type=int, dest="agree_digits",
                       help="decimal digits of agreement required (default 10)")
    p_cns.add_argument("--allow-equal-verify", action="store_true",
                       help="testing escape hatch: allow verify budget equal to base")
    p_cns.set_defaults(func=_dispatch_cns)

    p_bench = sub.add_parser("bench", help="worker-scaling probe (short timing run)")
    _add_common_flags(p_bench)
    p_bench.add_argument("--workers", help="comma-separated worker counts, e.g. 1,2,4")
    p_bench.add_argument("--probe-steps", type=int, dest="probe_steps",
                         help="steps in the timed probe (default 5)")
    p_bench.set_defaults(func=_dispatch_bench)
    return parser


_FLAG_KEYS = (
    "system",
    "init",
    "tau",
    "order",
    "prec_bits",
    "prec_digits",
    "steps",
    "t_end",
    "chunks",
    "serial_threshold",
    "out",
    "digits",
    "stride",
    "workers",
    "checkpoint_every",
    "resume",
    "verify_order",
    "verify_prec_bits",
    "agree_digits",
    "probe_steps",
)


def _overrides(args: argparse.Namespace, skip=()) -> dict:
    out = {}
    for key in _FLAG_KEYS:
        if key in skip:
            continue
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _dispatch_integrate(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    return cmd_integrate(cfg)


def _dispatch_cns(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    return cmd_cns(cfg, allow_equal_verify=args.allow_equal_verify)


def _dispatch_bench(args) -> int:
    workers_text = args.workers if args.workers is not None else "1"
    try:
        worker_counts = [int(w) for w in str(workers_text).split(",") if w.strip()]
    except ValueError:
        raise ConfigError([f"--workers must be comma-separated integers, got {workers_text!r}"])
    if not worker_counts or any(w < 1 for w in worker_counts):
        raise ConfigError([f"--workers must be positive integers, got {workers_text!r}"])
    overrides = _overrides(args, skip=("workers",))
    if "steps" not in overrides and "t_end" not in overrides:
        overrides["steps"] = 0  # the probe supplies its own step count
    cfg = parse_config(args.config, overrides)
    return cmd_bench(cfg, worker_counts)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, ZeroDivisionError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
