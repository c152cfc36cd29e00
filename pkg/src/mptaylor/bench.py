"""Worker-scaling benchmark: a short probe timed at each worker count.

The probe is a handful of integration steps (default 5) at the target
order and precision; that is enough to expose the reduction's scaling
because per-step cost is flat. The serial baseline runs the plain
in-process path; each parallel row runs the process pool, spawned and
warmed before the clock starts so only the probe loop is measured.
Absolute seconds are hardware-specific; speedup and parallel efficiency
(100 * speedup / workers) are the comparable columns.

All rows must produce bit-identical final states - the reduction is
worker-count independent by design - and the harness refuses to report
timings if they do not.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .mp import PrecisionContext, mp_bits_equal
from .reduction import ProcessReducer, ReducePlan, SerialReducer
from .taylor import StepConfig, compute_jet, horner_eval


@dataclass(frozen=True)
class BenchmarkRecord:
    workers: int
    mode: str  # "serial" or "parallel"
    seconds: float
    speedup: float
    efficiency_pct: float


def run_probe(system, state0, sc: StepConfig, ctx: PrecisionContext, reducer, probe_steps: int):
    """Time probe_steps integration steps; returns (final state, seconds).

    Only the step loop is inside the clock; tau parsing and any pool
    setup happen before.
    """
    if probe_steps < 1:
        raise ValueError(f"probe_steps must be >= 1, got {probe_steps}")
    tau = sc.tau(ctx)
    state = tuple(state0)
    t0 = time.perf_counter()
    for _ in range(probe_steps):
        jet = compute_jet(system, state, sc.order_n, ctx, reducer)
        state = tuple(horner_eval(jet.coeffs[m], tau, ctx) for m in range(system.dim))
    seconds = time.perf_counter() - t0
    return state, seconds


def _warm_pool(reducer: ProcessReducer, ctx: PrecisionContext):
    # Exercise spawn, pipes and the claim counter once so none of that
    # lands inside the timed region. Must reach the parallel path, so the
    # array is exactly serial_threshold indices long.
    n = reducer.plan.serial_threshold
    ones = [ctx.one] * (n + 1)
    reducer.convolve(ones, ones, n, ctx)


def run_benchmark(
    system_factory,
    init_texts,
    tau_text: str,
    order: int,
    prec_bits: int,
    worker_counts,
    probe_steps: int = 5,
    num_chunks: int = 64,
    serial_threshold: int = 256,
):
    """Serial baseline plus one probe per requested worker count."""
    ctx = PrecisionContext(prec_bits)
    system = system_factory(ctx)
    state0 = tuple(ctx.parse(t) for t in init_texts)
    sc = StepConfig(tau_text=tau_text, order_n=order, workers=1)

    base_plan = ReducePlan(
        num_chunks=num_chunks, workers=1, serial_threshold=serial_threshold
    )
    serial_state, serial_s = run_probe(
        system, state0, sc, ctx, SerialReducer(base_plan), probe_steps
    )
    records = [
        BenchmarkRecord(
            workers=1, mode="serial", seconds=serial_s, speedup=1.0, efficiency_pct=100.0
        )
    ]
    for w in worker_counts:
        plan = ReducePlan(
            num_chunks=num_chunks, workers=w, serial_threshold=serial_threshold
        )
        with ProcessReducer(plan) as reducer:
            _warm_pool(reducer, ctx)
            state, seconds = run_probe(system, state0, sc, ctx, reducer, probe_steps)
        if not all(mp_bits_equal(a, b) for a, b in zip(state, serial_state)):
            raise RuntimeError(
                f"parallel probe at {w} workers disagrees with the serial probe; "
                "reduction determinism is broken"
            )
        speedup = serial_s / seconds
        records.append(
            BenchmarkRecord(
                workers=w,
                mode="parallel",
                seconds=seconds,
                speedup=speedup,
                efficiency_pct=100.0 * speedup / w,
            )
        )
    return records


def bench_table(records) -> str:
    lines = [
        "# workers\tmode\ttime_s\tspeedup\tefficiency_pct",
        "# absolute times are hardware-specific; compare speedup and efficiency",
    ]
    for r in records:
        lines.append(
            f"{r.workers}\t{r.mode}\t{r.seconds:.3f}\t{r.speedup:.3f}\t{r.efficiency_pct:.1f}"
        )
    return "\n".join(lines) + "\n"
