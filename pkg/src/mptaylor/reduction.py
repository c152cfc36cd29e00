"""Deterministic, worker-count-independent reduction of convolution sums.

The inner loop of high-order Taylor stepping is the order-i convolution
sum(a[i-k] * b[k] for k in 0..i). At multiple precision this dominates all
other work, and naive parallel summation would make the rounded result
depend on how many workers happened to run. This module fixes the rounding
structure instead:

  * the index range [0, i] is split into a fixed number of chunks
    ("equal in size as much as possible"),
  * each chunk is accumulated in ascending k, one rounding per multiply
    and per add,
  * chunk partial sums are merged in ascending chunk order by a single
    merger.

The resulting value depends only on (operands, i, chunk count, serial
threshold) - never on the worker count or on scheduling. Workers are OS
processes (interpreter-level locking makes threads useless for this
workload); they claim chunks dynamically from a shared counter, own their
partial sums exclusively, and a join barrier precedes the ordered merge.
Below ``serial_threshold`` indices the plain ascending loop runs on the
coordinator, because fork/join overhead dominates tiny orders.
"""

from __future__ import annotations

import itertools
import multiprocessing
from dataclasses import dataclass

from gmpy2 import from_binary, to_binary

from .mp import MPValue, PrecisionContext

DEFAULT_NUM_CHUNKS = 64
DEFAULT_SERIAL_THRESHOLD = 256


@dataclass(frozen=True)
class ReducePlan:
    """Rounding structure and execution width of reductions.

    num_chunks fixes the chunked-summation layout and therefore the result
    bits; workers only chooses how many processes execute it. With
    chunks_follow_workers=True the chunk count instead tracks the worker
    count (one partial-sum container per worker), which reproduces the
    classic manual-reduction layout at the cost of results that vary with
    the worker count.
    """

    num_chunks: int = DEFAULT_NUM_CHUNKS
    workers: int = 1
    serial_threshold: int = DEFAULT_SERIAL_THRESHOLD
    chunks_follow_workers: bool = False

    def __post_init__(self):
        if self.num_chunks < 1:
            raise ValueError(f"num_chunks must be >= 1, got {self.num_chunks}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.serial_threshold < 1:
            raise ValueError(
                f"serial_threshold must be >= 1, got {self.serial_threshold}"
            )

    def effective_chunks(self) -> int:
        return self.workers if self.chunks_follow_workers else self.num_chunks


def partition(i: int, num_chunks: int) -> list:
    """Split the index range [0, i] into num_chunks contiguous ranges.

    Sizes differ by at most one; the first (i+1) % num_chunks ranges are the
    larger ones. Ranges are returned as inclusive (lo, hi) pairs in ascending
    order; a range with hi < lo is empty (possible when num_chunks > i+1).
    """
    if i < 0:
        raise ValueError(f"order index must be >= 0, got {i}")
    if num_chunks < 1:
        raise ValueError(f"num_chunks must be >= 1, got {num_chunks}")
    return [chunk_bounds(i, num_chunks, c) for c in range(num_chunks)]


def chunk_bounds(i: int, num_chunks: int, c: int) -> tuple:
    """Inclusive (lo, hi) of chunk c in the partition of [0, i]."""
    total = i + 1
    base, rem = divmod(total, num_chunks)
    lo = c * base + min(c, rem)
    size = base + (1 if c < rem else 0)
    return (lo, lo + size - 1)


def _fold_chunk(arrays, pairs, i, lo, hi, g):
    """Partial sums over k in [lo, hi] for every (ja, jb) pair, ascending k.

    One rounding per multiply and per add; the accumulators of different
    pairs are independent, so fusing them into one pass over k leaves each
    sum bit-identical to a standalone evaluation.
    """
    mul, add = g.mul, g.add
    if len(pairs) == 2:
        (ja, jb), (jc, jd) = pairs
        a, b, c, d = arrays[ja], arrays[jb], arrays[jc], arrays[jd]
        s1 = mul(a[i - lo], b[lo])
        s2 = mul(c[i - lo], d[lo])
        for k in range(lo + 1, hi + 1):
            ik = i - k
            s1 = add(s1, mul(a[ik], b[k]))
            s2 = add(s2, mul(c[ik], d[k]))
        return [s1, s2]
    if len(pairs) == 1:
        ((ja, jb),) = pairs
        a, b = arrays[ja], arrays[jb]
        s = mul(a[i - lo], b[lo])
        for k in range(lo + 1, hi + 1):
            s = add(s, mul(a[i - k], b[k]))
        return [s]
    sums = [mul(arrays[ja][i - lo], arrays[jb][lo]) for ja, jb in pairs]
    for k in range(lo + 1, hi + 1):
        ik = i - k
        for p, (ja, jb) in enumerate(pairs):
            sums[p] = add(sums[p], mul(arrays[ja][ik], arrays[jb][k]))
    return sums


def _merge_partials(per_chunk, npairs, g):
    """Fold chunk partials in ascending chunk order; empty chunks contribute nothing."""
    add = g.add
    out = [None] * npairs
    for _, sums in per_chunk:
        for p in range(npairs):
            out[p] = sums[p] if out[p] is None else add(out[p], sums[p])
    return out


def _convolve_value(arrays, pairs, i, c_eff, threshold, g):
    """The reduction value: plain ascending fold below threshold or with one
    chunk, otherwise chunked partials merged in ascending chunk order."""
    if i + 1 < threshold or c_eff == 1:
        return _fold_chunk(arrays, pairs, i, 0, i, g)
    parts = []
    for c in range(c_eff):
        lo, hi = chunk_bounds(i, c_eff, c)
        if lo <= hi:
            parts.append((c, _fold_chunk(arrays, pairs, i, lo, hi, g)))
    return _merge_partials(parts, len(pairs), g)


def convolve(a, b, i: int, plan: ReducePlan, ctx: PrecisionContext) -> MPValue:
    """sum(a[i-k] * b[k] for k in 0..i) under the plan's rounding structure.

    The value depends only on (a, b, i, plan.effective_chunks(),
    plan.serial_threshold); executing it through a worker pool gives
    bit-identical results.
    """
    if i < 0:
        raise ValueError(f"order index must be >= 0, got {i}")
    if len(a) < i + 1 or len(b) < i + 1:
        raise ValueError(f"operand arrays must have at least {i + 1} entries")
    return _convolve_value(
        (a, b), ((0, 1),), i, plan.effective_chunks(), plan.serial_threshold, ctx.gmp
    )[0]


def convolve_pair(a, b, c, d, i: int, plan: ReducePlan, ctx: PrecisionContext) -> tuple:
    """Two convolution sums fused into one pass over k per chunk.

    Returns (sum a[i-k] b[k], sum c[i-k] d[k]), each bit-identical to the
    corresponding standalone convolve.
    """
    if i < 0:
        raise ValueError(f"order index must be >= 0, got {i}")
    for arr in (a, b, c, d):
        if len(arr) < i + 1:
            raise ValueError(f"operand arrays must have at least {i + 1} entries")
    s1, s2 = _convolve_value(
        (a, b, c, d),
        ((0, 1), (2, 3)),
        i,
        plan.effective_chunks(),
        plan.serial_threshold,
        ctx.gmp,
    )
    return s1, s2


class SerialReducer:
    """In-process execution of the reduction value. Always available."""

    def __init__(self, plan: ReducePlan | None = None):
        self.plan = plan if plan is not None else ReducePlan()

    def convolve(self, a, b, i, ctx):
        return convolve(a, b, i, self.plan, ctx)

    def convolve_pair(self, a, b, c, d, i, ctx):
        return convolve_pair(a, b, c, d, i, self.plan, ctx)

    def open_session(self, ctx: PrecisionContext):
        return _SerialSession(self.plan, ctx)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class _SerialSession:
    def __init__(self, plan, ctx):
        self._plan = plan
        self._ctx = ctx

    def convolutions(self, arrays, pairs, i):
        if not pairs:
            return []
        return _convolve_value(
            arrays,
            pairs,
            i,
            self._plan.effective_chunks(),
            self._plan.serial_threshold,
            self._ctx.gmp,
        )

    def close(self):
        pass


def _worker_main(worker_id, conn, counter, start_barrier):
    """Worker process loop: mirror coefficient arrays, claim chunks, reply partials.

    The mirror holds exact copies (lossless binary serialization) of the
    coefficient prefixes the coordinator has published; a new generation id
    resets it. Each claimed chunk is accumulated locally and sent back, so
    every partial-sum container has exactly one writer.
    """
    start_barrier.wait()
    mirrors: dict = {}
    gen = None
    pctx = None
    while True:
        msg = conn.recv()
        tag = msg[0]
        if tag == "stop":
            conn.close()
            return
        try:
            _, job_gen, prec_bits, i, c_eff, updates, pairs = msg
            if job_gen != gen:
                mirrors = {}
                gen = job_gen
                pctx = PrecisionContext(prec_bits)
            for var, blobs in updates:
                mirrors.setdefault(var, []).extend(from_binary(x) for x in blobs)
            g = pctx.gmp
            claimed = []
            while True:
                with counter.get_lock():
                    c = counter.value
                    counter.value = c + 1
                if c >= c_eff:
                    break
                lo, hi = chunk_bounds(i, c_eff, c)
                if lo > hi:
                    claimed.append((c, []))
                    continue
                sums = _fold_chunk(mirrors, pairs, i, lo, hi, g)
                claimed.append((c, [to_binary(s) for s in sums]))
            conn.send(("ok", worker_id, claimed))
        except Exception as exc:  # propagate to the coordinator
            conn.send(("error", worker_id, repr(exc)))


class ProcessReducer:
    """Fork-join pool of worker processes executing the chunked reduction.

    The coordinator publishes new coefficients once (workers keep exact
    mirrors across the orders of one session), workers claim chunks from a
    shared counter, and the coordinator merges the returned partials in
    ascending chunk order. Reductions below the plan's serial threshold run
    in-process. One coordinator at a time; not reentrant.
    """

    def __init__(self, plan: ReducePlan, collect_assignments: bool = False):
        if plan.workers < 1:
            raise ValueError("plan.workers must be >= 1")
        self.plan = plan
        self.collect_assignments = collect_assignments
        self.last_assignments: list | None = None
        self._gen = itertools.count()
        self._procs: list = []
        self._conns: list = []
        self._counter = None
        self._started = False

    def _ensure_pool(self):
        if self._started:
            return
        methods = multiprocessing.get_all_start_methods()
        mpctx = multiprocessing.get_context(
            "fork" if "fork" in methods else "spawn"
        )
        self._counter = mpctx.Value("l", 0)
        start_barrier = mpctx.Barrier(self.plan.workers + 1)
        for w in range(self.plan.workers):
            parent, child = mpctx.Pipe()
            proc = mpctx.Process(
                target=_worker_main,
                args=(w, child, self._counter, start_barrier),
                daemon=True,
            )
            proc.start()
            child.close()
            self._conns.append(parent)
            self._procs.append(proc)
        start_barrier.wait()
        self._started = True

    def close(self):
        for conn in self._conns:
            try:
                conn.send(("stop",))
                conn.close()
            except (OSError, BrokenPipeError):
                pass
        for proc in self._procs:
            proc.join(timeout=10)
            if proc.is_alive():
                proc.terminate()
        self._conns = []
        self._procs = []
        self._started = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def open_session(self, ctx: PrecisionContext):
        return _ProcessSession(self, next(self._gen), ctx)

    def convolve(self, a, b, i, ctx):
        session = self.open_session(ctx)
        try:
            return session.convolutions((a, b), ((0, 1),), i)[0]
        finally:
            session.close()

    def convolve_pair(self, a, b, c, d, i, ctx):
        session = self.open_session(ctx)
        try:
            s1, s2 = session.convolutions((a, b, c, d), ((0, 1), (2, 3)), i)
            return s1, s2
        finally:
            session.close()

    def _run_job(self, gen, prec_bits, i, c_eff, updates, pairs):
        self._ensure_pool()
        self._counter.value = 0
        msg = ("job", gen, prec_bits, i, c_eff, updates, pairs)
        for conn in self._conns:
            conn.send(msg)
        claims: list = []
        failure = None
        for conn in self._conns:
            reply = conn.recv()
            if reply[0] == "error":
                failure = f"reduction worker {reply[1]} failed: {reply[2]}"
                continue
            _, worker_id, claimed = reply
            for c, blobs in claimed:
                claims.append((c, worker_id, blobs))
        if failure is not None:
            self.close()  # the pool is mid-protocol; never reuse it
            raise RuntimeError(failure)
        claims.sort(key=lambda item: item[0])
        chunk_ids = [c for c, _, _ in claims]
        if chunk_ids != list(range(c_eff)):
            self.close()
            raise RuntimeError(
                f"chunk claims are not a permutation of 0..{c_eff - 1}: {chunk_ids}"
            )
        if self.collect_assignments:
            self.last_assignments = [(c, w) for c, w, _ in claims]
        return [
            (c, [from_binary(b) for b in blobs]) for c, _, blobs in claims if blobs
        ]


class _ProcessSession:
    """One jet computation's window onto the pool: tracks what each worker
    already mirrors so only new coefficients cross the process boundary."""

    def __init__(self, reducer: ProcessReducer, gen: int, ctx: PrecisionContext):
        self._reducer = reducer
        self._gen = gen
        self._ctx = ctx
        self._sent: dict = {}

    def convolutions(self, arrays, pairs, i):
        if not pairs:
            return []
        plan = self._reducer.plan
        c_eff = plan.effective_chunks()
        if i + 1 < plan.serial_threshold or c_eff == 1:
            return _convolve_value(
                arrays, pairs, i, c_eff, plan.serial_threshold, self._ctx.gmp
            )
        needed = sorted({j for pair in pairs for j in pair})
        updates = []
        for var in needed:
            done = self._sent.get(var, 0)
            if done < i + 1:
                updates.append(
                    (var, [to_binary(v) for v in arrays[var][done : i + 1]])
                )
                self._sent[var] = i + 1
        pair_key = tuple((int(a), int(b)) for a, b in pairs)
        parts = self._reducer._run_job(
            self._gen, self._ctx.precision_bits, i, c_eff, updates, pair_key
        )
        return _merge_partials(parts, len(pairs), self._ctx.gmp)

    def close(self):
        self._sent = {}


def make_reducer(plan: ReducePlan | None = None):
    """SerialReducer for single-worker plans, ProcessReducer otherwise."""
    plan = plan if plan is not None else ReducePlan()
    if plan.workers == 1:
        return SerialReducer(plan)
    return ProcessReducer(plan)
