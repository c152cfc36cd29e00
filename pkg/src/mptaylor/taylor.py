"""High-order Taylor stepping for quadratic ODE systems.

One step of size tau advances the state through the order-N truncated
Taylor expansion. The coefficients (normalized derivatives) are computed
by the quadratic-system recurrence

    coeffs[m][i+1] = 1/(i+1) * ( c_m [only at i=0]
                                 + sum_j L[m][j] * coeffs[j][i]
                                 + sum_t q_t * conv(coeffs[j_t], coeffs[k_t], i) )

where conv is the order-i convolution sum delegated to a reducer
(reduction module). Computing order i+1 needs every order up to i, so the
order loop is strictly sequential; within one order the convolutions of
all product terms are fused into a single reduction episode.

Evaluation order inside each recurrence line is frozen for bit
reproducibility: linear part in ascending j, then bilinear contributions
in stored term order, then multiplication by the reciprocal 1/(i+1)
(computed as div(1, i+1) at working precision, once per order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, localcontext

import gmpy2

from .mp import MPValue, PrecisionContext, mp_from_decimal
from .reduction import SerialReducer
from .systems import QuadraticODESystem

DEFAULT_RECORD_STRIDE = 100


@dataclass(frozen=True)
class Jet:
    """Taylor coefficients of every state variable at one time point.

    coeffs[m][i] is the i-th normalized derivative of variable m; row
    length is order+1 and coeffs[m][0] is the input state bit-exactly.
    """

    dim: int
    order: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.dim:
            raise ValueError("coeffs must have dim rows")
        for row in self.coeffs:
            if len(row) != self.order + 1:
                raise ValueError("each coefficient row must have order+1 entries")


@dataclass(frozen=True)
class StepConfig:
    """Step size (as exact decimal text), method order, requested workers.

    The step size is kept as a decimal string so each precision context
    parses its own nearest value and so times t = step * tau stay exact in
    decimal for trajectory bookkeeping.
    """

    tau_text: str
    order_n: int
    workers: int = 1

    def __post_init__(self):
        try:
            tau = Decimal(self.tau_text)
        except ArithmeticError as exc:
            raise ValueError(f"step size is not a decimal: {self.tau_text!r}") from exc
        if tau == 0:
            raise ValueError("step size must be nonzero")
        if self.order_n < 1:
            raise ValueError(f"order_n must be >= 1, got {self.order_n}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def tau(self, ctx: PrecisionContext) -> MPValue:
        return mp_from_decimal(self.tau_text, ctx)


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    state: tuple


@dataclass
class Trajectory:
    """Recorded states of one integration, sampled at a fixed step stride."""

    dim: int
    tau_text: str
    points: list = field(default_factory=list)

    def time_of(self, step: int) -> Decimal:
        return exact_time(step, self.tau_text)

    def steps(self) -> list:
        return [p.step for p in self.points]

    def final_state(self) -> tuple:
        return self.points[-1].state


def exact_time(step: int, tau_text: str) -> Decimal:
    """step * tau as an exact decimal (never a rounded binary product)."""
    tau = Decimal(tau_text)
    with localcontext() as dctx:
        dctx.prec = len(tau.as_tuple().digits) + len(str(step)) + 4
        return +(tau * step)


def _jet_rows(system, state, order_n, ctx, session, pairs, pair_index):
    """The coefficient recurrence itself; shared by every public entry point."""
    g = ctx.gmp
    add, mul, div = g.add, g.mul, g.div
    dim = system.dim
    coeffs = [[state[m]] for m in range(dim)]
    for i in range(order_n):
        sums = session.convolutions(coeffs, pairs, i) if session else []
        inv = div(1, i + 1)
        for m in range(dim):
            acc = system.constant[m] if i == 0 else None
            row = system.linear[m]
            for j in range(dim):
                term = mul(row[j], coeffs[j][i])
                acc = term if acc is None else add(acc, term)
            for t in system.bilinear[m]:
                term = mul(t.coeff, sums[pair_index[(t.j, t.k)]])
                acc = term if acc is None else add(acc, term)
            coeffs[m].append(mul(acc, inv))
    return coeffs


def compute_jet(
    system: QuadraticODESystem,
    state,
    order_n: int,
    ctx: PrecisionContext,
    reducer=None,
) -> Jet:
    """Taylor coefficients of the solution through `state` up to order_n."""
    if len(state) != system.dim:
        raise ValueError(f"state has {len(state)} components, system dim {system.dim}")
    if order_n < 1:
        raise ValueError(f"order_n must be >= 1, got {order_n}")
    if reducer is None:
        reducer = SerialReducer()
    pairs = system.product_pairs()
    pair_index = {pair: p for p, pair in enumerate(pairs)}
    session = reducer.open_session(ctx) if pairs else None
    try:
        coeffs = _jet_rows(system, state, order_n, ctx, session, pairs, pair_index)
    finally:
        if session:
            session.close()
    return Jet(
        dim=system.dim,
        order=order_n,
        coeffs=tuple(tuple(row) for row in coeffs),
    )


def horner_eval(jet_row, tau: MPValue, ctx: PrecisionContext) -> MPValue:
    """a[0] + tau*(a[1] + tau*(a[2] + ...)), innermost term the highest index."""
    if len(jet_row) < 1:
        raise ValueError("jet row must have at least one coefficient")
    if gmpy2.is_zero(tau):
        return jet_row[0]
    g = ctx.gmp
    add, mul = g.add, g.mul
    acc = jet_row[-1]
    for idx in range(len(jet_row) - 2, -1, -1):
        acc = add(jet_row[idx], mul(tau, acc))
    return acc


def step(
    system: QuadraticODESystem,
    state,
    cfg: StepConfig,
    ctx: PrecisionContext,
    reducer=None,
) -> tuple:
    """Advance the state by one Taylor step of size cfg.tau."""
    tau = cfg.tau(ctx)
    jet = compute_jet(system, state, cfg.order_n, ctx, reducer)
    return tuple(horner_eval(jet.coeffs[m], tau, ctx) for m in range(system.dim))


def _record_steps(n_steps: int, stride: int) -> set:
    recorded = set(range(0, n_steps + 1, stride))
    recorded.add(0)
    recorded.add(n_steps)
    return recorded


def integrate(
    system: QuadraticODESystem,
    state0,
    cfg: StepConfig,
    n_steps: int,
    ctx: PrecisionContext,
    reducer=None,
    observer=None,
    record_stride: int = DEFAULT_RECORD_STRIDE,
    start_step: int = 0,
) -> Trajectory:
    """Apply `step` n_steps times, recording states every record_stride steps.

    Step 0 and the final step are always recorded. The observer, when
    given, is called after every step as observer(step_index, time, state)
    with time the exact decimal step*tau; states are immutable tuples.
    Identical inputs produce bit-identical trajectories.

    A nonzero start_step resumes mid-run: state0 is the state at that
    absolute step and recording keeps the absolute stride grid, so the
    continuation matches an uninterrupted run bit for bit.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    if not 0 <= start_step <= n_steps:
        raise ValueError(f"start_step must be in [0, {n_steps}], got {start_step}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be >= 1, got {record_stride}")
    if len(state0) != system.dim:
        raise ValueError(f"state has {len(state0)} components, system dim {system.dim}")
    if reducer is None:
        reducer = SerialReducer()
    tau = cfg.tau(ctx)
    recorded = _record_steps(n_steps, record_stride)
    traj = Trajectory(dim=system.dim, tau_text=cfg.tau_text)
    state = tuple(state0)
    traj.points.append(TrajectoryPoint(step=start_step, state=state))
    pairs = system.product_pairs()
    pair_index = {pair: p for p, pair in enumerate(pairs)}
    dim = system.dim
    for n in range(start_step + 1, n_steps + 1):
        session = reducer.open_session(ctx) if pairs else None
        try:
            coeffs = _jet_rows(system, state, cfg.order_n, ctx, session, pairs, pair_index)
        finally:
            if session:
                session.close()
        state = tuple(horner_eval(coeffs[m], tau, ctx) for m in range(dim))
        if n in recorded:
            traj.points.append(TrajectoryPoint(step=n, state=state))
        if observer is not None:
            observer(n, exact_time(n, cfg.tau_text), state)
    return traj
