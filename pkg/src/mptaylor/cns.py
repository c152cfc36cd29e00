"""Trajectory verification by paired runs at increasing precision and order.

A chaotic trajectory computed at precision K and order N is certified by
recomputing it at strictly larger K' and N' and measuring, sample by
sample, how many significant decimal digits the two runs share. The
critical time t_c is the largest sample time up to which every sample
agrees to at least d digits; the base trajectory is treated as reliable up
to t_c. Sweeping the base precision or order produces t_c diagrams that
show how far a given budget can be trusted.

The coincidence metric is a definition made here (the idea of "the runs
coincide" does not pin one down): component-wise relative agreement

    digits(a, b) = min over components m of
                   floor(-log10(|a_m - b_m| / max(|a_m|, |b_m|, 1)))

floored at 0, with the max(..., 1) guard keeping the measure meaningful
near zero states, and a distinguished EXACT marker (infinity) when every
component matches exactly. The floor is evaluated in exact rational
arithmetic so sample classifications never depend on float log accuracy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

from .config import ConfigError
from .mp import PrecisionContext, decimal_digits, mp_from_decimal
from .reduction import ReducePlan, make_reducer
from .systems import builtin_system
from .taylor import StepConfig, Trajectory, integrate

AGREEMENT_EXACT = math.inf


def _floor_neg_log10(num: int, den: int) -> int:
    """Largest d >= 0 with num/den <= 10**-d, exactly (num, den > 0)."""
    if num > den:
        return 0
    d = max(0, int((den.bit_length() - num.bit_length()) * 0.30102999566))
    while num * 10 ** (d + 1) <= den:
        d += 1
    while d > 0 and num * 10**d > den:
        d -= 1
    return d


def agreement_digits(state_a, state_b) -> float:
    """Shared significant decimal digits of two states (min over components).

    Returns AGREEMENT_EXACT when all components are identical. States may
    carry different precisions; the comparison is exact rational arithmetic
    on the represented values.
    """
    if len(state_a) != len(state_b):
        raise ValueError(
            f"states have different dims: {len(state_a)} vs {len(state_b)}"
        )
    worst = None
    for a, b in zip(state_a, state_b):
        fa = Fraction(*a.as_integer_ratio())
        fb = Fraction(*b.as_integer_ratio())
        delta = abs(fa - fb)
        if delta == 0:
            continue
        guard = max(abs(fa), abs(fb), Fraction(1))
        rel = delta / guard
        d = _floor_neg_log10(rel.numerator, rel.denominator)
        worst = d if worst is None else min(worst, d)
    return AGREEMENT_EXACT if worst is None else worst


@dataclass(frozen=True)
class CnsConfig:
    """Paired-run configuration: base budget, verify budget, comparison rule.

    The verify budget must strictly dominate the base in both precision and
    order; allow_equal_verify is a testing escape hatch that relaxes this
    to >= (an equal pair trivially certifies the whole interval).
    """

    base_bits: int
    base_order: int
    verify_bits: int
    verify_order: int
    tau_text: str
    t_end_text: str
    agreement_digits: int = 10
    stride: int = 100
    allow_equal_verify: bool = False

    def __post_init__(self):
        problems = []
        if self.agreement_digits < 1:
            problems.append("agreement_digits must be >= 1")
        if self.stride < 1:
            problems.append("stride must be >= 1")
        if self.allow_equal_verify:
            if self.verify_bits < self.base_bits or self.verify_order < self.base_order:
                problems.append("verify budget must be >= base budget")
        else:
            if self.verify_bits <= self.base_bits:
                problems.append(
                    f"verify precision ({self.verify_bits}) must exceed base ({self.base_bits})"
                )
            if self.verify_order <= self.base_order:
                problems.append(
                    f"verify order ({self.verify_order}) must exceed base ({self.base_order})"
                )
        if Decimal(self.t_end_text) < 0:
            problems.append("t_end must be >= 0")
        if problems:
            raise ConfigError(problems)

    def n_steps(self) -> int:
        ratio = Decimal(self.t_end_text) / Decimal(self.tau_text)
        n = int(ratio)
        if n != ratio:
            raise ConfigError(
                [f"t_end {self.t_end_text} is not an integer multiple of tau {self.tau_text}"]
            )
        return n


def default_verify_margins(base_bits: int, base_order: int) -> tuple:
    """Verify budget used when none is given: x1.33 bits, +ceil(N/3) order."""
    return (
        math.ceil(base_bits * 1.33),
        base_order + math.ceil(base_order / 3),
    )


def _tc_from_series(series, d) -> Decimal:
    """Largest sample time with all earlier samples agreeing to >= d digits."""
    t_c = series[-1][1]
    for idx, (_, t, digits) in enumerate(series):
        if digits < d:
            return series[idx - 1][1] if idx > 0 else Decimal(0)
    return t_c


@dataclass
class TcReport:
    """Outcome of one paired run: t_c plus the full agreement series."""

    t_c: Decimal
    t_end: Decimal
    required_digits: int
    tau_text: str
    # (step, time, digits) per compared sample; digits is AGREEMENT_EXACT
    # when the sample matched bit-for-bit.
    agreement: list
    base: dict | None = None
    verify: dict | None = None

    def tc_for(self, d: int) -> Decimal:
        """Reproject t_c for a different digit requirement from the recorded
        series (no capacity check; that lives in estimate_tc)."""
        if d < 1:
            raise ValueError(f"required digits must be >= 1, got {d}")
        return _tc_from_series(self.agreement, d)

    def to_kv(self) -> str:
        lines = [
            f"t_c={self.t_c}",
            f"t_end={self.t_end}",
            f"required_digits={self.required_digits}",
            f"tau={self.tau_text}",
            f"samples={len(self.agreement)}",
        ]
        for label, cfg in (("base", self.base), ("verify", self.verify)):
            if cfg:
                for key in sorted(cfg):
                    lines.append(f"{label}_{key}={cfg[key]}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            "trajectory verification report",
            f"  reliable up to t_c = {self.t_c} (of t_end = {self.t_end})",
            f"  required agreement: {self.required_digits} significant decimal digits",
            f"  compared samples: {len(self.agreement)} (step size {self.tau_text})",
        ]
        if self.base:
            lines.append(f"  base run:   {self.base}")
        if self.verify:
            lines.append(f"  verify run: {self.verify}")
        return "\n".join(lines) + "\n"

    def agreement_tsv(self) -> str:
        rows = ["# step\tt\tagreement_digits"]
        for step_idx, t, digits in self.agreement:
            shown = "inf" if digits == AGREEMENT_EXACT else str(digits)
            rows.append(f"{step_idx}\t{t}\t{shown}")
        return "\n".join(rows) + "\n"


def estimate_tc(traj_a: Trajectory, traj_b: Trajectory, d: int) -> TcReport:
    """t_c = last sample time before d-digit agreement first fails.

    The trajectories must be sampled on the identical step grid. When d
    exceeds the decimal capacity of the lower-precision run nothing can be
    certified: t_c is 0 and a warning is issued.
    """
    if d < 1:
        raise ValueError(f"required digits must be >= 1, got {d}")
    if traj_a.dim != traj_b.dim:
        raise ConfigError(["trajectories have different dims"])
    if traj_a.tau_text != traj_b.tau_text or traj_a.steps() != traj_b.steps():
        raise ConfigError(["trajectories are sampled on different grids"])
    series = []
    for pa, pb in zip(traj_a.points, traj_b.points):
        digits = agreement_digits(pa.state, pb.state)
        series.append((pa.step, traj_a.time_of(pa.step), digits))
    t_end = series[-1][1]
    capacity = min(
        decimal_digits(v.precision)
        for point in (traj_a.points[0], traj_b.points[0])
        for v in point.state
    )
    if d > capacity:
        warnings.warn(
            f"cannot certify {d} digits with only {capacity} carried decimal digits; t_c = 0",
            stacklevel=2,
        )
        return TcReport(
            t_c=Decimal(0),
            t_end=t_end,
            required_digits=d,
            tau_text=traj_a.tau_text,
            agreement=series,
        )
    return TcReport(
        t_c=_tc_from_series(series, d),
        t_end=t_end,
        required_digits=d,
        tau_text=traj_a.tau_text,
        agreement=series,
    )


def _resolve_system(system, ctx: PrecisionContext):
    if callable(system):
        return system(ctx)
    if isinstance(system, str):
        return builtin_system(system, ctx)
    raise TypeError("system must be a builtin name or a callable(ctx) -> system")


def cns_run(system, init_texts, cfg: CnsConfig, plan: ReducePlan | None = None):
    """Run the base and verify integrations and measure their agreement.

    `system` is a builtin name or a callable(ctx) -> QuadraticODESystem so
    each run builds its coefficients at its own precision; the initial data
    are decimal strings parsed per run the same way. Returns (base
    trajectory, TcReport); the base trajectory is the deliverable, reliable
    up to the report's t_c.
    """
    n_steps = cfg.n_steps()
    runs = {}
    for label, bits, order in (
        ("base", cfg.base_bits, cfg.base_order),
        ("verify", cfg.verify_bits, cfg.verify_order),
    ):
        ctx = PrecisionContext(bits)
        sysm = _resolve_system(system, ctx)
        state0 = tuple(mp_from_decimal(t, ctx) for t in init_texts)
        sc = StepConfig(
            tau_text=cfg.tau_text,
            order_n=order,
            workers=plan.workers if plan else 1,
        )
        reducer = make_reducer(plan)
        try:
            runs[label] = integrate(
                sysm, state0, sc, n_steps, ctx, reducer, record_stride=cfg.stride
            )
        finally:
            reducer.close()
    report = estimate_tc(runs["base"], runs["verify"], cfg.agreement_digits)
    report.base = {"bits": cfg.base_bits, "order": cfg.base_order}
    report.verify = {"bits": cfg.verify_bits, "order": cfg.verify_order}
    return runs["base"], report


def tc_diagram(
    system,
    init_texts,
    sweep,
    tau_text: str,
    t_end_text: str,
    d: int,
    swept: str = "precision",
    stride: int = 100,
    verify_margins=default_verify_margins,
    plan: ReducePlan | None = None,
):
    """One paired run per (bits, order) sweep point; rows of (parameter, t_c).

    The swept parameter column is the decimal-digit count of the precision
    (swept="precision") or the method order (swept="order"). Raw t_c values
    are reported; no monotone smoothing is applied.
    """
    if not sweep:
        raise ValueError("sweep must not be empty")
    if swept not in ("precision", "order"):
        raise ValueError(f"swept must be 'precision' or 'order', got {swept!r}")
    rows = []
    for bits, order in sweep:
        vbits, vorder = verify_margins(bits, order)
        cfg = CnsConfig(
            base_bits=bits,
            base_order=order,
            verify_bits=vbits,
            verify_order=vorder,
            tau_text=tau_text,
            t_end_text=t_end_text,
            agreement_digits=d,
            stride=stride,
        )
        _, report = cns_run(system, init_texts, cfg, plan)
        param = decimal_digits(bits) if swept == "precision" else order
        rows.append((param, report.t_c, report))
    return rows


def diagram_tsv(rows) -> str:
    lines = ["# param\tt_c"]
    for param, t_c, _ in rows:
        lines.append(f"{param}\t{t_c}")
    return "\n".join(lines) + "\n"
