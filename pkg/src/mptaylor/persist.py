"""Trajectory files and bit-exact checkpoints.

Trajectory files are TSV for humans and plotting tools: a comment block
echoing the resolved semantic config and its hash, a column header, then
one row per recorded step with values at the configured significant
digits. They are byte-identical across reruns and across worker counts.

Checkpoints are lossless. Each variable is stored as sign, hex
significand and binary exponent (value = sign * mant * 2**exp, mant the
integer significand from the value's mantissa/exponent decomposition), so
resuming reproduces the uninterrupted run bit for bit. Layout, one
checkpoint per file:

    mptaylor-checkpoint v1
    config_hash=<sha256 hex of the semantic config>
    step=<int>
    time=<exact decimal step*tau>
    prec_bits=<int>
    dim=<int>
    var <m> sign=<+|-> mant=<hex> exp=<int>     (dim lines)
    end
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .mp import MPValue, PrecisionContext, mp_to_decimal
from .taylor import Trajectory

CHECKPOINT_MAGIC = "mptaylor-checkpoint v1"


def state_column_names(dim: int) -> list:
    if dim == 3:
        return ["x", "y", "z"]
    return [f"x{m}" for m in range(dim)]


def trajectory_text(traj: Trajectory, semantic: dict, hash_hex: str, digits: int) -> str:
    """Render a trajectory as the TSV trajectory-file format."""
    lines = ["# mptaylor trajectory"]
    for key in sorted(semantic):
        lines.append(f"# {key}={semantic[key]}")
    lines.append(f"# config_hash={hash_hex}")
    lines.append("# t\t" + "\t".join(state_column_names(traj.dim)))
    for point in traj.points:
        t = traj.time_of(point.step)
        row = [str(t)] + [mp_to_decimal(v, digits) for v in point.state]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def write_trajectory(path: str, traj: Trajectory, semantic: dict, hash_hex: str, digits: int):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trajectory_text(traj, semantic, hash_hex, digits))


def _encode_value(m: int, v: MPValue) -> str:
    mant, exp = v.as_mantissa_exp()
    mant = int(mant)
    exp = int(exp)
    if mant == 0:
        exp = 0
    sign = "-" if (mant < 0 or (mant == 0 and gmpy2.is_signed(v))) else "+"
    return f"var {m} sign={sign} mant={abs(mant):x} exp={exp}"


@dataclass(frozen=True)
class CheckpointData:
    step: int
    time_text: str
    prec_bits: int
    config_hash: str
    state: tuple


def checkpoint_text(step: int, time_text: str, prec_bits: int, config_hash: str, state) -> str:
    lines = [
        CHECKPOINT_MAGIC,
        f"config_hash={config_hash}",
        f"step={step}",
        f"time={time_text}",
        f"prec_bits={prec_bits}",
        f"dim={len(state)}",
    ]
    for m, v in enumerate(state):
        lines.append(_encode_value(m, v))
    lines.append("end")
    return "\n".join(lines) + "\n"


def write_checkpoint(path: str, step: int, time_text: str, prec_bits: int, config_hash: str, state):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(checkpoint_text(step, time_text, prec_bits, config_hash, state))


def load_checkpoint(path: str) -> CheckpointData:
    """Parse and exactly reconstruct a checkpoint written by write_checkpoint."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC!r} file")
    fields = {}
    var_lines = []
    for line in lines[1:]:
        if line == "end":
            break
        if line.startswith("var "):
            var_lines.append(line)
        elif "=" in line:
            key, _, value = line.partition("=")
            fields[key] = value
        elif line.strip():
            raise ValueError(f"{path}: unexpected line {line!r}")
    else:
        raise ValueError(f"{path}: missing 'end' marker")
    try:
        step = int(fields["step"])
        prec_bits = int(fields["prec_bits"])
        dim = int(fields["dim"])
        time_text = fields["time"]
        config_hash = fields["config_hash"]
    except KeyError as exc:
        raise ValueError(f"{path}: missing checkpoint field {exc}") from exc
    if len(var_lines) != dim:
        raise ValueError(f"{path}: expected {dim} var lines, found {len(var_lines)}")
    ctx = PrecisionContext(prec_bits)
    values = []
    for expect_m, line in enumerate(var_lines):
        parts = line.split()
        if len(parts) != 5 or int(parts[1]) != expect_m:
            raise ValueError(f"{path}: malformed var line {line!r}")
        sign = parts[2].removeprefix("sign=")
        if sign not in ("+", "-"):
            raise ValueError(f"{path}: malformed sign in {line!r}")
        mant = int(parts[3].removeprefix("mant="), 16)
        exp = int(parts[4].removeprefix("exp="))
        if mant == 0:
            v = ctx.neg(ctx.zero) if sign == "-" else ctx.zero
        else:
            # mant has at most prec_bits significant bits, so this is exact.
            v = ctx.mul_2exp(ctx.from_int(mant), exp)
            if sign == "-":
                v = ctx.neg(v)
        values.append(v)
    return CheckpointData(
        step=step,
        time_text=time_text,
        prec_bits=prec_bits,
        config_hash=config_hash,
        state=tuple(values),
    )
