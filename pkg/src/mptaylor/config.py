"""Run configuration: key=value files, flag overrides, validation, hashing.

A run is fully described by a flat set of keys (the same names the CLI
flags use, with underscores). Files hold ``key=value`` lines with ``#``
comments; explicit flags override file values. Validation collects every
problem before failing so a broken config is reported once, completely.

The config hash covers exactly the semantic keys, the ones that can change
computed bits or output bytes. Execution-only knobs (worker count, output
path, checkpoint cadence) are excluded: the same trajectory file must come
out byte-identical no matter how many workers ran the reduction.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .mp import bits_for_digits
from .reduction import DEFAULT_NUM_CHUNKS, DEFAULT_SERIAL_THRESHOLD
from .systems import BUILTIN_SYSTEMS


class ConfigError(ValueError):
    """Invalid run configuration; carries the full list of problems."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_DECIMAL_KEYS = ("tau", "t_end")
_INT_KEYS = (
    "order",
    "prec_bits",
    "prec_digits",
    "steps",
    "workers",
    "chunks",
    "serial_threshold",
    "checkpoint_every",
    "digits",
    "stride",
    "probe_steps",
    "verify_order",
    "verify_prec_bits",
    "agree_digits",
)
_STR_KEYS = ("system", "init", "out", "resume")
KNOWN_KEYS = frozenset(_DECIMAL_KEYS + _INT_KEYS + _STR_KEYS)

_REQUIRED = ("system", "init", "tau", "order")


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: what to integrate, how, and where results go."""

    system: str
    init: tuple
    tau: str
    order: int
    prec_bits: int
    n_steps: int
    workers: int = 1
    chunks: int = DEFAULT_NUM_CHUNKS
    serial_threshold: int = DEFAULT_SERIAL_THRESHOLD
    out: str | None = None
    checkpoint_every: int = 0
    digits: int | None = None
    stride: int = 100
    probe_steps: int = 5
    verify_order: int | None = None
    verify_prec_bits: int | None = None
    agree_digits: int = 10
    resume: str | None = None
    t_end: str | None = None


def _parse_file(path: str) -> dict:
    values = {}
    problems = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path!r}: {exc}"]) from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"{path}:{lineno}: expected key=value, got {line!r}")
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in KNOWN_KEYS:
                problems.append(f"{path}:{lineno}: unknown key {key!r}")
                continue
            if key in values:
                problems.append(f"{path}:{lineno}: duplicate key {key!r}")
                continue
            values[key] = value
    if problems:
        raise ConfigError(problems)
    return values


def _is_decimal(text: str) -> bool:
    try:
        Decimal(text)
        return True
    except InvalidOperation:
        return False


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus flag overrides.

    Every problem is collected and reported in a single ConfigError:
    missing required keys, unknown keys, conflicting alternatives
    (steps/t_end, prec_bits/prec_digits), malformed values.
    """
    values: dict = {}
    if path is not None:
        values.update(_parse_file(path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError([f"unknown config key {key!r}"])
        values[key] = val

    problems: list = []
    resolved: dict = {}

    for key in _REQUIRED:
        if key not in values:
            problems.append(f"missing required key {key!r}")
    if "prec_bits" not in values and "prec_digits" not in values:
        problems.append("missing required key 'prec_bits' (or 'prec_digits')")
    if "prec_bits" in values and "prec_digits" in values:
        problems.append("'prec_bits' and 'prec_digits' conflict; give exactly one")
    if "steps" not in values and "t_end" not in values:
        problems.append("missing required key 'steps' (or 't_end')")
    if "steps" in values and "t_end" in values:
        problems.append("'steps' and 't_end' conflict; give exactly one")

    for key in _INT_KEYS:
        if key in values:
            try:
                resolved[key] = int(values[key])
            except (TypeError, ValueError):
                problems.append(f"{key} must be an integer, got {values[key]!r}")

    for key in _DECIMAL_KEYS:
        if key in values:
            text = str(values[key])
            if not _is_decimal(text):
                problems.append(f"{key} must be a decimal number, got {text!r}")
            else:
                resolved[key] = text

    if "system" in values:
        system = str(values["system"])
        if system not in BUILTIN_SYSTEMS and not os.path.isfile(system):
            problems.append(
                f"system {system!r} is not a built-in ({', '.join(BUILTIN_SYSTEMS)}) "
                "or a readable description file"
            )
        resolved["system"] = system

    if "init" in values:
        if isinstance(values["init"], (tuple, list)):
            parts = [str(p) for p in values["init"]]
        else:
            parts = [p.strip() for p in str(values["init"]).split(",")]
        bad = [p for p in parts if not _is_decimal(p)]
        if bad:
            problems.append(f"init components must be decimal numbers, got {bad}")
        else:
            resolved["init"] = tuple(parts)

    if "tau" in resolved and Decimal(resolved["tau"]) == 0:
        problems.append("tau must be nonzero")

    positive = {
        "order": 1,
        "workers": 1,
        "chunks": 1,
        "serial_threshold": 1,
        "stride": 1,
        "probe_steps": 1,
        "digits": 1,
        "agree_digits": 1,
        "prec_digits": 1,
        "verify_order": 1,
        "verify_prec_bits": 1,
    }
    for key, least in positive.items():
        if key in resolved and resolved[key] < least:
            problems.append(f"{key} must be >= {least}, got {resolved[key]}")
    for key in ("steps", "checkpoint_every"):
        if key in resolved and resolved[key] < 0:
            problems.append(f"{key} must be >= 0, got {resolved[key]}")

    prec_bits = resolved.get("prec_bits")
    if prec_bits is None and "prec_digits" in resolved and resolved["prec_digits"] >= 1:
        prec_bits = bits_for_digits(resolved["prec_digits"])
    if prec_bits is not None and prec_bits < 64:
        problems.append(f"prec_bits must be >= 64, got {prec_bits}")

    n_steps = resolved.get("steps")
    if n_steps is None and "t_end" in resolved and "tau" in resolved:
        t_end = Decimal(resolved["t_end"])
        tau = Decimal(resolved["tau"])
        if t_end < 0:
            problems.append("t_end must be >= 0")
        elif tau != 0:
            ratio = t_end / tau
            if ratio != int(ratio) or ratio < 0:
                problems.append(
                    f"t_end {resolved['t_end']} is not a whole number of tau={resolved['tau']} steps"
                )
            else:
                n_steps = int(ratio)

    if "resume" in values:
        resume = str(values["resume"])
        if not os.path.isfile(resume):
            problems.append(f"resume checkpoint {resume!r} does not exist")
        resolved["resume"] = resume

    if "out" in values:
        out = str(values["out"])
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            problems.append(f"output path {out!r} is not writable")
        resolved["out"] = out

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        system=resolved["system"],
        init=resolved["init"],
        tau=resolved["tau"],
        order=resolved["order"],
        prec_bits=prec_bits,
        n_steps=n_steps,
        workers=resolved.get("workers", 1),
        chunks=resolved.get("chunks", DEFAULT_NUM_CHUNKS),
        serial_threshold=resolved.get("serial_threshold", DEFAULT_SERIAL_THRESHOLD),
        out=resolved.get("out"),
        checkpoint_every=resolved.get("checkpoint_every", 0),
        digits=resolved.get("digits"),
        stride=resolved.get("stride", 100),
        probe_steps=resolved.get("probe_steps", 5),
        verify_order=resolved.get("verify_order"),
        verify_prec_bits=resolved.get("verify_prec_bits"),
        agree_digits=resolved.get("agree_digits", 10),
        resume=resolved.get("resume"),
        t_end=resolved.get("t_end"),
    )


def output_digits(cfg: RunConfig) -> int:
    """Significant digits used in trajectory files: explicit, else carried
    decimal digits capped at 50 (checkpoints hold the lossless values)."""
    from .mp import decimal_digits

    if cfg.digits is not None:
        return cfg.digits
    return min(decimal_digits(cfg.prec_bits), 50)


def semantic_config(cfg: RunConfig, system_text: str | None = None) -> dict:
    """The key=value view of everything that affects output bytes.

    system files are identified by content hash, not path, so a renamed
    file with equal content still resumes cleanly.
    """
    if system_text is not None:
        system_id = "sha256:" + hashlib.sha256(system_text.encode()).hexdigest()
    else:
        system_id = cfg.system
    return {
        "system": system_id,
        "init": ",".join(cfg.init),
        "tau": cfg.tau,
        "order": str(cfg.order),
        "prec_bits": str(cfg.prec_bits),
        "steps": str(cfg.n_steps),
        "chunks": str(cfg.chunks),
        "serial_threshold": str(cfg.serial_threshold),
        "digits": str(output_digits(cfg)),
        "stride": str(cfg.stride),
    }


def config_hash(semantic: dict) -> str:
    blob = "".join(f"{k}={semantic[k]}\n" for k in sorted(semantic))
    return hashlib.sha256(blob.encode()).hexdigest()
