"""Autonomous ODE systems with quadratic polynomial right-hand sides.

A system of dimension d is

    dx_m/dt = c_m + sum_j L[m][j] x_j + sum_t q_t x_{j_t} x_{k_t}

described by a dense constant vector, a dense linear matrix and a sparse
list of bilinear terms per equation (canonical ordering j <= k, no
duplicate (m, j, k)). The Lorenz system is provided as a named instance;
anything in this class integrates through the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .mp import MPValue, PrecisionContext, mp_from_decimal


@dataclass(frozen=True)
class BilinearTerm:
    """One product term coeff * x_j * x_k of an equation's right-hand side."""

    j: int
    k: int
    coeff: MPValue


@dataclass(frozen=True)
class QuadraticODESystem:
    dim: int
    constant: tuple
    linear: tuple
    bilinear: tuple  # per equation: tuple of BilinearTerm

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise ValueError(f"dim must be >= 1, got {d}")
        if len(self.constant) != d or len(self.linear) != d or len(self.bilinear) != d:
            raise ValueError("constant/linear/bilinear must all have dim entries")
        for row in self.linear:
            if len(row) != d:
                raise ValueError("linear rows must have dim entries")
        for m, terms in enumerate(self.bilinear):
            seen = set()
            for t in terms:
                if not (0 <= t.j <= t.k < d):
                    raise ValueError(
                        f"bilinear term ({m},{t.j},{t.k}) violates 0 <= j <= k < dim"
                    )
                if (t.j, t.k) in seen:
                    raise ValueError(f"duplicate bilinear term ({m},{t.j},{t.k})")
                seen.add((t.j, t.k))
        for v in self.constant:
            if not gmpy2.is_finite(v):
                raise ValueError("constant coefficients must be finite")
        for row in self.linear:
            for v in row:
                if not gmpy2.is_finite(v):
                    raise ValueError("linear coefficients must be finite")

    def product_pairs(self) -> list:
        """Distinct (j, k) products needed per order, in stored term order."""
        pairs = []
        seen = set()
        for terms in self.bilinear:
            for t in terms:
                if (t.j, t.k) not in seen:
                    seen.add((t.j, t.k))
                    pairs.append((t.j, t.k))
        return pairs


@dataclass(frozen=True)
class LorenzParams:
    sigma: MPValue
    R: MPValue
    b: MPValue

    @classmethod
    def default(cls, ctx: PrecisionContext) -> "LorenzParams":
        # b is 8/3 divided at working precision (one rounding), never a
        # truncated decimal literal, so every precision sees the same rule.
        return cls(
            sigma=ctx.from_int(10),
            R=ctx.from_int(28),
            b=ctx.div(ctx.from_int(8), ctx.from_int(3)),
        )


def lorenz_system(
    params: LorenzParams | None, ctx: PrecisionContext
) -> QuadraticODESystem:
    """The classical three-variable convection system.

        dx/dt = -sigma x + sigma y
        dy/dt = R x - y - x z
        dz/dt = x y - b z

    Defaults sigma=10, R=28, b=8/3.
    """
    p = params if params is not None else LorenzParams.default(ctx)
    for v in (p.sigma, p.R, p.b):
        if not gmpy2.is_finite(v):
            raise ValueError("Lorenz parameters must be finite")
    zero, one = ctx.zero, ctx.one
    return QuadraticODESystem(
        dim=3,
        constant=(zero, zero, zero),
        linear=(
            (ctx.neg(p.sigma), p.sigma, zero),
            (p.R, ctx.neg(one), zero),
            (zero, zero, ctx.neg(p.b)),
        ),
        bilinear=(
            (),
            (BilinearTerm(0, 2, ctx.neg(one)),),  # -x z
            (BilinearTerm(0, 1, one),),  # +x y
        ),
    )


def rhs_eval(system: QuadraticODESystem, state, ctx: PrecisionContext):
    """Evaluate the right-hand side at a state, one rounding per operation.

    Accumulation order is frozen for reproducibility: constant, then linear
    terms in ascending j, then bilinear terms in stored order.
    """
    if len(state) != system.dim:
        raise ValueError(f"state has {len(state)} components, system dim {system.dim}")
    g = ctx.gmp
    add, mul = g.add, g.mul
    out = []
    for m in range(system.dim):
        acc = system.constant[m]
        row = system.linear[m]
        for j in range(system.dim):
            acc = add(acc, mul(row[j], state[j]))
        for t in system.bilinear[m]:
            acc = add(acc, mul(t.coeff, mul(state[t.j], state[t.k])))
        out.append(acc)
    return tuple(out)


BUILTIN_SYSTEMS = ("lorenz",)


def builtin_system(name: str, ctx: PrecisionContext) -> QuadraticODESystem:
    if name == "lorenz":
        return lorenz_system(None, ctx)
    raise ValueError(f"unknown built-in system {name!r}, have {BUILTIN_SYSTEMS}")


def parse_system(text: str, ctx: PrecisionContext) -> QuadraticODESystem:
    """Parse the plain-text system description format.

    Lines (``#`` comments and blank lines ignored):

        dim D              optional explicit dimension
        const m VALUE      constant term of equation m
        lin m j VALUE      linear coefficient of x_j in equation m
        bilin m j k VALUE  coefficient of x_j * x_k in equation m

    Values are decimal strings parsed at the context precision. Without a
    dim line the dimension is one past the largest index mentioned. j/k in
    bilin terms are canonicalized to j <= k; duplicate entries are errors.
    """
    decl_dim = None
    consts: dict = {}
    lins: dict = {}
    bilins: dict = {}
    max_idx = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        try:
            if kind == "dim":
                (d,) = args
                decl_dim = int(d)
            elif kind == "const":
                m, value = args
                key = int(m)
                if key in consts:
                    raise ValueError(f"duplicate const {key}")
                consts[key] = mp_from_decimal(value, ctx)
                max_idx = max(max_idx, key)
            elif kind == "lin":
                m, j, value = args
                key = (int(m), int(j))
                if key in lins:
                    raise ValueError(f"duplicate lin {key}")
                lins[key] = mp_from_decimal(value, ctx)
                max_idx = max(max_idx, *key)
            elif kind == "bilin":
                m, j, k, value = args
                jj, kk = sorted((int(j), int(k)))
                key = (int(m), jj, kk)
                if key in bilins:
                    raise ValueError(f"duplicate bilin {key}")
                bilins[key] = mp_from_decimal(value, ctx)
                max_idx = max(max_idx, int(m), kk)
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except (ValueError, TypeError) as exc:
            raise ValueError(f"system description line {lineno}: {exc}") from exc
    dim = decl_dim if decl_dim is not None else max_idx + 1
    if dim < 1:
        raise ValueError("system description defines no equations")
    if max_idx >= dim:
        raise ValueError(f"index {max_idx} out of range for dim {dim}")
    zero = ctx.zero
    constant = tuple(consts.get(m, zero) for m in range(dim))
    linear = tuple(
        tuple(lins.get((m, j), zero) for j in range(dim)) for m in range(dim)
    )
    bilinear = tuple(
        tuple(
            BilinearTerm(j, k, v)
            for (m2, j, k), v in sorted(bilins.items())
            if m2 == m
        )
        for m in range(dim)
    )
    return QuadraticODESystem(dim=dim, constant=constant, linear=linear, bilinear=bilinear)
