"""Deterministic chunked reduction: partitioning, values, worker independence."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mptaylor import (
    PrecisionContext,
    ProcessReducer,
    ReducePlan,
    SerialReducer,
    chunk_bounds,
    convolve,
    convolve_pair,
    make_reducer,
    mp_bits_equal,
    mp_from_decimal,
    partition,
)

from .conftest import CANON_INIT
from .oracles import fraction_of, ulp_of


def random_array(ctx, rnd, length, den=17):
    return [
        ctx.div(ctx.from_int(rnd.randrange(-9999, 10000)), ctx.from_int(den))
        for _ in range(length)
    ]


def serial_loop(a, b, i, ctx):
    """The plain ascending reference loop, written independently here."""
    g = ctx.gmp
    s = g.mul(a[i], b[0])
    for k in range(1, i + 1):
        s = g.add(s, g.mul(a[i - k], b[k]))
    return s


class TestPartition:
    def test_eleven_indices_four_chunks(self):
        assert partition(10, 4) == [(0, 2), (3, 5), (6, 8), (9, 10)]

    def test_single_index_many_chunks(self):
        ranges = partition(0, 4)
        assert ranges[0] == (0, 0)
        assert all(hi < lo for lo, hi in ranges[1:])

    def test_one_chunk(self):
        assert partition(5, 1) == [(0, 5)]

    @given(
        st.integers(min_value=0, max_value=2000),
        st.integers(min_value=1, max_value=128),
    )
    @settings(max_examples=300)
    def test_cover_disjoint_balanced(self, i, num_chunks):
        ranges = partition(i, num_chunks)
        assert len(ranges) == num_chunks
        indices = [k for lo, hi in ranges for k in range(lo, hi + 1)]
        assert indices == list(range(i + 1))  # cover, disjoint, ascending
        sizes = [hi - lo + 1 for lo, hi in ranges]
        assert max(sizes) - min(sizes) <= 1
        rem = (i + 1) % num_chunks
        if rem:
            big = max(sizes)
            assert sizes[:rem] == [big] * rem  # larger chunks come first
        for c, r in enumerate(ranges):
            assert chunk_bounds(i, num_chunks, c) == r

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            partition(-1, 4)
        with pytest.raises(ValueError):
            partition(3, 0)


class TestConvolveValues:
    def test_ones_exact(self, ctx256):
        a = [ctx256.one] * 3
        assert convolve(a, a, 2, ReducePlan(), ctx256) == 3

    def test_lorenz_initial_product(self, ctx256):
        x = [mp_from_decimal(CANON_INIT[0], ctx256)]
        z = [mp_from_decimal(CANON_INIT[2], ctx256)]
        got = fraction_of(convolve(x, z, 0, ReducePlan(), ctx256))
        expected = Fraction("-563.112")  # -15.8 * 35.64 by hand
        assert abs(got - expected) <= 2 * ulp_of(expected, 256)

    def test_pair_lorenz_initial_products(self, ctx256):
        x = [mp_from_decimal(CANON_INIT[0], ctx256)]
        y = [mp_from_decimal(CANON_INIT[1], ctx256)]
        z = [mp_from_decimal(CANON_INIT[2], ctx256)]
        s1, s2 = convolve_pair(x, z, x, y, 0, ReducePlan(), ctx256)
        assert abs(fraction_of(s1) - Fraction("-563.112")) <= 2 * ulp_of(
            Fraction("-563.112"), 256
        )
        assert abs(fraction_of(s2) - Fraction("276.184")) <= 2 * ulp_of(
            Fraction("276.184"), 256
        )

    def test_pair_all_ones(self, ctx256):
        n = 37
        ones = [ctx256.one] * (n + 1)
        s1, s2 = convolve_pair(ones, ones, ones, ones, n, ReducePlan(), ctx256)
        assert s1 == n + 1 and s2 == n + 1

    def test_short_arrays_rejected(self, ctx256):
        with pytest.raises(ValueError):
            convolve([ctx256.one], [ctx256.one], 1, ReducePlan(), ctx256)


class TestSerialEquivalence:
    def test_single_chunk_is_the_plain_loop(self, ctx256):
        rnd = random.Random(11)
        plan = ReducePlan(num_chunks=1)
        for _ in range(50):
            n = rnd.randrange(1, 60)
            a = random_array(ctx256, rnd, n)
            b = random_array(ctx256, rnd, n, den=13)
            got = convolve(a, b, n - 1, plan, ctx256)
            assert mp_bits_equal(got, serial_loop(a, b, n - 1, ctx256))

    def test_below_threshold_is_the_plain_loop_any_chunks(self, ctx256):
        rnd = random.Random(12)
        plan = ReducePlan(num_chunks=64, serial_threshold=256)
        for _ in range(20):
            n = rnd.randrange(1, 200)
            a = random_array(ctx256, rnd, n)
            b = random_array(ctx256, rnd, n, den=13)
            got = convolve(a, b, n - 1, plan, ctx256)
            assert mp_bits_equal(got, serial_loop(a, b, n - 1, ctx256))


class TestChunkedAccuracy:
    def test_error_bound_vs_exact(self, ctx256):
        """|chunked - exact| <= (i+1+C) * u * sum |a_(i-k) b_k| in exact rationals."""
        rnd = random.Random(13)
        for chunks in (4, 64):
            plan = ReducePlan(num_chunks=chunks, serial_threshold=1)
            for _ in range(20):
                n = rnd.randrange(180, 220)
                i = n - 1
                a = random_array(ctx256, rnd, n)
                b = random_array(ctx256, rnd, n, den=13)
                got = fraction_of(convolve(a, b, i, plan, ctx256))
                products = [
                    fraction_of(a[i - k]) * fraction_of(b[k]) for k in range(i + 1)
                ]
                exact = sum(products, Fraction(0))
                mag = sum(abs(p) for p in products)
                bound = (i + 1 + chunks) * Fraction(2) ** -256 * mag
                assert abs(got - exact) <= bound

    def test_large_arrays_at_8000_bits_match_doubled_precision(self):
        ctx = PrecisionContext(8000)
        wide = PrecisionContext(16000)
        rnd = random.Random(14)
        n = 200
        a = random_array(ctx, rnd, n)
        b = random_array(ctx, rnd, n, den=13)
        i = n - 1
        serial = convolve(a, b, i, ReducePlan(num_chunks=1), ctx)
        chunked = convolve(a, b, i, ReducePlan(num_chunks=64, serial_threshold=1), ctx)
        assert mp_bits_equal(serial, serial_loop(a, b, i, ctx))
        ref = fraction_of(serial_loop(a, b, i, wide))
        assert abs(fraction_of(chunked) - ref) <= (i + 1 + 64) * ulp_of(ref, 8000)


class TestWorkerIndependence:
    def test_values_identical_across_worker_counts(self, ctx256):
        rnd = random.Random(15)
        n = 400
        a = random_array(ctx256, rnd, n)
        b = random_array(ctx256, rnd, n, den=13)
        i = n - 1
        plan1 = ReducePlan(num_chunks=64, workers=1, serial_threshold=16)
        reference = convolve(a, b, i, plan1, ctx256)
        for w in (2, 3):
            plan = ReducePlan(num_chunks=64, workers=w, serial_threshold=16)
            with ProcessReducer(plan) as reducer:
                got = reducer.convolve(a, b, i, ctx256)
                again = reducer.convolve(a, b, i, ctx256)
            assert mp_bits_equal(got, reference)
            assert mp_bits_equal(again, reference)

    def test_fused_pair_matches_standalone_through_pool(self, ctx256):
        rnd = random.Random(16)
        n = 300
        a = random_array(ctx256, rnd, n)
        b = random_array(ctx256, rnd, n, den=13)
        c = random_array(ctx256, rnd, n, den=7)
        d = random_array(ctx256, rnd, n, den=11)
        i = n - 1
        plan = ReducePlan(num_chunks=32, workers=2, serial_threshold=16)
        with ProcessReducer(plan) as reducer:
            s1, s2 = reducer.convolve_pair(a, b, c, d, i, ctx256)
        assert mp_bits_equal(s1, convolve(a, b, i, plan, ctx256))
        assert mp_bits_equal(s2, convolve(c, d, i, plan, ctx256))

    def test_chunks_follow_workers_compat_mode(self, ctx256):
        """One partial container per worker, like a thread-count-chunked reduction."""
        rnd = random.Random(17)
        n = 64
        a = random_array(ctx256, rnd, n)
        b = random_array(ctx256, rnd, n, den=13)
        i = n - 1
        compat2 = ReducePlan(workers=2, chunks_follow_workers=True, serial_threshold=1)
        explicit2 = ReducePlan(num_chunks=2, serial_threshold=1)
        assert mp_bits_equal(
            convolve(a, b, i, compat2, ctx256), convolve(a, b, i, explicit2, ctx256)
        )
        compat3 = ReducePlan(workers=3, chunks_follow_workers=True, serial_threshold=1)
        explicit3 = ReducePlan(num_chunks=3, serial_threshold=1)
        assert mp_bits_equal(
            convolve(a, b, i, compat3, ctx256), convolve(a, b, i, explicit3, ctx256)
        )

    def test_every_chunk_claimed_exactly_once(self, ctx256):
        rnd = random.Random(18)
        n = 300
        a = random_array(ctx256, rnd, n)
        b = random_array(ctx256, rnd, n, den=13)
        plan = ReducePlan(num_chunks=24, workers=2, serial_threshold=16)
        with ProcessReducer(plan, collect_assignments=True) as reducer:
            reducer.convolve(a, b, n - 1, ctx256)
            assignments = reducer.last_assignments
        chunks = [c for c, _ in assignments]
        assert chunks == list(range(24))  # full coverage, single writer each
        workers_seen = {w for _, w in assignments}
        assert workers_seen <= {0, 1}

    def test_make_reducer_selects_backend(self):
        assert isinstance(make_reducer(ReducePlan(workers=1)), SerialReducer)
        reducer = make_reducer(ReducePlan(workers=2))
        assert isinstance(reducer, ProcessReducer)
        reducer.close()


class TestPlanValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(num_chunks=0),
            dict(workers=0),
            dict(serial_threshold=0),
        ],
    )
    def test_bad_plans_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ReducePlan(**kwargs)
