"""Paired-run verification: agreement metric, critical time, diagrams.

The agreement examples are verified against an exact-rational oracle
(fractions plus integer powers of ten); the paired-run fixtures were
produced by running the integrations once and freezing the outcome, which
determinism makes stable forever.
"""

import math
import warnings
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mptaylor import (
    AGREEMENT_EXACT,
    CnsConfig,
    ConfigError,
    PrecisionContext,
    StepConfig,
    agreement_digits,
    builtin_system,
    cns_run,
    default_verify_margins,
    diagram_tsv,
    estimate_tc,
    integrate,
    mp_from_decimal,
    tc_diagram,
)

from .conftest import CANON_INIT
from .oracles import floor_neg_log10, fraction_of


class TestAgreementDigits:
    def test_identical_states_exact_marker(self, ctx256, state256):
        assert agreement_digits(state256, state256) == AGREEMENT_EXACT
        assert agreement_digits(state256, state256) == math.inf

    def test_equal_values_different_precision_exact(self, ctx256):
        lo = PrecisionContext(64)
        assert (
            agreement_digits((ctx256.from_int(3),), (lo.from_int(3),))
            == AGREEMENT_EXACT
        )

    def test_one_component_perturbed_by_1e8(self, ctx256):
        # rel = 1e-8/(1 + 1e-8) is just under 1e-8, so the floor lands at 8
        s_a = (ctx256.one, ctx256.one, ctx256.one)
        s_b = (mp_from_decimal("1.00000001", ctx256), ctx256.one, ctx256.one)
        rel = abs(fraction_of(s_b[0]) - 1) / fraction_of(s_b[0])
        assert agreement_digits(s_a, s_b) == floor_neg_log10(rel) == 8

    def test_near_zero_guard(self, ctx256):
        # max(|a|, |b|, 1) = 1 here; fl(0.001) <= 1e-3 at 256 bits, floor 3
        s_a = (ctx256.zero, ctx256.zero, ctx256.zero)
        s_b = (mp_from_decimal("0.001", ctx256), ctx256.zero, ctx256.zero)
        rel = abs(fraction_of(s_b[0]))
        assert agreement_digits(s_a, s_b) == floor_neg_log10(rel) == 3

    def test_totally_different_states_floor_zero(self, ctx256):
        assert agreement_digits((ctx256.from_int(5),), (ctx256.from_int(-5),)) == 0

    def test_min_over_components(self, ctx256):
        s_a = (ctx256.one, ctx256.one)
        s_b = (mp_from_decimal("1.001", ctx256), mp_from_decimal("1.000001", ctx256))
        # components agree to 3 and 6 digits; the worst one wins
        assert agreement_digits(s_a, s_b) == 3

    def test_dim_mismatch(self, ctx256):
        with pytest.raises(ValueError):
            agreement_digits((ctx256.one,), (ctx256.one, ctx256.one))

    @given(
        st.integers(min_value=-(10**6), max_value=10**6),
        st.integers(min_value=-(10**6), max_value=10**6),
        st.integers(min_value=1, max_value=999),
    )
    @settings(max_examples=150)
    def test_symmetric_and_matches_oracle(self, num_a, num_b, den):
        ctx = PrecisionContext(128)
        a = (ctx.div(ctx.from_int(num_a), ctx.from_int(den)),)
        b = (ctx.div(ctx.from_int(num_b), ctx.from_int(den)),)
        d_ab = agreement_digits(a, b)
        d_ba = agreement_digits(b, a)
        assert d_ab == d_ba
        fa, fb = fraction_of(a[0]), fraction_of(b[0])
        if fa == fb:
            assert d_ab == AGREEMENT_EXACT
        else:
            rel = abs(fa - fb) / max(abs(fa), abs(fb), Fraction(1))
            assert d_ab == floor_neg_log10(rel)


@pytest.fixture(scope="module")
def fixture_pair():
    """The 128-bit/N=20 vs 256-bit/N=30 pair over [0, 25] (both runs)."""
    runs = {}
    for bits, order in ((128, 20), (256, 30)):
        ctx = PrecisionContext(bits)
        system = builtin_system("lorenz", ctx)
        state0 = tuple(mp_from_decimal(t, ctx) for t in CANON_INIT)
        cfg = StepConfig(tau_text="0.01", order_n=order)
        runs[bits] = integrate(system, state0, cfg, 2500, ctx, record_stride=100)
    return runs[128], runs[256]


class TestEstimateTc:
    def test_identical_trajectories_full_interval(self, fixture_pair):
        base, _ = fixture_pair
        report = estimate_tc(base, base, 6)
        assert report.t_c == report.t_end == Decimal("25.00")
        assert all(d == AGREEMENT_EXACT for _, _, d in report.agreement)

    def test_regression_fixture_pair(self, fixture_pair):
        """Frozen outcome of the desk pair; chaos erodes ~0.39 digits per
        time unit from the 23 shared digits at t=1."""
        base, verify = fixture_pair
        report = estimate_tc(base, verify, 6)
        assert report.t_c == Decimal("25.00")
        by_time = {str(t): d for _, t, d in report.agreement}
        assert by_time["0.00"] == 38
        assert by_time["1.00"] == 23
        assert by_time["25.00"] == 13

    def test_symmetry(self, fixture_pair):
        base, verify = fixture_pair
        assert estimate_tc(base, verify, 6).t_c == estimate_tc(verify, base, 6).t_c

    def test_tc_nonincreasing_in_d(self, fixture_pair):
        base, verify = fixture_pair
        report = estimate_tc(base, verify, 6)
        values = [report.tc_for(d) for d in (6, 10, 13, 14, 15, 16, 20)]
        assert values == sorted(values, reverse=True)
        # interior failure: the series ends at 13 digits, so d=14 stops early
        assert report.tc_for(14) == Decimal("24.00")
        assert report.tc_for(16) < Decimal("24.00")

    def test_tc_for_matches_estimate(self, fixture_pair):
        base, verify = fixture_pair
        report6 = estimate_tc(base, verify, 6)
        for d in (6, 10, 14):
            assert report6.tc_for(d) == estimate_tc(base, verify, d).t_c

    def test_mismatched_grids_config_error(self, ctx256, fixture_pair):
        base, _ = fixture_pair
        system = builtin_system("lorenz", ctx256)
        state0 = tuple(mp_from_decimal(t, ctx256) for t in CANON_INIT)
        other = integrate(
            system, state0, StepConfig(tau_text="0.01", order_n=4), 300, ctx256,
            record_stride=100,
        )
        with pytest.raises(ConfigError):
            estimate_tc(base, other, 6)

    def test_demand_beyond_capacity_warns_tc_zero(self, fixture_pair):
        base, verify = fixture_pair  # base carries 128 bits = 38 decimal digits
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = estimate_tc(base, verify, 50)
        assert report.t_c == 0
        assert any("cannot certify" in str(w.message) for w in caught)

    def test_report_serializations(self, fixture_pair):
        base, verify = fixture_pair
        report = estimate_tc(base, verify, 6)
        kv = report.to_kv()
        assert "t_c=25.00" in kv and "required_digits=6" in kv
        tsv = report.agreement_tsv()
        assert tsv.startswith("# step\tt\tagreement_digits")
        assert len(tsv.strip().splitlines()) == 1 + len(report.agreement)
        assert "reliable up to t_c" in report.to_text()


class TestCnsConfig:
    def test_verify_must_dominate(self):
        with pytest.raises(ConfigError):
            CnsConfig(
                base_bits=128, base_order=20, verify_bits=128, verify_order=30,
                tau_text="0.01", t_end_text="1",
            )
        with pytest.raises(ConfigError):
            CnsConfig(
                base_bits=128, base_order=20, verify_bits=256, verify_order=20,
                tau_text="0.01", t_end_text="1",
            )

    def test_escape_hatch_allows_equal(self):
        cfg = CnsConfig(
            base_bits=128, base_order=20, verify_bits=128, verify_order=20,
            tau_text="0.01", t_end_text="1", allow_equal_verify=True,
        )
        assert cfg.n_steps() == 100

    def test_t_end_must_be_step_multiple(self):
        cfg = CnsConfig(
            base_bits=128, base_order=20, verify_bits=256, verify_order=30,
            tau_text="0.3", t_end_text="1",
        )
        with pytest.raises(ConfigError):
            cfg.n_steps()

    def test_default_margins(self):
        assert default_verify_margins(600, 60) == (798, 80)
        assert default_verify_margins(100, 10) == (133, 14)


class TestCnsRun:
    def test_zero_horizon(self):
        cfg = CnsConfig(
            base_bits=128, base_order=10, verify_bits=192, verify_order=14,
            tau_text="0.01", t_end_text="0",
        )
        traj, report = cns_run("lorenz", CANON_INIT, cfg)
        assert report.t_c == 0 and report.t_end == 0
        assert traj.steps() == [0]

    def test_equal_configs_certify_trivially(self):
        cfg = CnsConfig(
            base_bits=128, base_order=10, verify_bits=128, verify_order=10,
            tau_text="0.01", t_end_text="2", agreement_digits=10,
            allow_equal_verify=True,
        )
        _, report = cns_run("lorenz", CANON_INIT, cfg)
        assert report.t_c == report.t_end == Decimal("2.00")
        assert all(d == AGREEMENT_EXACT for _, _, d in report.agreement)

    def test_report_carries_both_configs(self):
        cfg = CnsConfig(
            base_bits=128, base_order=10, verify_bits=192, verify_order=14,
            tau_text="0.01", t_end_text="1",
        )
        _, report = cns_run("lorenz", CANON_INIT, cfg)
        assert report.base == {"bits": 128, "order": 10}
        assert report.verify == {"bits": 192, "order": 14}

    def test_callable_system_source(self, fixture_pair):
        cfg = CnsConfig(
            base_bits=128, base_order=10, verify_bits=192, verify_order=14,
            tau_text="0.01", t_end_text="1",
        )
        _, named = cns_run("lorenz", CANON_INIT, cfg)
        _, from_callable = cns_run(
            lambda ctx: builtin_system("lorenz", ctx), CANON_INIT, cfg
        )
        assert named.agreement == from_callable.agreement


class TestTcDiagram:
    def test_single_point_matches_cns_run(self):
        rows = tc_diagram(
            "lorenz", CANON_INIT, [(128, 10)], tau_text="0.01", t_end_text="1", d=6,
        )
        assert len(rows) == 1
        param, t_c, report = rows[0]
        assert param == 38  # decimal digits of 128 bits
        cfg = CnsConfig(
            base_bits=128, base_order=10,
            verify_bits=default_verify_margins(128, 10)[0],
            verify_order=default_verify_margins(128, 10)[1],
            tau_text="0.01", t_end_text="1",agreement_digits=6,
        )
        _, direct = cns_run("lorenz", CANON_INIT, cfg)
        assert t_c == direct.t_c

    def test_precision_sweep_trend(self):
        """t_c grows with precision at fixed large order (raw values)."""
        stats = pytest.importorskip("scipy.stats")
        rows = tc_diagram(
            "lorenz", CANON_INIT,
            [(64, 40), (96, 40), (128, 40), (192, 40)],
            tau_text="0.02", t_end_text="80", d=6, swept="precision",
        )
        params = [p for p, _, _ in rows]
        tcs = [float(t) for _, t, _ in rows]
        assert params == [19, 28, 38, 57]
        rho = stats.spearmanr(params, tcs).statistic
        assert rho > 0.8

    def test_order_sweep_trend(self):
        stats = pytest.importorskip("scipy.stats")
        rows = tc_diagram(
            "lorenz", CANON_INIT,
            [(512, 6), (512, 10), (512, 14), (512, 22)],
            tau_text="0.02", t_end_text="80", d=6, swept="order",
        )
        tcs = [float(t) for _, t, _ in rows]
        rho = stats.spearmanr([6, 10, 14, 22], tcs).statistic
        assert rho > 0.8

    def test_tsv_format(self):
        rows = [(19, Decimal("30.00"), None), (28, Decimal("52.00"), None)]
        text = diagram_tsv(rows)
        assert text == "# param\tt_c\n19\t30.00\n28\t52.00\n"

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValueError):
            tc_diagram("lorenz", CANON_INIT, [], tau_text="0.01", t_end_text="1", d=6)
