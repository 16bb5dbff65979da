import json
import math

import numpy as np
import pytest

from gelusoftmax.fixed_point import FxWord, RoundingMode, UQ0_16, dequantize
from gelusoftmax.pwl import (
    FUNCTIONS,
    PwlTable,
    PwlTableReal,
    dump_table,
    eval_pwl,
    eval_pwl_raw,
    fit_pwl,
    load_table,
    make_table,
    quantize_coeffs,
)

GRID = np.arange(1 << 16, dtype=np.int64)  # every UQ0.16 code in [0, 1)
V = GRID / 65536.0


def table_values(table):
    return np.ldexp(eval_pwl_raw(table, GRID).astype(np.float64), -30)


class TestFit:
    def test_identity_is_exact(self):
        t = fit_pwl(FUNCTIONS["identity"], 8)
        np.testing.assert_allclose(t.slopes, 1.0, atol=1e-12)
        np.testing.assert_allclose(t.intercepts, 0.0, atol=1e-12)

    @pytest.mark.parametrize("fn,bound", [("exp2", 2.5e-3), ("log2p1", 3.0e-3)])
    def test_error_bound(self, fn, bound):
        # interpolation bound max|f''| h**2 / 8: ln(2)**2 * 2 / 512 and (1/ln 2) / 512
        t = fit_pwl(FUNCTIONS[fn], 8)
        dense = np.linspace(0, 1, 1 << 18, endpoint=False)
        measured = np.max(np.abs(t(dense) - FUNCTIONS[fn](dense)))
        assert measured <= bound
        assert t.max_error == pytest.approx(measured, rel=1e-3)

    def test_beats_interpolation(self):
        # least squares must not be worse than interpolating at the knots
        f = FUNCTIONS["exp2"]
        t = fit_pwl(f, 8)
        assert t.max_error <= math.log(2) ** 2 * 2 / 512

    def test_continuous(self):
        t = fit_pwl(FUNCTIONS["log2p1"], 8)
        for i in range(1, 8):
            b = t.breakpoints[i]
            left = t.slopes[i - 1] * b + t.intercepts[i - 1]
            right = t.slopes[i] * b + t.intercepts[i]
            assert left == pytest.approx(right, abs=1e-12)

    def test_wrap_constraint(self):
        t = fit_pwl(FUNCTIONS["exp2"], 8, wrap=(2.0, 0.0))
        end = t.slopes[-1] * 1.0 + t.intercepts[-1]
        assert end == pytest.approx(2 * t.intercepts[0], abs=1e-12)
        assert t.max_error <= 2.5e-3

    def test_deterministic(self):
        a = fit_pwl(FUNCTIONS["exp2"], 8)
        b = fit_pwl(FUNCTIONS["exp2"], 8)
        assert a == b

    def test_other_domain(self):
        t = fit_pwl(np.sin, 4, domain=(-2.0, 2.0))
        assert t.breakpoints == (-2.0, -1.0, 0.0, 1.0, 2.0)
        assert t.max_error < 0.1

    @pytest.mark.parametrize("segments", [0, 3, 6])
    def test_rejects_bad_segments(self, segments):
        with pytest.raises(ValueError):
            fit_pwl(FUNCTIONS["exp2"], segments)

    def test_rejects_non_finite(self):
        with np.errstate(divide="ignore"), pytest.raises(ValueError):
            fit_pwl(np.log2, 8)  # log2(0) = -inf


class TestQuantizeCoeffs:
    def test_zero_table(self):
        z = PwlTableReal(0.0, 1.0, tuple(np.linspace(0, 1, 9)), (0.0,) * 8, (0.0,) * 8)
        q = quantize_coeffs(z, "zero")
        assert all(w.raw == 0 for w in q.slopes + q.intercepts)

    @pytest.mark.parametrize("fn", ["exp2", "log2p1"])
    @pytest.mark.parametrize("mode", list(RoundingMode))
    def test_independent_round_trip(self, fn, mode):
        t = fit_pwl(FUNCTIONS[fn], 8)
        q = quantize_coeffs(t, fn, mode=mode, monotone=False)
        for w, c in zip(q.slopes + q.intercepts, t.slopes + t.intercepts):
            assert abs(dequantize(w) - c) <= 2**-14

    def test_added_error_truncation(self):
        # |d_slope * v| + |d_intercept| <= 2**-14 * (1 + 1), checked over every input code
        t = fit_pwl(FUNCTIONS["exp2"], 8)
        q = quantize_coeffs(t, "exp2", mode=RoundingMode.TRUNCATE, monotone=False)
        added = np.abs(table_values(q) - t(V))
        assert added.max() <= 2**-14 * 2

    def test_repair_stays_close(self):
        t = fit_pwl(FUNCTIONS["exp2"], 8, wrap=(2.0, 0.0))
        q = quantize_coeffs(t, "exp2", wrap_ratio=2)
        # lifts are a few LSBs, small next to the ~1.2e-3 fit error
        for w, c in zip(q.intercepts, t.intercepts):
            assert abs(dequantize(w) - c) <= 8 * 2**-14
        for w, c in zip(q.slopes, t.slopes):
            assert abs(dequantize(w) - c) <= 2**-15

    def test_narrow_format_rejected(self):
        from gelusoftmax.fixed_point import QFormat
        t = fit_pwl(FUNCTIONS["exp2"], 8)
        with pytest.raises(ValueError, match="too narrow"):
            quantize_coeffs(t, "exp2", slope_fmt=QFormat(8, 7, True))

    def test_exp2_slopes_positive(self):
        t = fit_pwl(FUNCTIONS["exp2"], 8)
        neg = PwlTableReal(0.0, 1.0, t.breakpoints, (-0.5,) + t.slopes[1:], t.intercepts)
        with pytest.raises(ValueError, match="positive"):
            quantize_coeffs(neg, "exp2")


class TestEval:
    def test_exp2_at_zero(self):
        t = make_table("exp2")
        out = eval_pwl(t, FxWord(0, UQ0_16))
        assert out.raw == t.intercepts[0].raw << 16
        assert dequantize(out) == pytest.approx(1.0, abs=2e-3)

    def test_breakpoint_belongs_to_right_segment(self):
        t = make_table("log2p1")
        for i in range(1, 8):
            b = i << 13
            want = t.slopes[i].raw * b + (t.intercepts[i].raw << 16)
            assert eval_pwl(t, FxWord(b, UQ0_16)).raw == want
            left = t.slopes[i - 1].raw * (b - 1) + (t.intercepts[i - 1].raw << 16)
            assert eval_pwl(t, FxWord(b - 1, UQ0_16)).raw == left

    def test_segment_partition(self):
        t = make_table("exp2")
        idx = GRID >> (16 - t.index_shift)
        counts = np.bincount(idx)
        assert counts.tolist() == [8192] * 8

    def test_exp2_strictly_increasing(self):
        assert np.all(np.diff(eval_pwl_raw(make_table("exp2"), GRID)) > 0)

    def test_unrepaired_table_is_not_monotone(self):
        # why the repair exists: independent rounding leaves downward steps
        t = fit_pwl(FUNCTIONS["exp2"], 8)
        q = quantize_coeffs(t, "exp2", mode=RoundingMode.TRUNCATE, monotone=False)
        assert not np.all(np.diff(eval_pwl_raw(q, GRID)) > 0)

    @pytest.mark.parametrize("fn", ["exp2", "log2p1"])
    def test_total_error(self, fn):
        err = np.abs(table_values(make_table(fn)) - FUNCTIONS[fn](V))
        assert err.max() <= 4e-3

    def test_scalar_matches_vector(self):
        t = make_table("exp2")
        sample = GRID[::997]
        vec = eval_pwl_raw(t, sample)
        assert [eval_pwl(t, FxWord(int(v), UQ0_16)).raw for v in sample] == vec.tolist()

    def test_out_of_domain(self):
        from gelusoftmax.fixed_point import Q_SUM
        t = make_table("exp2")
        with pytest.raises(ValueError):
            eval_pwl(t, FxWord(1 << 16, Q_SUM))
        with pytest.raises(ValueError):
            eval_pwl(t, FxWord(-1, Q_SUM))


class TestInterchange:
    def test_round_trip(self, tmp_path):
        t = make_table("log2p1")
        path = tmp_path / "log.json"
        dump_table(t, path)
        assert load_table(path) == t
        d = json.loads(path.read_text())
        assert set(d) == {"function", "domain", "segments", "slope_fmt", "intercept_fmt",
                          "slopes_raw", "intercepts_raw"}
        assert d["segments"] == 8 and len(d["slopes_raw"]) == 8

    def test_segment_mismatch(self):
        d = make_table("exp2").to_dict()
        d["segments"] = 4
        with pytest.raises(ValueError):
            PwlTable.from_dict(d)
