import numpy as np
import pytest

from ampo.bench import BenchRow, affine_fit, bench, doubling_ratios, time_projection


def test_time_projection_positive():
    assert 0 < time_projection("entropy", 8, "closed", repeats=2) < 1
    assert 0 < time_projection("tsallis:2", 8, "bisection", repeats=2) < 1


def test_bench_rows_and_token_normalization():
    rows = bench(["tsallis:2", "l2"], sizes=[4, 8], repeats=1)
    kinds = {(r.kind, r.method) for r in rows}
    assert ("tsallis:2.0", "bisection") in kinds or ("tsallis:2", "bisection") in kinds
    assert ("l2", "closed") in kinds
    assert doubling_ratios(rows, "tsallis:2").shape == (1,)


def test_affine_fit_recovers_model():
    rows = [BenchRow("l2", "bisection", n, 1e-8, 1e-4 + 3e-9 * n * np.log(1e8)) for n in (2, 4, 8, 16, 32)]
    a, c, worst = affine_fit(rows, "l2")
    assert a == pytest.approx(1e-4, rel=1e-6) and c == pytest.approx(3e-9, rel=1e-6)
    assert worst == pytest.approx(1.0)
    assert np.allclose(doubling_ratios(rows, "l2"), [r2.seconds / r1.seconds for r1, r2 in zip(rows, rows[1:])])
