import numpy as np
import pytest

from halanay.errors import StructureError
from halanay.expr import parse
from halanay.halanay import BOUNDED_GAP, NONE, RATIO, ScanGrid, lambda_at
from halanay.positivity import (
    DelaySystem,
    certify_positive,
    column_sums,
    initial_amplitude,
    split_initial,
    structure_check,
)


def T(src):
    return parse(src, "t")


def S(src):
    return parse(src, "s")


def mat(rows):
    return [[T(e) for e in row] for row in rows]


def example1_system():
    return DelaySystem(
        alpha=0.45, dim=3,
        A=mat([
            ["-0.7-1/sqrt(1+t)-0.005*t", "1-1/sqrt(1+t)", "0.3+0.2*sin(t)"],
            ["0.1+0.003*t", "-3-0.8/(1+t)-0.003*t", "0.15+0.001*t"],
            ["0.4+1/sqrt(1+t)", "1+0.8/(1+t)+0.001*t", "-1-0.004*t"],
        ]),
        B=mat([
            ["0.002*t^2*sin(t)^2/(1+t^2)", "0.0015*t", "0"],
            ["0.0005*t", "0.05+0.1/(2+t)", "0.001*t"],
            ["0.1", "0.05-0.1/(2+t)", "0.12/(3+t)"],
        ]),
        q=T("2-cos(t)^4"), tau=2.0,
        phi=[S("0.2-0.4*cos(s)"), S("0.1+0.1*s"), S("log(s+3)-0.5")],
    )


def example2_system():
    return DelaySystem(
        alpha=0.75, dim=2,
        A=mat([
            ["-3-1/sqrt(1+t)", "5-1/sqrt(1+t)"],
            ["0.2+1/(1+t)", "-6.6-0.2/sqrt(1+t)"],
        ]),
        B=mat([
            ["t*sin(t)^2/(1+t^2)", "1.15+0.1/(2+t)"],
            ["1.5", "0.1+0.2/(2+t)"],
        ]),
        q=T("(1+exp(-t))/2"), tau=1.0,
        phi=[S("0.3+0.4*sin(s)"), S("0.1+0.5*s")],
    )


GRID = ScanGrid(100.0, 2001)


# ---------------------------------------------------------- structure_check

def test_structure_of_bundled_examples():
    assert structure_check(example1_system(), GRID) == (True, True)
    assert structure_check(example2_system(), GRID) == (True, True)


def test_identity_matrix_is_metzler():
    sys_ = DelaySystem(
        alpha=0.5, dim=2, A=mat([["1", "0"], ["0", "1"]]),
        B=mat([["0", "0"], ["0", "0"]]), q=T("0.5"), tau=1.0,
        phi=[S("1"), S("1")],
    )
    assert structure_check(sys_, GRID) == (True, True)


def test_negative_delay_matrix_entry_fails():
    sys_ = DelaySystem(
        alpha=0.65, dim=1, A=mat([["-0.2-0.002*t"]]), B=mat([["-0.02*sqrt(t)"]]),
        q=T("1.5"), tau=2.0, phi=[S("0.3-0.5*cos(2*s)")],
    )
    metzler_ok, nonneg_ok = structure_check(sys_, GRID)
    assert metzler_ok
    assert not nonneg_ok


def test_negative_off_diagonal_fails():
    sys_ = DelaySystem(
        alpha=0.5, dim=2, A=mat([["-1", "-0.1"], ["0", "-1"]]),
        B=mat([["0", "0"], ["0", "0"]]), q=T("0.5"), tau=1.0,
        phi=[S("1"), S("1")],
    )
    metzler_ok, nonneg_ok = structure_check(sys_, GRID)
    assert not metzler_ok
    assert nonneg_ok


# ------------------------------------------------------------- column_sums

def test_column_sums_match_closed_forms():
    ts = GRID.times()
    a_fun, b_fun = column_sums(example1_system(), GRID)
    np.testing.assert_allclose(a_fun, 0.2 + 0.002 * ts, atol=1e-12)
    np.testing.assert_allclose(b_fun, 0.1 + 0.0015 * ts, atol=1e-12)

    a_fun2, b_fun2 = column_sums(example2_system(), GRID)
    np.testing.assert_allclose(a_fun2, 1.6 + 1.2 / np.sqrt(1 + ts), atol=1e-12)
    np.testing.assert_allclose(
        b_fun2, 1.5 + ts * np.sin(ts) ** 2 / (1 + ts**2), atol=1e-12
    )


def test_column_sums_trivial_diagonal():
    sys_ = DelaySystem(
        alpha=0.5, dim=2, A=mat([["-1", "0"], ["0", "-1"]]),
        B=mat([["0", "0"], ["0", "0"]]), q=T("0.5"), tau=1.0,
        phi=[S("1"), S("1")],
    )
    a_fun, b_fun = column_sums(sys_, ScanGrid(10.0, 11))
    assert np.all(a_fun == 1.0)
    assert np.all(b_fun == 0.0)


def test_column_sums_brute_force_on_random_constant_matrices():
    rng = np.random.default_rng(31)
    grid = ScanGrid(5.0, 7)
    for _ in range(25):
        d = int(rng.integers(1, 6))
        A = rng.uniform(-2, 2, (d, d))
        B = rng.uniform(-2, 2, (d, d))
        sys_ = DelaySystem(
            alpha=0.5, dim=d,
            A=[[T(repr(float(A[i, j]))) for j in range(d)] for i in range(d)],
            B=[[T(repr(float(B[i, j]))) for j in range(d)] for i in range(d)],
            q=T("0.5"), tau=1.0, phi=[S("1")] * d,
        )
        a_fun, b_fun = column_sums(sys_, grid)
        want_a = -max(A[:, j].sum() for j in range(d))
        want_b = max(B[:, j].sum() for j in range(d))
        assert np.all(a_fun == a_fun[0])
        assert a_fun[0] == pytest.approx(want_a, abs=1e-12)
        assert b_fun[0] == pytest.approx(want_b, abs=1e-12)


# -------------------------------------------------------- initial_amplitude

def test_initial_amplitude_against_direct_sampling():
    sys_ = example1_system()
    ss = np.linspace(-2.0, 0.0, 10_000)
    direct = np.abs(0.2 - 0.4 * np.cos(ss))
    direct += np.abs(0.1 + 0.1 * ss)
    direct += np.abs(np.log(ss + 3) - 0.5)
    assert initial_amplitude(sys_, "l1") == pytest.approx(
        float(direct.max()), abs=1e-12
    )
    sys3 = DelaySystem(
        alpha=0.65, dim=1, A=mat([["-0.2"]]), B=mat([["0"]]),
        q=T("1.5"), tau=2.0, phi=[S("0.3-0.5*cos(2*s)")],
    )
    sq = (0.3 - 0.5 * np.cos(2 * ss)) ** 2
    assert initial_amplitude(sys3, "sq") == pytest.approx(float(sq.max()), abs=1e-12)


# --------------------------------------------------------- certify_positive

def test_certify_ratio_route_end_to_end():
    sys_ = example1_system()
    verdict, cert = certify_positive(sys_, GRID)
    assert verdict.metzler_ok and verdict.nonneg_ok
    assert verdict.theorem_33_ok
    assert not verdict.remark_34_ok  # a(t) grows, so the gap route is off
    assert verdict.a0 == pytest.approx(0.2, abs=1e-12)
    assert verdict.p == pytest.approx(0.625, abs=1e-12)
    assert cert is not None
    assert cert.case_tag == RATIO
    assert cert.lambda_star >= 0.075
    assert cert.w0 == 0.0
    assert cert.M == pytest.approx(initial_amplitude(sys_, "l1"), rel=1e-15)
    # published amplitude for this system rounds the sampled sup upward
    assert cert.M <= 1.2


def test_certify_gap_route_end_to_end():
    sys_ = example2_system()
    verdict, cert = certify_positive(sys_, GRID)
    assert verdict.remark_34_ok and verdict.theorem_33_ok
    assert verdict.sigma >= 0.1
    assert cert.case_tag == BOUNDED_GAP
    assert cert.lambda_star >= 0.02
    assert cert.w0 == 0.0


def test_certify_decoupled_identity_decay():
    d = 3
    sys_ = DelaySystem(
        alpha=0.6, dim=d,
        A=[[T("-1" if i == j else "0") for j in range(d)] for i in range(d)],
        B=[[T("0")] * d for _ in range(d)],
        q=T("0.5"), tau=1.0, phi=[S("1")] * d,
    )
    verdict, cert = certify_positive(sys_, ScanGrid(10.0, 101))
    assert cert.lambda_star == pytest.approx(1.0, abs=1e-12)
    assert cert.M == pytest.approx(float(d), abs=1e-12)


def test_certificate_consistency_with_rate_precondition():
    sys_ = example1_system()
    verdict, cert = certify_positive(sys_, GRID)
    a_fun, b_fun = column_sums(sys_, GRID)
    assert np.all(a_fun > b_fun)
    ts = GRID.times()
    for i in range(0, len(ts), 500):
        q = sys_.q.eval(float(ts[i]))
        lam = lambda_at(sys_.alpha, float(a_fun[i]), [float(b_fun[i])], [q])
        assert cert.lambda_star <= lam + 1e-12


def test_structure_failure_raises():
    sys_ = DelaySystem(
        alpha=0.65, dim=1, A=mat([["-0.2-0.002*t"]]), B=mat([["-0.02*sqrt(t)"]]),
        q=T("1.5"), tau=2.0, phi=[S("0.3-0.5*cos(2*s)")],
    )
    with pytest.raises(StructureError) as exc:
        certify_positive(sys_, GRID)
    assert "B" in str(exc.value)


def test_none_verdict_returns_diagnostics_without_raising():
    # feedback dominates damping: neither column-sum route applies
    sys_ = DelaySystem(
        alpha=0.5, dim=1, A=mat([["-0.3"]]), B=mat([["0.4"]]),
        q=T("0.5"), tau=1.0, phi=[S("1")],
    )
    verdict, cert = certify_positive(sys_, ScanGrid(10.0, 101))
    assert cert is None
    assert verdict.metzler_ok and verdict.nonneg_ok
    assert not verdict.theorem_33_ok
    assert not verdict.remark_34_ok
    assert verdict.sigma == pytest.approx(-0.1, abs=1e-12)


def test_user_boundedness_flag_switches_route():
    sys_ = example1_system()
    verdict, cert = certify_positive(sys_, GRID, a_bounded=True)
    assert verdict.remark_34_ok
    assert cert.case_tag == BOUNDED_GAP


# ------------------------------------------------------------ split_initial

def test_split_initial_brackets_the_data():
    plus, minus = split_initial(np.array([[-1.0, 2.0]]))
    np.testing.assert_array_equal(plus, [[1.0, 2.0]])
    np.testing.assert_array_equal(minus, [[-1.0, -2.0]])

    rng = np.random.default_rng(8)
    samples = rng.normal(size=(50, 4))
    plus, minus = split_initial(samples)
    assert np.all(minus <= samples) and np.all(samples <= plus)
    assert np.all(plus == -minus)

    nonneg = np.abs(samples)
    plus2, minus2 = split_initial(nonneg)
    np.testing.assert_array_equal(plus2, nonneg)

    # initial value of the bundled scalar example: phi(0) = -0.2
    val = np.array([0.3 - 0.5 * np.cos(0.0)])
    plus3, _ = split_initial(val)
    assert plus3[0] == pytest.approx(0.2, abs=1e-15)


# -------------------------------------------------------------- validation

def test_system_validation():
    with pytest.raises(ValueError):
        DelaySystem(
            alpha=1.5, dim=1, A=mat([["-1"]]), B=mat([["0"]]),
            q=T("0.5"), tau=1.0, phi=[S("1")],
        )
    with pytest.raises(ValueError):
        DelaySystem(
            alpha=0.5, dim=2, A=mat([["-1"]]), B=mat([["0"]]),
            q=T("0.5"), tau=1.0, phi=[S("1"), S("1")],
        )
    with pytest.raises(ValueError):
        DelaySystem(
            alpha=0.5, dim=1, A=mat([["-1"]]), B=mat([["0"]]),
            q=T("0.5"), tau=0.0, phi=[S("1")],
        )
    with pytest.raises(ValueError):
        DelaySystem(
            alpha=0.5, dim=1, A=mat([["-1"]]), B=mat([["0"]]),
            q=T("0.5"), tau=1.0, phi=[S("1"), S("2")],
        )
