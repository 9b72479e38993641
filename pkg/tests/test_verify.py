import math

import numpy as np
import pytest

from conftest import g_only, unit_bump
from hotspot_dw import pde
from hotspot_dw import verify as v
from hotspot_dw.initdata import Bump, BumpSum, ProblemSetup
from hotspot_dw.verify import DecayFit, FDConfig, FDError, Quantity

G1 = BumpSum(1, (Bump((0.0,), 1.0, 1.0),))
P1 = np.linspace(-1.5, 1.5, 13)[:, None]


def test_fd_second_order_convergence_1d():
    # a wide bump keeps the scheme in its asymptotic regime from dx = 1/40 on
    s = g_only(BumpSum(1, (Bump((0.0,), 2.0, 1.0),)))
    P = np.linspace(-2.0, 2.0, 161)[:, None]
    ex = pde.solve_u(s, P, 1.0)
    rms = []
    for dx in (1 / 40, 1 / 80, 1 / 160, 1 / 320):
        d = v.fd_solve(1, s, FDConfig(dx=dx, T_final=1.0, lo=(-5.0,), hi=(5.0,))).at(P) - ex
        rms.append(float(np.sqrt(np.mean(d * d))))
    ratios = np.array(rms[:-1]) / np.array(rms[1:])
    assert np.all((ratios >= 3.4) & (ratios <= 4.6)), ratios
    assert rms[-1] < 1e-6


def test_fd_oracle_unit_bump_1d():
    err = v.compare_oracle(1, g_only(G1), 1.0, P1, dx=1 / 400)["max_abs_error"]
    assert err < 1e-5


def test_fd_with_both_data_1d():
    s = ProblemSetup(BumpSum(1, (Bump((0.2,), 0.8, 1.0),)), G1)
    a = v.compare_oracle(1, s, 1.5, P1, dx=1 / 100)["max_abs_error"]
    b = v.compare_oracle(1, s, 1.5, P1, dx=1 / 200)["max_abs_error"]
    assert b < 1e-3 and a / b > 3


def test_fd_second_order_convergence_2d():
    s = g_only(BumpSum(2, (Bump((0.0, 0.0), 1.0, 1.0),)))
    P = np.array([[0.0, 0.0], [0.5, 0.3], [1.2, 0.0]])
    ex = pde.solve_u(s, P, 0.8)
    box = dict(lo=(-3.0, -3.0), hi=(3.0, 3.0))
    e = [np.max(np.abs(v.fd_solve(2, s, FDConfig(dx=dx, T_final=0.8, **box)).at(P) - ex)) for dx in (1 / 40, 1 / 80)]
    assert e[1] < 3e-5 and e[0] / e[1] > 3


def test_fd_nonnegative_for_nonnegative_velocity_1d():
    res = v.fd_solve(1, g_only(G1), FDConfig(dx=1 / 100, T_final=2.0), save_times=[0.5, 1.0])
    assert len(res.frames) == 3
    for u in res.frames:
        assert u.min() >= -1e-12


def test_fd_zero_data_stays_zero():
    # f = 0 and g = 0 is rejected by ProblemSetup; zero f with tiny g is linear in g
    small = ProblemSetup(BumpSum.zero(1), BumpSum(1, (Bump((0.0,), 1.0, 1e-30),)))
    res = v.fd_solve(1, small, FDConfig(dx=1 / 50, T_final=1.0))
    assert np.max(np.abs(res.frames[-1])) < 1e-30


def test_fd_cfl_and_boundary_errors():
    with pytest.raises(FDError, match="CFL"):
        FDConfig(dx=0.01, T_final=1.0, dt=0.01).time_step(1)
    with pytest.raises(FDError, match="boundary"):
        v.fd_solve(1, g_only(G1), FDConfig(dx=1 / 50, T_final=2.0, lo=(-1.5,), hi=(1.5,)))
    with pytest.raises(ValueError):
        v.fd_solve(3, g_only(unit_bump(3)), FDConfig(dx=0.1, T_final=1.0))


def test_time_step_hits_final_time():
    cfg = FDConfig(dx=0.01, T_final=1.0)
    dt = cfg.time_step(2)
    assert dt <= 0.9 * 0.01 / math.sqrt(2)
    assert 1.0 / dt == pytest.approx(round(1.0 / dt), abs=1e-9)


def test_pde_residual_small():
    assert abs(v.pde_residual(g_only(G1), [0.2], 1.0)) < 1e-6
    with pytest.raises(ValueError):
        v.pde_residual(g_only(G1), [0.2], 1e-3)


def test_pde_residual_vanishing_data():
    # identically zero data is not a valid setup; the residual is linear in the data
    tiny = g_only(BumpSum(1, (Bump((0.0,), 1.0, 1e-30),)))
    assert abs(v.pde_residual(tiny, [0.2], 1.0)) < 1e-35


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_descent_oracle_matches_library(t):
    x = np.array([0.3, 0.1, -0.2])
    g3 = BumpSum(3, (Bump((0.0, 0.0, 0.0), 1.0, 1.0),))
    assert v.solution_S3_descent(g3, x, t) == pytest.approx(pde.solution_S(3, g3, x, t), rel=1e-9)


def test_sup_norm_finds_interior_peak():
    fun = lambda X: np.exp(-np.sum((X - 0.3137) ** 2, axis=-1))  # noqa: E731
    val, arg = v.sup_norm(fun, 2, (-1.0, -1.0), (1.0, 1.0), 11)
    assert val == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(arg, [0.3137, 0.3137], atol=1e-5)


def test_quantity_offsets():
    assert Quantity("J").target_offset == 0.0
    assert Quantity.J_MINUS_P.target_offset == 1.0
    assert Quantity("full_difference") is Quantity.FULL_DIFFERENCE
    with pytest.raises(ValueError):
        Quantity("K")


def test_decay_fit_validation():
    with pytest.raises(ValueError, match="4 samples"):
        DecayFit("J", 1, [1, 2, 3], [1, 1, 1], -0.5, 0.0, 0.0, -0.5)
    with pytest.raises(ValueError, match="decade"):
        DecayFit("J", 1, [1, 2, 3, 4], [1, 1, 1, 1], -0.5, 0.0, 0.0, -0.5)


def test_decay_fit_heat_part_1d():
    fit = v.decay_fit(g_only(unit_bump(1)), "J", [20.0, 40.0, 80.0, 200.0])
    assert fit.target_slope == -0.5
    assert fit.slope == pytest.approx(-0.5, abs=0.02)
    assert all(e < 1 for e in fit.exterior_envelope)
    with pytest.raises(ValueError, match="f != 0"):
        v.decay_fit(g_only(unit_bump(1)), Quantity.TILDE_J, [20.0, 40.0, 80.0, 200.0])
