import math

import numpy as np
import pytest

from smalldrift import (
    BlowupError,
    DegenerateModelError,
    ModelError,
    ModelSpec,
    limit_variance,
    parse,
    solve_ode,
    validate,
)


def _model(drift, sigma, x0=1.0, T=1.0, eps=0.1):
    return ModelSpec(drift=parse(drift), diffusion=parse(sigma), x0=x0, T=T, eps=eps)


# --- ModelSpec validation ----------------------------------------------

def test_modelspec_rejects_bad_horizon_and_eps():
    with pytest.raises(ModelError):
        _model("x", "1", T=0.0)
    with pytest.raises(ModelError):
        _model("x", "1", T=-1.0)
    with pytest.raises(ModelError):
        _model("x", "1", eps=0.0)
    with pytest.raises(ModelError):
        _model("x", "1", eps=1.5)
    _model("x", "1", eps=1.0)  # the boundary eps = 1 is allowed


def test_modelspec_rejects_coefficients_undefined_at_x0():
    with pytest.raises(ModelError):
        _model("1/x", "1", x0=0.0)
    with pytest.raises(ModelError):
        _model("x", "sqrt(x)", x0=-1.0)


# --- ODE solver --------------------------------------------------------

def test_solve_ode_constant_path():
    path = solve_ode(_model("0", "1", x0=1.0))
    assert np.all(path.values == 1.0)
    assert path.times[0] == 0.0
    assert path.times[-1] == 1.0
    assert path.values[0] == 1.0


def test_solve_ode_exponential_matches_e():
    path = solve_ode(_model("x", "1", x0=1.0, T=1.0), step=1e-3)
    assert abs(path.values[-1] - math.e) < 1e-9


def test_solve_ode_linear_in_time():
    path = solve_ode(_model("1", "1", x0=0.0, T=2.0))
    assert np.max(np.abs(path.values - path.times)) < 1e-12


def test_solve_ode_fourth_order_convergence():
    # Halving the step must cut the endpoint error by at least 8x
    # (RK4 gives ~16x) against the closed form e for x' = x.
    model = _model("x", "1", x0=1.0, T=1.0)
    errors = [abs(solve_ode(model, step=s).values[-1] - math.e)
              for s in (1e-2, 5e-3, 2.5e-3)]
    assert errors[0] / errors[1] >= 8.0
    assert errors[1] / errors[2] >= 8.0


def test_solve_ode_grid_is_even_and_lands_on_T():
    path = solve_ode(_model("0", "1", T=1.0), step=0.3)
    # step forced down so an even interval count lands exactly on T
    assert (path.times.shape[0] - 1) % 2 == 0
    assert path.step <= 0.3
    assert path.times[-1] == 1.0


def test_solve_ode_step_validation():
    model = _model("0", "1", T=1.0)
    with pytest.raises(ModelError):
        solve_ode(model, step=0.0)
    with pytest.raises(ModelError):
        solve_ode(model, step=2.0)


def test_solve_ode_blowup_reports_time():
    # x' = x^2 from 1 explodes at t = 1; integrating past it must fail
    # with the first bad grid time, not return inf values.
    model = _model("x^2", "1", x0=1.0, T=2.0)
    with pytest.raises(BlowupError) as exc:
        solve_ode(model)
    assert 0.9 <= exc.value.time <= 2.0


# --- limit variance ----------------------------------------------------

def test_limit_variance_constant_sigma():
    model = _model("-x", "2", T=1.0)
    lv = limit_variance(model, solve_ode(model))
    assert abs(lv.sigma_limit - 2.0) < 1e-10


@pytest.mark.parametrize("c,T", [(0.5, 0.7), (1.0, 1.0), (2.0, 1.0), (3.0, 2.5)])
def test_limit_variance_constant_sigma_sqrt_T(c, T):
    model = _model("-x", repr(c), T=T)
    lv = limit_variance(model, solve_ode(model))
    assert abs(lv.sigma_limit - c * math.sqrt(T)) < 1e-10


def test_limit_variance_frozen_path():
    # S = 0 freezes the path at x0 = 1, so sigma(x_t) = x_t = 1
    model = _model("0", "x", x0=1.0, T=1.0)
    lv = limit_variance(model, solve_ode(model))
    assert abs(lv.sigma_limit - 1.0) < 1e-12


def test_limit_variance_exponential_closed_form():
    # S = sigma = x, x0 = 1: x_t = e^t, integral of e^{2t} = (e^2-1)/2
    model = _model("x", "x", x0=1.0, T=1.0)
    lv = limit_variance(model, solve_ode(model))
    assert abs(lv.sigma_limit - math.sqrt((math.e**2 - 1.0) / 2.0)) < 1e-6


def test_limit_variance_grid_refinement_invariant():
    model = _model("-x", "exp(-x)", x0=1.0, T=1.0)
    coarse = limit_variance(model, solve_ode(model, step=1e-4))
    fine = limit_variance(model, solve_ode(model, step=5e-5))
    assert abs(coarse.sigma_limit - fine.sigma_limit) < 1e-9


# --- validation report -------------------------------------------------

def test_validate_linear_model():
    report = validate(_model("-x", "1", x0=1.0, T=1.0, eps=0.05))
    assert abs(report.sigma_limit - 1.0) < 1e-9
    assert report.a3_ok
    assert abs(report.lipschitz_drift - 1.0) < 1e-9
    assert report.lipschitz_sigma == 0.0
    lo, hi = report.working_interval
    assert lo <= -4.0 and hi >= 6.0  # covers [x0-5, x0+5]
    assert report.warnings == []


def test_validate_degenerate_sigma_is_an_error():
    with pytest.raises(DegenerateModelError):
        validate(_model("-x", "0"))


def test_validate_locally_lipschitz_warning():
    # x^2 from x0 = -1 stays bounded (x_t = -1/(1+t)) but its slope
    # keeps growing with the interval; expect the warning and an
    # estimated constant near 2*10 = 20 on [-10, 10].
    report = validate(_model("x^2", "1", x0=-1.0, T=1.0),
                      working_interval=(-10.0, 10.0))
    assert abs(report.lipschitz_drift - 20.0) < 0.05
    assert any("Lipschitz" in w for w in report.warnings)


def test_validate_large_eps_warning():
    report = validate(_model("-x", "1", eps=0.9))
    assert any("eps" in w for w in report.warnings)


def test_validate_interval_must_contain_x0():
    with pytest.raises(ModelError):
        validate(_model("-x", "1", x0=1.0), working_interval=(2.0, 3.0))
