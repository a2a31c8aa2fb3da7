import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfunc_rhp.rhpcore import build_configuration, make_solution
from gfunc_rhp.validation import (
    FDSpec,
    UnknownSuiteError,
    ValidationConfig,
    appendix_I1,
    compare,
    fd_check,
    local_exponent,
    suite_run,
)


def test_unknown_suite():
    with pytest.raises(UnknownSuiteError):
        suite_run(["cauchy", "bogus"])


def test_suites_tag_reports():
    reps = suite_run(["appendix", "cauchy"], ValidationConfig())
    assert [r.details["suite"] for r in reps] == ["appendix"] * 3 + ["cauchy"] * 2
    assert all(r.passed for r in reps)
    json.dumps([r.to_json() for r in reps])
    assert reps[0].line().startswith("PASS toylog-closed-form")


def test_fd_check_of_constant_is_exact():
    rep = fd_check(0.0, lambda h: 3.0, FDSpec(), 1e-12)
    assert rep.abs_err == 0.0 and rep.passed
    assert math.isnan(rep.details["observed_order"])


def test_fd_check_reports_second_order():
    rep = fd_check(math.cos(1.0), lambda h: math.sin(1.0 + h), FDSpec(steps=(1e-2, 5e-3), richardson=False), 1e-4)
    assert rep.passed
    assert abs(rep.details["observed_order"] - 2) < 0.05
    rich = fd_check(math.cos(1.0), lambda h: math.sin(1.0 + h), FDSpec(steps=(1e-2, 5e-3)), 1e-8)
    assert rich.abs_err < 0.01 * rep.abs_err


def test_fd_check_catches_wrong_formula():
    assert not fd_check(2.0, lambda h: h * h, FDSpec(), 1e-6).passed


def test_fd_spec_validation():
    with pytest.raises(ValueError):
        FDSpec(steps=(1e-5, 1e-4))
    with pytest.raises(ValueError):
        FDSpec(scheme="forward")


def test_compare_relative_and_absolute():
    assert compare("r", 2.0 + 1e-9, 2.0, 1e-9).rel_err == pytest.approx(5e-10)
    z = compare("z", 1e-13, 0.0, 1e-12)
    assert z.rel_err == z.abs_err and z.passed


def test_toy_closed_form_example():
    q, _ = appendix_I1(1.0, 0.0, -1.0, 1.0, 1.0)
    assert abs(q.computed + 0.5j * math.pi) < 1e-12


def test_toy_moving_singularity():
    q, d = appendix_I1(1.0, lambda m: m, -1.0, 1.0, 0.0, z0_prime_fn=lambda m: 1.0)
    assert q.passed and d.passed
    assert abs(d.reference + 1j * math.pi) < 1e-12
    assert d.details["rel_err_vs_interchanged"] < 1e-6


@settings(max_examples=10, deadline=None)
@given(c0=st.floats(0.5, 2), c1=st.floats(-1, 1), zr=st.floats(-0.2, 0.2), zi=st.floats(-0.3, -0.05))
def test_toy_random_coefficients(c0, c1, zr, zi):
    q, d = appendix_I1(lambda m: c0 + c1 * m, lambda m: complex(zr, zi) * m, -1.0, 1.0 + 0.5j, 1.0,
                       c_prime_fn=lambda m: c1, z0_prime_fn=lambda m: complex(zr, zi))
    assert q.passed and d.passed


def test_local_exponent_three_halves(genus0):
    slope, r, v = local_exponent(genus0, 0)
    assert abs(slope - 1.5) < 0.01
    assert np.all(np.diff(v) > 0)


def test_local_exponent_negative_control(genus0):
    cfg = genus0.config
    bad = make_solution(build_configuration(cfg.alphas + 0.3, cfg.beta, cfg.f))
    slope, _, _ = local_exponent(bad, 0)
    assert abs(slope - 0.5) < 0.05
