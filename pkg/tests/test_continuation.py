import numpy as np
import pytest

from gfunc_rhp.continuation import (
    ContinuationControls,
    ContinuationStallError,
    NewtonOptions,
    NoConvergenceError,
    SignGridSpec,
    continue_parameter,
    newton_solve,
    scan_initializer,
    sign_condition_check,
    trace_main_arc,
)
from gfunc_rhp.ffunction import TranslatedJumpFunction, synthetic_polynomial_f
from gfunc_rhp.radical import DegeneracyError
from gfunc_rhp.rhpcore import build_configuration, make_solution
from gfunc_rhp.validation import genus2_fixture


@pytest.fixture(scope="module")
def poly_solution():
    """Entire f whose genus-0 solution at (x, t) = (1, 0.5) sits at 0.3 +- 0.8i."""
    base = synthetic_polynomial_f([0, {"x": -1}, {"t": -2}])
    f, sol = genus2_fixture(beta=(1.0, 0.5), upper=(0.3 + 0.8j,), degrees=(3, 4), base=base)
    return f, sol


def test_newton_restart_is_idempotent(genus0, nls):
    again = newton_solve(genus0.alphas.array, genus0.beta, nls)
    assert again.diagnostics["iterations"] == 0
    assert np.allclose(again.alphas.array, genus0.alphas.array, atol=1e-14)


def test_newton_converges_from_perturbed_guess(genus0, nls):
    a = genus0.alphas.array + np.array([0.03 - 0.02j, 0.03 + 0.02j])
    sol = newton_solve(a, genus0.beta, nls)
    assert sol.residual_norm < 1e-10
    assert np.allclose(sol.alphas.array, genus0.alphas.array, atol=1e-10)
    hist = sol.diagnostics["residual_history"]
    assert hist[-1] < hist[0]


def test_newton_errors(nls):
    with pytest.raises(DegeneracyError):
        newton_solve([0.5 + 0.5j, 0.5 + 0.5j], (2.2, 1, 0), nls)
    with pytest.raises(NoConvergenceError) as info:
        newton_solve([0.6 + 0.9j, 0.6 - 0.9j], (2.2, 1, 0), nls, NewtonOptions(max_iters=1))
    assert len(info.value.history) >= 1
    with pytest.raises(ValueError):
        NewtonOptions(residual_tol=0)


def test_scan_returns_ranked_schwarz_pairs(genus0_scan):
    c = genus0_scan[0]
    assert np.isclose(c[1], np.conj(c[0]))
    assert c[0].imag > 0


def test_scan_higher_genus_not_supported(nls):
    with pytest.raises(NotImplementedError):
        scan_initializer((2.2, 1, 0), nls, genus=1)


def test_zero_length_path(genus0):
    traj = continue_parameter(genus0, genus0.beta)
    assert len(traj) == 1 and traj.betas == [tuple(genus0.beta)]


def test_path_start_must_match(genus0):
    with pytest.raises(ValueError):
        continue_parameter(genus0, lambda s: np.array([3.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        ContinuationControls(steps=0)


def test_translation_moves_branchpoints_rigidly(poly_solution):
    f, sol = poly_solution
    tr = TranslatedJumpFunction(f)
    start = newton_solve(sol.alphas.array, (1.0, 0.5, 0.0), tr)
    traj = continue_parameter(start, (1.0, 0.5, 0.7), ContinuationControls(steps=7))
    s = np.array([b[2] for b in traj.betas])
    assert len(traj) == 8
    assert np.max(np.abs(traj.alphas - traj.alphas[0] - s[:, None])) < 1e-10


def test_predictor_error_is_second_order(poly_solution):
    _, sol = poly_solution
    errs = []
    for dx in (0.04, 0.02):
        traj = continue_parameter(sol, (1.0 + dx, 0.5), ContinuationControls(steps=1))
        errs.append(traj.step_log[0]["predictor_error"])
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_rows_layout(poly_solution):
    _, sol = poly_solution
    traj = continue_parameter(sol, (1.1, 0.5), ContinuationControls(steps=3))
    head, rows = traj.rows(("x", "t"))
    assert head == ["x", "t", "alpha0_re", "alpha0_im", "alpha1_re", "alpha1_im", "W0", "residual", "step"]
    assert len(rows) == 4
    assert np.isclose(rows[-1][0], 1.1) and rows[0][-1] == 0.0


def test_unreachable_tolerance_stalls(poly_solution):
    _, sol = poly_solution
    with pytest.raises(ContinuationStallError) as info:
        continue_parameter(sol, (1.2, 0.5), ContinuationControls(steps=1, min_step_fraction=0.1),
                           NewtonOptions(residual_tol=1e-300, max_iters=2, stall_iters=1))
    assert not info.value.trajectory.step_log[-1]["accepted"]


def test_paths_agree(nls):
    init = np.array([1.0174 + 0.486j, 1.0174 - 0.486j])
    start = newton_solve(init, (2.2, 1.0, 0.1), nls)
    direct = continue_parameter(start, (1.9, 1.0, 0.1), ContinuationControls(steps=3)).solutions[-1]
    mid = continue_parameter(start, (2.05, 1.0, 0.1), ContinuationControls(steps=2)).solutions[-1]
    via = continue_parameter(mid, (1.9, 1.0, 0.1), ContinuationControls(steps=2)).solutions[-1]
    assert np.max(np.abs(direct.alphas.array - via.alphas.array)) < 1e-8


def test_sign_conditions_hold_at_solution(genus0):
    rep = sign_condition_check(genus0)
    assert rep.passed
    assert all(rep.main_arcs_ok) and all(rep.sides_ok) and all(rep.extensions_ok)


def test_traced_arc_reaches_partner(genus0):
    pts, reached = trace_main_arc(genus0, 0)
    assert reached
    assert np.all(np.abs(np.imag(pts)) <= np.abs(genus0.alphas.array[0].imag) + 1e-9)


def test_sign_check_rejects_non_solution(genus0):
    cfg = genus0.config
    bad = make_solution(build_configuration(cfg.alphas + 0.3, cfg.beta, cfg.f))
    rep = sign_condition_check(bad, SignGridSpec(n_arc=12))
    assert not rep.passed
    assert not all(rep.main_arcs_ok)
