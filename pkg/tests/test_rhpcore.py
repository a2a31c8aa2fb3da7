import json
from dataclasses import replace

import numpy as np
import pytest

from gfunc_rhp.ffunction import AugmentedJumpFunction, synthetic_polynomial_f
from gfunc_rhp.rhpcore import (
    IllConditionedError,
    PlacementError,
    build_configuration,
    eval_D,
    eval_g,
    eval_h,
    eval_h_prime,
    eval_h_robust,
    eval_K,
    jump_check,
    modulation_residual,
    moment_table,
    solve_W_Omega,
)
from gfunc_rhp.validation import deformation_reports


def _alt(sol, scale):
    cfg = sol.config
    return build_configuration(cfg.points, cfg.beta, cfg.f, cfg.spec,
                               replace(cfg.geometry, offset_scale=cfg.geometry.offset_scale * scale))


def _ring(sol, radius_factor, n=6, phase=0.4):
    cfg = sol.config
    th = np.exp(1j * (phase + 2 * np.pi * np.arange(n) / n))
    return (cfg.alphas[:, None] + radius_factor * cfg.loops.offset * th[None, :]).ravel()


def test_genus0_determinant_is_one(genus0):
    assert eval_D(genus0.config) == 1
    assert genus0.W == (0.0,) and genus0.Omega == ()


def test_genus2_moments(genus2):
    tab = moment_table(genus2.config)
    assert tab.M.shape == (4, 4)
    assert genus2.W[0] == 0.0 and len(genus2.W) == 3 and len(genus2.Omega) == 2
    assert genus2.config.diagnostics["W_Omega_imag"] < 1e-9
    with pytest.raises(IllConditionedError):
        solve_W_Omega(genus2.config, cond_limit=1.0)


@pytest.mark.parametrize("name", ["genus0", "genus2"])
def test_deformation_half_and_double(request, name):
    sol = request.getfixturevalue(name)
    for factor in (2.0, 0.6):
        for r in deformation_reports(sol, name, 1e-8, factor):
            assert r.passed, (r.name, r.rel_err)


@pytest.mark.parametrize("name", ["genus0", "genus2"])
def test_h_does_not_depend_on_loops(request, name):
    sol = request.getfixturevalue(name)
    wide = _alt(sol, 1.45)
    # between the standard and the wider small loops, plus far inside and far outside
    z = np.concatenate([_ring(sol, 1.2), _ring(sol, 0.5), [4 + 3j, -5 - 1j]])
    keep = (sol.config.branch.cut_distance(z) > 0.05 * sol.config.loops.offset)
    keep &= np.array([min(p.distance(z[i:i + 1])[0] for p in [c.loops.outer] + list(c.loops.main_loops)
                          + list(c.loops.comp_loops)) > 0.2 * sol.config.loops.offset
                      for i in range(z.size) for c in [sol.config]])
    keep &= np.array([min(p.distance(z[i:i + 1])[0] for p in [wide.loops.outer] + list(wide.loops.main_loops)
                          + list(wide.loops.comp_loops)) > 0.2 * sol.config.loops.offset for i in range(z.size)])
    z = z[keep]
    assert z.size >= 6
    a, b = eval_h(z, sol.config), eval_h(z, wide)
    assert np.max(np.abs(a - b)) < 1e-9 * max(1, np.max(np.abs(a)))


def test_h_schwarz_symmetry(genus0):
    z = np.array([2.0 + 1.5j, -1.0 + 0.5j, 0.3 + 2.5j])
    assert np.allclose(eval_h(np.conj(z), genus0), np.conj(eval_h(z, genus0)), atol=1e-12)


def test_h_prime_matches_fd(genus2):
    z = np.array([2.0 + 1.5j, -1.0 + 0.5j, 3.0 - 2j])
    e = 1e-5
    fd = (eval_h(z + e, genus2) - eval_h(z - e, genus2)) / (2 * e)
    assert np.allclose(eval_h_prime(z, genus2), fd, rtol=1e-7)


def test_h_prime_vanishes_at_branchpoints(genus0):
    a = genus0.config.alphas[0]
    r = np.array([1e-4, 1e-6])
    hp = np.abs(eval_h_prime(a + r * np.exp(2.0j), genus0))
    # square-root vanishing: two decades in r give one decade in |h'|
    assert 5 < hp[0] / hp[1] < 20


def test_g_tends_to_a_constant(genus0):
    d = np.exp(0.4j)
    g = eval_g(np.array([5e1, 1e2, 5e2, 1e3]) * d, genus0)
    # g' = O(z^-2), so g(2r) - g(r) = O(1/r)
    assert abs(g[3] - g[2]) < 0.2 * abs(g[1] - g[0])


def test_K_linear_in_f(genus0):
    cfg = genus0.config
    p = [0, 0.3, -0.2]
    both = build_configuration(cfg.points, cfg.beta, AugmentedJumpFunction(cfg.f, p), cfg.spec, cfg.geometry)
    poly = build_configuration(cfg.points, (0.0, 0.0), synthetic_polynomial_f(p), cfg.spec, cfg.geometry)
    assert np.allclose(modulation_residual(both), modulation_residual(cfg) + modulation_residual(poly), atol=1e-12)


def test_placement_errors(genus0):
    cfg = genus0.config
    with pytest.raises(PlacementError):
        eval_K(30.0 + 30j, cfg)
    on_loop = complex(cfg.loops.main_loops[0].sample(2)[1])
    with pytest.raises(PlacementError):
        eval_h(on_loop, genus0)
    assert np.isfinite(eval_h_robust(on_loop, genus0))


@pytest.mark.parametrize("name", ["genus0", "genus2"])
def test_jump_relations(request, name):
    rep = jump_check(request.getfixturevalue(name), n_per_arc=12)
    assert rep.main_violation < 1e-9
    assert rep.comp_violation < 1e-9
    assert len(rep.points) >= 6


def test_wrong_branchpoints_break_jumps(genus0):
    shifted = build_configuration(genus0.config.alphas + 0.2, genus0.beta, genus0.config.f)
    assert np.max(np.abs(modulation_residual(shifted))) > 1e-3


def test_solution_json(genus2):
    rec = json.loads(json.dumps(genus2.to_json()))
    assert len(rec["alphas"]) == 6
    back = np.array([complex(*a) for a in rec["alphas"]])
    assert np.array_equal(back, genus2.alphas.array)
