"""Integrator: jumps, dense output, fundamental matrix, convergence."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impulsedde import (
    ConstantLag,
    DelayTerm,
    ImpulseSchedule,
    NumericalError,
    StepControl,
    SystemSpec,
    VectorTable,
    evaluate,
    fundamental_grid,
    fundamental_matrix,
    solve,
    vec_norm,
)
from corpus import CORPUS, planar_rotation, planar_singular_reset, scalar_forced


def _decay(a=1.0, horizon=2.0, x0=1.0):
    """x' + a x = 0: the zero-lag scalar with solution x0 e^{-a t}."""
    return SystemSpec(dim=1,
                      terms=[DelayTerm(np.array([[a]]), ConstantLag(0.0))],
                      x0=[x0], horizon=horizon)


# ---------------------------------------------------------------------------
# basic correctness


def test_zero_lag_matches_exponential():
    traj = solve(_decay(), StepControl(1e-3))
    for t in (0.5, 1.0, 1.7, 2.0):
        assert traj.value(t)[0] == pytest.approx(math.exp(-t), abs=1e-12)


def test_solution_is_exact_for_piecewise_polynomial_profiles():
    # unit lag, zero history, unit start: the solution is a polynomial of
    # degree k on [k, k+1), which one-step RK4 with cubic dense output
    # reproduces to roundoff even at a coarse step
    spec = SystemSpec(dim=1,
                      terms=[DelayTerm(np.array([[1.0]]), ConstantLag(1.0))],
                      x0=[1.0], horizon=3.0)
    traj = solve(spec, StepControl(0.125))
    # x = 1 on [0,1); x = 2 - t on [1,2); x = ((t-3)^2 - 1)/2 on [2,3)
    assert traj.value(0.5)[0] == pytest.approx(1.0, abs=1e-14)
    assert traj.value(1.5)[0] == pytest.approx(0.5, abs=1e-13)
    assert traj.value(2.5)[0] == pytest.approx(-0.375, abs=1e-13)


def test_jump_applies_matrix_and_offset():
    spec = SystemSpec(
        dim=1,
        impulses=ImpulseSchedule([1.0], [[[0.25]]], [[3.0]], 1),
        x0=[2.0],
        horizon=2.0,
    )
    traj = solve(spec, StepControl(0.1))
    assert traj.value(1.0, side="left")[0] == pytest.approx(2.0, abs=1e-14)
    assert traj.value(1.0, side="right")[0] == pytest.approx(0.25 * 2.0 + 3.0,
                                                             abs=1e-14)


def test_singular_jump_forgets_the_past_state():
    traj = solve(planar_singular_reset(), StepControl(1e-3))
    # B = 0 with offset v at tau = 1.2: the state right after is exactly v
    npt.assert_allclose(traj.value(1.2, side="right"), [0.5, -0.25],
                        atol=1e-14)


def test_history_reads_come_from_phi_below_zero():
    spec = scalar_forced()
    traj = solve(spec, StepControl(1e-3))
    npt.assert_allclose(evaluate(traj, spec, -0.2), [0.3], atol=0)
    assert traj.value(-0.2)[0] == 0.3


def test_queries_beyond_horizon_raise():
    traj = solve(_decay(horizon=1.0), StepControl(0.1))
    with pytest.raises(ValueError):
        traj.value(1.5)


def test_solve_rejects_invalid_specs():
    bad = SystemSpec(dim=2, x0=[1.0])
    with pytest.raises(ValueError, match="invalid spec"):
        solve(bad)


def test_blowup_raises_numerical_error():
    spec = SystemSpec(dim=1,
                      terms=[DelayTerm(np.array([[-1e8]]), ConstantLag(0.0))],
                      x0=[1.0], horizon=1.0)
    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(NumericalError, match="non-finite"):
        solve(spec, StepControl(1e-3))


def test_dense_output_is_continuous_except_at_jump_nodes():
    traj = solve(scalar_forced(), StepControl(0.01))
    for k in range(1, len(traj.t_nodes)):
        gap = abs(traj.y_post[k, 0] - traj.y_pre[k, 0])
        if k in traj.jump_nodes:
            assert gap > 0.01  # both impulses move the state visibly
        else:
            assert gap == 0.0
    # interpolants meet the nodal values from both sides
    for k in (5, 97, 200):
        t = traj.t_nodes[k]
        assert traj.value(t - 1e-9)[0] == pytest.approx(traj.y_pre[k, 0],
                                                        abs=1e-8)
        assert traj.value(t + 1e-9)[0] == pytest.approx(traj.y_post[k, 0],
                                                        abs=1e-8)


# ---------------------------------------------------------------------------
# linearity


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_homogeneous_solutions_superpose(u, v):
    # same terms and jump matrices as scalar-forced, but no forcing, no
    # history and no jump offsets: the solution is linear in x(0)
    base = scalar_forced()
    jumps = ImpulseSchedule(base.impulses.points, base.impulses.matrices,
                            None, 1)
    grid = StepControl(0.05)

    def run(x0):
        return solve(SystemSpec(dim=1, terms=base.terms, impulses=jumps,
                                x0=[x0], horizon=base.horizon), grid)

    xu, xv, xsum = run(u), run(v), run(u + v)
    for t in (0.5, 1.3, 2.4):
        assert xsum.value(t)[0] == pytest.approx(
            xu.value(t)[0] + xv.value(t)[0], abs=1e-10)


# ---------------------------------------------------------------------------
# fundamental matrix


def test_fundamental_starts_at_identity_and_is_zero_before_s():
    spec = scalar_forced()
    fm = fundamental_grid(spec, [0.5, 1.5], [0.0, 0.5, 1.5, 2.0],
                          StepControl(1e-2))
    npt.assert_allclose(fm.at(0.5, 0.5), np.eye(1), atol=0)
    npt.assert_allclose(fm.at(1.5, 1.5), np.eye(1), atol=0)
    npt.assert_allclose(fm.at(0.0, 0.5), 0.0, atol=0)
    npt.assert_allclose(fm.at(0.5, 1.5), 0.0, atol=0)


def test_fundamental_ignores_forcing_offsets_and_phi():
    spec = scalar_forced()
    bare = SystemSpec(dim=1, terms=spec.terms,
                      impulses=ImpulseSchedule(spec.impulses.points,
                                               spec.impulses.matrices,
                                               None, 1),
                      x0=[1.0], horizon=spec.horizon)
    grid = StepControl(1e-2)
    full = fundamental_grid(spec, [0.2], [2.0], grid)
    hom = fundamental_grid(bare, [0.2], [2.0], grid)
    npt.assert_allclose(full.at(2.0, 0.2), hom.at(2.0, 0.2), atol=0)


def test_fundamental_jump_identity_in_t():
    spec = planar_singular_reset()
    fm = fundamental_grid(spec, [0.3], [2.1], StepControl(1e-2))
    cols = fundamental_matrix(spec, 0.3, StepControl(1e-2))
    left = np.column_stack([c.value(2.1, side="left") for c in cols])
    B = spec.impulses.matrices[1]
    npt.assert_allclose(fm.at(2.1, 0.3), B @ left, atol=1e-12)


def test_fundamental_grid_matches_per_column_solves(corpus_spec):
    spec = corpus_spec
    s_vals = [0.0, 0.35 * spec.horizon, 0.7 * spec.horizon]
    t_vals = np.linspace(0.0, spec.horizon, 7)
    grid = StepControl(2e-3)
    fm = fundamental_grid(spec, s_vals, t_vals, grid)
    # the batched and the per-column paths pin first-generation activation
    # kinks (s + theta) to their grids exactly but place deeper-generation
    # kinks differently, which separates them by O(dt^2); the tolerance
    # sits above that and far below any structural disagreement
    for s in s_vals:
        cols = fundamental_matrix(spec, s, grid)
        for t in t_vals:
            if t < s:
                continue
            direct = np.column_stack([c.value(float(t)) for c in cols])
            npt.assert_allclose(fm.at(float(t), s), direct, atol=1e-6)


def test_fundamental_grid_rejects_bad_grids():
    spec = _decay()
    with pytest.raises(ValueError):
        fundamental_grid(spec, [], [1.0])
    with pytest.raises(ValueError):
        fundamental_grid(spec, [0.5, 0.5], [1.0])
    with pytest.raises(ValueError):
        fundamental_grid(spec, [0.0], [5.0])


def test_fundamental_matrix_requires_s_inside_domain():
    with pytest.raises(ValueError):
        fundamental_matrix(_decay(), 5.0)


# ---------------------------------------------------------------------------
# convergence


def test_error_decreases_under_step_halving_on_a_delay_system():
    # planar-rotation has trigonometric solution profiles, so the scheme
    # carries genuine truncation error at coarse steps (the scalar corpus
    # members have piecewise-polynomial solutions the scheme reproduces
    # to roundoff, which cannot order a halving study)
    spec = planar_rotation()
    ref = solve(spec, StepControl(1e-3))
    probes = np.array([0.6, 1.4, 2.0, 2.4])
    errs = []
    for dt in (0.04, 0.02, 0.01):
        traj = solve(spec, StepControl(dt))
        errs.append(max(vec_norm(traj.value(t) - ref.value(t))
                        for t in probes))
    assert errs[0] > errs[1] > errs[2]


def test_trajectory_nodes_contain_jumps_and_are_increasing(corpus_spec):
    traj = solve(corpus_spec, StepControl(1e-2))
    assert np.all(np.diff(traj.t_nodes) > 0)
    for tau in corpus_spec.impulses.points:
        assert np.any(np.isclose(traj.t_nodes, tau, rtol=0, atol=1e-9))
