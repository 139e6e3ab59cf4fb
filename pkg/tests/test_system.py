"""System model: norms, tables, schedules, validation, hypothesis data."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from impulsedde import (
    ConstantLag,
    DelayTerm,
    FrozenTime,
    ImpulseSchedule,
    MatrixTable,
    SystemSpec,
    VectorTable,
    count_impulses,
    evaluate_delay,
    hypotheses_report,
    mat_norm,
    validate,
    vec_norm,
)
from corpus import CORPUS, planar_rotation, scalar_forced


# ---------------------------------------------------------------------------
# norms


def test_vec_norm_is_max_norm():
    assert vec_norm(np.array([1.0, -3.0, 2.0])) == 3.0
    assert vec_norm(np.array([0.0])) == 0.0


def test_mat_norm_is_max_absolute_row_sum():
    m = np.array([[1.0, -2.0], [0.5, 0.25]])
    assert mat_norm(m) == 3.0
    assert mat_norm(np.zeros((2, 2))) == 0.0


def test_mat_norm_handles_stacked_input():
    stack = np.array([[[1.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 3.0]]])
    npt.assert_allclose(mat_norm(stack), [2.0, 5.0])


@given(arrays(float, (3, 3), elements=st.floats(-10, 10)),
       arrays(float, (3,), elements=st.floats(-10, 10)))
def test_mat_norm_is_compatible_with_vec_norm(m, x):
    assert vec_norm(m @ x) <= mat_norm(m) * vec_norm(x) * (1 + 1e-12) + 1e-12


@given(arrays(float, (2, 2), elements=st.floats(-5, 5)),
       arrays(float, (2, 2), elements=st.floats(-5, 5)))
def test_mat_norm_is_submultiplicative(a, b):
    assert mat_norm(a @ b) <= mat_norm(a) * mat_norm(b) * (1 + 1e-12) + 1e-12


# ---------------------------------------------------------------------------
# tables


def test_matrix_table_is_right_continuous_with_left_limits():
    table = MatrixTable([0.0, 1.0], [[[1.0]], [[2.0]]])
    assert table.value(1.0)[0, 0] == 2.0
    assert table.value(1.0, side="left")[0, 0] == 1.0
    assert table.value(0.5)[0, 0] == 1.0


def test_table_extends_by_first_and_last_piece():
    table = VectorTable([0.0, 2.0], [[5.0], [7.0]])
    assert table.value(-3.0)[0] == 5.0
    assert table.value(9.0)[0] == 7.0


def test_tables_are_immutable():
    table = MatrixTable([0.0], [[[1.0]]])
    with pytest.raises(ValueError):
        table.values[0, 0, 0] = 2.0


# ---------------------------------------------------------------------------
# delays and schedules


def test_constant_lag_argument_trails_t():
    term = DelayTerm(np.eye(1), ConstantLag(0.5))
    assert evaluate_delay(term, 2.0) == 1.5


def test_frozen_argument_is_constant_and_guards_domain():
    term = DelayTerm(np.eye(1), FrozenTime(1.0))
    assert evaluate_delay(term, 3.0) == 1.0
    with pytest.raises(ValueError):
        evaluate_delay(term, 0.5)


def test_periodic_schedule_expands_to_horizon():
    sched = ImpulseSchedule.periodic(0.5, [[0.9]], horizon=2.0, dim=1)
    npt.assert_allclose(sched.points, [0.5, 1.0, 1.5, 2.0])
    assert sched.matrices.shape == (4, 1, 1)
    assert np.all(sched.offsets == 0.0)


def test_count_impulses_matches_brute_force():
    sched = ImpulseSchedule([0.5, 1.0, 2.5], [[[1.0]]] * 3, None, 1)
    for s, t in [(0.0, 3.0), (0.5, 1.0), (0.6, 2.5), (1.1, 2.4), (2.5, 2.5)]:
        brute = int(np.sum((sched.points >= s) & (sched.points <= t)))
        assert count_impulses(sched, s, t) == brute


def test_count_impulses_rejects_reversed_segment():
    sched = ImpulseSchedule.empty(1)
    with pytest.raises(ValueError):
        count_impulses(sched, 2.0, 1.0)


# ---------------------------------------------------------------------------
# validation


def test_corpus_specs_are_valid():
    for make in CORPUS.values():
        assert validate(make()) == []


def test_validate_names_bad_coefficient_shape():
    spec = SystemSpec(dim=2, terms=[DelayTerm(np.eye(3), ConstantLag(0.0))])
    assert any("terms[0].coefficient" in v for v in validate(spec))


def test_validate_rejects_negative_lag_and_nonfinite_entries():
    spec = SystemSpec(dim=1, terms=[DelayTerm(np.eye(1), ConstantLag(-1.0))])
    assert any("delay" in v for v in validate(spec))
    spec = SystemSpec(dim=1, terms=[DelayTerm(np.array([[np.inf]]),
                                              ConstantLag(0.0))])
    assert any("non-finite" in v for v in validate(spec))


def test_validate_rejects_unsorted_impulse_points():
    sched = ImpulseSchedule([2.0, 1.0], [[[1.0]], [[1.0]]], None, 1)
    spec = SystemSpec(dim=1, impulses=sched, horizon=3.0)
    assert any("increasing" in v for v in validate(spec))


def test_validate_rejects_impulse_at_zero():
    sched = ImpulseSchedule([0.0], [[[1.0]]], None, 1)
    spec = SystemSpec(dim=1, impulses=sched)
    assert any("must all be > 0" in v for v in validate(spec))


def test_validate_requires_phi_to_cover_the_lag():
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm(np.eye(1), ConstantLag(1.0))],
        phi=VectorTable([-0.5], [[1.0]]),
        horizon=2.0,
    )
    assert any("phi" in v and "cover" in v for v in validate(spec))


def test_validate_rejects_phi_breaks_at_or_above_zero():
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm(np.eye(1), ConstantLag(1.0))],
        phi=VectorTable([-1.0, 0.0], [[1.0], [2.0]]),
        horizon=2.0,
    )
    assert any("below 0" in v for v in validate(spec))


def test_validate_rejects_frozen_time_beyond_horizon():
    spec = SystemSpec(dim=1, terms=[DelayTerm(np.eye(1), FrozenTime(5.0))],
                      horizon=2.0)
    assert any("beyond horizon" in v for v in validate(spec))


def test_validate_rejects_bad_x0_and_bad_horizon():
    assert any("x0" in v for v in validate(SystemSpec(dim=2, x0=[1.0])))
    assert any("horizon" in v
               for v in validate(SystemSpec(dim=1, horizon=-1.0)))


# ---------------------------------------------------------------------------
# hypothesis data


def test_hypotheses_report_on_planar_corpus_spec():
    spec = planar_rotation()
    rep = hypotheses_report(spec)
    # M: the rotation jump has row sums 0.5, the second jump 0.7; sup is 0.7
    assert rep.M == pytest.approx(0.7)
    # Q: sum of the two coefficient norms, both constant in time
    assert rep.Q == pytest.approx(0.8 + 0.4)
    assert rep.delta == 0.3
    assert math.isfinite(rep.I_hat) and rep.I_hat > 0


def test_hypotheses_report_flags_frozen_terms_as_unbounded_delay():
    spec = SystemSpec(dim=1, terms=[DelayTerm(np.eye(1), FrozenTime(0.0))],
                      horizon=2.0)
    assert hypotheses_report(spec).delta == math.inf


def test_hypotheses_report_density_approaches_inverse_period():
    spec = SystemSpec(
        dim=1,
        impulses=ImpulseSchedule.periodic(0.5, [[1.0]], horizon=50.0, dim=1),
        horizon=50.0,
    )
    rep = hypotheses_report(spec)
    assert rep.I_hat == pytest.approx(2.0, rel=0.05)


def test_hypotheses_q_takes_the_sup_over_table_pieces():
    table = MatrixTable([0.0, 1.0], [[[0.5]], [[-2.0]]])
    spec = SystemSpec(dim=1, terms=[DelayTerm(table, ConstantLag(0.0))],
                      horizon=3.0)
    assert hypotheses_report(spec).Q == pytest.approx(2.0)


@settings(max_examples=25)
@given(st.lists(st.floats(0.1, 9.9), min_size=1, max_size=6, unique=True))
def test_count_is_additive_over_adjacent_open_closed_segments(points):
    pts = sorted(points)
    sched = ImpulseSchedule(pts, [[[1.0]]] * len(pts), None, 1)
    # half-open additivity: i(0, u] + i(u, t] = i(0, t] for any split u
    for u in (2.5, 5.0, 7.5):
        left = count_impulses(sched, 0.0, u)
        right = count_impulses(sched, u, 10.0)
        overlap = int(np.sum(np.isclose(sched.points, u)))
        total = count_impulses(sched, 0.0, 10.0)
        assert left + right - overlap == total
