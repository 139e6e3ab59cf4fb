"""Acceptance criteria, one test per criterion.

Every test prints a single ``[acceptance] N. <name>: PASS/FAIL`` line
(echoed again in the terminal summary) and then asserts its criterion
exactly as stated.  Two criteria encode claimed inequalities that the
exact, hand-computable solutions refute; those tests are kept faithful
and fail rather than being weakened to force green.
"""

import math
import time

import numpy as np

import conftest
from corpus import CORPUS
from impulsedde import (
    ConstantLag,
    DelayTerm,
    FrozenTime,
    ImpulseSchedule,
    MatrixTable,
    StepControl,
    SystemSpec,
    VectorTable,
    c0_closed_form,
    c0_estimate,
    certify,
    estimate_rate,
    fundamental_grid,
    gronwall_bound,
    mat_norm,
    representation_residual,
    solve,
    vec_norm,
)


def _verdict(num: int, name: str, ok: bool, detail: str = "") -> bool:
    line = f"[acceptance] {num}. {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_growth_lower_bounds_after_sign_flips():
    # scalar x' + a x(t-1) = 0, zero history, x(0) = 1, full sign flip at
    # every integer: x(j) = -x(j - 0).  The solution is piecewise
    # polynomial and exactly representable by the integrator:
    #   [0,1): x = 1        [1,2): x = -t
    #   [2,3): x = 2 + ((t-1)^2 - 1)/2          so x(3-0) = 3.5
    #   [3,4): x = -3.5 - 1.5(t-3) - ((t-2)^3 - 1)/6
    a = 1.0
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm([[a]], ConstantLag(1.0))],
        impulses=ImpulseSchedule.periodic(1.0, [[-1.0]], horizon=4.0),
        x0=[1.0],
        horizon=4.0,
    )
    t0 = time.perf_counter()
    traj = solve(spec, StepControl(1e-3))
    elapsed = time.perf_counter() - t0

    flat = max(abs(abs(float(traj.value(t)[0])) - 1.0)
               for t in np.linspace(0.0, 1.0, 100, endpoint=False))

    # claimed linear lower bounds for |x| on the next three unit intervals;
    # on [1,2) the solution sits exactly ON the line, so the comparison
    # carries a pure-roundoff guard (1e-9, eight orders of magnitude below
    # the O(0.5..1.8) shortfalls this test exposes further out)
    guard = 1e-9
    lines = [
        (1.0, lambda t: 1.0 + a * (t - 1.0)),
        (2.0, lambda t: 1.0 + a + a * (1.0 + a) * (t - 2.0)),
        (3.0, lambda t: (1.0 + a) ** 2 + a * (1.0 + a) ** 2 * (t - 3.0)),
    ]
    worst = (math.inf, 0.0, 0.0, 0.0)  # (margin, t, |x|, bound)
    for start, line in lines:
        for t in np.linspace(start, start + 1.0, 100, endpoint=False):
            mag = abs(float(traj.value(t)[0]))
            margin = mag - line(t)
            if margin < worst[0]:
                worst = (margin, float(t), mag, line(t))

    ok = flat <= 1e-8 and elapsed < 1.0 and worst[0] >= -guard
    _verdict(
        1, "growth lower bounds under sign-flip impulses", ok,
        f"max ||x|-1| on [0,1) = {flat:.1e}, runtime {elapsed:.2f}s, "
        f"worst margin {worst[0]:+.3f} at t={worst[1]:.3f} "
        f"(|x|={worst[2]:.4f} vs bound {worst[3]:.4f})")
    assert flat <= 1e-8
    assert elapsed < 1.0
    assert worst[0] >= -guard, (
        f"claimed lower bound fails at t={worst[1]:.3f}: "
        f"|x(t)| = {worst[2]:.6f} < {worst[3]:.6f}")


def test_criterion_2_frozen_term_keeps_solution_constant():
    # x' + x(t) - x(0) = 0 with x(0) = 1 has the constant solution 1; the
    # discretization must preserve it to near machine precision over [0, 10]
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm([[1.0]], ConstantLag(0.0)),
               DelayTerm([[-1.0]], FrozenTime(0.0))],
        x0=[1.0],
        horizon=10.0,
    )
    traj = solve(spec, StepControl(1e-3))
    dev = max(abs(float(traj.value(t)[0]) - 1.0)
              for t in np.linspace(0.0, 10.0, 2001))
    ok = dev < 1e-10
    _verdict(2, "frozen-argument constancy", ok, f"max |x - 1| = {dev:.2e}")
    assert dev < 1e-10


def test_criterion_3_certificate_closed_form_and_decay_fit():
    # a = 0.3, periodic halving jumps (gamma = 0.5, zeta = rho = 1):
    # alpha = -ln(gamma) and the certificate left-hand side collapses to
    # a * (1 - gamma / ln gamma), which must be matched to 1e-12 and lie
    # below 1; the fitted decay rate over horizon 40 must be positive
    a, b = 0.3, 0.5
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm([[a]], ConstantLag(1.0))],
        impulses=ImpulseSchedule.periodic(1.0, [[b]], horizon=40.0),
        x0=[1.0],
        horizon=40.0,
    )
    cert = certify(spec)
    closed = a * (1.0 - b / math.log(b))
    pinned = 0.5164042561333445
    fm = fundamental_grid(spec, [0.0, 2.0, 4.0, 6.0, 8.0],
                          np.linspace(0.0, 40.0, 81), StepControl(1e-3))
    est = estimate_rate(fm, (2.0, 40.0))
    ok = (cert.verdict == "Certified"
          and abs(cert.lhs - closed) <= 1e-12
          and abs(cert.lhs - pinned) <= 1e-12
          and est.nu > 0.0)
    _verdict(
        3, "certificate closed form and decay fit", ok,
        f"lhs = {cert.lhs:.16f} (closed-form gap {abs(cert.lhs - closed):.1e}),"
        f" verdict = {cert.verdict}, fitted nu = {est.nu:+.4f}")
    assert cert.verdict == "Certified"
    assert abs(cert.lhs - closed) <= 1e-12
    assert abs(cert.lhs - pinned) <= 1e-12
    assert est.nu > 0.0


def test_criterion_4_representation_residual_on_corpus():
    # every corpus system: the variation-of-constants reconstruction agrees
    # with direct integration to 1e-4 at dt = 1e-3, improves under halving,
    # and the whole sweep stays inside the 30 s budget.  Residuals already
    # at the roundoff floor (piecewise-polynomial cases the stepper resolves
    # exactly) cannot be required to shrink further; the floor is eight
    # orders of magnitude below the acceptance tolerance, so the carve-out
    # cannot mask a real failure.
    tol, floor, budget = 1e-4, 1e-12, 30.0
    rows = []
    start = time.perf_counter()
    for name in sorted(CORPUS):
        spec = CORPUS[name]()
        targets = np.linspace(0.0, spec.horizon, 11)[1:]
        r1 = representation_residual(spec, targets, StepControl(1e-3))
        r2 = representation_residual(spec, targets, StepControl(5e-4))
        rows.append((name, r1, r2))
    elapsed = time.perf_counter() - start

    small = all(r1 < tol for _, r1, _ in rows)
    shrinks = all(r2 < r1 or (r1 <= floor and r2 <= floor)
                  for _, r1, r2 in rows)
    loudest = max(rows, key=lambda row: row[1])
    ok = small and shrinks and elapsed < budget
    _verdict(
        4, "representation residual on the corpus", ok,
        f"{len(rows)} specs, max residual {loudest[1]:.1e} ({loudest[0]}), "
        f"halving shrinks: {'yes' if shrinks else 'NO'}, "
        f"runtime {elapsed:.1f}s")
    assert small, rows
    assert shrinks, rows
    assert elapsed < budget


def test_criterion_5_gronwall_bound_dominates_on_corpus():
    # the a-priori envelope must dominate every sampled ||X(t, s)|| on a
    # 20 x 20 (s, t) grid per corpus system, up to 1e-9 relative slack
    slack = 1e-9
    worst = (-math.inf, "", 0.0, 0.0)  # (relative excess, name, s, t)
    for name in sorted(CORPUS):
        spec = CORPUS[name]()
        s_grid = np.linspace(0.0, spec.horizon, 20, endpoint=False)
        t_grid = np.linspace(0.0, spec.horizon, 20)
        fm = fundamental_grid(spec, s_grid, t_grid, StepControl(1e-3))
        for b, s in enumerate(s_grid):
            for c, t in enumerate(t_grid):
                if t < s:
                    continue
                norm = mat_norm(fm.samples[c, b])
                bound = gronwall_bound(spec, float(s), float(t))
                rel = (norm - bound) / bound
                if rel > worst[0]:
                    worst = (rel, name, float(s), float(t))
    ok = worst[0] <= slack
    _verdict(
        5, "a-priori bound dominates sampled norms", ok,
        f"max (||X|| - bound)/bound = {worst[0]:+.2e} "
        f"({worst[1]}, s={worst[2]:.3f}, t={worst[3]:.3f})")
    assert worst[0] <= slack, worst


def test_criterion_6_impulse_product_and_decay_estimate():
    # part A: scalar zero-lag drift with one halving jump; the fundamental
    # solution is exactly X(2, 0) = e^-1 * 0.5 * e^-1 = 0.5 e^-2
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm([[1.0]], ConstantLag(0.0))],
        impulses=ImpulseSchedule(points=[1.0], matrices=[[[0.5]]],
                                 offsets=None, dim=1),
        x0=[1.0],
        horizon=2.0,
    )
    fm = fundamental_grid(spec, [0.0], [2.0], StepControl(1e-3))
    got = float(fm.at(2.0, 0.0)[0, 0])
    want = 0.5 * math.exp(-2.0)
    gap = abs(got - want)

    # part B: for the drift-free equation the transition factor is exactly
    # the product of jump gains; the gap/decay estimate (rate alpha =
    # -ln(gamma)/zeta, flat inside rho) must dominate it across a sweep of
    # 50 (s, t) pairs against periodic halving jumps
    sched = ImpulseSchedule.periodic(1.0, [[0.5]], horizon=12.0)
    starts = [0.0, 0.25, 0.5, 1.0, 1.75]
    gaps = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.25, 7.5, 8.25, 9.5]
    pairs = [(s, s + d) for s in starts for d in gaps]
    viol = [(s, t) for s, t in pairs
            if c0_estimate(sched, s, t, 1.0, 1.0)
            < c0_closed_form(0.0, sched, s, t)]

    ok = gap <= 1e-8 and not viol
    example = f", e.g. s={viol[0][0]:g}, t={viol[0][1]:g}" if viol else ""
    _verdict(
        6, "impulse product value and decay estimate", ok,
        f"|X(2,0) - 0.5 e^-2| = {gap:.1e}; estimate falls below the exact "
        f"product on {len(viol)}/{len(pairs)} pairs{example}")
    assert gap <= 1e-8
    assert not viol, (
        f"decay estimate fails to dominate the exact jump product on "
        f"{len(viol)} of {len(pairs)} sampled pairs; first at "
        f"s={viol[0][0]:g}, t={viol[0][1]:g}")


def test_criterion_7_annihilating_jump_restart():
    # B_1 = 0 with offset v erases the pre-jump state: the tail of the
    # trajectory must equal an independent solve restarted from v.  Zero
    # lag keeps the restart exact (no history hand-off), so the comparison
    # isolates the jump semantics; tables and the second jump are shifted
    # by tau_1 = 0.8.
    A0 = [[0.6, -0.2], [0.1, 0.4]]
    A1 = [[0.2, 0.3], [-0.4, 0.5]]
    g0, g1, g2 = [0.3, -0.1], [-0.2, 0.4], [0.1, 0.1]
    v = [0.7, -0.4]
    B2 = [[0.5, 0.2], [0.0, 0.8]]
    a2 = [0.05, 0.1]
    full = SystemSpec(
        dim=2,
        terms=[DelayTerm(MatrixTable([0.0, 1.3], [A0, A1]),
                         ConstantLag(0.0))],
        impulses=ImpulseSchedule(points=[0.8, 1.6],
                                 matrices=[[[0.0, 0.0], [0.0, 0.0]], B2],
                                 offsets=[v, a2], dim=2),
        forcing=VectorTable([0.0, 0.9, 1.9], [g0, g1, g2]),
        x0=[1.0, 1.0],
        horizon=2.4,
    )
    restarted = SystemSpec(
        dim=2,
        terms=[DelayTerm(MatrixTable([0.0, 0.5], [A0, A1]),
                         ConstantLag(0.0))],
        impulses=ImpulseSchedule(points=[0.8], matrices=[B2],
                                 offsets=[a2], dim=2),
        forcing=VectorTable([0.0, 0.1, 1.1], [g0, g1, g2]),
        x0=v,
        horizon=1.6,
    )
    t1 = solve(full, StepControl(1e-3))
    t2 = solve(restarted, StepControl(1e-3))
    gap = max(vec_norm(t1.value(0.8 + u) - t2.value(u))
              for u in np.linspace(0.0, 1.6, 41))
    ok = gap <= 1e-8
    _verdict(7, "annihilating jump restarts the flow", ok,
             f"max gap over 41 probes = {gap:.2e}")
    assert gap <= 1e-8


def test_criterion_8_rk4_order_on_pure_ode():
    # x' + x = 0, x(0) = 1: each halving of the step must cut the max
    # pointwise error by at least 8x across three halvings (fourth-order
    # stepping gives ~16x)
    spec = SystemSpec(dim=1, terms=[DelayTerm([[1.0]], ConstantLag(0.0))],
                      x0=[1.0], horizon=2.0)
    probes = [0.5, 1.0, 1.5, 2.0]
    errs = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        traj = solve(spec, StepControl(dt))
        errs.append(max(abs(float(traj.value(t)[0]) - math.exp(-t))
                        for t in probes))
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    ok = all(r >= 8.0 for r in ratios)
    _verdict(
        8, "step halving cuts ODE error 8x", ok,
        "errors " + ", ".join(f"{e:.2e}" for e in errs)
        + "; ratios " + ", ".join(f"{r:.1f}" for r in ratios))
    assert all(r >= 8.0 for r in ratios), ratios
