"""Destabilization by state jumps alone.

The scalar equation x'(t) + x(t - 1) = 0 with zero history and x(0) = 1 is
harmless on its own: the solution stays bounded on any fixed horizon.  Add
the sign-flipping jumps x(j) = -x(j - 0) at j = 1, 2, 3 and the delayed
feedback turns into positive feedback on every interval -- |x| grows
steadily even though each jump preserves the magnitude exactly.

The first few pieces are computable by hand and make good checkpoints:

    x(t) = 1                                on [0, 1)
    x(t) = -t                               on [1, 2)
    x(t) = 2 + ((t - 1)^2 - 1) / 2          on [2, 3)
    x(t) = -7/2 - 3(t-3)/2 - ((t-2)^3 - 1)/6  on [3, 4)

so |x(2.5)| = 2.625 and |x(3.5)| = 223/48 = 4.6458333...
"""

import numpy as np

from impulsedde import (
    ConstantLag,
    DelayTerm,
    ImpulseSchedule,
    StepControl,
    SystemSpec,
    solve,
)


def exact(t: float) -> float:
    if t < 1.0:
        return 1.0
    if t < 2.0:
        return -t
    if t < 3.0:
        return 2.0 + ((t - 1.0) ** 2 - 1.0) / 2.0
    return -3.5 - 1.5 * (t - 3.0) - ((t - 2.0) ** 3 - 1.0) / 6.0


def main() -> None:
    spec = SystemSpec(
        dim=1,
        terms=[DelayTerm(coefficient=[[1.0]], delay=ConstantLag(1.0))],
        impulses=ImpulseSchedule.periodic(1.0, [[-1.0]], horizon=4.0),
        x0=[1.0],
        horizon=4.0,
    )
    traj = solve(spec, StepControl(dt=1e-3))

    print("t      x(t) numeric    x(t) exact      |error|")
    for t in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 3.999):
        x = float(traj.value(t)[0])
        e = exact(t)
        print(f"{t:5.3f}  {x:+.10f}  {e:+.10f}  {abs(x - e):.2e}")

    # jumps are genuine two-sided objects: x(2 - 0) = -2, x(2) = +2
    left = float(traj.value(2.0, side="left")[0])
    right = float(traj.value(2.0, side="right")[0])
    print(f"\nat the jump t = 2:  left limit {left:+.6f}, "
          f"right value {right:+.6f}  (B = -1 flips the sign)")

    # the magnitude envelope is monotone on interval right endpoints
    probes = np.linspace(0.0, 4.0, 4001, endpoint=False)
    mags = [abs(float(traj.value(t)[0])) for t in probes]
    print(f"\nmax |x| on [0, 4): {max(mags):.6f}  "
          f"(reached near t = {probes[int(np.argmax(mags))]:.3f})")
    print("growth without any unstable coefficient: the jumps alone do it.")


if __name__ == "__main__":
    main()
