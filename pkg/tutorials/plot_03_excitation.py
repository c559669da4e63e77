"""
How much does the motion excite the payload?
============================================

Mass and centre of mass are visible in any pose thanks to gravity. The
inertia tensor needs angular acceleration. A pick-and-place style motion is
mostly translational, which shows up as a poorly conditioned inertia block,
and a payload held still leaves the inertia unidentifiable altogether.
"""

import numpy as np

from pipest.core import Kinematics, build_system
from pipest.diagnose import excitation_diagnostics
from pipest.synth import make_scenario, simulate, synthesize_wrenches

rows = []
for kind in ("predefined", "free", "pickplace"):
    run = simulate(make_scenario(kind, seed=7))
    diag = excitation_diagnostics(build_system(run.kinematics, run.wrench), run.kinematics)
    rows.append((kind, diag))

# A static recording: 1 s in a single orientation.
truth = make_scenario("predefined").truth
static = Kinematics.stack([Kinematics.static([0.0, 0.0, -9.80665], t=k / 1000) for k in range(1000)])
rows.append(("static", excitation_diagnostics(build_system(static, synthesize_wrenches(static, truth)), static)))

print(f"{'motion':12s}{'rank':>6s}{'cond(A)':>12s}{'cond(I)':>12s}{'max|alpha|':>12s}  inertia")
for kind, d in rows:
    ident = "identifiable" if d.inertia_identifiable else "NOT identifiable"
    print(f"{kind:12s}{d.rank:6d}{d.condition_number:12.4g}{d.cond_inertia:12.4g}{d.max_alpha:12.4g}  {ident}")

# The static case still pins down mass and the two COM components
# perpendicular to gravity: rank 3 of 10.
assert rows[-1][1].rank == 3
print("static rank:", rows[-1][1].rank, "| cond(mass column):", np.round(rows[-1][1].cond_mass, 3))
