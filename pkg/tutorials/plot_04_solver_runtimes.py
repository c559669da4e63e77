"""
Solver runtimes
===============

All four estimators on the same 20 s validation recording. Least squares and
Levenberg-Marquardt give the same answer for this linear model, total least
squares subsamples with a stride of 10 in its fast mode, and the brute-force
grid is only practical for the mass and the centre of mass.
"""

from pipest.diagnose import comparison_row
from pipest.estimators import GridSpec, estimate
from pipest.pipeline import prepare, scenario_recordings

scenario, recordings = scenario_recordings("predefined", seed=7)
kin, wrench = prepare(recordings["validation"])
truth = scenario.truth

runs = [
    ("ls", "full", {}),
    ("lm", "full", {}),
    ("tls", "full", {"tls_svd": "fast"}),
    ("tls", "full", {"tls_svd": "exact"}),
    ("brute", "mass", {}),
    ("brute", "mass-com", {"grid": GridSpec(points=7)}),
]
# The brute-force grid is centred on the known parameters, so the truth is a
# grid point and its error is exactly zero here; the interest is the runtime.
print(f"{len(kin)} samples after trimming")
print(f"{'method':8s}{'mode':10s}{'variant':8s}{'e_m':>11s}{'runtime':>12s}")
for method, mode, options in runs:
    result = estimate(kin, wrench, method, mode, truth, **options)
    row = comparison_row(result, truth, "validation")
    variant = options.get("tls_svd", "")
    print(f"{method:8s}{mode:10s}{variant:8s}{row.errors['mass']:11.3g}{row.runtime_ms:9.1f} ms")
