import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from pipest.core import GRAVITY, InertialParams, Kinematics, RegressorSystem, build_system
from pipest.diagnose import (
    ComparisonRow,
    ComparisonTable,
    build_comparison,
    error_report,
    excitation_diagnostics,
    relative_error,
)
from pipest.errors import MissingTruth, ZeroGroundTruth
from pipest.estimators import estimate, mask_system, solve_least_squares
from pipest.pipeline import prepare, scenario_recordings
from pipest.synth import make_scenario, simulate, synthesize_wrenches

finite = st.floats(-10, 10, allow_nan=False)


@pytest.fixture(scope="module")
def predefined():
    scenario = make_scenario("predefined", seed=7)
    return scenario, simulate(scenario)


def static_system(n=100):
    g = Rotation.from_rotvec([0.3, -0.2, 0.1]).apply([0.0, 0.0, -GRAVITY], inverse=True)
    kin = Kinematics.stack([Kinematics.static(g, t=0.001 * k) for k in range(n)])
    wrench = synthesize_wrenches(kin, InertialParams(0.5, [0.01, 0.0, 0.04], [1e-3, 0, 0, 1e-3, 0, 1e-3]))
    return build_system(kin, wrench), kin


# -- relative error -----------------------------------------------------------

def test_relative_error_identity_and_double():
    com = np.array([0.01, -0.02, 0.03])
    assert relative_error(com, com) == 0.0
    assert relative_error(2 * com, com) == 1.0
    inertia = np.diag([1e-3, 2e-3, 3e-3])
    assert relative_error(2 * inertia, inertia) == 1.0


def test_relative_error_mass_magnitude():
    assert relative_error(1.0446 * 0.3, 0.3) == pytest.approx(0.0446, rel=1e-12)


def test_relative_error_uses_frobenius_norm():
    truth = np.array([[1.0, 0.5, 0.0], [0.5, 2.0, 0.0], [0.0, 0.0, 3.0]])
    est = truth.copy()
    est[0, 1] = est[1, 0] = 0.6
    # the off-diagonal deviation counts twice in the full symmetric matrix
    expected = math.sqrt(2 * 0.1**2) / math.sqrt(1 + 4 + 9 + 2 * 0.25)
    assert relative_error(est, truth) == pytest.approx(expected, rel=1e-14)


def test_relative_error_zero_truth():
    with pytest.raises(ZeroGroundTruth):
        relative_error([0.1, 0.0, 0.0], np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(-10, 10))
def test_relative_error_mass_scale(m, s):
    assert relative_error(s * m, m) == pytest.approx(abs(s - 1), rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_relative_error_vector_rotation_invariant(c_est, c_gt, rotvec):
    c_gt = np.asarray(c_gt)
    if np.linalg.norm(c_gt) < 1e-3:
        c_gt = c_gt + 1.0
    R = Rotation.from_rotvec(rotvec).as_matrix()
    base = relative_error(c_est, c_gt)
    assert relative_error(R @ np.asarray(c_est), R @ c_gt) == pytest.approx(base, rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_relative_error_matrix_rotation_invariant(seed, rotvec):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(3, 3)), r.normal(size=(3, 3))
    i_gt, i_est = a @ a.T + 0.1 * np.eye(3), b @ b.T
    R = Rotation.from_rotvec(rotvec).as_matrix()
    base = relative_error(i_est, i_gt)
    rotated = relative_error(R @ i_est @ R.T, R @ i_gt @ R.T)
    assert rotated == pytest.approx(base, rel=1e-12, abs=1e-12)


def test_error_report_omits_unestimated_groups(predefined):
    scenario, run = predefined
    result = estimate(run.kinematics, run.wrench, "ls", "mass", scenario.truth)
    report = error_report(result, scenario.truth)
    assert report.mass < 1e-8
    assert report.com is None and report.inertia is None


def test_error_report_zero_com_is_undefined(predefined):
    _, run = predefined
    truth = InertialParams(0.3, [0.0, 0.0, 0.0], [1e-3, 0, 0, 1e-3, 0, 1e-3])
    kin = run.kinematics[:3000]
    result = estimate(kin, synthesize_wrenches(kin, truth), "ls", "full")
    report = error_report(result, truth)
    assert report.com is None and "com" in report.undefined
    assert report.mass is not None and report.inertia is not None


def test_error_report_needs_truth(predefined):
    _, run = predefined
    result = estimate(run.kinematics[:2000], run.wrench[:2000], "ls", "full")
    with pytest.raises(MissingTruth):
        error_report(result, None)


# -- excitation diagnostics ---------------------------------------------------

def test_static_recording_is_unidentifiable():
    system, kin = static_system()
    diag = excitation_diagnostics(system, kin)
    assert diag.rank < 10
    assert not diag.inertia_identifiable
    assert math.isinf(diag.cond_inertia)
    assert diag.max_omega == 0.0 and diag.max_alpha == 0.0


def test_static_rank_flag_matches_least_squares():
    system, _ = static_system()
    diag = excitation_diagnostics(system)
    result = solve_least_squares(mask_system(system, "full"))
    assert result.rank_deficient == (diag.rank < 10)
    assert result.rank == diag.rank


def test_predefined_full_rank(predefined):
    _, run = predefined
    diag = excitation_diagnostics(build_system(run.kinematics, run.wrench), run.kinematics)
    assert diag.rank == 10
    assert math.isfinite(diag.condition_number)
    assert diag.inertia_identifiable
    assert diag.cond_mass == 1.0


def test_pick_place_inertia_worse_than_predefined(predefined):
    _, run = predefined
    pick = simulate(make_scenario("pickplace", seed=7))
    d_pre = excitation_diagnostics(build_system(run.kinematics, run.wrench))
    d_pick = excitation_diagnostics(build_system(pick.kinematics, pick.wrench))
    assert d_pick.cond_inertia > d_pre.cond_inertia


def test_condition_number_row_permutation_and_duplication(predefined):
    _, run = predefined
    system = build_system(run.kinematics[:3000], run.wrench[:3000])
    base = excitation_diagnostics(system).condition_number
    perm = np.random.default_rng(1).permutation(system.A.shape[0])
    shuffled = RegressorSystem(system.A[perm], system.b[perm], system.sample_count)
    doubled = RegressorSystem(np.vstack([system.A, system.A]), np.r_[system.b, system.b],
                              2 * system.sample_count)
    assert excitation_diagnostics(shuffled).condition_number == pytest.approx(base, rel=1e-10)
    assert excitation_diagnostics(doubled).condition_number == pytest.approx(base, rel=1e-10)


# -- comparison tables --------------------------------------------------------

def test_single_clean_row(predefined):
    scenario, run = predefined
    result = estimate(run.kinematics, run.wrench, "ls", "full")
    table = build_comparison([(result, "validation")], scenario.truth)
    assert len(table.rows) == 1
    errors = table.rows[0].errors
    assert set(errors) == {"mass", "com", "inertia"}
    assert all(v < 1e-8 for v in errors.values())


def test_empty_comparison():
    table = build_comparison([])
    assert table.rows == ()
    assert json.loads(table.to_json()) == {"schema": "pipest.comparison/1", "rows": []}


def test_comparison_needs_truth(predefined):
    _, run = predefined
    result = estimate(run.kinematics[:2000], run.wrench[:2000], "ls", "full")
    with pytest.raises(MissingTruth):
        build_comparison([(result, "validation")])


def test_noisy_inertia_error_exceeds_clean_tenfold():
    scenario, recordings = scenario_recordings("predefined", seed=7)
    pairs = []
    for kind, rec in recordings.items():
        kin, wrench = prepare(rec)
        pairs.append((estimate(kin, wrench, "ls", "full"), kind))
    table = build_comparison(pairs, scenario.truth)
    clean, noisy = (r.errors["inertia"] for r in table.rows)
    assert [r.data_kind for r in table.rows] == ["validation", "measured"]
    assert noisy / clean > 10


def test_comparison_order_is_deterministic():
    rows = [
        ComparisonRow("tls", "full", "measured", {"mass": 0.1}, 1.0, 5.0),
        ComparisonRow("ls", "full", "measured", {"mass": 0.2}, 1.0, 5.0),
        ComparisonRow("ls", "mass", "validation", {"mass": 0.3}, 1.0, 5.0),
        ComparisonRow("ls", "full", "validation", {"mass": 0.4}, 1.0, 5.0),
    ]
    a = build_comparison(rows)
    b = build_comparison(rows[::-1])
    assert a == b
    assert [(r.method, r.mode, r.data_kind) for r in a.rows] == [
        ("ls", "mass", "validation"), ("ls", "full", "validation"),
        ("ls", "full", "measured"), ("tls", "full", "measured"),
    ]


def test_comparison_json_round_trip():
    rows = (ComparisonRow("lm", "mass-com", "validation", {"mass": 1e-4, "com": 2e-4}, 3.5, math.inf,
                          rank_deficient=True, label="run"),
            ComparisonRow("ls", "full", "measured", {"mass": 1e-3}, None, 12.0))
    table = ComparisonTable(rows)
    assert ComparisonTable.from_dict(json.loads(table.to_json())) == table
    text = table.to_text()
    assert text.splitlines()[0].split()[:3] == ["method", "mode", "data"]
    assert len(text.splitlines()) == 3


def test_plot_series_skips_missing_groups():
    table = ComparisonTable((ComparisonRow("ls", "mass", "validation", {"mass": 0.01}, 1.0, 1.0),))
    assert table.plot_series() == [("ls", "mass", "validation", "mass", 0.01)]
