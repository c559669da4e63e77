import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipest.core import InertialParams
from pipest.errors import IngestionError, InvalidParams
from pipest.io import (
    RECORDING_COLUMNS,
    Report,
    atomic_write,
    format_params,
    format_recording,
    params_from_dict,
    parse_recording,
    read_params,
    read_recording,
    read_report,
    write_params,
    write_recording,
    write_report,
)
from pipest.signal import Recording
from pipest.synth import make_scenario, simulate

HEADER = ",".join(RECORDING_COLUMNS)


def csv_rows(n=5, quat="1,0,0,0"):
    return [f"{k / 1000!r},0.1,0.2,0.3,{quat},1,2,3,0.1,0.2,0.3" for k in range(n)]


def csv_text(rows):
    return "\n".join([HEADER, *rows]) + "\n"


@pytest.fixture(scope="module")
def recording():
    return simulate(make_scenario("free", seed=4, duration=0.5)).recording


# -- recordings ---------------------------------------------------------------

def test_recording_round_trip(recording, tmp_path):
    path = tmp_path / "rec.csv"
    write_recording(path, recording)
    back, digest = read_recording(path)
    assert digest.startswith("sha256:")
    assert back.rate == recording.rate
    for name in ("t", "position", "quat", "force", "torque"):
        assert getattr(back, name).tobytes() == getattr(recording, name).tobytes(), name
    assert format_recording(back) == path.read_text()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=9, max_size=9), st.integers(2, 20))
def test_recording_float_round_trip(values, n):
    t = np.arange(n) / 250.0
    rec = Recording(250.0, t, np.tile(values[:3], (n, 1)), np.tile([1.0, 0, 0, 0], (n, 1)),
                    np.tile(values[3:6], (n, 1)), np.tile(values[6:], (n, 1)))
    back = parse_recording(format_recording(rec))
    np.testing.assert_array_equal(back.position, rec.position)
    np.testing.assert_array_equal(back.force, rec.force)
    np.testing.assert_array_equal(back.torque, rec.torque)


def test_recording_format_layout(recording):
    text = format_recording(recording)
    lines = text.split("\n")
    assert lines[0] == HEADER
    assert text.endswith("\n") and "\r" not in text
    assert all(len(line.split(",")) == 14 for line in lines[1:-1])
    assert len(lines) - 2 == len(recording)


def test_inferred_rate():
    assert parse_recording(csv_text(csv_rows(10))).rate == 1000.0


def test_bad_header():
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(csv_rows()).replace("qw", "q0"))
    assert exc.value.row == 0


def test_error_carries_row_number():
    rows = csv_rows()
    rows[2] = rows[2].replace("0.2", "abc", 1)
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(rows))
    assert exc.value.row == 3
    assert "row 3" in str(exc.value)


def test_wrong_column_count():
    rows = csv_rows()
    rows[1] += ",7"
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(rows))
    assert exc.value.row == 2


def test_non_monotonic_time_row():
    rows = csv_rows()
    rows[3] = rows[3].replace("0.003", "0.001", 1)
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(rows))
    assert exc.value.row == 4


def test_non_finite_value():
    rows = csv_rows()
    rows[0] = rows[0].replace(",1,2,3,", ",nan,2,3,")
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(rows))
    assert exc.value.row == 1


def test_quaternion_far_from_unit_is_rejected():
    rows = csv_rows()
    rows[4] = rows[4].replace(",1,0,0,0,", ",1.01,0,0,0,")
    with pytest.raises(IngestionError) as exc:
        parse_recording(csv_text(rows))
    assert exc.value.row == 5


def test_quaternion_slightly_off_is_renormalized(caplog):
    with caplog.at_level(logging.WARNING, logger="pipest.io"):
        rec = parse_recording(csv_text(csv_rows(quat="1.0001,0,0,0")))
    np.testing.assert_array_equal(rec.quat[:, 0], 1.0)
    assert "renormalized" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="pipest.io"):
        parse_recording(csv_text(csv_rows(quat="1.0000000001,0,0,0")))
    assert caplog.text == ""


def test_empty_and_short_files():
    with pytest.raises(IngestionError):
        parse_recording("")
    with pytest.raises(IngestionError):
        parse_recording(csv_text(csv_rows(1)))


def test_irregular_rate_is_ingestion_error():
    rows = csv_rows(6)
    rows[3] = rows[3].replace("0.003", "0.0032", 1)
    with pytest.raises(IngestionError):
        parse_recording(csv_text(rows))


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        read_recording(tmp_path / "absent.csv")


# -- parameters ---------------------------------------------------------------

def test_params_round_trip(payload, tmp_path):
    path = tmp_path / "p.json"
    write_params(path, payload)
    assert read_params(path) == payload
    assert json.loads(path.read_text()).keys() == {"mass", "com", "inertia"}


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.lists(st.floats(-1, 1), min_size=9, max_size=9))
def test_params_text_round_trip(mass, values):
    params = InertialParams(mass, values[:3], values[3:])
    assert params_from_dict(json.loads(format_params(params))) == params


@pytest.mark.parametrize("data", [
    {"mass": 1, "com": [0, 0, 0], "inertia": [0] * 6, "colour": "red"},
    {"mass": 1, "com": [0, 0, 0]},
    {"mass": 1, "com": [0, 0], "inertia": [0] * 6},
    {"mass": "heavy", "com": [0, 0, 0], "inertia": [0] * 6},
    {"mass": 0, "com": [0, 0, 0], "inertia": [0] * 6},
    {"mass": -1, "com": [0, 0, 0], "inertia": [0] * 6},
    [1, 2, 3],
])
def test_invalid_params(data):
    with pytest.raises(InvalidParams):
        params_from_dict(data)


def test_params_bad_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text("{mass: 1")
    with pytest.raises(InvalidParams):
        read_params(path)


# -- reports ------------------------------------------------------------------

def make_report(**overrides):
    fields = dict(
        method="ls", mode="full", data_kind="validation",
        estimated={"mass": 0.3, "com": [0.0, 0.01, 0.05], "inertia": [1e-3, 0, 0, 1e-3, 0, 1e-3]},
        errors={"mass": 1.5e-4, "com": 2e-4, "inertia": 3e-3},
        condition_number=5.4,
        rank_flags={"rankDeficient": False, "rank": 10, "nonPhysical": False,
                    "inertiaIdentifiable": True},
        runtime_ms=12.5, iterations=1, converged=True, input_digest="sha256:00",
    )
    fields.update(overrides)
    return Report(**fields)


@pytest.mark.parametrize("overrides", [{}, {"condition_number": math.inf}, {"runtime_ms": None},
                                       {"errors": {"mass": 0.1, "com": None, "inertia": None}}])
def test_report_round_trip(tmp_path, overrides):
    report = make_report(**overrides)
    path = tmp_path / "r.json"
    write_report(path, report)
    assert read_report(path) == report
    assert json.loads(path.read_text())["schema"] == "pipest.report/1"


def test_report_keys_are_camel_case():
    data = json.loads(make_report().to_json())
    for key in ("dataKind", "conditionNumber", "rankFlags", "runtimeMs", "toolVersion", "inputDigest"):
        assert key in data


def test_report_schema_checked():
    data = json.loads(make_report().to_json())
    data["schema"] = "pipest.report/0"
    with pytest.raises(IngestionError):
        Report.from_json(json.dumps(data))
    data["schema"] = "pipest.report/1"
    del data["method"]
    with pytest.raises(IngestionError):
        Report.from_json(json.dumps(data))
    with pytest.raises(IngestionError):
        Report.from_json("not json")


# -- atomic writes ------------------------------------------------------------

def test_atomic_write_replaces_whole_file(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")
    atomic_write(path, "new")
    assert path.read_text() == "new"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_atomic_write_failure_leaves_nothing(tmp_path):
    path = tmp_path / "out.txt"
    with pytest.raises(TypeError):
        atomic_write(path, 12345)
    assert list(tmp_path.iterdir()) == []
