"""Recording CSV, parameter JSON and report JSON formats.

All writers go through :func:`atomic_write` so a failed command never
leaves a partial file behind. Floats are written with ``repr`` so every
format round-trips exactly.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import InertialParams
from .errors import IngestionError, InvalidParams, PipestError
from .signal import Recording

log = logging.getLogger(__name__)

RECORDING_COLUMNS = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz", "fx", "fy", "fz", "tx", "ty", "tz")
QUAT_REJECT = 1e-3
QUAT_WARN = 1e-6
REPORT_SCHEMA = "pipest.report/1"


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temporary file and rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def digest(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _fmt(x):
    return repr(float(x))


# -- recordings ---------------------------------------------------------------

def format_recording(rec):
    table = np.column_stack([rec.t, rec.position, rec.quat, rec.force, rec.torque])
    lines = [",".join(RECORDING_COLUMNS)]
    lines.extend(",".join(map(_fmt, row)) for row in table)
    return "\n".join(lines) + "\n"


def write_recording(path, rec):
    atomic_write(path, format_recording(rec))


def parse_recording(text):
    """Parse recording CSV text into a :class:`~pipest.signal.Recording`.

    The sampling rate is inferred from the median time step. Quaternions off
    unit norm by more than ``QUAT_REJECT`` are rejected, by more than
    ``QUAT_WARN`` are renormalized with a warning.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError("empty recording file") from None
    if tuple(h.strip() for h in header) != RECORDING_COLUMNS:
        raise IngestionError(f"expected header {','.join(RECORDING_COLUMNS)}", row=0)
    rows = []
    for k, cells in enumerate(reader, start=1):
        if not cells:
            continue
        if len(cells) != len(RECORDING_COLUMNS):
            raise IngestionError(f"expected {len(RECORDING_COLUMNS)} columns, got {len(cells)}", row=k)
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise IngestionError(str(exc), row=k) from None
        if not all(math.isfinite(v) for v in values):
            raise IngestionError("non-finite value", row=k)
        rows.append(values)
    if len(rows) < 2:
        raise IngestionError("recording needs at least two samples")
    table = np.array(rows)
    t = table[:, 0]
    dt = np.diff(t)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        raise IngestionError("timestamps must be strictly increasing", row=int(bad[0]) + 2)
    quat = table[:, 4:8]
    err = np.abs(np.linalg.norm(quat, axis=1) - 1.0)
    if np.any(err > QUAT_REJECT):
        raise IngestionError("quaternion is not unit norm", row=int(np.argmax(err > QUAT_REJECT)) + 1)
    if np.any(err > QUAT_WARN):
        log.warning("renormalized %d quaternions deviating from unit norm by more than %g",
                    int(np.sum(err > QUAT_WARN)), QUAT_WARN)
    rate = round(1.0 / float(np.median(dt)), 6)
    try:
        return Recording(rate, t, table[:, 1:4], quat, table[:, 8:11], table[:, 11:14])
    except PipestError as exc:
        raise IngestionError(str(exc)) from exc


def read_recording(path):
    """Load a recording file; returns ``(recording, digest_of_file_bytes)``."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise IngestionError("recording is not valid UTF-8") from None
    return parse_recording(text), digest(raw)


# -- parameters ---------------------------------------------------------------

def params_to_dict(params):
    return {"mass": params.mass, "com": params.com.tolist(), "inertia": params.inertia.tolist()}


def params_from_dict(data, require_positive_mass=True):
    if not isinstance(data, dict):
        raise InvalidParams("parameter file must contain a JSON object")
    unknown = set(data) - {"mass", "com", "inertia"}
    if unknown:
        raise InvalidParams(f"unknown keys: {', '.join(sorted(unknown))}")
    missing = {"mass", "com", "inertia"} - set(data)
    if missing:
        raise InvalidParams(f"missing keys: {', '.join(sorted(missing))}")
    try:
        mass = float(data["mass"])
        com = [float(x) for x in data["com"]]
        inertia = [float(x) for x in data["inertia"]]
    except (TypeError, ValueError):
        raise InvalidParams("mass, com and inertia must be numbers") from None
    if len(com) != 3 or len(inertia) != 6:
        raise InvalidParams("com needs 3 entries and inertia 6 (xx, xy, xz, yy, yz, zz)")
    if not all(math.isfinite(v) for v in [mass] + com + inertia):
        raise InvalidParams("parameters must be finite")
    if require_positive_mass and not mass > 0:
        raise InvalidParams(f"mass must be positive, got {mass}")
    return InertialParams(mass, com, inertia)


def format_params(params):
    return json.dumps(params_to_dict(params), indent=2) + "\n"


def write_params(path, params):
    atomic_write(path, format_params(params))


def read_params(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParams(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidParams(f"{path}: invalid JSON ({exc.msg})") from None
    return params_from_dict(data)


# -- reports ------------------------------------------------------------------

@dataclass
class Report:
    method: str
    mode: str
    data_kind: str
    estimated: dict
    errors: dict
    condition_number: float
    rank_flags: dict
    runtime_ms: float | None
    iterations: int = 1
    converged: bool = True
    input_digest: str = ""
    tool_version: str = __version__
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "method": self.method,
            "mode": self.mode,
            "dataKind": self.data_kind,
            "estimated": self.estimated,
            "errors": self.errors,
            "conditionNumber": self.condition_number,
            "rankFlags": self.rank_flags,
            "runtimeMs": self.runtime_ms,
            "iterations": self.iterations,
            "converged": self.converged,
            "toolVersion": self.tool_version,
            "inputDigest": self.input_digest,
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != REPORT_SCHEMA:
            raise IngestionError(f"unsupported report schema {data.get('schema')!r}")
        try:
            return cls(
                method=data["method"], mode=data["mode"], data_kind=data["dataKind"],
                estimated=data["estimated"], errors=data["errors"],
                condition_number=data["conditionNumber"], rank_flags=data["rankFlags"],
                runtime_ms=data["runtimeMs"], iterations=data["iterations"],
                converged=data["converged"], input_digest=data["inputDigest"],
                tool_version=data["toolVersion"], extras=data.get("extras", {}),
            )
        except KeyError as exc:
            raise IngestionError(f"report is missing field {exc.args[0]!r}") from None

    def to_json(self):
        # Non-finite floats (e.g. an infinite condition number) use the
        # Infinity/NaN literals accepted by Python's json module.
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise IngestionError(f"invalid report JSON ({exc.msg})") from None


def write_report(path, report):
    atomic_write(path, report.to_json())


def read_report(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    return Report.from_json(text)
