"""Error metrics, excitation/identifiability diagnostics and comparison tables."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import physical_consistency
from .errors import MissingTruth, ZeroGroundTruth
from .estimators import EstimationMode, rank_tolerance

GROUPS = ("mass", "com", "inertia")

# Smallest/largest singular value ratio below which inertia is called unidentifiable.
UNIDENTIFIABLE_RATIO = 1e-8


def relative_error(estimate, truth):
    """``||estimate - truth|| / ||truth||`` for a scalar, vector or matrix group.

    Matrices use the Frobenius norm. Raises :class:`ZeroGroundTruth` when the
    reference has zero norm.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ZeroGroundTruth("relative error undefined for a zero ground truth")
    return float(np.linalg.norm(estimate - truth) / denom)


def _group_values(params, group):
    return {"mass": params.mass, "com": params.com, "inertia": params.inertia_matrix}[group]


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors per group; ``None`` for groups not estimated or undefined."""

    mass: float | None = None
    com: float | None = None
    inertia: float | None = None
    rank_deficient: bool = False
    non_physical: bool = False
    undefined: tuple = ()

    def as_dict(self):
        return {"mass": self.mass, "com": self.com, "inertia": self.inertia}


def error_report(result, truth):
    """Relative errors of an :class:`~pipest.estimators.EstimationResult` against ``truth``."""
    if truth is None:
        raise MissingTruth("ground truth required for error reporting")
    errors, undefined = {}, []
    for group in result.mode.groups:
        try:
            errors[group] = relative_error(_group_values(result.params, group), _group_values(truth, group))
        except ZeroGroundTruth:
            undefined.append(group)
    consistency = physical_consistency(result.params)
    return ErrorReport(
        **errors,
        rank_deficient=result.rank_deficient,
        non_physical=not consistency.consistent,
        undefined=tuple(undefined),
    )


def _cond(s):
    if s.size == 0 or s[0] == 0:
        return math.inf
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


@dataclass(frozen=True)
class Diagnostics:
    condition_number: float
    rank: int
    cond_mass: float
    cond_mass_com: float
    cond_inertia: float  # inertia columns restricted to torque rows
    inertia_identifiable: bool
    max_omega: float | None = None
    max_alpha: float | None = None

    def as_dict(self):
        return asdict(self)


def excitation_diagnostics(system, kin=None):
    """Conditioning and rank of a regressor system and of its parameter groups.

    Parameters
    ----------
    system : RegressorSystem
    kin : Kinematics, optional
        When given, the peak angular velocity and acceleration norms are added.
    """
    A = system.A
    s = np.linalg.svd(A, compute_uv=False)
    tol = s[0] * rank_tolerance(A.shape[0])
    rank = int(np.sum(s > tol))
    s_inertia = np.linalg.svd(system.blocks[:, 3:, 4:].reshape(-1, 6), compute_uv=False)
    identifiable = bool(s_inertia[0] > 0 and s_inertia[-1] >= UNIDENTIFIABLE_RATIO * s_inertia[0])
    return Diagnostics(
        condition_number=_cond(s),
        rank=rank,
        cond_mass=_cond(np.linalg.svd(A[:, :1], compute_uv=False)),
        cond_mass_com=_cond(np.linalg.svd(A[:, :4], compute_uv=False)),
        cond_inertia=_cond(s_inertia),
        inertia_identifiable=identifiable,
        max_omega=None if kin is None else float(np.max(np.linalg.norm(kin.omega, axis=-1))),
        max_alpha=None if kin is None else float(np.max(np.linalg.norm(kin.alpha, axis=-1))),
    )


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    mode: str
    data_kind: str
    errors: dict
    runtime_ms: float | None
    condition_number: float
    rank_deficient: bool = False
    non_physical: bool = False
    label: str = ""

    @property
    def key(self):
        return (self.method, self.mode, self.data_kind, self.label)


_MODE_ORDER = {m.value: k for k, m in enumerate(EstimationMode)}
_METHOD_ORDER = {"ls": 0, "lm": 1, "tls": 2, "brute": 3}
_KIND_ORDER = {"validation": 0, "measured": 1}


def _row_sort_key(row):
    return (
        _METHOD_ORDER.get(row.method, 99), row.method,
        _MODE_ORDER.get(row.mode, 99), row.mode,
        _KIND_ORDER.get(row.data_kind, 99), row.data_kind,
        row.label,
    )


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {"schema": "pipest.comparison/1", "rows": [asdict(r) for r in self.rows]}

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(ComparisonRow(**r) for r in data["rows"]))

    def to_text(self):
        header = ("method", "mode", "data", "e_m", "e_c", "e_I", "cond", "runtime")
        lines = [header]
        for r in self.rows:
            cells = [r.method, r.mode, r.data_kind]
            for g in GROUPS:
                v = r.errors.get(g)
                cells.append("-" if v is None else f"{v:.5g}")
            runtime = "-" if r.runtime_ms is None else f"{r.runtime_ms:.1f} ms"
            cells += [f"{r.condition_number:.4g}", runtime]
            lines.append(tuple(cells))
        widths = [max(len(line[k]) for line in lines) for k in range(len(header))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in lines
        ) + "\n"

    def plot_series(self):
        """Long-format ``(method, mode, data_kind, group, error)`` records for bar charts."""
        out = []
        for r in self.rows:
            for g in GROUPS:
                if r.errors.get(g) is not None:
                    out.append((r.method, r.mode, r.data_kind, g, r.errors[g]))
        return out


def comparison_row(result, truth, data_kind, label=""):
    report = error_report(result, truth)
    return ComparisonRow(
        method=result.method.value,
        mode=result.mode.value,
        data_kind=data_kind,
        errors={g: getattr(report, g) for g in result.mode.groups if getattr(report, g) is not None},
        runtime_ms=result.runtime * 1e3,
        condition_number=result.condition_number,
        rank_deficient=report.rank_deficient,
        non_physical=report.non_physical,
        label=label,
    )


def build_comparison(results, truth=None):
    """Deterministically ordered table from ``(result, data_kind)`` pairs or prepared rows."""
    rows = []
    for item in results:
        if isinstance(item, ComparisonRow):
            rows.append(item)
            continue
        if truth is None:
            raise MissingTruth("ground truth required to tabulate estimation results")
        result, data_kind = item
        rows.append(comparison_row(result, truth, data_kind))
    return ComparisonTable(tuple(sorted(rows, key=_row_sort_key)))
