"""Payload parameter estimators.

Every solver works on one of three estimation modes. Parameters that are not
estimated are taken from ``known`` (the hand-modeled ground truth):

========== ============================ =========================
mode       estimated                    taken from ``known``
========== ============================ =========================
MASS_ONLY  m                            m*c, inertia
MASS_COM   m, m*c                       inertia
FULL_PIP   m, m*c, inertia              nothing
========== ============================ =========================
"""

import enum
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import InertialParams, build_system, wrench_from_phi
from .errors import (
    DegenerateSystem,
    InsufficientRows,
    MissingKnownParams,
    TlsDegenerate,
    UnsupportedMode,
)


class EstimationMode(enum.Enum):
    MASS_ONLY = "mass"
    MASS_COM = "mass-com"
    FULL_PIP = "full"

    @property
    def free_columns(self):
        return {"mass": (0,), "mass-com": (0, 1, 2, 3), "full": tuple(range(10))}[self.value]

    @property
    def groups(self):
        """Parameter groups this mode estimates."""
        return {"mass": ("mass",), "mass-com": ("mass", "com"),
                "full": ("mass", "com", "inertia")}[self.value]


class Method(enum.Enum):
    LS = "ls"
    TLS = "tls"
    LM = "lm"
    BRUTE = "brute"


def thread_count():
    """Worker threads for parallel solver internals, capped by ``PIPEST_THREADS``."""
    cap = os.environ.get("PIPEST_THREADS")
    if cap:
        return max(1, int(cap))
    return os.cpu_count() or 1


def params_from_phi(phi):
    """Inertial parameters from a full ``phi`` without rejecting non-physical mass.

    The center of mass is NaN when the mass estimate is exactly zero.
    """
    phi = np.asarray(phi, dtype=float)
    mass = phi[0]
    com = phi[1:4] / mass if mass != 0 else np.full(3, np.nan)
    return InertialParams(mass, com, phi[4:])


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Regressor restricted to the free columns, known contributions moved to ``b``."""

    A: np.ndarray
    b: np.ndarray
    sample_count: int
    mode: EstimationMode
    known_phi: np.ndarray

    @property
    def free_columns(self):
        return self.mode.free_columns

    def compose(self, x):
        """Full 10-element phi from the free-parameter vector ``x``."""
        phi = self.known_phi.copy()
        phi[list(self.free_columns)] = x
        return phi

    def every_nth_sample(self, stride):
        """Keep the 6 rows of every ``stride``-th sample."""
        blocks = self.A.reshape(self.sample_count, 6, -1)[::stride]
        rhs = self.b.reshape(self.sample_count, 6)[::stride]
        return ReducedSystem(blocks.reshape(-1, self.A.shape[1]), rhs.reshape(-1),
                             blocks.shape[0], self.mode, self.known_phi)


def _known_phi(mode, known):
    mode = EstimationMode(mode)
    if mode is EstimationMode.FULL_PIP:
        return np.zeros(10) if known is None else known.to_phi()
    if known is None:
        raise MissingKnownParams(f"mode {mode.value!r} needs known parameters for the fixed groups")
    return known.to_phi()


def mask_system(system, mode, known=None):
    """Reduce a :class:`~pipest.core.RegressorSystem` to the free columns of ``mode``."""
    mode = EstimationMode(mode)
    known_phi = _known_phi(mode, known)
    if mode is EstimationMode.FULL_PIP:
        return ReducedSystem(system.A, system.b, system.sample_count, mode, known_phi)
    free = list(mode.free_columns)
    fixed = [j for j in range(10) if j not in free]
    b = system.b - system.A[:, fixed] @ known_phi[fixed]
    return ReducedSystem(system.A[:, free], b, system.sample_count, mode, known_phi)


@dataclass(frozen=True, eq=False)
class EstimationResult:
    params: InertialParams
    phi: np.ndarray
    residual_norm: float
    iterations: int
    runtime: float  # [s]
    condition_number: float
    method: Method
    mode: EstimationMode
    rank: int
    rank_deficient: bool = False
    converged: bool = True
    extras: dict = field(default_factory=dict)

    def same_estimate(self, other):
        """Equality of everything except the runtime."""
        return (
            np.array_equal(self.phi, other.phi)
            and self.residual_norm == other.residual_norm
            and self.iterations == other.iterations
            and self.condition_number == other.condition_number
            and self.method == other.method and self.mode == other.mode
            and self.rank == other.rank and self.rank_deficient == other.rank_deficient
            and self.converged == other.converged
        )


def _condition(s):
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def rank_tolerance(rows):
    """Relative singular-value threshold for numerical rank."""
    return rows * np.finfo(float).eps * 16


def _elapsed(start):
    return max(time.perf_counter() - start, 1e-9)


def solve_least_squares(red, scale_columns=False):
    """Ordinary least squares through an SVD-based (rank-revealing) solver.

    Rank-deficient systems yield the minimum-norm solution with
    ``rank_deficient`` set. The condition number is that of the reduced
    matrix, after column scaling when enabled.
    """
    start = time.perf_counter()
    A, b = red.A, red.b
    if A.shape[0] < A.shape[1]:
        raise DegenerateSystem(f"{A.shape[0]} rows for {A.shape[1]} unknowns")
    if not np.any(A):
        raise DegenerateSystem("regressor is identically zero")
    scale = np.ones(A.shape[1])
    if scale_columns:
        norms = np.linalg.norm(A, axis=0)
        scale = np.where(norms > 0, norms, 1.0)
    x, _, rank, s = scipy.linalg.lstsq(
        A / scale, b, cond=rank_tolerance(A.shape[0]), lapack_driver="gelsd"
    )
    x = x / scale
    phi = red.compose(x)
    return EstimationResult(
        params=params_from_phi(phi),
        phi=phi,
        residual_norm=float(np.linalg.norm(A @ x - b)),
        iterations=1,
        runtime=_elapsed(start),
        condition_number=_condition(s),
        method=Method.LS,
        mode=red.mode,
        rank=int(rank),
        rank_deficient=bool(rank < A.shape[1]),
    )


def tls_cost(A, b, x):
    """Total-least-squares objective ``||A x - b||^2 / (1 + ||x||^2)``."""
    r = A @ x - b
    return float(r @ r / (1.0 + x @ x))


def solve_total_least_squares(red, svd_mode="fast", stride=10):
    """Classical total least squares from the SVD of ``[A | b]``.

    ``svd_mode="fast"`` keeps every ``stride``-th sample and uses the
    divide-and-conquer SVD; ``"exact"`` uses all rows and the QR-iteration SVD.
    """
    start = time.perf_counter()
    if svd_mode == "fast":
        used = red.every_nth_sample(stride) if stride > 1 else red
        svd = lambda m: np.linalg.svd(m, full_matrices=False)  # noqa: E731
    elif svd_mode == "exact":
        used = red
        svd = lambda m: scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")  # noqa: E731
    else:
        raise ValueError(f"unknown svd mode {svd_mode!r}")
    A, b = used.A, used.b
    n = A.shape[1]
    if A.shape[0] <= n + 1:
        raise InsufficientRows(f"TLS needs more than {n + 1} rows, got {A.shape[0]}")
    _, _, vt = svd(np.column_stack([A, b]))
    v = vt[-1]
    if abs(v[n]) < 1e-12:
        raise TlsDegenerate("smallest right singular vector has no component along b")
    x = -v[:n] / v[n]
    s_a = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s_a > s_a[0] * rank_tolerance(A.shape[0])))
    phi = red.compose(x)
    return EstimationResult(
        params=params_from_phi(phi),
        phi=phi,
        residual_norm=float(np.linalg.norm(red.A @ x - red.b)),
        iterations=1,
        runtime=_elapsed(start),
        condition_number=_condition(s_a),
        method=Method.TLS,
        mode=red.mode,
        rank=rank,
        rank_deficient=rank < n,
        extras={"rows_used": int(A.shape[0]), "tls_cost": tls_cost(A, b, x), "svd_mode": svd_mode},
    )


@dataclass(frozen=True)
class LMOptions:
    rel_step: float = 1e-7
    abs_step: float = 1e-9
    damping: float = 1e-3
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iterations: int = 200


def _residual_fn(kin, wrench, mode, known_phi):
    free = list(EstimationMode(mode).free_columns)
    measured = wrench.vector

    def residual(x):
        phi = known_phi.copy()
        phi[free] = x
        return (wrench_from_phi(phi, kin).vector - measured).reshape(-1)

    return residual


def _forward_jacobian(residual, x, r0, opts, pool):
    def column(j):
        h = max(opts.rel_step * abs(x[j]), opts.abs_step)
        xh = x.copy()
        xh[j] += h
        return (residual(xh) - r0) / (xh[j] - x[j])

    cols = list(pool.map(column, range(x.size))) if pool else [column(j) for j in range(x.size)]
    return np.column_stack(cols)


def solve_levenberg_marquardt(kin, wrench, mode, known=None, options=LMOptions()):
    """Damped Gauss-Newton on the Newton-Euler residual, starting from phi = 0.

    The Jacobian is taken by forward differences and the damping is
    Marquardt's (scaled by ``diag(J^T J)``). A run that hits
    ``max_iterations`` is returned with ``converged=False``.
    """
    start = time.perf_counter()
    mode = EstimationMode(mode)
    known_phi = _known_phi(mode, known)
    residual = _residual_fn(kin, wrench, mode, known_phi)
    x = np.zeros(len(mode.free_columns))
    r = residual(x)
    cost = float(r @ r)
    lam = options.damping
    workers = min(thread_count(), x.size)
    converged = False
    iterations = 0
    with ThreadPoolExecutor(workers) if workers > 1 else _NullPool() as pool:
        J = _forward_jacobian(residual, x, r, options, pool)
        if not np.any(J):
            raise DegenerateSystem("residual does not depend on the free parameters")
        while iterations < options.max_iterations and not converged:
            iterations += 1
            H = J.T @ J
            grad = J.T @ r
            diag = np.diag(H).copy()
            diag[diag <= 0] = 1.0
            while True:
                try:
                    step = -np.linalg.solve(H + lam * np.diag(diag), grad)
                except np.linalg.LinAlgError:
                    step = -np.linalg.lstsq(H + lam * np.diag(diag), grad, rcond=None)[0]
                small_step = bool(np.linalg.norm(step) <= options.xtol * (np.linalg.norm(x) + options.xtol))
                x_new = x + step
                r_new = residual(x_new)
                cost_new = float(r_new @ r_new)
                if cost_new < cost:
                    decrease = (cost - cost_new) / cost
                    x, r, cost = x_new, r_new, cost_new
                    lam = max(lam / 10.0, 1e-20)
                    converged = small_step or bool(decrease < options.ftol) or cost == 0.0
                    break
                lam *= 10.0
                if small_step or lam > 1e20:
                    # no representable improvement left along the damped direction
                    converged = True
                    break
            if not converged:
                J = _forward_jacobian(residual, x, r, options, pool)
    s = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(s > s[0] * rank_tolerance(J.shape[0])))
    phi = known_phi.copy()
    phi[list(mode.free_columns)] = x
    return EstimationResult(
        params=params_from_phi(phi),
        phi=phi,
        residual_norm=float(np.sqrt(cost)),
        iterations=iterations,
        runtime=_elapsed(start),
        condition_number=_condition(s),
        method=Method.LM,
        mode=mode,
        rank=rank,
        rank_deficient=rank < x.size,
        converged=converged,
        extras={} if converged else {"warning": "maximum iterations reached"},
    )


class _NullPool:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


@dataclass(frozen=True)
class GridSpec:
    """Regular grid ``center * (1 + linspace(-span, span, points))`` per dimension.

    ``points=None`` picks 101 for mass only and 11 per dimension for mass and
    center of mass.
    """

    span: float = 0.2
    points: int | None = None


def grid_axes(mode, known, grid=GridSpec()):
    """1-D grids for (m,) or (m, cx, cy, cz) around the known parameters."""
    mode = EstimationMode(mode)
    if mode is EstimationMode.FULL_PIP:
        raise UnsupportedMode("brute force over the full parameter set is not supported")
    if known is None:
        raise MissingKnownParams("brute force needs known parameters to center the grid")
    points = grid.points or (101 if mode is EstimationMode.MASS_ONLY else 11)
    rel = np.linspace(-grid.span, grid.span, points)
    axes = [known.mass * (1.0 + rel)]
    if mode is EstimationMode.MASS_COM:
        com_scale = float(np.linalg.norm(known.com)) or 0.05
        for c in known.com:
            # a zero component gets a span proportional to the whole offset
            half = abs(c) if c != 0 else com_scale
            axes.append(c + half * rel)
    return axes


def solve_brute_force(kin, wrench, mode, known, grid=GridSpec(), chunk_elements=4_000_000):
    """Exhaustive search of the squared wrench residual on a regular grid.

    Returns the grid point with the smallest cost (first one on ties).
    """
    start = time.perf_counter()
    mode = EstimationMode(mode)
    axes = grid_axes(mode, known, grid)
    system = build_system(kin, wrench)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    known_phi = known.to_phi()
    phis = np.tile(known_phi, (mesh.shape[0], 1))
    phis[:, 0] = mesh[:, 0]
    if mode is EstimationMode.MASS_COM:
        phis[:, 1:4] = mesh[:, :1] * mesh[:, 1:4]
    # The model is linear in phi: evaluate it once per varied coordinate (plus
    # the fixed part) and superpose, so every grid point sees every sample.
    free = list(mode.free_columns)
    fixed_phi = known_phi.copy()
    fixed_phi[free] = 0.0
    basis = np.stack([wrench_from_phi(np.eye(10)[j], kin).vector.reshape(-1) for j in free])
    target = wrench.vector.reshape(-1) - wrench_from_phi(fixed_phi, kin).vector.reshape(-1)
    chunk = max(1, chunk_elements // target.size)

    def costs(lo):
        d = phis[lo:lo + chunk, free] @ basis - target
        return np.einsum("gk,gk->g", d, d)

    starts = range(0, phis.shape[0], chunk)
    workers = min(thread_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(costs, starts))
    else:
        parts = [costs(lo) for lo in starts]
    cost = np.concatenate(parts)
    best = int(np.argmin(cost))
    phi = phis[best]
    sub = mask_system(system, mode, known)
    s = np.linalg.svd(sub.A, compute_uv=False)
    rank = int(np.sum(s > s[0] * rank_tolerance(sub.A.shape[0])))
    return EstimationResult(
        params=InertialParams(phi[0], mesh[best, 1:4] if mode is EstimationMode.MASS_COM else known.com,
                              phi[4:]),
        phi=phi,
        residual_norm=float(np.sqrt(cost[best])),
        iterations=int(cost.size),
        runtime=_elapsed(start),
        condition_number=_condition(s),
        method=Method.BRUTE,
        mode=mode,
        rank=rank,
        rank_deficient=rank < len(mode.free_columns),
        extras={"grid_points": int(cost.size), "grid_index": best},
    )


def estimate(kin, wrench, method, mode, known=None, *, tls_svd="fast", tls_stride=10,
             lm_options=LMOptions(), grid=GridSpec()):
    """Run one estimator on kinematics and measured wrenches."""
    method, mode = Method(method), EstimationMode(mode)
    if method is Method.BRUTE:
        return solve_brute_force(kin, wrench, mode, known, grid)
    if method is Method.LM:
        return solve_levenberg_marquardt(kin, wrench, mode, known, lm_options)
    red = mask_system(build_system(kin, wrench), mode, known)
    if method is Method.LS:
        return solve_least_squares(red)
    return solve_total_least_squares(red, tls_svd, tls_stride)
