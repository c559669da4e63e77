"""Payload model: inertial parameters, Newton-Euler wrench and its linear regressor.

Conventions used throughout the package:

* every vector is expressed in the force/torque sensor frame;
* ``g`` is gravity in the sensor frame, ``R.T @ (0, 0, -GRAVITY)`` for a
  sensor-to-world orientation ``R``;
* ``a`` is the gravity-free acceleration of the sensor origin;
* the inertia tensor is taken about the sensor origin and stored as its six
  unique entries in the order (xx, xy, xz, yy, yz, zz);
* the linear parameter vector is ``phi = [m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRecording, InvalidParams, NonFiniteValue, NonMonotonicTime

GRAVITY = 9.80665
GRAVITY_WORLD = np.array([0.0, 0.0, -GRAVITY])

VECH_LABELS = ("xx", "xy", "xz", "yy", "yz", "zz")
PHI_LABELS = ("m", "mcx", "mcy", "mcz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz")

# Index of each 3x3 entry inside the vech ordering.
_VECH_INDEX = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])


def _frozen(x, shape=None):
    arr = np.array(x, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def vech_to_matrix(vech):
    """Symmetric 3x3 matrix (or stack of them) from (xx, xy, xz, yy, yz, zz)."""
    vech = np.asarray(vech, dtype=float)
    return vech[..., _VECH_INDEX]


def matrix_to_vech(mat):
    """Upper-triangle entries of a 3x3 matrix, averaging the off-diagonal pairs."""
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + np.swapaxes(mat, -1, -2))
    return np.stack(
        [sym[..., 0, 0], sym[..., 0, 1], sym[..., 0, 2],
         sym[..., 1, 1], sym[..., 1, 2], sym[..., 2, 2]],
        axis=-1,
    )


def skew(v):
    """Cross-product matrix, ``skew(v) @ u == np.cross(v, u)``. Works on stacks."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class InertialParams:
    """Mass [kg], center of mass [m] and inertia about the sensor origin [kg m^2].

    ``inertia`` holds the six unique tensor entries; use :attr:`inertia_matrix`
    for the 3x3 form. Non-physical values are accepted on purpose, see
    :func:`physical_consistency`.
    """

    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", _frozen(self.com, (3,)))
        object.__setattr__(self, "inertia", _frozen(self.inertia, (6,)))

    @classmethod
    def from_matrix(cls, mass, com, inertia_matrix):
        return cls(mass, com, matrix_to_vech(inertia_matrix))

    @classmethod
    def point_mass(cls, mass, com=(0.0, 0.0, 0.0)):
        return cls(mass, com, np.zeros(6))

    @classmethod
    def from_phi(cls, phi):
        """Inverse of :meth:`to_phi`. Raises :class:`InvalidParams` if ``phi[0] <= 0``."""
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (10,):
            raise ValueError(f"phi must have 10 entries, got shape {phi.shape}")
        if not phi[0] > 0:
            raise InvalidParams(f"mass must be positive to recover the center of mass, got {phi[0]}")
        return cls(phi[0], phi[1:4] / phi[0], phi[4:])

    @property
    def inertia_matrix(self):
        return vech_to_matrix(self.inertia)

    def to_phi(self):
        return np.concatenate([[self.mass], self.mass * self.com, self.inertia])

    def rotated(self, rot):
        """Same payload seen from a sensor frame rotated by ``rot``."""
        rot = np.asarray(rot, dtype=float)
        return InertialParams.from_matrix(
            self.mass, rot @ self.com, rot @ self.inertia_matrix @ rot.T
        )

    def __eq__(self, other):
        if not isinstance(other, InertialParams):
            return NotImplemented
        return (
            self.mass == other.mass
            and np.array_equal(self.com, other.com)
            and np.array_equal(self.inertia, other.inertia)
        )

    def __repr__(self):
        return (
            f"InertialParams(mass={self.mass!r}, com={self.com.tolist()!r}, "
            f"inertia={self.inertia.tolist()!r})"
        )


@dataclass(frozen=True, eq=False)
class Kinematics:
    """Kinematic state of the sensor frame for one sample or a stack of samples.

    All vector fields have shape ``(3,)`` for a single sample or ``(N, 3)``
    for ``N`` samples; ``t`` is a scalar or ``(N,)``.
    """

    t: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        for name in ("v", "omega", "a", "alpha", "g"):
            arr = _frozen(getattr(self, name))
            if arr.shape[-1:] != (3,):
                raise ValueError(f"{name} must have a trailing dimension of 3, got {arr.shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", _frozen(self.t))
        shapes = {getattr(self, n).shape for n in ("v", "omega", "a", "alpha", "g")}
        if len(shapes) != 1 or self.t.shape != self.v.shape[:-1]:
            raise ValueError("kinematic fields have inconsistent shapes")

    @classmethod
    def static(cls, g=GRAVITY_WORLD, t=0.0):
        zero = np.zeros(3)
        return cls(t=t, v=zero, omega=zero, a=zero, alpha=zero, g=g)

    @classmethod
    def stack(cls, samples):
        samples = list(samples)
        return cls(**{
            name: np.stack([getattr(s, name) for s in samples])
            for name in ("t", "v", "omega", "a", "alpha", "g")
        })

    @property
    def is_batch(self):
        return self.v.ndim == 2

    def __len__(self):
        if not self.is_batch:
            raise TypeError("single kinematic sample has no length")
        return self.v.shape[0]

    def __getitem__(self, idx):
        return Kinematics(
            t=self.t[idx], v=self.v[idx], omega=self.omega[idx],
            a=self.a[idx], alpha=self.alpha[idx], g=self.g[idx],
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def rotated(self, rot):
        rot = np.asarray(rot, dtype=float)
        return Kinematics(
            t=self.t, v=self.v @ rot.T, omega=self.omega @ rot.T,
            a=self.a @ rot.T, alpha=self.alpha @ rot.T, g=self.g @ rot.T,
        )


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force [N] and torque [N m] in the sensor frame, single or stacked."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", _frozen(self.force))
        object.__setattr__(self, "torque", _frozen(self.torque))
        if self.force.shape != self.torque.shape or self.force.shape[-1:] != (3,):
            raise ValueError("force and torque must share a shape ending in 3")

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=float)
        return cls(vec[..., :3], vec[..., 3:])

    @property
    def vector(self):
        """``[fx, fy, fz, tx, ty, tz]`` along the last axis."""
        return np.concatenate([self.force, self.torque], axis=-1)

    def __len__(self):
        if self.force.ndim != 2:
            raise TypeError("single wrench has no length")
        return self.force.shape[0]

    def __getitem__(self, idx):
        return Wrench(self.force[idx], self.torque[idx])


def wrench_from_phi(phi, kin):
    """Evaluate the Newton-Euler payload wrench directly from ``phi``.

    ``phi`` may carry leading batch dimensions that broadcast against the
    sample dimension of ``kin``, e.g. ``phi`` of shape ``(G, 1, 10)`` with
    ``N`` samples gives a wrench of shape ``(G, N, 3)``. ``m*c`` is used as a
    single quantity so ``m = 0`` is allowed.
    """
    phi = np.asarray(phi, dtype=float)
    m = phi[..., 0:1]
    mc = phi[..., 1:4]
    inertia = vech_to_matrix(phi[..., 4:10])
    w = kin.omega
    force = m * kin.a + m * kin.g + np.cross(kin.alpha, mc) + np.cross(w, np.cross(w, mc))
    i_alpha = (inertia @ kin.alpha[..., None])[..., 0]
    i_omega = (inertia @ w[..., None])[..., 0]
    torque = i_alpha + np.cross(w, i_omega) + np.cross(mc, kin.a) + np.cross(mc, kin.g)
    return Wrench(force, torque)


def newton_euler_wrench(params, kin):
    """Force and torque a payload exerts on the sensor for the given motion.

    Parameters
    ----------
    params : InertialParams
    kin : Kinematics
        One sample or a stack of samples.

    Returns
    -------
    Wrench
        Same leading shape as ``kin``.
    """
    return wrench_from_phi(params.to_phi(), kin)


def _inertia_action(w):
    """Matrix ``L(w)`` with ``I @ w == L(w) @ vech(I)``."""
    wx, wy, wz = w[..., 0], w[..., 1], w[..., 2]
    out = np.zeros(w.shape[:-1] + (3, 6))
    out[..., 0, 0] = wx
    out[..., 0, 1] = wy
    out[..., 0, 2] = wz
    out[..., 1, 1] = wx
    out[..., 1, 3] = wy
    out[..., 1, 4] = wz
    out[..., 2, 2] = wx
    out[..., 2, 4] = wy
    out[..., 2, 5] = wz
    return out


def regressor_block(kin):
    """Matrix ``A`` with ``A @ params.to_phi() == newton_euler_wrench(params, kin).vector``.

    Returns shape ``(6, 10)`` for one sample or ``(N, 6, 10)`` for a stack.
    Rows are (fx, fy, fz, tx, ty, tz); columns follow :data:`PHI_LABELS`.
    """
    lead = kin.v.shape[:-1]
    block = np.zeros(lead + (6, 10))
    accel = kin.a + kin.g
    sw = skew(kin.omega)
    block[..., 0:3, 0] = accel
    block[..., 0:3, 1:4] = skew(kin.alpha) + sw @ sw
    block[..., 3:6, 1:4] = -skew(accel)
    block[..., 3:6, 4:10] = _inertia_action(kin.alpha) + sw @ _inertia_action(kin.omega)
    return block


@dataclass(frozen=True, eq=False)
class RegressorSystem:
    """Stacked regressor ``A`` (6N x 10) and wrench vector ``b`` (6N)."""

    A: np.ndarray
    b: np.ndarray
    sample_count: int

    @property
    def blocks(self):
        """``A`` viewed as ``(N, 6, 10)``."""
        return self.A.reshape(self.sample_count, 6, -1)


def build_system(kin, wrench):
    """Stack per-sample regressor blocks and wrenches in time order.

    Parameters
    ----------
    kin : Kinematics
        Stacked samples (a single sample is promoted to a stack of one).
    wrench : Wrench
        Matching measured wrenches.

    Raises
    ------
    EmptyRecording, NonMonotonicTime, NonFiniteValue
    """
    if not kin.is_batch:
        kin = Kinematics.stack([kin])
        wrench = Wrench(np.atleast_2d(wrench.force), np.atleast_2d(wrench.torque))
    n = len(kin)
    if n == 0:
        raise EmptyRecording("no samples to build a regressor system from")
    if len(wrench) != n:
        raise ValueError(f"{n} kinematic samples but {len(wrench)} wrenches")
    bad_t = np.flatnonzero(np.diff(kin.t) <= 0)
    if bad_t.size:
        raise NonMonotonicTime(int(bad_t[0]) + 1)
    fields = np.concatenate(
        [kin.t[:, None], kin.v, kin.omega, kin.a, kin.alpha, kin.g, wrench.vector], axis=1
    )
    bad = np.flatnonzero(~np.isfinite(fields).all(axis=1))
    if bad.size:
        raise NonFiniteValue(int(bad[0]))
    A = regressor_block(kin).reshape(6 * n, 10)
    b = wrench.vector.reshape(6 * n)
    return RegressorSystem(A=A, b=b, sample_count=n)


@dataclass(frozen=True)
class ConsistencyReport:
    mass_positive: bool
    inertia_psd: bool
    triangle_inequality: bool
    principal_moments: tuple

    @property
    def consistent(self):
        return self.mass_positive and self.inertia_psd and self.triangle_inequality


def physical_consistency(params, tol=0.0):
    """Check (without enforcing) mass positivity, inertia PSD and the triangle inequality.

    ``tol`` is an absolute slack on the eigenvalue checks.
    """
    moments = np.linalg.eigvalsh(params.inertia_matrix)
    l1, l2, l3 = moments
    # eigvalsh sorts ascending, so only the largest moment can violate it.
    triangle = bool(l1 + l2 >= l3 - tol)
    return ConsistencyReport(
        mass_positive=params.mass > 0,
        inertia_psd=bool(l1 >= -tol),
        triangle_inequality=triangle,
        principal_moments=tuple(float(x) for x in moments),
    )
