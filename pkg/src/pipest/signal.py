"""From raw pose/wrench recordings to kinematic samples.

Pipeline used by :func:`differentiate_kinematics`:

1. body-frame angular velocity from the logarithm of relative quaternions,
   linear velocity by central differences of the position;
2. Savitzky-Golay smoothing of the six velocity channels;
3. accelerations by central differences of the smoothed velocities;
4. gravity attached per sample from the orientation.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal
from scipy.spatial.transform import Rotation

from .core import GRAVITY_WORLD, Kinematics, Wrench
from .errors import (
    EmptyRecording,
    FractionOutOfRange,
    InvalidWindow,
    NonFiniteValue,
    NonMonotonicTime,
    NonUniformRate,
    TooFewSamples,
)

RATE_TOLERANCE = 1e-6  # [s] allowed deviation of each time step from 1/rate


@dataclass(frozen=True, eq=False)
class Recording:
    """Uniformly sampled pose and wrench streams.

    ``position`` is world-frame [m], ``quat`` the sensor-to-world orientation
    as (w, x, y, z), ``force``/``torque`` are sensor-frame. Quaternions are
    renormalized on construction.
    """

    rate: float
    t: np.ndarray
    position: np.ndarray
    quat: np.ndarray
    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        n = t.size
        arrays = {}
        for name, width in (("position", 3), ("quat", 4), ("force", 3), ("torque", 3)):
            arr = np.array(getattr(self, name), dtype=float).reshape(n, width)
            arrays[name] = arr
        if n == 0:
            raise EmptyRecording("recording has no samples")
        bad = np.flatnonzero(~np.isfinite(np.column_stack([t] + list(arrays.values()))).all(axis=1))
        if bad.size:
            raise NonFiniteValue(int(bad[0]))
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise NonMonotonicTime(int(np.flatnonzero(dt <= 0)[0]) + 1)
        if not self.rate > 0:
            raise NonUniformRate(f"rate must be positive, got {self.rate}")
        if dt.size and np.max(np.abs(dt - 1.0 / self.rate)) > RATE_TOLERANCE:
            k = int(np.argmax(np.abs(dt - 1.0 / self.rate)))
            raise NonUniformRate(f"sample spacing {dt[k]!r} s at index {k + 1} deviates from 1/rate")
        norms = np.linalg.norm(arrays["quat"], axis=1)
        if np.any(norms == 0):
            raise NonFiniteValue(int(np.flatnonzero(norms == 0)[0]), "zero-norm quaternion")
        # Leave already-normalized rows untouched so re-wrapping a recording is bit-stable.
        off = np.abs(norms - 1.0) > 1e-15
        arrays["quat"][off] /= norms[off, None]
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "t", t)
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        for name in ("t", "position", "quat", "force", "torque"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.t.size

    def __getitem__(self, idx):
        if not isinstance(idx, slice) or idx.step not in (None, 1):
            raise TypeError("recordings only support contiguous slicing")
        return Recording(self.rate, self.t[idx], self.position[idx], self.quat[idx],
                         self.force[idx], self.torque[idx])

    @property
    def rotation(self):
        return Rotation.from_quat(self.quat, scalar_first=True)

    @property
    def wrench(self):
        return Wrench(self.force, self.torque)

    def with_wrench(self, wrench):
        return replace(self, force=wrench.force, torque=wrench.torque)


@dataclass(frozen=True)
class SavGolSpec:
    """Velocity smoothing settings.

    ``accel_window`` enables an optional second Savitzky-Golay pass on the
    differentiated accelerations (stronger smoothing); it is off by default.
    """

    order: int = 3
    window: int = 11
    accel_window: int | None = None


@dataclass(frozen=True)
class NoiseSpec:
    sigma_force: float = 0.0  # [N]
    sigma_torque: float = 0.0  # [N m]
    position_step: float = 0.0  # [m], quantization of positions
    quat_step: float = 0.0  # quantization of quaternion components


def _check_window(order, window):
    if window % 2 == 0:
        raise InvalidWindow(f"Savitzky-Golay window must be odd, got {window}")
    if window <= order:
        raise InvalidWindow(f"window {window} must exceed polynomial order {order}")


def sav_gol_filter(x, order=3, window=11):
    """Least-squares polynomial smoothing of a 1-D signal (or of each column).

    Edge samples are taken from the polynomial fitted to the first/last full
    window, so the output has the input length.

    Parameters
    ----------
    x : array_like, shape (N,) or (N, C)
    order : int
        Polynomial order.
    window : int
        Odd window length, larger than ``order``.
    """
    _check_window(order, window)
    x = np.asarray(x, dtype=float)
    if x.shape[0] < window:
        raise InvalidWindow(f"signal of length {x.shape[0]} is shorter than the window {window}")
    return scipy.signal.savgol_filter(x, window, order, axis=0, mode="interp")


def relative_rotvec(rot_from, rot_to):
    """Rotation vector of ``rot_from^-1 * rot_to`` (expressed in the ``rot_from`` frame)."""
    return (rot_from.inv() * rot_to).as_rotvec()


def body_angular_velocity(rot, rate):
    """Body-frame angular velocity from a uniformly sampled orientation stream.

    Central differences ``log(q[k-1]^-1 q[k+1]) * rate / 2`` inside, one-sided
    differences at the first and last sample.
    """
    n = len(rot)
    omega = np.empty((n, 3))
    omega[1:-1] = relative_rotvec(rot[:-2], rot[2:]) * (rate / 2.0)
    omega[0] = relative_rotvec(rot[0], rot[1]) * rate
    omega[-1] = relative_rotvec(rot[n - 2], rot[n - 1]) * rate
    return omega


def differentiate_kinematics(rec, smoothing=SavGolSpec()):
    """Sensor-frame velocities, accelerations and gravity for every sample of ``rec``.

    Raises
    ------
    TooFewSamples
        If the recording is shorter than ``2 * window + 5`` samples.
    """
    _check_window(smoothing.order, smoothing.window)
    n = len(rec)
    if n < 2 * smoothing.window + 5:
        raise TooFewSamples(f"need at least {2 * smoothing.window + 5} samples, got {n}")
    dt = 1.0 / rec.rate
    rot = rec.rotation

    omega = body_angular_velocity(rot, rec.rate)
    v_world = np.gradient(rec.position, dt, axis=0)

    omega = sav_gol_filter(omega, smoothing.order, smoothing.window)
    v_world = sav_gol_filter(v_world, smoothing.order, smoothing.window)

    # Body-frame angular acceleration is the derivative of body-frame omega;
    # the linear acceleration is differentiated in the world frame and rotated.
    alpha = np.gradient(omega, dt, axis=0)
    a_world = np.gradient(v_world, dt, axis=0)
    if smoothing.accel_window is not None:
        alpha = sav_gol_filter(alpha, smoothing.order, smoothing.accel_window)
        a_world = sav_gol_filter(a_world, smoothing.order, smoothing.accel_window)

    return Kinematics(
        t=rec.t,
        v=rot.apply(v_world, inverse=True),
        omega=omega,
        a=rot.apply(a_world, inverse=True),
        alpha=alpha,
        g=rot.apply(np.broadcast_to(GRAVITY_WORLD, (n, 3)), inverse=True),
    )


def trim_count(n, fraction):
    """Number of samples removed from each end by :func:`trim_ends`."""
    if not 0.0 <= fraction < 0.5:
        raise FractionOutOfRange(f"trim fraction must be in [0, 0.5), got {fraction}")
    # round() guards against products like 0.1 * 30 == 3.0000000000000004
    return math.floor(round(fraction * n, 9))


def trim_ends(samples, fraction=0.1):
    """Drop ``floor(fraction * N)`` samples from both ends of any sliceable sequence."""
    n = len(samples)
    k = trim_count(n, fraction)
    return samples[k:n - k]


def inject_noise(rec, model, seed):
    """Copy of ``rec`` with Gaussian wrench noise and optional pose quantization.

    Zero standard deviations and zero steps leave the corresponding streams
    bit-identical. Quantized quaternions are renormalized.
    """
    rng = np.random.default_rng(seed)
    n = len(rec)
    force, torque = rec.force, rec.torque
    position, quat = rec.position, rec.quat
    # Draw both noise blocks unconditionally so each stream's noise depends only on the seed.
    force_noise = rng.standard_normal((n, 3))
    torque_noise = rng.standard_normal((n, 3))
    if model.sigma_force > 0:
        force = force + model.sigma_force * force_noise
    if model.sigma_torque > 0:
        torque = torque + model.sigma_torque * torque_noise
    if model.position_step > 0:
        position = np.round(position / model.position_step) * model.position_step
    if model.quat_step > 0:
        quat = np.round(quat / model.quat_step) * model.quat_step
    return Recording(rec.rate, rec.t, position, quat, force, torque)
