"""End-to-end helpers shared by the command line and the demo scripts."""

from .core import newton_euler_wrench
from .estimators import estimate
from .signal import NoiseSpec, SavGolSpec, differentiate_kinematics, inject_noise, trim_ends
from .synth import make_scenario, simulate

# Pose discretization of the emulated robot controller: 2 um on positions and
# 2e-7 on quaternion components.
CONTROLLER_QUANTIZATION = NoiseSpec(position_step=2e-6, quat_step=2e-7)

# Wrench noise of the emulated force/torque sensor.
SENSOR_NOISE = NoiseSpec(sigma_force=0.1, sigma_torque=0.01)


def prepare(rec, smoothing=SavGolSpec(), trim=0.1):
    """Differentiate a recording and trim both ends; returns ``(kinematics, wrench)``."""
    kin = differentiate_kinematics(rec, smoothing)
    return trim_ends(kin, trim), trim_ends(rec, trim).wrench


def validation_recording(rec, params, smoothing=SavGolSpec()):
    """Recording whose wrench columns are model predictions from its own differentiated poses."""
    kin = differentiate_kinematics(rec, smoothing)
    return rec.with_wrench(newton_euler_wrench(params, kin))


def scenario_recordings(kind, seed=0, truth=None, duration=None, rate=1000.0):
    """Validation and measured recordings of one scenario.

    Both share the quantized poses of the emulated controller. The validation
    recording carries the noiseless wrench of the true motion, the measured
    one adds sensor noise on top.
    """
    scenario = make_scenario(kind, truth=truth, seed=seed, noise=CONTROLLER_QUANTIZATION,
                             duration=duration, rate=rate)
    run = simulate(scenario)
    measured = inject_noise(run.recording, SENSOR_NOISE, seed + 1)
    return scenario, {"validation": run.recording, "measured": measured}


def estimate_recording(rec, method, mode, known=None, smoothing=SavGolSpec(), trim=0.1, **options):
    kin, wrench = prepare(rec, smoothing, trim)
    return estimate(kin, wrench, method, mode, known, **options)
