//! Open-loop sinusoidal lock-on benchmark: a PID speed controller tracks a
//! sinusoidal rotation reference through the lagged motor, and a frequency
//! ratio sweep maps the steady VIV amplitude response.

use std::f64::consts::PI;

use crate::actuator::{ActuationPath, MotorParams, MotorState};
use crate::analysis;
use crate::error::{Result, VivError};
use crate::plant::{NoRotation, Plant, PlantState, PHYSICS_DT_S};

/// Sinusoidal normalized-speed command alpha(t) = alpha0 cos(2 pi f_r t).
#[derive(Debug, Clone, Copy)]
pub struct SineCommand {
    pub alpha0: f64,
    pub fr_hz: f64,
}

impl SineCommand {
    pub fn validated(self) -> Result<Self> {
        // Negative amplitudes are a pure phase shift; they are accepted so
        // the sign-invariance of the sweep is directly expressible.
        if !self.alpha0.is_finite() {
            return Err(VivError::ParameterDomain(format!(
                "alpha0 must be finite, got {}",
                self.alpha0
            )));
        }
        if !(self.fr_hz.is_finite() && self.fr_hz > 0.0) {
            return Err(VivError::ParameterDomain(format!(
                "fr_hz must be > 0, got {}",
                self.fr_hz
            )));
        }
        Ok(self)
    }
}

/// PID gains in duty per unit normalized-speed error.
#[derive(Debug, Clone, Copy)]
pub struct SpeedPidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
}

impl SpeedPidGains {
    pub fn validated(self) -> Result<Self> {
        if self.kp < 0.0 || self.ki < 0.0 || self.kd < 0.0 {
            return Err(VivError::ParameterDomain("PID gains must be >= 0".into()));
        }
        if !(self.integral_limit > 0.0) {
            return Err(VivError::ParameterDomain(
                "integral_limit must be > 0".into(),
            ));
        }
        Ok(self)
    }

    /// One documented tuning pass against the motor model: proportional gain
    /// from a 10 f_n closed-loop bandwidth target (5 f_n leaves too little
    /// speed authority above f_n for the sweep to reach its 1.6 f_n point),
    /// integral gain kp * f_n, no derivative action, integral clamp sized to
    /// the duty limit.
    pub fn tuned_for(motor: &MotorParams, velocity_m_per_s: f64, diameter_m: f64, f_n_hz: f64) -> Self {
        let plant_gain = (motor.omega_max_rad_per_s / motor.duty_limit) * diameter_m
            / (2.0 * velocity_m_per_s);
        let wc = 2.0 * PI * 10.0 * f_n_hz;
        let kp = ((wc * motor.lag_tau_s).powi(2) + 1.0).sqrt() / plant_gain;
        let ki = kp * f_n_hz;
        SpeedPidGains {
            kp,
            ki,
            kd: 0.0,
            integral_limit: motor.duty_limit / ki,
        }
    }
}

/// Reference rotational speed Omega_ref = (2V/D) alpha0 cos(2 pi f_r t).
pub fn sinusoidal_reference(t_s: f64, cmd: &SineCommand, velocity_m_per_s: f64, diameter_m: f64) -> f64 {
    (2.0 * velocity_m_per_s / diameter_m) * cmd.alpha0 * (2.0 * PI * cmd.fr_hz * t_s).cos()
}

/// Integral and derivative memory of the speed loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID update on the normalized speed error; returns the clamped duty.
pub fn pid_speed_control(
    omega_meas: f64,
    omega_ref: f64,
    gains: &SpeedPidGains,
    dt_s: f64,
    state: &mut PidState,
    velocity_m_per_s: f64,
    diameter_m: f64,
    duty_limit: f64,
) -> f64 {
    let err = (omega_ref - omega_meas) * diameter_m / (2.0 * velocity_m_per_s);
    state.integral = (state.integral + err * dt_s).clamp(-gains.integral_limit, gains.integral_limit);
    let deriv = match state.prev_error {
        Some(prev) => (err - prev) / dt_s,
        None => 0.0,
    };
    state.prev_error = Some(err);
    let duty = gains.kp * err + gains.ki * state.integral + gains.kd * deriv;
    duty.clamp(-duty_limit, duty_limit)
}

/// Outcome of one forced run.
#[derive(Debug, Clone, Copy)]
pub struct ForcedResponse {
    pub a_over_d: f64,
    pub tracking_rms: f64,
}

/// One sweep point.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub ratio: f64,
    pub a_over_d: f64,
    pub tracking_rms: f64,
}

/// Track a sinusoidal reference on the motor model alone (no plant);
/// returns the steady normalized-speed tracking error RMS.
pub fn tracking_rms_on_motor(
    motor: &MotorParams,
    cmd: &SineCommand,
    gains: &SpeedPidGains,
    velocity_m_per_s: f64,
    diameter_m: f64,
    duration_s: f64,
) -> f64 {
    let dt = PHYSICS_DT_S;
    let steps = (duration_s / dt).round() as usize;
    let mut m = MotorState::at_rest();
    let mut pid = PidState::default();
    let mut errs = Vec::with_capacity(steps);
    let fast = MotorParams {
        command_interval_s: dt,
        ..*motor
    };
    for i in 0..steps {
        let t = i as f64 * dt;
        let omega_ref = sinusoidal_reference(t, cmd, velocity_m_per_s, diameter_m);
        let duty = pid_speed_control(
            m.omega_rad_per_s,
            omega_ref,
            gains,
            dt,
            &mut pid,
            velocity_m_per_s,
            diameter_m,
            fast.duty_limit,
        );
        m.hold_command(duty, t, &fast).unwrap();
        m.step(dt, &fast);
        let alpha_err = (omega_ref - m.omega_rad_per_s) * diameter_m / (2.0 * velocity_m_per_s);
        errs.push(alpha_err);
    }
    let tail = &errs[errs.len() / 2..];
    (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
}

/// Drive the plant with PID-tracked sinusoidal rotation from `init` for
/// `duration_s`; steady amplitude and tracking error over the trailing 40%.
///
/// The PID commands the motor at the physics step (the 100 ms grid is an
/// RL-loop constraint, not a speed-loop one).
pub fn run_forced(
    plant: &Plant,
    motor: &MotorParams,
    init: PlantState,
    cmd: &SineCommand,
    gains: &SpeedPidGains,
    duration_s: f64,
) -> Result<ForcedResponse> {
    cmd.validated()?;
    gains.validated()?;
    let v = plant.flow.velocity_m_per_s;
    let d = plant.cylinder.diameter_m;
    if v <= 0.0 {
        return Err(VivError::ParameterDomain(
            "forced runs need a moving free stream".into(),
        ));
    }
    let dt = PHYSICS_DT_S;
    let fast = MotorParams {
        command_interval_s: dt,
        ..*motor
    };
    let t_start = init.time_s;
    let steps = (duration_s / dt).round() as usize;

    let mut state = init;
    let mut m = ActuationPath::at_rest(plant.receptivity_tau_s());
    let mut pid = PidState::default();
    let mut y_over_d = Vec::with_capacity(steps);
    let mut alpha_err = Vec::with_capacity(steps);

    for i in 0..steps {
        let t_local = i as f64 * dt;
        let omega_ref = sinusoidal_reference(t_local, cmd, v, d);
        let duty = pid_speed_control(
            m.motor.omega_rad_per_s,
            omega_ref,
            gains,
            dt,
            &mut pid,
            v,
            d,
            fast.duty_limit,
        );
        m.hold_command(duty, t_local, &fast)?;
        let provider = m.provider(state.time_s, &fast);
        state = plant.rk4_step(&state, &provider, dt)?;
        m.step(dt, &fast);
        y_over_d.push(state.y_m / d);
        alpha_err.push((omega_ref - m.motor.omega_rad_per_s) * d / (2.0 * v));
    }
    let _ = t_start;

    let t0 = plant.natural_period_s();
    let a_over_d = analysis::steady_amplitude(&y_over_d, dt, 0.4, t0)?;
    let tail = &alpha_err[(alpha_err.len() as f64 * 0.6) as usize..];
    let tracking_rms =
        (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt();
    Ok(ForcedResponse {
        a_over_d,
        tracking_rms,
    })
}

/// Developed uncontrolled oscillation used as the starting point of every
/// sweep point, so each ratio sees the same initial limit cycle.
pub fn developed_state(plant: &Plant) -> Result<PlantState> {
    let init = PlantState {
        y_m: 0.01 * plant.cylinder.diameter_m,
        ..PlantState::rest()
    };
    let (state, _) = plant.integrate(
        init,
        &NoRotation,
        30.0 * plant.natural_period_s(),
        PHYSICS_DT_S,
        usize::MAX,
    )?;
    Ok(state)
}

/// Steady amplitude response over forcing-frequency ratios f_r / f_n.
///
/// The speed loop drives the motor over its full PWM range; the duty_limit
/// of `motor` is the agent's action bound and does not constrain the PID
/// benchmark. alpha0 = 1 then matches the peak normalized speed the agent
/// can command.
pub fn frequency_sweep(
    plant: &Plant,
    motor: &MotorParams,
    ratios: &[f64],
    alpha0: f64,
    gains: &SpeedPidGains,
) -> Result<Vec<SweepPoint>> {
    for &r in ratios {
        if !(0.2..=3.0).contains(&r) {
            return Err(VivError::ParameterDomain(format!(
                "frequency ratio must be in [0.2, 3.0], got {r}"
            )));
        }
    }
    let pid_motor = motor.full_pwm_range();
    let f_n = plant.natural_frequency_hz();
    let init = developed_state(plant)?;
    let duration = 40.0 * plant.natural_period_s();
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let cmd = SineCommand {
            alpha0,
            fr_hz: ratio * f_n,
        };
        let resp = run_forced(plant, &pid_motor, init, &cmd, gains, duration)?;
        out.push(SweepPoint {
            ratio,
            a_over_d: resp.a_over_d,
            tracking_rms: resp.tracking_rms,
        });
    }
    Ok(out)
}
