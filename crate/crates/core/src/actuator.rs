//! Motor surrogate: PWM duty commands held on a fixed command grid, first
//! order lag from commanded to actual rotational speed.
//!
//! The lag ODE dOmega/dt = (Omega_ss - Omega)/tau is solved exactly per
//! substep, so integration error comes only from the plant side.

use crate::error::{Result, VivError};
use crate::plant::{RotationInput, RotationProvider};

/// Motor and command-grid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// Speed reached at |duty| = duty_limit.
    pub omega_max_rad_per_s: f64,
    /// First-order lag time constant. 200/3 ms makes the 95% rise time equal
    /// the observed 200 ms voltage-to-full-speed lag.
    pub lag_tau_s: f64,
    /// Action bound on |duty|.
    pub duty_limit: f64,
    /// Minimum command update interval.
    pub command_interval_s: f64,
    /// Dead zone of the duty-to-speed map: |duty| at or below this produces
    /// no rotation, and the map is linear from the deadband edge up to
    /// omega_max at |duty| = duty_limit. Zero by default (pure linear map);
    /// the rig's motor is not linear near zero.
    pub deadband_duty: f64,
}

impl MotorParams {
    pub fn validated(self) -> Result<Self> {
        let mut issues = Vec::new();
        if !(self.omega_max_rad_per_s.is_finite() && self.omega_max_rad_per_s > 0.0) {
            issues.push(format!("omega_max must be > 0, got {}", self.omega_max_rad_per_s));
        }
        if !(self.lag_tau_s.is_finite() && self.lag_tau_s > 0.0) {
            issues.push(format!("lag_tau_s must be > 0, got {}", self.lag_tau_s));
        }
        if !(self.duty_limit > 0.0 && self.duty_limit <= 1.0) {
            issues.push(format!("duty_limit must be in (0, 1], got {}", self.duty_limit));
        }
        if !(self.command_interval_s.is_finite() && self.command_interval_s > 0.0) {
            issues.push(format!(
                "command_interval_s must be > 0, got {}",
                self.command_interval_s
            ));
        }
        if !(self.deadband_duty >= 0.0 && self.deadband_duty < self.duty_limit) {
            issues.push(format!(
                "deadband_duty must be in [0, duty_limit), got {}",
                self.deadband_duty
            ));
        }
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(VivError::ParameterDomain(issues.join("; ")))
        }
    }

    /// Defaults matched to the rig: omega_max chosen so full duty gives unit
    /// normalized speed at the training flow velocity, 66.7 ms lag, |duty|
    /// bound 0.4, 100 ms command grid.
    pub fn bench_defaults(velocity_m_per_s: f64, diameter_m: f64) -> Self {
        Self {
            omega_max_rad_per_s: omega_max_for_unit_alpha(velocity_m_per_s, diameter_m),
            lag_tau_s: 0.2 / 3.0,
            duty_limit: 0.4,
            command_interval_s: 0.1,
            deadband_duty: 0.0,
        }
    }

    /// The same physical motor with the whole PWM range available. The
    /// duty_limit of the base parameters is the agent's action bound, not a
    /// hardware one; speed-loop experiments may command up to |duty| = 1.
    pub fn full_pwm_range(&self) -> Self {
        Self {
            omega_max_rad_per_s: self.omega_max_rad_per_s / self.duty_limit,
            duty_limit: 1.0,
            ..*self
        }
    }

    /// Clip a duty command to [-duty_limit, +duty_limit].
    pub fn clamp_duty(&self, duty: f64) -> Result<f64> {
        if !duty.is_finite() {
            return Err(VivError::Command(format!("non-finite duty command: {duty}")));
        }
        Ok(duty.clamp(-self.duty_limit, self.duty_limit))
    }

    /// Steady-state speed for a held duty: linear map through the origin
    /// (or from the deadband edge when one is configured), reaching
    /// omega_max at |duty| = duty_limit.
    pub fn steady_speed(&self, duty: f64) -> f64 {
        if self.deadband_duty == 0.0 {
            return self.omega_max_rad_per_s * (duty / self.duty_limit);
        }
        let mag = duty.abs();
        if mag <= self.deadband_duty {
            return 0.0;
        }
        let span = self.duty_limit - self.deadband_duty;
        self.omega_max_rad_per_s * ((mag - self.deadband_duty) / span) * duty.signum()
    }
}

/// omega_max that yields alpha = Omega D / (2 V) = 1 at full duty.
pub fn omega_max_for_unit_alpha(velocity_m_per_s: f64, diameter_m: f64) -> f64 {
    2.0 * velocity_m_per_s / diameter_m
}

/// Normalized rotational speed alpha = Omega D / (2 V).
pub fn normalized_speed(omega_rad_per_s: f64, velocity_m_per_s: f64, diameter_m: f64) -> Result<f64> {
    if velocity_m_per_s <= 0.0 {
        return Err(VivError::ParameterDomain(format!(
            "normalized_speed needs V > 0, got {velocity_m_per_s}"
        )));
    }
    Ok(omega_rad_per_s * diameter_m / (2.0 * velocity_m_per_s))
}

/// Instantaneous motor state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorState {
    pub omega_rad_per_s: f64,
    pub held_duty: f64,
    pub time_since_command_s: f64,
}

impl MotorState {
    pub fn at_rest() -> Self {
        Self {
            omega_rad_per_s: 0.0,
            held_duty: 0.0,
            time_since_command_s: 0.0,
        }
    }

    /// Replace the held duty. Commands must land on the command grid
    /// (multiples of `command_interval_s`); anything else is a scheduling
    /// violation.
    pub fn hold_command(&mut self, duty: f64, t_now_s: f64, p: &MotorParams) -> Result<()> {
        let cycles = t_now_s / p.command_interval_s;
        if (cycles - cycles.round()).abs() > 1e-6 {
            return Err(VivError::Scheduling(format!(
                "command at t = {t_now_s} s is off the {} s grid",
                p.command_interval_s
            )));
        }
        self.held_duty = p.clamp_duty(duty)?;
        self.time_since_command_s = 0.0;
        Ok(())
    }

    /// Exact exponential relaxation toward the held duty's steady speed.
    pub fn step(&mut self, dt_s: f64, p: &MotorParams) {
        debug_assert!(dt_s > 0.0);
        let target = p.steady_speed(self.held_duty);
        let decay = (-dt_s / p.lag_tau_s).exp();
        self.omega_rad_per_s = target + (self.omega_rad_per_s - target) * decay;
        self.time_since_command_s += dt_s;
    }

    /// Rotation provider giving the exact speed and acceleration trajectory
    /// from `t0_s` while the current duty stays held.
    pub fn rotation_from(&self, t0_s: f64, p: &MotorParams) -> MotorRotation {
        MotorRotation {
            t0_s,
            omega0: self.omega_rad_per_s,
            omega_ss: p.steady_speed(self.held_duty),
            tau: p.lag_tau_s,
        }
    }
}

/// Closed-form motor trajectory within one hold interval.
#[derive(Debug, Clone, Copy)]
pub struct MotorRotation {
    t0_s: f64,
    omega0: f64,
    omega_ss: f64,
    tau: f64,
}

impl RotationProvider for MotorRotation {
    fn rotation(&self, t_s: f64) -> RotationInput {
        let dt = t_s - self.t0_s;
        let decay = (-dt / self.tau).exp();
        let omega = self.omega_ss + (self.omega0 - self.omega_ss) * decay;
        RotationInput {
            omega_rad_per_s: omega,
            omega_dot_rad_per_s2: (self.omega_ss - omega) / self.tau,
        }
    }
}

/// Motor plus the wake-receptivity high-pass filter on the rotation-rate
/// forcing. The filter state `w` low-passes the raw rotation rate; the
/// forcing delivered to the wake equation is the remainder
/// `Omega_dot - w`, i.e. a first-order high-pass with time constant
/// `tau_hp_s`. Both the motor lag and the filter are advanced by exact
/// closed forms, so no integration error enters through the actuation path.
#[derive(Debug, Clone, Copy)]
pub struct ActuationPath {
    pub motor: MotorState,
    /// Low-pass state of the raw rotation rate (rad/s^2 units).
    pub hp_state: f64,
    /// High-pass time constant; `None` disables the filter.
    pub tau_hp_s: Option<f64>,
}

impl ActuationPath {
    pub fn at_rest(tau_hp_s: Option<f64>) -> Self {
        Self {
            motor: MotorState::at_rest(),
            hp_state: 0.0,
            // The closed forms below assume the filter and motor poles
            // differ; nudge a coincident filter constant.
            tau_hp_s,
        }
    }

    pub fn hold_command(&mut self, duty: f64, t_now_s: f64, p: &MotorParams) -> Result<()> {
        self.motor.hold_command(duty, t_now_s, p)
    }

    /// Exact advance of motor speed and filter state by `dt_s`.
    pub fn step(&mut self, dt_s: f64, p: &MotorParams) {
        let seg = self.segment(p);
        let r = seg.eval(dt_s);
        self.motor.omega_rad_per_s = r.omega;
        self.motor.time_since_command_s += dt_s;
        self.hp_state = r.w;
    }

    /// Rotation provider for the plant over the current hold, anchored at
    /// absolute time `t0_s`.
    pub fn provider(&self, t0_s: f64, p: &MotorParams) -> FilteredRotation {
        FilteredRotation {
            t0_s,
            seg: self.segment(p),
        }
    }

    fn segment(&self, p: &MotorParams) -> Segment {
        let tau = p.lag_tau_s;
        let tau_hp = self.tau_hp_s.map(|th| {
            if (th - tau).abs() < 1e-9 * tau {
                th * (1.0 + 1e-6)
            } else {
                th
            }
        });
        Segment {
            omega_ss: p.steady_speed(self.motor.held_duty),
            omega0: self.motor.omega_rad_per_s,
            w0: self.hp_state,
            tau,
            tau_hp,
        }
    }
}

/// One exponential segment of the motor + filter trajectory.
#[derive(Debug, Clone, Copy)]
struct Segment {
    omega_ss: f64,
    omega0: f64,
    w0: f64,
    tau: f64,
    tau_hp: Option<f64>,
}

struct SegmentPoint {
    omega: f64,
    omega_dot: f64,
    w: f64,
}

impl Segment {
    /// State at elapsed time `dt` (>= 0) into the segment. The raw rate is
    /// u(t) = C e^{-t/tau}; the filter obeys w' = (u - w)/tau_hp, whose
    /// solution is w(t) = w0 e^{-t/th} + K (e^{-t/tau} - e^{-t/th}) with
    /// K = C tau / (tau - th).
    fn eval(&self, dt: f64) -> SegmentPoint {
        let decay = (-dt / self.tau).exp();
        let omega = self.omega_ss + (self.omega0 - self.omega_ss) * decay;
        let c = (self.omega_ss - self.omega0) / self.tau;
        let u = c * decay;
        let w = match self.tau_hp {
            Some(th) => {
                let decay_h = (-dt / th).exp();
                self.w0 * decay_h + c * self.tau / (self.tau - th) * (decay - decay_h)
            }
            None => 0.0,
        };
        SegmentPoint {
            omega,
            omega_dot: u,
            w,
        }
    }
}

/// Provider exposing the motor speed and the band-limited rotation-rate
/// forcing the wake actually feels.
#[derive(Debug, Clone, Copy)]
pub struct FilteredRotation {
    t0_s: f64,
    seg: Segment,
}

impl RotationProvider for FilteredRotation {
    fn rotation(&self, t_s: f64) -> RotationInput {
        let p = self.seg.eval(t_s - self.t0_s);
        RotationInput {
            omega_rad_per_s: p.omega,
            omega_dot_rad_per_s2: p.omega_dot - p.w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MotorParams {
        MotorParams {
            omega_max_rad_per_s: 23.52,
            lag_tau_s: 0.2 / 3.0,
            duty_limit: 0.4,
            command_interval_s: 0.1,
            deadband_duty: 0.0,
        }
    }

    #[test]
    fn deadband_map() {
        let p = MotorParams {
            deadband_duty: 0.1,
            ..params()
        };
        assert_eq!(p.steady_speed(0.05), 0.0);
        assert_eq!(p.steady_speed(-0.1), 0.0);
        assert_eq!(p.steady_speed(0.4), p.omega_max_rad_per_s);
        let mid = p.steady_speed(0.25);
        assert!((mid - p.omega_max_rad_per_s * 0.5).abs() < 1e-12);
        assert_eq!(p.steady_speed(-0.4), -p.omega_max_rad_per_s);
    }

    #[test]
    fn clamp_examples() {
        let p = params();
        assert_eq!(p.clamp_duty(0.7).unwrap(), 0.4);
        assert_eq!(p.clamp_duty(0.0).unwrap(), 0.0);
        assert_eq!(p.clamp_duty(-0.25).unwrap(), -0.25);
        assert!(p.clamp_duty(f64::NAN).is_err());
    }

    #[test]
    fn steady_speed_is_linear() {
        let p = params();
        assert_eq!(p.steady_speed(0.4), p.omega_max_rad_per_s);
        assert_eq!(p.steady_speed(0.0), 0.0);
        assert!((p.steady_speed(-0.2) + p.omega_max_rad_per_s / 2.0).abs() < 1e-12);
        // Linearity over a few points.
        for duty in [-0.4, -0.1, 0.05, 0.3] {
            assert!(
                (p.steady_speed(duty) - duty / 0.4 * p.omega_max_rad_per_s).abs() < 1e-12
            );
        }
    }

    #[test]
    fn rise_covers_95_percent_in_three_tau() {
        let p = params();
        let mut m = MotorState::at_rest();
        m.hold_command(0.4, 0.0, &p).unwrap();
        let steps = 300;
        let dt = 3.0 * p.lag_tau_s / steps as f64;
        for _ in 0..steps {
            m.step(dt, &p);
        }
        assert!(m.omega_rad_per_s >= 0.95 * p.omega_max_rad_per_s);
        // 3 tau is the rig's observed 200 ms rise with tau = 66.7 ms.
        assert!((3.0 * p.lag_tau_s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn decays_to_zero_with_zero_duty() {
        let p = params();
        let mut m = MotorState {
            omega_rad_per_s: 17.0,
            held_duty: 0.0,
            time_since_command_s: 0.0,
        };
        for _ in 0..10_000 {
            m.step(0.001, &p);
        }
        assert!(m.omega_rad_per_s.abs() < 1e-12);
    }

    #[test]
    fn step_matches_closed_form() {
        let p = params();
        let mut m = MotorState::at_rest();
        m.hold_command(0.4, 0.0, &p).unwrap();
        let dt = 0.001;
        for i in 1..=500 {
            m.step(dt, &p);
            let t = i as f64 * dt;
            let expect = p.omega_max_rad_per_s * (1.0 - (-t / p.lag_tau_s).exp());
            assert!(
                (m.omega_rad_per_s - expect).abs() < 1e-9,
                "t = {t}: {} vs {expect}",
                m.omega_rad_per_s
            );
        }
    }

    #[test]
    fn hold_off_grid_is_rejected() {
        let p = params();
        let mut m = MotorState::at_rest();
        assert!(m.hold_command(0.3, 0.1, &p).is_ok());
        assert!(matches!(
            m.hold_command(0.3, 0.15, &p),
            Err(VivError::Scheduling(_))
        ));
    }

    #[test]
    fn two_holds_concatenate_exponentials() {
        let p = params();
        let mut m = MotorState::at_rest();
        m.hold_command(0.4, 0.0, &p).unwrap();
        let dt = 0.001;
        for _ in 0..100 {
            m.step(dt, &p);
        }
        let omega_at_switch = m.omega_rad_per_s;
        m.hold_command(-0.2, 0.1, &p).unwrap();
        for _ in 0..100 {
            m.step(dt, &p);
        }
        // Piecewise closed form: rise toward omega_max for 0.1 s, then relax
        // toward -omega_max/2 from the switch value.
        let w1 = p.omega_max_rad_per_s * (1.0 - (-0.1f64 / p.lag_tau_s).exp());
        let target2 = -p.omega_max_rad_per_s / 2.0;
        let w2 = target2 + (w1 - target2) * (-0.1f64 / p.lag_tau_s).exp();
        assert!((omega_at_switch - w1).abs() < 1e-9);
        assert!((m.omega_rad_per_s - w2).abs() < 1e-9);
    }

    #[test]
    fn monotone_step_response() {
        let p = params();
        let mut m = MotorState {
            omega_rad_per_s: -5.0,
            held_duty: 0.0,
            time_since_command_s: 0.0,
        };
        m.hold_command(0.35, 0.0, &p).unwrap();
        let mut prev = m.omega_rad_per_s;
        for _ in 0..2000 {
            m.step(0.001, &p);
            assert!(m.omega_rad_per_s >= prev - 1e-15);
            prev = m.omega_rad_per_s;
        }
    }

    #[test]
    fn speed_never_exceeds_omega_max_for_admissible_duties() {
        use rand::Rng;
        use rand::SeedableRng;
        let p = params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut m = MotorState::at_rest();
        for k in 0..200 {
            let duty = (rng.random::<f64>() * 2.0 - 1.0) * p.duty_limit;
            m.hold_command(duty, k as f64 * p.command_interval_s, &p).unwrap();
            for _ in 0..100 {
                m.step(0.001, &p);
                assert!(m.omega_rad_per_s.abs() <= p.omega_max_rad_per_s * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn normalized_speed_examples() {
        let v = 0.2058;
        let d = 0.0175;
        assert!((normalized_speed(2.0 * v / d, v, d).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(normalized_speed(0.0, v, d).unwrap(), 0.0);
        assert!(normalized_speed(1.0, 0.0, d).is_err());

        // Matched omega_max: steady alpha at full duty is exactly one.
        let p = MotorParams::bench_defaults(v, d);
        let alpha = normalized_speed(p.steady_speed(0.4), v, d).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_closed_form_matches_ode_oracle() {
        // Numeric oracle: integrate w' = (u - w)/tau_hp with tiny Euler
        // steps against the exact segment formulas, across two holds.
        let p = params();
        let tau_hp = 0.099;
        let mut path = ActuationPath::at_rest(Some(tau_hp));
        let mut w_oracle = 0.0;
        let mut omega_oracle = 0.0;
        let fine = 1e-6;
        for (hold, duty) in [(0usize, 0.4), (1, -0.3)] {
            path.hold_command(duty, hold as f64 * 0.1, &p).unwrap();
            let omega_ss = p.steady_speed(duty);
            for _ in 0..100 {
                // One 1 ms substep of the exact path.
                let before = path.motor.omega_rad_per_s;
                path.step(0.001, &p);
                // Fine Euler for the oracle over the same 1 ms.
                let mut t = 0.0;
                while t < 0.001 - fine / 2.0 {
                    let u = (omega_ss - omega_oracle) / p.lag_tau_s;
                    omega_oracle += u * fine;
                    w_oracle += (u - w_oracle) / tau_hp * fine;
                    t += fine;
                }
                let _ = before;
            }
            assert!(
                (path.motor.omega_rad_per_s - omega_oracle).abs() < 1e-3,
                "omega {} vs {omega_oracle}",
                path.motor.omega_rad_per_s
            );
            assert!(
                (path.hp_state - w_oracle).abs() < 1e-3,
                "w {} vs {w_oracle}",
                path.hp_state
            );
        }
    }

    #[test]
    fn filter_rejects_slow_forcing() {
        // Sinusoidal duty patterns at two frequencies: the filtered forcing
        // passes high-frequency rotation-rate content and rejects slow
        // content, close to the analytic first-order high-pass gain.
        let p = params();
        let tau_hp = 0.099;
        // Quadrature projection onto the drive frequency isolates the
        // fundamental from the ZOH burst harmonics.
        let run = |f_hz: f64| -> f64 {
            let w = 2.0 * std::f64::consts::PI * f_hz;
            let mut path = ActuationPath::at_rest(Some(tau_hp));
            let (mut raw_c, mut raw_s, mut fil_c, mut fil_s) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..600usize {
                let t_hold = k as f64 * 0.1;
                let duty = 0.4 * (w * t_hold).sin();
                path.hold_command(duty, t_hold, &p).unwrap();
                for i in 0..100 {
                    let t = t_hold + i as f64 * 0.001;
                    let prov = path.provider(t, &p);
                    let r = prov.rotation(t + 0.0005);
                    let u = (p.steady_speed(path.motor.held_duty) - r.omega_rad_per_s)
                        / p.lag_tau_s;
                    if k >= 100 {
                        raw_c += u * (w * t).cos();
                        raw_s += u * (w * t).sin();
                        fil_c += r.omega_dot_rad_per_s2 * (w * t).cos();
                        fil_s += r.omega_dot_rad_per_s2 * (w * t).sin();
                    }
                    path.step(0.001, &p);
                }
            }
            (fil_c * fil_c + fil_s * fil_s).sqrt() / (raw_c * raw_c + raw_s * raw_s).sqrt()
        };
        let slow_pass = run(0.5);
        let fast_pass = run(3.0);
        let hp = |f: f64| {
            let w = 2.0 * std::f64::consts::PI * f * tau_hp;
            w / (1.0 + w * w).sqrt()
        };
        assert!(fast_pass > 2.0 * slow_pass, "slow {slow_pass:.3}, fast {fast_pass:.3}");
        assert!((slow_pass - hp(0.5)).abs() < 0.1, "slow {slow_pass:.3} vs {:.3}", hp(0.5));
        assert!((fast_pass - hp(3.0)).abs() < 0.1, "fast {fast_pass:.3} vs {:.3}", hp(3.0));
    }

    #[test]
    fn unfiltered_path_equals_raw_motor() {
        let p = params();
        let mut path = ActuationPath::at_rest(None);
        let mut m = MotorState::at_rest();
        path.hold_command(0.3, 0.0, &p).unwrap();
        m.hold_command(0.3, 0.0, &p).unwrap();
        for i in 0..200 {
            let prov = path.provider(i as f64 * 0.001, &p);
            let raw = m.rotation_from(i as f64 * 0.001, &p);
            let a = prov.rotation(i as f64 * 0.001 + 0.0005);
            let b = raw.rotation(i as f64 * 0.001 + 0.0005);
            assert!((a.omega_rad_per_s - b.omega_rad_per_s).abs() < 1e-12);
            assert!((a.omega_dot_rad_per_s2 - b.omega_dot_rad_per_s2).abs() < 1e-12);
            path.step(0.001, &p);
            m.step(0.001, &p);
        }
    }

    #[test]
    fn provider_matches_stepped_state() {
        let p = params();
        let m = MotorState {
            omega_rad_per_s: 3.0,
            held_duty: 0.25,
            time_since_command_s: 0.0,
        };
        let provider = m.rotation_from(1.0, &p);
        let mut expect = m;
        for i in 1..=100 {
            expect.step(0.001, &p);
            let got = provider.rotation(1.0 + i as f64 * 0.001);
            assert!((got.omega_rad_per_s - expect.omega_rad_per_s).abs() < 1e-10);
        }
        // Acceleration is consistent with the lag ODE.
        let r = provider.rotation(1.05);
        let expected_dot = (p.steady_speed(0.25) - r.omega_rad_per_s) / p.lag_tau_s;
        assert!((r.omega_dot_rad_per_s2 - expected_dot).abs() < 1e-12);
    }
}
