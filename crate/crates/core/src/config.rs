//! Experiment configuration: a flat, typed key-value text format with
//! dotted section keys, e.g. `plant.diameter_m = 0.0175`. `#` starts a
//! comment. Unknown or malformed keys are reported together.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::control::EpisodeConfig;
use crate::error::{Result, VivError};
use crate::plant::{
    CalibrationTargets, CylinderProperties, FlowConditions, FnReference, WakeModelParams,
};
use crate::actuator::MotorParams;
use crate::ppo::PpoConfig;

/// Everything a run needs, resolved from one config file plus CLI overrides.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub fn_reference: FnReference,
    pub cylinder: CylinderProperties,
    pub flow: FlowConditions,
    /// Fixed wake constants (not searched by calibration).
    pub base_lift_coeff: f64,
    pub added_mass_coeff: f64,
    pub fluid_damping_coeff: f64,
    pub turbulence: f64,
    /// Calibrated wake constants, when given explicitly in the config.
    pub wake_calibrated: Option<(f64, f64, f64)>,
    pub receptivity_cutoff_ratio: f64,
    /// Flat file holding calibrated constants (written by `calibrate`).
    pub wake_params_file: Option<PathBuf>,
    pub motor: MotorParams,
    pub ppo: PpoConfig,
    pub episode: EpisodeConfig,
    pub n_past_actions: usize,
    pub observation_delay_steps: usize,
    pub sensor_noise_y: f64,
    pub sensor_noise_ydot: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub episodes: usize,
    pub calibration: CalibrationTargets,
    pub sweep_u: Vec<f64>,
    pub sweep_ratios: Vec<f64>,
    pub sweep_alpha0: f64,
    pub decay_release_over_d: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fn_reference = FnReference::StillWater;
        let added_mass_coeff = 1.0;
        let cylinder = CylinderProperties::reference_rig(fn_reference, added_mass_coeff);
        // Training point U = 6 with the in-water natural frequency.
        let flow = FlowConditions {
            velocity_m_per_s: 6.0 * 1.96 * cylinder.diameter_m,
            density_kg_per_m3: 1000.0,
            strouhal: 0.21,
        };
        Self {
            fn_reference,
            cylinder,
            flow,
            base_lift_coeff: 0.6,
            added_mass_coeff,
            fluid_damping_coeff: 0.8,
            turbulence: 25.0,
            receptivity_cutoff_ratio: 0.65,
            wake_calibrated: None,
            wake_params_file: None,
            motor: MotorParams {
                deadband_duty: 0.1,
                ..MotorParams::bench_defaults(flow.velocity_m_per_s, cylinder.diameter_m)
            },
            ppo: PpoConfig {
                entropy_coef: 0.002,
                ..PpoConfig::default()
            },
            episode: EpisodeConfig::default(),
            n_past_actions: 2,
            observation_delay_steps: 1,
            sensor_noise_y: 0.035,
            sensor_noise_ydot: 0.36,
            seed: 0,
            output_dir: None,
            episodes: 400,
            calibration: CalibrationTargets::default(),
            sweep_u: vec![2.0, 3.0, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 9.0, 10.0],
            sweep_ratios: vec![0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
            sweep_alpha0: 1.0,
            decay_release_over_d: 0.5,
        }
    }
}

struct KeyBag {
    entries: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
    issues: Vec<String>,
}

impl KeyBag {
    fn parse(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut issues = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = k.trim().to_string();
                    if key.is_empty() {
                        issues.push(format!("line {}: empty key", lineno + 1));
                    } else if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                        issues.push(format!("line {}: duplicate key '{key}'", lineno + 1));
                    }
                }
                None => issues.push(format!("line {}: expected 'key = value'", lineno + 1)),
            }
        }
        Self {
            entries,
            used: Default::default(),
            issues,
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        match self.raw(key) {
            None => default,
            Some(v) => match v.parse::<f64>() {
                Ok(x) => x,
                Err(_) => {
                    self.issues.push(format!("{key}: expected a number, got '{v}'"));
                    default
                }
            },
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        match self.raw(key) {
            None => default,
            Some(v) => match v.parse::<usize>() {
                Ok(x) => x,
                Err(_) => {
                    self.issues
                        .push(format!("{key}: expected a non-negative integer, got '{v}'"));
                    default
                }
            },
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        match self.raw(key) {
            None => default,
            Some(v) => match v.parse::<u64>() {
                Ok(x) => x,
                Err(_) => {
                    self.issues
                        .push(format!("{key}: expected a non-negative integer, got '{v}'"));
                    default
                }
            },
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(v) => match v.as_str() {
                "true" => true,
                "false" => false,
                _ => {
                    self.issues
                        .push(format!("{key}: expected true or false, got '{v}'"));
                    default
                }
            },
        }
    }

    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        let v = self.raw(key)?;
        match v.parse::<f64>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.issues.push(format!("{key}: expected a number, got '{v}'"));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.raw(key) {
            None => default.to_vec(),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    match part.trim().parse::<f64>() {
                        Ok(x) => out.push(x),
                        Err(_) => {
                            self.issues
                                .push(format!("{key}: expected comma-separated numbers, got '{part}'"));
                            return default.to_vec();
                        }
                    }
                }
                out
            }
        }
    }

    fn finish(self) -> std::result::Result<(), Vec<String>> {
        let mut issues = self.issues;
        for key in self.entries.keys() {
            if !self.used.contains(key) {
                issues.push(format!("unknown key '{key}'"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut bag = KeyBag::parse(text);
        let d = ExperimentConfig::default();

        let fn_reference = match bag.raw("plant.fn_reference") {
            None => d.fn_reference,
            Some(v) => match v.as_str() {
                "water" => FnReference::StillWater,
                "air" => FnReference::Air,
                _ => {
                    bag.issues
                        .push(format!("plant.fn_reference: expected water or air, got '{v}'"));
                    d.fn_reference
                }
            },
        };
        let cylinder = CylinderProperties {
            diameter_m: bag.f64("plant.diameter_m", d.cylinder.diameter_m),
            immersed_length_m: bag.f64("plant.immersed_length_m", d.cylinder.immersed_length_m),
            oscillating_mass_kg: bag.f64("plant.oscillating_mass_kg", d.cylinder.oscillating_mass_kg),
            displaced_mass_kg: bag.f64("plant.displaced_mass_kg", d.cylinder.displaced_mass_kg),
            stiffness_n_per_m: bag.f64("plant.stiffness_n_per_m", d.cylinder.stiffness_n_per_m),
            structural_damping_ns_per_m: bag.f64(
                "plant.structural_damping_ns_per_m",
                d.cylinder.structural_damping_ns_per_m,
            ),
        };
        let flow = FlowConditions {
            velocity_m_per_s: bag.f64("flow.velocity_m_per_s", d.flow.velocity_m_per_s),
            density_kg_per_m3: bag.f64("flow.density_kg_per_m3", d.flow.density_kg_per_m3),
            strouhal: bag.f64("flow.strouhal", d.flow.strouhal),
        };

        let eps = bag.f64_opt("wake.vdp_epsilon");
        let ca = bag.f64_opt("wake.coupling_a");
        let kr = bag.f64_opt("wake.rotation_coupling");
        let wake_calibrated = match (eps, ca, kr) {
            (Some(e), Some(a), Some(k)) => Some((e, a, k)),
            (None, None, None) => None,
            _ => {
                bag.issues.push(
                    "wake.vdp_epsilon, wake.coupling_a and wake.rotation_coupling must be \
                     given together (or all omitted to use a calibration file)"
                        .into(),
                );
                None
            }
        };
        let wake_params_file = bag.raw("wake.params_file").map(PathBuf::from);

        let motor = MotorParams {
            omega_max_rad_per_s: bag.f64("motor.omega_max_rad_per_s", d.motor.omega_max_rad_per_s),
            lag_tau_s: bag.f64("motor.lag_tau_s", d.motor.lag_tau_s),
            duty_limit: bag.f64("motor.duty_limit", d.motor.duty_limit),
            command_interval_s: bag.f64("motor.command_interval_s", d.motor.command_interval_s),
            deadband_duty: bag.f64("motor.deadband_duty", d.motor.deadband_duty),
        };
        let ppo = PpoConfig {
            gamma: bag.f64("ppo.gamma", d.ppo.gamma),
            gae_lambda: bag.f64("ppo.gae_lambda", d.ppo.gae_lambda),
            clip_eps: bag.f64("ppo.clip_eps", d.ppo.clip_eps),
            epochs_per_update: bag.usize("ppo.epochs_per_update", d.ppo.epochs_per_update),
            minibatch_size: bag.usize("ppo.minibatch_size", d.ppo.minibatch_size),
            lr_actor: bag.f64("ppo.lr_actor", d.ppo.lr_actor),
            lr_critic: bag.f64("ppo.lr_critic", d.ppo.lr_critic),
            entropy_coef: bag.f64("ppo.entropy_coef", d.ppo.entropy_coef),
            value_coef: bag.f64("ppo.value_coef", d.ppo.value_coef),
            weight_decay: bag.f64("ppo.weight_decay", d.ppo.weight_decay),
            kl_stop: bag.f64("ppo.kl_stop", d.ppo.kl_stop),
        };
        let episode = EpisodeConfig {
            duration_periods: bag.f64("loop.duration_periods", d.episode.duration_periods),
            steps_per_episode: bag.usize("loop.steps_per_episode", d.episode.steps_per_episode),
            action_interval_s: bag.f64("loop.action_interval_s", d.episode.action_interval_s),
            physics_dt_s: bag.f64("loop.physics_dt_s", d.episode.physics_dt_s),
            eval_duration_s: bag.f64("loop.eval_duration_s", d.episode.eval_duration_s),
            eval_lead_in_s: bag.f64("loop.eval_lead_in_s", d.episode.eval_lead_in_s),
            intra_interval_mean_reward: bag.bool(
                "loop.intra_interval_mean_reward",
                d.episode.intra_interval_mean_reward,
            ),
        };
        let calibration = CalibrationTargets {
            peak_a_over_d: bag.f64("calibration.peak_a_over_d", d.calibration.peak_a_over_d),
            peak_tolerance: bag.f64("calibration.peak_tolerance", d.calibration.peak_tolerance),
            band_u: (
                bag.f64("calibration.band_u_low", d.calibration.band_u.0),
                bag.f64("calibration.band_u_high", d.calibration.band_u.1),
            ),
            band_min_a_over_d: bag.f64(
                "calibration.band_min_a_over_d",
                d.calibration.band_min_a_over_d,
            ),
            low_u_max_a_over_d: bag.f64(
                "calibration.low_u_max_a_over_d",
                d.calibration.low_u_max_a_over_d,
            ),
            lockon_peak_a_over_d: bag.f64(
                "calibration.lockon_peak_a_over_d",
                d.calibration.lockon_peak_a_over_d,
            ),
            lockon_peak_tolerance: bag.f64(
                "calibration.lockon_peak_tolerance",
                d.calibration.lockon_peak_tolerance,
            ),
            lockon_high_max: bag.f64("calibration.lockon_high_max", d.calibration.lockon_high_max),
        };

        let cfg = ExperimentConfig {
            fn_reference,
            cylinder,
            flow,
            base_lift_coeff: bag.f64("wake.base_lift_coeff", d.base_lift_coeff),
            added_mass_coeff: bag.f64("wake.added_mass_coeff", d.added_mass_coeff),
            fluid_damping_coeff: bag.f64("wake.fluid_damping_coeff", d.fluid_damping_coeff),
            turbulence: bag.f64("wake.turbulence", d.turbulence),
            receptivity_cutoff_ratio: bag.f64(
                "wake.receptivity_cutoff_ratio",
                d.receptivity_cutoff_ratio,
            ),
            wake_calibrated,
            wake_params_file,
            motor,
            ppo,
            episode,
            n_past_actions: bag.usize("loop.n_past_actions", d.n_past_actions),
            observation_delay_steps: bag.usize(
                "loop.observation_delay_steps",
                d.observation_delay_steps,
            ),
            sensor_noise_y: bag.f64("loop.sensor_noise_y", d.sensor_noise_y),
            sensor_noise_ydot: bag.f64("loop.sensor_noise_ydot", d.sensor_noise_ydot),
            seed: bag.u64("run.seed", d.seed),
            output_dir: bag.raw("run.output_dir").map(PathBuf::from),
            episodes: bag.usize("run.episodes", d.episodes),
            calibration,
            sweep_u: bag.f64_list("sweep.u_values", &d.sweep_u),
            sweep_ratios: bag.f64_list("sweep.ratios", &d.sweep_ratios),
            sweep_alpha0: bag.f64("sweep.alpha0", d.sweep_alpha0),
            decay_release_over_d: bag.f64("decay.release_over_d", d.decay_release_over_d),
        };

        bag.finish().map_err(VivError::Config)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            VivError::Config(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        Self::parse(&text)
    }

    /// Uncalibrated wake constants (fixed fields filled, search fields at
    /// their starting defaults).
    pub fn wake_starting_point(&self) -> WakeModelParams {
        WakeModelParams {
            base_lift_coeff: self.base_lift_coeff,
            added_mass_coeff: self.added_mass_coeff,
            fluid_damping_coeff: self.fluid_damping_coeff,
            receptivity_cutoff_ratio: self.receptivity_cutoff_ratio,
            ..WakeModelParams::starting_defaults()
        }
    }

    /// Resolve the calibrated wake constants: explicit config keys win, then
    /// the calibration file (explicit path or `wake_params.cfg` in the
    /// output directory); otherwise the caller must run `calibrate` first.
    pub fn wake_params(&self, out_dir: &Path) -> Result<WakeModelParams> {
        if let Some((eps, a, kr)) = self.wake_calibrated {
            return WakeModelParams {
                vdp_epsilon: eps,
                coupling_a: a,
                rotation_coupling: kr,
                ..self.wake_starting_point()
            }
            .validated();
        }
        let path = self
            .wake_params_file
            .clone()
            .unwrap_or_else(|| out_dir.join("wake_params.cfg"));
        if !path.exists() {
            return Err(VivError::Config(vec![format!(
                "no calibrated wake parameters: set wake.vdp_epsilon/coupling_a/rotation_coupling \
                 in the config, or run `vivrl calibrate --config ...` first (expected {})",
                path.display()
            )]));
        }
        load_wake_params(&path, self.wake_starting_point())
    }

    /// Canonical sorted key-value rendering of the fully resolved config.
    /// The config hash stamped into artifacts is computed over this text.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let mut kv: Vec<(String, String)> = Vec::new();
        let push = |kv: &mut Vec<(String, String)>, k: &str, v: String| {
            kv.push((k.to_string(), v));
        };
        push(&mut kv, "plant.fn_reference", match self.fn_reference {
            FnReference::StillWater => "water".into(),
            FnReference::Air => "air".into(),
        });
        push(&mut kv, "plant.diameter_m", format!("{}", self.cylinder.diameter_m));
        push(&mut kv, "plant.immersed_length_m", format!("{}", self.cylinder.immersed_length_m));
        push(&mut kv, "plant.oscillating_mass_kg", format!("{}", self.cylinder.oscillating_mass_kg));
        push(&mut kv, "plant.displaced_mass_kg", format!("{}", self.cylinder.displaced_mass_kg));
        push(&mut kv, "plant.stiffness_n_per_m", format!("{}", self.cylinder.stiffness_n_per_m));
        push(
            &mut kv,
            "plant.structural_damping_ns_per_m",
            format!("{}", self.cylinder.structural_damping_ns_per_m),
        );
        push(&mut kv, "flow.velocity_m_per_s", format!("{}", self.flow.velocity_m_per_s));
        push(&mut kv, "flow.density_kg_per_m3", format!("{}", self.flow.density_kg_per_m3));
        push(&mut kv, "flow.strouhal", format!("{}", self.flow.strouhal));
        push(&mut kv, "wake.base_lift_coeff", format!("{}", self.base_lift_coeff));
        push(&mut kv, "wake.added_mass_coeff", format!("{}", self.added_mass_coeff));
        push(&mut kv, "wake.fluid_damping_coeff", format!("{}", self.fluid_damping_coeff));
        push(&mut kv, "wake.turbulence", format!("{}", self.turbulence));
        push(
            &mut kv,
            "wake.receptivity_cutoff_ratio",
            format!("{}", self.receptivity_cutoff_ratio),
        );
        if let Some((e, a, k)) = self.wake_calibrated {
            push(&mut kv, "wake.vdp_epsilon", format!("{e}"));
            push(&mut kv, "wake.coupling_a", format!("{a}"));
            push(&mut kv, "wake.rotation_coupling", format!("{k}"));
        }
        if let Some(p) = &self.wake_params_file {
            push(&mut kv, "wake.params_file", p.display().to_string());
        }
        push(&mut kv, "motor.omega_max_rad_per_s", format!("{}", self.motor.omega_max_rad_per_s));
        push(&mut kv, "motor.lag_tau_s", format!("{}", self.motor.lag_tau_s));
        push(&mut kv, "motor.duty_limit", format!("{}", self.motor.duty_limit));
        push(&mut kv, "motor.command_interval_s", format!("{}", self.motor.command_interval_s));
        push(&mut kv, "motor.deadband_duty", format!("{}", self.motor.deadband_duty));
        push(&mut kv, "ppo.gamma", format!("{}", self.ppo.gamma));
        push(&mut kv, "ppo.gae_lambda", format!("{}", self.ppo.gae_lambda));
        push(&mut kv, "ppo.clip_eps", format!("{}", self.ppo.clip_eps));
        push(&mut kv, "ppo.epochs_per_update", format!("{}", self.ppo.epochs_per_update));
        push(&mut kv, "ppo.minibatch_size", format!("{}", self.ppo.minibatch_size));
        push(&mut kv, "ppo.lr_actor", format!("{}", self.ppo.lr_actor));
        push(&mut kv, "ppo.lr_critic", format!("{}", self.ppo.lr_critic));
        push(&mut kv, "ppo.entropy_coef", format!("{}", self.ppo.entropy_coef));
        push(&mut kv, "ppo.value_coef", format!("{}", self.ppo.value_coef));
        push(&mut kv, "ppo.weight_decay", format!("{}", self.ppo.weight_decay));
        push(&mut kv, "ppo.kl_stop", format!("{}", self.ppo.kl_stop));
        push(&mut kv, "loop.duration_periods", format!("{}", self.episode.duration_periods));
        push(&mut kv, "loop.steps_per_episode", format!("{}", self.episode.steps_per_episode));
        push(&mut kv, "loop.action_interval_s", format!("{}", self.episode.action_interval_s));
        push(&mut kv, "loop.physics_dt_s", format!("{}", self.episode.physics_dt_s));
        push(&mut kv, "loop.eval_duration_s", format!("{}", self.episode.eval_duration_s));
        push(&mut kv, "loop.eval_lead_in_s", format!("{}", self.episode.eval_lead_in_s));
        push(
            &mut kv,
            "loop.intra_interval_mean_reward",
            format!("{}", self.episode.intra_interval_mean_reward),
        );
        push(&mut kv, "loop.n_past_actions", format!("{}", self.n_past_actions));
        push(
            &mut kv,
            "loop.observation_delay_steps",
            format!("{}", self.observation_delay_steps),
        );
        push(&mut kv, "loop.sensor_noise_y", format!("{}", self.sensor_noise_y));
        push(&mut kv, "loop.sensor_noise_ydot", format!("{}", self.sensor_noise_ydot));
        push(&mut kv, "run.seed", format!("{}", self.seed));
        if let Some(p) = &self.output_dir {
            push(&mut kv, "run.output_dir", p.display().to_string());
        }
        push(&mut kv, "run.episodes", format!("{}", self.episodes));
        push(&mut kv, "calibration.peak_a_over_d", format!("{}", self.calibration.peak_a_over_d));
        push(&mut kv, "calibration.peak_tolerance", format!("{}", self.calibration.peak_tolerance));
        push(&mut kv, "calibration.band_u_low", format!("{}", self.calibration.band_u.0));
        push(&mut kv, "calibration.band_u_high", format!("{}", self.calibration.band_u.1));
        push(
            &mut kv,
            "calibration.band_min_a_over_d",
            format!("{}", self.calibration.band_min_a_over_d),
        );
        push(
            &mut kv,
            "calibration.low_u_max_a_over_d",
            format!("{}", self.calibration.low_u_max_a_over_d),
        );
        push(
            &mut kv,
            "calibration.lockon_peak_a_over_d",
            format!("{}", self.calibration.lockon_peak_a_over_d),
        );
        push(
            &mut kv,
            "calibration.lockon_peak_tolerance",
            format!("{}", self.calibration.lockon_peak_tolerance),
        );
        push(&mut kv, "calibration.lockon_high_max", format!("{}", self.calibration.lockon_high_max));
        push(
            &mut kv,
            "sweep.u_values",
            self.sweep_u.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
        push(
            &mut kv,
            "sweep.ratios",
            self.sweep_ratios.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
        push(&mut kv, "sweep.alpha0", format!("{}", self.sweep_alpha0));
        push(&mut kv, "decay.release_over_d", format!("{}", self.decay_release_over_d));
        kv.sort();
        for (k, v) in kv {
            writeln!(s, "{k} = {v}").ok();
        }
        s
    }

    /// FNV-1a 64-bit hash of the canonical text, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

impl ExperimentConfig {
    /// In-flow plant at this configuration's flow conditions.
    pub fn plant(&self, wake: WakeModelParams) -> Result<crate::plant::Plant> {
        crate::plant::Plant::in_flow(self.cylinder, self.flow, wake)
    }

    /// Control environment exactly as the training and evaluation commands
    /// use it: command grid, observation spec, turbulence, sensor noise and
    /// acquisition latency all applied.
    pub fn control_env(
        &self,
        wake: WakeModelParams,
        n_past: usize,
    ) -> Result<crate::control::ControlEnv> {
        let plant = self.plant(wake)?;
        Ok(
            crate::control::ControlEnv::new(plant, self.motor, self.episode, n_past)?
                .with_turbulence(self.turbulence)
                .with_sensor_noise(self.sensor_noise_y, self.sensor_noise_ydot)
                .with_observation_delay(self.observation_delay_steps),
        )
    }
}

/// Read calibrated wake constants from a flat key-value file.
pub fn load_wake_params(path: &Path, base: WakeModelParams) -> Result<WakeModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        VivError::Config(vec![format!("cannot read wake params {}: {e}", path.display())])
    })?;
    let mut bag = KeyBag::parse(&text);
    let eps = bag.f64_opt("wake.vdp_epsilon");
    let a = bag.f64_opt("wake.coupling_a");
    let kr = bag.f64_opt("wake.rotation_coupling");
    // The file may also restate the fixed constants; accept and apply them.
    let base_lift = bag.f64("wake.base_lift_coeff", base.base_lift_coeff);
    let added_mass = bag.f64("wake.added_mass_coeff", base.added_mass_coeff);
    let fluid_damping = bag.f64("wake.fluid_damping_coeff", base.fluid_damping_coeff);
    let receptivity = bag.f64("wake.receptivity_cutoff_ratio", base.receptivity_cutoff_ratio);
    bag.finish().map_err(VivError::Config)?;
    match (eps, a, kr) {
        (Some(vdp_epsilon), Some(coupling_a), Some(rotation_coupling)) => WakeModelParams {
            vdp_epsilon,
            coupling_a,
            rotation_coupling,
            base_lift_coeff: base_lift,
            added_mass_coeff: added_mass,
            fluid_damping_coeff: fluid_damping,
            receptivity_cutoff_ratio: receptivity,
        }
        .validated(),
        _ => Err(VivError::Config(vec![format!(
            "{} must define wake.vdp_epsilon, wake.coupling_a and wake.rotation_coupling",
            path.display()
        )])),
    }
}

/// Write calibrated wake constants as a flat key-value file.
pub fn write_wake_params(path: &Path, wake: &WakeModelParams, header: &str) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    writeln!(f, "wake.vdp_epsilon = {}", wake.vdp_epsilon)?;
    writeln!(f, "wake.coupling_a = {}", wake.coupling_a)?;
    writeln!(f, "wake.rotation_coupling = {}", wake.rotation_coupling)?;
    writeln!(f, "wake.base_lift_coeff = {}", wake.base_lift_coeff)?;
    writeln!(f, "wake.added_mass_coeff = {}", wake.added_mass_coeff)?;
    writeln!(f, "wake.fluid_damping_coeff = {}", wake.fluid_damping_coeff)?;
    writeln!(f, "wake.receptivity_cutoff_ratio = {}", wake.receptivity_cutoff_ratio)?;
    f.flush()?;
    Ok(())
}
