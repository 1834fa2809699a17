//! The agent-environment protocol: observation construction with optional
//! action history, the displacement-magnitude reward, episode execution on
//! the 100 ms action grid with 1 ms physics substeps, the training driver,
//! and deterministic evaluation.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actuator::{ActuationPath, MotorParams};
use crate::analysis;
use crate::error::{Result, VivError};
use crate::plant::{NoRotation, Plant, PlantState};
use crate::ppo::{self, ActorCritic, OptimizerPair, PpoConfig, Trajectory, Transition};
use crate::record::{ArtifactMeta, RunRecord, RunRow};
use crate::rl::{save_policy, DenseNet};

/// What the agent observes: normalized displacement and velocity, plus the
/// `n_past_actions` most recent duty commands (most recent first).
#[derive(Debug, Clone, Copy)]
pub struct ObservationSpec {
    pub n_past_actions: usize,
    pub diameter_m: f64,
    pub natural_frequency_hz: f64,
}

impl ObservationSpec {
    pub fn dim(&self) -> usize {
        2 + self.n_past_actions
    }
}

/// Episode timing. The defaults realize T = 25 T0 as 128 actions on a
/// 100 ms grid with 1 ms physics substeps.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    pub duration_periods: f64,
    pub steps_per_episode: usize,
    pub action_interval_s: f64,
    pub physics_dt_s: f64,
    pub eval_duration_s: f64,
    pub eval_lead_in_s: f64,
    /// Reward from the intra-interval mean |Y/D| instead of the
    /// end-of-interval sample.
    pub intra_interval_mean_reward: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            duration_periods: 25.0,
            steps_per_episode: 128,
            action_interval_s: 0.1,
            physics_dt_s: 0.001,
            eval_duration_s: 50.0,
            eval_lead_in_s: 10.0,
            intra_interval_mean_reward: false,
        }
    }
}

impl EpisodeConfig {
    pub fn substeps(&self) -> usize {
        (self.action_interval_s / self.physics_dt_s).round() as usize
    }

    /// Episode length must realize `duration_periods` natural periods within
    /// one action interval.
    pub fn validated(self, natural_frequency_hz: f64) -> Result<Self> {
        if self.steps_per_episode == 0 {
            return Err(VivError::ParameterDomain("steps_per_episode must be > 0".into()));
        }
        if !(self.physics_dt_s > 0.0 && self.physics_dt_s <= 0.005) {
            return Err(VivError::ParameterDomain(format!(
                "physics_dt_s must be in (0, 5 ms], got {}",
                self.physics_dt_s
            )));
        }
        if self.action_interval_s <= 0.0 {
            return Err(VivError::ParameterDomain("action_interval_s must be > 0".into()));
        }
        let t_episode = self.steps_per_episode as f64 * self.action_interval_s;
        let t_target = self.duration_periods / natural_frequency_hz;
        if (t_episode - t_target).abs() > self.action_interval_s {
            return Err(VivError::ParameterDomain(format!(
                "episode spans {t_episode:.3} s but {} periods require {t_target:.3} s \
                 (tolerance one action interval)",
                self.duration_periods
            )));
        }
        Ok(self)
    }
}

/// Reward r = -|Y/D|.
pub fn reward(y_m: f64, diameter_m: f64) -> f64 {
    debug_assert!(diameter_m > 0.0);
    -(y_m / diameter_m).abs()
}

/// Ring of recent executed duties, most recent first, zero-padded while
/// fewer than `n` actions have been taken (the motor starts at rest with
/// zero held duty).
#[derive(Debug, Clone)]
pub struct ActionHistory {
    n: usize,
    recent: Vec<f64>,
}

impl ActionHistory {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            recent: vec![0.0; n],
        }
    }

    pub fn push(&mut self, duty: f64) {
        if self.n == 0 {
            return;
        }
        self.recent.rotate_right(1);
        self.recent[0] = duty;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.recent
    }
}

/// [Y/D, Ydot/(f_n D), a_{t-1}, ..., a_{t-n}].
pub fn build_observation(
    state: &PlantState,
    history: &ActionHistory,
    spec: &ObservationSpec,
) -> Vec<f64> {
    let mut obs = Vec::with_capacity(spec.dim());
    obs.push(state.y_m / spec.diameter_m);
    obs.push(state.ydot_m_per_s / (spec.natural_frequency_hz * spec.diameter_m));
    obs.extend_from_slice(history.as_slice());
    obs
}

/// Plant, actuator and protocol bundled for episodes and evaluations.
#[derive(Debug, Clone)]
pub struct ControlEnv {
    pub plant: Plant,
    pub motor: MotorParams,
    pub episode: EpisodeConfig,
    pub obs_spec: ObservationSpec,
    /// Wake phase-diffusion intensity: standard deviation of the white
    /// noise added to the wake rate per unit sqrt(second). Models the
    /// turbulent free stream that keeps vortex shedding from being
    /// perfectly predictable; zero disables it.
    pub turbulence: f64,
    /// Measurement noise the agent sees: standard deviations added to the
    /// normalized displacement and velocity observation components. The
    /// recorded physics stays clean; only the agent's inputs are noisy.
    pub sensor_noise_y: f64,
    pub sensor_noise_ydot: f64,
    /// Acquisition latency in command intervals: the kinematic part of the
    /// observation at tick k reflects the state `observation_delay_steps`
    /// intervals earlier (the command pipeline of the rig samples, computes,
    /// then actuates). Action history is unaffected.
    pub observation_delay_steps: usize,
}

/// Reward used when an episode aborts on plant divergence: large enough to
/// dominate, finite enough to keep advantage statistics usable.
pub const ABORT_REWARD: f64 = -5.0;

impl ControlEnv {
    pub fn new(plant: Plant, motor: MotorParams, episode: EpisodeConfig, n_past: usize) -> Result<Self> {
        let f_n = plant.natural_frequency_hz();
        let episode = episode.validated(f_n)?;
        let motor = motor.validated()?;
        Ok(Self {
            plant,
            motor,
            episode,
            obs_spec: ObservationSpec {
                n_past_actions: n_past,
                diameter_m: plant.cylinder.diameter_m,
                natural_frequency_hz: f_n,
            },
            turbulence: 0.0,
            sensor_noise_y: 0.0,
            sensor_noise_ydot: 0.0,
            observation_delay_steps: 0,
        })
    }

    pub fn with_observation_delay(mut self, steps: usize) -> Self {
        self.observation_delay_steps = steps;
        self
    }

    pub fn with_turbulence(mut self, turbulence: f64) -> Self {
        self.turbulence = turbulence.max(0.0);
        self
    }

    pub fn with_sensor_noise(mut self, sigma_y: f64, sigma_ydot: f64) -> Self {
        self.sensor_noise_y = sigma_y.max(0.0);
        self.sensor_noise_ydot = sigma_ydot.max(0.0);
        self
    }

    fn noisy_observation<R: Rng>(
        &self,
        state: &PlantState,
        history: &ActionHistory,
        rng: &mut R,
    ) -> Vec<f64> {
        let mut obs = build_observation(state, history, &self.obs_spec);
        if self.sensor_noise_y > 0.0 {
            obs[0] += self.sensor_noise_y * crate::rl::standard_normal(rng);
        }
        if self.sensor_noise_ydot > 0.0 {
            obs[1] += self.sensor_noise_ydot * crate::rl::standard_normal(rng);
        }
        obs
    }

    fn wake_kick<R: Rng>(&self, state: &mut PlantState, rng: &mut R) {
        if self.turbulence > 0.0 {
            state.wake_qdot += self.turbulence
                * self.episode.physics_dt_s.sqrt()
                * crate::rl::standard_normal(rng);
        }
    }

    /// One natural period of the developed uncontrolled limit cycle, sampled
    /// at the physics step: the pool of initial conditions for episodes.
    pub fn limit_cycle(&self) -> Result<Vec<PlantState>> {
        let d = self.plant.cylinder.diameter_m;
        let init = PlantState {
            y_m: 0.01 * d,
            ..PlantState::rest()
        };
        let t0 = self.plant.natural_period_s();
        let (settled, _) = self.plant.integrate(
            init,
            &NoRotation,
            30.0 * t0,
            self.episode.physics_dt_s,
            usize::MAX,
        )?;
        let (_, cycle) = self
            .plant
            .integrate(settled, &NoRotation, t0, self.episode.physics_dt_s, 1)?;
        let states: Vec<PlantState> = (0..cycle.t.len())
            .map(|i| PlantState {
                y_m: cycle.y[i],
                ydot_m_per_s: cycle.ydot[i],
                wake_q: cycle.q[i],
                wake_qdot: cycle.qdot[i],
                time_s: 0.0,
            })
            .collect();
        if states.is_empty() {
            return Err(VivError::Identification("empty limit cycle".into()));
        }
        Ok(states)
    }

    /// Run one episode from `init`. Stochastic mode samples the policy and
    /// is used for training; deterministic mode executes the policy mean.
    ///
    /// Physics divergence aborts the episode: the failing step is recorded
    /// with the abort reward and a terminal flag, and the truncated
    /// trajectory is returned.
    pub fn run_episode<R: Rng>(
        &self,
        ac: &ActorCritic,
        init: &PlantState,
        rng: &mut R,
        stochastic: bool,
    ) -> Result<(Trajectory, RunRecord)> {
        if ac.obs_dim() != self.obs_spec.dim() {
            return Err(VivError::Shape(format!(
                "agent expects {} observation components, spec provides {}",
                ac.obs_dim(),
                self.obs_spec.dim()
            )));
        }
        let ep = &self.episode;
        let d = self.plant.cylinder.diameter_m;
        let v = self.plant.flow.velocity_m_per_s;
        let bound = self.motor.duty_limit;
        let substeps = ep.substeps();

        let mut state = PlantState {
            time_s: 0.0,
            ..*init
        };
        let mut motor = ActuationPath::at_rest(self.plant.receptivity_tau_s());
        let mut history = ActionHistory::new(self.obs_spec.n_past_actions);
        let mut traj = Trajectory::default();
        let mut record = RunRecord::new(ep.action_interval_s);
        let mut state_ring: Vec<PlantState> = vec![state; self.observation_delay_steps + 1];

        for k in 0..ep.steps_per_episode {
            state_ring.rotate_right(1);
            state_ring[0] = state;
            let sensed = state_ring[self.observation_delay_steps.min(k)];
            let obs = self.noisy_observation(&sensed, &history, rng);
            let value = ac.value(&obs)?;
            let sampled = if stochastic {
                ac.sample(&obs, bound, rng)?
            } else {
                let mean = ac.policy_mean(&obs)?;
                crate::rl::SampledAction {
                    raw: mean,
                    clamped: mean.clamp(-bound, bound),
                    logprob: crate::rl::gaussian_logprob(&[mean], &[ac.head.log_std[0]], &[mean]),
                }
            };
            let t_command = k as f64 * ep.action_interval_s;
            motor.hold_command(sampled.raw, t_command, &self.motor)?;
            let duty = motor.motor.held_duty;

            let mut abs_sum = 0.0;
            let mut diverged = false;
            for _ in 0..substeps {
                let provider = motor.provider(state.time_s, &self.motor);
                match self.plant.rk4_step(&state, &provider, ep.physics_dt_s) {
                    Ok(next) => {
                        state = next;
                        self.wake_kick(&mut state, rng);
                        motor.step(ep.physics_dt_s, &self.motor);
                        abs_sum += (state.y_m / d).abs();
                    }
                    Err(VivError::Divergence(_)) => {
                        diverged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }

            let r = if diverged {
                ABORT_REWARD
            } else if ep.intra_interval_mean_reward {
                -abs_sum / substeps as f64
            } else {
                reward(state.y_m, d)
            };

            traj.transitions.push(Transition {
                obs,
                action: duty,
                raw_action: sampled.raw,
                logprob: sampled.logprob,
                reward: r,
                value,
                done: diverged,
            });
            history.push(duty);

            if !diverged {
                let alpha = motor.motor.omega_rad_per_s * d / (2.0 * v);
                record.push(RunRow {
                    t_s: state.time_s,
                    y_over_d: state.y_m / d,
                    ydot_norm: state.ydot_m_per_s / (self.obs_spec.natural_frequency_hz * d),
                    duty,
                    alpha,
                    reward: r,
                });
            } else {
                traj.bootstrap_value = 0.0;
                return Ok((traj, record));
            }
        }

        state_ring.rotate_right(1);
        state_ring[0] = state;
        let sensed = state_ring[self.observation_delay_steps.min(ep.steps_per_episode)];
        let final_obs = self.noisy_observation(&sensed, &history, rng);
        traj.bootstrap_value = ac.value(&final_obs)?;
        Ok((traj, record))
    }

    /// Steady uncontrolled amplitude of this environment (the suppression
    /// reference), under the same turbulence as controlled runs; the noise
    /// sequence is pinned to a fixed seed so the reference is reproducible.
    pub fn uncontrolled_amplitude(&self) -> Result<f64> {
        let t0 = self.plant.natural_period_s();
        let d = self.plant.cylinder.diameter_m;
        let dt = self.episode.physics_dt_s;
        let mut state = PlantState {
            y_m: 0.01 * d,
            ..PlantState::rest()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        let steps = (40.0 * t0 / dt).round() as usize;
        let mut y_over_d = Vec::with_capacity(steps);
        for _ in 0..steps {
            state = self.plant.rk4_step(&state, &NoRotation, dt)?;
            self.wake_kick(&mut state, &mut rng);
            y_over_d.push(state.y_m / d);
        }
        analysis::steady_amplitude(&y_over_d, dt, 0.4, t0)
    }

    /// Deterministic fixed-weight rollout: an uncontrolled lead-in (duty
    /// held at zero) followed by `duration_s` of policy-mean control on the
    /// action grid.
    pub fn evaluate_deterministic(
        &self,
        actor: &DenseNet,
        duration_s: f64,
        seed: u64,
    ) -> Result<EvalOutput> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if actor.input_dim() != self.obs_spec.dim() {
            return Err(VivError::Checkpoint(format!(
                "checkpoint expects {} observation components, spec provides {}",
                actor.input_dim(),
                self.obs_spec.dim()
            )));
        }
        let ep = &self.episode;
        let d = self.plant.cylinder.diameter_m;
        let v = self.plant.flow.velocity_m_per_s;
        let f_n = self.obs_spec.natural_frequency_hz;
        let bound = self.motor.duty_limit;
        let substeps = ep.substeps();

        let cycle = self.limit_cycle()?;
        // Fixed phase: release at peak displacement.
        let peak = cycle
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.y_m.abs().total_cmp(&b.1.y_m.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut state = cycle[peak];
        let mut motor = ActuationPath::at_rest(self.plant.receptivity_tau_s());
        let mut history = ActionHistory::new(self.obs_spec.n_past_actions);
        let mut record = RunRecord::new(ep.action_interval_s);

        let lead_steps = (ep.eval_lead_in_s / ep.action_interval_s).round() as usize;
        let control_steps = (duration_s / ep.action_interval_s).round() as usize;
        let mut state_ring: Vec<PlantState> = vec![state; self.observation_delay_steps + 1];

        for k in 0..lead_steps + control_steps {
            state_ring.rotate_right(1);
            state_ring[0] = state;
            let controlled = k >= lead_steps;
            let duty = if controlled {
                let sensed = state_ring[self.observation_delay_steps.min(k)];
                let obs = self.noisy_observation(&sensed, &history, &mut rng);
                let mean = actor.forward(&obs)?[0];
                mean.clamp(-bound, bound)
            } else {
                0.0
            };
            let t_command = k as f64 * ep.action_interval_s;
            motor.hold_command(duty, t_command, &self.motor)?;
            for _ in 0..substeps {
                let provider = motor.provider(state.time_s, &self.motor);
                state = self.plant.rk4_step(&state, &provider, ep.physics_dt_s)?;
                self.wake_kick(&mut state, &mut rng);
                motor.step(ep.physics_dt_s, &self.motor);
            }
            if controlled {
                history.push(duty);
            }
            let alpha = motor.motor.omega_rad_per_s * d / (2.0 * v);
            record.push(RunRow {
                t_s: state.time_s,
                y_over_d: state.y_m / d,
                ydot_norm: state.ydot_m_per_s / (f_n * d),
                duty,
                alpha,
                reward: reward(state.y_m, d),
            });
        }

        let t0 = self.plant.natural_period_s();
        let control_rows = &record.rows[lead_steps..];
        let controlled_y: Vec<f64> = control_rows.iter().map(|r| r.y_over_d).collect();
        let controlled_a =
            analysis::steady_amplitude(&controlled_y, ep.action_interval_s, 0.4, t0)?;
        let uncontrolled_a = self.uncontrolled_amplitude()?;
        let suppression = analysis::suppression_ratio(controlled_a, uncontrolled_a)?;
        let alpha_series: Vec<f64> = control_rows.iter().map(|r| r.alpha).collect();
        let dominant_alpha_ratio =
            match analysis::dominant_frequency(&alpha_series, 1.0 / ep.action_interval_s) {
                Ok(f) => f / f_n,
                Err(VivError::NoDominantFrequency(_)) => 0.0,
                Err(e) => return Err(e),
            };

        Ok(EvalOutput {
            record,
            lead_in_rows: lead_steps,
            uncontrolled_a_over_d: uncontrolled_a,
            controlled_a_over_d: controlled_a,
            suppression,
            dominant_alpha_ratio,
        })
    }
}

/// Deterministic-evaluation results.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub record: RunRecord,
    pub lead_in_rows: usize,
    pub uncontrolled_a_over_d: f64,
    pub controlled_a_over_d: f64,
    pub suppression: f64,
    pub dominant_alpha_ratio: f64,
}

/// Per-episode training metrics, one CSV row each.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_alpha: f64,
    pub dominant_freq_ratio: f64,
    pub clip_fraction: f64,
    pub kl: f64,
}

/// File destinations for a training run.
#[derive(Debug, Clone)]
pub struct TrainSink {
    pub log_csv: PathBuf,
    pub best_checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
    pub meta: ArtifactMeta,
}

/// Outcome of a training run.
pub struct TrainOutput {
    pub history: Vec<EpisodeMetrics>,
    pub agent: ActorCritic,
    pub best_agent: ActorCritic,
    pub best_episode: Option<usize>,
    /// Set when training stopped early on a non-finite training state.
    pub halted: Option<String>,
}

/// Train for `episodes` episodes: stochastic rollouts from random phases of
/// the developed limit cycle, one PPO update per trajectory.
pub fn train(
    env: &ControlEnv,
    ppo_cfg: &PpoConfig,
    episodes: usize,
    seed: u64,
    sink: Option<&TrainSink>,
) -> Result<TrainOutput> {
    let ppo_cfg = ppo_cfg.validated()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ac = ActorCritic::new(env.obs_spec.dim(), &mut rng)?;
    let mut opt = OptimizerPair::new(&ac);
    let mut best: Option<(f64, usize, ActorCritic)> = None;
    let mut history: Vec<EpisodeMetrics> = Vec::with_capacity(episodes);
    let mut halted = None;

    let cycle = if episodes > 0 { env.limit_cycle()? } else { Vec::new() };
    let f_n = env.obs_spec.natural_frequency_hz;

    for episode in 0..episodes {
        let init = cycle[rng.random_range(0..cycle.len())];
        let (traj, record) = env.run_episode(&ac, &init, &mut rng, true)?;
        if traj.is_empty() {
            halted = Some(format!("episode {episode}: empty trajectory"));
            break;
        }
        let metrics = match ppo::update(&mut ac, &mut opt, &traj, &ppo_cfg, &mut rng) {
            Ok(m) => m,
            Err(VivError::Training(msg)) => {
                halted = Some(format!("episode {episode}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let mean_reward = traj.mean_reward();
        let alpha = record.alpha();
        let dominant_freq_ratio = match analysis::dominant_frequency(
            &alpha,
            1.0 / env.episode.action_interval_s,
        ) {
            Ok(f) => f / f_n,
            Err(_) => 0.0,
        };
        history.push(EpisodeMetrics {
            episode,
            mean_reward,
            mean_alpha: record.mean_alpha(),
            dominant_freq_ratio,
            clip_fraction: metrics.clip_fraction,
            kl: metrics.kl,
        });
        if best.as_ref().map_or(true, |(r, _, _)| mean_reward > *r) {
            best = Some((mean_reward, episode, ac.clone()));
        }
    }

    let (best_episode, best_agent) = match best {
        Some((_, ep, agent)) => (Some(ep), agent),
        None => (None, ac.clone()),
    };

    if let Some(sink) = sink {
        if !history.is_empty() {
            write_training_log(&sink.log_csv, &history, &sink.meta)?;
            save_policy(&sink.best_checkpoint, &best_agent.actor, &best_agent.head)?;
            save_policy(&sink.final_checkpoint, &ac.actor, &ac.head)?;
        }
    }

    Ok(TrainOutput {
        history,
        agent: ac,
        best_agent,
        best_episode,
        halted,
    })
}

/// Episode metrics CSV: one row per episode.
pub fn write_training_log(
    path: &Path,
    history: &[EpisodeMetrics],
    meta: &ArtifactMeta,
) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", meta.header_line())?;
    writeln!(
        f,
        "episode,mean_reward,mean_alpha,dominant_freq_ratio,clip_fraction,kl"
    )?;
    for m in history {
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            m.episode, m.mean_reward, m.mean_alpha, m.dominant_freq_ratio, m.clip_fraction, m.kl
        )?;
    }
    f.flush()?;
    Ok(())
}
