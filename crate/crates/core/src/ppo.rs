//! Proximal policy optimization: clipped surrogate objective, generalized
//! advantage estimation, per-trajectory updates.
//!
//! Likelihood ratios are evaluated on the raw (pre-clip) Gaussian sample
//! stored in each transition; the environment only ever saw the clamped
//! duty. This keeps rho identically 1 when the new and old policies agree.

use rand::Rng;

use crate::error::{Result, VivError};
use crate::rl::{
    adam_update, gaussian_logprob, sample_action, Activation, DenseNet, GaussianHead, NetGradients,
    OptimizerState, SampledAction,
};

/// One environment step as the learner sees it.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Executed duty, |action| <= duty bound.
    pub action: f64,
    /// Pre-clip Gaussian sample that `logprob` refers to.
    pub raw_action: f64,
    pub logprob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Ordered transitions of one episode plus the bootstrap value of the state
/// after the last step (episodes are time-truncated, not terminal).
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.transitions.is_empty() {
            return 0.0;
        }
        self.transitions.iter().map(|t| t.reward).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Decoupled weight decay applied to the actor parameters after each
    /// optimizer step. Keeps reward-flat parameter directions (e.g. a duty
    /// bias whose rotation the wake cannot feel) from random-walking away
    /// from zero. Zero disables it.
    pub weight_decay: f64,
    /// Stop the update's epoch loop early once the full-batch KL estimate
    /// exceeds this threshold. Guards late training against destructive
    /// over-updates on noisy advantages. Zero disables the guard.
    pub kl_stop: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs_per_update: 10,
            minibatch_size: 32,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            entropy_coef: 0.003,
            value_coef: 0.5,
            weight_decay: 1e-4,
            kl_stop: 0.03,
        }
    }
}

impl PpoConfig {
    pub fn validated(self) -> Result<Self> {
        let mut issues = Vec::new();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            issues.push(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            issues.push(format!("gae_lambda must be in (0, 1], got {}", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps <= 0.5) {
            issues.push(format!("clip_eps must be in (0, 0.5], got {}", self.clip_eps));
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 {
            issues.push("epochs_per_update and minibatch_size must be positive".into());
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            issues.push("learning rates must be positive".into());
        }
        if self.entropy_coef < 0.0
            || self.value_coef < 0.0
            || self.weight_decay < 0.0
            || self.kl_stop < 0.0
        {
            issues.push("entropy_coef, value_coef, weight_decay and kl_stop must be >= 0".into());
        }
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(VivError::ParameterDomain(issues.join("; ")))
        }
    }
}

/// Policy and value networks. Both take the same observation vector; the
/// actor outputs the Gaussian mean, the critic a scalar value.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: DenseNet,
    pub head: GaussianHead,
    pub critic: DenseNet,
}

impl ActorCritic {
    /// Two 64-unit tanh hidden layers for both networks; the policy output
    /// layer starts near zero so early episodes resemble the uncontrolled
    /// plant; log_std starts at -0.5.
    pub fn new<R: Rng>(obs_dim: usize, rng: &mut R) -> Result<Self> {
        let mut actor = DenseNet::new(vec![obs_dim, 64, 64, 1], Activation::Tanh)?;
        actor.init_scaled_uniform(rng, 1.0, 0.01);
        let mut critic = DenseNet::new(vec![obs_dim, 64, 64, 1], Activation::Tanh)?;
        critic.init_scaled_uniform(rng, 1.0, 1.0);
        Ok(Self {
            actor,
            head: GaussianHead::new(1, -0.5),
            critic,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(obs)?[0])
    }

    pub fn policy_mean(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.actor.forward(obs)?[0])
    }

    /// Stochastic action for training rollouts.
    pub fn sample<R: Rng>(&self, obs: &[f64], bound: f64, rng: &mut R) -> Result<SampledAction> {
        let mean = self.policy_mean(obs)?;
        Ok(sample_action(mean, self.head.log_std[0], bound, rng))
    }

    /// Deterministic action: the clamped policy mean, no sampling.
    pub fn act_deterministic(&self, obs: &[f64], bound: f64) -> Result<f64> {
        Ok(self.policy_mean(obs)?.clamp(-bound, bound))
    }
}

/// GAE advantages (normalized to zero mean, unit variance over the batch)
/// and value-function regression targets (computed from raw advantages).
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = traj.len();
    if n == 0 {
        return Err(VivError::Training("empty trajectory".into()));
    }
    let tr = &traj.transitions;
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let next_value = if tr[t].done {
            0.0
        } else if t + 1 == n {
            traj.bootstrap_value
        } else {
            tr[t + 1].value
        };
        let delta = tr[t].reward + gamma * next_value - tr[t].value;
        let carry = if tr[t].done { 0.0 } else { gae };
        gae = delta + gamma * lambda * carry;
        advantages[t] = gae;
    }
    let returns: Vec<f64> = advantages
        .iter()
        .zip(tr)
        .map(|(a, t)| a + t.value)
        .collect();

    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < 1e-8 {
        for a in &mut advantages {
            *a = 0.0;
        }
    } else {
        for a in &mut advantages {
            *a = (*a - mean) / (std + 1e-8);
        }
    }
    Ok((advantages, returns))
}

/// Loss components of one minibatch evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// Gradients for the actor (net + log_std) and critic.
pub struct PpoGradients {
    pub actor: NetGradients,
    pub log_std: Vec<f64>,
    pub critic: NetGradients,
}

/// Clipped-surrogate PPO loss and exact gradients over the given minibatch
/// indices. Advantages arrive precomputed (normalized or not; this function
/// uses them as-is).
pub fn ppo_loss(
    traj: &Trajectory,
    advantages: &[f64],
    returns: &[f64],
    indices: &[usize],
    ac: &ActorCritic,
    cfg: &PpoConfig,
) -> Result<(LossParts, PpoGradients)> {
    if indices.is_empty() {
        return Err(VivError::Training("empty minibatch".into()));
    }
    let scale = 1.0 / indices.len() as f64;
    let mut parts = LossParts::default();
    let mut actor_grads = NetGradients::zeros_like(&ac.actor);
    let mut log_std_grad = vec![0.0; ac.head.log_std.len()];
    let mut critic_grads = NetGradients::zeros_like(&ac.critic);

    let entropy = ac.head.entropy();
    parts.entropy = entropy;
    for ls in log_std_grad.iter_mut() {
        // d(-entropy_coef * H)/d log_std = -entropy_coef.
        *ls = -cfg.entropy_coef;
    }

    for &i in indices {
        let tr = &traj.transitions[i];
        let adv = advantages[i];
        let ret = returns[i];

        let cache_a = ac.actor.forward_cached(&tr.obs)?;
        let mean = cache_a.output()[0];
        let log_std = ac.head.log_std[0];
        let sigma = log_std.exp();
        let logprob_new = gaussian_logprob(&[mean], &[log_std], &[tr.raw_action]);
        let rho = (logprob_new - tr.logprob).exp();
        if !rho.is_finite() {
            return Err(VivError::Training(format!(
                "non-finite likelihood ratio at sample {i}: logprob_new = {logprob_new}, \
                 logprob_old = {}, raw_action = {}",
                tr.logprob, tr.raw_action
            )));
        }
        let clipped_rho = rho.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let unclipped = rho * adv;
        let clipped = clipped_rho * adv;
        parts.policy += -unclipped.min(clipped) * scale;
        parts.kl += (tr.logprob - logprob_new) * scale;
        if (rho - 1.0).abs() > cfg.clip_eps {
            parts.clip_fraction += scale;
        }

        // Surrogate gradient flows only through the unclipped branch when it
        // is the active minimum.
        let d_loss_d_logprob = if unclipped <= clipped { -adv * rho } else { 0.0 };
        if d_loss_d_logprob != 0.0 {
            let z = (tr.raw_action - mean) / sigma;
            let d_logprob_d_mean = z / sigma;
            let d_logprob_d_log_std = z * z - 1.0;
            let upstream = [d_loss_d_logprob * d_logprob_d_mean * scale];
            let g = ac.actor.backward(&cache_a, &upstream)?;
            actor_grads.add_scaled(&g, 1.0);
            log_std_grad[0] += d_loss_d_logprob * d_logprob_d_log_std * scale;
        }

        let cache_c = ac.critic.forward_cached(&tr.obs)?;
        let v = cache_c.output()[0];
        parts.value += cfg.value_coef * (v - ret) * (v - ret) * scale;
        let upstream_c = [cfg.value_coef * 2.0 * (v - ret) * scale];
        let gc = ac.critic.backward(&cache_c, &upstream_c)?;
        critic_grads.add_scaled(&gc, 1.0);
    }

    parts.total = parts.policy + parts.value - cfg.entropy_coef * parts.entropy;
    Ok((
        parts,
        PpoGradients {
            actor: actor_grads,
            log_std: log_std_grad,
            critic: critic_grads,
        },
    ))
}

/// Adam state for the actor (net parameters plus log_std tail) and critic.
pub struct OptimizerPair {
    pub actor: OptimizerState,
    pub critic: OptimizerState,
}

impl OptimizerPair {
    pub fn new(ac: &ActorCritic) -> Self {
        Self {
            actor: OptimizerState::new(ac.actor.param_count() + ac.head.log_std.len()),
            critic: OptimizerState::new(ac.critic.param_count()),
        }
    }
}

/// Metrics of one policy update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateMetrics {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// One PPO update: `epochs_per_update` shuffled passes of minibatched
/// loss + Adam over the trajectory. Metrics are evaluated on the full batch
/// after the final epoch.
pub fn update<R: Rng>(
    ac: &mut ActorCritic,
    opt: &mut OptimizerPair,
    traj: &Trajectory,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateMetrics> {
    let (advantages, returns) = compute_gae(traj, cfg.gamma, cfg.gae_lambda)?;
    let n = traj.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut actor_flat = Vec::with_capacity(ac.actor.param_count() + 1);
    let mut grad_flat = Vec::with_capacity(ac.actor.param_count() + 1);
    let mut critic_flat = Vec::with_capacity(ac.critic.param_count());
    let mut critic_grad_flat = Vec::with_capacity(ac.critic.param_count());

    let all: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs_per_update {
        // Fisher-Yates with the caller's rng keeps updates reproducible.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        for chunk in indices.chunks(cfg.minibatch_size) {
            let (_, grads) = ppo_loss(traj, &advantages, &returns, chunk, ac, cfg)?;

            ac.actor.write_flat(&mut actor_flat);
            actor_flat.extend_from_slice(&ac.head.log_std);
            grads.actor.write_flat(&mut grad_flat);
            grad_flat.extend_from_slice(&grads.log_std);
            adam_update(&mut actor_flat, &grad_flat, &mut opt.actor, cfg.lr_actor)?;
            if cfg.weight_decay > 0.0 {
                let keep = 1.0 - cfg.weight_decay;
                let split = actor_flat.len() - ac.head.log_std.len();
                for p in &mut actor_flat[..split] {
                    *p *= keep;
                }
            }
            let split = actor_flat.len() - ac.head.log_std.len();
            ac.actor.read_flat(&actor_flat[..split])?;
            ac.head.log_std.copy_from_slice(&actor_flat[split..]);
            ac.head.clamp();

            ac.critic.write_flat(&mut critic_flat);
            grads.critic.write_flat(&mut critic_grad_flat);
            adam_update(
                &mut critic_flat,
                &critic_grad_flat,
                &mut opt.critic,
                cfg.lr_critic,
            )?;
            ac.critic.read_flat(&critic_flat)?;
        }
        if cfg.kl_stop > 0.0 {
            let (parts, _) = ppo_loss(traj, &advantages, &returns, &all, ac, cfg)?;
            if parts.kl.abs() > cfg.kl_stop {
                break;
            }
        }
    }

    let (parts, _) = ppo_loss(traj, &advantages, &returns, &all, ac, cfg)?;
    Ok(UpdateMetrics {
        loss: parts.total,
        policy_loss: parts.policy,
        value_loss: parts.value,
        entropy: parts.entropy,
        kl: parts.kl,
        clip_fraction: parts.clip_fraction,
    })
}
