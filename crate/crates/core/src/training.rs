//! Self-play REINFORCE under selfish or prosocial rewards.
//!
//! Each batch plays `batch_size` episodes between the two current policies.
//! For every player the update direction is
//! `mean over samples of (G_t - b_t) * grad log pi(a_t | o_t) + beta * grad H(pi(. | o_t))`,
//! where `G_t` is the discounted return of the shaped rewards and `b_t` the
//! mean return at the same turn index over the *other* episodes of the batch.
//! Leaving the episode out keeps the baseline independent of the action it
//! scores, so it cannot bias the gradient. Both players step simultaneously
//! with Adam; the entropy weight decays linearly to zero.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::agents::FixedAgent;
use crate::policy::{entropy_logit_grad, Architecture, PolicyParams, Workspace};
use crate::pomg::{play, Environment, GameSpec, Seat};
use crate::rng::{derive_path, rng_from_seed};
use crate::{Error, Result};

/// How per-turn rewards are turned into training signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// Each player optimises its own reward.
    Selfish,
    /// Both players optimise the sum of rewards.
    Prosocial,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Selfish => "selfish",
            Scheme::Prosocial => "prosocial",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selfish" => Ok(Scheme::Selfish),
            "prosocial" => Ok(Scheme::Prosocial),
            _ => Err(Error::Config(alloc::format!("unknown reward scheme `{s}`"))),
        }
    }
}

pub fn shape_rewards(scheme: Scheme, r1: f64, r2: f64) -> (f64, f64) {
    match scheme {
        Scheme::Selfish => (r1, r2),
        Scheme::Prosocial => {
            let joint = r1 + r2;
            (joint, joint)
        }
    }
}

/// Policy family to train.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Network {
    Tabular,
    Feedforward { hidden: Vec<usize> },
}

impl Network {
    pub fn architecture(&self, spec: &GameSpec, seat: Seat) -> Architecture {
        let (inputs, actions) = (spec.observation_lengths[seat.index()], spec.action_counts[seat.index()]);
        match self {
            Network::Tabular => Architecture::Tabular { inputs, actions },
            Network::Feedforward { hidden } => Architecture::feedforward(inputs, hidden, actions),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub network: Network,
    pub batches: usize,
    /// Episodes per batch.
    pub batch_size: usize,
    pub episode_length: usize,
    pub learning_rate: f64,
    pub discount: f64,
    /// Initial entropy bonus weight; decays linearly to 0 over training.
    pub entropy_weight: f64,
    /// Parameters start uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
    /// Record a curve point every this many batches (and after the last one).
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scheme: Scheme::Selfish,
            network: Network::Feedforward { hidden: vec![64, 64] },
            batches: 2000,
            batch_size: 32,
            episode_length: 200,
            learning_rate: 1e-3,
            discount: 0.98,
            entropy_weight: 0.01,
            init_scale: 0.05,
            eval_every: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid("discount", "must lie in (0, 1]"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size", "the baseline needs at least 2 episodes per batch"));
        }
        if self.batches == 0 || self.episode_length == 0 || self.eval_every == 0 {
            return Err(Error::invalid("training", "batches, episode_length and eval_every must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and non-negative"));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(Error::invalid("entropy_weight", "must be finite and non-negative"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init_scale", "must be finite and non-negative"));
        }
        Ok(())
    }

    fn entropy_at(&self, batch: usize) -> f64 {
        self.entropy_weight * (1.0 - batch as f64 / self.batches as f64)
    }
}

/// Average raw reward per turn during one training batch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    /// 1-based index of the batch.
    pub batch: usize,
    pub rates: [f64; 2],
    pub joint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPair {
    pub params: [PolicyParams; 2],
    pub curve: Vec<CurvePoint>,
    pub scheme: Scheme,
}

/// Experience of one player over a batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectories {
    obs_len: usize,
    obs: Vec<f64>,
    actions: Vec<usize>,
    /// Shaped reward per turn.
    rewards: Vec<f64>,
    /// `(start, len)` of each episode in the flat buffers.
    episodes: Vec<(usize, usize)>,
}

impl Trajectories {
    fn new(obs_len: usize) -> Self {
        Trajectories { obs_len, ..Default::default() }
    }

    pub fn samples(&self) -> usize {
        self.actions.len()
    }

    pub fn episodes(&self) -> usize {
        self.episodes.len()
    }

    fn observation(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_len..(i + 1) * self.obs_len]
    }

    /// Discounted return at every sample.
    pub fn returns(&self, discount: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.rewards.len()];
        for &(start, len) in &self.episodes {
            let mut acc = 0.0;
            for i in (start..start + len).rev() {
                acc = self.rewards[i] + discount * acc;
                g[i] = acc;
            }
        }
        g
    }
}

/// A batch of self-play episodes, seen from both seats.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub players: [Trajectories; 2],
    /// Raw (unshaped) reward totals.
    pub raw_totals: [f64; 2],
    pub turns: usize,
}

impl Batch {
    pub fn raw_rates(&self) -> [f64; 2] {
        let t = self.turns.max(1) as f64;
        [self.raw_totals[0] / t, self.raw_totals[1] / t]
    }
}

/// Plays batch `batch` of a run with the given policies.
pub fn collect_batch<E: Environment + ?Sized>(
    env: &E,
    params: &[PolicyParams; 2],
    cfg: &TrainConfig,
    batch: usize,
) -> Result<Batch> {
    let spec = env.spec();
    let mut players = [Trajectories::new(spec.observation_lengths[0]), Trajectories::new(spec.observation_lengths[1])];
    let mut raw_totals = [0.0; 2];
    let mut turns = 0;
    let mut a1 = FixedAgent::new(params[0].clone());
    let mut a2 = FixedAgent::new(params[1].clone());
    for e in 0..cfg.batch_size {
        let start = players[0].actions.len();
        let seed = derive_path(cfg.seed, &[1, batch as u64, e as u64]);
        play(env, [&mut a1, &mut a2], cfg.episode_length, seed, |obs, actions, rewards| {
            let shaped = shape_rewards(cfg.scheme, rewards[0], rewards[1]);
            for (i, p) in players.iter_mut().enumerate() {
                p.obs.extend_from_slice(&obs[i]);
                p.actions.push(actions[i]);
            }
            players[0].rewards.push(shaped.0);
            players[1].rewards.push(shaped.1);
            raw_totals[0] += rewards[0];
            raw_totals[1] += rewards[1];
        })?;
        let len = players[0].actions.len() - start;
        turns += len;
        for p in &mut players {
            p.episodes.push((start, len));
        }
    }
    Ok(Batch { players, raw_totals, turns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    None,
    /// Mean return at the same turn index over the other episodes.
    LeaveOneOut,
}

/// Advantage of every sample.
pub fn advantages(traj: &Trajectories, discount: f64, baseline: Baseline) -> Vec<f64> {
    let g = traj.returns(discount);
    if baseline == Baseline::None {
        return g;
    }
    let longest = traj.episodes.iter().map(|e| e.1).max().unwrap_or(0);
    let mut sum = vec![0.0; longest];
    let mut count = vec![0usize; longest];
    for &(start, len) in &traj.episodes {
        for t in 0..len {
            sum[t] += g[start + t];
            count[t] += 1;
        }
    }
    let mut adv = g.clone();
    for &(start, len) in &traj.episodes {
        for t in 0..len {
            let others = count[t] - 1;
            let b = if others > 0 { (sum[t] - g[start + t]) / others as f64 } else { 0.0 };
            adv[start + t] = g[start + t] - b;
        }
    }
    adv
}

/// Policy-gradient estimate (ascent direction) for one player, plus the mean
/// absolute logit seen while computing it.
pub fn policy_gradient(
    policy: &PolicyParams,
    traj: &Trajectories,
    discount: f64,
    baseline: Baseline,
    entropy_weight: f64,
) -> Result<(Vec<f64>, f64)> {
    let adv = advantages(traj, discount, baseline);
    let n = traj.samples().max(1) as f64;
    let mut grad = vec![0.0; policy.params().len()];
    let mut ws = Workspace::default();
    let mut dlogits = Vec::new();
    let mut ent = Vec::new();
    let mut abs_logit = 0.0;
    for (i, (&a, &adv)) in traj.actions.iter().zip(&adv).enumerate() {
        let obs = traj.observation(i);
        let probs = policy.forward_into(obs, &mut ws)?;
        dlogits.clear();
        dlogits.extend(probs.iter().enumerate().map(|(j, &p)| adv * (if j == a { 1.0 } else { 0.0 } - p) / n));
        if entropy_weight > 0.0 {
            ent.resize(probs.len(), 0.0);
            entropy_logit_grad(probs, &mut ent);
            for (d, e) in dlogits.iter_mut().zip(&ent) {
                *d += entropy_weight * e / n;
            }
        }
        let logits = ws.logits();
        abs_logit += logits.iter().map(|z| libm::fabs(*z)).sum::<f64>() / logits.len() as f64;
        policy.backward(obs, &mut ws, &dlogits, &mut grad);
    }
    Ok((grad, abs_logit / n))
}

/// Adam on a flat parameter vector (gradient ascent).
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(len: usize) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p += lr * (*m / c1) / (libm::sqrt(*v / c2) + Self::EPS);
        }
    }
}

/// Divergence guard: mean |logit| above this aborts training.
pub const MAX_MEAN_ABS_LOGIT: f64 = 1e3;

/// Initial parameters of both players.
pub fn initial_params(spec: &GameSpec, cfg: &TrainConfig) -> Result<[PolicyParams; 2]> {
    let init = |seat: Seat| {
        let mut rng = rng_from_seed(derive_path(cfg.seed, &[0, seat.index() as u64]));
        PolicyParams::random(cfg.network.architecture(spec, seat), cfg.init_scale, &mut rng)
    };
    Ok([init(Seat::First)?, init(Seat::Second)?])
}

/// Trains a pair of policies by simultaneous self-play.
pub fn train_pair<E: Environment + ?Sized>(env: &E, cfg: &TrainConfig) -> Result<TrainedPair> {
    cfg.validate()?;
    let spec = env.spec();
    let mut params = initial_params(&spec, cfg)?;
    let mut opt = [Adam::new(params[0].params().len()), Adam::new(params[1].params().len())];
    let mut curve = Vec::new();
    for b in 0..cfg.batches {
        let batch = collect_batch(env, &params, cfg, b)?;
        let beta = cfg.entropy_at(b);
        let mut grads = Vec::with_capacity(2);
        for (policy, traj) in params.iter().zip(&batch.players) {
            let (grad, mean_abs_logit) = policy_gradient(policy, traj, cfg.discount, Baseline::LeaveOneOut, beta)?;
            if !(mean_abs_logit <= MAX_MEAN_ABS_LOGIT) || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { batch: b + 1, mean_abs_logit });
            }
            grads.push(grad);
        }
        for ((policy, opt), grad) in params.iter_mut().zip(&mut opt).zip(&grads) {
            opt.ascend(policy.params_mut(), grad, cfg.learning_rate);
        }
        if (b + 1) % cfg.eval_every == 0 || b + 1 == cfg.batches {
            let rates = batch.raw_rates();
            curve.push(CurvePoint { batch: b + 1, rates, joint: rates[0] + rates[1] });
        }
    }
    Ok(TrainedPair { params, curve, scheme: cfg.scheme })
}
