//! Soft actor-critic with a tanh-squashed Gaussian policy, twin critics and
//! slowly tracking target critics. The entropy temperature is fixed.

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{Adam, Mlp, MlpSpec, Params};
use crate::replay::Batch;
use crate::{SacError, Scalar};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Actions at exactly ±1 are pulled this far inside before inverting tanh.
pub const ACTION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacHyper {
    pub gamma: f64,
    /// Soft-update rate ς.
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    /// Entropy temperature α.
    pub alpha: f64,
    pub batch_size: usize,
    /// Uniform-random action steps before the first gradient step.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    /// Environment steps between update rounds.
    pub update_interval: usize,
    pub hidden_dims: Vec<usize>,
    pub grad_clip: Option<f64>,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            tau: 0.005,
            lr_actor: 3e-4,
            lr_critic: 1e-4,
            buffer_capacity: 1_000_000,
            alpha: 0.2,
            batch_size: 256,
            warmup_steps: 3000,
            updates_per_step: 1,
            update_interval: 1,
            hidden_dims: vec![256, 128],
            grad_clip: Some(10.0),
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<(), SacError> {
        let mut bad = Vec::new();
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            bad.push(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            bad.push(format!("tau {} outside (0, 1]", self.tau));
        }
        if !(self.alpha >= 0.0) {
            bad.push(format!("alpha {} negative", self.alpha));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            bad.push("batch_size must be positive and fit in the buffer".into());
        }
        if self.update_interval == 0 {
            bad.push("update_interval must be positive".into());
        }
        if self.hidden_dims.is_empty() {
            bad.push("hidden_dims must be nonempty".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SacError::Config(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Losses before the step, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub policy_loss: f64,
}

fn lit<T: Scalar>(x: f64) -> T {
    T::from(x).unwrap()
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// log(1 − tanh²u), stable for large |u|.
pub fn log_one_minus_tanh_sq<T: Scalar>(u: T) -> T {
    lit::<T>(2.0) * (lit::<T>(std::f64::consts::LN_2) - u - softplus(lit::<T>(-2.0) * u))
}

/// Policy head evaluated on a batch.
struct Head<T> {
    mu: Array2<T>,
    log_std: Array2<T>,
    /// False where the log-std clamp is active.
    live: Array2<bool>,
}

/// A squashed sample and its log-density.
struct Squashed<T> {
    action: Array2<T>,
    sigma: Array2<T>,
    /// Column of per-row log π(a|s).
    log_prob: Array2<T>,
}

pub struct Sac<T> {
    pub hyper: SacHyper,
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor: Mlp<T>,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub target1: Mlp<T>,
    pub target2: Mlp<T>,
    actor_opt: Adam<T>,
    critic1_opt: Adam<T>,
    critic2_opt: Adam<T>,
    rng: ChaCha8Rng,
    pub updates: u64,
}

impl<T: Scalar> Sac<T> {
    pub fn new(state_dim: usize, action_dim: usize, hyper: SacHyper, seed: u64) -> Result<Self, SacError> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::new(MlpSpec::new(state_dim, hyper.hidden_dims.clone(), 2 * action_dim), &mut rng)?;
        let cspec = MlpSpec::new(state_dim + action_dim, hyper.hidden_dims.clone(), 1);
        let critic1 = Mlp::new(cspec.clone(), &mut rng)?;
        let critic2 = Mlp::new(cspec, &mut rng)?;
        Ok(Self::from_networks(hyper, actor, critic1, critic2, None, rng))
    }

    /// Assembles an agent from existing networks; targets default to copies
    /// of the critics. Optimizer state starts fresh.
    pub fn from_networks(
        hyper: SacHyper,
        actor: Mlp<T>,
        critic1: Mlp<T>,
        critic2: Mlp<T>,
        targets: Option<(Mlp<T>, Mlp<T>)>,
        rng: ChaCha8Rng,
    ) -> Self {
        let state_dim = actor.spec.input_dim;
        let action_dim = actor.spec.output_dim / 2;
        let clip = hyper.grad_clip.map(lit);
        let (target1, target2) = targets.unwrap_or_else(|| (critic1.clone(), critic2.clone()));
        Self {
            actor_opt: Adam::new(&actor.spec, lit(hyper.lr_actor), clip),
            critic1_opt: Adam::new(&critic1.spec, lit(hyper.lr_critic), clip),
            critic2_opt: Adam::new(&critic2.spec, lit(hyper.lr_critic), clip),
            hyper,
            state_dim,
            action_dim,
            actor,
            critic1,
            critic2,
            target1,
            target2,
            rng,
            updates: 0,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn alpha(&self) -> T {
        lit(self.hyper.alpha)
    }

    fn head(&self, out: &Array2<T>) -> Head<T> {
        let a = self.action_dim;
        let raw = out.slice(s![.., a..]);
        let (lo, hi) = (lit::<T>(LOG_STD_MIN), lit::<T>(LOG_STD_MAX));
        Head {
            mu: out.slice(s![.., ..a]).to_owned(),
            log_std: raw.mapv(|x| x.max(lo).min(hi)),
            live: raw.mapv(|x| x >= lo && x <= hi),
        }
    }

    fn squash(&self, head: &Head<T>, eps: &Array2<T>) -> Squashed<T> {
        let sigma = head.log_std.mapv(|x| x.exp());
        let u = &head.mu + &(&sigma * eps);
        let action = u.mapv(|x| x.tanh());
        let half_ln_2pi = lit::<T>(0.5 * (2.0 * std::f64::consts::PI).ln());
        let half = lit::<T>(0.5);
        let mut log_prob = Array2::zeros((u.nrows(), 1));
        for r in 0..u.nrows() {
            let mut lp = T::zero();
            for c in 0..u.ncols() {
                let e = eps[[r, c]];
                lp = lp - half * e * e - head.log_std[[r, c]] - half_ln_2pi - log_one_minus_tanh_sq(u[[r, c]]);
            }
            log_prob[[r, 0]] = lp;
        }
        Squashed { action, sigma, log_prob }
    }

    fn normal(&mut self, rows: usize, cols: usize) -> Array2<T> {
        let rng = &mut self.rng;
        Array2::from_shape_simple_fn((rows, cols), || lit(rng.sample::<f64, _>(StandardNormal)))
    }

    fn row(state: &[T]) -> Array2<T> {
        Array2::from_shape_vec((1, state.len()), state.to_vec()).unwrap()
    }

    /// Normalized action in (−1, 1)^A.
    pub fn sample_action(&mut self, state: &[T], mode: ActionMode) -> Vec<T> {
        assert_eq!(state.len(), self.state_dim, "state width");
        assert!(state.iter().all(|x| x.is_finite()), "non-finite state");
        let head = self.head(&self.actor.forward(&Self::row(state)));
        match mode {
            ActionMode::Deterministic => head.mu.iter().map(|x| x.tanh()).collect(),
            ActionMode::Stochastic => {
                let eps = self.normal(1, self.action_dim);
                self.squash(&head, &eps).action.iter().copied().collect()
            }
        }
    }

    /// Uniform action in [−1, 1)^A from the agent's stream.
    pub fn random_action(&mut self) -> Vec<T> {
        (0..self.action_dim)
            .map(|_| lit(self.rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// log π(a|s) including the squashing correction.
    pub fn log_prob(&self, state: &[T], action: &[T]) -> T {
        let head = self.head(&self.actor.forward(&Self::row(state)));
        let lim = T::one() - lit(ACTION_EPS);
        let eps = Array2::from_shape_fn((1, self.action_dim), |(_, c)| {
            let a = action[c].max(-lim).min(lim);
            (a.atanh() - head.mu[[0, c]]) / head.log_std[[0, c]].exp()
        });
        self.squash(&head, &eps).log_prob[[0, 0]]
    }

    fn critic_input(states: &Array2<T>, actions: &Array2<T>) -> Array2<T> {
        concatenate![Axis(1), *states, *actions]
    }

    /// y = r + γ(1 − done)(min Q̄(s', a') − α log π(a'|s')) with a' ~ π(·|s').
    pub fn critic_targets_with_noise(&self, batch: &Batch<T>, eps: &Array2<T>) -> Array2<T> {
        let head = self.head(&self.actor.forward(&batch.next_states));
        let next = self.squash(&head, eps);
        let x = Self::critic_input(&batch.next_states, &next.action);
        let q1 = self.target1.forward(&x);
        let q2 = self.target2.forward(&x);
        let gamma = lit::<T>(self.hyper.gamma);
        let alpha = self.alpha();
        let mut y = batch.rewards.clone();
        for r in 0..y.nrows() {
            let soft = q1[[r, 0]].min(q2[[r, 0]]) - alpha * next.log_prob[[r, 0]];
            y[[r, 0]] = y[[r, 0]] + gamma * (T::one() - batch.dones[[r, 0]]) * soft;
        }
        y
    }

    pub fn critic_targets(&mut self, batch: &Batch<T>) -> Array2<T> {
        let eps = self.normal(batch.len(), self.action_dim);
        self.critic_targets_with_noise(batch, &eps)
    }

    /// Mean ½(Q(s,a) − y)² and its parameter gradient.
    pub fn critic_objective(critic: &Mlp<T>, batch: &Batch<T>, targets: &Array2<T>) -> (T, Params<T>) {
        let x = Self::critic_input(&batch.states, &batch.actions);
        let (q, cache) = critic.forward_cached(&x);
        let n = lit::<T>(batch.len() as f64);
        let diff = &q - targets;
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / (lit::<T>(2.0) * n);
        let (grads, _) = critic.backward(&cache, &(diff / n));
        (loss, grads)
    }

    /// One step on both critics; returns their mean pre-step loss.
    pub fn critic_update(&mut self, batch: &Batch<T>) -> T {
        assert!(!batch.is_empty(), "empty batch");
        let y = self.critic_targets(batch);
        let (l1, mut g1) = Self::critic_objective(&self.critic1, batch, &y);
        let (l2, mut g2) = Self::critic_objective(&self.critic2, batch, &y);
        self.critic1_opt.step(&mut self.critic1, &mut g1);
        self.critic2_opt.step(&mut self.critic2, &mut g2);
        (l1 + l2) / lit(2.0)
    }

    /// Mean α log π(a|s) − min_j Q_j(s, a) with a reparameterized by `eps`,
    /// and its gradient with respect to the actor parameters.
    pub fn policy_objective(&self, states: &Array2<T>, eps: &Array2<T>) -> (T, Params<T>) {
        let (out, cache) = self.actor.forward_cached(states);
        let head = self.head(&out);
        let sq = self.squash(&head, eps);
        let x = Self::critic_input(states, &sq.action);
        let (q1, c1) = self.critic1.forward_cached(&x);
        let (q2, c2) = self.critic2.forward_cached(&x);
        let b = states.nrows();
        let n = lit::<T>(b as f64);
        let alpha = self.alpha();
        let pick1 = Array2::from_shape_fn((b, 1), |(r, _)| {
            if q1[[r, 0]] <= q2[[r, 0]] {
                T::one()
            } else {
                T::zero()
            }
        });
        let pick2 = pick1.mapv(|p| T::one() - p);
        let mut loss = T::zero();
        for r in 0..b {
            loss = loss + alpha * sq.log_prob[[r, 0]] - q1[[r, 0]].min(q2[[r, 0]]);
        }
        loss = loss / n;

        let (_, dx1) = self.critic1.backward(&c1, &pick1);
        let (_, dx2) = self.critic2.backward(&c2, &pick2);
        let sd = self.state_dim;
        let dq_da = &dx1.slice(s![.., sd..]) + &dx2.slice(s![.., sd..]);

        let two = lit::<T>(2.0);
        let a = &sq.action;
        let du = Array2::from_shape_fn(a.raw_dim(), |(r, c)| {
            let ar = a[[r, c]];
            (alpha * two * ar - dq_da[[r, c]] * (T::one() - ar * ar)) / n
        });
        let dlog_std = Array2::from_shape_fn(a.raw_dim(), |(r, c)| {
            if head.live[[r, c]] {
                du[[r, c]] * sq.sigma[[r, c]] * eps[[r, c]] - alpha / n
            } else {
                T::zero()
            }
        });
        let dout = concatenate![Axis(1), du, dlog_std];
        let (grads, _) = self.actor.backward(&cache, &dout);
        (loss, grads)
    }

    /// One actor step with critics frozen; returns the pre-step loss.
    pub fn policy_update(&mut self, batch: &Batch<T>) -> T {
        assert!(!batch.is_empty(), "empty batch");
        let eps = self.normal(batch.len(), self.action_dim);
        let (loss, mut g) = self.policy_objective(&batch.states, &eps);
        self.actor_opt.step(&mut self.actor, &mut g);
        loss
    }

    pub fn soft_update(&mut self) {
        let tau = lit(self.hyper.tau);
        self.target1.soft_update_from(&self.critic1, tau);
        self.target2.soft_update_from(&self.critic2, tau);
    }

    /// Critic step, policy step, target tracking.
    pub fn update(&mut self, batch: &Batch<T>) -> UpdateStats {
        let critic_loss = self.critic_update(batch).to_f64().unwrap();
        let policy_loss = self.policy_update(batch).to_f64().unwrap();
        self.soft_update();
        self.updates += 1;
        UpdateStats {
            critic_loss,
            policy_loss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::ReplayBuffer;

    fn toy_hyper() -> SacHyper {
        SacHyper {
            hidden_dims: vec![8, 8],
            batch_size: 16,
            buffer_capacity: 1000,
            ..SacHyper::default()
        }
    }

    fn toy(seed: u64) -> Sac<f64> {
        Sac::new(6, 3, toy_hyper(), seed).unwrap()
    }

    fn toy_batch(seed: u64, n: usize, sd: usize, ad: usize) -> Batch<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = ReplayBuffer::new(n, sd, ad);
        for k in 0..n {
            let s: Vec<f64> = (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..ad).map(|_| rng.random_range(-0.9..0.9)).collect();
            let s2: Vec<f64> = (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect();
            buf.push(&s, &a, rng.random_range(-1.0..1.0), &s2, k % 5 == 4);
        }
        buf.sample(&mut rng, n)
    }

    /// Fixes the policy head to constant mean and log-std.
    fn constant_head(agent: &mut Sac<f64>, mu: &[f64], log_std: &[f64]) {
        let last = agent.actor.params.layers.last_mut().unwrap();
        last.w.fill(0.0);
        for (i, v) in mu.iter().chain(log_std).enumerate() {
            last.b[i] = *v;
        }
    }

    #[test]
    fn hyper_defaults_and_validation() {
        let h = SacHyper::default();
        assert_eq!((h.gamma, h.tau, h.alpha, h.batch_size), (0.9, 0.005, 0.2, 256));
        assert_eq!((h.lr_actor, h.lr_critic, h.buffer_capacity), (3e-4, 1e-4, 1_000_000));
        assert_eq!(h.hidden_dims, vec![256, 128]);
        assert!(h.validate().is_ok());
        assert!(SacHyper { gamma: 1.0, ..h.clone() }.validate().is_err());
        assert!(SacHyper { tau: 0.0, ..h.clone() }.validate().is_err());
        assert!(SacHyper { hidden_dims: vec![], ..h }.validate().is_err());
    }

    #[test]
    fn actions_are_inside_the_box_and_repeatable() {
        let mut a = toy(0);
        let s = [0.1, -0.4, 0.3, 0.9, -1.0, 0.0];
        let d1 = a.sample_action(&s, ActionMode::Deterministic);
        let d2 = a.sample_action(&s, ActionMode::Deterministic);
        assert_eq!(d1, d2);
        for _ in 0..200 {
            let x = a.sample_action(&s, ActionMode::Stochastic);
            assert!(x.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn stochastic_mean_matches_deterministic_for_narrow_head() {
        let mut a = toy(1);
        constant_head(&mut a, &[0.3, -0.5, 0.1], &[-6.0, -6.0, -6.0]);
        let s = [0.0; 6];
        let det = a.sample_action(&s, ActionMode::Deterministic);
        let n = 10_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let x = a.sample_action(&s, ActionMode::Stochastic);
            for c in 0..3 {
                sum[c] += x[c];
                sq[c] += x[c] * x[c];
            }
        }
        for c in 0..3 {
            let mean = sum[c] / n as f64;
            let var = (sq[c] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!((mean - det[c]).abs() <= 3.0 * se + 1e-6, "{mean} vs {}", det[c]);
        }
    }

    #[test]
    fn log_prob_integrates_to_one() {
        let mut a = Sac::<f64>::new(2, 2, toy_hyper(), 3).unwrap();
        constant_head(&mut a, &[0.2, -0.3], &[-0.2, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let s = [0.0, 0.0];
        let mut total = 0.0;
        for _ in 0..n {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            total += a.log_prob(&s, &x).exp();
        }
        let integral = 4.0 * total / n as f64;
        assert!((integral - 1.0).abs() < 0.02, "{integral}");
    }

    #[test]
    fn log_prob_matches_cdf_derivative() {
        let mut a = Sac::<f64>::new(2, 1, toy_hyper(), 4).unwrap();
        let (mu, ls) = (0.4, -0.5);
        constant_head(&mut a, &[mu], &[ls]);
        let sigma = f64::exp(ls);
        // P(a ≤ x) = Φ((atanh x − μ)/σ); Φ via a Simpson-integrated density.
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = |x: f64| {
            let z = (x.atanh() - mu) / sigma;
            let (lo, m) = (-12.0, 20_000);
            let h = (z - lo) / m as f64;
            let mut acc = phi(lo) + phi(z);
            for i in 1..m {
                acc += phi(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        for x in [-0.5, 0.0, 0.3, 0.6, 0.9] {
            let h = 1e-4;
            let fd = (cdf(x + h) - cdf(x - h)) / (2.0 * h);
            let dens = a.log_prob(&[0.0, 0.0], &[x]).exp();
            assert!((fd - dens).abs() <= 1e-4 * dens.max(1.0), "{x}: {fd} vs {dens}");
        }
        assert!(a.log_prob(&[0.0, 0.0], &[mu.tanh()]) > a.log_prob(&[0.0, 0.0], &[0.95]));
        assert!(a.log_prob(&[0.0, 0.0], &[1.0]).is_finite());
    }

    #[test]
    fn zero_discount_target_is_the_reward() {
        let mut a = Sac::new(6, 3, SacHyper { gamma: 0.0, ..toy_hyper() }, 0).unwrap();
        let b = toy_batch(0, 16, 6, 3);
        assert_eq!(a.critic_targets(&b), b.rewards);
    }

    #[test]
    fn target_uses_the_smaller_critic() {
        let mut a = Sac::new(6, 3, SacHyper { alpha: 0.0, ..toy_hyper() }, 0).unwrap();
        for (net, v) in [(&mut a.target1, 5.0), (&mut a.target2, -3.0)] {
            let last = net.params.layers.last_mut().unwrap();
            last.w.fill(0.0);
            last.b.fill(v);
        }
        let b = toy_batch(1, 16, 6, 3);
        let y = a.critic_targets(&b);
        for r in 0..16 {
            let want = b.rewards[[r, 0]] + 0.9 * (1.0 - b.dones[[r, 0]]) * -3.0;
            assert!((y[[r, 0]] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let a = toy(5);
        let b = toy_batch(2, 16, 6, 3);
        let y = Array2::from_shape_fn((16, 1), |(r, _)| (r as f64 * 0.37).sin());
        let (_, g) = Sac::critic_objective(&a.critic1, &b, &y);
        let analytic: Vec<f64> = g.iter().copied().collect();
        let h = 1e-6;
        for k in 0..analytic.len() {
            let mut p = a.critic1.clone();
            *p.params.iter_mut().nth(k).unwrap() += h;
            let mut m = a.critic1.clone();
            *m.params.iter_mut().nth(k).unwrap() -= h;
            let fd = (Sac::critic_objective(&p, &b, &y).0 - Sac::critic_objective(&m, &b, &y).0) / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-3);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", analytic[k]);
        }
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let mut a = toy(6);
        let b = toy_batch(3, 16, 6, 3);
        let eps = a.normal(16, 3);
        let (_, g) = a.policy_objective(&b.states, &eps);
        let analytic: Vec<f64> = g.iter().copied().collect();
        let h = 1e-6;
        for k in 0..analytic.len() {
            let base = a.actor.clone();
            *a.actor.params.iter_mut().nth(k).unwrap() += h;
            let lp = a.policy_objective(&b.states, &eps).0;
            a.actor = base.clone();
            *a.actor.params.iter_mut().nth(k).unwrap() -= h;
            let lm = a.policy_objective(&b.states, &eps).0;
            a.actor = base;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-3);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", analytic[k]);
        }
    }

    #[test]
    fn overfitting_one_batch_lowers_critic_loss() {
        let mut a = Sac::new(6, 3, SacHyper { lr_critic: 1e-3, ..toy_hyper() }, 8).unwrap();
        let b = toy_batch(4, 16, 6, 3);
        let y = a.critic_targets(&b);
        let mut losses = Vec::new();
        for _ in 0..300 {
            let (l, mut g) = Sac::critic_objective(&a.critic1, &b, &y);
            a.critic1_opt.step(&mut a.critic1, &mut g);
            losses.push(l);
        }
        assert!(losses[299] < 0.2 * losses[0]);
        assert!(losses[100..].windows(50).all(|w| w[49] <= w[0]));
    }

    #[test]
    fn bandit_policy_moves_toward_rewarded_action() {
        // One state, one action, reward −(a − 0.5)², no bootstrapping or
        // entropy: the deterministic action should drift toward 0.5.
        let hyper = SacHyper {
            gamma: 0.0,
            alpha: 0.0,
            lr_actor: 3e-3,
            lr_critic: 3e-3,
            hidden_dims: vec![16, 16],
            batch_size: 64,
            buffer_capacity: 1000,
            ..SacHyper::default()
        };
        let mut a = Sac::<f64>::new(1, 1, hyper, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = ReplayBuffer::new(1000, 1, 1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-1.0..1.0);
            buf.push(&[0.0], &[x], -(x - 0.5) * (x - 0.5), &[0.0], true);
        }
        let start = (a.sample_action(&[0.0], ActionMode::Deterministic)[0] - 0.5).abs();
        for _ in 0..1500 {
            let b = buf.sample(&mut rng, 64);
            a.critic_update(&b);
            a.policy_update(&b);
        }
        let end = (a.sample_action(&[0.0], ActionMode::Deterministic)[0] - 0.5).abs();
        assert!(end < 0.1 && end < start, "{start} -> {end}");
    }

    #[test]
    fn entropy_alone_widens_the_policy() {
        let mut a = toy(10);
        constant_head(&mut a, &[0.0, 0.0, 0.0], &[-2.0, -2.0, -2.0]);
        for net in [&mut a.critic1, &mut a.critic2] {
            let last = net.params.layers.last_mut().unwrap();
            last.w.fill(0.0);
            last.b.fill(0.0);
        }
        let b = toy_batch(5, 16, 6, 3);
        let std_of = |a: &Sac<f64>| {
            let out = a.actor.forward(&b.states);
            out.slice(s![.., 3..]).mean().unwrap()
        };
        let before = std_of(&a);
        for _ in 0..20 {
            a.policy_update(&b);
        }
        assert!(std_of(&a) > before);
    }

    #[test]
    fn soft_update_contracts_toward_critics() {
        let mut a = toy(11);
        for x in a.target1.params.iter_mut() {
            *x += 1.0;
        }
        let dist = |a: &Sac<f64>| {
            a.target1
                .params
                .iter()
                .zip(a.critic1.params.iter())
                .map(|(t, c)| (t - c) * (t - c))
                .sum::<f64>()
                .sqrt()
        };
        let mut prev = dist(&a);
        for _ in 0..50 {
            a.soft_update();
            let d = dist(&a);
            assert!(d <= prev);
            prev = d;
        }
        a.hyper.tau = 1.0;
        a.soft_update();
        assert_eq!(a.target1.params, a.critic1.params);
    }

    #[test]
    fn stable_log_one_minus_tanh_sq() {
        for u in [-30.0f64, -3.0, -0.1, 0.0, 0.5, 4.0, 40.0] {
            let direct = (1.0 - u.tanh().powi(2)).ln();
            let stable = log_one_minus_tanh_sq(u);
            if direct.is_finite() {
                assert!((direct - stable).abs() < 1e-9 * direct.abs().max(1.0));
            }
            assert!(stable.is_finite());
        }
    }

    #[test]
    fn clamped_log_std_gets_no_gradient() {
        let mut a = toy(12);
        constant_head(&mut a, &[0.0; 3], &[5.0, -25.0, 0.0]);
        let b = toy_batch(6, 8, 6, 3);
        let eps = a.normal(8, 3);
        let (_, g) = a.policy_objective(&b.states, &eps);
        let last = g.layers.last().unwrap();
        assert_eq!(last.b[3], 0.0);
        assert_eq!(last.b[4], 0.0);
        assert_ne!(last.b[5], 0.0);
    }
}
