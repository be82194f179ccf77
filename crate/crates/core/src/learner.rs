//! The primal-dual episode loop.
//!
//! Each episode `k > 1` first moves the policy by a KL-regularized
//! mirror-descent step on `Q^r + Y Q^g` (after mixing the previous policy
//! with uniform), then updates the dual variable `Y` with a regularized
//! step that needs no knowledge of the Slater margin. After the rollout the
//! learner recomputes optimistic Q tables by backward induction and feeds
//! the visited transitions into the variance-weighted regressions.

use nalgebra::DVector;

use crate::environment::{rollout, RngStream};
use crate::error::{CmdpError, Result};
use crate::estimation::{
    offset_e, proposition1_check, radii, sigma_bar_sq, variance_estimate, ConfidenceRadii, SpdState,
};
use crate::metrics::{EpisodeRow, MetricsSeries};
use crate::model::{CmdpInstance, EpisodeRecord, PolicyTable, ValueTables};
use crate::oracle::{dp_evaluate, metrics, ComparatorResult, ComparatorValues};

/// Reward (`0`) or constraint (`1`) signal.
pub const SIGNALS: [Signal; 2] = [Signal::Reward, Signal::Constraint];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward = 0,
    Constraint = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualVariant {
    /// `Y <- [(1 - a e H^3) Y + e (b - V^g - a H^3 - 2 theta H^2)]_+`.
    Regularized,
    /// `Y <- clip(Y + e (b - V^g), [0, 2 / gamma])`; needs the Slater margin.
    Clipped { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub eta: f64,
    /// Weight of the uniform policy in the perturbation step.
    pub theta_mix: f64,
    pub lambda: f64,
    pub delta: f64,
    pub param_bound: f64,
    pub dual: DualVariant,
    /// Run the inline invariant checks that need the true model.
    pub diagnostics: bool,
}

impl LearnerConfig {
    /// `lambda = 1/B^2`, `alpha = 1/(H^2 sqrt K)`, `eta = 1/(H sqrt K)`, `theta = 1/K`.
    pub fn theorem_defaults(horizon: usize, episodes: usize, param_bound: f64) -> Self {
        let (hz, kf) = (horizon as f64, episodes as f64);
        Self {
            episodes,
            alpha: 1.0 / (hz * hz * kf.sqrt()),
            eta: 1.0 / (hz * kf.sqrt()),
            theta_mix: 1.0 / kf,
            lambda: 1.0 / (param_bound * param_bound),
            delta: 0.01,
            param_bound,
            dual: DualVariant::Regularized,
            diagnostics: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(CmdpError::InvalidParameter { name, reason });
        if self.episodes == 0 {
            return bad("K", "must be at least 1".into());
        }
        for (name, v) in [("alpha", self.alpha), ("eta", self.eta), ("lambda", self.lambda), ("B", self.param_bound)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, format!("must be positive, got {v}"));
            }
        }
        if !(self.theta_mix > 0.0 && self.theta_mix <= 1.0) {
            return bad("theta_mix", format!("must lie in (0, 1], got {}", self.theta_mix));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        if let DualVariant::Clipped { gamma } = self.dual {
            if !(gamma > 0.0) {
                return bad("gamma", format!("must be positive, got {gamma}"));
            }
        }
        Ok(())
    }
}

/// Regularized dual step.
pub fn dual_update(y: f64, v_g_estimate: f64, threshold: f64, horizon: usize, cfg: &LearnerConfig) -> f64 {
    let h3 = (horizon as f64).powi(3);
    let h2 = (horizon as f64).powi(2);
    let decay = 1.0 - cfg.alpha * cfg.eta * h3;
    let drift = threshold - v_g_estimate - cfg.alpha * h3 - 2.0 * cfg.theta_mix * h2;
    (decay * y + cfg.eta * drift).max(0.0)
}

/// Projected dual step with the upper clip `2 / gamma`.
pub fn dual_update_clipped(y: f64, v_g_estimate: f64, threshold: f64, eta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(CmdpError::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    Ok((y + eta * (threshold - v_g_estimate)).clamp(0.0, 2.0 / gamma))
}

/// Mixes `row` with uniform, in place.
pub fn perturb_row(row: &mut [f64], theta_mix: f64) {
    let floor = theta_mix / row.len() as f64;
    for p in row.iter_mut() {
        *p = (1.0 - theta_mix) * *p + floor;
    }
}

/// Exponential-weights step `p(a) ∝ base(a) exp(alpha * score(a))`, max-shifted.
pub fn mirror_step(base: &[f64], score: impl Fn(usize) -> f64, alpha: f64) -> Result<Vec<f64>> {
    let logits: Vec<f64> = (0..base.len()).map(|a| alpha * score(a)).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = base.iter().zip(&logits).map(|(p, l)| p * (l - top).exp()).collect();
    let z: f64 = out.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(CmdpError::Numerical(format!("policy normalizer is {z}")));
    }
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

/// Counters of inline assertions, all of which passed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckCounts {
    pub variance_bound: u64,
    pub q_range: u64,
    pub simplex: u64,
    pub mixing_floor: u64,
    pub dual_bound: u64,
    pub omd_step: u64,
    pub sigma_floor: u64,
}

impl CheckCounts {
    pub fn total(&self) -> u64 {
        self.variance_bound
            + self.q_range
            + self.simplex
            + self.mixing_floor
            + self.dual_bound
            + self.omd_step
            + self.sigma_floor
    }

    pub fn add(&mut self, other: &CheckCounts) {
        self.variance_bound += other.variance_bound;
        self.q_range += other.q_range;
        self.simplex += other.simplex;
        self.mixing_floor += other.mixing_floor;
        self.dual_bound += other.dual_bound;
        self.omd_step += other.omd_step;
        self.sigma_floor += other.sigma_floor;
    }
}

// floating-point allowance on the simplex and step-size checks
const SIMPLEX_TOL: f64 = 1e-12;

/// Mutable state of one learner run.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub policy: PolicyTable,
    pub y: f64,
    /// `hat[h][signal]`: variance-weighted regression of `V` on `phi_V`.
    pub hat: Vec<[SpdState; 2]>,
    /// `tilde[h][signal]`: ridge regression of `V^2` on `phi_{V^2}`.
    pub tilde: Vec<[SpdState; 2]>,
    pub values: [ValueTables; 2],
    /// Episode whose backward pass last completed (0 before the first).
    pub k: usize,
    /// Smallest slack seen in the variance-error inequality.
    pub min_variance_slack: f64,
    pub checks: CheckCounts,
}

impl LearnerState {
    pub fn new(inst: &CmdpInstance, cfg: &LearnerConfig) -> Result<Self> {
        let (hz, ns, na, d) = (inst.horizon(), inst.num_states(), inst.num_actions(), inst.dim());
        let pair = || -> Result<[SpdState; 2]> { Ok([SpdState::new(d, cfg.lambda)?, SpdState::new(d, cfg.lambda)?]) };
        Ok(Self {
            policy: PolicyTable::uniform(hz, ns, na),
            y: 0.0,
            hat: (0..hz).map(|_| pair()).collect::<Result<_>>()?,
            tilde: (0..hz).map(|_| pair()).collect::<Result<_>>()?,
            values: [ValueTables::zeros(hz, ns, na), ValueTables::zeros(hz, ns, na)],
            k: 0,
            min_variance_slack: f64::INFINITY,
            checks: CheckCounts::default(),
        })
    }

    pub fn estimated_value(&self, signal: Signal, inst: &CmdpInstance) -> f64 {
        self.values[signal as usize].v[0][inst.initial_state()]
    }

    /// Perturbation plus mirror-descent step using the previous episode's
    /// Q tables and dual variable. Returns the perturbed policy.
    pub fn policy_update(&mut self, cfg: &LearnerConfig, episode: usize) -> Result<PolicyTable> {
        let hz = self.policy.horizon();
        let mut mixed = self.policy.clone();
        let y = self.y;
        let [q_r, q_g] = [&self.values[0].q, &self.values[1].q];
        for h in 0..hz {
            let ns = q_r[h].len();
            for s in 0..ns {
                let row = mixed.row_mut(h, s);
                let floor = cfg.theta_mix / row.len() as f64;
                perturb_row(row, cfg.theta_mix);
                if cfg.diagnostics {
                    if let Some(p) = row.iter().find(|p| **p < floor) {
                        return Err(invariant("mixing_floor", episode, format!("entry {p} < {floor} at (h={h}, s={s})")));
                    }
                    self.checks.mixing_floor += 1;
                }
                let next = mirror_step(row, |a| q_r[h][s][a] + y * q_g[h][s][a], cfg.alpha)?;
                if cfg.diagnostics {
                    let sum: f64 = next.iter().sum();
                    if (sum - 1.0).abs() > SIMPLEX_TOL || next.iter().any(|p| !(*p > 0.0)) {
                        return Err(invariant("simplex", episode, format!("row (h={h}, s={s}) = {next:?}")));
                    }
                    self.checks.simplex += 1;
                    let step: f64 = next.iter().zip(row.iter()).map(|(a, b)| (a - b).abs()).sum();
                    let bound = cfg.alpha * hz as f64 * (1.0 + y);
                    if step > bound + SIMPLEX_TOL {
                        return Err(invariant("omd_step", episode, format!("|pi' - pi~|_1 = {step} > {bound}")));
                    }
                    self.checks.omd_step += 1;
                }
                *self.policy.row_mut(h, s) = next;
            }
        }
        Ok(mixed)
    }

    /// Dual step from the previous episode's optimistic constraint value.
    pub fn dual_update(&mut self, inst: &CmdpInstance, cfg: &LearnerConfig, episode: usize) -> Result<()> {
        let v_g = self.estimated_value(Signal::Constraint, inst);
        let b = inst.threshold();
        self.y = match cfg.dual {
            DualVariant::Regularized => dual_update(self.y, v_g, b, inst.horizon(), cfg),
            DualVariant::Clipped { gamma } => dual_update_clipped(self.y, v_g, b, cfg.eta, gamma)?,
        };
        if cfg.diagnostics {
            if !(self.y >= 0.0) {
                return Err(invariant("dual_bound", episode, format!("Y = {}", self.y)));
            }
            let hz = inst.horizon() as f64;
            let lemma_applies = matches!(cfg.dual, DualVariant::Regularized)
                && cfg.eta <= 1.0
                && cfg.alpha <= 1.0 / (hz * hz)
                && cfg.theta_mix <= 1.0 / (2.0 * hz);
            if lemma_applies {
                let cap = 3.0 * hz * cfg.eta * episode as f64;
                if self.y > cap * (1.0 + 1e-12) {
                    return Err(invariant("dual_bound", episode, format!("Y = {} > 3 H eta k = {cap}", self.y)));
                }
            }
            self.checks.dual_bound += 1;
        }
        Ok(())
    }

    /// Optimistic backward induction for both signals, followed by
    /// ingestion of the visited transition at every step.
    pub fn backward_pass(
        &mut self,
        inst: &CmdpInstance,
        ep: &EpisodeRecord,
        radii: &ConfidenceRadii,
        cfg: &LearnerConfig,
    ) -> Result<()> {
        let (hz, ns, na, d) = (inst.horizon(), inst.num_states(), inst.num_actions(), inst.dim());
        let fm = inst.features();
        let k = ep.k;
        for signal in SIGNALS {
            let sig = signal as usize;
            let table = match signal {
                Signal::Reward => &ep.revealed_rewards,
                Signal::Constraint => inst.constraint(),
            };
            for h in (0..hz).rev() {
                let cap = (hz - h) as f64;
                let v_next = self.values[sig].v[h + 1].clone();
                let hat = &self.hat[h][sig];
                let mut v_h = vec![0.0; ns];
                for s in 0..ns {
                    let mut acc = 0.0;
                    for a in 0..na {
                        let phi = fm.phi_v(&v_next, s, a)?;
                        let raw = table[h][s][a] + phi.dot(hat.theta()) + radii.beta_hat * hat.bonus_norm(&phi)?;
                        let q = raw.clamp(0.0, cap);
                        if !(0.0..=cap).contains(&q) {
                            return Err(invariant("q_range", k, format!("Q[{h}][{s}][{a}] = {q}")));
                        }
                        self.values[sig].q[h][s][a] = q;
                        acc += self.policy.prob(h, s, a) * q;
                    }
                    v_h[s] = acc;
                }
                if cfg.diagnostics {
                    self.checks.q_range += (ns * na) as u64;
                }
                self.values[sig].v[h] = v_h;

                let (s_h, a_h, s_next) = (ep.states[h], ep.actions[h], ep.states[h + 1]);
                let phi_v = fm.phi_v(&v_next, s_h, a_h)?;
                let phi_v2 = fm.phi_v_squared(&v_next, s_h, a_h)?;
                self.ingest(inst, cfg, radii, h, sig, &phi_v, &phi_v2, &v_next, (s_h, a_h, s_next), k, d)?;
            }
        }
        self.k = k;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn ingest(
        &mut self,
        inst: &CmdpInstance,
        cfg: &LearnerConfig,
        radii: &ConfidenceRadii,
        h: usize,
        sig: usize,
        phi_v: &DVector<f64>,
        phi_v2: &DVector<f64>,
        v_next: &[f64],
        (s_h, a_h, s_next): (usize, usize, usize),
        k: usize,
        d: usize,
    ) -> Result<()> {
        let hz = inst.horizon();
        let hat = &self.hat[h][sig];
        let tilde = &self.tilde[h][sig];
        let vbar = variance_estimate(tilde, hat, phi_v, phi_v2, hz);
        let offset = offset_e(radii, tilde.bonus_norm(phi_v2)?, hat.bonus_norm(phi_v)?, hz);
        let weight_sq = sigma_bar_sq(vbar, offset, hz, d);

        if cfg.diagnostics {
            let floor = (hz * hz) as f64 / d as f64;
            if !(weight_sq >= floor) {
                return Err(invariant("sigma_floor", k, format!("sigma_bar^2 = {weight_sq} < {floor}")));
            }
            self.checks.sigma_floor += 1;

            let tr = inst.transitions(h, s_h, a_h);
            let mean: f64 = tr.iter().map(|(n, p)| p * v_next[*n]).sum();
            let second: f64 = tr.iter().map(|(n, p)| p * v_next[*n] * v_next[*n]).sum();
            let chk = proposition1_check(
                &inst.theta_star()[h],
                tilde,
                hat,
                phi_v,
                phi_v2,
                vbar,
                second - mean * mean,
                hz,
            )?;
            if !chk.passed {
                return Err(invariant(
                    "variance_bound",
                    k,
                    format!("|vbar - var| = {} > bound {} at h={h}", chk.lhs, chk.rhs),
                ));
            }
            self.min_variance_slack = self.min_variance_slack.min(chk.slack);
            self.checks.variance_bound += 1;
        }

        let target = v_next[s_next];
        self.hat[h][sig].rank1_update(phi_v, target, weight_sq)?;
        self.tilde[h][sig].rank1_update(phi_v2, target * target, 1.0)?;
        Ok(())
    }
}

fn invariant(name: &'static str, episode: usize, detail: String) -> CmdpError {
    CmdpError::Invariant { name, episode, detail }
}

/// Output of a learner run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: MetricsSeries,
    pub state: LearnerState,
}

// optimism is judged with this absolute allowance for rounding
const OPTIMISM_TOL: f64 = 1e-9;

/// Runs `cfg.episodes` episodes on `inst` and records exact per-episode
/// values against `comparator`.
pub fn run_pd_powers(
    inst: &CmdpInstance,
    cfg: &LearnerConfig,
    rng: &RngStream,
    comparator: &ComparatorResult,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut state = LearnerState::new(inst, cfg)?;
    let mut star = ComparatorValues::new(inst, comparator);
    let g = inst.constraint().clone();
    let s1 = inst.initial_state();
    let mut rows = Vec::with_capacity(cfg.episodes);

    for k in 1..=cfg.episodes {
        let before = state.checks.total();
        let r = radii(k, inst.dim(), inst.horizon(), cfg.lambda, cfg.delta, cfg.param_bound)?;
        if k > 1 {
            state.policy_update(cfg, k)?;
            state.dual_update(inst, cfg, k)?;
        }
        let ep = rollout(inst, &state.policy, k, rng)?;
        state.backward_pass(inst, &ep, &r, cfg)?;

        let v_est_r = state.estimated_value(Signal::Reward, inst);
        let v_est_g = state.estimated_value(Signal::Constraint, inst);
        let v_true_r = dp_evaluate(inst, &state.policy, &ep.revealed_rewards).v[0][s1];
        let v_true_g = dp_evaluate(inst, &state.policy, &g).v[0][s1];
        let optimistic =
            u8::from(v_est_r >= v_true_r - OPTIMISM_TOL) | (u8::from(v_est_g >= v_true_g - OPTIMISM_TOL) << 1);
        rows.push(EpisodeRow {
            k,
            v_est_r,
            v_est_g,
            v_true_r,
            v_true_g,
            v_star_r: star.at_episode(k),
            y: state.y,
            regret: 0.0,
            violation: 0.0,
            checks: state.checks.total() - before,
            optimistic,
        });
    }
    fill_cumulative(&mut rows, inst.threshold());
    Ok(RunOutput {
        series: MetricsSeries { rows },
        state,
    })
}

/// Uniform policy for every episode, recorded with the same metrics.
pub fn run_random_baseline(
    inst: &CmdpInstance,
    episodes: usize,
    rng: &RngStream,
    comparator: &ComparatorResult,
) -> Result<MetricsSeries> {
    let policy = PolicyTable::uniform(inst.horizon(), inst.num_states(), inst.num_actions());
    let mut star = ComparatorValues::new(inst, comparator);
    let s1 = inst.initial_state();
    let v_true_g = dp_evaluate(inst, &policy, inst.constraint()).v[0][s1];
    let mut rows = Vec::with_capacity(episodes);
    for k in 1..=episodes {
        let ep = rollout(inst, &policy, k, rng)?;
        let v_true_r = dp_evaluate(inst, &policy, &ep.revealed_rewards).v[0][s1];
        rows.push(EpisodeRow {
            k,
            v_est_r: f64::NAN,
            v_est_g: f64::NAN,
            v_true_r,
            v_true_g,
            v_star_r: star.at_episode(k),
            y: 0.0,
            regret: 0.0,
            violation: 0.0,
            checks: 0,
            optimistic: 0,
        });
    }
    fill_cumulative(&mut rows, inst.threshold());
    Ok(MetricsSeries { rows })
}

fn fill_cumulative(rows: &mut [EpisodeRow], threshold: f64) {
    let star: Vec<f64> = rows.iter().map(|r| r.v_star_r).collect();
    let vr: Vec<f64> = rows.iter().map(|r| r.v_true_r).collect();
    let vg: Vec<f64> = rows.iter().map(|r| r.v_true_g).collect();
    let (regret, violation) = metrics(&star, &vr, &vg, threshold);
    for ((row, reg), vio) in rows.iter_mut().zip(regret).zip(violation) {
        row.regret = reg;
        row.violation = vio;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_benchmark_instance, build_tiny_instance, BenchmarkParams};
    use crate::oracle::constrained_comparator;

    fn defaults() -> LearnerConfig {
        LearnerConfig::theorem_defaults(10, 2000, 3.0)
    }

    #[test]
    fn theorem_defaults_values() {
        let cfg = defaults();
        assert!((cfg.alpha - 1.0 / (100.0 * 2000f64.sqrt())).abs() < 1e-18);
        assert!((cfg.eta - 1.0 / (10.0 * 2000f64.sqrt())).abs() < 1e-18);
        assert_eq!(cfg.theta_mix, 5e-4);
        assert!((cfg.lambda - 1.0 / 9.0).abs() < 1e-18);
        assert_eq!(cfg.delta, 0.01);
        cfg.validate().unwrap();
    }

    #[test]
    fn dual_update_examples() {
        let cfg = defaults();
        assert_eq!(dual_update(0.0, 6.0, 6.0, 10, &cfg), 0.0);
        assert_eq!(dual_update(0.0, 9.0, 6.0, 10, &cfg), 0.0);
        // eta * (6 - alpha H^3 - 2 theta H^2)
        let expected = cfg.eta * (6.0 - cfg.alpha * 1000.0 - 2.0 * 5e-4 * 100.0);
        let y = dual_update(0.0, 0.0, 6.0, 10, &cfg);
        assert!((y - expected).abs() < 1e-15);
        assert!((y - 0.012693).abs() < 1e-6);
    }

    #[test]
    fn clipped_dual_examples() {
        assert_eq!(dual_update_clipped(0.0, 6.0, 6.0, 0.1, 0.78).unwrap(), 0.0);
        let cap = 2.0 / 0.78;
        assert_eq!(dual_update_clipped(cap, 0.0, 6.0, 0.1, 0.78).unwrap(), cap);
        assert!((cap - 2.564).abs() < 1e-3);
        assert!(dual_update_clipped(0.0, 0.0, 6.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn mirror_step_properties() {
        let base = vec![0.25; 4];
        let same = mirror_step(&base, |_| 3.7, 0.5).unwrap();
        for (a, b) in same.iter().zip(&base) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut uniform = vec![0.25; 4];
        perturb_row(&mut uniform, 0.3);
        assert!(uniform.iter().all(|p| (p - 0.25).abs() < 1e-15));
        // huge scores do not overflow
        let tilted = mirror_step(&base, |a| 1e6 * a as f64, 1.0).unwrap();
        assert!((tilted[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_floor_is_exact() {
        let mut row = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        perturb_row(&mut row, 5e-4);
        let floor = 5e-4 / 16.0;
        assert!(row.iter().all(|p| *p >= floor));
        assert_eq!(row[1], floor);
        assert_eq!(floor, 3.125e-5);
    }

    #[test]
    fn first_episode_terminal_layer_equals_reward() {
        let inst = build_benchmark_instance(&BenchmarkParams::default()).unwrap();
        let cfg = defaults();
        let mut state = LearnerState::new(&inst, &cfg).unwrap();
        let ep = rollout(&inst, &state.policy, 1, &RngStream::new(3)).unwrap();
        let r = radii(1, 5, 10, cfg.lambda, cfg.delta, 3.0).unwrap();
        state.backward_pass(&inst, &ep, &r, &cfg).unwrap();
        let hz = inst.horizon();
        for s in 0..inst.num_states() {
            for a in 0..inst.num_actions() {
                assert_eq!(state.values[0].q[hz - 1][s][a], ep.revealed_rewards[hz - 1][s][a]);
                assert_eq!(state.values[1].q[hz - 1][s][a], inst.constraint()[hz - 1][s][a]);
            }
        }
        for sig in 0..2 {
            for h in 0..hz {
                assert!(state.values[sig].v[h].iter().all(|v| *v <= (hz - h) as f64));
            }
        }
    }

    #[test]
    fn single_episode_run_keeps_initial_policy() {
        let inst = build_benchmark_instance(&BenchmarkParams::default()).unwrap();
        let mut cfg = LearnerConfig::theorem_defaults(10, 1, 3.0);
        cfg.theta_mix = 0.5;
        let comp = constrained_comparator(&inst, &inst.averaged_reward(1), 1e-8).unwrap();
        let out = run_pd_powers(&inst, &cfg, &RngStream::new(1), &comp).unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.state.policy, PolicyTable::uniform(10, 12, 16));
        assert_eq!(out.state.y, 0.0);
    }

    #[test]
    fn run_is_deterministic_and_checked() {
        let inst = build_tiny_instance();
        let cfg = LearnerConfig::theorem_defaults(3, 60, 2.0);
        let comp = constrained_comparator(&inst, &inst.averaged_reward(60), 1e-8).unwrap();
        let a = run_pd_powers(&inst, &cfg, &RngStream::new(5), &comp).unwrap();
        let b = run_pd_powers(&inst, &cfg, &RngStream::new(5), &comp).unwrap();
        assert!(a.series.bit_identical(&b.series));
        assert!(a.state.checks.variance_bound > 0);
        assert!(a.state.checks.omd_step > 0);
        assert!(a.state.min_variance_slack >= -1e-9);
    }

    #[test]
    fn random_baseline_violation_rate() {
        let inst = build_benchmark_instance(&BenchmarkParams::default()).unwrap();
        let comp = constrained_comparator(&inst, &inst.averaged_reward(40), 1e-8).unwrap();
        let series = run_random_baseline(&inst, 40, &RngStream::new(1), &comp).unwrap();
        let per = 6.0 - 0.5 * (0..10).map(|i| 0.95f64.powi(i)).sum::<f64>();
        assert!((series.final_violation() - 40.0 * per).abs() < 1e-9);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = defaults();
        cfg.theta_mix = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = defaults();
        cfg.episodes = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = defaults();
        cfg.dual = DualVariant::Clipped { gamma: 0.0 };
        assert!(cfg.validate().is_err());
    }
}
