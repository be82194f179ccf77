//! Domain types for finite-horizon linear mixture CMDPs.
//!
//! Indexing conventions used throughout the crate:
//! - steps `h` are 0-based, `0..H`; the value layer `H` is the terminal layer
//!   and is identically zero,
//! - episodes `k` are 1-based,
//! - states and actions are dense indices.
//!
//! At step `h` (0-based) every Q and V table is bounded by `H - h`.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{check_index, CmdpError, Result};

/// Signal table indexed `[h][s][a]`.
pub type Table = Vec<Vec<Vec<f64>>>;

/// Tolerance on per-(h, s, a) transition mass.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Known feature map `phi(s' | s, a)` with an explicit support per `(s, a)`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    dim: usize,
    num_states: usize,
    num_actions: usize,
    entries: Vec<Vec<(usize, DVector<f64>)>>,
}

impl FeatureMap {
    /// `entries[s * num_actions + a]` lists `(s', phi(s' | s, a))`.
    pub fn new(
        dim: usize,
        num_states: usize,
        num_actions: usize,
        entries: Vec<Vec<(usize, DVector<f64>)>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(CmdpError::InvalidParameter {
                name: "dim",
                reason: "feature dimension must be positive".into(),
            });
        }
        if entries.len() != num_states * num_actions {
            return Err(CmdpError::InvalidParameter {
                name: "entries",
                reason: format!(
                    "expected {} (s, a) supports, got {}",
                    num_states * num_actions,
                    entries.len()
                ),
            });
        }
        for (idx, support) in entries.iter().enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            if support.is_empty() {
                return Err(CmdpError::InvalidParameter {
                    name: "entries",
                    reason: format!("empty support at (s={s}, a={a})"),
                });
            }
            for (i, (next, phi)) in support.iter().enumerate() {
                check_index("next state", *next, num_states)?;
                if phi.len() != dim {
                    return Err(CmdpError::InvalidParameter {
                        name: "entries",
                        reason: format!("feature at (s={s}, a={a}, s'={next}) has length {}", phi.len()),
                    });
                }
                if support[..i].iter().any(|(other, _)| other == next) {
                    return Err(CmdpError::InvalidParameter {
                        name: "entries",
                        reason: format!("duplicate next state {next} at (s={s}, a={a})"),
                    });
                }
            }
        }
        Ok(Self {
            dim,
            num_states,
            num_actions,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn support(&self, s: usize, a: usize) -> Result<&[(usize, DVector<f64>)]> {
        check_index("state", s, self.num_states)?;
        check_index("action", a, self.num_actions)?;
        Ok(&self.entries[s * self.num_actions + a])
    }

    /// Integrated feature `sum_{s'} phi(s' | s, a) * v(s')` over the declared support.
    pub fn phi_v(&self, v: &[f64], s: usize, a: usize) -> Result<DVector<f64>> {
        if v.len() != self.num_states {
            return Err(CmdpError::InvalidParameter {
                name: "v",
                reason: format!("value vector has {} entries, expected {}", v.len(), self.num_states),
            });
        }
        let support = self.support(s, a)?;
        let mut out = DVector::zeros(self.dim);
        for (next, phi) in support {
            out.axpy(v[*next], phi, 1.0);
        }
        Ok(out)
    }

    /// Same as [`FeatureMap::phi_v`] with `v` squared element-wise.
    pub fn phi_v_squared(&self, v: &[f64], s: usize, a: usize) -> Result<DVector<f64>> {
        let squared: Vec<f64> = v.iter().map(|x| x * x).collect();
        self.phi_v(&squared, s, a)
    }
}

/// Adversarial reward sequence `r^k`, fixed before learning starts.
#[derive(Debug, Clone)]
pub enum RewardSchedule {
    Fixed(Arc<Table>),
    /// `even` is used when `floor(k / block_length)` is even, `odd` otherwise.
    Alternating {
        block_length: usize,
        even: Arc<Table>,
        odd: Arc<Table>,
    },
}

impl RewardSchedule {
    pub fn table(&self, k: usize) -> &Arc<Table> {
        match self {
            RewardSchedule::Fixed(t) => t,
            RewardSchedule::Alternating {
                block_length,
                even,
                odd,
            } => {
                if (k / block_length) % 2 == 0 {
                    even
                } else {
                    odd
                }
            }
        }
    }

    fn tables(&self) -> Vec<&Arc<Table>> {
        match self {
            RewardSchedule::Fixed(t) => vec![t],
            RewardSchedule::Alternating { even, odd, .. } => vec![even, odd],
        }
    }
}

/// A finite-horizon linear mixture CMDP.
///
/// The transition parameters `theta_star` are simulator-side only. The
/// learner touches the feature map, the constraint table and the rewards
/// revealed after each episode.
#[derive(Debug, Clone)]
pub struct CmdpInstance {
    horizon: usize,
    features: FeatureMap,
    theta_star: Vec<DVector<f64>>,
    param_bound: f64,
    rewards: RewardSchedule,
    constraint: Arc<Table>,
    threshold: f64,
    initial_state: usize,
    // transitions[h][s * A + a] = [(s', P_h(s' | s, a))]
    transitions: Vec<Vec<Vec<(usize, f64)>>>,
}

impl CmdpInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: usize,
        features: FeatureMap,
        theta_star: Vec<DVector<f64>>,
        param_bound: f64,
        rewards: RewardSchedule,
        constraint: Table,
        threshold: f64,
        initial_state: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(CmdpError::InvalidParameter {
                name: "horizon",
                reason: "must be positive".into(),
            });
        }
        if theta_star.len() != horizon || theta_star.iter().any(|t| t.len() != features.dim()) {
            return Err(CmdpError::InvalidParameter {
                name: "theta_star",
                reason: format!("need {horizon} vectors of length {}", features.dim()),
            });
        }
        check_index("initial state", initial_state, features.num_states())?;
        let (ns, na) = (features.num_states(), features.num_actions());
        let shape_ok = |t: &Table| {
            t.len() == horizon && t.iter().all(|l| l.len() == ns && l.iter().all(|r| r.len() == na))
        };
        if !shape_ok(&constraint) {
            return Err(CmdpError::InvalidParameter {
                name: "constraint",
                reason: format!("expected a [{horizon}][{ns}][{na}] table"),
            });
        }
        if !rewards.tables().into_iter().all(|t| shape_ok(t)) {
            return Err(CmdpError::InvalidParameter {
                name: "rewards",
                reason: format!("expected [{horizon}][{ns}][{na}] tables"),
            });
        }
        let transitions = theta_star
            .iter()
            .map(|theta| {
                features
                    .entries
                    .iter()
                    .map(|support| support.iter().map(|(next, phi)| (*next, phi.dot(theta))).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            horizon,
            features,
            theta_star,
            param_bound,
            rewards,
            constraint: Arc::new(constraint),
            threshold,
            initial_state,
            transitions,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.features.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.features.num_actions()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn theta_star(&self) -> &[DVector<f64>] {
        &self.theta_star
    }

    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn rewards(&self) -> &RewardSchedule {
        &self.rewards
    }

    pub fn constraint(&self) -> &Arc<Table> {
        &self.constraint
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_theta_star(self, theta_star: Vec<DVector<f64>>) -> Result<Self> {
        Self::new(
            self.horizon,
            self.features,
            theta_star,
            self.param_bound,
            self.rewards,
            Arc::try_unwrap(self.constraint).unwrap_or_else(|c| (*c).clone()),
            self.threshold,
            self.initial_state,
        )
    }

    fn check_sa(&self, h: usize, s: usize, a: usize) -> Result<()> {
        check_index("step", h, self.horizon)?;
        check_index("state", s, self.num_states())?;
        check_index("action", a, self.num_actions())
    }

    /// `P_h(s' | s, a) = <phi(s' | s, a), theta*_h>`, zero off the support.
    pub fn transition_prob(&self, h: usize, s: usize, a: usize, next: usize) -> Result<f64> {
        self.check_sa(h, s, a)?;
        check_index("next state", next, self.num_states())?;
        Ok(self
            .transitions(h, s, a)
            .iter()
            .find(|(n, _)| *n == next)
            .map_or(0.0, |(_, p)| *p))
    }

    /// Support of `P_h(. | s, a)` with probabilities. Indices must be valid.
    pub fn transitions(&self, h: usize, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[h][s * self.num_actions() + a]
    }

    /// Reward of episode `k`. Deterministic in `(k, h, s, a)`.
    pub fn reward_at(&self, k: usize, h: usize, s: usize, a: usize) -> Result<f64> {
        self.check_sa(h, s, a)?;
        Ok(self.rewards.table(k)[h][s][a])
    }

    pub fn reward_table(&self, k: usize) -> &Arc<Table> {
        self.rewards.table(k)
    }

    pub fn constraint_at(&self, h: usize, s: usize, a: usize) -> Result<f64> {
        self.check_sa(h, s, a)?;
        Ok(self.constraint[h][s][a])
    }

    /// `(1/K) sum_{k=1}^{K} r^k`, the reward the regret comparator optimizes.
    pub fn averaged_reward(&self, episodes: usize) -> Table {
        let (hz, ns, na) = (self.horizon, self.num_states(), self.num_actions());
        let mut avg = vec![vec![vec![0.0; na]; ns]; hz];
        if episodes == 0 {
            return avg;
        }
        let mut push = |t: &Table, count: usize| {
            let w = count as f64 / episodes as f64;
            for h in 0..hz {
                for s in 0..ns {
                    for a in 0..na {
                        avg[h][s][a] += w * t[h][s][a];
                    }
                }
            }
        };
        match &self.rewards {
            RewardSchedule::Fixed(t) => push(t, episodes),
            RewardSchedule::Alternating { even, odd, .. } => {
                let n_even = (1..=episodes).filter(|k| Arc::ptr_eq(self.rewards.table(*k), even)).count();
                push(even, n_even);
                push(odd, episodes - n_even);
            }
        }
        avg
    }
}

/// Markov policy `pi_h(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    probs: Table,
}

impl PolicyTable {
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            probs: vec![vec![vec![p; num_actions]; num_states]; horizon],
        }
    }

    /// Deterministic policy from `choice[h][s]`.
    pub fn deterministic(choice: &[Vec<usize>], num_actions: usize) -> Self {
        let probs = choice
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0.0; num_actions];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn from_table(probs: Table) -> Result<Self> {
        let policy = Self { probs };
        policy.check_simplex(1e-12)?;
        Ok(policy)
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        &self.probs[h][s]
    }

    pub(crate) fn row_mut(&mut self, h: usize, s: usize) -> &mut Vec<f64> {
        &mut self.probs[h][s]
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[h][s][a]
    }

    pub fn table(&self) -> &Table {
        &self.probs
    }

    /// Largest deviation of a row sum from 1; errors on negative entries.
    pub fn check_simplex(&self, tol: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for (h, layer) in self.probs.iter().enumerate() {
            for (s, row) in layer.iter().enumerate() {
                if let Some(a) = row.iter().position(|p| !(*p >= 0.0)) {
                    return Err(CmdpError::InvalidParameter {
                        name: "policy",
                        reason: format!("entry (h={h}, s={s}, a={a}) = {} is negative", row[a]),
                    });
                }
                let err = (row.iter().sum::<f64>() - 1.0).abs();
                if err > tol {
                    return Err(CmdpError::InvalidParameter {
                        name: "policy",
                        reason: format!("row (h={h}, s={s}) sums to 1 + {err:e}"),
                    });
                }
                worst = worst.max(err);
            }
        }
        Ok(worst)
    }
}

/// Q and V tables of one signal. `v` has `H + 1` layers; `v[H]` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: Table,
    pub v: Vec<Vec<f64>>,
}

impl ValueTables {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            q: vec![vec![vec![0.0; num_actions]; num_states]; horizon],
            v: vec![vec![0.0; num_states]; horizon + 1],
        }
    }
}

/// One realized episode plus the rewards revealed at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub k: usize,
    /// `H + 1` visited states, `states[0] = s1`.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub revealed_rewards: Arc<Table>,
}

/// Outcome of [`validate_instance`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub max_prob_sum_error: f64,
    pub min_prob: f64,
    pub max_prob: f64,
    /// Max `||phi_V||_2` over sampled and box-vertex `V in [0,1]^S`.
    pub max_phi_v_norm: f64,
    pub theta_norms: Vec<f64>,
    pub param_bound: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "max |sum_s' P - 1|  = {:.3e}", self.max_prob_sum_error)?;
        writeln!(f, "P range             = [{:.6}, {:.6}]", self.min_prob, self.max_prob)?;
        writeln!(f, "max ||phi_V||_2     = {:.6}", self.max_phi_v_norm)?;
        let max_theta = self.theta_norms.iter().copied().fold(0.0, f64::max);
        writeln!(f, "max ||theta*_h||_2  = {:.6} (B = {})", max_theta, self.param_bound)?;
        if self.failures.is_empty() {
            write!(f, "PASS")
        } else {
            writeln!(f, "FAIL")?;
            for msg in &self.failures {
                writeln!(f, "  - {msg}")?;
            }
            Ok(())
        }
    }
}

// supports up to this size also get every vertex of [0,1]^support checked
const MAX_VERTEX_SUPPORT: usize = 12;

/// Checks every structural invariant of a linear mixture CMDP.
pub fn validate_instance<R: Rng + ?Sized>(
    inst: &CmdpInstance,
    num_value_samples: usize,
    rng: &mut R,
) -> ValidationReport {
    let (hz, ns, na) = (inst.horizon(), inst.num_states(), inst.num_actions());
    let mut failures = Vec::new();
    let mut max_err = 0.0f64;
    let mut min_prob = f64::INFINITY;
    let mut max_prob = f64::NEG_INFINITY;

    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                let tr = inst.transitions(h, s, a);
                let sum: f64 = tr.iter().map(|(_, p)| p).sum();
                let err = (sum - 1.0).abs();
                max_err = max_err.max(err);
                for &(_, p) in tr {
                    min_prob = min_prob.min(p);
                    max_prob = max_prob.max(p);
                }
                if err > PROB_SUM_TOL && failures.len() < 16 {
                    failures.push(format!("probability sum at (h={h}, s={s}, a={a}) is {sum}"));
                }
            }
        }
    }
    if min_prob < -PROB_SUM_TOL || max_prob > 1.0 + PROB_SUM_TOL {
        failures.push(format!("probabilities outside [0,1]: range [{min_prob}, {max_prob}]"));
    }

    let theta_norms: Vec<f64> = inst.theta_star().iter().map(|t| t.norm()).collect();
    for (h, n) in theta_norms.iter().enumerate() {
        if *n > inst.param_bound() {
            failures.push(format!("||theta*_{h}||_2 = {n} exceeds B = {}", inst.param_bound()));
        }
    }

    let fm = inst.features();
    let mut max_norm = 0.0f64;
    let mut v = vec![0.0; ns];
    for _ in 0..num_value_samples {
        v.iter_mut().for_each(|x| *x = rng.random::<f64>());
        for s in 0..ns {
            for a in 0..na {
                let n = fm.phi_v(&v, s, a).expect("indices in range").norm();
                max_norm = max_norm.max(n);
            }
        }
    }
    // the norm is convex in V, so over the box it peaks at a vertex
    for s in 0..ns {
        for a in 0..na {
            let support = fm.support(s, a).expect("indices in range");
            if support.len() > MAX_VERTEX_SUPPORT {
                continue;
            }
            for mask in 0u32..(1 << support.len()) {
                let mut acc = DVector::zeros(fm.dim());
                for (i, (_, phi)) in support.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        acc += phi;
                    }
                }
                max_norm = max_norm.max(acc.norm());
            }
        }
    }
    if max_norm > 1.0 + 1e-12 {
        failures.push(format!("max ||phi_V||_2 = {max_norm} exceeds 1"));
    }

    let b = inst.threshold();
    if !(0.0..=hz as f64).contains(&b) {
        failures.push(format!("threshold b = {b} outside [0, {hz}]"));
    }

    let in_unit = |t: &Table| t.iter().flatten().flatten().all(|x| (0.0..=1.0).contains(x));
    if !in_unit(inst.constraint()) {
        failures.push("constraint g outside [0,1]".into());
    }
    if !inst.rewards.tables().into_iter().all(|t| in_unit(t)) {
        failures.push("reward table outside [0,1]".into());
    }

    ValidationReport {
        max_prob_sum_error: max_err,
        min_prob,
        max_prob,
        max_phi_v_norm: max_norm,
        theta_norms,
        param_bound: inst.param_bound(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_benchmark_instance, build_tiny_instance, BenchmarkParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bench() -> CmdpInstance {
        build_benchmark_instance(&BenchmarkParams::default()).unwrap()
    }

    #[test]
    fn phi_v_of_zero_is_zero() {
        let inst = bench();
        let v = vec![0.0; inst.num_states()];
        for a in 0..inst.num_actions() {
            assert_eq!(inst.features().phi_v(&v, 3, a).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn phi_v_of_ones_integrates_to_one() {
        let inst = bench();
        let v = vec![1.0; inst.num_states()];
        let all_ones = inst.num_actions() - 1;
        let phi = inst.features().phi_v(&v, 0, all_ones).unwrap();
        // oracle: sum of the transition row computed independently
        let total: f64 = (0..inst.num_states())
            .map(|n| inst.transition_prob(0, 0, all_ones, n).unwrap())
            .sum();
        assert!((phi.dot(&inst.theta_star()[0]) - total).abs() < 1e-12);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_v_of_indicator_picks_single_feature() {
        let inst = bench();
        let s = 2;
        let mut v = vec![0.0; inst.num_states()];
        v[s + 1] = 1.0;
        for a in 0..inst.num_actions() {
            let phi = inst.features().phi_v(&v, s, a).unwrap();
            let (_, expected) = inst
                .features()
                .support(s, a)
                .unwrap()
                .iter()
                .find(|(n, _)| *n == s + 1)
                .unwrap();
            assert_eq!(&phi, expected);
        }
    }

    #[test]
    fn phi_v_rejects_bad_indices() {
        let inst = bench();
        let v = vec![0.0; inst.num_states()];
        assert!(inst.features().phi_v(&v, inst.num_states(), 0).is_err());
        assert!(inst.features().phi_v(&v, 0, inst.num_actions()).is_err());
        assert!(inst.features().phi_v(&v[1..], 0, 0).is_err());
    }

    #[test]
    fn benchmark_transition_values() {
        let inst = bench();
        let all_ones = inst.num_actions() - 1;
        assert!((inst.transition_prob(0, 0, all_ones, 1).unwrap() - 0.91).abs() < 1e-12);
        assert!((inst.transition_prob(0, 0, 0, 1).unwrap() - 0.99).abs() < 1e-12);
        let hz = inst.horizon();
        assert!((inst.transition_prob(4, hz, 7, hz).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(inst.transition_prob(0, 0, 0, 5).unwrap(), 0.0);
    }

    #[test]
    fn benchmark_and_tiny_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = validate_instance(&bench(), 1000, &mut rng);
        assert!(report.passed(), "{report}");
        assert!(report.max_phi_v_norm <= 1.0);
        let report = validate_instance(&build_tiny_instance(), 1000, &mut rng);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn scaled_theta_fails_probability_check() {
        let inst = bench();
        let doubled = inst.theta_star().iter().map(|t| t * 2.0).collect();
        let bad = inst.with_theta_star(doubled).unwrap();
        let report = validate_instance(&bad, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(!report.passed());
        assert!(report.failures.iter().any(|f| f.contains("probability sum")));
        assert!((report.max_prob_sum_error - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_threshold_fails() {
        let inst = bench();
        let hz = inst.horizon() as f64;
        let bad = inst.with_threshold(hz + 1.0);
        let report = validate_instance(&bad, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(report.failures.iter().any(|f| f.contains("threshold")));
    }

    #[test]
    fn averaged_reward_counts_blocks() {
        let inst = bench();
        // K = 20: k=1..9 and k=20 are even blocks, 10..19 odd
        let avg = inst.averaged_reward(20);
        let even = inst.reward_table(1);
        let odd = inst.reward_table(10);
        let expected = 0.5 * even[0][0][3] + 0.5 * odd[0][0][3];
        assert!((avg[0][0][3] - expected).abs() < 1e-15);
    }

    #[test]
    fn policy_simplex_checks() {
        let p = PolicyTable::uniform(2, 3, 4);
        assert!(p.check_simplex(1e-12).unwrap() < 1e-15);
        let bad = vec![vec![vec![0.5, 0.6]]];
        assert!(PolicyTable::from_table(bad).is_err());
        let neg = vec![vec![vec![1.5, -0.5]]];
        assert!(PolicyTable::from_table(neg).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_v_is_linear(
                v1 in proptest::collection::vec(-3.0f64..3.0, 12),
                v2 in proptest::collection::vec(-3.0f64..3.0, 12),
                alpha in -2.0f64..2.0,
                beta in -2.0f64..2.0,
                s in 0usize..12,
                a in 0usize..16,
            ) {
                let inst = bench();
                let fm = inst.features();
                let combo: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| alpha * x + beta * y).collect();
                let lhs = fm.phi_v(&combo, s, a).unwrap();
                let rhs = fm.phi_v(&v1, s, a).unwrap() * alpha + fm.phi_v(&v2, s, a).unwrap() * beta;
                prop_assert!((lhs - rhs).amax() < 1e-12);
            }
        }
    }
}
