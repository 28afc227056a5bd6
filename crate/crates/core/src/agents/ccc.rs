//! Consequentialist conditional cooperation.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{seated, CccPolicies, Mode, Protocol, Simulator};
use crate::eval::stats::{mean, quantile_sorted};
use crate::policy::{sample_index, Workspace};
use crate::pomg::{Agent, Environment, Seat, WorldState};
use crate::rng::{derive_path, rng_from_seed, SimRng};
use crate::{Error, Result};

use super::schedule::ThresholdSchedule;

/// When to switch between the cooperative and the defecting policy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DecisionRule {
    /// Defect iff cumulative reward `< (1 - alpha) * cc_quantile + alpha * cd_mean`.
    Single { alpha: f64 },
    /// Start defecting below the `alpha_d` threshold, resume cooperating at or
    /// above the `alpha_c` one. With `alpha_d == alpha_c` this is [`Single`](Self::Single).
    Hysteresis { alpha_d: f64, alpha_c: f64 },
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule::Single { alpha: 0.05 }
    }
}

fn unit_open(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid(name, "must lie strictly between 0 and 1"));
    }
    Ok(())
}

impl DecisionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecisionRule::Single { alpha } => unit_open("alpha", alpha),
            DecisionRule::Hysteresis { alpha_d, alpha_c } => {
                unit_open("alpha_d", alpha_d)?;
                unit_open("alpha_c", alpha_c)?;
                if alpha_d < alpha_c {
                    return Err(Error::invalid("alpha_d", "must be at least alpha_c"));
                }
                Ok(())
            }
        }
    }

    /// `(T_D, T_C)`: the thresholds to start defecting and to resume cooperating.
    pub fn thresholds(&self, stats: &BankStats) -> (f64, f64) {
        match *self {
            DecisionRule::Single { alpha } => {
                let t = stats.threshold(alpha);
                (t, t)
            }
            DecisionRule::Hysteresis { alpha_d, alpha_c } => (stats.threshold(alpha_d), stats.threshold(alpha_c)),
        }
    }

    pub fn next_mode(&self, mode: Mode, cumulative: f64, stats: &BankStats) -> Mode {
        let (t_d, t_c) = self.thresholds(stats);
        match mode {
            Mode::Cooperate if cumulative < t_d => Mode::Defect,
            Mode::Defect if cumulative >= t_c => Mode::Cooperate,
            m => m,
        }
    }

    /// Modes chosen after each turn for a given reward path, starting in
    /// [`Mode::Cooperate`].
    pub fn replay(&self, stats: &[BankStats], cumulative: &[f64]) -> Vec<Mode> {
        let mut mode = Mode::Cooperate;
        stats
            .iter()
            .zip(cumulative)
            .map(|(s, &c)| {
                mode = self.next_mode(mode, c, s);
                mode
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CccConfig {
    pub rule: DecisionRule,
    /// Quantile of the cooperative rollouts used as their reference.
    pub q: f64,
    /// Games per rollout bank.
    pub k: usize,
}

impl Default for CccConfig {
    fn default() -> Self {
        CccConfig { rule: DecisionRule::default(), q: 0.1, k: 32 }
    }
}

impl CccConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        unit_open("q", self.q)?;
        if self.k < 2 {
            return Err(Error::invalid("k", "need at least 2 rollouts per bank"));
        }
        Ok(())
    }
}

/// Rollout summary after a given turn, in cumulative-reward units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BankStats {
    pub turn: u64,
    /// `q`-quantile of the cooperative-pair cumulative rewards.
    pub cc_quantile: f64,
    /// Mean cumulative reward when cooperating against a defector.
    pub cd_mean: f64,
}

impl BankStats {
    pub fn threshold(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.cc_quantile + alpha * self.cd_mean
    }
}

/// `k` cooperator-cooperator and `k` cooperator-defector games advanced in
/// lockstep with the real game. The agent's seat is always played by its
/// cooperative policy.
#[derive(Debug, Clone)]
pub struct RolloutBanks<S> {
    seat: Seat,
    q: f64,
    policies: CccPolicies,
    cc: Vec<S>,
    cd: Vec<S>,
    rngs_cc: Vec<SimRng>,
    rngs_cd: Vec<SimRng>,
    r_cc: Vec<f64>,
    r_cd: Vec<f64>,
    sorted: Vec<f64>,
    sim: Simulator,
    turn: u64,
}

impl<S: WorldState> RolloutBanks<S> {
    pub fn new<E>(env: &E, policies: CccPolicies, seat: Seat, q: f64, k: usize, seed: u64) -> Result<Self>
    where
        E: Environment<State = S> + ?Sized,
    {
        unit_open("q", q)?;
        if k < 2 {
            return Err(Error::invalid("k", "need at least 2 rollouts per bank"));
        }
        let bank = |stream: u64| (0..k as u64).map(|b| env.new_state(derive_path(seed, &[stream, b]))).collect();
        let rngs = |stream: u64| (0..k as u64).map(|b| rng_from_seed(derive_path(seed, &[stream, b]))).collect();
        let cc: Vec<S> = bank(0);
        policies.validate(&cc[0], seat)?;
        Ok(RolloutBanks {
            seat,
            q,
            policies,
            cc,
            cd: bank(2),
            rngs_cc: rngs(1),
            rngs_cd: rngs(3),
            r_cc: alloc::vec![0.0; k],
            r_cd: alloc::vec![0.0; k],
            sorted: Vec::with_capacity(k),
            sim: Simulator::default(),
            turn: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.cc.len()
    }

    pub fn turn(&self) -> u64 {
        self.turn
    }

    pub fn cc_games(&self) -> &[S] {
        &self.cc
    }

    pub fn cd_games(&self) -> &[S] {
        &self.cd
    }

    /// Cumulative rewards of the agent's seat in each cooperative game.
    pub fn cc_totals(&self) -> &[f64] {
        &self.r_cc
    }

    pub fn cd_totals(&self) -> &[f64] {
        &self.r_cd
    }

    /// Advances every game one turn and summarises the banks.
    pub fn step(&mut self) -> Result<BankStats> {
        let me = self.seat.index();
        let p = &self.policies;
        let cc_pols = seated(self.seat, &p.own_c, &p.partner_c);
        let cd_pols = seated(self.seat, &p.own_c, &p.partner_d);
        for ((state, rng), r) in self.cc.iter_mut().zip(&mut self.rngs_cc).zip(&mut self.r_cc) {
            let actions = self.sim.joint_action(state, cc_pols, rng)?;
            *r += state.advance(actions)?.rewards[me];
        }
        for ((state, rng), r) in self.cd.iter_mut().zip(&mut self.rngs_cd).zip(&mut self.r_cd) {
            let actions = self.sim.joint_action(state, cd_pols, rng)?;
            *r += state.advance(actions)?.rewards[me];
        }
        self.turn += 1;
        self.sorted.clear();
        self.sorted.extend_from_slice(&self.r_cc);
        self.sorted.sort_by(f64::total_cmp);
        Ok(BankStats { turn: self.turn, cc_quantile: quantile_sorted(&self.sorted, self.q), cd_mean: mean(&self.r_cd) })
    }
}

#[derive(Debug, Clone)]
enum Source<S> {
    Online(RolloutBanks<S>),
    Precomputed(Arc<ThresholdSchedule>),
}

/// The CCC agent.
///
/// After each turn it advances its rollout banks (or reads the next row of a
/// precomputed schedule), then picks the mode for the next turn from its
/// cumulative reward so far. It starts out cooperating.
#[derive(Debug, Clone)]
pub struct CccAgent<S> {
    policies: CccPolicies,
    rule: DecisionRule,
    source: Source<S>,
    cumulative: f64,
    turn: u64,
    mode: Mode,
    protocol: Protocol,
    modes: Vec<Mode>,
    stats: Vec<BankStats>,
    switches: usize,
    ws: Workspace,
}

impl<S: WorldState> CccAgent<S> {
    /// Agent with live rollout banks seeded from `seed`.
    pub fn new<E>(env: &E, policies: CccPolicies, cfg: CccConfig, seat: Seat, seed: u64) -> Result<Self>
    where
        E: Environment<State = S> + ?Sized,
    {
        cfg.validate()?;
        let banks = RolloutBanks::new(env, policies.clone(), seat, cfg.q, cfg.k, seed)?;
        Ok(Self::with_source(policies, cfg.rule, Source::Online(banks)))
    }

    /// Agent driven by a schedule computed ahead of time.
    pub fn with_schedule(policies: CccPolicies, rule: DecisionRule, schedule: Arc<ThresholdSchedule>) -> Result<Self> {
        rule.validate()?;
        Ok(Self::with_source(policies, rule, Source::Precomputed(schedule)))
    }

    fn with_source(policies: CccPolicies, rule: DecisionRule, source: Source<S>) -> Self {
        CccAgent {
            policies,
            rule,
            source,
            cumulative: 0.0,
            turn: 0,
            mode: Mode::Cooperate,
            protocol: Protocol::default(),
            modes: Vec::new(),
            stats: Vec::new(),
            switches: 0,
            ws: Workspace::default(),
        }
    }

    /// Mode the next action will be drawn from.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub fn turn(&self) -> u64 {
        self.turn
    }

    /// Mode used on each turn played so far.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Rollout statistics seen after each turn.
    pub fn stats(&self) -> &[BankStats] {
        &self.stats
    }

    pub fn switch_count(&self) -> usize {
        self.switches
    }

    pub fn banks(&self) -> Option<&RolloutBanks<S>> {
        match &self.source {
            Source::Online(b) => Some(b),
            Source::Precomputed(_) => None,
        }
    }

    fn next_stats(&mut self) -> Result<BankStats> {
        match &mut self.source {
            Source::Online(banks) => banks.step(),
            Source::Precomputed(schedule) => schedule
                .stats()
                .get(self.turn as usize - 1)
                .copied()
                .ok_or_else(|| Error::invalid("schedule", "threshold schedule is shorter than the game")),
        }
    }
}

impl<S: WorldState> Agent<S> for CccAgent<S> {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        self.protocol.on_act()?;
        let policy = match self.mode {
            Mode::Cooperate => &self.policies.own_c,
            Mode::Defect => &self.policies.own_d,
        };
        let probs = policy.forward_into(obs, &mut self.ws)?;
        self.modes.push(self.mode);
        Ok(sample_index(probs, rng))
    }

    fn observe(&mut self, reward: f64) -> Result<()> {
        self.protocol.on_observe()?;
        self.cumulative += reward;
        self.turn += 1;
        let stats = self.next_stats()?;
        let next = self.rule.next_mode(self.mode, self.cumulative, &stats);
        if next != self.mode {
            self.switches += 1;
        }
        self.mode = next;
        self.stats.push(stats);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{MatrixGame, MatrixState};
    use crate::policy::PolicyParams;
    use crate::pomg::run_episode;

    fn pd_policies() -> CccPolicies {
        CccPolicies::symmetric(
            PolicyParams::constant(5, 2, 0, 50.0).unwrap(),
            PolicyParams::constant(5, 2, 1, 50.0).unwrap(),
        )
    }

    fn stats(cc: f64, cd: f64) -> BankStats {
        BankStats { turn: 1, cc_quantile: cc, cd_mean: cd }
    }

    #[test]
    fn config_ranges() {
        assert!(CccConfig::default().validate().is_ok());
        assert!(CccConfig { k: 1, ..CccConfig::default() }.validate().is_err());
        assert!(CccConfig { q: 1.0, ..CccConfig::default() }.validate().is_err());
        assert!(DecisionRule::Single { alpha: 0.0 }.validate().is_err());
        assert!(DecisionRule::Hysteresis { alpha_d: 0.1, alpha_c: 0.2 }.validate().is_err());
        assert!(DecisionRule::Hysteresis { alpha_d: 0.2, alpha_c: 0.2 }.validate().is_ok());
    }

    #[test]
    fn equality_cooperates() {
        let rule = DecisionRule::Single { alpha: 0.5 };
        let s = stats(4.0, 2.0);
        assert_eq!(rule.next_mode(Mode::Cooperate, 3.0, &s), Mode::Cooperate);
        assert_eq!(rule.next_mode(Mode::Defect, 3.0, &s), Mode::Cooperate);
        assert_eq!(rule.next_mode(Mode::Cooperate, 2.999, &s), Mode::Defect);
        assert_eq!(rule.next_mode(Mode::Defect, 1e6, &s), Mode::Cooperate);
    }

    #[test]
    fn hysteresis_band_holds_mode() {
        let rule = DecisionRule::Hysteresis { alpha_d: 0.5, alpha_c: 0.25 };
        let s = stats(4.0, 0.0);
        // T_D = 2, T_C = 3
        assert_eq!(rule.next_mode(Mode::Cooperate, 2.5, &s), Mode::Cooperate);
        assert_eq!(rule.next_mode(Mode::Defect, 2.5, &s), Mode::Defect);
        assert_eq!(rule.next_mode(Mode::Defect, 3.0, &s), Mode::Cooperate);
    }

    #[test]
    fn banks_have_k_games_and_deterministic_thresholds() {
        let g = MatrixGame::prisoners_dilemma();
        let mut banks = RolloutBanks::new(&g, pd_policies(), Seat::First, 0.1, 32, 7).unwrap();
        assert_eq!((banks.cc_games().len(), banks.cd_games().len()), (32, 32));
        for t in 1..=20u64 {
            let s = banks.step().unwrap();
            assert_eq!(s.cc_quantile, 2.0 * t as f64);
            assert_eq!(s.cd_mean, 0.0);
            assert_eq!(s.threshold(0.05), 0.95 * 2.0 * t as f64);
        }
    }

    #[test]
    fn cooperates_with_cooperator_and_drops_defector() {
        let g = MatrixGame::prisoners_dilemma();
        let p = pd_policies();
        for (partner, expected) in [(0usize, [40.0, 40.0]), (1, [19.0, 22.0])] {
            let mut ccc = CccAgent::<MatrixState>::new(&g, p.clone(), CccConfig::default(), Seat::First, 3).unwrap();
            let mut other = super::super::FixedAgent::new(PolicyParams::constant(5, 2, partner, 50.0).unwrap());
            let trace = run_episode(&g, &mut ccc, &mut other, 20, 11).unwrap();
            assert_eq!(trace.totals(), expected);
        }
    }

    #[test]
    fn skipped_observe_is_a_protocol_error() {
        let g = MatrixGame::prisoners_dilemma();
        let mut ccc = CccAgent::<MatrixState>::new(&g, pd_policies(), CccConfig::default(), Seat::First, 0).unwrap();
        let mut rng = rng_from_seed(0);
        let obs = [0.0, 0.0, 0.0, 0.0, 1.0];
        ccc.act(&obs, &mut rng).unwrap();
        assert!(matches!(ccc.act(&obs, &mut rng), Err(Error::Protocol(_))));
        let mut fresh = CccAgent::<MatrixState>::new(&g, pd_policies(), CccConfig::default(), Seat::First, 0).unwrap();
        assert!(matches!(fresh.observe(1.0), Err(Error::Protocol(_))));
    }
}
