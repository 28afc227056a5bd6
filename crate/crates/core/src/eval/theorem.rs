//! Empirical checks of CCC's long-run guarantees on matrix games.
//!
//! Each suite plays many seeded games and reports what it measured. The
//! guarantees are limits, so a horizon below `min_horizon` is reported as
//! not yet converged instead of as a failure. Preconditions are checked
//! against the analytic rate oracle before anything is simulated.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::analytic::analytic_rate;
use crate::agents::{CccAgent, CccConfig, CccPolicies, FixedAgent, Mode};
use crate::env::{MatrixGame, MatrixState};
use crate::policy::PolicyParams;
use crate::pomg::{play, Agent, Seat};
use crate::rng::{derive_path, SimRng};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PropertyStatus {
    Pass,
    Fail,
    NonConverged,
    PreconditionViolated,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Measurement {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropertyReport {
    pub property: String,
    pub status: PropertyStatus,
    pub detail: String,
    pub measured: Vec<Measurement>,
}

impl PropertyReport {
    fn new(property: &str, status: PropertyStatus, detail: String, measured: &[(&str, f64)]) -> Self {
        PropertyReport {
            property: property.into(),
            status,
            detail,
            measured: measured.iter().map(|&(name, value)| Measurement { name: name.into(), value }).collect(),
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.measured.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConfig {
    pub seeds: usize,
    pub horizon: usize,
    /// Turns after which CCC must no longer defect against a cooperator.
    pub burn_in: usize,
    pub tolerance: f64,
    /// Fraction of seeds that must satisfy "cooperation wins".
    pub required_fraction: f64,
    pub min_horizon: usize,
    pub ccc: CccConfig,
    /// Turns the partner defects before it starts gifting.
    pub defect_turns: usize,
    /// Turns allowed for CCC to resume cooperating once gifts start.
    pub forgiveness_window: usize,
    pub gift_cost: f64,
    pub gift_value: f64,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        TheoremConfig {
            seeds: 100,
            horizon: 5000,
            burn_in: 100,
            tolerance: 0.05,
            required_fraction: 0.95,
            min_horizon: 1000,
            ccc: CccConfig::default(),
            defect_turns: 50,
            forgiveness_window: 500,
            gift_cost: 1.0,
            gift_value: 4.0,
        }
    }
}

/// Long-run rates of the policy combinations the guarantees refer to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRates {
    /// Both cooperative.
    pub cc: [f64; 2],
    /// CCC's side cooperative, partner defecting.
    pub cd: [f64; 2],
    /// CCC's side defecting, partner cooperative.
    pub dc: [f64; 2],
    pub dd: [f64; 2],
}

impl OracleRates {
    pub fn compute(game: &MatrixGame, pi_c: &PolicyParams, pi_d: &PolicyParams) -> Result<Self> {
        Ok(OracleRates {
            cc: analytic_rate(game, pi_c, pi_c)?.rates,
            cd: analytic_rate(game, pi_c, pi_d)?.rates,
            dc: analytic_rate(game, pi_d, pi_c)?.rates,
            dd: analytic_rate(game, pi_d, pi_d)?.rates,
        })
    }
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    libm::ceil(fraction * n as f64 - 1e-9) as usize
}

/// One CCC game in seat 1 against a fixed partner; returns (CCC, partner)
/// totals and the modes CCC used.
fn ccc_game(
    game: &MatrixGame,
    policies: &CccPolicies,
    cfg: &TheoremConfig,
    partner: &mut dyn Agent<MatrixState>,
    seed: u64,
) -> Result<([f64; 2], Vec<Mode>)> {
    let mut ccc = CccAgent::new(game, policies.clone(), cfg.ccc, Seat::First, derive_path(seed, &[1]))?;
    let totals = play(game, [&mut ccc, partner], cfg.horizon, derive_path(seed, &[0]), |_, _, _| {})?;
    Ok((totals, ccc.modes().to_vec()))
}

fn converged(cfg: &TheoremConfig, status: PropertyStatus) -> PropertyStatus {
    if cfg.horizon < cfg.min_horizon {
        PropertyStatus::NonConverged
    } else {
        status
    }
}

/// CCC against its cooperative partner earns the cooperative rate and stops
/// defecting after a burn-in.
pub fn cooperation_wins(
    game: &MatrixGame,
    pi_c: &PolicyParams,
    pi_d: &PolicyParams,
    cfg: &TheoremConfig,
    seed: u64,
) -> Result<PropertyReport> {
    const NAME: &str = "cooperation_wins";
    let rho = OracleRates::compute(game, pi_c, pi_d)?;
    if rho.cd[0] >= rho.cc[0] {
        let detail = format!("cooperating against a defector must pay less than mutual cooperation: rho_CD = {} >= rho_CC = {}", rho.cd[0], rho.cc[0]);
        return Ok(PropertyReport::new(NAME, PropertyStatus::PreconditionViolated, detail, &[("rho_cc", rho.cc[0]), ("rho_cd", rho.cd[0])]));
    }
    let policies = CccPolicies::symmetric(pi_c.clone(), pi_d.clone());
    let (mut on_rate, mut no_late_defection) = (0, 0);
    let mut worst_gap = 0.0f64;
    for s in 0..cfg.seeds as u64 {
        let mut partner = FixedAgent::new(pi_c.clone());
        let (totals, modes) = ccc_game(game, &policies, cfg, &mut partner, derive_path(seed, &[s]))?;
        let rate = totals[0] / modes.len().max(1) as f64;
        let gap = libm::fabs(rate - rho.cc[0]);
        worst_gap = worst_gap.max(gap);
        on_rate += (gap <= cfg.tolerance) as usize;
        no_late_defection += modes.iter().skip(cfg.burn_in).all(|&m| m == Mode::Cooperate) as usize;
    }
    let need = ceil_count(cfg.required_fraction, cfg.seeds);
    let ok = on_rate >= need && no_late_defection >= need;
    let status = converged(cfg, if ok { PropertyStatus::Pass } else { PropertyStatus::Fail });
    let detail = format!(
        "{on_rate}/{} seeds within {} of rho_CC, {no_late_defection}/{} without defection after turn {}; need {need}",
        cfg.seeds, cfg.tolerance, cfg.seeds, cfg.burn_in
    );
    Ok(PropertyReport::new(
        NAME,
        status,
        detail,
        &[
            ("rho_cc", rho.cc[0]),
            ("seeds_on_rate", on_rate as f64),
            ("seeds_without_late_defection", no_late_defection as f64),
            ("worst_rate_gap", worst_gap),
        ],
    ))
}

/// A partner that sticks to the defecting policy earns no more than the
/// mutual-defection rate against CCC.
pub fn defecting_doesnt_pay(
    game: &MatrixGame,
    pi_c: &PolicyParams,
    pi_d: &PolicyParams,
    cfg: &TheoremConfig,
    seed: u64,
) -> Result<PropertyReport> {
    const NAME: &str = "defecting_doesnt_pay";
    let rho = OracleRates::compute(game, pi_c, pi_d)?;
    let measured_rates = [("rho_cc", rho.cc[1]), ("rho_dd", rho.dd[1])];
    if rho.dd[1] >= rho.cc[1] {
        let detail = format!(
            "defecting pair must be worse off than the cooperative pair: partner rho_DD = {} >= rho_CC = {}",
            rho.dd[1], rho.cc[1]
        );
        return Ok(PropertyReport::new(NAME, PropertyStatus::PreconditionViolated, detail, &measured_rates));
    }
    let alpha = match cfg.ccc.rule {
        crate::agents::DecisionRule::Single { alpha } => alpha,
        crate::agents::DecisionRule::Hysteresis { alpha_d, .. } => alpha_d,
    };
    let threshold = (1.0 - alpha) * rho.cc[0] + alpha * rho.cd[0];
    if rho.cd[0] >= threshold || rho.dd[0] >= threshold {
        let detail = format!("the defecting partner must keep CCC below its threshold rate {threshold}");
        return Ok(PropertyReport::new(NAME, PropertyStatus::PreconditionViolated, detail, &measured_rates));
    }
    let policies = CccPolicies::symmetric(pi_c.clone(), pi_d.clone());
    let mut within = 0;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..cfg.seeds as u64 {
        let mut partner = FixedAgent::new(pi_d.clone());
        let (totals, modes) = ccc_game(game, &policies, cfg, &mut partner, derive_path(seed, &[s]))?;
        let rate = totals[1] / modes.len().max(1) as f64;
        worst = worst.max(rate);
        within += (rate <= rho.dd[1] + cfg.tolerance) as usize;
    }
    let ok = within == cfg.seeds;
    let status = converged(cfg, if ok { PropertyStatus::Pass } else { PropertyStatus::Fail });
    let detail = format!("{within}/{} seeds with partner rate <= rho_DD + {}", cfg.seeds, cfg.tolerance);
    Ok(PropertyReport::new(
        NAME,
        status,
        detail,
        &[("rho_dd", rho.dd[1]), ("seeds_within", within as f64), ("worst_partner_rate", worst)],
    ))
}

/// Defects for a while, then gifts forever.
struct Apologizer {
    defect_turns: usize,
    turn: usize,
}

impl Agent<MatrixState> for Apologizer {
    fn act(&mut self, _obs: &[f64], _rng: &mut SimRng) -> Result<usize> {
        self.turn += 1;
        Ok(if self.turn <= self.defect_turns { MatrixGame::DEFECT } else { MatrixGame::GIFT })
    }

    fn observe(&mut self, _reward: f64) -> Result<()> {
        Ok(())
    }
}

/// After being pushed into defect mode, CCC returns to cooperation within a
/// bounded number of turns once the partner starts paying gifts.
pub fn forgiveness(game: &MatrixGame, cfg: &TheoremConfig, seed: u64) -> Result<PropertyReport> {
    const NAME: &str = "forgiveness";
    let gifted = game.with_gift(cfg.gift_cost, cfg.gift_value)?;
    let inputs = gifted.observation_len();
    let c = PolicyParams::constant(inputs, 3, MatrixGame::COOPERATE, 50.0)?;
    let d = PolicyParams::constant(inputs, 3, MatrixGame::DEFECT, 50.0)?;
    let policies = CccPolicies::symmetric(c, d);
    let length = cfg.defect_turns + cfg.forgiveness_window;
    let run = TheoremConfig { horizon: length, ..*cfg };
    let (mut defected, mut returned) = (0, 0);
    let mut slowest = 0usize;
    for s in 0..cfg.seeds as u64 {
        let mut partner = Apologizer { defect_turns: cfg.defect_turns, turn: 0 };
        let (_, modes) = ccc_game(&gifted, &policies, &run, &mut partner, derive_path(seed, &[s]))?;
        if !modes[..cfg.defect_turns.min(modes.len())].contains(&Mode::Defect) {
            continue;
        }
        defected += 1;
        if let Some(k) = modes[cfg.defect_turns..].iter().position(|&m| m == Mode::Cooperate) {
            returned += 1;
            slowest = slowest.max(k + 1);
        }
    }
    let need = ceil_count(cfg.required_fraction, cfg.seeds);
    let status = if defected < need {
        PropertyStatus::PreconditionViolated
    } else if returned >= need {
        PropertyStatus::Pass
    } else {
        PropertyStatus::Fail
    };
    let detail = format!(
        "{defected}/{} seeds pushed into defect mode, {returned} back to cooperation within {} turns of gifting",
        cfg.seeds, cfg.forgiveness_window
    );
    Ok(PropertyReport::new(
        NAME,
        status,
        detail,
        &[("seeds_defected", defected as f64), ("seeds_returned", returned as f64), ("slowest_return", slowest as f64)],
    ))
}

/// Runs every suite.
pub fn verify_theorem(
    game: &MatrixGame,
    pi_c: &PolicyParams,
    pi_d: &PolicyParams,
    cfg: &TheoremConfig,
    seed: u64,
) -> Result<Vec<PropertyReport>> {
    Ok(vec![
        cooperation_wins(game, pi_c, pi_d, cfg, derive_path(seed, &[1]))?,
        defecting_doesnt_pay(game, pi_c, pi_d, cfg, derive_path(seed, &[2]))?,
        forgiveness(game, cfg, derive_path(seed, &[3]))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> TheoremConfig {
        TheoremConfig { seeds: 3, horizon: 1200, ..TheoremConfig::default() }
    }

    fn constant(a: usize) -> PolicyParams {
        PolicyParams::constant(5, 2, a, 50.0).unwrap()
    }

    #[test]
    fn suites_pass_on_the_dilemma() {
        let g = MatrixGame::prisoners_dilemma();
        for r in verify_theorem(&g, &constant(0), &constant(1), &quick(), 5).unwrap() {
            assert_eq!(r.status, PropertyStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn short_horizon_is_not_converged() {
        let g = MatrixGame::prisoners_dilemma();
        let cfg = TheoremConfig { horizon: 10, ..quick() };
        let r = cooperation_wins(&g, &constant(0), &constant(1), &cfg, 0).unwrap();
        assert_eq!(r.status, PropertyStatus::NonConverged);
    }

    #[test]
    fn tampered_defector_violates_precondition() {
        let g = MatrixGame::prisoners_dilemma();
        let r = defecting_doesnt_pay(&g, &constant(0), &constant(0), &quick(), 0).unwrap();
        assert_eq!(r.status, PropertyStatus::PreconditionViolated);
    }
}
