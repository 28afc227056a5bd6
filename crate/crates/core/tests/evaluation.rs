use ccc_core::agents::FixedAgent;
use ccc_core::env::MatrixGame;
use ccc_core::eval::{
    run_matchup, run_tournament, MetricsReport, StrategyKind, StrategyPool, StrategySettings, TournamentConfig,
};
use ccc_core::policy::PolicyParams;
use ccc_core::pomg::{Agent, Environment};
use ccc_core::Error;
use proptest::prelude::*;

type Boxed = Box<dyn Agent<<MatrixGame as Environment>::State>>;

fn fixed(action: usize) -> impl FnMut(u64, u64) -> ccc_core::Result<Boxed> {
    move |_, _| Ok(Box::new(FixedAgent::new(PolicyParams::constant(5, 2, action, 50.0).unwrap())) as Boxed)
}

#[test]
fn cooperators_earn_two_per_turn() {
    let game = MatrixGame::prisoners_dilemma();
    let r = run_matchup(&game, &mut fixed(0), &mut fixed(0), 3, 1000, 0, false).unwrap();
    assert_eq!((r.s1.mean, r.s2.mean), (2000.0, 2000.0));
    assert_eq!(r.s1.std_error, 0.0);
    let again = |seed| {
        let coin = |_: u64, _: u64| Ok(Box::new(FixedAgent::new(PolicyParams::tabular(&vec![vec![0.0, 0.0]; 5]).unwrap())) as Boxed);
        run_matchup(&game, &mut fixed(0), &mut { coin }, 1, 100, seed, true).unwrap()
    };
    assert_eq!(again(5), again(5));
    assert_eq!(again(5).traces.len(), 1);
}

#[test]
fn small_pd_tournament() {
    use StrategyKind::*;
    let game = MatrixGame::prisoners_dilemma();
    let pool = StrategyPool::builtin_matrix(&game).unwrap();
    let cfg = TournamentConfig { games_per_cell: 2, length: 100, seed: 3 };
    let strategies = [Cooperator, Defector, Ccc, Amtft];
    let report = run_tournament(&game, &strategies, &pool, &StrategySettings::default(), &cfg).unwrap();
    assert_eq!(report.cells.len(), 16);
    assert_eq!(report.metrics_for("C").unwrap().self_match.value, 200.0);
    assert_eq!(report.metrics_for("C").unwrap().incent_c.value, -100.0);
    assert!(report.metrics_for("CCC").unwrap().incent_c.value > 0.0);
    assert!(report.metrics_for("amTFT").unwrap().incent_c.value > 0.0);
    let err = run_tournament(&game, &[Defector, Ccc], &pool, &StrategySettings::default(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

proptest! {
    #[test]
    fn metrics_recompute_from_the_matrix(values in proptest::collection::vec(-100.0f64..100.0, 18)) {
        let s1: Vec<Vec<f64>> = values[..9].chunks(3).map(|c| c.to_vec()).collect();
        let s2: Vec<Vec<f64>> = values[9..].chunks(3).map(|c| c.to_vec()).collect();
        let names = ["CCC", "C", "D"];
        let r = MetricsReport::from_means(&names, &s1, &s2).unwrap();
        let (c, d) = (1, 2);
        for (x, name) in names.iter().enumerate() {
            let m = r.metrics_for(name).unwrap();
            prop_assert_eq!(m.self_match.value, s1[x][x]);
            prop_assert_eq!(m.safety.value, s1[x][d] - s1[d][d]);
            prop_assert_eq!(m.incent_c.value, s2[x][c] - s2[x][d]);
        }
    }
}
