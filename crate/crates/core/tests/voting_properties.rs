use proptest::prelude::*;
use stopgame::markov::{MarkovChain, StateFunction};
use stopgame::simple_game::{Coalition, SimpleGame};
use stopgame::voting_game::{self, negative_part, positive_part, GameSpec, Horizon};

fn chain_strategy(states: usize) -> impl Strategy<Value = MarkovChain> {
    proptest::collection::vec(proptest::collection::vec(0.01..1.0f64, states), states).prop_map(|rows| {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        MarkovChain::unlabelled(&rows).unwrap()
    })
}

fn game_strategy(players: usize) -> impl Strategy<Value = SimpleGame> {
    proptest::collection::vec(1u32..(1 << players), 1..4).prop_map(move |minimal| {
        SimpleGame::from_minimal(players, minimal.into_iter().map(Coalition)).unwrap()
    })
}

fn instance() -> impl Strategy<Value = GameSpec> {
    sized_instance(4, 6)
}

fn sized_instance(max_states: usize, max_horizon: usize) -> impl Strategy<Value = GameSpec> {
    (1usize..=max_states, 1usize..=3, 1usize..=max_horizon).prop_flat_map(|(states, players, horizon)| {
        (
            chain_strategy(states),
            proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, states), players),
            game_strategy(players),
        )
            .prop_map(move |(chain, utilities, game)| {
                let utilities = utilities.into_iter().map(StateFunction::from).collect();
                GameSpec::new(chain, utilities, game, Horizon::Finite(horizon)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn sign_parts_reconstruct(a in -1e6..1e6f64) {
        prop_assert_eq!(positive_part(a) - negative_part(a), a);
        prop_assert!(positive_part(a) >= 0.0 && negative_part(a) >= 0.0);
    }

    #[test]
    fn equilibrium_values_are_the_profile_payoffs(spec in instance()) {
        let sol = voting_game::solve_finite(&spec).unwrap();
        let payoffs = voting_game::evaluate_profile_all(&spec, &sol.profile).unwrap();
        let n = sol.horizon();
        for (i, u) in payoffs.iter().enumerate() {
            prop_assert!(u.max_abs_diff(&sol.values[i][n]) < 1e-12);
        }
    }

    #[test]
    fn no_profitable_markov_deviation(spec in sized_instance(3, 3), x0 in 0usize..3) {
        let x0 = x0 % spec.states();
        let sol = voting_game::solve_finite(&spec).unwrap();
        let gap = voting_game::deviation_gap(&spec, &sol.profile, x0).unwrap();
        prop_assert!(gap.max_gap() <= 1e-9, "gap {}", gap.max_gap());
    }

    /// With the continuation held fixed, raising a player's utility can only
    /// enlarge that player's stopping set.
    #[test]
    fn monotone_comfort(
        spec in instance(),
        bump in proptest::collection::vec(0.0..1.0f64, 4),
        player in 0usize..3,
    ) {
        let player = player % spec.players();
        let continuation: Vec<StateFunction> = spec.utilities.iter().map(|f| spec.chain.expect(f)).collect();
        let (_, before) = voting_game::stage_operator(&spec, &continuation);
        let mut raised = spec.clone();
        for (x, v) in raised.utilities[player].0.iter_mut().enumerate() {
            *v += bump[x % bump.len()];
        }
        let (_, after) = voting_game::stage_operator(&raised, &continuation);
        for x in 0..spec.states() {
            prop_assert!(!before[player][x] || after[player][x]);
        }
    }
}

/// Re-solving with the raised utility also moves the continuation, and the
/// set can then shrink: the monotonicity is a stage-operator property.
#[test]
fn comfort_is_not_monotone_once_continuation_is_recomputed() {
    let chain = MarkovChain::unlabelled(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let game = SimpleGame::dictator(1, 0).unwrap();
    let low = GameSpec::new(chain.clone(), vec![vec![0.0, 0.0].into()], game.clone(), Horizon::Finite(2)).unwrap();
    let high = GameSpec::new(chain, vec![vec![0.0, 1.0].into()], game, Horizon::Finite(2)).unwrap();
    let a = voting_game::solve_finite(&low).unwrap();
    let b = voting_game::solve_finite(&high).unwrap();
    // Stage 1 of a 2-step game is the stage with one step to go.
    assert!(a.profile.stages[0][0][0]);
    assert!(!b.profile.stages[0][0][0]);
}
