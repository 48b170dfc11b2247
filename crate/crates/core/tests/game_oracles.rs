mod common;

use cascade_core::axioms::{draw_random_instance, random_decider_weights, trial_rng, GeneratorConfig};
use cascade_core::fixtures;
use cascade_core::game::{
    check_robust_efficiency, profile_count, spe_bruteforce, spe_outcomes, spe_path_greedy, SolveOptions,
};
use cascade_core::{efficient_paths, make_rule, Path, Rule, RuleSpec};
use proptest::prelude::*;

use common::{efficient_by_enumeration, random_graph_where};

const ALL_RULES: [&str; 9] =
    ["fixed:wstar", "fixed:equal", "local", "phi1", "phi2", "phi3", "phi5", "punish-first", "fixed:wstar"];

fn indices(paths: &[Path]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = paths.iter().map(|p| p.nodes().iter().map(|v| v.index()).collect()).collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn backward_induction_matches_brute_force_for_every_rule(seed in any::<u64>()) {
        let generator = GeneratorConfig { min_nodes: 3, max_nodes: 7, density: 0.4, max_loss: 6 };
        let dag = random_graph_where(seed, 0, &generator, |d| profile_count(d) <= 50_000);
        let losses = cascade_core::axioms::random_losses(&mut trial_rng(seed, 1), &dag, 6);
        for spec in &ALL_RULES[..8] {
            let rule = make_rule(&spec.parse().unwrap(), &dag).unwrap();
            let fast = spe_outcomes(&rule, &losses, &SolveOptions::default()).unwrap();
            let brute = spe_bruteforce(&rule, &losses, &SolveOptions::default()).unwrap();
            prop_assert_eq!(fast, brute, "rule {}", spec);
        }
    }

    #[test]
    fn efficient_paths_match_enumeration(seed in any::<u64>()) {
        let (dag, losses) = draw_random_instance(seed, 0, &GeneratorConfig::default());
        let eff = efficient_paths(&dag, &losses, 0.0);
        let (best, paths) = efficient_by_enumeration(&dag, &losses, 0.0);
        prop_assert_eq!(eff.min_cost, best);
        prop_assert_eq!(indices(&eff.paths), paths);
    }

    #[test]
    fn decider_positive_weights_are_robustly_efficient(seed in any::<u64>()) {
        let (dag, losses) = draw_random_instance(seed, 0, &GeneratorConfig::default());
        let w = random_decider_weights(&mut trial_rng(seed, 1), &dag);
        let rule = Rule::fixed(&dag, w).unwrap();
        let result = check_robust_efficiency(&rule, &losses, &SolveOptions::default()).unwrap();
        prop_assert!(result.holds, "{:?}", result.witness);
        let greedy = spe_path_greedy(&rule, &losses).unwrap();
        prop_assert!(efficient_paths(&dag, &losses, 0.0).contains(&greedy));
    }

    #[test]
    fn greedy_local_play_is_an_equilibrium_outcome(seed in any::<u64>()) {
        let (dag, losses) = draw_random_instance(seed, 0, &GeneratorConfig::default());
        let rule = make_rule(&RuleSpec::Local, &dag).unwrap();
        let spe = spe_outcomes(&rule, &losses, &SolveOptions::default()).unwrap();
        prop_assert!(spe.contains(&spe_path_greedy(&rule, &losses).unwrap()));
    }

    #[test]
    fn solutions_are_scale_free_for_fixed_rules(seed in any::<u64>(), factor in 1u32..20) {
        let (dag, losses) = draw_random_instance(seed, 0, &GeneratorConfig::default());
        let rule = make_rule(&RuleSpec::FixedEqual, &dag).unwrap();
        let base = spe_outcomes(&rule, &losses, &SolveOptions::default()).unwrap();
        let scaled = spe_outcomes(&rule, &losses.scaled(factor as f64), &SolveOptions::default()).unwrap();
        prop_assert_eq!(base, scaled);
    }
}

#[test]
fn local_rule_takes_the_long_chain() {
    let (dag, losses) = fixtures::fig1(5, 0.25);
    let rule = make_rule(&RuleSpec::Local, &dag).unwrap();
    let spe = spe_outcomes(&rule, &losses, &SolveOptions::default()).unwrap();
    assert_eq!(spe.len(), 1);
    assert_eq!(spe[0].labels(&dag), ["s", "1", "2", "3", "4", "t"]);
    let wstar = make_rule(&RuleSpec::FixedWstar, &dag).unwrap();
    let spe = spe_outcomes(&wstar, &losses, &SolveOptions::default()).unwrap();
    assert_eq!(spe.len(), 1);
    assert_eq!(spe[0].labels(&dag), ["s", "t"]);
}

#[test]
fn tiny_profile_cap_is_reported() {
    let dag = fixtures::grid(4);
    let losses = cascade_core::LossFunction::zeros(&dag);
    let rule = make_rule(&RuleSpec::FixedEqual, &dag).unwrap();
    let options = SolveOptions { profile_cap: 10, ..SolveOptions::default() };
    assert!(spe_bruteforce(&rule, &losses, &options).is_err());
}
