use cascade_core::sim::{generate_hourglass, gini, run_simulation, write_outputs, LayeredGraphSpec, SimConfig};
use proptest::prelude::*;

fn small_config(seed: u64) -> SimConfig {
    SimConfig {
        graph: LayeredGraphSpec { layers: vec![4, 3, 3, 2], ..LayeredGraphSpec::default() },
        draws: 300,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let config = small_config(11);
    let one = run_simulation(&config, 1).unwrap();
    let three = run_simulation(&config, 3).unwrap();
    assert_eq!(one, three);
}

#[test]
fn outputs_are_written_with_headers() {
    let config = small_config(12);
    let stats = run_simulation(&config, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&stats, &config, dir.path()).unwrap();
    let per_agent = std::fs::read_to_string(dir.path().join("per_agent.csv")).unwrap();
    assert!(per_agent.starts_with("agent,layer,rule,mean_liability,mean_sq_liability\n"));
    // 10 non-sink agents, two rules.
    assert_eq!(per_agent.lines().count(), 1 + 10 * 2);
    let per_layer = std::fs::read_to_string(dir.path().join("per_layer.csv")).unwrap();
    assert_eq!(per_layer.lines().count(), 1 + 3 + 1);
    assert!(per_layer.lines().last().unwrap().starts_with("all,10,"));
    let density = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(density.lines().count(), 1 + 2 * (config.density_bins + 1));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stats"]["instances"], 4 * 300);
    assert_eq!(summary["config"]["draws"], 300);
}

#[test]
fn density_integrates_to_one() {
    let config = small_config(13);
    let stats = run_simulation(&config, 1).unwrap();
    for r in 0..stats.rules.len() {
        let counted: u64 = stats.density.iter().map(|b| b.counts[r]).sum();
        assert_eq!(counted, stats.density_totals[r]);
    }
}

#[test]
fn seeds_change_results() {
    let a = run_simulation(&small_config(1), 1).unwrap();
    let b = run_simulation(&small_config(2), 1).unwrap();
    assert_ne!(a.mean_efficient_loss, b.mean_efficient_loss);
}

#[test]
fn default_graph_edge_count_is_plausible() {
    let spec = LayeredGraphSpec::default();
    let (mut mean, mut var) = (0.0, 0.0);
    for w in spec.layers.windows(2) {
        let n = (w[0] * w[1]) as f64;
        mean += n * spec.p_next;
        var += n * spec.p_next * (1.0 - spec.p_next);
    }
    for w in spec.layers.windows(3) {
        let n = (w[0] * w[2]) as f64;
        mean += n * spec.p_skip;
        var += n * spec.p_skip * (1.0 - spec.p_skip);
    }
    for seed in 0..20 {
        let g = generate_hourglass(&spec, seed).unwrap();
        let edges = g.graph.edges().len() as f64;
        assert!((edges - mean).abs() < 5.0 * var.sqrt(), "seed {seed}: {edges} edges, expected about {mean}");
    }
}

proptest! {
    #[test]
    fn gini_is_scale_free_and_bounded(values in prop::collection::vec(0.0f64..100.0, 1..40), k in 0.1f64..10.0) {
        let g = gini(&values);
        prop_assert!((0.0..1.0).contains(&g) || g == 0.0);
        let scaled: Vec<f64> = values.iter().map(|x| x * k).collect();
        prop_assert!((gini(&scaled) - g).abs() < 1e-9);
    }

    #[test]
    fn every_node_of_a_generated_graph_is_connected(seed in any::<u64>(), p in 0.0f64..0.5) {
        let spec = LayeredGraphSpec { layers: vec![5, 4, 3, 4], p_next: p, p_skip: p / 2.0, seed: None };
        let g = generate_hourglass(&spec, seed).unwrap();
        let n = g.graph.node_count();
        let mut out = vec![0; n];
        let mut inc = vec![0; n];
        for &(a, b) in g.graph.edges() {
            out[a] += 1;
            inc[b] += 1;
            prop_assert!(g.layer_of[b] == g.layer_of[a] + 1 || g.layer_of[b] == g.layer_of[a] + 2);
        }
        for v in 0..n {
            prop_assert_eq!(out[v] == 0, g.layer_of[v] == 3);
            prop_assert_eq!(inc[v] == 0, g.layer_of[v] == 0);
        }
    }
}
