use std::collections::BTreeMap;

use proptest::prelude::*;
use sro_cli::config::{ExperimentConfig, ExperimentKind};
use sro_cli::output::{mean_std, Cell, Table};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(kind in 0usize..6, seed in any::<u64>(), trials in 1usize..50, rho in 0.01..0.99f64, noise in 0.0..3.0f64) {
        let kind = ExperimentKind::ALL[kind];
        let text = format!("experiment = {kind}\nseed = {seed}\ntrials = {trials}\nrho = {rho:?}\nnoise = {noise:?}\n");
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.rho, rho);
        let again = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(again.to_text(), cfg.to_text());
        prop_assert_eq!(again.noise, noise);
    }

    #[test]
    fn summary_agrees_with_independent_grouping(rows in prop::collection::vec((0u64..4, -1e6..1e6f64), 1..60)) {
        let mut table = Table::new(&["g", "v"]);
        for (g, v) in &rows {
            table.push(vec![Cell::Int(*g), Cell::Float(*v)]);
        }
        let summary = table.summarize(&["g"], &["v"]).unwrap();
        let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (g, v) in &rows {
            groups.entry(*g).or_default().push(*v);
        }
        prop_assert_eq!(summary.rows.len(), groups.len());
        let (cm, cs) = (summary.column("v_mean").unwrap(), summary.column("v_std").unwrap());
        for r in &summary.rows {
            let Cell::Text(key) = &r[0] else { panic!("summary keys are text") };
            let g: u64 = key.parse().unwrap();
            let vals = &groups[&g];
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            prop_assert!((r[cm].as_f64().unwrap() - mean).abs() <= 1e-12 * scale);
            prop_assert!((r[cs].as_f64().unwrap() - std).abs() <= 1e-9 * scale);
            let (m2, _) = mean_std(vals);
            prop_assert!((m2 - mean).abs() <= 1e-12 * scale);
        }
    }
}
