use hte_core::forest::ForestParams;
use hte_core::panel::{ColumnRole, PanelDataset};
use hte_core::pipeline::{
    orthogonalize, permute_treatment, run_pipeline, run_placebo, PipelineConfig, ResultsFile,
};
use hte_core::synth::{self, generate_panel, SynthConfig};
use hte_core::ErrorKind;

fn small(seed: u64, n_households: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.set_seed(seed);
    cfg.synth.n_households = n_households;
    cfg.synth.treatment_sd = 1.0;
    cfg.forest.num_trees = 100;
    cfg.nuisance_forest.num_trees = 60;
    cfg.gate_bins = 4;
    cfg
}

fn panel(cfg: &PipelineConfig) -> PanelDataset {
    generate_panel(&cfg.synth).unwrap().dataset
}

#[test]
fn identical_inputs_give_byte_identical_outputs() {
    let cfg = small(3, 150);
    let ds = panel(&cfg);
    let a = run_pipeline(&ds, &cfg).unwrap().output_files().unwrap();
    let b = run_pipeline(&ds, &cfg).unwrap().output_files().unwrap();
    assert_eq!(a, b);
}

#[test]
fn results_json_round_trips() {
    let cfg = small(4, 150);
    let out = run_pipeline(&panel(&cfg), &cfg).unwrap();
    let files = out.output_files().unwrap();
    let json = &files.iter().find(|(n, _)| n == "results.json").unwrap().1;
    let back: ResultsFile = serde_json::from_str(json).unwrap();
    // Timings are left to the manifest; everything else survives exactly.
    assert_eq!(serde_json::to_string_pretty(&back).unwrap() + "\n", *json);
    assert_eq!(back.gates.len(), cfg.modifiers.len());
    assert_eq!(back.n_rows, 300);
}

#[test]
fn effects_table_covers_every_analysis_row() {
    let cfg = small(5, 120);
    let out = run_pipeline(&panel(&cfg), &cfg).unwrap();
    assert_eq!(out.effects.rows.len(), out.analysis.n_rows());
    let csv = out.effects.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "unit_id,wave,tau,std_err,tau_per_sd,std_err_per_sd");
    assert_eq!(csv.lines().count(), out.analysis.n_rows() + 1);
    for r in &out.effects.rows {
        if let (Some(t), Some(s)) = (r.tau, r.tau_per_sd) {
            assert!((s - t * out.effects.treatment_sd).abs() < 1e-12);
        }
    }
    // Baseline wave rows have no lag and leave the analysis set.
    assert!(out.effects.rows.iter().all(|r| r.wave > 1));
    assert_eq!(out.metadata.n_dropped_no_history, 120);
}

#[test]
fn missing_treatment_role_is_a_config_error() {
    let cfg = small(6, 50);
    let ds = panel(&cfg);
    let mut bad = cfg.clone();
    bad.roles.remove(synth::TREATMENT);
    let err = run_pipeline(&ds, &bad).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    assert!(err.to_string().contains("treatment"), "{err}");
}

#[test]
fn unknown_modifier_is_reported() {
    let mut cfg = small(7, 50);
    let ds = panel(&cfg);
    cfg.modifiers.push("no_such_column".into());
    let err = run_pipeline(&ds, &cfg).unwrap_err();
    assert!(err.to_string().contains("no_such_column"), "{err}");
}

#[test]
fn placebo_permutes_only_the_treatment() {
    let cfg = small(8, 80);
    let ds = panel(&cfg);
    let perm = permute_treatment(&ds, 11).unwrap();
    let mut a = ds.treatment().to_vec();
    let mut b = perm.treatment().to_vec();
    assert_ne!(a, b);
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
    assert_eq!(ds.outcome(), perm.outcome());
    assert_eq!(ds.numeric(synth::ASSET).unwrap(), perm.numeric(synth::ASSET).unwrap());

    let p1 = run_placebo(&ds, &cfg, 11).unwrap();
    let p2 = run_placebo(&ds, &cfg, 11).unwrap();
    assert_eq!(p1.output_files().unwrap(), p2.output_files().unwrap());
    assert_eq!(p1.metadata.placebo_seed, Some(11));
}

#[test]
fn heatmap_follows_asset_and_adaptation_gradients() {
    // Effects rise with assets and fall with adaptation, so the high-asset,
    // low-adaptation corner sits above the opposite one.
    let mut cfg = small(9, 1500);
    cfg.synth.beta_lag2 = 0.0;
    cfg.forest.num_trees = 400;
    cfg.nuisance_forest.num_trees = 200;
    let out = run_pipeline(&panel(&cfg), &cfg).unwrap();
    let h = &out.heatmaps[0];
    assert_eq!(h.modifier_a, format!("{}_lag", synth::ASSET));
    assert_eq!(h.modifier_b, format!("{}_lag", synth::ADAPT));
    let high_low = h.cells[3][0].mean.unwrap();
    let low_high = h.cells[0][3].mean.unwrap();
    assert!(high_low > low_high + 0.05, "{high_low} vs {low_high}");
    let n: usize = h.cells.iter().flatten().map(|c| c.n).sum();
    assert_eq!(n, out.effects.rows.iter().filter(|r| r.tau.is_some()).count());
}

#[test]
fn analysis_dataset_tags_modifiers_and_confounders() {
    let cfg = small(10, 60);
    let out = run_pipeline(&panel(&cfg), &cfg).unwrap();
    let mods = out.analysis.names_with_role(ColumnRole::Modifier);
    assert_eq!(mods.len(), cfg.modifiers.len());
    assert!(out.analysis.names_with_role(ColumnRole::Confounder).contains(&"lon"));
}

#[test]
fn orthogonalization_residuals_are_centered() {
    let s = SynthConfig {
        n_households: 400,
        treatment_sd: 1.0,
        ..SynthConfig::default()
    };
    let ds = generate_panel(&s).unwrap().dataset;
    let cfg = PipelineConfig::default();
    let lagged = ds
        .lag_columns(&cfg.lag.iter().map(String::as_str).collect::<Vec<_>>())
        .unwrap();
    let x_cols: Vec<String> = ["lon", "lat", synth::PRICE_SHOCK].map(String::from).to_vec();
    let x = hte_core::forest::FeatureMatrix::new(lagged.n_rows(), 3, lagged.matrix(&x_cols).unwrap()).unwrap();
    let grid = [ForestParams {
        num_trees: 100,
        ..ForestParams::default()
    }];
    let orth = orthogonalize(
        &x,
        &x_cols,
        lagged.outcome(),
        lagged.treatment(),
        &lagged.cluster_codes(),
        &grid,
    )
    .unwrap();
    let d = &orth.diagnostics;
    assert!(d.outcome_residual_mean.abs() < 0.02 * d.outcome_sd, "{d:?}");
    assert!(d.treatment_residual_mean.abs() < 0.02 * d.treatment_sd, "{d:?}");
    assert_eq!(orth.y_resid.len(), lagged.n_rows());
    // Residuals are roughly uncorrelated with the confounders.
    assert!(d.correlations.iter().all(|c| c.treatment_residual.abs() < 0.1), "{d:?}");
}
