//! Plain-text summary of a results file.

use std::fmt::Write;

use hte_core::pipeline::ResultsFile;

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

pub fn render(r: &ResultsFile) -> String {
    let mut s = String::new();
    let d = &r.effect_distribution;
    if r.placebo {
        let _ = writeln!(s, "PLACEBO run (permutation seed {})", r.placebo_seed.unwrap_or_default());
    }
    let _ = writeln!(
        s,
        "Effect of one SD of {} on {}: ATE {} (SE {}); per-row effects from {} to {} per treatment SD",
        r.treatment,
        r.outcome,
        pct(r.ate_per_sd),
        pct(r.ate_std_err_per_sd),
        pct(d.min),
        pct(d.max),
    );
    let _ = writeln!(
        s,
        "{} rows, {} households, treatment SD {:.4}; median effect {}, 5-95% range {} to {}; {:.1}% of rows with a 95% interval excluding zero",
        r.n_rows,
        r.n_units,
        r.treatment_sd,
        pct(d.median),
        pct(d.q05),
        pct(d.q95),
        100.0 * d.share_ci_excludes_zero,
    );
    if r.orthogonalization.flagged {
        let _ = writeln!(s, "warning: nuisance residual means exceed tolerance");
    }
    for g in &r.gates {
        let _ = writeln!(s, "\nGroup average effects by {}", g.modifier);
        let _ = writeln!(s, "{:>4}  {:>12}  {:>12}  {:>6}  {:>10}", "bin", "lower", "upper", "n", "effect");
        for (i, b) in g.bins.iter().enumerate() {
            let mean = b.mean.map(pct).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "{:>4}  {:>12.4}  {:>12.4}  {:>6}  {:>10}", i + 1, b.lower, b.upper, b.n, mean);
        }
    }
    for h in &r.heatmaps {
        let _ = writeln!(s, "\nMean effect by {} (rows) and {} (columns) quartile", h.modifier_a, h.modifier_b);
        for row in &h.cells {
            let cells: Vec<String> = row
                .iter()
                .map(|c| format!("{:>10}", c.mean.map(pct).unwrap_or_else(|| "-".into())))
                .collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    }
    s
}
