//! Human-readable renderings of command results.

use mmlab_core::eval::{ConfusionMatrix, ProbeReport};
use mmlab_core::report::{Cell, Report, RunResult};
use mmlab_core::theory::{FeatureUniverse, TheoryReport};
use mmlab_core::train::{DecisionReport, ModelBundle};

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

pub fn generate(s: &serde_json::Value) {
    println!("wrote {}", s["path"].as_str().unwrap_or("?"));
    println!("  rows {}  classes {}", s["rows"], s["class_counts"]);
    println!("  train {}  test {}", s["n_train"], s["n_test"]);
    println!(
        "  acceptance rate {:.4} ({} accepted / {} attempts)",
        s["stats"]["acceptance_rate"].as_f64().unwrap_or(0.0),
        s["stats"]["accepted"],
        s["stats"]["attempts"]
    );
    println!("  sha256 {}", s["sha256"].as_str().unwrap_or("?"));
}

pub fn train(r: &RunResult, b: &ModelBundle) {
    println!(
        "{} on {} (data seed {}, train seed {})",
        b.strategy.name(),
        r.variant.name(),
        r.data_seed,
        r.train_seed
    );
    println!(
        "  train acc {}  test acc {}  iterations {}{}  {:.1}s",
        pct(r.metrics.train_acc),
        pct(r.metrics.test_acc),
        r.iterations,
        if b.log.stopped_early { " (early stop)" } else { "" },
        r.train_wall_time_secs
    );
    confusion(&r.confusion);
}

pub fn confusion(cm: &ConfusionMatrix) {
    print!("  actual\\pred");
    for c in 0..cm.k {
        print!("{c:>8}");
    }
    println!();
    for (r, row) in cm.percentages().iter().enumerate() {
        print!("  {r:>11}");
        match row {
            Some(row) => row.iter().for_each(|v| print!("{v:>7.1}%")),
            None => print!("  (no rows)"),
        }
        println!();
    }
}

pub fn probe(reports: &[ProbeReport], median: f64, min: f64, max: f64) {
    for r in reports {
        println!(
            "  seed {:>3}  probe train {}  test {}",
            r.seed,
            pct(r.probe_train_acc),
            pct(r.probe_test_acc)
        );
    }
    println!("probe test acc median {}  min {}  max {}", pct(median), pct(min), pct(max));
}

pub fn ume(s: &serde_json::Value, cm: &ConfusionMatrix) {
    println!("UME test acc {}", pct(s["test_acc"].as_f64().unwrap_or(0.0)));
    confusion(cm);
}

pub fn decide(r: &DecisionReport) {
    println!("{:<24}{:>8}", "MM Clf", pct(r.mm_clf_acc));
    println!("{:<24}{:>8}", "Avg Preds", pct(r.avg_pred_acc));
    println!(
        "{:<24}{:>8}{:>8}",
        "uni-modal test acc",
        pct(r.uni_test_acc[0]),
        pct(r.uni_test_acc[1])
    );
    println!(
        "{:<24}{:>8}{:>8}",
        "split classifier acc",
        pct(r.split_clf_acc[0]),
        pct(r.split_clf_acc[1])
    );
    println!("recommendation: {:?}", r.recommendation);
    if let Some(w) = &r.warning {
        println!("warning: {w}");
    }
}

pub fn theory(r: &TheoryReport, u: &FeatureUniverse) {
    println!(
        "{} features, {} modalities, c = {}, {} seeds, delta = {}",
        u.len(),
        u.n_modalities,
        u.c,
        r.runs.len(),
        r.delta
    );
    println!(
        "mean accuracy: ensemble {}  joint {}  boosted {}",
        pct(r.mean_ens_acc),
        pct(r.mean_joint_acc),
        pct(r.mean_boosted_acc)
    );
    println!("quantity laziness violated in {:.1}% of seeds", 100.0 * r.quantity_violation_rate);
    match r.inequality_rate {
        Some(x) => println!("ensemble-vs-joint bound holds in {:.1}% of defined seeds", 100.0 * x),
        None => println!("ensemble-vs-joint bound undefined for every seed"),
    }
    for s in r.runs.iter().take(5) {
        println!(
            "  seed {:>3}  b {:?}  k {:?}  k_pa {}  margin {}",
            s.seed,
            s.report.b_counts,
            s.report.k_counts,
            s.report.k_pa,
            s.report.margin.map_or("-".into(), |m| format!("{m:.3}"))
        );
    }
    if let Some(t) = &r.theorem2 {
        println!(
            "boost {}: S = {:?}, superset in {:.1}% of seeds, boosted - joint {:+.2} pts",
            t.p0,
            t.s,
            100.0 * t.superset_rate,
            100.0 * t.mean_boosted_minus_joint
        );
    }
    if let Some(l) = &r.lemma {
        match (l.ratio_estimate, l.ci_low, l.ci_high) {
            (Some(r), Some(lo), Some(hi)) if !l.inconclusive => {
                println!("P(sum=1)/P(sum=-1) = {r:.4} (99% CI {lo:.4}..{hi:.4}), c = {}", l.c)
            }
            _ => println!("P(sum=1)/P(sum=-1) inconclusive after {} trials", l.trials),
        }
    }
}

fn cell(c: &Cell) -> String {
    let flag = match c.pass {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "-",
    };
    match c.median {
        Some(m) => format!("{m:>6.1} ({:>5}) {flag:<4}", c.published),
        None => format!("{:>6} ({:>5}) {flag:<4}", "-", c.published),
    }
}

pub fn report(r: &Report) {
    println!("{} result file(s)", r.n_results);
    if !r.accuracy.is_empty() {
        println!("test accuracy, median (published) status");
        println!("{:<8}{:<22}{:<22}{:<22}", "dataset", "uni 1", "uni 2", "multi");
        for row in &r.accuracy {
            println!(
                "{:<8}{:<22}{:<22}{:<22}",
                row.variant.name(),
                cell(&row.uni1),
                cell(&row.uni2),
                cell(&row.multi)
            );
        }
    }
    for e in &r.confusion_checks {
        println!(
            "gamma confusion, uni-modal model {} ({} runs): {}",
            e.modality,
            e.n_runs,
            if e.check.pass { "ok" } else { "FAIL" }
        );
        for (row, published) in e.median_percentages.iter().zip(&e.published) {
            println!(
                "  {:>6.1}% {:>6.1}% {:>6.1}%    published {:>5.1}% {:>5.1}% {:>5.1}%",
                row[0], row[1], row[2], published[0], published[1], published[2]
            );
        }
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    match r.all_pass {
        Some(true) => println!("all targets met"),
        Some(false) => println!("some targets missed"),
        None => println!("nothing to check"),
    }
}
