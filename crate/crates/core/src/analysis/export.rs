//! Flat CSV mirrors of the sweep, evaluation and trade-off JSON.

use super::{EvaluationReport, SweepResult, TradeoffCurves};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "alpha",
        "beta",
        "status",
        "solve_status",
        "objective",
        "active_risk",
        "worst_gamma",
        "gap",
        "wall_time",
    ])
    .expect("in-memory write");
    for c in result.cells.iter().flatten() {
        w.write_record([
            c.alpha.to_string(),
            c.beta.to_string(),
            c.status.as_str().to_string(),
            c.solve_status.as_str().to_string(),
            opt(c.objective),
            opt(c.active_risk),
            opt(c.worst_gamma),
            opt(c.gap),
            c.wall_time.to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn evaluation_csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["contingency", "gamma", "binding", "status"]).expect("in-memory write");
    for (id, c) in &report.contingencies {
        w.write_record([
            id.to_string(),
            c.gamma.to_string(),
            c.binding.to_string(),
            c.status.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn tradeoff_csv(curves: &TradeoffCurves) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "series",
        "alpha",
        "status",
        "objective",
        "active_risk",
        "load_served_fraction",
        "worst_gamma",
    ])
    .expect("in-memory write");
    for (series, points) in [("ops", &curves.ops), ("scops", &curves.scops)] {
        for p in points {
            w.write_record([
                series.to_string(),
                p.alpha.to_string(),
                p.status.as_str().to_string(),
                opt(p.objective),
                opt(p.active_risk),
                opt(p.load_served_fraction),
                opt(p.worst_gamma),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}
