//! Figure-ready data and the metric table.
//!
//! `emit_figure_data` turns a record set into diff-friendly CSV plus
//! self-contained SVG: one scatter per agent against the budget line, box
//! plots of the per-period consumption distributions, and saving-rate
//! curves with the population aggregate and both theoretical reference
//! paths. Re-running over the same store reproduces the same bytes.

pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{ParseStatus, TrialRecord};
use crate::experiment::{
    aggregate_population, EvaluationRecord, ExperimentError, SweepContext,
};
use svg::{BoxChart, BoxStats, LineChart, LineSeries, ScatterChart};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no records to report on")]
    EmptyRecordSet,
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// The three figure families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    ScatterBudget,
    DistributionBox,
    SavingRateCurves,
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn slug(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

/// Emit one figure family from a record set into `out_dir`; returns the
/// paths written.
pub fn emit_figure_data(
    records: &[TrialRecord],
    kind: FigureKind,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyRecordSet);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    match kind {
        FigureKind::ScatterBudget => emit_scatter(records, out_dir),
        FigureKind::DistributionBox => emit_boxes(records, out_dir),
        FigureKind::SavingRateCurves => emit_curves(records, out_dir),
    }
}

/// Untaxed scatter records grouped (model, scenario); tax sweeps scatter at
/// each rate would be unreadable, so the scatter family covers the two
/// non-tax scenarios plus tau = 0 of a sweep.
fn scatter_cells(records: &[TrialRecord]) -> BTreeMap<(String, &'static str), Vec<&TrialRecord>> {
    let mut cells: BTreeMap<(String, &'static str), Vec<&TrialRecord>> = BTreeMap::new();
    for record in records {
        if record.tax_rate.is_some() && record.tax_rate != Some(0.0) {
            continue;
        }
        cells
            .entry((
                record.agent.model_id.clone(),
                record.scenario.kind().as_str(),
            ))
            .or_default()
            .push(record);
    }
    cells
}

fn emit_scatter(records: &[TrialRecord], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for ((model_id, scenario_name), cell) in scatter_cells(records) {
        let first = cell[0];
        let env = first.scenario.environment().map_err(ExperimentError::from)?;
        let wealth = env.lifetime_wealth();
        let gross = 1.0 + env.effective_rate();
        let optimum = (first.evaluation.optimum_c1, first.evaluation.optimum_c2);

        let points: Vec<(f64, f64)> = cell
            .iter()
            .filter(|r| r.parse_status == ParseStatus::Ok)
            .filter_map(|r| r.parsed_plan.as_ref().and_then(|p| p.pair()))
            .collect();

        let mut csv = String::from("kind,label,c1,c2\n");
        let _ = writeln!(csv, "budget_endpoint,intercept_c1,{wealth},0");
        let _ = writeln!(csv, "budget_endpoint,intercept_c2,0,{}", wealth * gross);
        let _ = writeln!(csv, "optimum,analytical,{},{}", optimum.0, optimum.1);
        for (index, (c1, c2)) in points.iter().enumerate() {
            let _ = writeln!(csv, "trial,{},{c1},{c2}", index + 1);
        }

        let chart = ScatterChart {
            title: format!("{model_id} consumption choices ({scenario_name})"),
            x_label: "working-period consumption c1".into(),
            y_label: "retirement-period consumption c2".into(),
            points,
            budget_line: ((wealth, 0.0), (0.0, wealth * gross)),
            optimum,
        };

        let base = format!("scatter_{}_{}", slug(scenario_name), slug(&model_id));
        let csv_path = out_dir.join(format!("{base}.csv"));
        write_file(&csv_path, &csv)?;
        let svg_path = out_dir.join(format!("{base}.svg"));
        write_file(&svg_path, &chart.render())?;
        written.push(csv_path);
        written.push(svg_path);
    }
    if written.is_empty() {
        return Err(ReportError::EmptyRecordSet);
    }
    Ok(written)
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let at = |fraction: f64| -> f64 {
        if sorted.len() == 1 {
            return sorted[0];
        }
        let position = fraction * (sorted.len() - 1) as f64;
        let low = position.floor() as usize;
        let high = position.ceil() as usize;
        let weight = position - low as f64;
        sorted[low] * (1.0 - weight) + sorted[high] * weight
    };
    (at(0.25), at(0.5), at(0.75))
}

/// Box statistics with 1.5 IQR whiskers; points beyond are outliers.
fn box_stats(label: &str, samples: &[f64]) -> Option<BoxStats> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let (q1, median, q3) = quartiles(&sorted);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let lo_whisker = sorted
        .iter()
        .copied()
        .find(|v| *v >= lo_fence)
        .unwrap_or(sorted[0]);
    let hi_whisker = sorted
        .iter()
        .rev()
        .copied()
        .find(|v| *v <= hi_fence)
        .unwrap_or(sorted[sorted.len() - 1]);
    let outliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    Some(BoxStats {
        label: label.to_string(),
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        lo_whisker,
        hi_whisker,
        outliers,
    })
}

fn emit_boxes(records: &[TrialRecord], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let cells = scatter_cells(records);
    if cells.is_empty() {
        return Err(ReportError::EmptyRecordSet);
    }
    let scenario_name = cells.keys().next().expect("non-empty").1;

    let mut csv = String::from(
        "model_id,period,n,min,q1,median,q3,max,lo_whisker,hi_whisker,outliers\n",
    );
    let mut c1_boxes = Vec::new();
    let mut c2_boxes = Vec::new();
    for ((model_id, _), cell) in &cells {
        let pairs: Vec<(f64, f64)> = cell
            .iter()
            .filter(|r| r.parse_status == ParseStatus::Ok)
            .filter_map(|r| r.parsed_plan.as_ref().and_then(|p| p.pair()))
            .collect();
        let c1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let c2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for (period, samples, sink) in
            [("c1", &c1, &mut c1_boxes), ("c2", &c2, &mut c2_boxes)]
        {
            if let Some(stats) = box_stats(model_id, samples) {
                let outliers = stats
                    .outliers
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(";");
                let _ = writeln!(
                    csv,
                    "{model_id},{period},{},{},{},{},{},{},{},{},{outliers}",
                    samples.len(),
                    stats.min,
                    stats.q1,
                    stats.median,
                    stats.q3,
                    stats.max,
                    stats.lo_whisker,
                    stats.hi_whisker,
                );
                sink.push(stats);
            }
        }
    }

    let mut written = Vec::new();
    let csv_path = out_dir.join(format!("distribution_box_{}.csv", slug(scenario_name)));
    write_file(&csv_path, &csv)?;
    written.push(csv_path);
    for (period, boxes) in [("c1", c1_boxes), ("c2", c2_boxes)] {
        let chart = BoxChart {
            title: format!("Distribution of {period} across models ({scenario_name})"),
            y_label: format!("{period} (units)"),
            boxes,
        };
        let svg_path = out_dir.join(format!(
            "distribution_box_{}_{period}.svg",
            slug(scenario_name)
        ));
        write_file(&svg_path, &chart.render())?;
        written.push(svg_path);
    }
    Ok(written)
}

fn emit_curves(records: &[TrialRecord], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let context = SweepContext::from_records(records)?;
    let sweep = aggregate_population(records, &context)?;

    let mut csv = String::from("series,definition,tax_rate,value\n");
    for (model_id, curve) in &sweep.per_group {
        for point in curve {
            let _ = writeln!(
                csv,
                "{model_id},wealth_inclusive,{},{}",
                point.tax_rate, point.mean.wealth_inclusive
            );
            let _ = writeln!(
                csv,
                "{model_id},income_only,{},{}",
                point.tax_rate, point.mean.income_only
            );
        }
    }
    for point in &sweep.aggregate {
        let _ = writeln!(
            csv,
            "aggregate,wealth_inclusive,{},{}",
            point.tax_rate, point.rate.wealth_inclusive
        );
        let _ = writeln!(
            csv,
            "aggregate,income_only,{},{}",
            point.tax_rate, point.rate.income_only
        );
    }
    for (label, path) in [
        ("reference_sigma_2", &sweep.reference_sigma_2),
        ("reference_sigma_05", &sweep.reference_sigma_05),
    ] {
        for point in path {
            let _ = writeln!(
                csv,
                "{label},wealth_inclusive,{},{}",
                point.tax_rate, point.rates.wealth_inclusive
            );
            let _ = writeln!(
                csv,
                "{label},income_only,{},{}",
                point.tax_rate, point.rates.income_only
            );
        }
    }

    let mut written = Vec::new();
    let csv_path = out_dir.join("saving_rate_curves.csv");
    write_file(&csv_path, &csv)?;
    written.push(csv_path);

    for (definition, pick_group, pick_ref) in [
        (
            "wealth_inclusive",
            (|p: &crate::experiment::GroupCurvePoint| p.mean.wealth_inclusive)
                as fn(&crate::experiment::GroupCurvePoint) -> f64,
            (|p: &crate::experiment::ReferencePoint| p.rates.wealth_inclusive)
                as fn(&crate::experiment::ReferencePoint) -> f64,
        ),
        (
            "income_only",
            |p| p.mean.income_only,
            |p| p.rates.income_only,
        ),
    ] {
        let mut series = Vec::new();
        for (model_id, curve) in &sweep.per_group {
            series.push(LineSeries {
                label: model_id.clone(),
                points: curve.iter().map(|p| (p.tax_rate, pick_group(p))).collect(),
                dashed: false,
            });
        }
        series.push(LineSeries {
            label: "aggregate".into(),
            points: sweep
                .aggregate
                .iter()
                .map(|p| {
                    (
                        p.tax_rate,
                        if definition == "wealth_inclusive" {
                            p.rate.wealth_inclusive
                        } else {
                            p.rate.income_only
                        },
                    )
                })
                .collect(),
            dashed: false,
        });
        for (label, path) in [
            ("reference sigma=2", &sweep.reference_sigma_2),
            ("reference sigma=0.5", &sweep.reference_sigma_05),
        ] {
            series.push(LineSeries {
                label: label.into(),
                points: path.iter().map(|p| (p.tax_rate, pick_ref(p))).collect(),
                dashed: true,
            });
        }
        let chart = LineChart {
            title: format!("Saving rate vs interest tax ({definition})"),
            x_label: "tax rate on interest earnings".into(),
            y_label: format!("saving rate ({definition})"),
            series,
        };
        let svg_path = out_dir.join(format!("saving_rate_curves_{definition}.svg"));
        write_file(&svg_path, &chart.render())?;
        written.push(svg_path);
    }
    Ok(written)
}

/// Fixed-width metric table with the four published columns.
pub fn metric_table(evaluations: &[EvaluationRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>10} {:>9} {:>13} {:>12} {:>8} {:>8}",
        "Model", "Accuracy", "MAPD", "VarAPD", "Budget MAPD", "valid", "total"
    );
    let _ = writeln!(
        out,
        "{:<22} {:>10} {:>9} {:>13} {:>12} {:>8} {:>8}",
        "", "(5% tol,%)", "(%)", "(x10^4)", "(%)", "", ""
    );
    let _ = writeln!(out, "{}", "-".repeat(88));
    for record in evaluations {
        let tax_suffix = match record.tax_rate {
            Some(tax) => format!(" @tax {:.0}%", tax * 100.0),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<22} {:>10.2} {:>9.2} {:>13.2} {:>12.2} {:>8} {:>8}",
            format!("{}{}", record.model_id, tax_suffix),
            record.evaluation.accuracy_5pct * 100.0,
            record.evaluation.mapd * 100.0,
            record.evaluation.var_apd,
            record.evaluation.budget_mapd * 100.0,
            record.evaluation.n_valid,
            record.evaluation.n_total,
        );
    }
    out
}

/// CSV twin of the metric table, including both variance renderings.
pub fn metric_table_csv(evaluations: &[EvaluationRecord]) -> String {
    let mut out = String::from(
        "model_id,scenario,tax_rate,accuracy_5pct,mapd,var_apd_x1e4,var_apd_pct_x1e4,budget_mapd,n_valid,n_total,parse_failures,invoke_failures\n",
    );
    for record in evaluations {
        let tax = record
            .tax_rate
            .map(|t| t.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{tax},{},{},{},{},{},{},{},{},{}",
            record.model_id,
            record.scenario.as_str(),
            record.evaluation.accuracy_5pct,
            record.evaluation.mapd,
            record.evaluation.var_apd,
            record.evaluation.var_apd_pct_x1e4,
            record.evaluation.budget_mapd,
            record.evaluation.n_valid,
            record.evaluation.n_total,
            record.parse_failures,
            record.invoke_failures,
        );
    }
    out
}

/// Write the full report for a record set: every applicable figure family
/// plus the metric table.
pub fn write_report(
    records: &[TrialRecord],
    evaluations: &[EvaluationRecord],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    written.extend(emit_figure_data(records, FigureKind::ScatterBudget, out_dir)?);
    written.extend(emit_figure_data(records, FigureKind::DistributionBox, out_dir)?);
    let has_sweep = records.iter().any(|r| r.tax_rate.is_some());
    if has_sweep {
        written.extend(emit_figure_data(
            records,
            FigureKind::SavingRateCurves,
            out_dir,
        )?);
    }
    let table_path = out_dir.join("metrics_table.txt");
    write_file(&table_path, &metric_table(evaluations))?;
    written.push(table_path);
    let csv_path = out_dir.join("metrics_table.csv");
    write_file(&csv_path, &metric_table_csv(evaluations))?;
    written.push(csv_path);
    Ok(written)
}
