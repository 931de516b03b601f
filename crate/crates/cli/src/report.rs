//! CSV and JSON report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use quadscore::criteria::Criterion;
use quadscore::metrics::{adjusted_rand_index, negative_vic};
use quadscore::resampling::{MethodRow, SelectionReport};
use quadscore::{CovarianceModel, Partition};
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn gamma_text(g: f64) -> String {
    quadscore::backends::spec::format_gamma(g)
}

/// Agreement of one method's full-sample partition with reference labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    pub ari: f64,
    pub neg_vic: f64,
}

pub fn agreement(partition: Option<&Partition>, truth: Option<&Partition>) -> Option<Agreement> {
    let (z, t) = (partition?, truth?);
    Some(Agreement {
        ari: adjusted_rand_index(z, t).ok()?,
        neg_vic: negative_vic(z, t).ok()?,
    })
}

/// Criteria that selected each row.
fn selected_by(report: &SelectionReport) -> BTreeMap<usize, Vec<Criterion>> {
    let mut out: BTreeMap<usize, Vec<Criterion>> = BTreeMap::new();
    for (&c, &i) in &report.selected {
        out.entry(i).or_default().push(c);
    }
    out
}

/// One line per method: identity, criterion values, agreement with the
/// reference labels and the criteria that selected it.
pub fn method_table(report: &SelectionReport, truth: Option<&Partition>) -> String {
    let criteria = &report.options.criteria;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "method_id",
        "backend",
        "k",
        "covariance_model",
        "gamma",
        "n_params",
    ]
    .map(String::from)
    .to_vec();
    header.extend(criteria.iter().map(|c| c.name().to_string()));
    header.extend(["ari", "neg_vic", "selected_by", "fit_error"].map(String::from));
    w.write_record(&header).expect("in-memory write");
    let chosen = selected_by(report);
    for (i, row) in report.rows.iter().enumerate() {
        let agree = agreement(row.partition.as_ref(), truth);
        let mut rec = vec![
            row.method_id.clone(),
            format!("{:?}", row.backend),
            row.k.to_string(),
            row.covariance_model
                .map(|m: CovarianceModel| m.to_string())
                .unwrap_or_default(),
            gamma_text(row.gamma),
            row.n_params.map(|v| v.to_string()).unwrap_or_default(),
        ];
        rec.extend(criteria.iter().map(|c| num(row.values.get(c).copied())));
        rec.push(num(agree.map(|a| a.ari)));
        rec.push(num(agree.map(|a| a.neg_vic)));
        rec.push(
            chosen
                .get(&i)
                .map(|cs| cs.iter().map(|c| c.name()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
        );
        rec.push(row.fit_error.clone().unwrap_or_default());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

const CURVE_HEADER: [&str; 12] = [
    "method_id",
    "backend",
    "covariance_model",
    "gamma",
    "k",
    "n_params",
    "mode",
    "in_sample",
    "w_tilde",
    "lower",
    "upper",
    "cv_adjusted",
];

fn curve_records(row: &MethodRow) -> Vec<Vec<String>> {
    let modes = [
        ("hard", Criterion::QH, &row.bootstrap_hard, &row.cv_hard),
        (
            "smooth",
            Criterion::QS,
            &row.bootstrap_smooth,
            &row.cv_smooth,
        ),
    ];
    modes
        .iter()
        .map(|(mode, c, boot, cv)| {
            vec![
                row.method_id.clone(),
                format!("{:?}", row.backend),
                row.covariance_model
                    .map(|m| m.to_string())
                    .unwrap_or_default(),
                gamma_text(row.gamma),
                row.k.to_string(),
                row.n_params.map(|v| v.to_string()).unwrap_or_default(),
                mode.to_string(),
                num(row.values.get(c).copied()),
                num(boot.as_ref().map(|b| b.w_tilde)),
                num(boot.as_ref().map(|b| b.lower)),
                num(boot.as_ref().map(|b| b.upper)),
                num(cv.as_ref().map(|s| s.adjusted)),
            ]
        })
        .collect()
}

fn write_records(path: &Path, records: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_HEADER).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    fs::write(path, bytes).map_err(CliError::output(path))
}

/// Writes `curves/<method_id>.csv` for every method plus `curves/all.csv`
/// with methods ordered by backend, covariance model, bound and K.
pub fn write_curves(dir: &Path, report: &SelectionReport) -> CliResult<()> {
    let curves = dir.join("curves");
    fs::create_dir_all(&curves).map_err(CliError::output(&curves))?;
    for row in &report.rows {
        write_records(
            &curves.join(format!("{}.csv", row.method_id)),
            curve_records(row),
        )?;
    }
    let mut order: Vec<&MethodRow> = report.rows.iter().collect();
    order.sort_by(|a, b| {
        (a.backend as u8, a.covariance_model.map(|m| m as u8))
            .cmp(&(b.backend as u8, b.covariance_model.map(|m| m as u8)))
            .then(a.gamma.total_cmp(&b.gamma))
            .then(a.k.cmp(&b.k))
    });
    write_records(
        &curves.join("all.csv"),
        order.into_iter().flat_map(curve_records),
    )
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::output(dir))?;
    }
    fs::write(path, text).map_err(CliError::output(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report is serializable");
    write_text(path, &(text + "\n"))
}
