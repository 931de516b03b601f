//! Subcommand implementations. Each returns its in-memory result and, when
//! an output directory is configured, writes the report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use quadscore::criteria::Criterion;
use quadscore::data::{load_csv, standardize};
use quadscore::dgp::{
    grid, population_score_curve, sample, DgpSpec, PopulationScoreResult, SeparationDesign,
};
use quadscore::metrics::{adjusted_rand_index, negative_vic};
use quadscore::resampling::{evaluate_menu, SelectionReport};
use quadscore::{DataMatrix, Partition, SeededRng};
use serde::Serialize;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::report::{agreement, method_table, write_curves, write_json, write_text, Agreement};

/// Stream tags separating simulated data from the evaluation of each
/// Monte Carlo replicate.
const SIM_DATA: u64 = 0x5d47;
const SIM_EVAL: u64 = 0x5e7a;

fn load(cfg: &ExperimentConfig) -> CliResult<DataMatrix> {
    let DataSource::Csv { path, label_column } = &cfg.data else {
        return Err(CliError::Config("select needs a csv data source".into()));
    };
    let data = load_csv(path, label_column.as_deref()).map_err(CliError::from_load)?;
    if cfg.standardize {
        return Ok(standardize(&data).map_err(CliError::from_load)?.data);
    }
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectOutput {
    pub config: ExperimentConfig,
    pub report: SelectionReport,
    /// Agreement of each method with the label column, when present.
    pub agreement: Vec<Option<Agreement>>,
}

impl SelectOutput {
    pub fn selected_agreement(&self, c: Criterion) -> Option<Agreement> {
        self.report
            .selected
            .get(&c)
            .and_then(|&i| self.agreement[i])
    }
}

fn evaluate(
    cfg: &ExperimentConfig,
    data: &DataMatrix,
    rng: &SeededRng,
) -> CliResult<(SelectionReport, Vec<Option<Agreement>>)> {
    let report = evaluate_menu(data, &cfg.methods()?, &cfg.options(), rng)?;
    let truth = data.label_partition();
    let agree = report
        .rows
        .iter()
        .map(|r| agreement(r.partition.as_ref(), truth.as_ref()))
        .collect();
    Ok((report, agree))
}

/// Fits and evaluates every menu method on a CSV data set.
pub fn select(cfg: &ExperimentConfig) -> CliResult<SelectOutput> {
    let seed = cfg.require_seed()?;
    let data = load(cfg)?;
    log::info!(
        "loaded {} x {} data; {} methods",
        data.n(),
        data.p(),
        cfg.methods()?.len()
    );
    let (report, agreement) = evaluate(cfg, &data, &SeededRng::new(seed, 0))?;
    for (c, &i) in &report.selected {
        log::info!("{c}: {}", report.rows[i].method_id);
    }
    let out = SelectOutput {
        config: cfg.clone(),
        report,
        agreement,
    };
    if let Some(dir) = &cfg.output_dir {
        write_text(
            &dir.join("report.csv"),
            &method_table(&out.report, data.label_partition().as_ref()),
        )?;
        write_json(&dir.join("report.json"), &out)?;
        write_curves(dir, &out.report)?;
    }
    Ok(out)
}

/// Selection outcome of one criterion on one simulated data set.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateChoice {
    pub replicate: usize,
    pub method_id: String,
    pub k: usize,
    pub ari: Option<f64>,
    pub neg_vic: Option<f64>,
}

/// Monte Carlo summary for one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    pub modal_k: Option<usize>,
    pub modal_frequency: f64,
    pub k_counts: BTreeMap<usize, usize>,
    pub mean_ari: Option<f64>,
    pub sd_ari: Option<f64>,
    pub mean_neg_vic: Option<f64>,
    pub sd_neg_vic: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub config: ExperimentConfig,
    pub summaries: Vec<CriterionSummary>,
    pub choices: BTreeMap<Criterion, Vec<ReplicateChoice>>,
}

impl SimulateOutput {
    pub fn summary(&self, c: Criterion) -> Option<&CriterionSummary> {
        self.summaries.iter().find(|s| s.criterion == c)
    }
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd =
        (v.len() > 1).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

fn summarize(c: Criterion, choices: &[ReplicateChoice], reps: usize) -> CriterionSummary {
    let mut k_counts = BTreeMap::new();
    for ch in choices {
        *k_counts.entry(ch.k).or_insert(0) += 1;
    }
    // the smallest K wins a tie for the mode
    let modal = k_counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&k, &n)| (k, n));
    let ari: Vec<f64> = choices.iter().filter_map(|c| c.ari).collect();
    let vic: Vec<f64> = choices.iter().filter_map(|c| c.neg_vic).collect();
    let (mean_ari, sd_ari) = mean_sd(&ari);
    let (mean_neg_vic, sd_neg_vic) = mean_sd(&vic);
    CriterionSummary {
        criterion: c,
        modal_k: modal.map(|m| m.0),
        modal_frequency: modal.map_or(0.0, |m| m.1 as f64 / reps as f64),
        k_counts,
        mean_ari,
        sd_ari,
        mean_neg_vic,
        sd_neg_vic,
        replicates: reps,
    }
}

fn summary_table(summaries: &[CriterionSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "criterion",
        "modal_k",
        "modal_frequency",
        "mean_ari",
        "sd_ari",
        "mean_neg_vic",
        "sd_neg_vic",
        "replicates",
    ])
    .expect("in-memory write");
    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for s in summaries {
        w.write_record([
            s.criterion.name().to_string(),
            s.modal_k.map(|k| k.to_string()).unwrap_or_default(),
            s.modal_frequency.to_string(),
            num(s.mean_ari),
            num(s.sd_ari),
            num(s.mean_neg_vic),
            num(s.sd_neg_vic),
            s.replicates.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Repeats sample-then-select on independent draws from a simulated design.
pub fn simulate(cfg: &ExperimentConfig) -> CliResult<SimulateOutput> {
    let seed = cfg.require_seed()?;
    let DataSource::Simulate {
        design,
        n,
        monte_carlo_reps,
    } = cfg.data.clone()
    else {
        return Err(CliError::Config(
            "simulate needs a simulate data source".into(),
        ));
    };
    let spec = DgpSpec::new(design, n);
    let root = SeededRng::new(seed, 0);
    let criteria = &cfg.criteria;
    let mut choices: BTreeMap<Criterion, Vec<ReplicateChoice>> =
        criteria.iter().map(|&c| (c, Vec::new())).collect();
    for rep in 0..monte_carlo_reps {
        let data = sample(&spec, &root.derive(&[SIM_DATA, rep as u64]))?;
        let (report, agree) = evaluate(cfg, &data, &root.derive(&[SIM_EVAL, rep as u64]))?;
        for (&c, &i) in &report.selected {
            let row = &report.rows[i];
            choices
                .get_mut(&c)
                .expect("requested criterion")
                .push(ReplicateChoice {
                    replicate: rep,
                    method_id: row.method_id.clone(),
                    k: row.k,
                    ari: agree[i].map(|a| a.ari),
                    neg_vic: agree[i].map(|a| a.neg_vic),
                });
        }
        log::info!("replicate {} of {monte_carlo_reps} done", rep + 1);
        if let Some(dir) = &cfg.output_dir {
            let path = dir.join("mc").join(format!("replicate_{rep}.csv"));
            write_text(
                &path,
                &method_table(&report, data.label_partition().as_ref()),
            )?;
        }
    }
    let summaries = criteria
        .iter()
        .map(|&c| summarize(c, &choices[&c], monte_carlo_reps))
        .collect();
    let out = SimulateOutput {
        config: cfg.clone(),
        summaries,
        choices,
    };
    if let Some(dir) = &cfg.output_dir {
        write_text(&dir.join("report.csv"), &summary_table(&out.summaries))?;
        write_json(&dir.join("report.json"), &out)?;
    }
    Ok(out)
}

/// Settings of the population score experiment.
#[derive(Debug, Clone)]
pub struct CurveArgs {
    pub design: SeparationDesign,
    pub d_min: f64,
    pub d_max: f64,
    pub step: f64,
    pub draws: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn population_curve(args: &CurveArgs) -> CliResult<PopulationScoreResult> {
    let d_grid =
        grid(args.d_min, args.d_max, args.step).map_err(|e| CliError::Config(e.to_string()))?;
    let result = population_score_curve(
        args.design,
        &d_grid,
        args.draws,
        args.repeats,
        &SeededRng::new(args.seed, 0),
    )
    .map_err(|e| match e {
        quadscore::Error::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Compute(other),
    })?;
    if let Some(dir) = &args.out {
        let name = match args.design {
            SeparationDesign::Gaussian => "population_dgpG.csv",
            SeparationDesign::Uniform => "population_dgpU.csv",
        };
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        write_text(&dir.join(name), &String::from_utf8(buf).expect("utf-8 csv"))?;
    }
    Ok(result)
}

/// Reads one label per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::NotFound(path.to_path_buf()),
        _ => CliError::Data(format!("{}: {e}", path.display())),
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn to_partition(labels: &[String]) -> Partition {
    let mut ids = BTreeMap::new();
    let raw: Vec<usize> = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.as_str()).or_insert(next)
        })
        .collect();
    Partition::from_ids(&raw)
}

/// ARI and negated VI between two label files.
pub fn metrics(a: &Path, b: &Path) -> CliResult<Agreement> {
    let (la, lb) = (read_labels(a)?, read_labels(b)?);
    if la.len() != lb.len() {
        return Err(CliError::Data(format!(
            "label files differ in length: {} vs {}",
            la.len(),
            lb.len()
        )));
    }
    if la.is_empty() {
        return Err(CliError::Data("label files are empty".into()));
    }
    let (pa, pb) = (to_partition(&la), to_partition(&lb));
    Ok(Agreement {
        ari: adjusted_rand_index(&pa, &pb)?,
        neg_vic: negative_vic(&pa, &pb)?,
    })
}
