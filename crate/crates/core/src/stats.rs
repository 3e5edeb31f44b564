//! Mean per-class accuracy, run aggregation, Student's t-test, pairwise
//! significance tables and learning-rate / L2 grid search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::model::TrainMode;

/// Significance threshold on two-tailed p-values.
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassAccuracy {
    pub mpca: f64,
    pub recalls: Vec<f64>,
}

/// Mean of per-class recalls. Every class in `0..num_classes` needs at least
/// one ground-truth instance.
pub fn mean_per_class_accuracy(
    preds: &[usize],
    truths: &[usize],
    num_classes: usize,
) -> Result<ClassAccuracy> {
    if preds.len() != truths.len() {
        return Err(Error::Shape {
            op: "mean_per_class_accuracy",
            left: vec![preds.len()],
            right: vec![truths.len()],
        });
    }
    let mut total = vec![0usize; num_classes];
    let mut correct = vec![0usize; num_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if t >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: t,
                classes: num_classes,
            });
        }
        total[t] += 1;
        correct[t] += (p == t) as usize;
    }
    if let Some(class) = total.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass { class });
    }
    let recalls: Vec<f64> = correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| c as f64 / n as f64)
        .collect();
    let mpca = recalls.iter().sum::<f64>() / num_classes as f64;
    Ok(ClassAccuracy { mpca, recalls })
}

/// Outcome of one seeded training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub recalls: Vec<f64>,
    pub mpca: f64,
    /// Hash of the configuration text that produced the run.
    pub fingerprint: u64,
}

/// 64-bit FNV-1a, used to fingerprint configurations.
pub fn fingerprint(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (`n − 1`), 0 for a single run.
    pub std: f64,
    pub values: Vec<f64>,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Empty("no runs to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Aggregate {
        mean,
        std,
        values: values.to_vec(),
    })
}

pub fn aggregate_runs(runs: &[RunSummary]) -> Result<Aggregate> {
    aggregate(&runs.iter().map(|r| r.mpca).collect::<Vec<_>>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    /// Degrees of freedom; integral for the pooled test.
    pub df: f64,
    pub p: f64,
    pub significant: bool,
    /// Both samples have zero variance but different means.
    pub degenerate: bool,
}

impl TTestResult {
    fn new(t: f64, df: f64, p: f64, degenerate: bool) -> Self {
        TTestResult {
            t,
            df,
            p,
            significant: p < ALPHA,
            degenerate,
        }
    }
}

/// Two-tailed p-value of a t statistic: `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Equal-variance two-sample t-test; `welch` switches to unequal variances
/// with Welch–Satterthwaite degrees of freedom.
pub fn ttest(a: &[f64], b: &[f64], welch: bool) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Empty(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (m1, v1) = mean_var(a);
    let (m2, v2) = mean_var(b);
    let (se2, df) = if welch {
        let (q1, q2) = (v1 / n1, v2 / n2);
        let se2 = q1 + q2;
        let df = if se2 == 0.0 {
            n1 + n2 - 2.0
        } else {
            se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0))
        };
        (se2, df)
    } else {
        let df = n1 + n2 - 2.0;
        let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
        (pooled * (1.0 / n1 + 1.0 / n2), df)
    };
    if se2 == 0.0 {
        return Ok(if m1 == m2 {
            TTestResult::new(0.0, df, 1.0, false)
        } else {
            let t = if m1 > m2 { f64::INFINITY } else { f64::NEG_INFINITY };
            TTestResult::new(t, df, 0.0, true)
        });
    }
    let t = (m1 - m2) / se2.sqrt();
    Ok(TTestResult::new(t, df, t_two_tailed_p(t, df), false))
}

/// Pooled-variance Student's t-test.
pub fn students_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    ttest(a, b, false)
}

/// Pairwise p-values per round; rows are strategy pairs, columns rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceTable {
    pub pairs: Vec<(String, String)>,
    pub rounds: usize,
    /// `results[pair][round]`.
    pub results: Vec<Vec<TTestResult>>,
}

/// Per-strategy accuracy arrays: `strategy → round → values over runs`.
pub type RoundAccuracies = BTreeMap<String, Vec<Vec<f64>>>;

/// Runs a t-test for every unordered pair of strategies (in the order
/// given) on every round.
pub fn significance_matrix(
    strategies: &[String],
    data: &RoundAccuracies,
    welch: bool,
) -> Result<SignificanceTable> {
    let rounds = strategies
        .iter()
        .map(|s| data.get(s).map(Vec::len).ok_or_else(|| Error::MissingCell(format!("strategy {s}"))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let cell = |s: &String, r: usize| -> Result<&[f64]> {
        match data[s].get(r) {
            Some(v) if v.len() >= 2 => Ok(v),
            Some(v) => Err(Error::MissingCell(format!(
                "strategy {s}, round {r}: {} runs, at least 2 needed",
                v.len()
            ))),
            None => Err(Error::MissingCell(format!("strategy {s}, round {r}"))),
        }
    };
    let mut pairs = Vec::new();
    let mut results = Vec::new();
    for (i, a) in strategies.iter().enumerate() {
        for b in &strategies[i + 1..] {
            let row = (0..rounds)
                .map(|r| ttest(cell(a, r)?, cell(b, r)?, welch))
                .collect::<Result<Vec<_>>>()?;
            pairs.push((a.clone(), b.clone()));
            results.push(row);
        }
    }
    Ok(SignificanceTable {
        pairs,
        rounds,
        results,
    })
}

impl SignificanceTable {
    /// CSV with header `pair,round_0,...` and p-values to 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair");
        for r in 0..self.rounds {
            let _ = write!(out, ",round_{r}");
        }
        out.push('\n');
        for ((a, b), row) in self.pairs.iter().zip(&self.results) {
            let _ = write!(out, "{a} - {b}");
            for t in row {
                let _ = write!(out, ",{:.4}", t.p);
            }
            out.push('\n');
        }
        out
    }
}

/// Learning rates and L2 strengths to search, scored on validation mpca.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lrs: Vec<f64>,
    pub l2s: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lrs: vec![1e-3, 1e-4],
            l2s: vec![0.001, 0.01, 0.05, 0.1, 0.15],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lrs.is_empty() || self.l2s.is_empty() {
            return Err(Error::config("grid needs at least one lr and one l2"));
        }
        if self.lrs.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("grid lrs must be positive"));
        }
        if self.l2s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::config("grid l2s must be >= 0"));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.lrs
            .iter()
            .flat_map(|&lr| self.l2s.iter().map(move |&l2| (lr, l2)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub lr: f64,
    pub l2: f64,
    /// Validation score, or the failure message.
    pub score: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
}

/// Index of the best scored cell: highest score, then smaller l2, then
/// smaller lr.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in cells.iter().enumerate() {
        let Ok(s) = c.score else { continue };
        let better = match best {
            None => true,
            Some((j, bs)) => {
                let b = &cells[j];
                s > bs || (s == bs && (c.l2 < b.l2 || (c.l2 == b.l2 && c.lr < b.lr)))
            }
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every cell with `score_fn(lr, l2)` (cells run in parallel) and
/// picks the best. A failing cell is recorded and skipped.
pub fn grid_search<F>(grid: &GridSpec, score_fn: F) -> Result<GridResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    grid.validate()?;
    let cells: Vec<GridCell> = grid
        .cells()
        .into_par_iter()
        .map(|(lr, l2)| GridCell {
            lr,
            l2,
            score: score_fn(lr, l2).map_err(|e| e.to_string()),
        })
        .collect();
    match select_best(&cells) {
        Some(i) => Ok(GridResult {
            best: cells[i].clone(),
            cells,
        }),
        None => Err(Error::AllCellsFailed(
            cells
                .last()
                .and_then(|c| c.score.clone().err())
                .unwrap_or_default(),
        )),
    }
}

/// The two image-classification setups with published grid-search results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Setup {
    Butterfly,
    Plant,
}

impl Setup {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "butterfly" => Some(Setup::Butterfly),
            "plant" => Some(Setup::Plant),
            _ => None,
        }
    }
}

/// Tuned `(lr, l2)` for a setup and mode.
pub fn preset(setup: Setup, mode: TrainMode) -> (f64, f64) {
    use TrainMode::*;
    match (setup, mode) {
        (Setup::Butterfly, SourceOnly) => (0.001, 0.01),
        (Setup::Butterfly, Uada | UadaSemi) => (0.0001, 0.05),
        (Setup::Butterfly, TargetOnly) => (0.001, 0.01),
        (Setup::Plant, SourceOnly) => (0.001, 0.001),
        (Setup::Plant, Uada | UadaSemi) => (0.0001, 0.1),
        (Setup::Plant, TargetOnly) => (0.0001, 0.15),
    }
}

#[cfg(test)]
mod tests;
