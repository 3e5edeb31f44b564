//! The four experiment commands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use shiftlab::active::{run_rounds, StrategyKind};
use shiftlab::stats::{aggregate, significance_matrix, RoundAccuracies};
use shiftlab::{
    build_model, gen_shifted_gaussians, grid_search, load_image_folder, model::train_with, DatasetSplit, Domain, Pool,
    TrainConfig, TrainMode,
};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::results::{read_results_csv, write_atomic, write_results_csv, ResultsRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Train,
    Al,
    Grid,
    Significance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Al => "al",
            Command::Grid => "grid",
            Command::Significance => "significance",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    let d = &cfg.data;
    Ok(match d.source {
        DataSource::Synthetic => gen_shifted_gaussians(&d.shift_spec())?,
        DataSource::Folder => {
            let path = d.path.as_deref().expect("validated: folder source has a path");
            load_image_folder(path, &d.folder_options())?
        }
    })
}

/// Runs `f` over `jobs` on `workers` threads, keeping input order.
fn fan_out<J, T, F>(workers: usize, jobs: &[J], f: F) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config {
            key: "workers".into(),
            msg: e.to_string(),
        })?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

fn seconds(start: &Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn training_pool(data: &DatasetSplit, mode: TrainMode) -> shiftlab::Result<Pool> {
    let mut pool = Pool::from_split(data);
    if mode == TrainMode::TargetOnly {
        pool.reveal_all()?;
    }
    Ok(pool)
}

/// Per-epoch target-test accuracy of one training run, epoch 0 before any
/// update.
pub fn train_run(cfg: &ExperimentConfig, data: &DatasetSplit, seed: u64) -> Result<Vec<ResultsRow>> {
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let start = Instant::now();
    let row = |round: usize, mpca: f64| ResultsRow {
        experiment: cfg.experiment.clone(),
        mode: tc.mode.name().into(),
        seed,
        round,
        mpca,
        seconds: seconds(&start, cfg.timing),
    };
    let mut model = build_model(&tc, data.dim, data.num_classes, seed)?;
    let pool = training_pool(data, tc.mode)?;
    let mut rows = vec![row(0, model.evaluate(&data.target.test, Domain::Target)?)];
    train_with(&mut model, &pool, &tc, |epoch, m, _| {
        rows.push(row(epoch, m.evaluate(&data.target.test, Domain::Target)?));
        Ok(())
    })?;
    Ok(rows)
}

/// Mean and std of the final-epoch accuracy per mode.
fn train_summary(cfg: &ExperimentConfig, rows: &[ResultsRow]) -> Result<String> {
    let last = rows.iter().map(|r| r.round).max().unwrap_or(0);
    let finals: Vec<f64> = rows.iter().filter(|r| r.round == last).map(|r| r.mpca).collect();
    let agg = aggregate(&finals)?;
    Ok(format!(
        "experiment,mode,norm,runs,epochs,mean_mpca,std_mpca\n{},{},{},{},{},{:.6},{:.6}\n",
        cfg.experiment,
        cfg.train.mode.name(),
        cfg.train.norm.name(),
        finals.len(),
        last,
        agg.mean,
        agg.std
    ))
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg)?;
    let seeds = cfg.run_seeds();
    let rows: Vec<ResultsRow> = fan_out(cfg.workers, &seeds, |&s| train_run(cfg, &data, s))?
        .into_iter()
        .flatten()
        .collect();
    let csv = out.join("train.csv");
    let summary = out.join("train_summary.csv");
    write_results_csv(&rows, &csv)?;
    write_atomic(&summary, train_summary(cfg, &rows)?.as_bytes())?;
    Ok(vec![csv, summary])
}

pub fn al_run(
    cfg: &ExperimentConfig,
    data: &DatasetSplit,
    strategy: StrategyKind,
    seed: u64,
) -> Result<Vec<ResultsRow>> {
    let section = cfg.al.clone().unwrap_or_default();
    let al = section.al_config(strategy, seed);
    let base = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let mut pool = Pool::from_split(data);
    let start = Instant::now();
    let mut rows = Vec::new();
    run_rounds(
        &mut pool,
        &data.target.test,
        data.dim,
        data.num_classes,
        &base,
        &al,
        |r, _| {
            rows.push(ResultsRow {
                experiment: cfg.experiment.clone(),
                mode: strategy.name().into(),
                seed,
                round: r.round,
                mpca: r.mpca,
                seconds: seconds(&start, cfg.timing),
            });
            Ok(())
        },
    )?;
    Ok(rows)
}

pub fn cmd_al(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg)?;
    let strategies = cfg.al.clone().unwrap_or_default().strategies;
    let jobs: Vec<(StrategyKind, u64)> = strategies
        .iter()
        .flat_map(|&s| cfg.run_seeds().into_iter().map(move |seed| (s, seed)))
        .collect();
    let rows: Vec<ResultsRow> = fan_out(cfg.workers, &jobs, |&(s, seed)| al_run(cfg, &data, s, seed))?
        .into_iter()
        .flatten()
        .collect();
    let csv = out.join("al.csv");
    write_results_csv(&rows, &csv)?;
    Ok(vec![csv])
}

/// Mean target-validation accuracy of the configured mode over all seeds.
pub fn grid_score(cfg: &ExperimentConfig, data: &DatasetSplit, lr: f64, l2: f64) -> shiftlab::Result<f64> {
    let mut total = 0.0;
    let seeds = cfg.run_seeds();
    for &seed in &seeds {
        let tc = TrainConfig {
            lr,
            l2,
            seed,
            ..cfg.train.clone()
        };
        let mut model = build_model(&tc, data.dim, data.num_classes, seed)?;
        let pool = training_pool(data, tc.mode)?;
        shiftlab::train(&mut model, &pool, &tc)?;
        total += model.evaluate(&data.target.val, Domain::Target)?;
    }
    Ok(total / seeds.len() as f64)
}

pub fn cmd_grid(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg)?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config {
            key: "workers".into(),
            msg: e.to_string(),
        })?;
    let result = pool.install(|| grid_search(&grid, |lr, l2| grid_score(cfg, &data, lr, l2)))?;

    let mode = cfg.train.mode.name();
    let mut table = String::from("experiment,mode,lr,l2,score,error\n");
    for c in &result.cells {
        let (score, err) = match &c.score {
            Ok(s) => (format!("{s:.6}"), String::new()),
            Err(e) => (String::new(), e.replace([',', '\n'], ";")),
        };
        table.push_str(&format!("{},{mode},{},{},{score},{err}\n", cfg.experiment, c.lr, c.l2));
    }
    let best = &result.best;
    let best_text = format!(
        "experiment,mode,lr,l2,score\n{},{mode},{},{},{:.6}\n",
        cfg.experiment,
        best.lr,
        best.l2,
        best.score.as_ref().copied().unwrap_or(f64::NAN)
    );
    let grid_csv = out.join("grid.csv");
    let best_csv = out.join("grid_best.csv");
    write_atomic(&grid_csv, table.as_bytes())?;
    write_atomic(&best_csv, best_text.as_bytes())?;
    Ok(vec![grid_csv, best_csv])
}

/// Groups AL rows into `strategy → round → accuracies ordered by seed`.
pub fn round_accuracies(rows: &[ResultsRow]) -> (Vec<String>, RoundAccuracies) {
    let mut grouped: BTreeMap<String, BTreeMap<usize, BTreeMap<u64, f64>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.mode.clone())
            .or_default()
            .entry(r.round)
            .or_default()
            .insert(r.seed, r.mpca);
    }
    let mut names: Vec<String> = grouped.keys().cloned().collect();
    names.sort_by_key(|n| (StrategyKind::parse(n).map_or(usize::MAX, |k| k as usize), n.clone()));
    let data = grouped
        .into_iter()
        .map(|(name, rounds)| {
            let max_round = rounds.keys().max().copied().unwrap_or(0);
            let per_round = (0..=max_round)
                .map(|r| rounds.get(&r).map(|m| m.values().copied().collect()).unwrap_or_default())
                .collect();
            (name, per_round)
        })
        .collect();
    (names, data)
}

pub fn cmd_significance(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let input = cfg.significance.input.clone().unwrap_or_else(|| out.join("al.csv"));
    let rows = read_results_csv(&input)?;
    if rows.is_empty() {
        return Err(CliError::Results {
            path: input,
            msg: "no result rows".into(),
        });
    }
    let (names, data) = round_accuracies(&rows);
    let table = significance_matrix(&names, &data, cfg.significance.welch)?;
    let path = out.join("significance.csv");
    write_atomic(&path, table.to_csv().as_bytes())?;
    Ok(vec![path])
}

pub fn run(cfg: &ExperimentConfig, cmd: Command, out: &Path) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Train => cmd_train(cfg, out),
        Command::Al => cmd_al(cfg, out),
        Command::Grid => cmd_grid(cfg, out),
        Command::Significance => cmd_significance(cfg, out),
    }
}
