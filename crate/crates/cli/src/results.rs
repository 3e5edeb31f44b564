//! Per-round result rows and their CSV file format.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 6] = ["experiment", "mode", "seed", "round", "mpca", "seconds"];

/// One accuracy measurement: a training epoch or an AL round of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsRow {
    pub experiment: String,
    /// Training mode or AL strategy name.
    pub mode: String,
    pub seed: u64,
    /// AL round or training epoch.
    pub round: usize,
    pub mpca: f64,
    pub seconds: f64,
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// CSV text with rows sorted by (mode, seed, round) and reals to 6 decimals.
pub fn results_csv(rows: &[ResultsRow]) -> String {
    let mut sorted: Vec<&ResultsRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.mode, a.seed, a.round)
            .cmp(&(&b.mode, b.seed, b.round))
            .then_with(|| a.experiment.cmp(&b.experiment))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in sorted {
        w.write_record([
            r.experiment.clone(),
            r.mode.clone(),
            r.seed.to_string(),
            r.round.to_string(),
            format!("{:.6}", r.mpca),
            format!("{:.6}", r.seconds),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_results_csv(rows: &[ResultsRow], path: &Path) -> Result<()> {
    write_atomic(path, results_csv(rows).as_bytes())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultsRow>> {
    let malformed = |msg: String| CliError::Results {
        path: path.to_path_buf(),
        msg,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => malformed(format!("{other:?}")),
    })?;
    let header = r.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(malformed(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let parse_err = |j: usize| malformed(format!("line {}: bad {} `{}`", i + 2, HEADER[j], field(j)));
        let mpca: f64 = field(4).parse().map_err(|_| parse_err(4))?;
        if !(0.0..=1.0).contains(&mpca) {
            return Err(parse_err(4));
        }
        rows.push(ResultsRow {
            experiment: field(0).to_string(),
            mode: field(1).to_string(),
            seed: field(2).parse().map_err(|_| parse_err(2))?,
            round: field(3).parse().map_err(|_| parse_err(3))?,
            mpca,
            seconds: field(5).parse().map_err(|_| parse_err(5))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn row(mode: &str, seed: u64, round: usize, mpca: f64) -> ResultsRow {
        ResultsRow {
            experiment: "e".into(),
            mode: mode.into(),
            seed,
            round,
            mpca,
            seconds: 0.0,
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(results_csv(&[]), "experiment,mode,seed,round,mpca,seconds\n");
    }

    #[test]
    fn six_decimals() {
        let text = results_csv(&[row("uada", 1, 2, 0.5)]);
        assert_eq!(text.lines().nth(1), Some("e,uada,1,2,0.500000,0.000000"));
    }

    #[test]
    fn round_sorts_numerically() {
        let text = results_csv(&[row("a", 0, 10, 0.1), row("a", 0, 9, 0.1)]);
        let rounds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
        assert_eq!(rounds, vec!["9", "10"]);
    }

    #[test]
    fn atomic_write_then_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        let rows = vec![row("random", 0, 0, 0.25), row("emoc", 3, 1, 1.0)];
        write_results_csv(&rows, &path).unwrap();
        assert!(!tmp_path(&path).exists());
        let mut back = read_results_csv(&path).unwrap();
        back.sort_by_key(|r| r.seed);
        assert_eq!(back, rows);
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_results_csv(&path), Err(CliError::Results { .. })));
    }

    proptest! {
        #[test]
        fn sort_independent_of_insertion_order(
            mut rows in proptest::collection::vec(
                (0usize..3, 0u64..4, 0usize..12, 0.0f64..=1.0),
                0..30,
            ),
            rot in 0usize..30,
        ) {
            rows.sort_by_key(|r| (r.0, r.1, r.2));
            rows.dedup_by_key(|r| (r.0, r.1, r.2));
            let mk = |v: &[(usize, u64, usize, f64)]| {
                v.iter()
                    .map(|&(m, s, r, a)| row(["certainty", "emoc", "random"][m], s, r, a))
                    .collect::<Vec<_>>()
            };
            let a = results_csv(&mk(&rows));
            let n = rows.len().max(1);
            rows.rotate_left(rot % n);
            rows.reverse();
            prop_assert_eq!(a, results_csv(&mk(&rows)));
        }
    }
}
