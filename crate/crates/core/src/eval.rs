//! k-ahead evaluation: drop the last `k` commands of a corpus program, ask a
//! search algorithm to complete it against the recorded drawing, and score
//! the completion.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusItem;
use crate::editing::{replay, ReplayError};
use crate::models::CommandModel;
use crate::search::{self, Algorithm, SearchError, SynthesisProblem};
use crate::turtle::{semantically_equal, RenderConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("item {item}: cannot drop {k} commands from a {len}-command program")]
    PrefixInfeasible { item: String, k: usize, len: usize },
    #[error("item {item}: {source}")]
    Replay {
        item: String,
        #[source]
        source: ReplayError,
    },
    #[error("item {item}: {source}")]
    Search {
        item: String,
        #[source]
        source: SearchError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAheadResult {
    pub item: String,
    pub k: usize,
    pub algorithm: Algorithm,
    /// 1 when the completion draws the same as the full program.
    pub acc: u8,
    /// Hausdorff distance from the drawing to the completion.
    pub err: f64,
    /// Relative error reduction over the truncated program; 0 when the
    /// truncated program already fits exactly.
    pub delta: f64,
    /// Error of the truncated program.
    pub initial_err: f64,
    /// Error of the author's full program.
    pub baseline_err: f64,
    pub runtime: f64,
    pub states: usize,
    pub seed: u64,
    /// Commands appended to the truncated program.
    pub completion: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KAheadParams {
    pub budget: usize,
    pub cost: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Score one completion of `item` with its final `k` commands removed.
pub fn k_ahead(
    item: &CorpusItem,
    algo: Algorithm,
    k: usize,
    params: &KAheadParams,
    model: &CommandModel,
    cfg: &RenderConfig,
) -> Result<KAheadResult, EvalError> {
    let len = item.commands.len();
    if k > len {
        return Err(EvalError::PrefixInfeasible {
            item: item.id.clone(),
            k,
            len,
        });
    }
    let replay_err = |source| EvalError::Replay {
        item: item.id.clone(),
        source,
    };
    let search_err = |source| EvalError::Search {
        item: item.id.clone(),
        source,
    };
    let full = replay(&item.commands).map_err(replay_err)?;
    let prefix_cmds = &item.commands[..len - k];
    let prefix = replay(prefix_cmds).map_err(replay_err)?;
    let target = item.target(cfg).map_err(search_err)?;
    let prob = SynthesisProblem::new(
        prefix,
        prefix_cmds.last().map(|c| c.tag()),
        target,
        params.cost,
        params.budget,
        *cfg,
    )
    .map_err(search_err)?;

    let start = Instant::now();
    let report = search::run(algo, &prob, model, params.seed, params.workers);
    let runtime = start.elapsed().as_secs_f64();

    let best = report.best();
    let initial_err = report.candidates[0].distance;
    let err = best.distance;
    let delta = if initial_err > 0.0 {
        (initial_err - err) / initial_err
    } else {
        0.0
    };
    Ok(KAheadResult {
        item: item.id.clone(),
        k,
        algorithm: algo,
        acc: semantically_equal(&best.workspace, &full, cfg) as u8,
        err,
        delta,
        initial_err,
        baseline_err: prob.target.distance(&full, cfg),
        runtime,
        states: report.states,
        seed: params.seed,
        completion: best.path.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "),
    })
}

/// Seed for one (item, k) job, derived from the run seed.
pub fn job_seed(seed: u64, item_index: usize, k: usize) -> u64 {
    // splitmix64 finaliser over the packed job coordinates
    let mut z = seed ^ ((item_index as u64) << 20 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub algorithms: Vec<Algorithm>,
    pub ks: Vec<usize>,
    pub budget: usize,
    pub cost: usize,
    pub seed: u64,
    /// Jobs run in parallel; each job itself is sequential.
    pub workers: usize,
}

/// Run every (item, algorithm, k) job. Items shorter than `k` are skipped.
/// Results come back in (item, algorithm, k) order regardless of `workers`.
pub fn run_plan(
    items: &[CorpusItem],
    plan: &EvalPlan,
    model: &CommandModel,
    cfg: &RenderConfig,
) -> Result<Vec<KAheadResult>, EvalError> {
    let mut jobs = Vec::new();
    for (i, item) in items.iter().enumerate() {
        for &algo in &plan.algorithms {
            for &k in &plan.ks {
                if k <= item.commands.len() {
                    jobs.push((i, item, algo, k));
                }
            }
        }
    }
    let run_job = |&(i, item, algo, k): &(usize, &CorpusItem, Algorithm, usize)| {
        let params = KAheadParams {
            budget: plan.budget,
            cost: plan.cost,
            seed: job_seed(plan.seed, i, k),
            workers: 1,
        };
        k_ahead(item, algo, k, &params, model, cfg)
    };
    if plan.workers <= 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .expect("thread pool");
        pool.install(|| jobs.par_iter().map(run_job).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub k: usize,
    pub n: usize,
    pub mean_acc: f64,
    pub mean_err: f64,
    pub mean_delta: f64,
    pub mean_runtime: f64,
    pub mean_states: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Mean error of the authors' full programs over the distinct items.
    pub baseline_mean_err: f64,
}

impl Summary {
    pub fn row(&self, algorithm: Algorithm, k: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.k == k)
    }
}

/// Per-(algorithm, k) means. Returns `None` for an empty result list.
pub fn aggregate(results: &[KAheadResult]) -> Option<Summary> {
    if results.is_empty() {
        return None;
    }
    let mut groups: BTreeMap<(Algorithm, usize), Vec<&KAheadResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.algorithm, r.k)).or_default().push(r);
    }
    let mean =
        |v: &[&KAheadResult], f: &dyn Fn(&KAheadResult) -> f64| v.iter().map(|r| f(r)).sum::<f64>() / v.len() as f64;
    let rows = groups
        .into_iter()
        .map(|((algorithm, k), v)| SummaryRow {
            algorithm,
            k,
            n: v.len(),
            mean_acc: mean(&v, &|r| r.acc as f64),
            mean_err: mean(&v, &|r| r.err),
            mean_delta: mean(&v, &|r| r.delta),
            mean_runtime: mean(&v, &|r| r.runtime),
            mean_states: mean(&v, &|r| r.states as f64),
        })
        .collect();
    let mut baselines: BTreeMap<&str, f64> = BTreeMap::new();
    for r in results {
        baselines.entry(&r.item).or_insert(r.baseline_err);
    }
    let baseline_mean_err = baselines.values().sum::<f64>() / baselines.len() as f64;
    Some(Summary {
        rows,
        baseline_mean_err,
    })
}

/// Write `results.csv`, `summary.json` and the three bar charts into `dir`.
pub fn write_report(dir: &Path, results: &[KAheadResult], summary: &Summary) -> Result<Vec<PathBuf>, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();

    let csv_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(io(&csv_path))?;
    written.push(csv_path);

    let json_path = dir.join("summary.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(summary).expect("summary serialises"),
    )
    .map_err(io(&json_path))?;
    written.push(json_path);

    type Panel<'a> = (&'a str, &'a str, fn(&SummaryRow) -> f64, Option<f64>);
    let panels: [Panel; 3] = [
        ("acc.svg", "Mean accuracy", |r| r.mean_acc, None),
        (
            "err.svg",
            "Mean Hausdorff error",
            |r| r.mean_err,
            Some(summary.baseline_mean_err),
        ),
        ("delta.svg", "Mean relative error reduction", |r| r.mean_delta, None),
    ];
    for (file, title, metric, baseline) in panels {
        let path = dir.join(file);
        fs::write(&path, bar_chart_svg(summary, title, metric, baseline)).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

const COLORS: [&str; 3] = ["#00008b", "#ff0000", "#ffff00"];

/// Grouped bar chart: one group per k, one bar per algorithm, with an
/// optional dashed horizontal reference line.
pub fn bar_chart_svg(summary: &Summary, title: &str, metric: fn(&SummaryRow) -> f64, baseline: Option<f64>) -> String {
    let (width, height) = (520.0, 360.0);
    let (left, right, top, bottom) = (60.0, 130.0, 40.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let ks: Vec<usize> = {
        let mut v: Vec<usize> = summary.rows.iter().map(|r| r.k).collect();
        v.sort();
        v.dedup();
        v
    };
    let algos: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| summary.rows.iter().any(|r| r.algorithm == *a))
        .collect();
    let max_v = summary
        .rows
        .iter()
        .map(metric)
        .chain(baseline)
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.1;
    let y = |v: f64| top + plot_h - (v.max(0.0) / max_v) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        left + plot_w / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/><line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + plot_h,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for i in 0..=4 {
        let v = max_v * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    let group_w = plot_w / ks.len().max(1) as f64;
    let bar_w = group_w * 0.8 / algos.len().max(1) as f64;
    for (gi, &k) in ks.iter().enumerate() {
        let gx = left + gi as f64 * group_w + group_w * 0.1;
        for (ai, &a) in algos.iter().enumerate() {
            if let Some(r) = summary.row(a, k) {
                let v = metric(r);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}" stroke="black"><title>{a} k={k}: {v:.4}</title></rect>"#,
                    gx + ai as f64 * bar_w,
                    y(v),
                    bar_w,
                    top + plot_h - y(v),
                    COLORS[a as usize]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{k}</text>"#,
            gx + group_w * 0.4,
            top + plot_h + 18.0
        );
    }
    if let Some(b) = baseline {
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="black" stroke-dasharray="6,4"/>"#,
            y(b),
            left + plot_w,
            y(b)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">k-ahead task</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    );
    for (ai, a) in algos.iter().enumerate() {
        let ly = top + 10.0 + ai as f64 * 20.0;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{ly}" width="12" height="12" fill="{}" stroke="black"/><text x="{}" y="{}">{a}</text>"#,
            COLORS[*a as usize],
            lx + 18.0,
            ly + 11.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editing::parse_commands;
    use crate::turtle::interpret;

    fn item(cmds: &str) -> CorpusItem {
        let commands = parse_commands(cmds).unwrap();
        let cfg = RenderConfig::default();
        CorpusItem {
            id: "t".into(),
            trajectory: interpret(&replay(&commands).unwrap(), &cfg),
            commands,
            metadata: serde_json::Value::Null,
        }
    }

    fn params() -> KAheadParams {
        KAheadParams {
            budget: 50_000,
            cost: 6,
            seed: 1,
            workers: 1,
        }
    }

    #[test]
    fn k_zero_is_a_no_op() {
        let it = item("get move\nget turn\nconnect 2 under 1\nchange 30 in 2 to 90\nget move\nconnect 3 under 2");
        let m = CommandModel::default();
        let r = k_ahead(&it, Algorithm::Idps, 0, &params(), &m, &RenderConfig::default()).unwrap();
        assert_eq!((r.acc, r.delta, r.err), (1, 0.0, 0.0));
    }

    #[test]
    fn one_step_change_is_recovered() {
        let it = item("get repeat\nget move\nconnect 2 inside 1\nget turn\nconnect 3 under 2\nchange 30 in 3 to 120");
        let r = k_ahead(
            &it,
            Algorithm::Idps,
            1,
            &params(),
            &CommandModel::default(),
            &RenderConfig::default(),
        )
        .unwrap();
        assert_eq!(r.acc, 1);
        assert_eq!(r.err, 0.0);
        assert_eq!(r.delta, 1.0);
        assert!(r.initial_err > 0.0);
    }

    #[test]
    fn k_too_large() {
        let it = item("get move");
        let e = k_ahead(
            &it,
            Algorithm::Idps,
            2,
            &params(),
            &CommandModel::default(),
            &RenderConfig::default(),
        );
        assert!(matches!(e, Err(EvalError::PrefixInfeasible { .. })));
    }

    fn result(algo: Algorithm, acc: u8, err: f64) -> KAheadResult {
        KAheadResult {
            item: format!("i{acc}"),
            k: 1,
            algorithm: algo,
            acc,
            err,
            delta: 0.5,
            initial_err: 1.0,
            baseline_err: err,
            runtime: 0.1,
            states: 10,
            seed: 0,
            completion: String::new(),
        }
    }

    #[test]
    fn aggregate_means() {
        assert!(aggregate(&[]).is_none());
        let one = aggregate(&[result(Algorithm::Idps, 1, 3.0)]).unwrap();
        assert_eq!(one.rows[0].mean_acc, 1.0);
        assert_eq!(one.rows[0].mean_err, 3.0);
        let two = aggregate(&[result(Algorithm::Idps, 0, 2.0), result(Algorithm::Idps, 1, 4.0)]).unwrap();
        assert_eq!(two.rows[0].mean_acc, 0.5);
        assert_eq!(two.baseline_mean_err, 3.0);
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let results = vec![result(Algorithm::Idps, 1, 2.0), result(Algorithm::Uniform, 0, 5.0)];
        let summary = aggregate(&results).unwrap();
        let files = write_report(dir.path(), &results, &summary).unwrap();
        assert_eq!(files.len(), 5);
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(csv.starts_with("item,k,algorithm,acc,err,delta"));
        let svg = fs::read_to_string(dir.path().join("err.svg")).unwrap();
        assert!(svg.contains("stroke-dasharray"));
    }
}
