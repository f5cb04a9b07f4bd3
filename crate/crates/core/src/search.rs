//! Program search over the editing-command graph.
//!
//! Both algorithms start from the user's program and look for a program within
//! `cost` edits whose drawing is closest (in Hausdorff distance) to the
//! target trajectory. Every comparison against the incumbent goes through
//! [`hausdorff_below`]; the exact distance is only computed once a candidate
//! is known to be an improvement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::editing::{enumerate_commands, CommandTag, EditCommand};
use crate::hausdorff::{hausdorff, hausdorff_below};
use crate::models::{sample_command, ArgumentMode, CommandModel};
use crate::turtle::{interpret, Point, RenderConfig, Trajectory, Workspace};

/// Default edit budget.
pub const DEFAULT_COST: usize = 6;
/// Default state budget.
pub const DEFAULT_BUDGET: usize = 50_000;

/// A target point set ready for repeated distance queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    points: Vec<Point>,
}

impl Target {
    /// Use the points as given (duplicates dropped).
    pub fn from_points(points: &[Point]) -> Result<Target, SearchError> {
        let distinct = Trajectory::new(points.to_vec()).distinct_points();
        if distinct.is_empty() {
            return Err(SearchError::EmptyTarget);
        }
        Ok(Target { points: distinct })
    }

    /// A user's drawn stroke: translated so it starts at the turtle origin
    /// and densified to the interpreter's sampling step.
    pub fn from_drawn(stroke: &Trajectory, cfg: &RenderConfig) -> Result<Target, SearchError> {
        let t = stroke.registered().densified(cfg.sample_step);
        Target::from_points(&t.points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn distance(&self, w: &Workspace, cfg: &RenderConfig) -> f64 {
        let drawn = interpret(w, cfg).distinct_points();
        hausdorff(&drawn, &self.points).expect("both sets non-empty")
    }

    fn improves(&self, w: &Workspace, cfg: &RenderConfig, incumbent: f64) -> Option<f64> {
        let drawn = interpret(w, cfg).distinct_points();
        if hausdorff_below(&drawn, &self.points, incumbent).expect("both sets non-empty") {
            Some(hausdorff(&drawn, &self.points).expect("both sets non-empty"))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("target trajectory is empty")]
    EmptyTarget,
    #[error("edit budget must be at least 1")]
    ZeroCost,
    #[error("state budget must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub initial: Workspace,
    /// Tag of the last command that built `initial`, `None` if it was empty.
    pub last_tag: Option<CommandTag>,
    pub target: Target,
    /// Maximum number of edits away from `initial`.
    pub cost: usize,
    /// Maximum number of generated (IDPS) or sampled (sampling search) states.
    pub budget: usize,
    pub render: RenderConfig,
}

impl SynthesisProblem {
    pub fn new(
        initial: Workspace,
        last_tag: Option<CommandTag>,
        target: Target,
        cost: usize,
        budget: usize,
        render: RenderConfig,
    ) -> Result<SynthesisProblem, SearchError> {
        if cost == 0 {
            return Err(SearchError::ZeroCost);
        }
        if budget == 0 {
            return Err(SearchError::ZeroBudget);
        }
        Ok(SynthesisProblem {
            initial,
            last_tag,
            target,
            cost,
            budget,
            render,
        })
    }

    pub fn initial_distance(&self) -> f64 {
        self.target.distance(&self.initial, &self.render)
    }
}

/// One program found by a search, with the edits that lead to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    #[serde(skip)]
    pub workspace: Workspace,
    /// Edits applied to the initial program, in order.
    pub path: Vec<EditCommand>,
    pub distance: f64,
    /// States generated when this candidate was found.
    pub states: usize,
}

impl Candidate {
    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    /// Strictly improving candidates, the initial program first.
    pub candidates: Vec<Candidate>,
    pub states: usize,
}

impl SearchReport {
    pub fn best(&self) -> &Candidate {
        self.candidates.last().expect("initial program is always present")
    }
}

fn initial_candidate(prob: &SynthesisProblem) -> Candidate {
    Candidate {
        workspace: prob.initial.clone(),
        path: Vec::new(),
        distance: prob.initial_distance(),
        states: 0,
    }
}

struct Deepening<'a> {
    prob: &'a SynthesisProblem,
    incumbent: f64,
    states: usize,
    exhausted: bool,
    /// Workspaces on the current path, root first, with their structure hashes.
    path_states: Vec<(u64, Workspace)>,
    path_cmds: Vec<EditCommand>,
    out: Vec<Candidate>,
}

impl Deepening<'_> {
    fn on_path(&self, w: &Workspace) -> bool {
        let h = w.structure_hash();
        self.path_states.iter().any(|(ph, pw)| *ph == h && pw.same_structure(w))
    }

    fn visit(&mut self, w: &Workspace, remaining: usize) {
        for c in enumerate_commands(w) {
            if self.states >= self.prob.budget {
                self.exhausted = true;
                return;
            }
            let child = w.apply(&c).expect("enumerated commands are feasible");
            self.states += 1;
            if self.on_path(&child) {
                continue;
            }
            self.path_cmds.push(c);
            if remaining == 1 {
                if let Some(d) = self.prob.target.improves(&child, &self.prob.render, self.incumbent) {
                    self.incumbent = d;
                    self.out.push(Candidate {
                        workspace: child,
                        path: self.path_cmds.clone(),
                        distance: d,
                        states: self.states,
                    });
                }
            } else {
                self.path_states.push((child.structure_hash(), child.clone()));
                self.visit(&child, remaining - 1);
                self.path_states.pop();
            }
            self.path_cmds.pop();
            if self.exhausted || self.incumbent == 0.0 {
                return;
            }
        }
    }
}

/// Iterative deepening program search.
///
/// Iteration `d` runs a depth-limited search to depth `d` that never revisits
/// a workspace already on the current path, and tests only programs exactly
/// `d` edits deep. A program is emitted when it beats every earlier emission,
/// which makes the returned distances strictly decreasing. Stops once the
/// state budget is spent, the distance reaches zero, or depth `cost` is done.
pub fn idps(prob: &SynthesisProblem) -> SearchReport {
    let first = initial_candidate(prob);
    let mut run = Deepening {
        prob,
        incumbent: first.distance,
        states: 0,
        exhausted: false,
        path_states: vec![(prob.initial.structure_hash(), prob.initial.clone())],
        path_cmds: Vec::new(),
        out: vec![first],
    };
    for depth in 1..=prob.cost {
        if run.exhausted || run.incumbent == 0.0 {
            break;
        }
        run.visit(&prob.initial, depth);
    }
    SearchReport {
        candidates: run.out,
        states: run.states,
    }
}

/// Which search to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Idps,
    Uniform,
    Nonuniform,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Idps, Algorithm::Uniform, Algorithm::Nonuniform];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Idps => "idps",
            Algorithm::Uniform => "uniform",
            Algorithm::Nonuniform => "nonuniform",
        }
    }

    pub fn is_sampling(self) -> bool {
        self != Algorithm::Idps
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "idps" => Ok(Algorithm::Idps),
            "uniform" => Ok(Algorithm::Uniform),
            "nonuniform" | "non-uniform" => Ok(Algorithm::Nonuniform),
            other => Err(format!(
                "unknown algorithm {other:?} (expected idps, uniform or nonuniform)"
            )),
        }
    }
}

/// Run `algo`. Sampling algorithms use `model` with its argument mode
/// overridden to match the algorithm; IDPS ignores the model and the seed.
pub fn run(algo: Algorithm, prob: &SynthesisProblem, model: &CommandModel, seed: u64, workers: usize) -> SearchReport {
    match algo {
        Algorithm::Idps => idps(prob),
        Algorithm::Uniform => sampling_search(prob, &model.clone().with_mode(ArgumentMode::Uniform), seed, workers),
        Algorithm::Nonuniform => {
            sampling_search(prob, &model.clone().with_mode(ArgumentMode::Nonuniform), seed, workers)
        }
    }
}

/// Random stream for one sampling round.
pub fn round_rng(seed: u64, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    rng
}

/// Best strict improvement over `threshold` found in one round: the first
/// program in the round that reaches the round's minimum.
fn sampling_round(
    prob: &SynthesisProblem,
    model: &CommandModel,
    seed: u64,
    round: usize,
    threshold: f64,
) -> Option<Candidate> {
    let mut rng = round_rng(seed, round);
    let mut w = prob.initial.clone();
    let mut prev = prob.last_tag;
    let mut path = Vec::with_capacity(prob.cost);
    let mut best: Option<Candidate> = None;
    let mut incumbent = threshold;
    for j in 0..prob.cost {
        let c = sample_command(model, &w, prev, &mut rng);
        w.apply_in_place(&c).expect("sampled commands are feasible");
        prev = Some(c.tag());
        path.push(c);
        if let Some(d) = prob.target.improves(&w, &prob.render, incumbent) {
            incumbent = d;
            best = Some(Candidate {
                workspace: w.clone(),
                path: path.clone(),
                distance: d,
                states: round * prob.cost + j + 1,
            });
        }
    }
    best
}

/// Sampling search: `budget / cost` rounds, each drawing `cost` commands
/// from the model starting at the initial program, keeping the best program
/// seen. Returns the initial program followed by the incumbent when one was
/// found. The result depends only on `seed`, not on `workers`.
pub fn sampling_search(prob: &SynthesisProblem, model: &CommandModel, seed: u64, workers: usize) -> SearchReport {
    let first = initial_candidate(prob);
    let rounds = prob.budget / prob.cost;
    let states = rounds * prob.cost;
    let found = if workers <= 1 {
        let mut best: Option<Candidate> = None;
        for round in 0..rounds {
            let threshold = best.as_ref().map_or(first.distance, |b| b.distance);
            if threshold == 0.0 {
                break;
            }
            if let Some(c) = sampling_round(prob, model, seed, round, threshold) {
                best = Some(c);
            }
        }
        best
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            (0..rounds)
                .into_par_iter()
                .filter_map(|round| sampling_round(prob, model, seed, round, first.distance))
                .reduce_with(|a, b| {
                    // earlier round wins ties, as in the sequential order
                    if b.distance < a.distance || (b.distance == a.distance && b.states < a.states) {
                        b
                    } else {
                        a
                    }
                })
        })
    };
    let mut candidates = vec![first];
    candidates.extend(found);
    SearchReport { candidates, states }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editing::{parse_commands, replay};
    use crate::models::{ArgumentModel, BigramTable};

    fn cmds(t: &str) -> Vec<EditCommand> {
        parse_commands(t).unwrap()
    }

    fn problem(p0: &str, target: &str, cost: usize, budget: usize) -> SynthesisProblem {
        let cfg = RenderConfig::default();
        let p0c = cmds(p0);
        let t = interpret(&replay(&cmds(target)).unwrap(), &cfg);
        SynthesisProblem::new(
            replay(&p0c).unwrap(),
            p0c.last().map(|c| c.tag()),
            Target::from_points(&t.points).unwrap(),
            cost,
            budget,
            cfg,
        )
        .unwrap()
    }

    #[test]
    fn perfect_start_emits_only_initial() {
        let prob = problem("get move", "get move", 2, 10_000);
        let r = idps(&prob);
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.best().distance, 0.0);
    }

    #[test]
    fn one_move_from_empty() {
        let prob = problem("", "get move", 1, 10_000);
        let r = idps(&prob);
        assert_eq!(r.best().distance, 0.0);
        assert_eq!(r.best().path, cmds("get move"));
        assert_eq!(r.states, 1);
    }

    #[test]
    fn budget_caps_states() {
        let prob = problem("get move\nget turn", "get repeat\nget move\nconnect 2 inside 1", 3, 37);
        let r = idps(&prob);
        assert!(r.states <= 37);
    }

    #[test]
    fn zero_rounds_returns_initial() {
        let prob = problem("get move", "get turn\nget move", 6, 5);
        let r = sampling_search(&prob, &CommandModel::default(), 3, 1);
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.states, 0);
    }

    #[test]
    fn forced_single_edit_repair() {
        // only "change" is ever drawn, and the turn has one useful value
        let mut rows = [[0.0; 5]; 6];
        rows.iter_mut().for_each(|r| r[CommandTag::Change.index()] = 1.0);
        let model = CommandModel {
            bigram: BigramTable::from_rows(rows).unwrap(),
            args: ArgumentModel::uniform(),
        };
        let prob = problem("get turn\nget move", "get turn\nget move\nchange 30 in 1 to 90", 1, 200);
        let r = sampling_search(&prob, &model, 11, 1);
        assert!(r.best().distance <= prob.initial_distance());
        assert_eq!(r.best().distance, 0.0);
        assert_eq!(r.best().path, cmds("change 30 in 1 to 90"));
    }

    #[test]
    fn workers_do_not_change_result() {
        let prob = problem(
            "get move",
            "get repeat\nget move\nconnect 2 inside 1\nget turn\nconnect 3 under 2\nchange 30 in 3 to 90\nchange 2 in 1 to 4",
            4,
            4_000,
        );
        let model = CommandModel::default();
        let a = sampling_search(&prob, &model, 5, 1);
        let b = sampling_search(&prob, &model, 5, 4);
        assert_eq!(a, b);
    }
}
