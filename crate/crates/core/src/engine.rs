//! Request/response layer shared by the command-line tool and the HTTP
//! service, so both frontends produce the same JSON for the same inputs.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editing::{replay, EditCommand};
use crate::models::CommandModel;
use crate::search::{self, Algorithm, SynthesisProblem, Target, DEFAULT_BUDGET, DEFAULT_COST};
use crate::turtle::{interpret, BlockView, Point, RenderConfig, Trajectory, Workspace};

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_cost() -> usize {
    DEFAULT_COST
}

fn default_move_length() -> f64 {
    RenderConfig::default().move_length
}

fn default_sample_step() -> f64 {
    RenderConfig::default().sample_step
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretRequest {
    #[serde(default)]
    pub commands: Vec<String>,
    #[serde(default = "default_move_length")]
    pub move_length: f64,
    #[serde(default = "default_sample_step")]
    pub sample_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretResponse {
    pub trajectory: Trajectory,
    /// One entry per root chain, in drawing order.
    pub workspace: Vec<Vec<BlockView>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    /// The user's current program, one command per entry.
    #[serde(default)]
    pub commands: Vec<String>,
    /// The drawn stroke, as an ordered polyline.
    pub trajectory: Vec<Point>,
    pub algorithm: Algorithm,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_cost")]
    pub cost: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_move_length")]
    pub move_length: f64,
    #[serde(default = "default_sample_step")]
    pub sample_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    /// Commands appended to the request program.
    pub delta: Vec<EditCommand>,
    /// The request program followed by `delta`.
    pub commands: Vec<EditCommand>,
    pub trajectory: Trajectory,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResponse {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// IDPS: every improvement in order, the request program first.
    /// Sampling: only the final incumbent.
    pub candidates: Vec<CandidateView>,
    pub states: usize,
    pub elapsed: f64,
}

/// Why a request was rejected before any search ran.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error("command {index} ({command:?}): {message}")]
    Command {
        index: usize,
        command: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl RequestError {
    /// Index of the offending command, when the error is about one.
    pub fn index(&self) -> Option<usize> {
        match self {
            RequestError::Command { index, .. } => Some(*index),
            RequestError::Invalid(_) => None,
        }
    }
}

fn render_config(move_length: f64, sample_step: f64) -> Result<RenderConfig, RequestError> {
    if !(move_length > 0.0 && move_length.is_finite()) {
        return Err(RequestError::Invalid(format!(
            "move_length must be positive, got {move_length}"
        )));
    }
    if !(sample_step > 0.0 && sample_step <= move_length) {
        return Err(RequestError::Invalid(format!(
            "sample_step must be in (0, move_length], got {sample_step}"
        )));
    }
    Ok(RenderConfig {
        move_length,
        sample_step,
    })
}

/// Parse and replay a textual program, reporting the first bad command.
pub fn parse_program(commands: &[String]) -> Result<(Vec<EditCommand>, Workspace), RequestError> {
    let mut parsed = Vec::with_capacity(commands.len());
    let mut w = Workspace::new();
    for (index, text) in commands.iter().enumerate() {
        let err = |message: String| RequestError::Command {
            index,
            command: text.clone(),
            message,
        };
        let c: EditCommand = text
            .parse()
            .map_err(|e: crate::editing::CommandParseError| err(e.to_string()))?;
        w.apply_in_place(&c).map_err(|e| err(e.to_string()))?;
        parsed.push(c);
    }
    Ok((parsed, w))
}

pub fn handle_interpret(req: &InterpretRequest) -> Result<InterpretResponse, RequestError> {
    let cfg = render_config(req.move_length, req.sample_step)?;
    let (_, w) = parse_program(&req.commands)?;
    Ok(InterpretResponse {
        trajectory: interpret(&w, &cfg),
        workspace: w.view(),
    })
}

/// A request checked and turned into a search problem.
#[derive(Debug, Clone)]
pub struct PreparedRequest {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub commands: Vec<EditCommand>,
    pub problem: SynthesisProblem,
}

pub fn prepare(req: &SynthesisRequest) -> Result<PreparedRequest, RequestError> {
    let cfg = render_config(req.move_length, req.sample_step)?;
    let (commands, initial) = parse_program(&req.commands)?;
    if req.trajectory.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RequestError::Invalid(
            "trajectory contains a non-finite coordinate".into(),
        ));
    }
    let target = Target::from_drawn(&Trajectory::new(req.trajectory.clone()), &cfg)
        .map_err(|e| RequestError::Invalid(e.to_string()))?;
    let problem = SynthesisProblem::new(
        initial,
        commands.last().map(|c| c.tag()),
        target,
        req.cost,
        req.budget,
        cfg,
    )
    .map_err(|e| RequestError::Invalid(e.to_string()))?;
    Ok(PreparedRequest {
        algorithm: req.algorithm,
        seed: req.seed,
        commands,
        problem,
    })
}

/// Run a prepared request. `workers` only affects speed.
pub fn run_prepared(prep: &PreparedRequest, model: &CommandModel, workers: usize) -> SynthesisResponse {
    let start = Instant::now();
    let report = search::run(prep.algorithm, &prep.problem, model, prep.seed, workers);
    let elapsed = start.elapsed().as_secs_f64();
    let shown = if prep.algorithm.is_sampling() {
        &report.candidates[report.candidates.len() - 1..]
    } else {
        &report.candidates[..]
    };
    let candidates = shown
        .iter()
        .map(|c| CandidateView {
            delta: c.path.clone(),
            commands: prep.commands.iter().chain(&c.path).copied().collect(),
            trajectory: interpret(&c.workspace, &prep.problem.render),
            distance: c.distance,
        })
        .collect();
    SynthesisResponse {
        algorithm: prep.algorithm,
        seed: prep.seed,
        candidates,
        states: report.states,
        elapsed,
    }
}

pub fn handle_synthesize(
    req: &SynthesisRequest,
    model: &CommandModel,
    workers: usize,
) -> Result<SynthesisResponse, RequestError> {
    Ok(run_prepared(&prepare(req)?, model, workers))
}

/// Re-check a response independently of the search: every candidate replays
/// from the request program within `cost` edits and draws its trajectory.
pub fn verify_response(req: &SynthesisRequest, resp: &SynthesisResponse) -> Result<(), String> {
    let cfg = render_config(req.move_length, req.sample_step).map_err(|e| e.to_string())?;
    for (i, c) in resp.candidates.iter().enumerate() {
        if c.delta.len() > req.cost {
            return Err(format!(
                "candidate {i} uses {} edits, cost is {}",
                c.delta.len(),
                req.cost
            ));
        }
        let w = replay(&c.commands).map_err(|e| format!("candidate {i}: {e}"))?;
        if interpret(&w, &cfg) != c.trajectory {
            return Err(format!("candidate {i}: trajectory does not match its program"));
        }
    }
    if resp.candidates.windows(2).any(|w| w[1].distance > w[0].distance) {
        return Err("candidate distances increase".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_and_square_stroke() -> SynthesisRequest {
        let side = |x0: f64, y0: f64, x1: f64, y1: f64| {
            (0..10).map(move |i| Point::new(x0 + (x1 - x0) * i as f64 / 10.0, y0 + (y1 - y0) * i as f64 / 10.0))
        };
        let mut stroke: Vec<Point> = side(0.0, 0.0, 0.0, 50.0)
            .chain(side(0.0, 50.0, 50.0, 50.0))
            .chain(side(50.0, 50.0, 50.0, 0.0))
            .chain(side(50.0, 0.0, 0.0, 0.0))
            .collect();
        stroke.push(Point::new(0.0, 0.0));
        SynthesisRequest {
            commands: ["get repeat", "change 2 in 1 to 4", "get move", "connect 2 inside 1"]
                .map(String::from)
                .to_vec(),
            trajectory: stroke,
            algorithm: Algorithm::Idps,
            budget: 50_000,
            cost: 4,
            seed: 0,
            move_length: 50.0,
            sample_step: 5.0,
        }
    }

    #[test]
    fn interpret_reports_failing_index() {
        let req = InterpretRequest {
            commands: vec!["get move".into(), "get turn".into(), "remove 7".into()],
            move_length: 50.0,
            sample_step: 5.0,
        };
        assert_eq!(handle_interpret(&req).unwrap_err().index(), Some(2));
    }

    #[test]
    fn empty_program_draws_origin() {
        let resp = handle_interpret(&InterpretRequest {
            commands: vec![],
            move_length: 50.0,
            sample_step: 5.0,
        })
        .unwrap();
        assert_eq!(resp.trajectory.points, vec![Point::new(0.0, 0.0)]);
        assert!(resp.workspace.is_empty());
    }

    #[test]
    fn idps_bends_line_into_square() {
        let req = line_and_square_stroke();
        let resp = handle_synthesize(&req, &CommandModel::default(), 1).unwrap();
        verify_response(&req, &resp).unwrap();
        assert!(resp.candidates.len() >= 2);
        assert_eq!(resp.candidates.last().unwrap().distance, 0.0);
        assert!(resp.candidates.windows(2).all(|w| w[1].distance < w[0].distance));
    }

    #[test]
    fn sampling_with_budget_below_cost_echoes_program() {
        let mut req = line_and_square_stroke();
        req.algorithm = Algorithm::Uniform;
        req.budget = 3;
        let resp = handle_synthesize(&req, &CommandModel::default(), 1).unwrap();
        assert_eq!(resp.candidates.len(), 1);
        assert!(resp.candidates[0].delta.is_empty());
        assert_eq!(resp.states, 0);
    }
}
