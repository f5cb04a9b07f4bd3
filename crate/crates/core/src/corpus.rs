//! Corpus items: a recorded command sequence plus the trajectory its author
//! drew. Stored one JSON file per item:
//!
//! ```json
//! { "id": "item-01",
//!   "commands": ["get repeat", "get move", "connect 2 inside 1"],
//!   "trajectory": [[0.0, 0.0], [0.0, 5.0]],
//!   "metadata": {} }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::editing::{replay, CommandTag, EditCommand, ReplayError};
use crate::search::{SearchError, Target};
use crate::turtle::{interpret, BlockId, BlockType, Point, RenderConfig, Trajectory, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub commands: Vec<EditCommand>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl CorpusItem {
    pub fn program(&self) -> Result<Workspace, ReplayError> {
        replay(&self.commands)
    }

    /// The drawn trajectory as a search target (registered and densified).
    pub fn target(&self, cfg: &RenderConfig) -> Result<Target, SearchError> {
        Target::from_drawn(&self.trajectory, cfg)
    }

    pub fn last_tag(&self) -> Option<CommandTag> {
        self.commands.last().map(|c| c.tag())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.program().map_err(|e| e.to_string())?;
        if self.trajectory.is_empty() {
            return Err("trajectory is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{file}: {source}")]
    Replay {
        file: PathBuf,
        #[source]
        source: ReplayError,
    },
    #[error("{file}: trajectory is empty")]
    EmptyTrajectory { file: PathBuf },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> CorpusError {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Deserialize)]
struct RawItem {
    id: String,
    commands: Vec<String>,
    trajectory: Trajectory,
    #[serde(default)]
    metadata: serde_json::Value,
}

/// Parse and validate a single item file.
pub fn load_item(path: &Path) -> Result<CorpusItem, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let raw: RawItem = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        file: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut commands = Vec::with_capacity(raw.commands.len());
    for c in &raw.commands {
        let parsed = c.parse::<EditCommand>().map_err(|e| {
            let needle = format!("\"{c}\"");
            let line = text.lines().position(|l| l.contains(&needle)).map_or(0, |i| i + 1);
            CorpusError::Parse {
                file: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        commands.push(parsed);
    }
    replay(&commands).map_err(|source| CorpusError::Replay {
        file: path.to_path_buf(),
        source,
    })?;
    if raw.trajectory.is_empty() {
        return Err(CorpusError::EmptyTrajectory {
            file: path.to_path_buf(),
        });
    }
    Ok(CorpusItem {
        id: raw.id,
        commands,
        trajectory: raw.trajectory,
        metadata: raw.metadata,
    })
}

/// Load every `*.json` file in `dir`, in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusItem>, CorpusError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CorpusError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|f| load_item(f)).collect()
}

pub fn save_item(dir: &Path, item: &CorpusItem) -> Result<PathBuf, CorpusError> {
    let path = dir.join(format!("{}.json", item.id));
    let json = serde_json::to_string_pretty(item).expect("corpus items serialise");
    fs::write(&path, json).map_err(|e| CorpusError::io(&path, e))?;
    Ok(path)
}

pub fn save_corpus(dir: &Path, items: &[CorpusItem]) -> Result<Vec<PathBuf>, CorpusError> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    items.iter().map(|it| save_item(dir, it)).collect()
}

/// SHA-256 over the items' canonical JSON, ordered by id.
pub fn corpus_fingerprint(items: &[CorpusItem]) -> String {
    let mut sorted: Vec<&CorpusItem> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for it in sorted {
        h.update(serde_json::to_string(it).expect("corpus items serialise").as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Blocks per program, inclusive range.
    pub min_blocks: usize,
    pub max_blocks: usize,
    /// Standard deviation of the per-point Gaussian jitter, in canvas units.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            min_blocks: 3,
            max_blocks: 7,
            noise: 0.0,
        }
    }
}

struct Builder {
    w: Workspace,
    commands: Vec<EditCommand>,
}

impl Builder {
    fn push(&mut self, c: EditCommand) -> Option<BlockId> {
        let created = matches!(c, EditCommand::Get(_)).then(|| self.w.next_id());
        self.w.apply_in_place(&c).expect("generator emits feasible commands");
        self.commands.push(c);
        created
    }

    fn change_to_random<R: Rng>(&mut self, id: BlockId, rng: &mut R) {
        let kind = self.w.kind(id).expect("live block");
        let old = kind.param().expect("parameterised block");
        let choices: Vec<u16> = kind.param_domain().into_iter().filter(|&v| v != old).collect();
        let new = choices[rng.random_range(0..choices.len())];
        self.push(EditCommand::Change { target: id, old, new });
    }
}

fn synthetic_commands<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Vec<EditCommand> {
    let mut b = Builder {
        w: Workspace::new(),
        commands: Vec::new(),
    };
    let blocks = rng.random_range(spec.min_blocks.max(1)..=spec.max_blocks.max(spec.min_blocks.max(1)));
    // next block goes inside this (empty) repeat, else under `tail`
    let mut open_repeat: Option<BlockId> = None;
    let mut tail: Option<BlockId> = None;
    let mut repeats = 0;
    let mut moves = 0;
    if rng.random::<f64>() < 0.5 {
        let r = b.push(EditCommand::Get(BlockType::Repeat)).expect("get creates");
        if rng.random::<f64>() < 0.6 {
            b.change_to_random(r, rng);
        }
        open_repeat = Some(r);
        repeats += 1;
    }
    for i in 0..blocks {
        let last = i + 1 == blocks;
        let u = rng.random::<f64>();
        let ty = if (last && moves == 0) || u < 0.5 {
            BlockType::Move
        } else if u < 0.85 || last || repeats >= 2 {
            BlockType::Turn
        } else {
            BlockType::Repeat
        };
        let id = b.push(EditCommand::Get(ty)).expect("get creates");
        if let Some(r) = open_repeat.take() {
            b.push(EditCommand::ConnectInside { source: id, dest: r });
        } else if let Some(t) = tail {
            b.push(EditCommand::ConnectUnder { source: id, dest: t });
        }
        tail = Some(id);
        match ty {
            BlockType::Move => moves += 1,
            BlockType::Turn => {
                if rng.random::<f64>() < 0.85 {
                    b.change_to_random(id, rng);
                }
            }
            BlockType::Repeat => {
                if rng.random::<f64>() < 0.6 {
                    b.change_to_random(id, rng);
                }
                open_repeat = Some(id);
                repeats += 1;
            }
        }
        if !last && rng.random::<f64>() < 0.08 {
            // a block fetched and thrown away again
            let ty = BlockType::ALL[rng.random_range(0..3)];
            let id = b.push(EditCommand::Get(ty)).expect("get creates");
            b.push(EditCommand::Remove(id));
        }
    }
    b.commands
}

/// Random programs built the way people tend to build them (fetch a block,
/// attach it under the previous one, adjust its value), each paired with its
/// drawing jittered by Gaussian noise. Item `i` depends only on
/// `(spec.seed, i)`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, n: usize, cfg: &RenderConfig) -> Vec<CorpusItem> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let commands = synthetic_commands(spec, &mut rng);
            let program = replay(&commands).expect("generated sequence replays");
            let clean = interpret(&program, cfg);
            let trajectory = if spec.noise > 0.0 {
                let normal = Normal::new(0.0, spec.noise).expect("finite noise");
                Trajectory::new(
                    clean
                        .points
                        .iter()
                        .map(|p| Point::new(p.x + normal.sample(&mut rng), p.y + normal.sample(&mut rng)))
                        .collect(),
                )
            } else {
                clean
            };
            CorpusItem {
                id: format!("syn-{}-{:04}", spec.seed, i),
                commands,
                trajectory,
                metadata: serde_json::json!({
                    "generator": "synthetic",
                    "seed": spec.seed,
                    "index": i,
                    "noise": spec.noise,
                }),
            }
        })
        .collect()
}
