//! Command distribution used by sampling search: a bigram chain over coarse
//! command tags times a distribution over the chosen command's arguments.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editing::{enumerate_commands, CommandTag, EditCommand};
use crate::turtle::{BlockId, Workspace};

/// Row labels of the transition table; row 0 is the sequence start.
pub const ROW_LABELS: [&str; 6] = ["START", "Get", "Remove", "Connect", "Change", "Separate"];

fn row_index(prev: Option<CommandTag>) -> usize {
    prev.map_or(0, |t| t.index() + 1)
}

/// `P(next tag | previous tag)`, with `None` standing for the sequence start.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramTable {
    rows: [[f64; 5]; 6],
}

impl Default for BigramTable {
    fn default() -> Self {
        BigramTable::uniform()
    }
}

impl BigramTable {
    pub fn uniform() -> BigramTable {
        BigramTable { rows: [[0.2; 5]; 6] }
    }

    /// Build from explicit rows. Each row is normalised; rows must be
    /// non-negative with a positive sum.
    pub fn from_rows(rows: [[f64; 5]; 6]) -> Result<BigramTable, ModelError> {
        let mut out = rows;
        for (i, row) in out.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || sum.is_nan() || sum <= 0.0 {
                return Err(ModelError::BadRow(ROW_LABELS[i].to_string()));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(BigramTable { rows: out })
    }

    pub fn prob(&self, prev: Option<CommandTag>, next: CommandTag) -> f64 {
        self.rows[row_index(prev)][next.index()]
    }

    pub fn row(&self, prev: Option<CommandTag>) -> &[f64; 5] {
        &self.rows[row_index(prev)]
    }

    pub fn rows(&self) -> &[[f64; 5]; 6] {
        &self.rows
    }
}

/// Estimate transitions with add-one smoothing. Each sequence contributes a
/// start transition into its first tag and one transition per adjacent pair.
pub fn fit_bigram<I, S>(sequences: I) -> BigramTable
where
    I: IntoIterator<Item = S>,
    S: AsRef<[EditCommand]>,
{
    let mut counts = [[0u64; 5]; 6];
    for seq in sequences {
        let mut prev = None;
        for c in seq.as_ref() {
            let tag = c.tag();
            counts[row_index(prev)][tag.index()] += 1;
            prev = Some(tag);
        }
    }
    let mut rows = [[0.0; 5]; 6];
    for (row, count) in rows.iter_mut().zip(counts.iter()) {
        let total: u64 = count.iter().sum();
        for (p, &n) in row.iter_mut().zip(count.iter()) {
            *p = (n + 1) as f64 / (total + 5) as f64;
        }
    }
    BigramTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgumentMode {
    Uniform,
    Nonuniform,
}

/// How arguments are drawn once the tag is fixed. The two probabilities are
/// only used in nonuniform mode, and only for connect commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgumentModel {
    pub mode: ArgumentMode,
    /// Probability that a connect's source is the newest live block.
    pub lambda_last: f64,
    /// Probability that a connect's destination is the second-newest live block.
    pub lambda_next_to_last: f64,
}

impl ArgumentModel {
    pub fn uniform() -> ArgumentModel {
        ArgumentModel {
            mode: ArgumentMode::Uniform,
            lambda_last: 0.5,
            lambda_next_to_last: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub lambda_last: f64,
    pub lambda_next_to_last: f64,
    pub connects: usize,
}

/// Fraction of connect commands whose source is the newest live block, and
/// fraction whose destination is the second-newest, measured by replaying
/// each sequence. Without any connects both default to 0.5.
pub fn fit_lambdas<I, S>(sequences: I) -> LambdaEstimate
where
    I: IntoIterator<Item = S>,
    S: AsRef<[EditCommand]>,
{
    let (mut connects, mut src_last, mut dst_prev) = (0usize, 0usize, 0usize);
    for seq in sequences {
        let mut w = Workspace::new();
        for c in seq.as_ref() {
            if let EditCommand::ConnectUnder { source, dest } | EditCommand::ConnectInside { source, dest } = *c {
                let recent = w.most_recent(2);
                connects += 1;
                if recent.first() == Some(&source) {
                    src_last += 1;
                }
                if recent.get(1) == Some(&dest) {
                    dst_prev += 1;
                }
            }
            if w.apply_in_place(c).is_err() {
                break;
            }
        }
    }
    if connects == 0 {
        log::warn!("no connect commands in corpus; using default lambdas (0.5, 0.5)");
        return LambdaEstimate {
            lambda_last: 0.5,
            lambda_next_to_last: 0.5,
            connects: 0,
        };
    }
    LambdaEstimate {
        lambda_last: src_last as f64 / connects as f64,
        lambda_next_to_last: dst_prev as f64 / connects as f64,
        connects,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandModel {
    pub bigram: BigramTable,
    pub args: ArgumentModel,
}

impl Default for CommandModel {
    fn default() -> Self {
        CommandModel {
            bigram: BigramTable::uniform(),
            args: ArgumentModel::uniform(),
        }
    }
}

impl CommandModel {
    /// Fit both the bigram table and the connect probabilities.
    pub fn fit<S: AsRef<[EditCommand]>>(sequences: &[S], mode: ArgumentMode) -> CommandModel {
        let lambdas = fit_lambdas(sequences.iter().map(|s| s.as_ref()));
        CommandModel {
            bigram: fit_bigram(sequences.iter().map(|s| s.as_ref())),
            args: ArgumentModel {
                mode,
                lambda_last: lambdas.lambda_last,
                lambda_next_to_last: lambdas.lambda_next_to_last,
            },
        }
    }

    pub fn with_mode(mut self, mode: ArgumentMode) -> CommandModel {
        self.args.mode = mode;
        self
    }

    pub fn to_file(&self, corpus_fingerprint: &str) -> ModelFile {
        ModelFile {
            row_labels: ROW_LABELS.iter().map(|s| s.to_string()).collect(),
            column_labels: CommandTag::ALL.iter().map(|t| t.name().to_string()).collect(),
            transitions: self.bigram.rows.iter().map(|r| r.to_vec()).collect(),
            lambda_last: self.args.lambda_last,
            lambda_next_to_last: self.args.lambda_next_to_last,
            mode: self.args.mode,
            corpus_fingerprint: corpus_fingerprint.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("transition row {0} must be non-negative with a positive sum")]
    BadRow(String),
    #[error("model file must have a 6x5 transition matrix labelled {expected:?}")]
    BadShape { expected: Vec<String> },
    #[error("lambda values must lie in [0, 1]")]
    BadLambda,
}

/// JSON form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub transitions: Vec<Vec<f64>>,
    pub lambda_last: f64,
    pub lambda_next_to_last: f64,
    pub mode: ArgumentMode,
    pub corpus_fingerprint: String,
}

impl TryFrom<ModelFile> for CommandModel {
    type Error = ModelError;

    fn try_from(f: ModelFile) -> Result<CommandModel, ModelError> {
        let labels_ok = f.row_labels.iter().map(String::as_str).eq(ROW_LABELS)
            && f.column_labels
                .iter()
                .map(String::as_str)
                .eq(CommandTag::ALL.iter().map(|t| t.name()));
        if !labels_ok || f.transitions.len() != 6 || f.transitions.iter().any(|r| r.len() != 5) {
            return Err(ModelError::BadShape {
                expected: ROW_LABELS.iter().map(|s| s.to_string()).collect(),
            });
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(f.lambda_last) || !in_unit(f.lambda_next_to_last) {
            return Err(ModelError::BadLambda);
        }
        let mut rows = [[0.0; 5]; 6];
        for (dst, src) in rows.iter_mut().zip(&f.transitions) {
            dst.copy_from_slice(src);
        }
        Ok(CommandModel {
            bigram: BigramTable::from_rows(rows)?,
            args: ArgumentModel {
                mode: f.mode,
                lambda_last: f.lambda_last,
                lambda_next_to_last: f.lambda_next_to_last,
            },
        })
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

/// `preferred` with probability `p` when it is a candidate, otherwise a
/// uniform draw from the remaining candidates.
fn pick_biased<R: Rng + ?Sized>(candidates: &[BlockId], preferred: Option<BlockId>, p: f64, rng: &mut R) -> BlockId {
    match preferred.filter(|id| candidates.contains(id)) {
        Some(pref) => {
            let others: Vec<BlockId> = candidates.iter().copied().filter(|&c| c != pref).collect();
            if others.is_empty() || rng.random::<f64>() < p {
                pref
            } else {
                pick(&others, rng)
            }
        }
        None => pick(candidates, rng),
    }
}

fn sample_connect<R: Rng + ?Sized>(
    w: &Workspace,
    connects: &[EditCommand],
    args: &ArgumentModel,
    rng: &mut R,
) -> EditCommand {
    let endpoints = |c: &EditCommand| match *c {
        EditCommand::ConnectUnder { source, dest } | EditCommand::ConnectInside { source, dest } => (source, dest),
        _ => unreachable!("connect commands only"),
    };
    let mut sources: Vec<BlockId> = connects.iter().map(|c| endpoints(c).0).collect();
    sources.sort();
    sources.dedup();
    let recent = w.most_recent(2);
    let source = pick_biased(&sources, recent.first().copied(), args.lambda_last, rng);

    let mut dests: Vec<BlockId> = connects
        .iter()
        .map(endpoints)
        .filter(|&(s, _)| s == source)
        .map(|(_, d)| d)
        .collect();
    dests.sort();
    dests.dedup();
    let dest = pick_biased(&dests, recent.get(1).copied(), args.lambda_next_to_last, rng);

    let variants: Vec<EditCommand> = connects
        .iter()
        .copied()
        .filter(|c| endpoints(c) == (source, dest))
        .collect();
    pick(&variants, rng)
}

/// Draw one feasible command for `w`, given the tag of the previous command
/// (`None` at the start of a sequence). The tag row is renormalised over the
/// tags that have at least one feasible command in `w`.
pub fn sample_command<R: Rng + ?Sized>(
    m: &CommandModel,
    w: &Workspace,
    prev: Option<CommandTag>,
    rng: &mut R,
) -> EditCommand {
    let mut groups: [Vec<EditCommand>; 5] = Default::default();
    for c in enumerate_commands(w) {
        groups[c.tag().index()].push(c);
    }
    let row = m.bigram.row(prev);
    let weights: Vec<f64> = (0..5)
        .map(|i| if groups[i].is_empty() { 0.0 } else { row[i] })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut chosen = CommandTag::Get.index();
    for (i, &wt) in weights.iter().enumerate() {
        if wt <= 0.0 {
            continue;
        }
        chosen = i;
        if u < wt {
            break;
        }
        u -= wt;
    }
    let group = &groups[chosen];
    match (m.args.mode, CommandTag::ALL[chosen]) {
        (ArgumentMode::Nonuniform, CommandTag::Connect) => sample_connect(w, group, &m.args, rng),
        _ => pick(group, rng),
    }
}
