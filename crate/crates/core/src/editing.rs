//! Editing commands: the unit-cost edges of the program search graph.
//!
//! Textual syntax (case-insensitive, one command per line, tokens separated
//! by whitespace):
//!
//! ```text
//! get move | get turn | get repeat
//! remove <id>
//! connect <src> under <dst>
//! connect <src> inside <dst>
//! disconnect <id>
//! change <old> in <id> to <new>
//! ```
//!
//! The parser also accepts the filler words `a` and `block` anywhere (so
//! `Get a repeat block` and `Connect block 2 inside block 1` parse) and a
//! trailing period. Commands always print in the canonical form above.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::turtle::{Attachment, Block, BlockId, BlockKind, BlockType, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditCommand {
    Get(BlockType),
    Remove(BlockId),
    ConnectUnder { source: BlockId, dest: BlockId },
    ConnectInside { source: BlockId, dest: BlockId },
    Disconnect(BlockId),
    Change { target: BlockId, old: u16, new: u16 },
}

/// Command family with arguments discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommandTag {
    Get,
    Remove,
    Connect,
    Change,
    Separate,
}

impl CommandTag {
    pub const ALL: [CommandTag; 5] = [
        CommandTag::Get,
        CommandTag::Remove,
        CommandTag::Connect,
        CommandTag::Change,
        CommandTag::Separate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CommandTag::Get => "Get",
            CommandTag::Remove => "Remove",
            CommandTag::Connect => "Connect",
            CommandTag::Change => "Change",
            CommandTag::Separate => "Separate",
        }
    }
}

impl EditCommand {
    pub fn tag(&self) -> CommandTag {
        coarsen(self)
    }
}

pub fn coarsen(c: &EditCommand) -> CommandTag {
    match c {
        EditCommand::Get(_) => CommandTag::Get,
        EditCommand::Remove(_) => CommandTag::Remove,
        EditCommand::ConnectUnder { .. } | EditCommand::ConnectInside { .. } => CommandTag::Connect,
        EditCommand::Disconnect(_) => CommandTag::Separate,
        EditCommand::Change { .. } => CommandTag::Change,
    }
}

impl fmt::Display for EditCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditCommand::Get(t) => write!(f, "get {}", t.name()),
            EditCommand::Remove(id) => write!(f, "remove {id}"),
            EditCommand::ConnectUnder { source, dest } => write!(f, "connect {source} under {dest}"),
            EditCommand::ConnectInside { source, dest } => write!(f, "connect {source} inside {dest}"),
            EditCommand::Disconnect(id) => write!(f, "disconnect {id}"),
            EditCommand::Change { target, old, new } => write!(f, "change {old} in {target} to {new}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse command {text:?}: {reason}")]
pub struct CommandParseError {
    pub text: String,
    pub reason: String,
}

impl FromStr for EditCommand {
    type Err = CommandParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| CommandParseError {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let lower = s.trim().trim_end_matches('.').to_ascii_lowercase();
        let toks: Vec<&str> = lower
            .split_whitespace()
            .filter(|t| *t != "a" && *t != "block")
            .collect();
        let num = |t: &str| -> Result<u32, CommandParseError> {
            t.parse::<u32>()
                .map_err(|_| fail(&format!("expected a number, found {t:?}")))
        };
        let value = |t: &str| -> Result<u16, CommandParseError> {
            t.parse::<u16>()
                .map_err(|_| fail(&format!("expected a value, found {t:?}")))
        };
        match toks.as_slice() {
            ["get", ty] => {
                let ty = match *ty {
                    "move" => BlockType::Move,
                    "turn" => BlockType::Turn,
                    "repeat" => BlockType::Repeat,
                    other => return Err(fail(&format!("unknown block type {other:?}"))),
                };
                Ok(EditCommand::Get(ty))
            }
            ["remove", id] => Ok(EditCommand::Remove(BlockId(num(id)?))),
            ["connect", src, "under", dst] => Ok(EditCommand::ConnectUnder {
                source: BlockId(num(src)?),
                dest: BlockId(num(dst)?),
            }),
            ["connect", src, "inside", dst] => Ok(EditCommand::ConnectInside {
                source: BlockId(num(src)?),
                dest: BlockId(num(dst)?),
            }),
            ["disconnect", id] => Ok(EditCommand::Disconnect(BlockId(num(id)?))),
            ["change", old, "in", id, "to", new] => Ok(EditCommand::Change {
                target: BlockId(num(id)?),
                old: value(old)?,
                new: value(new)?,
            }),
            [] => Err(fail("empty command")),
            _ => Err(fail("unrecognised command form")),
        }
    }
}

impl Serialize for EditCommand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EditCommand {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a command list, one per line. Blank lines and `#` comments are
/// skipped. Errors carry the 1-based line number.
pub fn parse_commands(text: &str) -> Result<Vec<EditCommand>, (usize, CommandParseError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|e| (i + 1, e))?);
    }
    Ok(out)
}

pub fn format_commands(cmds: &[EditCommand]) -> String {
    let mut s = String::new();
    for c in cmds {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfeasibleCommand {
    #[error("block {0} does not exist")]
    UnknownBlock(BlockId),
    #[error("block {0} cannot be connected to itself")]
    SelfConnect(BlockId),
    #[error("connecting block {moved} to block {dest} would create a cycle")]
    Cycle { moved: BlockId, dest: BlockId },
    #[error("block {0} is not a repeat block")]
    NotRepeat(BlockId),
    #[error("block {0} is already a root block")]
    AlreadyRoot(BlockId),
    #[error("block {0} has no parameter")]
    NoParameter(BlockId),
    #[error("block {target} holds {actual}, not {expected}")]
    StaleValue {
        target: BlockId,
        expected: u16,
        actual: u16,
    },
    #[error("value {value} is not a legal new value for block {target}")]
    BadValue { target: BlockId, value: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("command {index} ({command}) is infeasible: {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub command: EditCommand,
    pub reason: InfeasibleCommand,
}

impl Workspace {
    fn require(&self, id: BlockId) -> Result<(), InfeasibleCommand> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(InfeasibleCommand::UnknownBlock(id))
        }
    }

    /// Detach the stack starting at `id` (with its vertical children) from
    /// wherever it is attached.
    fn detach(&mut self, id: BlockId) {
        match self.block(id).parent {
            Some(Attachment::Under(p)) => self.block_mut(p).next = None,
            Some(Attachment::Inside(r)) => self.block_mut(r).body = None,
            None => self.roots.retain(|&r| r != id),
        }
        self.block_mut(id).parent = None;
    }

    fn tail(&self, id: BlockId) -> BlockId {
        let mut cur = id;
        while let Some(n) = self.block(cur).next {
            cur = n;
        }
        cur
    }

    /// Hang `displaced` (a detached stack) beneath the last block of the
    /// chain starting at `id`.
    fn append_below(&mut self, id: BlockId, displaced: Option<BlockId>) {
        if let Some(d) = displaced {
            let t = self.tail(id);
            self.block_mut(t).next = Some(d);
            self.block_mut(d).parent = Some(Attachment::Under(t));
        }
    }

    fn check_connect(&self, source: BlockId, dest: BlockId) -> Result<(), InfeasibleCommand> {
        self.require(source)?;
        self.require(dest)?;
        if source == dest {
            return Err(InfeasibleCommand::SelfConnect(source));
        }
        if self.subtree(source).contains(&dest) {
            return Err(InfeasibleCommand::Cycle { moved: source, dest });
        }
        Ok(())
    }

    /// Checks whether `c` can be applied, without applying it.
    pub fn check(&self, c: &EditCommand) -> Result<(), InfeasibleCommand> {
        match *c {
            EditCommand::Get(_) => Ok(()),
            EditCommand::Remove(id) => self.require(id),
            EditCommand::ConnectUnder { source, dest } => self.check_connect(source, dest),
            EditCommand::ConnectInside { source, dest } => {
                self.check_connect(source, dest)?;
                match self.block(dest).kind {
                    BlockKind::Repeat(_) => Ok(()),
                    _ => Err(InfeasibleCommand::NotRepeat(dest)),
                }
            }
            EditCommand::Disconnect(id) => {
                self.require(id)?;
                if self.is_root(id) {
                    Err(InfeasibleCommand::AlreadyRoot(id))
                } else {
                    Ok(())
                }
            }
            EditCommand::Change { target, old, new } => {
                self.require(target)?;
                let kind = self.block(target).kind;
                let Some(actual) = kind.param() else {
                    return Err(InfeasibleCommand::NoParameter(target));
                };
                if actual != old {
                    return Err(InfeasibleCommand::StaleValue {
                        target,
                        expected: old,
                        actual,
                    });
                }
                if new == old || kind.with_param(new).is_none() {
                    return Err(InfeasibleCommand::BadValue { target, value: new });
                }
                Ok(())
            }
        }
    }

    /// Apply `c` in place. On error the workspace is left untouched.
    pub fn apply_in_place(&mut self, c: &EditCommand) -> Result<(), InfeasibleCommand> {
        self.check(c)?;
        match *c {
            EditCommand::Get(ty) => {
                let id = BlockId(self.next_id);
                self.next_id += 1;
                self.blocks.insert(
                    id,
                    Block {
                        kind: BlockKind::default_for(ty),
                        next: None,
                        body: None,
                        parent: None,
                    },
                );
                self.roots.push(id);
            }
            EditCommand::Remove(id) => {
                let doomed = self.subtree(id);
                self.detach(id);
                for d in doomed {
                    self.blocks.remove(&d);
                }
            }
            EditCommand::ConnectUnder { source, dest } => {
                self.detach(source);
                let displaced = self.block(dest).next;
                if let Some(d) = displaced {
                    self.detach(d);
                }
                self.block_mut(dest).next = Some(source);
                self.block_mut(source).parent = Some(Attachment::Under(dest));
                self.append_below(source, displaced);
            }
            EditCommand::ConnectInside { source, dest } => {
                self.detach(source);
                let displaced = self.block(dest).body;
                if let Some(d) = displaced {
                    self.detach(d);
                }
                self.block_mut(dest).body = Some(source);
                self.block_mut(source).parent = Some(Attachment::Inside(dest));
                self.append_below(source, displaced);
            }
            EditCommand::Disconnect(id) => {
                self.detach(id);
                self.roots.push(id);
            }
            EditCommand::Change { target, new, .. } => {
                let b = self.block_mut(target);
                b.kind = b.kind.with_param(new).expect("checked above");
            }
        }
        Ok(())
    }

    /// Successor workspace under `c`; `self` is not modified.
    pub fn apply(&self, c: &EditCommand) -> Result<Workspace, InfeasibleCommand> {
        self.check(c)?;
        let mut next = self.clone();
        next.apply_in_place(c)?;
        Ok(next)
    }
}

pub fn apply_command(w: &Workspace, c: &EditCommand) -> Result<Workspace, InfeasibleCommand> {
    w.apply(c)
}

/// Every feasible command in `w`, in family order (get, remove, connect
/// under, connect inside, disconnect, change) and then by ascending ids and
/// values.
pub fn enumerate_commands(w: &Workspace) -> Vec<EditCommand> {
    let mut out: Vec<EditCommand> = BlockType::ALL.iter().map(|&t| EditCommand::Get(t)).collect();
    let ids: Vec<BlockId> = w.ids().collect();
    out.extend(ids.iter().map(|&id| EditCommand::Remove(id)));
    let subtrees: Vec<Vec<BlockId>> = ids.iter().map(|&id| w.subtree(id)).collect();
    for (i, &source) in ids.iter().enumerate() {
        for &dest in &ids {
            if dest != source && !subtrees[i].contains(&dest) {
                out.push(EditCommand::ConnectUnder { source, dest });
            }
        }
    }
    for (i, &source) in ids.iter().enumerate() {
        for &dest in &ids {
            if dest != source && matches!(w.block(dest).kind, BlockKind::Repeat(_)) && !subtrees[i].contains(&dest) {
                out.push(EditCommand::ConnectInside { source, dest });
            }
        }
    }
    out.extend(
        ids.iter()
            .filter(|&&id| !w.is_root(id))
            .map(|&id| EditCommand::Disconnect(id)),
    );
    for &target in &ids {
        let kind = w.block(target).kind;
        if let Some(old) = kind.param() {
            for new in kind.param_domain() {
                if new != old {
                    out.push(EditCommand::Change { target, old, new });
                }
            }
        }
    }
    out
}

/// Apply commands in order starting from an empty workspace.
pub fn replay(cs: &[EditCommand]) -> Result<Workspace, ReplayError> {
    replay_from(Workspace::new(), cs)
}

pub fn replay_from(mut w: Workspace, cs: &[EditCommand]) -> Result<Workspace, ReplayError> {
    for (index, c) in cs.iter().enumerate() {
        w.apply_in_place(c).map_err(|reason| ReplayError {
            index,
            command: *c,
            reason,
        })?;
    }
    Ok(w)
}
