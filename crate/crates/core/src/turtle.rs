//! Turtle block language: block ids, statements, workspaces and the
//! interpretation function that turns a workspace into a drawn trajectory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hausdorff;

/// Clockwise turn angle in degrees, a nonzero multiple of 30 below 360.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Angle(u16);

impl Angle {
    pub const DEFAULT: Angle = Angle(30);

    pub fn new(degrees: u16) -> Option<Angle> {
        (degrees > 0 && degrees < 360 && degrees.is_multiple_of(30)).then_some(Angle(degrees))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    /// All eleven legal angles, ascending.
    pub fn all() -> impl Iterator<Item = Angle> {
        (1..12).map(|k| Angle(k * 30))
    }
}

impl TryFrom<u16> for Angle {
    type Error = String;

    fn try_from(v: u16) -> Result<Self, Self::Error> {
        Angle::new(v).ok_or_else(|| format!("invalid turn angle {v}"))
    }
}

impl From<Angle> for u16 {
    fn from(a: Angle) -> u16 {
        a.0
    }
}

/// Iteration count of a repeat block, 2 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct RepeatCount(u16);

impl RepeatCount {
    pub const DEFAULT: RepeatCount = RepeatCount(2);

    pub fn new(n: u16) -> Option<RepeatCount> {
        (2..=5).contains(&n).then_some(RepeatCount(n))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = RepeatCount> {
        (2..=5).map(RepeatCount)
    }
}

impl TryFrom<u16> for RepeatCount {
    type Error = String;

    fn try_from(v: u16) -> Result<Self, Self::Error> {
        RepeatCount::new(v).ok_or_else(|| format!("invalid repeat count {v}"))
    }
}

impl From<RepeatCount> for u16 {
    fn from(n: RepeatCount) -> u16 {
        n.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The three block types a `get` command can create.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockType {
    Move,
    Turn,
    Repeat,
}

impl BlockType {
    pub const ALL: [BlockType; 3] = [BlockType::Move, BlockType::Turn, BlockType::Repeat];

    pub fn name(self) -> &'static str {
        match self {
            BlockType::Move => "move",
            BlockType::Turn => "turn",
            BlockType::Repeat => "repeat",
        }
    }
}

/// A block's type together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Move,
    Turn(Angle),
    Repeat(RepeatCount),
}

impl BlockKind {
    pub fn default_for(ty: BlockType) -> BlockKind {
        match ty {
            BlockType::Move => BlockKind::Move,
            BlockType::Turn => BlockKind::Turn(Angle::DEFAULT),
            BlockType::Repeat => BlockKind::Repeat(RepeatCount::DEFAULT),
        }
    }

    pub fn block_type(self) -> BlockType {
        match self {
            BlockKind::Move => BlockType::Move,
            BlockKind::Turn(_) => BlockType::Turn,
            BlockKind::Repeat(_) => BlockType::Repeat,
        }
    }

    /// Current parameter value, if the block has one.
    pub fn param(self) -> Option<u16> {
        match self {
            BlockKind::Move => None,
            BlockKind::Turn(a) => Some(a.degrees()),
            BlockKind::Repeat(n) => Some(n.get()),
        }
    }

    /// Every legal value for this block's parameter, ascending.
    pub fn param_domain(self) -> Vec<u16> {
        match self {
            BlockKind::Move => Vec::new(),
            BlockKind::Turn(_) => Angle::all().map(u16::from).collect(),
            BlockKind::Repeat(_) => RepeatCount::all().map(u16::from).collect(),
        }
    }

    pub fn with_param(self, value: u16) -> Option<BlockKind> {
        match self {
            BlockKind::Move => None,
            BlockKind::Turn(_) => Angle::new(value).map(BlockKind::Turn),
            BlockKind::Repeat(_) => RepeatCount::new(value).map(BlockKind::Repeat),
        }
    }
}

/// Where a block is attached when it is not a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Attachment {
    /// Vertical child of the given block.
    Under(BlockId),
    /// First block of the given repeat's body.
    Inside(BlockId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Block {
    pub(crate) kind: BlockKind,
    pub(crate) next: Option<BlockId>,
    pub(crate) body: Option<BlockId>,
    pub(crate) parent: Option<Attachment>,
}

/// Tree form of a program, without block ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Statement {
    Move,
    Turn { angle: Angle },
    Repeat { count: RepeatCount, body: Vec<Statement> },
}

/// Structural listing of one block with its id, used by the service and the
/// Python bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockView {
    pub id: BlockId,
    #[serde(rename = "type")]
    pub block_type: BlockType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<u16>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub body: Vec<BlockView>,
}

/// The editor state: an ordered list of root chains plus the id counter.
///
/// Blocks live in an arena keyed by id. Each block knows its vertical child
/// (`next`), the first block of its body when it is a repeat, and where it is
/// attached itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    pub(crate) blocks: BTreeMap<BlockId, Block>,
    pub(crate) roots: Vec<BlockId>,
    pub(crate) next_id: u32,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace::new()
    }
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace {
            blocks: BTreeMap::new(),
            roots: Vec::new(),
            next_id: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn next_id(&self) -> BlockId {
        BlockId(self.next_id)
    }

    pub fn roots(&self) -> &[BlockId] {
        &self.roots
    }

    /// Live block ids, ascending.
    pub fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks.keys().copied()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn kind(&self, id: BlockId) -> Option<BlockKind> {
        self.blocks.get(&id).map(|b| b.kind)
    }

    pub fn is_root(&self, id: BlockId) -> bool {
        self.blocks.get(&id).is_some_and(|b| b.parent.is_none())
    }

    pub(crate) fn block(&self, id: BlockId) -> &Block {
        &self.blocks[&id]
    }

    pub(crate) fn block_mut(&mut self, id: BlockId) -> &mut Block {
        self.blocks.get_mut(&id).expect("live block id")
    }

    /// The vertical chain starting at `id`, in order.
    pub fn chain(&self, id: BlockId) -> Vec<BlockId> {
        let mut out = vec![id];
        let mut cur = self.block(id).next;
        while let Some(n) = cur {
            out.push(n);
            cur = self.block(n).next;
        }
        out
    }

    /// Ids that move together with `id`: its vertical chain and every nested
    /// body below any of those blocks.
    pub fn subtree(&self, id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            let b = self.block(cur);
            if let Some(n) = b.next {
                stack.push(n);
            }
            if let Some(first) = b.body {
                stack.push(first);
            }
        }
        out
    }

    /// The `n` most recently created live blocks, newest first.
    pub fn most_recent(&self, n: usize) -> Vec<BlockId> {
        self.blocks.keys().rev().take(n).copied().collect()
    }

    /// Program trees for each root chain, in workspace order.
    pub fn programs(&self) -> Vec<Vec<Statement>> {
        self.roots.iter().map(|&r| self.chain_statements(Some(r))).collect()
    }

    fn chain_statements(&self, first: Option<BlockId>) -> Vec<Statement> {
        let mut out = Vec::new();
        let mut cur = first;
        while let Some(id) = cur {
            let b = self.block(id);
            out.push(match b.kind {
                BlockKind::Move => Statement::Move,
                BlockKind::Turn(angle) => Statement::Turn { angle },
                BlockKind::Repeat(count) => Statement::Repeat {
                    count,
                    body: self.chain_statements(b.body),
                },
            });
            cur = b.next;
        }
        out
    }

    /// Root chains with ids attached, for display.
    pub fn view(&self) -> Vec<Vec<BlockView>> {
        self.roots.iter().map(|&r| self.chain_view(Some(r))).collect()
    }

    fn chain_view(&self, first: Option<BlockId>) -> Vec<BlockView> {
        let mut out = Vec::new();
        let mut cur = first;
        while let Some(id) = cur {
            let b = self.block(id);
            out.push(BlockView {
                id,
                block_type: b.kind.block_type(),
                value: b.kind.param(),
                body: self.chain_view(b.body),
            });
            cur = b.next;
        }
        out
    }

    /// Whether two workspaces hold the same blocks in the same arrangement.
    /// The id counter is ignored.
    pub fn same_structure(&self, other: &Workspace) -> bool {
        self.roots == other.roots && self.blocks == other.blocks
    }

    /// Hash of the structure compared by [`Workspace::same_structure`].
    pub fn structure_hash(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        self.roots.hash(&mut h);
        for (id, b) in &self.blocks {
            id.hash(&mut h);
            b.hash(&mut h);
        }
        h.finish()
    }

    /// Checks every structural invariant; used by tests and after replays.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        let mut stack: Vec<(BlockId, Option<Attachment>)> = self.roots.iter().map(|&r| (r, None)).collect();
        while let Some((id, expected_parent)) = stack.pop() {
            let b = self
                .blocks
                .get(&id)
                .ok_or_else(|| format!("dangling reference to block {id}"))?;
            if !seen.insert(id) {
                return Err(format!("block {id} reachable twice"));
            }
            if b.parent != expected_parent {
                return Err(format!("block {id} has wrong parent link"));
            }
            if id.0 >= self.next_id {
                return Err(format!("block {id} not below next_id {}", self.next_id));
            }
            if let Some(n) = b.next {
                stack.push((n, Some(Attachment::Under(id))));
            }
            if let Some(first) = b.body {
                if !matches!(b.kind, BlockKind::Repeat(_)) {
                    return Err(format!("non-repeat block {id} has a body"));
                }
                stack.push((first, Some(Attachment::Inside(id))));
            }
        }
        if seen.len() != self.blocks.len() {
            return Err("unreachable blocks in arena".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Point {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> [f64; 2] {
        [p.x, p.y]
    }
}

/// Move length and sampling step used when interpreting a workspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub move_length: f64,
    pub sample_step: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            move_length: 50.0,
            sample_step: 5.0,
        }
    }
}

impl RenderConfig {
    /// Tolerance used for semantic equality.
    pub fn equality_tolerance(&self) -> f64 {
        1e-6 * self.move_length
    }
}

/// Turtle position and heading. Heading is in degrees clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurtlePose {
    pub x: f64,
    pub y: f64,
    pub heading: u16,
}

impl Default for TurtlePose {
    fn default() -> Self {
        TurtlePose {
            x: 0.0,
            y: 0.0,
            heading: 0,
        }
    }
}

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

/// Unit direction for each heading that is a multiple of 30 degrees, with
/// north = +y and clockwise rotation.
const DIRECTIONS: [(f64, f64); 12] = [
    (0.0, 1.0),
    (0.5, HALF_SQRT3),
    (HALF_SQRT3, 0.5),
    (1.0, 0.0),
    (HALF_SQRT3, -0.5),
    (0.5, -HALF_SQRT3),
    (0.0, -1.0),
    (-0.5, -HALF_SQRT3),
    (-HALF_SQRT3, -0.5),
    (-1.0, 0.0),
    (-HALF_SQRT3, 0.5),
    (-0.5, HALF_SQRT3),
];

/// The drawn output of a workspace or a user's stroke: an ordered point
/// sequence. Hausdorff comparisons treat it as a set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn new(points: Vec<Point>) -> Trajectory {
        Trajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct points in first-seen order. Points closer than about 1e-9
    /// are merged.
    pub fn distinct_points(&self) -> Vec<Point> {
        let mut seen = HashSet::with_capacity(self.points.len());
        self.points
            .iter()
            .copied()
            .filter(|p| seen.insert(((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)))
            .collect()
    }

    /// Translate so the first point sits at the origin.
    pub fn registered(&self) -> Trajectory {
        let Some(&first) = self.points.first() else {
            return self.clone();
        };
        Trajectory::new(
            self.points
                .iter()
                .map(|p| Point::new(p.x - first.x, p.y - first.y))
                .collect(),
        )
    }

    /// Insert evenly spaced points so consecutive points are at most `step`
    /// apart, treating the sequence as a polyline.
    pub fn densified(&self, step: f64) -> Trajectory {
        let mut out = Vec::with_capacity(self.points.len());
        for (i, &p) in self.points.iter().enumerate() {
            if i > 0 {
                let prev = self.points[i - 1];
                let len = prev.dist(p);
                if len > step * (1.0 + 1e-9) {
                    let pieces = (len / step).ceil() as usize;
                    for k in 1..pieces {
                        let t = k as f64 / pieces as f64;
                        out.push(Point::new(prev.x + (p.x - prev.x) * t, prev.y + (p.y - prev.y) * t));
                    }
                }
            }
            out.push(p);
        }
        Trajectory::new(out)
    }
}

struct Pen<'a> {
    cfg: &'a RenderConfig,
    pose: TurtlePose,
    points: Vec<Point>,
}

impl Pen<'_> {
    fn forward(&mut self) {
        let (dx, dy) = DIRECTIONS[(self.pose.heading / 30) as usize];
        let (sx, sy) = (self.pose.x, self.pose.y);
        let len = self.cfg.move_length;
        let step = self.cfg.sample_step;
        let pieces = ((len / step) - 1e-9).ceil().max(1.0) as usize;
        for i in 1..pieces {
            let s = step * i as f64;
            self.points.push(Point::new(sx + dx * s, sy + dy * s));
        }
        self.pose.x = sx + dx * len;
        self.pose.y = sy + dy * len;
        self.points.push(Point::new(self.pose.x, self.pose.y));
    }

    fn turn(&mut self, angle: Angle) {
        self.pose.heading = (self.pose.heading + angle.degrees()) % 360;
    }

    fn run_chain(&mut self, ws: &Workspace, first: Option<BlockId>) {
        let mut cur = first;
        while let Some(id) = cur {
            let b = ws.block(id);
            match b.kind {
                BlockKind::Move => self.forward(),
                BlockKind::Turn(a) => self.turn(a),
                BlockKind::Repeat(n) => {
                    for _ in 0..n.get() {
                        self.run_chain(ws, b.body);
                    }
                }
            }
            cur = b.next;
        }
    }

    fn run_statements(&mut self, stmts: &[Statement]) {
        for s in stmts {
            match s {
                Statement::Move => self.forward(),
                Statement::Turn { angle } => self.turn(*angle),
                Statement::Repeat { count, body } => {
                    for _ in 0..count.get() {
                        self.run_statements(body);
                    }
                }
            }
        }
    }
}

/// Run every root chain in list order with one turtle that starts at the
/// origin facing north. The result starts with the origin, followed by the
/// points sampled every `sample_step` along each drawn segment.
pub fn interpret(ws: &Workspace, cfg: &RenderConfig) -> Trajectory {
    let mut pen = Pen {
        cfg,
        pose: TurtlePose::default(),
        points: vec![Point::ORIGIN],
    };
    for &root in &ws.roots {
        pen.run_chain(ws, Some(root));
    }
    Trajectory::new(pen.points)
}

/// Interpret a bare statement list (no ids) the same way as a single root.
pub fn interpret_statements(stmts: &[Statement], cfg: &RenderConfig) -> Trajectory {
    let mut pen = Pen {
        cfg,
        pose: TurtlePose::default(),
        points: vec![Point::ORIGIN],
    };
    pen.run_statements(stmts);
    Trajectory::new(pen.points)
}

/// Final turtle pose after running the workspace.
pub fn final_pose(ws: &Workspace, cfg: &RenderConfig) -> TurtlePose {
    let mut pen = Pen {
        cfg,
        pose: TurtlePose::default(),
        points: Vec::new(),
    };
    for &root in &ws.roots {
        pen.run_chain(ws, Some(root));
    }
    pen.pose
}

/// Whether two workspaces draw the same point set, up to
/// [`RenderConfig::equality_tolerance`] in Hausdorff distance.
pub fn semantically_equal(p: &Workspace, q: &Workspace, cfg: &RenderConfig) -> bool {
    semantically_equal_within(p, q, cfg, cfg.equality_tolerance())
}

pub fn semantically_equal_within(p: &Workspace, q: &Workspace, cfg: &RenderConfig, tol: f64) -> bool {
    let a = interpret(p, cfg).distinct_points();
    let b = interpret(q, cfg).distinct_points();
    // both sets contain the origin, so neither is empty
    hausdorff::hausdorff(&a, &b).expect("non-empty trajectories") <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stmts_ws(stmts: &[Statement]) -> Trajectory {
        interpret_statements(stmts, &RenderConfig::default())
    }

    #[test]
    fn angle_domain() {
        assert!(Angle::new(0).is_none());
        assert!(Angle::new(360).is_none());
        assert!(Angle::new(45).is_none());
        assert_eq!(Angle::all().count(), 11);
        assert_eq!(RepeatCount::all().count(), 4);
        assert!(RepeatCount::new(1).is_none());
        assert!(RepeatCount::new(6).is_none());
    }

    #[test]
    fn empty_workspace_is_origin_only() {
        let t = interpret(&Workspace::new(), &RenderConfig::default());
        assert_eq!(t.points, vec![Point::ORIGIN]);
    }

    #[test]
    fn single_move_samples_every_step() {
        let t = stmts_ws(&[Statement::Move]);
        assert_eq!(t.len(), 11);
        for (i, p) in t.points.iter().enumerate() {
            assert_eq!(p.x, 0.0);
            assert!((p.y - 5.0 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn square_closes() {
        let sq = [Statement::Repeat {
            count: RepeatCount::new(4).unwrap(),
            body: vec![
                Statement::Move,
                Statement::Turn {
                    angle: Angle::new(90).unwrap(),
                },
            ],
        }];
        let t = stmts_ws(&sq);
        let last = *t.points.last().unwrap();
        assert!(last.x.abs() < 1e-9 && last.y.abs() < 1e-9);
        assert_eq!(t.distinct_points().len(), 40);
    }

    #[test]
    fn turns_only_draw_origin() {
        let t = stmts_ws(&[
            Statement::Turn {
                angle: Angle::new(90).unwrap(),
            },
            Statement::Repeat {
                count: RepeatCount::new(3).unwrap(),
                body: vec![],
            },
        ]);
        assert_eq!(t.points, vec![Point::ORIGIN]);
    }

    #[test]
    fn clockwise_from_north() {
        let t = stmts_ws(&[
            Statement::Turn {
                angle: Angle::new(90).unwrap(),
            },
            Statement::Move,
        ]);
        let last = *t.points.last().unwrap();
        assert!((last.x - 50.0).abs() < 1e-12 && last.y.abs() < 1e-12);
    }

    #[test]
    fn densify_and_register() {
        let t = Trajectory::new(vec![Point::new(10.0, 10.0), Point::new(10.0, 30.0)]);
        let r = t.registered();
        assert_eq!(r.points[0], Point::ORIGIN);
        let d = r.densified(5.0);
        assert_eq!(d.len(), 5);
        assert!((d.points[2].y - 10.0).abs() < 1e-12);
        // already dense: unchanged
        assert_eq!(d.densified(5.0), d);
    }
}
