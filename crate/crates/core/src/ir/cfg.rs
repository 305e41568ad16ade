//! Control-flow graph of a lowered statement list.

use std::collections::BTreeMap;

use serde::Serialize;

use super::cores::CoreMap;
use super::program::Statement;
use super::IrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Conditional jump taken.
    Taken,
    /// Conditional jump not taken; the `jump_i` right after it.
    NotTaken,
    /// Unconditional `jump_i`.
    Jump,
    /// Falling into the next block.
    Fallthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasicBlock {
    /// `jump_label` target, or `b<index>`.
    pub label: String,
    /// Indices into the statement list the graph was built from.
    pub stmts: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ControlFlowGraph {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
}

fn is_cond(s: &Statement) -> bool {
    matches!(s, Statement::JumpCond { .. } | Statement::JumpFproc { .. })
}

fn jump_target(s: &Statement) -> Option<&str> {
    match s {
        Statement::JumpI { label, .. }
        | Statement::JumpCond { label, .. }
        | Statement::JumpFproc { label, .. } => Some(label),
        _ => None,
    }
}

impl ControlFlowGraph {
    /// Graph of a flat statement list. High-level branches and loops are
    /// treated as ordinary statements.
    pub fn build(stmts: &[Statement]) -> Result<Self, IrError> {
        Self::build_indexed(stmts.iter().enumerate().collect())
    }

    /// Graph of the statements core `core` executes.
    pub fn project(stmts: &[Statement], core: usize, cores: &CoreMap) -> Result<Self, IrError> {
        let mut items = Vec::new();
        for (i, s) in stmts.iter().enumerate() {
            if stmt_cores(s, cores)?.contains(&core) {
                items.push((i, s));
            }
        }
        Self::build_indexed(items)
    }

    fn build_indexed(items: Vec<(usize, &Statement)>) -> Result<Self, IrError> {
        let mut blocks: Vec<BasicBlock> = Vec::new();
        let mut labels = BTreeMap::new();
        let mut prev: Option<&Statement> = None;
        for &(i, s) in &items {
            let after_jump = match prev {
                Some(Statement::JumpI { .. }) => true,
                // A jump_i right after a conditional jump completes a
                // two-way terminator.
                Some(p) if is_cond(p) => !matches!(s, Statement::JumpI { .. }),
                _ => false,
            };
            let is_label = matches!(s, Statement::JumpLabel { .. });
            if blocks.is_empty() || is_label || after_jump {
                let label = match s {
                    Statement::JumpLabel { label, .. } => label.clone(),
                    _ => format!("b{}", blocks.len()),
                };
                blocks.push(BasicBlock {
                    label,
                    stmts: Vec::new(),
                });
            }
            if let Statement::JumpLabel { label, .. } = s {
                if labels.insert(label.clone(), blocks.len() - 1).is_some() {
                    return Err(IrError::DuplicateLabel(label.clone()));
                }
            }
            blocks.last_mut().expect("block exists").stmts.push(i);
            prev = Some(s);
        }

        let by_index: BTreeMap<usize, &Statement> = items.iter().copied().collect();
        let target = |l: &str| {
            labels
                .get(l)
                .copied()
                .ok_or_else(|| IrError::UndefinedLabel(l.to_string()))
        };
        let mut edges = Vec::new();
        for (b, block) in blocks.iter().enumerate() {
            let n = block.stmts.len();
            let last = by_index[&block.stmts[n - 1]];
            let before = (n >= 2).then(|| by_index[&block.stmts[n - 2]]);
            let next = (b + 1 < blocks.len()).then_some(b + 1);
            match last {
                Statement::JumpI { label, .. } => match before {
                    Some(c) if is_cond(c) => {
                        let t = target(jump_target(c).expect("conditional jump"))?;
                        edges.push(Edge { from: b, to: t, kind: EdgeKind::Taken });
                        edges.push(Edge { from: b, to: target(label)?, kind: EdgeKind::NotTaken });
                    }
                    _ => edges.push(Edge { from: b, to: target(label)?, kind: EdgeKind::Jump }),
                },
                s if is_cond(s) => {
                    let t = target(jump_target(s).expect("conditional jump"))?;
                    edges.push(Edge { from: b, to: t, kind: EdgeKind::Taken });
                    if let Some(nx) = next {
                        edges.push(Edge { from: b, to: nx, kind: EdgeKind::Fallthrough });
                    }
                }
                _ => {
                    if let Some(nx) = next {
                        edges.push(Edge { from: b, to: nx, kind: EdgeKind::Fallthrough });
                    }
                }
            }
        }
        Ok(Self { blocks, edges })
    }

    pub fn block_of_label(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Block containing statement `index`.
    pub fn block_of(&self, index: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.stmts.contains(&index))
    }

    pub fn successors(&self, block: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == block)
    }

    pub fn predecessors(&self, block: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == block)
    }

    /// An edge to a block at or before its source in layout order.
    pub fn is_back_edge(&self, e: &Edge) -> bool {
        e.to <= e.from
    }

    /// Blocks reachable from the entry.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![0];
        while let Some(b) = stack.pop() {
            if b >= seen.len() || seen[b] {
                continue;
            }
            seen[b] = true;
            stack.extend(self.successors(b).map(|e| e.to));
        }
        seen
    }
}

/// Cores that execute a statement after scoping.
pub(crate) fn stmt_cores(s: &Statement, cores: &CoreMap) -> Result<super::CoreSet, IrError> {
    match s {
        Statement::Pulse(p) => Ok(super::CoreSet::from([cores.core_of(&p.dest)?])),
        _ => match s.scope() {
            Some(sc) => cores.resolve(sc),
            None => Ok(super::CoreSet::new()),
        },
    }
}
