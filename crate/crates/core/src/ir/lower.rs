//! Branches and loops to labels and jumps.

use std::collections::BTreeSet;

use super::cfg::ControlFlowGraph;
use super::program::{walk, IrProgram, Statement};
use super::{Context, IrError};

/// Flattens every branch and loop. Branches become
///
/// ```text
/// jump_cond/jump_fproc -> true_N
/// false_N:  <false block>   jump_i -> end_N
/// true_N:   <true block>
/// end_N:
/// ```
///
/// and loops become a pre-test loop whose body runs with a rewound time
/// reference on every iteration:
///
/// ```text
/// loop_head N;  jump_cond -> loop_N_body;  jump_i -> loop_N_exit
/// loop_N_body:  <body>  loop_tail N;  jump_cond -> loop_N_body
/// loop_N_exit:
/// ```
pub fn lower_control_flow(
    prog: &IrProgram,
    _ctx: &Context,
) -> Result<(IrProgram, ControlFlowGraph), IrError> {
    let mut missing = None;
    let mut labels = BTreeSet::new();
    walk(&prog.statements, &mut |s| {
        match s {
            Statement::BranchVar { scope: None, .. }
            | Statement::BranchFproc { scope: None, .. }
            | Statement::Loop { scope: None, .. } => missing = Some(s.kind()),
            Statement::Gate { .. } | Statement::Read { .. } => missing = Some(s.kind()),
            Statement::JumpLabel { label, .. } => {
                labels.insert(label.clone());
            }
            Statement::LoopHead { loop_id, .. } => {
                labels.insert(loop_id.clone());
            }
            _ => {}
        }
    });
    if let Some(kind) = missing {
        return Err(IrError::InvalidPassOrder {
            pass: "lower_control_flow".into(),
            reason: format!("`{kind}` statements need resolved gates and scopes"),
        });
    }
    let mut l = Lowerer { labels, next: 0 };
    let mut out = Vec::new();
    l.block(&prog.statements, &mut out);
    let cfg = ControlFlowGraph::build(&out)?;
    Ok((IrProgram::new(out), cfg))
}

struct Lowerer {
    labels: BTreeSet<String>,
    next: u32,
}

impl Lowerer {
    /// Next counter value whose labels are all unused.
    fn fresh(&mut self, names: &[&str]) -> Vec<String> {
        loop {
            self.next += 1;
            let n = self.next;
            let cand: Vec<String> = names.iter().map(|p| p.replace('#', &n.to_string())).collect();
            if cand.iter().all(|c| !self.labels.contains(c)) {
                self.labels.extend(cand.iter().cloned());
                return cand;
            }
        }
    }

    fn block(&mut self, stmts: &[Statement], out: &mut Vec<Statement>) {
        for s in stmts {
            match s {
                Statement::BranchVar {
                    cond_lhs,
                    alu_cond,
                    cond_rhs,
                    true_block,
                    false_block,
                    scope,
                } => {
                    let l = self.fresh(&["true_#", "false_#", "end_#"]);
                    let jump = Statement::JumpCond {
                        cond_lhs: cond_lhs.clone(),
                        alu_cond: *alu_cond,
                        cond_rhs: cond_rhs.clone(),
                        label: l[0].clone(),
                        scope: scope.clone(),
                    };
                    self.branch(jump, &l, true_block, false_block, scope, out);
                }
                Statement::BranchFproc {
                    cond_lhs,
                    alu_cond,
                    func_id,
                    true_block,
                    false_block,
                    scope,
                } => {
                    let l = self.fresh(&["true_#", "false_#", "end_#"]);
                    let jump = Statement::JumpFproc {
                        cond_lhs: cond_lhs.clone(),
                        alu_cond: *alu_cond,
                        func_id: func_id.clone(),
                        label: l[0].clone(),
                        scope: scope.clone(),
                        wait: None,
                    };
                    self.branch(jump, &l, true_block, false_block, scope, out);
                }
                Statement::Loop {
                    cond_lhs,
                    alu_cond,
                    cond_rhs,
                    body,
                    scope,
                } => {
                    let l = self.fresh(&["loop_#", "loop_#_body", "loop_#_exit"]);
                    let cond = |label: &String| Statement::JumpCond {
                        cond_lhs: cond_lhs.clone(),
                        alu_cond: *alu_cond,
                        cond_rhs: cond_rhs.clone(),
                        label: label.clone(),
                        scope: scope.clone(),
                    };
                    out.push(Statement::LoopHead {
                        loop_id: l[0].clone(),
                        scope: scope.clone(),
                        align: None,
                    });
                    out.push(cond(&l[1]));
                    out.push(Statement::JumpI {
                        label: l[2].clone(),
                        scope: scope.clone(),
                    });
                    out.push(label(&l[1], scope));
                    self.block(body, out);
                    out.push(Statement::LoopTail {
                        loop_id: l[0].clone(),
                        scope: scope.clone(),
                        end: None,
                        period: None,
                    });
                    out.push(cond(&l[1]));
                    out.push(label(&l[2], scope));
                }
                other => out.push(other.clone()),
            }
        }
    }

    fn branch(
        &mut self,
        jump: Statement,
        l: &[String],
        true_block: &[Statement],
        false_block: &[Statement],
        scope: &Option<Vec<String>>,
        out: &mut Vec<Statement>,
    ) {
        out.push(jump);
        out.push(label(&l[1], scope));
        self.block(false_block, out);
        out.push(Statement::JumpI {
            label: l[2].clone(),
            scope: scope.clone(),
        });
        out.push(label(&l[0], scope));
        self.block(true_block, out);
        out.push(label(&l[2], scope));
    }
}

fn label(name: &str, scope: &Option<Vec<String>>) -> Statement {
    Statement::JumpLabel {
        label: name.to_string(),
        scope: scope.clone(),
    }
}
