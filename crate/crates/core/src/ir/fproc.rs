//! Named FPROC channels to function ids and readiness constraints.

use super::program::{walk, walk_mut, FprocWait, FuncRef, IrProgram, Statement};
use super::{Context, IrError};

pub fn resolve_fproc(prog: &IrProgram, ctx: &Context) -> Result<IrProgram, Vec<IrError>> {
    let mut lowered = true;
    walk(&prog.statements, &mut |s| {
        if matches!(s, Statement::BranchFproc { .. }) {
            lowered = false;
        }
    });
    if !lowered {
        return Err(vec![IrError::InvalidPassOrder {
            pass: "resolve_fproc".into(),
            reason: "branch_fproc must be lowered first".into(),
        }]);
    }
    ctx.fproc.validate().map_err(|e| vec![e])?;
    let clock = ctx.clock_hz();
    let mut errors = Vec::new();
    let mut out = prog.clone();
    walk_mut(&mut out.statements, &mut |s| {
        let Statement::JumpFproc { func_id, wait, .. } = s else {
            return;
        };
        let name = match func_id {
            FuncRef::Name(n) => {
                if !ctx.fproc.channels.contains_key(n) {
                    errors.push(IrError::UnknownFprocChannel(n.clone()));
                    return;
                }
                n.clone()
            }
            FuncRef::Id(id) => {
                match ctx.fproc.channels.iter().find(|(_, c)| c.func_id == *id) {
                    Some((n, _)) => n.clone(),
                    // A raw id outside the map has no timing constraint.
                    None => return,
                }
            }
        };
        *func_id = FuncRef::Id(ctx.fproc.channels[&name].func_id);
        if wait.is_none() {
            *wait = Some(FprocWait {
                channel: ctx.fproc.channel(&name),
                delay_cycles: ctx.fproc.delay_cycles(&name, clock),
                until: None,
            });
        }
    });
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}
