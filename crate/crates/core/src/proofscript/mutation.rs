//! Single-point mutations of a proof, for checking that the kernel
//! rejects proofs with a missing step or a wrong citation.

use crate::kernel::{Branch, Proof, Ref, Step, StepKind};

#[derive(Debug, Clone)]
pub struct Mutant {
    pub description: String,
    pub proof: Proof,
}

/// Address of a step: indices through nested case branches.
type Path = Vec<(usize, Option<usize>)>;

fn walk(steps: &[Step], prefix: &mut Path, out: &mut Vec<Path>) {
    for (i, step) in steps.iter().enumerate() {
        prefix.push((i, None));
        out.push(prefix.clone());
        if let StepKind::Cases { branches, .. } = &step.kind {
            for (b, branch) in branches.iter().enumerate() {
                prefix.last_mut().expect("pushed").1 = Some(b);
                walk(&branch.steps, prefix, out);
            }
        }
        prefix.pop();
    }
}

fn steps_at<'a>(proof: &'a mut Proof, path: &[(usize, Option<usize>)]) -> &'a mut Vec<Step> {
    let mut steps = &mut proof.steps;
    for &(i, branch) in &path[..path.len() - 1] {
        let b = branch.expect("inner path goes through a branch");
        match &mut steps[i].kind {
            StepKind::Cases { branches, .. } => steps = &mut branches[b].steps,
            _ => unreachable!("path goes through cases"),
        }
    }
    steps
}

fn refs_mut(proof: &mut Proof) -> Vec<&mut Ref> {
    fn in_steps<'a>(steps: &'a mut [Step], out: &mut Vec<&'a mut Ref>) {
        for step in steps {
            match &mut step.kind {
                StepKind::Rule { refs, .. } | StepKind::Construct { refs, .. } => {
                    out.extend(refs.iter_mut())
                }
                StepKind::Cases { branches, .. } => {
                    for Branch { steps, close, .. } in branches {
                        in_steps(steps, out);
                        out.extend(close.refs.iter_mut());
                    }
                }
                StepKind::Lemma { .. } => {}
            }
        }
    }
    let mut out = Vec::new();
    in_steps(&mut proof.steps, &mut out);
    out.extend(proof.qed.iter_mut());
    out
}

/// Every single-step deletion and every corruption of one cited label to
/// a name that is not bound anywhere.
pub fn mutants(proof: &Proof) -> Vec<Mutant> {
    let mut out = Vec::new();
    let mut paths = Vec::new();
    walk(&proof.steps, &mut Vec::new(), &mut paths);
    for path in paths {
        let mut p = proof.clone();
        let steps = steps_at(&mut p, &path);
        let removed = steps.remove(path.last().expect("non-empty").0);
        out.push(Mutant { description: format!("delete step {}", removed.label), proof: p });
    }
    let n = refs_mut(&mut proof.clone()).len();
    for k in 0..n {
        let mut p = proof.clone();
        let mut refs = refs_mut(&mut p);
        let r = &mut *refs[k];
        let description = match r {
            Ref::Label { name, .. } | Ref::Sym { name, .. } => {
                let d = format!("corrupt citation #{} ({name})", k + 1);
                name.push_str("_mutated");
                d
            }
            Ref::Refl => continue,
        };
        out.push(Mutant { description, proof: p });
    }
    out
}
