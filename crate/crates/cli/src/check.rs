//! Seeded comparison of a tree program against the reference implementation.

use rootbst_core::{check_constraints, oracle_mismatch, run_program, Constraints, ExecConfig, OpScript, Program};

/// Why `ops` exposes a difference, if it does.
pub fn disagreement(p: &Program, ops: &OpScript, cfg: &ExecConfig) -> Option<String> {
    match run_program(p, ops, cfg, false) {
        Ok(r) => oracle_mismatch(&r, ops),
        Err(e) => Some(e.to_string()),
    }
}

/// Shrinks a failing script by dropping runs of ops while it still fails and
/// still obeys `constraints`.
pub fn minimize(p: &Program, ops: &OpScript, constraints: Constraints, cfg: &ExecConfig) -> OpScript {
    let mut cur = ops.0.clone();
    let mut chunk = (cur.len() / 2).max(1);
    loop {
        let mut shrunk = false;
        let mut start = 0;
        while start < cur.len() {
            let end = (start + chunk).min(cur.len());
            let mut cand = cur[..start].to_vec();
            cand.extend_from_slice(&cur[end..]);
            let cand = OpScript(cand);
            if check_constraints(&cand, constraints).is_ok() && disagreement(p, &cand, cfg).is_some() {
                cur = cand.0;
                shrunk = true;
            } else {
                start += chunk;
            }
        }
        if !shrunk {
            if chunk == 1 {
                break;
            }
            chunk /= 2;
        }
    }
    OpScript(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rootbst_core::{parse_opscript, parse_program, program, BstVariant};

    #[test]
    fn shrinks_to_a_minimal_failing_script() {
        let source = BstVariant::Sanitized.source().replace("try match; unroot!", "unroot!");
        let blind = parse_program(&source).unwrap();
        let ops = parse_opscript("i 4\ni 9\ni 2\ns 7\nd 9\ni 1\ns 2\ni 3").unwrap();
        let cfg = ExecConfig::default();
        assert!(disagreement(&blind, &ops, &cfg).is_some());
        let small = minimize(&blind, &ops, Constraints::SanitizedSafe, &cfg);
        assert_eq!(small.to_string(), "i 2\ns 2\n");
        assert!(disagreement(program(BstVariant::Sanitized), &ops, &cfg).is_none());
    }
}
