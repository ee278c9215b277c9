//! Rooted graph transformation engine with a binary search tree program.

pub mod bst;
pub mod host;
pub mod interp;
pub mod label;
pub mod matcher;
pub mod oracle;
pub mod rule;
pub mod text;

pub use host::{EdgeId, GraphError, HostGraph, Mark, NodeId};
pub use label::{Assignment, Atom, Condition, Label, LabelPattern, VarDecl, VarKind};
pub use matcher::{apply, apply_first, find_match, AnchorOrder, Match, MatchStats};
pub use rule::{MarkPat, PatternEdge, PatternGraph, PatternNode, Rule, RuleDef, RuleError};
pub use interp::{Command, ExecConfig, ExecError, ExecStats, ExecStatus, Observer, Program, ProgramError, Trace};
pub use text::{build_instruction_graph, parse_host, parse_opscript, parse_program, parse_rule, print_host, Op, OpKind, OpScript, TextError};
pub use bst::{
    extract_tree, oracle_mismatch, program, run_bst, run_bst_with, run_program, validate_output, BstRunResult, BstSession, BstVariant, KeyTree,
    MalformedTree, ValidationReport,
};
pub use oracle::{check_constraints, gen_workload, o_apply, Constraints, OracleTree, WorkloadError};
