//! Timing and counting single tree operations on degenerate and perfect
//! trees, and summarising how they scale.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rootbst_core::bst::{BstSession, BstVariant, OpRun, PreloadError};
use rootbst_core::{ExecError, MatchStats, Op, OpScript};

/// Repetitions per measured operation unless overridden.
pub const DEFAULT_REPS: usize = 300;

pub const CSV_HEADER: &str = "shape,n,op,reps,mean_ns,stddev_ns,rule_apps,anchors_tried";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    /// Ascending inserts: every node is a right child.
    Degenerate,
    /// A perfect tree, all leaves at the same depth.
    Balanced,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Degenerate => "degenerate",
            Shape::Balanced => "balanced",
        }
    }

    /// Operations measured on this shape.
    pub fn ops(self) -> &'static [BenchOp] {
        match self {
            Shape::Degenerate => &[BenchOp::Insert, BenchOp::Search, BenchOp::Delete],
            Shape::Balanced => &[BenchOp::Triple],
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "degenerate" => Ok(Shape::Degenerate),
            "balanced" => Ok(Shape::Balanced),
            _ => Err(format!("unknown shape `{s}` (expected degenerate or balanced)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchOp {
    Insert,
    Search,
    Delete,
    /// Insert a fresh leaf key, search for it, then delete it.
    Triple,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Insert => "insert",
            BenchOp::Search => "search",
            BenchOp::Delete => "delete",
            BenchOp::Triple => "triple",
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inserts of `1..=n` in ascending order.
pub fn gen_degenerate(n: usize) -> OpScript {
    OpScript((1..=n as i64).map(Op::insert).collect())
}

/// Keys of the perfect tree of height `h` over `1..2^h`, level by level
/// from the top.
pub fn balanced_keys(h: u32) -> Vec<i64> {
    let mut keys = Vec::with_capacity((1usize << h) - 1);
    for level in 0..h {
        let step = 1i64 << (h - level);
        let first = 1i64 << (h - level - 1);
        keys.extend((0..1i64 << level).map(|k| first + k * step));
    }
    keys
}

pub fn gen_balanced(h: u32) -> OpScript {
    OpScript(balanced_keys(h).into_iter().map(Op::insert).collect())
}

/// A tree to measure on: `n` nodes for a degenerate tree, height `h` for a
/// balanced one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Workload {
    pub shape: Shape,
    pub param: usize,
}

impl Workload {
    /// Number of tree nodes.
    pub fn size(self) -> usize {
        match self.shape {
            Shape::Degenerate => self.param,
            Shape::Balanced => (1usize << self.param) - 1,
        }
    }

    pub fn prefix(self) -> OpScript {
        match self.shape {
            Shape::Degenerate => gen_degenerate(self.param),
            Shape::Balanced => gen_balanced(self.param as u32),
        }
    }

    /// The operations timed together for `op`.
    pub fn measured_ops(self, op: BenchOp) -> Vec<Op> {
        let n = self.size() as i64;
        match op {
            // the deepest key, or one below it
            BenchOp::Insert => vec![Op::insert(n + 1)],
            BenchOp::Search => vec![Op::search(n)],
            BenchOp::Delete => vec![Op::delete(n)],
            // key 0 hangs below the leftmost, deepest leaf
            BenchOp::Triple => vec![Op::insert(0), Op::search(0), Op::delete(0)],
        }
    }
}

/// Counters for one measured operation, identical in every repetition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub rule_apps: u64,
    /// Applications of the four traversal rules.
    pub go_apps: u64,
    pub anchors_tried: u64,
    pub extension_steps: u64,
    pub match_calls: u64,
    pub max_anchors_per_call: u64,
    pub max_steps_per_call: u64,
}

impl OpCounters {
    /// Adds the counters of one run of the resumed program.
    pub fn add(&mut self, run: &OpRun, variant: BstVariant) {
        let m: &MatchStats = &run.stats.matching;
        let p = rootbst_core::bst::resume_program(variant);
        self.rule_apps += m.applications;
        self.go_apps += p
            .rules()
            .iter()
            .zip(&run.stats.per_rule)
            .filter(|(r, _)| r.name().starts_with("go_"))
            .map(|(_, &c)| c)
            .sum::<u64>();
        self.anchors_tried += m.anchors_tried;
        self.extension_steps += m.extension_steps;
        self.match_calls += m.match_calls;
        self.max_anchors_per_call = self.max_anchors_per_call.max(m.max_anchors_per_call);
        self.max_steps_per_call = self.max_steps_per_call.max(m.max_steps_per_call);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub shape: Shape,
    /// Tree size before the operation.
    pub n: usize,
    pub op: BenchOp,
    pub reps: usize,
    pub mean_ns: f64,
    pub stddev_ns: f64,
    pub rule_apps: u64,
    pub anchors_tried: u64,
    pub counters: OpCounters,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.1},{:.1},{},{}",
            self.shape, self.n, self.op, self.reps, self.mean_ns, self.stddev_ns, self.rule_apps, self.anchors_tried
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("need at least one repetition")]
    NoReps,
    #[error("tree size must be at least 1")]
    EmptyTree,
    #[error("height {0} is too large")]
    TooTall(usize),
    #[error(transparent)]
    Preload(#[from] PreloadError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("{0} did not succeed")]
    Failed(String),
    #[error("counters differ between repetitions of {0}")]
    Nondeterministic(String),
    #[error("{series}: need at least 4 sizes, got {got}")]
    TooFewSizes { series: String, got: usize },
    #[error("{series}: sizes are not a geometric progression")]
    NotGeometric { series: String },
}

/// The tree for `w`, built directly.
pub fn prepare(w: Workload, variant: BstVariant) -> Result<BstSession, BenchError> {
    if w.param == 0 {
        return Err(BenchError::EmptyTree);
    }
    if w.shape == Shape::Balanced && w.param > 24 {
        return Err(BenchError::TooTall(w.param));
    }
    let keys: Vec<i64> = w.prefix().0.iter().map(|op| op.key).collect();
    Ok(BstSession::preload(variant, &keys)?)
}

/// Runs `op` once on a copy of `base`, returning elapsed nanoseconds and
/// counters. The copy is made, and given spare capacity, before the clock
/// starts.
pub fn run_once(
    base: &BstSession,
    w: Workload,
    op: BenchOp,
) -> Result<(u128, OpCounters, BstSession), BenchError> {
    let mut s = base.clone();
    let ops = w.measured_ops(op);
    s.reserve(ops.len());
    let mut runs = Vec::with_capacity(ops.len());
    let start = Instant::now();
    for &o in &ops {
        runs.push(s.apply(o)?);
    }
    let elapsed = start.elapsed().as_nanos();
    let mut c = OpCounters::default();
    for r in &runs {
        if r.status != rootbst_core::ExecStatus::Success {
            return Err(BenchError::Failed(format!("{} on {} n={}", op, w.shape, w.size())));
        }
        c.add(r, base.variant());
    }
    Ok((elapsed, c, s))
}

fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Times `op` on `w` over `reps` fresh copies of the tree.
pub fn measure_op(base: &BstSession, w: Workload, op: BenchOp, reps: usize) -> Result<BenchRow, BenchError> {
    if reps == 0 {
        return Err(BenchError::NoReps);
    }
    let mut times = Vec::with_capacity(reps);
    let mut counters: Option<OpCounters> = None;
    for _ in 0..reps {
        let (t, c, _) = run_once(base, w, op)?;
        times.push(t as f64);
        match &counters {
            None => counters = Some(c),
            Some(prev) if *prev != c => {
                return Err(BenchError::Nondeterministic(format!("{} n={} {}", w.shape, w.size(), op)));
            }
            Some(_) => {}
        }
    }
    let counters = counters.expect("reps > 0");
    let (mean_ns, stddev_ns) = mean_stddev(&times);
    Ok(BenchRow {
        shape: w.shape,
        n: w.size(),
        op,
        reps,
        mean_ns,
        stddev_ns,
        rule_apps: counters.rule_apps,
        anchors_tried: counters.anchors_tried,
        counters,
    })
}

/// One row per size and measured operation. `params` are node counts for
/// degenerate trees and heights for balanced ones.
pub fn measure(shape: Shape, params: &[usize], reps: usize, variant: BstVariant) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for &param in params {
        let w = Workload { shape, param };
        let base = prepare(w, variant)?;
        for &op in shape.ops() {
            rows.push(measure_op(&base, w, op, reps)?);
        }
    }
    Ok(rows)
}

/// A pass/fail finding in a [`ScalingReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Growth figures for one (shape, op) series.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub shape: Shape,
    pub op: BenchOp,
    pub sizes: Vec<usize>,
    /// Growth factor per doubling of `n`, geometric mean over the series.
    pub time_doubling: f64,
    pub apps_doubling: f64,
    /// Coefficient of determination of a straight-line fit of rule
    /// applications against `n`.
    pub apps_linear_r2: f64,
    /// Largest change in rule applications between consecutive sizes.
    pub max_apps_step: i64,
    /// Mean time at the largest size over mean time at the smallest.
    pub time_span_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
}

impl ScalingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.series {
            writeln!(
                f,
                "{} {}: sizes {:?}, time x{:.2} per doubling, rule_apps x{:.3} per doubling, linear R2 {:.5}, \
                 largest rule_apps step {}, time span ratio {:.2}",
                s.shape, s.op, s.sizes, s.time_doubling, s.apps_doubling, s.apps_linear_r2, s.max_apps_step,
                s.time_span_ratio
            )?;
        }
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Geometric-mean growth per doubling between the first and last points.
pub fn doubling_ratio(n0: usize, y0: f64, n1: usize, y1: f64) -> f64 {
    let doublings = (n1 as f64 / n0 as f64).log2();
    (y1 / y0).powf(1.0 / doublings)
}

/// R² of the least-squares line through `(x, y)`.
pub fn linear_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

fn is_geometric(sizes: &[usize], shape: Shape) -> bool {
    match shape {
        // node counts 2^h - 1 for consecutive heights
        Shape::Balanced => sizes.windows(2).all(|w| w[1] == 2 * w[0] + 1),
        Shape::Degenerate => {
            let r = sizes[1] as f64 / sizes[0] as f64;
            r > 1.0 && sizes.windows(2).all(|w| ((w[1] as f64 / w[0] as f64) / r - 1.0).abs() < 1e-9)
        }
    }
}

/// Summarises rows measured with [`measure`] and checks them against the
/// expected growth: linear for degenerate trees, logarithmic for balanced
/// ones, and bounded matching work everywhere.
pub fn scaling_report(rows: &[BenchRow]) -> Result<ScalingReport, BenchError> {
    let mut keys: Vec<(Shape, BenchOp)> = rows.iter().map(|r| (r.shape, r.op)).collect();
    keys.sort();
    keys.dedup();
    let mut series = Vec::new();
    let mut checks = Vec::new();
    for (shape, op) in keys {
        let mut pts: Vec<&BenchRow> = rows.iter().filter(|r| r.shape == shape && r.op == op).collect();
        pts.sort_by_key(|r| r.n);
        let name = format!("{shape} {op}");
        let sizes: Vec<usize> = pts.iter().map(|r| r.n).collect();
        if sizes.len() < 4 {
            return Err(BenchError::TooFewSizes {
                series: name,
                got: sizes.len(),
            });
        }
        if !is_geometric(&sizes, shape) {
            return Err(BenchError::NotGeometric { series: name });
        }
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        let s = Series {
            shape,
            op,
            sizes: sizes.clone(),
            time_doubling: doubling_ratio(first.n, first.mean_ns, last.n, last.mean_ns),
            apps_doubling: doubling_ratio(first.n, first.rule_apps as f64, last.n, last.rule_apps as f64),
            apps_linear_r2: linear_r2(&pts.iter().map(|r| (r.n as f64, r.rule_apps as f64)).collect::<Vec<_>>()),
            max_apps_step: pts
                .windows(2)
                .map(|w| w[1].rule_apps as i64 - w[0].rule_apps as i64)
                .max()
                .unwrap_or(0),
            time_span_ratio: last.mean_ns / first.mean_ns,
        };
        match shape {
            Shape::Degenerate => {
                checks.push(Check {
                    name: format!("{name} rule_apps doubling ratio"),
                    pass: (s.apps_doubling - 2.0).abs() <= 0.05,
                    detail: format!("{:.3} (want 2.0 +/- 0.05)", s.apps_doubling),
                });
                checks.push(Check {
                    name: format!("{name} rule_apps linear fit"),
                    pass: s.apps_linear_r2 >= 0.999,
                    detail: format!("R2 {:.6} (want >= 0.999)", s.apps_linear_r2),
                });
                checks.push(Check {
                    name: format!("{name} time doubling ratio"),
                    pass: (1.5..=3.0).contains(&s.time_doubling),
                    detail: format!("{:.2} (want 1.5 to 3.0)", s.time_doubling),
                });
            }
            Shape::Balanced => {
                checks.push(Check {
                    name: format!("{name} rule_apps step per height"),
                    pass: s.max_apps_step <= 8,
                    detail: format!("{} (want <= 8)", s.max_apps_step),
                });
                let size_ratio = last.n as f64 / first.n as f64;
                checks.push(Check {
                    name: format!("{name} time growth"),
                    pass: s.time_span_ratio <= size_ratio / 2.0,
                    detail: format!(
                        "x{:.2} from n={} to n={} (want <= {:.1}, half the size ratio)",
                        s.time_span_ratio,
                        first.n,
                        last.n,
                        size_ratio / 2.0
                    ),
                });
            }
        }
        series.push(s);
    }
    let max_anchors = rows.iter().map(|r| r.counters.max_anchors_per_call).max().unwrap_or(0);
    checks.push(Check {
        name: "anchors per match call".into(),
        pass: max_anchors <= 3,
        detail: format!("at most {max_anchors} (want <= 3)"),
    });
    let max_steps = rows.iter().map(|r| r.counters.max_steps_per_call).max().unwrap_or(0);
    checks.push(Check {
        name: "extension steps per match call".into(),
        pass: max_steps <= 32,
        detail: format!("at most {max_steps} (want <= 32)"),
    });
    Ok(ScalingReport { series, checks })
}

/// Parses a size list: `1000,2000,4000` or, for balanced trees, a height
/// range such as `h=6..12` (inclusive). Balanced sizes are heights.
pub fn parse_sizes(shape: Shape, text: &str) -> Result<Vec<usize>, String> {
    let text = text.trim();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("bad size `{}`", s.trim()));
    let sizes = if let Some(range) = text.strip_prefix("h=") {
        if shape != Shape::Balanced {
            return Err("height ranges only apply to balanced trees".into());
        }
        match range.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
                if a > b {
                    return Err(format!("empty height range `{text}`"));
                }
                (a..=b).collect()
            }
            None => range.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        }
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if sizes.contains(&0) {
        return Err("sizes must be positive".into());
    }
    Ok(sizes)
}
