//! Exact enumeration over every outcome path of a finite-support stream.
//!
//! With `m` atoms and horizon `n` there are `m^n` equally structured paths.
//! The walk is depth-first over an explicit stack of partial products, so
//! each prefix product is formed once. `E_k` and `E_k⁻¹` do not depend on
//! the path and are computed once per depth.

use alloc::vec;
use alloc::vec::Vec;

use crate::boundary::StepSchedule;
use crate::error::{Error, Result};
use crate::linalg::{left_accumulate, operator_norm, ExpectedProduct, SquareMatrix};
use crate::streams::{crosses, Atom, MatrixDistribution, ROUNDOFF_FLOOR};

/// Default cap on `m^n`.
pub const DEFAULT_PATH_CAP: u64 = 1 << 24;

/// Switch to log-space path weights once `n |ln p_min|` exceeds this.
const LOG_SPACE_THRESHOLD: f64 = 600.0;

/// One complete path of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub probability: f64,
    pub product: SquareMatrix,
    /// `‖Z_n − E_n‖`.
    pub dev: f64,
    /// `‖Y_n‖`.
    pub ydev: f64,
    /// `max_{k≤n} ‖Z_k − E_k‖`.
    pub max_dev: f64,
    /// `max_{k≤n} ‖Y_k‖`.
    pub max_ydev: f64,
}

/// Every path of length `n`, ordered lexicographically in atom indices with
/// the newest factor's index most significant (`(j_n, …, j_1)`, matching
/// the written product).
#[derive(Debug, Clone)]
pub struct PathTable {
    pub n: usize,
    pub paths: Vec<PathRecord>,
    dist: MatrixDistribution,
    schedule: StepSchedule,
}

impl PathTable {
    pub fn total_probability(&self) -> f64 {
        self.paths.iter().map(|p| p.probability).sum()
    }

    /// `Σ prob · Z_n`.
    pub fn mean_product(&self) -> SquareMatrix {
        let d = self.dist.dim();
        self.paths
            .iter()
            .fold(SquareMatrix::zeros(d), |acc, p| acc.add(&p.product.scale(p.probability)))
    }

    /// Exact `P(max_{k≤n} ‖Y_k‖ ≥ level)`.
    pub fn max_ydev_tail(&self, level: f64) -> f64 {
        self.paths
            .iter()
            .filter(|p| p.max_ydev >= level)
            .map(|p| p.probability)
            .sum()
    }

    pub fn distribution(&self) -> &MatrixDistribution {
        &self.dist
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingMode {
    /// `P(∃ k ≤ n : dev_k ≥ t_k)`.
    Anytime,
    /// `P(dev_n ≥ t_n)`.
    FixedTime,
}

#[derive(Debug, Clone)]
struct Level {
    eta: f64,
    expected: SquareMatrix,
    inverse: SquareMatrix,
    expected_norm: f64,
}

#[derive(Debug, Clone)]
struct Node {
    z: SquareMatrix,
    weight: f64,
    dev: f64,
    ydev: f64,
    max_dev: f64,
    max_ydev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Descend,
    Prune,
}

fn finite_atoms(dist: &MatrixDistribution) -> Result<&[Atom]> {
    dist.atoms().ok_or_else(|| {
        Error::InvalidDistribution("exact enumeration needs a finite-support distribution".into())
    })
}

fn check_cap(m: usize, n: usize, cap: u64) -> Result<()> {
    let paths = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if paths > cap as u128 {
        return Err(Error::EnumerationCap { paths, cap });
    }
    Ok(())
}

struct Walker<'a> {
    atoms: &'a [Atom],
    levels: Vec<Level>,
    use_log: bool,
}

impl<'a> Walker<'a> {
    fn new(dist: &'a MatrixDistribution, schedule: &StepSchedule, n: usize) -> Result<Self> {
        let atoms = finite_atoms(dist)?;
        let d = dist.dim();
        let mut e = ExpectedProduct::new(dist.mean_spectrum().clone());
        let mut levels = Vec::with_capacity(n + 1);
        levels.push(Level {
            eta: 0.0,
            expected: SquareMatrix::identity(d),
            inverse: SquareMatrix::identity(d),
            expected_norm: 1.0,
        });
        for k in 1..=n {
            let eta = schedule.eta(k)?;
            e.push(eta);
            levels.push(Level {
                eta,
                expected: e.matrix(),
                inverse: e.inverse(),
                expected_norm: e.norm(),
            });
        }
        let p_min = atoms.iter().map(|a| a.probability).fold(1.0, f64::min);
        let use_log = n as f64 * libm::log(p_min).abs() > LOG_SPACE_THRESHOLD;
        Ok(Self { atoms, levels, use_log })
    }

    fn root(&self) -> Node {
        Node {
            z: SquareMatrix::identity(self.levels[0].expected.dim()),
            weight: if self.use_log { 0.0 } else { 1.0 },
            dev: 0.0,
            ydev: 0.0,
            max_dev: 0.0,
            max_ydev: 0.0,
        }
    }

    fn probability(&self, node: &Node) -> f64 {
        if self.use_log {
            libm::exp(node.weight)
        } else {
            node.weight
        }
    }

    fn y(&self, z: &SquareMatrix, depth: usize) -> SquareMatrix {
        let mut y = self.levels[depth].inverse.matmul(z);
        for i in 0..y.dim() {
            y[(i, i)] -= 1.0;
        }
        y
    }

    fn child(&self, parent: &Node, atom: usize, depth: usize) -> Result<Node> {
        let level = &self.levels[depth];
        let a = &self.atoms[atom];
        let z = left_accumulate(&parent.z, &a.matrix, level.eta)?;
        let dev = operator_norm(&z.sub(&level.expected));
        let ydev = operator_norm(&self.y(&z, depth));
        let weight = if self.use_log {
            parent.weight + libm::log(a.probability)
        } else {
            parent.weight * a.probability
        };
        Ok(Node {
            z,
            weight,
            dev,
            ydev,
            max_dev: parent.max_dev.max(dev),
            max_ydev: parent.max_ydev.max(ydev),
        })
    }

    /// Depth-first walk to `horizon`. `visit` sees every non-root node with
    /// its depth and atom path; returning `Prune` skips that node's subtree.
    fn walk(
        &self,
        horizon: usize,
        mut visit: impl FnMut(usize, &Node, &[usize]) -> Flow,
    ) -> Result<()> {
        let m = self.atoms.len();
        let mut stack = vec![self.root()];
        let mut next = vec![0usize; horizon + 1];
        let mut path: Vec<usize> = Vec::with_capacity(horizon);
        let mut pruned = vec![false; horizon + 1];
        loop {
            let depth = stack.len() - 1;
            if depth < horizon && !pruned[depth] && next[depth] < m {
                let j = next[depth];
                next[depth] += 1;
                let child = self.child(&stack[depth], j, depth + 1)?;
                path.push(j);
                let flow = visit(depth + 1, &child, &path);
                stack.push(child);
                next[depth + 1] = 0;
                pruned[depth + 1] = flow == Flow::Prune;
            } else {
                if depth == 0 {
                    return Ok(());
                }
                stack.pop();
                path.pop();
            }
        }
    }
}

/// Exhaustive table of all `m^n` paths, capped at [`DEFAULT_PATH_CAP`].
pub fn enumerate(dist: &MatrixDistribution, schedule: &StepSchedule, n: usize) -> Result<PathTable> {
    enumerate_with_cap(dist, schedule, n, DEFAULT_PATH_CAP)
}

pub fn enumerate_with_cap(
    dist: &MatrixDistribution,
    schedule: &StepSchedule,
    n: usize,
    cap: u64,
) -> Result<PathTable> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            expected: "horizon n >= 1",
        });
    }
    let m = finite_atoms(dist)?.len();
    check_cap(m, n, cap)?;
    let walker = Walker::new(dist, schedule, n)?;
    let count = m.pow(n as u32);
    let mut slots: Vec<Option<PathRecord>> = vec![None; count];
    walker.walk(n, |depth, node, path| {
        if depth == n {
            // Newest index most significant.
            let idx = path.iter().rev().fold(0usize, |acc, &j| acc * m + j);
            slots[idx] = Some(PathRecord {
                probability: walker.probability(node),
                product: node.z.clone(),
                dev: node.dev,
                ydev: node.ydev,
                max_dev: node.max_dev,
                max_ydev: node.max_ydev,
            });
        }
        Flow::Descend
    })?;
    Ok(PathTable {
        n,
        paths: slots.into_iter().map(|s| s.expect("every path visited")).collect(),
        dist: dist.clone(),
        schedule: *schedule,
    })
}

/// Exact crossing probability against per-step thresholds `t_1, …, t_n`
/// (`thresholds[k - 1]` is `t_k`). Crossing follows [`crosses`].
pub fn exact_crossing_probability(table: &PathTable, thresholds: &[f64], mode: CrossingMode) -> Result<f64> {
    let n = table.n;
    if thresholds.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: thresholds.len(),
        });
    }
    match mode {
        CrossingMode::FixedTime => {
            let norm = Walker::new(&table.dist, &table.schedule, n)?.levels[n].expected_norm;
            Ok(table
                .paths
                .iter()
                .filter(|p| crosses(p.dev, thresholds[n - 1], norm))
                .map(|p| p.probability)
                .sum())
        }
        CrossingMode::Anytime => {
            let walker = Walker::new(&table.dist, &table.schedule, n)?;
            let mut total = 0.0;
            walker.walk(n, |depth, node, _| {
                if crosses(node.dev, thresholds[depth - 1], walker.levels[depth].expected_norm) {
                    // First crossing: the whole subtree counts.
                    total += walker.probability(node);
                    Flow::Prune
                } else {
                    Flow::Descend
                }
            })?;
            Ok(total)
        }
    }
}

/// Visits every prefix of length `k < n` and hands `f` the prefix node and
/// the atom-weighted children at depth `k + 1`.
fn for_each_prefix(
    dist: &MatrixDistribution,
    schedule: &StepSchedule,
    n: usize,
    cap: u64,
    mut f: impl FnMut(usize, &Node, &[(f64, Node)]),
) -> Result<()> {
    let atoms = finite_atoms(dist)?;
    check_cap(atoms.len(), n, cap)?;
    if n == 0 {
        return Ok(());
    }
    let walker = Walker::new(dist, schedule, n)?;
    let mut err = None;
    let mut at = |depth: usize, node: &Node| {
        let children: Result<Vec<(f64, Node)>> = (0..atoms.len())
            .map(|j| Ok((atoms[j].probability, walker.child(node, j, depth + 1)?)))
            .collect();
        match children {
            Ok(c) => f(depth, node, &c),
            Err(e) => err = Some(e),
        }
    };
    at(0, &walker.root());
    walker.walk(n - 1, |depth, node, _| {
        at(depth, node);
        Flow::Descend
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Largest entrywise residual `‖E[Y_{k+1} | prefix] − Y_k‖_max` over every
/// prefix of length `k < n`. Exactly zero in exact arithmetic.
pub fn martingale_check(dist: &MatrixDistribution, schedule: &StepSchedule, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let walker = Walker::new(dist, schedule, n)?;
    for_each_prefix(dist, schedule, n, DEFAULT_PATH_CAP, |depth, node, children| {
        let y_k = walker.y(&node.z, depth);
        let d = y_k.dim();
        let mean = children.iter().fold(SquareMatrix::zeros(d), |acc, (p, c)| {
            acc.add(&walker.y(&c.z, depth + 1).scale(*p))
        });
        worst = worst.max(mean.sub(&y_k).max_abs());
    })?;
    Ok(worst)
}

/// Smallest slack `E[‖Y_{k+1}‖ | prefix] − ‖Y_k‖` over every prefix of
/// length `k < n`. Nonnegative for a submartingale.
pub fn submartingale_check(dist: &MatrixDistribution, schedule: &StepSchedule, n: usize) -> Result<f64> {
    let mut slack = f64::INFINITY;
    for_each_prefix(dist, schedule, n, DEFAULT_PATH_CAP, |_, node, children| {
        let mean: f64 = children.iter().map(|(p, c)| p * c.ydev).sum();
        slack = slack.min(mean - node.ydev);
    })?;
    Ok(if slack.is_finite() { slack } else { 0.0 })
}

/// Worst relative violation of `‖Y_k‖ ≤ ‖Z_k − E_k‖ ≤ ‖E_k‖ ‖Y_k‖` over every
/// node of the enumeration tree. Nonpositive when the sandwich holds.
pub fn sandwich_check(dist: &MatrixDistribution, schedule: &StepSchedule, n: usize) -> Result<f64> {
    let atoms = finite_atoms(dist)?;
    check_cap(atoms.len(), n, DEFAULT_PATH_CAP)?;
    let walker = Walker::new(dist, schedule, n)?;
    let mut worst = f64::NEG_INFINITY;
    walker.walk(n, |depth, node, _| {
        worst = worst.max(sandwich_violation(node.ydev, node.dev, walker.levels[depth].expected_norm));
        Flow::Descend
    })?;
    Ok(worst)
}

/// Relative excess of `ydev ≤ dev ≤ norm · ydev`; nonpositive when it holds.
pub fn sandwich_violation(ydev: f64, dev: f64, expected_norm: f64) -> f64 {
    if dev <= ROUNDOFF_FLOOR * expected_norm && ydev <= ROUNDOFF_FLOOR {
        // Z_k = E_k up to rounding, so both sides vanish.
        return 0.0;
    }
    let scale = dev.max(ydev).max(f64::MIN_POSITIVE);
    let lower = (ydev - dev) / scale;
    let upper = (dev - expected_norm * ydev) / scale;
    lower.max(upper)
}
