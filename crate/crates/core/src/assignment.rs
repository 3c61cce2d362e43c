//! Linear assignment: Hungarian solver and Murty's k-best ranking.
//!
//! Cost matrices are `rows x cols` with `rows <= cols`; every row is assigned a
//! distinct column. `f64::INFINITY` marks a forbidden pair.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub cols: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment, or `None` when every assignment uses a forbidden pair.
pub fn solve(cost: &DMatrix<f64>) -> Option<Assignment> {
    let (n, m) = cost.shape();
    assert!(n <= m, "assignment needs rows <= cols, got {n}x{m}");
    if n == 0 {
        return Some(Assignment { cols: Vec::new(), cost: 0.0 });
    }
    // Forbidden pairs become a penalty larger than any feasible total.
    let max_abs = cost.iter().filter(|c| c.is_finite()).fold(0.0f64, |a, c| a.max(c.abs()));
    let big = (max_abs + 1.0) * 4.0 * (n as f64 + 1.0);
    let at = |i: usize, j: usize| {
        let c = cost[(i, j)];
        if c.is_finite() {
            c
        } else {
            big
        }
    };

    // Shortest augmenting paths with potentials; 1-based with column 0 as sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            cols[owner[j] - 1] = j - 1;
        }
    }
    let mut total = 0.0;
    for (i, &j) in cols.iter().enumerate() {
        let c = cost[(i, j)];
        if !c.is_finite() {
            return None;
        }
        total += c;
    }
    Some(Assignment { cols, cost: total })
}

struct Node {
    matrix: DMatrix<f64>,
    solution: Assignment,
    /// Rows whose assignment is fixed in this subproblem.
    fixed: usize,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed: BinaryHeap pops the cheapest, earliest-created node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .solution
            .cost
            .total_cmp(&self.solution.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Up to `k` lowest-cost assignments in non-decreasing cost order.
pub fn murty_k_best(cost: &DMatrix<f64>, k: usize) -> Vec<Assignment> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let Some(first) = solve(cost) else {
        return out;
    };
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Node { matrix: cost.clone(), solution: first, fixed: 0, seq });

    while let Some(node) = heap.pop() {
        let n = node.matrix.nrows();
        let sol = node.solution.cols.clone();
        out.push(node.solution);
        if out.len() == k {
            break;
        }
        let mut base = node.matrix;
        for row in node.fixed..n {
            let mut child = base.clone();
            child[(row, sol[row])] = f64::INFINITY;
            if let Some(solution) = solve(&child) {
                seq += 1;
                heap.push(Node { matrix: child, solution, fixed: row, seq });
            }
            // Fix (row, sol[row]) for the following children.
            let col = sol[row];
            for j in 0..base.ncols() {
                if j != col {
                    base[(row, j)] = f64::INFINITY;
                }
            }
            for i in 0..n {
                if i != row {
                    base[(i, col)] = f64::INFINITY;
                }
            }
        }
    }
    out
}
