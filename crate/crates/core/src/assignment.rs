//! Gated linear assignment: maximize match count first, then minimize
//! total cost, over a rectangular cost matrix with forbidden entries.
//!
//! `solve_lap` is the production solver (successive shortest augmenting
//! paths with potentials, O(n^3)); `brute_force_lap` is an exhaustive
//! reference used by tests to certify it.

use thiserror::Error;

/// Sentinel marking a forbidden row/col pair.
pub const FORBIDDEN: f64 = f64::INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum LapError {
    #[error("brute-force solver limited to 8x8 matrices, got {rows}x{cols}")]
    TooLarge { rows: usize, cols: usize },
}

/// Row-major cost matrix. Finite entries must lie in `[0, 1]`;
/// `FORBIDDEN` marks pairs that may never match.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "cost matrix shape mismatch");
        for &v in &values {
            assert!(
                (0.0..=1.0).contains(&v) || v == FORBIDDEN,
                "cost entry {v} outside [0,1]"
            );
        }
        Self { rows, cols, values }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Outcome of one assignment solve. Every row index appears exactly once
/// across `matches` and `unmatched_rows`; columns likewise. `matches` is
/// sorted by row, the unmatched lists ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentResult {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    fn from_matches(matches: Vec<(usize, usize)>, rows: usize, cols: usize) -> Self {
        let mut row_taken = vec![false; rows];
        let mut col_taken = vec![false; cols];
        for &(i, j) in &matches {
            row_taken[i] = true;
            col_taken[j] = true;
        }
        Self {
            matches,
            unmatched_rows: (0..rows).filter(|&i| !row_taken[i]).collect(),
            unmatched_cols: (0..cols).filter(|&j| !col_taken[j]).collect(),
        }
    }

    /// Sum of matched costs, accumulated in row order.
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(i, j)| c.get(i, j)).sum()
    }
}

const UNSET: usize = usize::MAX;

/// Optimal gated assignment: among all assignments whose every pair has
/// cost `<= threshold`, maximizes the number of matches and, among
/// those, minimizes total cost. Pairwise cost ties are broken toward
/// the lowest `(row, col)` order. Deterministic.
pub fn solve_lap(c: &CostMatrix, threshold: f64) -> AssignmentResult {
    let (rows, cols) = (c.rows, c.cols);
    if rows == 0 || cols == 0 {
        return AssignmentResult::from_matches(Vec::new(), rows, cols);
    }
    let allowed = |i: usize, j: usize| c.get(i, j) <= threshold;

    // match_of_row[i] = column matched to row i, and vice versa.
    let mut match_of_row = vec![UNSET; rows];
    let mut match_of_col = vec![UNSET; cols];
    // Dual potentials keeping reduced costs nonnegative. Columns that
    // are still free always sit at potential 0.
    let mut u = vec![0.0_f64; rows];
    let mut v = vec![0.0_f64; cols];

    loop {
        // Shortest augmenting path from the set of free rows to any free
        // column, over reduced costs (Dijkstra, dense).
        let mut dist = vec![f64::INFINITY; cols];
        let mut prev_row = vec![UNSET; cols];
        let mut settled = vec![false; cols];
        let mut row_dist = vec![f64::INFINITY; rows];

        for i in 0..rows {
            if match_of_row[i] != UNSET {
                continue;
            }
            row_dist[i] = 0.0;
            for j in 0..cols {
                if allowed(i, j) {
                    // free-row source: reduced cost collapses to c - v
                    let rc = (c.get(i, j) - v[j]).max(0.0);
                    if rc < dist[j] {
                        dist[j] = rc;
                        prev_row[j] = i;
                    }
                }
            }
        }

        let mut endpoint = UNSET;
        let mut endpoint_dist = f64::INFINITY;
        loop {
            let mut best = UNSET;
            for j in 0..cols {
                if !settled[j] && dist[j].is_finite() && (best == UNSET || dist[j] < dist[best]) {
                    best = j;
                }
            }
            if best == UNSET {
                break;
            }
            settled[best] = true;
            if match_of_col[best] == UNSET {
                endpoint = best;
                endpoint_dist = dist[best];
                break;
            }
            let i2 = match_of_col[best];
            row_dist[i2] = dist[best];
            for j2 in 0..cols {
                if !settled[j2] && allowed(i2, j2) {
                    let rc = (c.get(i2, j2) - u[i2] - v[j2]).max(0.0);
                    let nd = dist[best] + rc;
                    if nd < dist[j2] {
                        dist[j2] = nd;
                        prev_row[j2] = i2;
                    }
                }
            }
        }

        if endpoint == UNSET {
            break; // no augmenting path left: cardinality is maximal
        }

        // Re-center potentials on the settled region before rewiring.
        for j in 0..cols {
            if settled[j] {
                v[j] += dist[j] - endpoint_dist;
                let i2 = match_of_col[j];
                if i2 != UNSET {
                    u[i2] += endpoint_dist - row_dist[i2];
                }
            }
        }

        // Walk the augmenting path backwards, flipping matches.
        let mut j = endpoint;
        loop {
            let i = prev_row[j];
            let prev_j = match_of_row[i];
            match_of_row[i] = j;
            match_of_col[j] = i;
            if prev_j == UNSET {
                // `i` was a free source row; it now carries the phase cost.
                u[i] = endpoint_dist;
                break;
            }
            j = prev_j;
        }
    }

    let mut matches: Vec<(usize, usize)> = (0..rows)
        .filter(|&i| match_of_row[i] != UNSET)
        .map(|i| (i, match_of_row[i]))
        .collect();
    canonicalize_ties(c, threshold, &mut matches, rows, cols);
    AssignmentResult::from_matches(matches, rows, cols)
}

/// Pairwise tie canonicalization: apply cost-neutral exchanges (exact
/// f64 equality only, so optimality cannot drift) until the sorted match
/// list is pairwise lexicographically minimal.
fn canonicalize_ties(
    c: &CostMatrix,
    threshold: f64,
    matches: &mut [(usize, usize)],
    rows: usize,
    cols: usize,
) {
    let allowed = |i: usize, j: usize| c.get(i, j) <= threshold;
    let mut row_free: Vec<bool> = vec![true; rows];
    let mut col_free: Vec<bool> = vec![true; cols];
    for &(i, j) in matches.iter() {
        row_free[i] = false;
        col_free[j] = false;
    }
    loop {
        let mut changed = false;
        for entry in matches.iter_mut() {
            let (i, j) = *entry;
            // shift a match onto an earlier free row at identical cost
            for i2 in 0..i {
                if row_free[i2] && allowed(i2, j) && c.get(i2, j) == c.get(i, j) {
                    row_free[i2] = false;
                    row_free[i] = true;
                    *entry = (i2, j);
                    changed = true;
                    break;
                }
            }
            let (i, j) = *entry;
            // shift a match onto an earlier free column at identical cost
            for j2 in 0..j {
                if col_free[j2] && allowed(i, j2) && c.get(i, j2) == c.get(i, j) {
                    col_free[j2] = false;
                    col_free[j] = true;
                    *entry = (i, j2);
                    changed = true;
                    break;
                }
            }
        }
        // column swap between two matches when the pair sums are exactly equal
        matches.sort_unstable();
        for a in 0..matches.len() {
            for b in (a + 1)..matches.len() {
                let (i1, j1) = matches[a];
                let (i2, j2) = matches[b];
                if j2 < j1
                    && allowed(i1, j2)
                    && allowed(i2, j1)
                    && c.get(i1, j2) + c.get(i2, j1) == c.get(i1, j1) + c.get(i2, j2)
                {
                    matches[a] = (i1, j2);
                    matches[b] = (i2, j1);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    matches.sort_unstable();
}

/// Exhaustive reference solver, same contract as [`solve_lap`] with the
/// full lexicographic tie-break, by enumerating every partial injection.
/// Rejects matrices larger than 8x8.
pub fn brute_force_lap(c: &CostMatrix, threshold: f64) -> Result<AssignmentResult, LapError> {
    if c.rows > 8 || c.cols > 8 {
        return Err(LapError::TooLarge {
            rows: c.rows,
            cols: c.cols,
        });
    }
    let mut best: Option<Candidate> = None;
    let mut current: Vec<(usize, usize)> = Vec::new();
    enumerate(c, threshold, 0, 0, &mut current, &mut best);
    let matches = best.map(|(_, _, m)| m).unwrap_or_default();
    Ok(AssignmentResult::from_matches(matches, c.rows, c.cols))
}

/// (cardinality, total cost, matches) of the best assignment so far.
type Candidate = (usize, f64, Vec<(usize, usize)>);

fn enumerate(
    c: &CostMatrix,
    threshold: f64,
    row: usize,
    used_cols: u32,
    current: &mut Vec<(usize, usize)>,
    best: &mut Option<Candidate>,
) {
    if row == c.rows {
        let cost: f64 = current.iter().map(|&(i, j)| c.get(i, j)).sum();
        let better = match best {
            None => true,
            Some((bc, bcost, bm)) => {
                current.len() > *bc
                    || (current.len() == *bc && cost < *bcost)
                    || (current.len() == *bc
                        && cost == *bcost
                        && current.as_slice() < bm.as_slice())
            }
        };
        if better {
            *best = Some((current.len(), cost, current.clone()));
        }
        return;
    }
    for j in 0..c.cols {
        if used_cols & (1 << j) == 0 && c.get(row, j) <= threshold {
            current.push((row, j));
            enumerate(c, threshold, row + 1, used_cols | (1 << j), current, best);
            current.pop();
        }
    }
    enumerate(c, threshold, row + 1, used_cols, current, best);
}
