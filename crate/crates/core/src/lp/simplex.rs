//! Self-contained dense primal simplex with Bland's rule.
//!
//! Maximizes c.x subject to <= and = constraints with non-negative
//! right-hand sides and x >= 0, via the standard two-phase tableau method.
//! Desk-scale basis sizes keep the dense tableau cheap, and Bland's rule
//! makes every solve deterministic and cycle-free.

use crate::error::{Result, SocsError};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl Simplex {
    pub fn new(n: usize) -> Self {
        Simplex {
            n,
            objective: vec![0.0; n],
            rows: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        assert!(rhs >= -1e-12, "le rows require rhs >= 0, got {rhs}");
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            relation: Relation::Le,
            rhs: rhs.max(0.0),
        });
    }

    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        // Normalize to rhs >= 0 by sign flip.
        if rhs < 0.0 {
            let flipped: Vec<(usize, f64)> = coeffs.iter().map(|&(v, c)| (v, -c)).collect();
            self.rows.push(Row {
                coeffs: flipped,
                relation: Relation::Eq,
                rhs: -rhs,
            });
        } else {
            self.rows.push(Row {
                coeffs: coeffs.to_vec(),
                relation: Relation::Eq,
                rhs,
            });
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> Result<SimplexSolution> {
        let m = self.rows.len();
        let n_slack = self.rows.iter().filter(|r| r.relation == Relation::Le).count();
        let n_art = m - n_slack;
        let width = self.n + n_slack + n_art + 1;
        let rhs_col = width - 1;

        let mut tab = vec![vec![0.0f64; width]; m];
        let mut basis = vec![0usize; m];
        let mut slack_at = self.n;
        let mut art_at = self.n + n_slack;
        let art_start = self.n + n_slack;
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                tab[r][v] += c;
            }
            tab[r][rhs_col] = row.rhs;
            match row.relation {
                Relation::Le => {
                    tab[r][slack_at] = 1.0;
                    basis[r] = slack_at;
                    slack_at += 1;
                }
                Relation::Eq => {
                    tab[r][art_at] = 1.0;
                    basis[r] = art_at;
                    art_at += 1;
                }
            }
        }

        let mut pivots = 0usize;

        // Phase 1: drive artificials to zero by maximizing -sum(artificials).
        // The reduced-cost row over the artificial basis is the negated sum
        // of the artificial rows (their own columns price to zero).
        if n_art > 0 {
            let mut cost = vec![0.0f64; width];
            for (r, &b) in basis.iter().enumerate() {
                if b >= art_start {
                    for k in 0..width {
                        cost[k] -= tab[r][k];
                    }
                }
            }
            for k in art_start..width - 1 {
                cost[k] = 0.0;
            }
            self.run_pivots(&mut tab, &mut basis, &mut cost, art_start, &mut pivots)?;
            if cost[rhs_col] < -1e-7 {
                return Err(SocsError::Infeasible(format!(
                    "phase-1 residual {}",
                    -cost[rhs_col]
                )));
            }
            // Pivot remaining basic artificials out where the row allows it.
            for r in 0..m {
                if basis[r] >= art_start {
                    if let Some(col) = (0..art_start).find(|&c| tab[r][c].abs() > PIVOT_TOL) {
                        pivot(&mut tab, &mut basis, r, col);
                        pivots += 1;
                    }
                }
            }
        }

        // Phase 2: maximize the true objective. Artificial columns are
        // excluded from pricing.
        let mut cost = vec![0.0f64; width];
        for (v, &c) in self.objective.iter().enumerate() {
            cost[v] = -c;
        }
        for (r, &b) in basis.iter().enumerate() {
            if b < self.n && self.objective[b] != 0.0 {
                let w = self.objective[b];
                for k in 0..width {
                    cost[k] += w * tab[r][k];
                }
            }
        }
        self.run_pivots(&mut tab, &mut basis, &mut cost, art_start, &mut pivots)?;

        let mut x = vec![0.0f64; self.n];
        for (r, &b) in basis.iter().enumerate() {
            if b < self.n {
                x[b] = tab[r][rhs_col];
            }
        }
        let objective = self
            .objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .sum::<f64>();
        Ok(SimplexSolution { x, objective, pivots })
    }

    /// Bland's rule pivoting until no entering column remains. `limit` is
    /// the number of priceable columns (artificials are never re-entered).
    fn run_pivots(
        &self,
        tab: &mut [Vec<f64>],
        basis: &mut [usize],
        cost: &mut [f64],
        limit: usize,
        pivots: &mut usize,
    ) -> Result<()> {
        let m = tab.len();
        let rhs_col = cost.len() - 1;
        loop {
            // Entering: smallest index with negative reduced cost.
            let Some(col) = (0..limit).find(|&c| cost[c] < -COST_TOL) else {
                return Ok(());
            };
            // Leaving: min ratio, ties by smallest basic variable index.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..m {
                if tab[r][col] > PIVOT_TOL {
                    let ratio = tab[r][rhs_col] / tab[r][col];
                    let better = ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12
                            && leave.map_or(true, |lr| basis[r] < basis[lr]));
                    if better {
                        best_ratio = ratio.min(best_ratio);
                        leave = Some(r);
                    }
                }
            }
            let Some(row) = leave else {
                return Err(SocsError::Unbounded);
            };
            pivot(tab, basis, row, col);
            // Update the cost row against the new pivot row.
            let factor = cost[col];
            if factor != 0.0 {
                for k in 0..cost.len() {
                    cost[k] -= factor * tab[row][k];
                }
            }
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(SocsError::NoConvergence(MAX_PIVOTS));
            }
        }
    }
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let width = tab[row].len();
    let p = tab[row][col];
    for k in 0..width {
        tab[row][k] /= p;
    }
    tab[row][col] = 1.0;
    for r in 0..tab.len() {
        if r != row {
            let f = tab[r][col];
            if f != 0.0 {
                for k in 0..width {
                    tab[r][k] -= f * tab[row][k];
                }
                tab[r][col] = 0.0;
            }
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6).
        let mut lp = Simplex::new(2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 5.0);
        lp.add_le(&[(0, 1.0)], 4.0);
        lp.add_le(&[(1, 2.0)], 12.0);
        lp.add_le(&[(0, 3.0), (1, 2.0)], 18.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_constraints() {
        // max x + y s.t. x + y = 1, x <= 0.25 -> (0.25, 0.75).
        let mut lp = Simplex::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_eq(&[(0, 1.0), (1, 1.0)], 1.0);
        lp.add_le(&[(0, 1.0)], 0.25);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.x[0] <= 0.25 + 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = Simplex::new(1);
        lp.add_eq(&[(0, 1.0)], 2.0);
        lp.add_le(&[(0, 1.0)], 1.0);
        assert!(matches!(lp.solve(), Err(SocsError::Infeasible(_))));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = Simplex::new(1);
        lp.set_objective(0, 1.0);
        lp.add_le(&[(0, -1.0)], 1.0);
        assert!(matches!(lp.solve(), Err(SocsError::Unbounded)));
    }

    #[test]
    fn mixture_feasibility_problem() {
        // Feasibility: lambda >= 0, sum lambda = 1, V lambda = x with
        // V = [(0.5, 0.25), (0.25, 0.5)] and x = (0.375, 0.375).
        let mut lp = Simplex::new(2);
        lp.add_eq(&[(0, 1.0), (1, 1.0)], 1.0);
        lp.add_eq(&[(0, 0.5), (1, 0.25)], 0.375);
        lp.add_eq(&[(0, 0.25), (1, 0.5)], 0.375);
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn random_lps_match_brute_force_vertices() {
        // Oracle: enumerate all basic feasible points of 2-variable LPs by
        // intersecting constraint pairs and take the best feasible one.
        let mut s = crate::rng::Stream::keyed(5, crate::rng::Purpose::Generate, 2, 0, 0);
        for _ in 0..200 {
            let c = [s.next_f64(), s.next_f64()];
            let rows: Vec<([f64; 2], f64)> = (0..4)
                .map(|_| ([s.next_f64(), s.next_f64()], 0.2 + s.next_f64()))
                .collect();
            let mut lp = Simplex::new(2);
            lp.set_objective(0, c[0]);
            lp.set_objective(1, c[1]);
            for (a, b) in &rows {
                lp.add_le(&[(0, a[0]), (1, a[1])], *b);
            }
            let sol = lp.solve().unwrap();

            let feasible = |x: f64, y: f64| {
                x >= -1e-9
                    && y >= -1e-9
                    && rows.iter().all(|(a, b)| a[0] * x + a[1] * y <= b + 1e-9)
            };
            let mut best = 0.0f64;
            let mut lines: Vec<([f64; 2], f64)> = rows.clone();
            lines.push(([1.0, 0.0], 0.0));
            lines.push(([0.0, 1.0], 0.0));
            for p in 0..lines.len() {
                for q in (p + 1)..lines.len() {
                    let (a1, b1) = (&lines[p].0, lines[p].1);
                    let (a2, b2) = (&lines[q].0, lines[q].1);
                    let det = a1[0] * a2[1] - a1[1] * a2[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let x = (b1 * a2[1] - b2 * a1[1]) / det;
                    let y = (a1[0] * b2 - a2[0] * b1) / det;
                    if feasible(x, y) {
                        best = best.max(c[0] * x + c[1] * y);
                    }
                }
            }
            assert!(
                (sol.objective - best).abs() < 1e-7,
                "simplex {} vs oracle {}",
                sol.objective,
                best
            );
        }
    }
}
