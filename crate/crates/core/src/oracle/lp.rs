//! Dense two-phase tableau simplex for desk-scale programs.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-7;
// Consecutive degenerate pivots under Dantzig's rule before falling back to
// Bland's rule.
const DEGENERATE_STREAK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `maximize c.x` subject to dense rows and per-variable lower bounds.
/// A lower bound of `-inf` makes the variable free.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn new(variables: usize) -> Self {
        LinearProgram { objective: vec![0.0; variables], constraints: Vec::new(), lower: vec![0.0; variables] }
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_lower(&mut self, j: usize, bound: f64) {
        self.lower[j] = bound;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    /// Adds a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) {
        let mut coeffs = vec![0.0; self.variables()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_constraint(coeffs, sense, rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.variables();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedProgram("objective has a non-finite coefficient".into()));
        }
        if self.lower.iter().any(|&l| l.is_nan() || l == f64::INFINITY) {
            return Err(Error::MalformedProgram("lower bounds must be finite or -inf".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::MalformedProgram(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::MalformedProgram(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or lower bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (v, l) in x.iter().zip(&self.lower) {
            worst = worst.max(l - v);
        }
        worst
    }
}

// Column map from the user's variables to nonnegative tableau columns.
enum Column {
    Shifted(usize, f64),
    Split(usize, usize),
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    costs: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for a in self.rows[r].iter_mut() {
            *a /= p;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[c] = 0.0;
            }
        }
        let f = self.costs[c];
        if f != 0.0 {
            for (a, &b) in self.costs.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            self.costs[c] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Reduced costs for objective `c` over the current basis.
    fn price(&mut self, c: &[f64]) {
        self.costs = c.to_vec();
        self.costs.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let f = self.costs[b];
            if f != 0.0 {
                for (a, &t) in self.costs.iter_mut().zip(&self.rows[i]) {
                    *a -= f * t;
                }
            }
        }
    }

    fn run(&mut self, allowed: usize, max_iters: usize) -> Result<Outcome> {
        let mut degenerate = 0;
        for _ in 0..max_iters {
            let bland = degenerate >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..allowed).find(|&j| self.costs[j] > COST_EPS)
            } else {
                let mut best = None;
                let mut best_cost = COST_EPS;
                for j in 0..allowed {
                    if self.costs[j] > best_cost {
                        best = Some(j);
                        best_cost = self.costs[j];
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leaving {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leaving else {
                return Ok(Outcome::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        Err(Error::NumericalFailure(format!("no convergence after {max_iters} pivots")))
    }
}

pub fn lp_solve(p: &LinearProgram) -> Result<LpSolution> {
    p.validate()?;
    let n = p.variables();

    let mut columns = Vec::with_capacity(n);
    let mut structural = 0;
    for &l in &p.lower {
        if l == f64::NEG_INFINITY {
            columns.push(Column::Split(structural, structural + 1));
            structural += 2;
        } else {
            columns.push(Column::Shifted(structural, l));
            structural += 1;
        }
    }

    // Rows over the structural columns with rhs shifted by the lower bounds,
    // then normalized to a nonnegative rhs.
    let mut rows = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let mut row = vec![0.0; structural];
        let mut rhs = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            match columns[j] {
                Column::Shifted(k, l) => {
                    row[k] = a;
                    rhs -= a * l;
                }
                Column::Split(k, k2) => {
                    row[k] = a;
                    row[k2] = -a;
                }
            }
        }
        let mut sense = c.sense;
        if rhs < 0.0 || (rhs == 0.0 && sense == Sense::Ge) {
            row.iter_mut().for_each(|a| *a = -*a);
            rhs = -rhs;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        rows.push((row, sense, rhs));
    }

    let slacks = rows.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
    let artificials = rows.iter().filter(|(_, s, _)| *s != Sense::Le).count();
    let real = structural + slacks;
    let width = real + artificials;

    let mut tableau = Tableau { rows: Vec::with_capacity(rows.len()), costs: Vec::new(), basis: Vec::new(), width };
    let (mut next_slack, mut next_art) = (structural, real);
    for (row, sense, rhs) in rows {
        let mut full = row;
        full.resize(width + 1, 0.0);
        full[width] = rhs;
        match sense {
            Sense::Le => {
                full[next_slack] = 1.0;
                tableau.basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                full[next_slack] = -1.0;
                next_slack += 1;
                full[next_art] = 1.0;
                tableau.basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                full[next_art] = 1.0;
                tableau.basis.push(next_art);
                next_art += 1;
            }
        }
        tableau.rows.push(full);
    }
    let max_iters = 50 * (width + tableau.rows.len()) + 1000;

    if artificials > 0 {
        let mut phase_one = vec![0.0; width];
        phase_one[real..].iter_mut().for_each(|c| *c = -1.0);
        tableau.price(&phase_one);
        tableau.run(width, max_iters)?;
        let infeasibility: f64 =
            tableau.basis.iter().enumerate().filter(|(_, &b)| b >= real).map(|(i, _)| tableau.rhs(i)).sum();
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: Vec::new(), objective: f64::NAN });
        }
        // Drive zero-level artificials out of the basis; drop rows where that
        // is impossible (they are redundant).
        let mut i = 0;
        while i < tableau.rows.len() {
            if tableau.basis[i] >= real {
                match (0..real).find(|&j| tableau.rows[i][j].abs() > PIVOT_EPS) {
                    Some(j) => tableau.pivot(i, j),
                    None => {
                        tableau.rows.remove(i);
                        tableau.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut costs = vec![0.0; width];
    for (j, col) in columns.iter().enumerate() {
        match *col {
            Column::Shifted(k, _) => costs[k] = p.objective[j],
            Column::Split(k, k2) => {
                costs[k] = p.objective[j];
                costs[k2] = -p.objective[j];
            }
        }
    }
    tableau.price(&costs);
    if let Outcome::Unbounded = tableau.run(real, max_iters)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, x: Vec::new(), objective: f64::INFINITY });
    }

    let mut values = vec![0.0; width];
    for (i, &b) in tableau.basis.iter().enumerate() {
        values[b] = tableau.rhs(i).max(0.0);
    }
    let x: Vec<f64> = columns
        .iter()
        .map(|col| match *col {
            Column::Shifted(k, l) => values[k] + l,
            Column::Split(k, k2) => values[k] - values[k2],
        })
        .collect();
    let violation = p.max_violation(&x);
    if violation > FEASIBILITY_TOL {
        return Err(Error::NumericalFailure(format!("solution violates a constraint by {violation:e}")));
    }
    let objective = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} != {b}");
    }

    #[test]
    fn single_bound() {
        let mut p = LinearProgram::new(1);
        p.set_objective(0, 1.0);
        p.add_constraint(vec![1.0], Sense::Le, 4.0);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_close(s.x[0], 4.0);
    }

    #[test]
    fn two_variables() {
        let mut p = LinearProgram::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, 1.0);
        p.add_constraint(vec![1.0, 1.0], Sense::Le, 2.0);
        p.add_constraint(vec![1.0, 0.0], Sense::Le, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.objective, 2.0);
    }

    #[test]
    fn textbook_instance() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  =>  (2, 6), 36.
        let mut p = LinearProgram::new(2);
        p.set_objective(0, 3.0);
        p.set_objective(1, 5.0);
        p.add_constraint(vec![1.0, 0.0], Sense::Le, 4.0);
        p.add_constraint(vec![0.0, 2.0], Sense::Le, 12.0);
        p.add_constraint(vec![3.0, 2.0], Sense::Le, 18.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.objective, 36.0);
        assert_close(s.x[0], 2.0);
        assert_close(s.x[1], 6.0);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y (as max -x - y), x + y >= 3, x - y = 1  =>  (2, 1).
        let mut p = LinearProgram::new(2);
        p.set_objective(0, -1.0);
        p.set_objective(1, -1.0);
        p.add_constraint(vec![1.0, 1.0], Sense::Ge, 3.0);
        p.add_constraint(vec![1.0, -1.0], Sense::Eq, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.x[0], 2.0);
        assert_close(s.x[1], 1.0);
    }

    #[test]
    fn infeasible() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![1.0], Sense::Le, 1.0);
        p.add_constraint(vec![1.0], Sense::Ge, 2.0);
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut p = LinearProgram::new(2);
        p.set_objective(0, 1.0);
        p.add_constraint(vec![1.0, -1.0], Sense::Le, 1.0);
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_shifted_variables() {
        // max -x with x free, x >= -3 as a row  =>  x = -3.
        let mut p = LinearProgram::new(2);
        p.set_lower(0, f64::NEG_INFINITY);
        p.set_objective(0, -1.0);
        p.add_constraint(vec![1.0, 0.0], Sense::Ge, -3.0);
        // y >= 2 as a bound, y <= 5  =>  maximizing y gives 5.
        p.set_lower(1, 2.0);
        p.set_objective(1, 1.0);
        p.add_constraint(vec![0.0, 1.0], Sense::Le, 5.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.x[0], -3.0);
        assert_close(s.x[1], 5.0);
        assert_close(s.objective, 8.0);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LinearProgram::new(2);
        p.set_objective(0, 1.0);
        p.add_constraint(vec![1.0, 1.0], Sense::Eq, 2.0);
        p.add_constraint(vec![2.0, 2.0], Sense::Eq, 4.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.objective, 2.0);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example; cycles under the textbook Dantzig rule without
        // an anti-cycling fallback. Optimum 1/20 at (1/25, 0, 1, 0).
        let mut p = LinearProgram::new(4);
        for (j, c) in [0.75, -150.0, 0.02, -6.0].into_iter().enumerate() {
            p.set_objective(j, c);
        }
        p.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0);
        p.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0);
        p.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_close(s.objective, 0.05);
    }

    #[test]
    fn malformed() {
        let mut p = LinearProgram::new(2);
        p.add_constraint(vec![1.0], Sense::Le, 1.0);
        assert!(matches!(lp_solve(&p), Err(Error::MalformedProgram(_))));
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![f64::NAN], Sense::Le, 1.0);
        assert!(matches!(lp_solve(&p), Err(Error::MalformedProgram(_))));
    }
}
