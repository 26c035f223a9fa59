//! Small dense bounded-variable simplex, independent of the main LP engine.
//!
//! Used by the oracles, so that oracle answers never depend on the code path
//! they are meant to check. Rows are ranged (`lower ≤ a·x ≤ upper`), columns
//! may be free. Phase 1 minimizes artificial infeasibility, phase 2 the
//! objective; Dantzig pricing switches to Bland's rule after a run of
//! degenerate pivots.

use super::SolverError;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const CHECK_TOL: f64 = 1e-6;
const STALL_LIMIT: usize = 50;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, f64)>,
    lower: f64,
    upper: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DenseLp {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DenseOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl DenseLp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    /// Adds `lower ≤ Σ a·x ≤ upper`; use infinities for one-sided rows.
    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, lower: f64, upper: f64) {
        self.rows.push(Row { terms, lower, upper });
    }

    pub fn solve(&self) -> Result<DenseOutcome, SolverError> {
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u)
            || self.rows.iter().any(|r| r.lower > r.upper)
        {
            return Ok(DenseOutcome::Infeasible);
        }
        let mut tableau = Tableau::new(self);
        if !tableau.phase1()? {
            return Ok(DenseOutcome::Infeasible);
        }
        if !tableau.phase2(&self.cost)? {
            return Ok(DenseOutcome::Unbounded);
        }
        let values: Vec<f64> = tableau.value[..self.num_vars()].to_vec();
        self.check(&values)?;
        let objective = self.cost.iter().zip(&values).map(|(c, x)| c * x).sum();
        Ok(DenseOutcome::Optimal { values, objective })
    }

    fn check(&self, values: &[f64]) -> Result<(), SolverError> {
        for (j, &v) in values.iter().enumerate() {
            if v < self.lower[j] - CHECK_TOL || v > self.upper[j] + CHECK_TOL {
                return Err(SolverError::Numerical(format!("dense simplex drifted on column {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let a: f64 = row.terms.iter().map(|&(j, c)| c * values[j]).sum();
            if a < row.lower - CHECK_TOL || a > row.upper + CHECK_TOL {
                return Err(SolverError::Numerical(format!("dense simplex drifted on row {i}")));
            }
        }
        Ok(())
    }
}

struct Tableau {
    /// `B⁻¹ [A | −I | diag(σ)]`, one row per constraint.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    n_struct: usize,
    n_rows: usize,
}

impl Tableau {
    fn new(lp: &DenseLp) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let width = n + 2 * m;
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut value: Vec<f64> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    lower[j]
                } else if upper[j].is_finite() {
                    upper[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut t = vec![vec![0.0; width]; m];
        let mut slack_values = Vec::with_capacity(m);
        let mut art_values = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let activity: f64 = row.terms.iter().map(|&(j, c)| c * value[j]).sum();
            let slack = activity.clamp(row.lower, row.upper);
            let excess = activity - slack;
            let sigma = if excess >= 0.0 { -1.0 } else { 1.0 };
            // Row i of B⁻¹A with B = diag(σ): multiply by σ.
            for &(j, c) in &row.terms {
                t[i][j] += sigma * c;
            }
            t[i][n + i] = -sigma;
            t[i][n + m + i] = 1.0;
            slack_values.push(slack);
            art_values.push(excess.abs());
        }
        for row in &lp.rows {
            lower.push(row.lower);
            upper.push(row.upper);
        }
        lower.extend(std::iter::repeat_n(0.0, m));
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        value.extend(slack_values);
        value.extend(art_values);
        let basis: Vec<usize> = (n + m..n + 2 * m).collect();
        let mut is_basic = vec![false; width];
        for &b in &basis {
            is_basic[b] = true;
        }
        Self {
            t,
            basis,
            is_basic,
            lower,
            upper,
            value,
            n_struct: n,
            n_rows: m,
        }
    }

    fn width(&self) -> usize {
        self.value.len()
    }

    fn phase1(&mut self) -> Result<bool, SolverError> {
        let (n, m) = (self.n_struct, self.n_rows);
        let mut cost = vec![0.0; self.width()];
        for c in &mut cost[n + m..] {
            *c = 1.0;
        }
        self.optimize(&cost)?;
        let infeasibility: f64 = self.value[n + m..].iter().sum();
        if infeasibility > PHASE1_TOL {
            return Ok(false);
        }
        for j in n + m..n + 2 * m {
            self.upper[j] = 0.0;
            if !self.is_basic[j] {
                self.value[j] = 0.0;
            }
        }
        Ok(true)
    }

    fn phase2(&mut self, structural_cost: &[f64]) -> Result<bool, SolverError> {
        let mut cost = vec![0.0; self.width()];
        cost[..self.n_struct].copy_from_slice(structural_cost);
        self.optimize(&cost)
    }

    /// Returns `false` when the objective is unbounded below.
    fn optimize(&mut self, cost: &[f64]) -> Result<bool, SolverError> {
        let width = self.width();
        let mut stalls = 0usize;
        let mut bland = false;
        for _ in 0..MAX_ITERATIONS {
            // Reduced costs d_j = c_j − c_B · column_j.
            let mut entering: Option<(usize, f64, f64)> = None; // (j, |d|, direction)
            for j in 0..width {
                if self.is_basic[j] {
                    continue;
                }
                let mut d = cost[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    let cb = cost[b];
                    if cb != 0.0 {
                        d -= cb * self.t[i][j];
                    }
                }
                let can_up = self.value[j] < self.upper[j] - 1e-12;
                let can_down = self.value[j] > self.lower[j] + 1e-12;
                let dir = if d < -OPT_TOL && can_up {
                    1.0
                } else if d > OPT_TOL && can_down {
                    -1.0
                } else {
                    continue;
                };
                let better = match entering {
                    None => true,
                    Some((_, best, _)) => !bland && d.abs() > best,
                };
                if better {
                    entering = Some((j, d.abs(), dir));
                }
                if bland && entering.is_some() {
                    break;
                }
            }
            let Some((j, _, dir)) = entering else {
                return Ok(true);
            };

            // Ratio test: how far can x_j move in direction `dir`?
            // Nonbasic slacks may start strictly inside their range.
            let mut step = if dir > 0.0 {
                self.upper[j] - self.value[j]
            } else {
                self.value[j] - self.lower[j]
            };
            let mut leave: Option<(usize, f64)> = None; // (row, |pivot|)
            for i in 0..self.n_rows {
                let alpha = self.t[i][j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                // x_b changes by −dir·α per unit step.
                let change = -dir * alpha;
                let room = if change < 0.0 {
                    self.value[b] - self.lower[b]
                } else {
                    self.upper[b] - self.value[b]
                };
                if !room.is_finite() {
                    continue;
                }
                let ratio = room.max(0.0) / alpha.abs();
                let replace = match leave {
                    None => ratio < step || (ratio == step && step.is_finite()),
                    Some((r, piv)) => {
                        if ratio < step - 1e-12 {
                            true
                        } else if ratio <= step + 1e-12 {
                            if bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > piv
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    step = step.min(ratio);
                    leave = Some((i, alpha.abs()));
                }
            }
            if !step.is_finite() {
                return Ok(false);
            }

            if step <= 1e-12 {
                stalls += 1;
                if stalls > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stalls = 0;
            }

            self.value[j] += dir * step;
            for i in 0..self.n_rows {
                let alpha = self.t[i][j];
                if alpha != 0.0 {
                    let b = self.basis[i];
                    self.value[b] -= dir * alpha * step;
                }
            }
            match leave {
                None => {
                    // Bound flip of the entering column.
                    self.value[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, _)) => {
                    let b = self.basis[r];
                    let change = -dir * self.t[r][j];
                    self.value[b] = if change < 0.0 { self.lower[b] } else { self.upper[b] };
                    self.pivot(r, j);
                }
            }
        }
        Err(SolverError::Numerical("dense simplex iteration limit".into()))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        for v in &mut self.t[r] {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let old = self.basis[r];
        self.is_basic[old] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }
}
