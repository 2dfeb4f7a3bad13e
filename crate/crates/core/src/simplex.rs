//! Bounded-variable revised primal simplex.
//!
//! Every row `a_i x (rel) b_i` gets a logical column `r_i = a_i x` whose
//! bounds encode the relation, so the working system is `A x - r = 0` with
//! all the bound information on the columns. Rows whose logical cannot start
//! inside its bounds get an artificial column; phase 1 drives the artificials
//! to zero, phase 2 optimizes the real objective with the artificials fixed
//! at zero.
//!
//! The basis is kept as a dense LU factorization (partial pivoting) plus a
//! product-form eta file, refactorized every [`REFACTOR_INTERVAL`] pivots.
//! Pricing is Dantzig's rule; after [`BLAND_STALL_THRESHOLD`] consecutive
//! degenerate pivots the solver switches to Bland's rule until it makes
//! progress again.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Problem, Relation};

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
pub const REFACTOR_INTERVAL: usize = 50;
pub const BLAND_STALL_THRESHOLD: usize = 100;

const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;

/// Per-variable `(lower, upper)` replacements for the problem bounds.
pub type BoundOverrides = BTreeMap<usize, (f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpLimits {
    pub max_iterations: u64,
}

impl Default for LpLimits {
    fn default() -> Self {
        Self { max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("bound override refers to variable {0}, which does not exist")]
    OverrideOutOfRange(usize),
}

/// Solution of one LP relaxation.
///
/// The vectors are only populated when `status` is [`LpStatus::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row; `c_j - sum_i duals[i] * a_ij` is the reduced cost.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub var_status: Vec<BasisStatus>,
    pub row_status: Vec<BasisStatus>,
    /// `a_i x` for every row.
    pub row_activity: Vec<f64>,
    pub iterations: u64,
}

impl LpResult {
    fn without_solution(status: LpStatus, iterations: u64) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            primal: Vec::new(),
            objective,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            var_status: Vec::new(),
            row_status: Vec::new(),
            row_activity: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves the LP relaxation of `problem` (integrality ignored) with the
/// given bound overrides.
pub fn solve_lp(problem: &Problem, overrides: &BoundOverrides, limits: &LpLimits) -> Result<LpResult, SimplexError> {
    let mut lower = problem.var_lower.clone();
    let mut upper = problem.var_upper.clone();
    for (&j, &(lo, up)) in overrides {
        if j >= problem.num_vars() {
            return Err(SimplexError::OverrideOutOfRange(j));
        }
        lower[j] = lo;
        upper[j] = up;
    }
    solve_lp_with_bounds(problem, &lower, &upper, limits)
}

pub fn solve_lp_with_bounds(
    problem: &Problem,
    lower: &[f64],
    upper: &[f64],
    limits: &LpLimits,
) -> Result<LpResult, SimplexError> {
    if lower.iter().zip(upper).any(|(lo, up)| lo > up || lo.is_nan() || up.is_nan()) {
        return Ok(LpResult::without_solution(LpStatus::Infeasible, 0));
    }
    let mut lp = Tableau::new(problem, lower, upper);
    lp.solve(limits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    Zero,
}

struct Eta {
    row: usize,
    column: Vec<f64>,
}

/// Dense LU of the basis with a product-form update file.
struct Factor {
    m: usize,
    /// Column-major; strict lower part holds L (unit diagonal), upper part U.
    lu: Vec<f64>,
    /// Row `k` of `P B` is row `perm[k]` of `B`.
    perm: Vec<usize>,
    etas: Vec<Eta>,
}

impl Factor {
    fn factorize(m: usize, mut a: Vec<f64>) -> Result<Self, SimplexError> {
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let col = k * m;
            let (mut piv, mut best) = (k, a[col + k].abs());
            for i in k + 1..m {
                let v = a[col + i].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < SINGULAR_TOL {
                return Err(SimplexError::NumericalFailure(format!("singular basis at column {k}")));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..m {
                    a.swap(j * m + piv, j * m + k);
                }
            }
            let d = a[col + k];
            let mut any = false;
            for i in k + 1..m {
                if a[col + i] != 0.0 {
                    a[col + i] /= d;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            for j in k + 1..m {
                let akj = a[j * m + k];
                if akj == 0.0 {
                    continue;
                }
                let (head, tail) = a.split_at_mut(j * m);
                let lcol = &head[col + k + 1..col + m];
                let target = &mut tail[k + 1..m];
                for (t, &l) in target.iter_mut().zip(lcol) {
                    *t -= l * akj;
                }
            }
        }
        Ok(Self { m, lu: a, perm, etas: Vec::new() })
    }

    /// Solves `B v = rhs` in place (`rhs` is in original row order).
    fn ftran(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        scratch.clear();
        scratch.extend(self.perm.iter().map(|&p| rhs[p]));
        let v = scratch;
        for k in 0..m {
            let vk = v[k];
            if vk == 0.0 {
                continue;
            }
            let col = &self.lu[k * m + k + 1..k * m + m];
            for (vi, &l) in v[k + 1..].iter_mut().zip(col) {
                *vi -= l * vk;
            }
        }
        for k in (0..m).rev() {
            if v[k] == 0.0 {
                continue;
            }
            v[k] /= self.lu[k * m + k];
            let vk = v[k];
            let col = &self.lu[k * m..k * m + k];
            for (vi, &u) in v[..k].iter_mut().zip(col) {
                *vi -= u * vk;
            }
        }
        for eta in &self.etas {
            let vr = v[eta.row];
            if vr == 0.0 {
                continue;
            }
            for (i, (vi, &e)) in v.iter_mut().zip(&eta.column).enumerate() {
                if i == eta.row {
                    *vi = e * vr;
                } else {
                    *vi += e * vr;
                }
            }
        }
        rhs.copy_from_slice(v);
    }

    /// Solves `B^T y = rhs` in place.
    fn btran(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.column.iter().zip(rhs.iter()).map(|(e, z)| e * z).sum();
            rhs[eta.row] = s;
        }
        scratch.clear();
        scratch.extend_from_slice(rhs);
        let z = scratch;
        // U^T z = rhs
        for k in 0..m {
            let col = &self.lu[k * m..k * m + k];
            let s: f64 = col.iter().zip(&z[..k]).map(|(u, zi)| u * zi).sum();
            z[k] = (z[k] - s) / self.lu[k * m + k];
        }
        // L^T w = z
        for k in (0..m).rev() {
            let col = &self.lu[k * m + k + 1..k * m + m];
            let s: f64 = col.iter().zip(&z[k + 1..]).map(|(l, zi)| l * zi).sum();
            z[k] -= s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            rhs[p] = z[k];
        }
    }

    fn push_eta(&mut self, row: usize, w: &[f64]) {
        let piv = w[row];
        let column = w
            .iter()
            .enumerate()
            .map(|(i, &wi)| if i == row { 1.0 / piv } else { -wi / piv })
            .collect();
        self.etas.push(Eta { row, column });
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterLimit,
}

struct Tableau {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    factor: Option<Factor>,
    objective: Vec<f64>,
    iterations: u64,
    scratch: Vec<f64>,
}

impl Tableau {
    fn new(problem: &Problem, lower: &[f64], upper: &[f64]) -> Self {
        let n = problem.num_vars();
        let m = problem.num_cons();
        let total = n + 2 * m;

        let mut counts = vec![0usize; n + 1];
        for con in &problem.constraints {
            for &(j, _) in &con.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, con) in problem.constraints.iter().enumerate() {
            for &(j, a) in &con.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut lo = Vec::with_capacity(total);
        let mut up = Vec::with_capacity(total);
        lo.extend_from_slice(lower);
        up.extend_from_slice(upper);
        for con in &problem.constraints {
            let (l, u) = match con.relation {
                Relation::Le => (f64::NEG_INFINITY, con.rhs),
                Relation::Ge => (con.rhs, f64::INFINITY),
                Relation::Eq => (con.rhs, con.rhs),
            };
            lo.push(l);
            up.push(u);
        }
        lo.extend(std::iter::repeat_n(0.0, m));
        up.extend(std::iter::repeat_n(0.0, m));

        let mut objective = vec![0.0; total];
        objective[..n].copy_from_slice(&problem.objective);

        let mut x = vec![0.0; total];
        let mut state = vec![VarState::Zero; total];
        for j in 0..n {
            if lo[j].is_finite() {
                x[j] = lo[j];
                state[j] = VarState::AtLower;
            } else if up[j].is_finite() {
                x[j] = up[j];
                state[j] = VarState::AtUpper;
            }
        }

        let mut activity = vec![0.0; m];
        for j in 0..n {
            if x[j] != 0.0 {
                for k in col_start[j]..col_start[j + 1] {
                    activity[col_row[k]] += col_val[k] * x[j];
                }
            }
        }

        let mut art_sign = vec![-1.0; m];
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            let r = n + i;
            let a = n + m + i;
            let act = activity[i];
            if act >= lo[r] && act <= up[r] {
                x[r] = act;
                state[r] = VarState::Basic(i);
                basis.push(r);
                state[a] = VarState::AtLower;
            } else {
                let (bound, st) = if act < lo[r] { (lo[r], VarState::AtLower) } else { (up[r], VarState::AtUpper) };
                x[r] = bound;
                state[r] = st;
                let res = act - bound;
                art_sign[i] = if res > 0.0 { -1.0 } else { 1.0 };
                x[a] = res.abs();
                up[a] = f64::INFINITY;
                state[a] = VarState::Basic(i);
                basis.push(a);
            }
        }

        Self {
            m,
            n,
            col_start,
            col_row,
            col_val,
            art_sign,
            lower: lo,
            upper: up,
            x,
            state,
            basis,
            factor: None,
            objective,
            iterations: 0,
            scratch: Vec::new(),
        }
    }

    /// Scatters column `j` of `[A | -I | diag(sign)]` into `out`.
    fn load_column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[k]] = self.col_val[k];
            }
        } else if j < self.n + self.m {
            out[j - self.n] = -1.0;
        } else {
            let i = j - self.n - self.m;
            out[i] = self.art_sign[i];
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|k| self.col_val[k] * y[self.col_row[k]]).sum()
        } else if j < self.n + self.m {
            -y[j - self.n]
        } else {
            let i = j - self.n - self.m;
            self.art_sign[i] * y[i]
        }
    }

    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut dense = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.load_column(j, &mut col);
            dense[k * m..(k + 1) * m].copy_from_slice(&col);
        }
        self.factor = Some(Factor::factorize(m, dense)?);
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.x.len() {
            if matches!(self.state[j], VarState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[k]] -= self.col_val[k] * xj;
                }
            } else if j < self.n + self.m {
                rhs[j - self.n] += xj;
            } else {
                let i = j - self.n - self.m;
                rhs[i] -= self.art_sign[i] * xj;
            }
        }
        let factor = self.factor.as_ref().expect("factorized");
        factor.ftran(&mut rhs, &mut self.scratch);
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[i];
        }
    }

    fn duals(&mut self, cost: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.factor.as_ref().expect("factorized").btran(&mut y, &mut self.scratch);
        y
    }

    /// Picks the entering column and its direction (+1 increase, -1 decrease).
    fn price(&self, cost: &[f64], y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.x.len() {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = cost[j] - self.column_dot(j, y);
            let dir = match st {
                VarState::AtLower if d < -OPT_TOL => 1.0,
                VarState::AtUpper if d > OPT_TOL => -1.0,
                VarState::Zero if d.abs() > OPT_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run_phase(&mut self, cost: &[f64], limits: &LpLimits) -> Result<PhaseOutcome, SimplexError> {
        let m = self.m;
        let mut since_refactor = 0usize;
        let mut fresh = false;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut w = vec![0.0; m];
        if self.factor.is_none() {
            self.refactor()?;
            fresh = true;
        }
        loop {
            if since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
                since_refactor = 0;
                fresh = true;
            }
            if self.iterations >= limits.max_iterations {
                return Ok(PhaseOutcome::IterLimit);
            }
            let y = self.duals(cost);
            let Some((q, dir)) = self.price(cost, &y, bland) else {
                if fresh {
                    return Ok(PhaseOutcome::Optimal);
                }
                self.refactor()?;
                since_refactor = 0;
                fresh = true;
                continue;
            };

            self.load_column(q, &mut w);
            self.factor.as_ref().expect("factorized").ftran(&mut w, &mut self.scratch);

            let flip = self.upper[q] - self.lower[q];
            let leave = self.ratio_test(&w, dir, bland);
            let (step, leaving) = match leave {
                Some((r, t)) if t < flip => (t, Some(r)),
                _ if flip.is_finite() => (flip, None),
                _ => return Ok(PhaseOutcome::Unbounded),
            };

            self.x[q] += dir * step;
            if step != 0.0 {
                for (i, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= dir * step * w[i];
                }
            }
            match leaving {
                Some(r) => {
                    let p = self.basis[r];
                    let rate = -dir * w[r];
                    if rate < 0.0 {
                        self.x[p] = self.lower[p];
                        self.state[p] = VarState::AtLower;
                    } else {
                        self.x[p] = self.upper[p];
                        self.state[p] = VarState::AtUpper;
                    }
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic(r);
                    self.factor.as_mut().expect("factorized").push_eta(r, &w);
                    since_refactor += 1;
                }
                None => {
                    self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
            }
            fresh = false;
            self.iterations += 1;

            if step <= DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run >= BLAND_STALL_THRESHOLD {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    /// Returns the leaving basis position and the step length, or `None` if
    /// no basic variable limits the step.
    fn ratio_test(&self, w: &[f64], dir: f64, bland: bool) -> Option<(usize, f64)> {
        let exact_ratio = |i: usize, slack: f64| -> Option<f64> {
            let rate = -dir * w[i];
            if rate.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.basis[i];
            if rate < 0.0 {
                let lo = self.lower[j];
                lo.is_finite().then(|| ((self.x[j] - lo + slack) / -rate).max(0.0))
            } else {
                let up = self.upper[j];
                up.is_finite().then(|| ((up - self.x[j] + slack) / rate).max(0.0))
            }
        };

        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if let Some(t) = exact_ratio(i, 0.0) {
                    let better = match best {
                        None => true,
                        Some((r, bt)) => t < bt - DEGENERATE_STEP || (t <= bt + DEGENERATE_STEP && self.basis[i] < self.basis[r]),
                    };
                    if better {
                        best = Some((i, t));
                    }
                }
            }
            return best;
        }

        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            if let Some(t) = exact_ratio(i, HARRIS_TOL) {
                bound = bound.min(t);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            if let Some(t) = exact_ratio(i, 0.0) {
                if t <= bound {
                    let mag = w[i].abs();
                    if best.is_none_or(|(_, _, bm)| mag > bm) {
                        best = Some((i, t, mag));
                    }
                }
            }
        }
        best.map(|(i, t, _)| (i, t))
    }

    fn solve(&mut self, limits: &LpLimits) -> Result<LpResult, SimplexError> {
        let (n, m) = (self.n, self.m);
        let needs_phase1 = (0..m).any(|i| self.upper[n + m + i] > 0.0);
        if needs_phase1 {
            let mut cost = vec![0.0; self.x.len()];
            for c in &mut cost[n + m..] {
                *c = 1.0;
            }
            match self.run_phase(&cost, limits)? {
                PhaseOutcome::IterLimit => return Ok(LpResult::without_solution(LpStatus::IterLimit, self.iterations)),
                PhaseOutcome::Unbounded => {
                    return Err(SimplexError::NumericalFailure("phase 1 reported an unbounded ray".into()))
                }
                PhaseOutcome::Optimal => {}
            }
            let infeasibility = (n + m..n + 2 * m).map(|j| self.x[j]).fold(0.0, f64::max);
            if infeasibility > FEAS_TOL {
                return Ok(LpResult::without_solution(LpStatus::Infeasible, self.iterations));
            }
            for j in n + m..n + 2 * m {
                self.upper[j] = 0.0;
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.x[j] = 0.0;
                    self.state[j] = VarState::AtLower;
                }
            }
        }

        let cost = self.objective.clone();
        match self.run_phase(&cost, limits)? {
            PhaseOutcome::IterLimit => return Ok(LpResult::without_solution(LpStatus::IterLimit, self.iterations)),
            PhaseOutcome::Unbounded => return Ok(LpResult::without_solution(LpStatus::Unbounded, self.iterations)),
            PhaseOutcome::Optimal => {}
        }

        let y = self.duals(&cost);
        let primal: Vec<f64> = self.x[..n].to_vec();
        let objective = primal.iter().zip(&cost[..n]).map(|(v, c)| v * c).sum();
        let reduced_costs = (0..n).map(|j| cost[j] - self.column_dot(j, &y)).collect();
        let status_of = |st: VarState| match st {
            VarState::Basic(_) => BasisStatus::Basic,
            VarState::AtLower => BasisStatus::AtLower,
            VarState::AtUpper => BasisStatus::AtUpper,
            VarState::Zero => BasisStatus::Free,
        };
        let var_status = self.state[..n].iter().map(|&s| status_of(s)).collect();
        let row_status = (0..m)
            .map(|i| {
                let r = n + i;
                match self.state[r] {
                    VarState::Basic(_) => BasisStatus::Basic,
                    s => status_of(s),
                }
            })
            .collect();
        Ok(LpResult {
            status: LpStatus::Optimal,
            primal,
            objective,
            duals: y,
            reduced_costs,
            var_status,
            row_status,
            row_activity: self.x[n..n + m].to_vec(),
            iterations: self.iterations,
        })
    }
}
