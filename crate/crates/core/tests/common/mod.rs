//! Independent reference solvers and instance builders for tests.
//!
//! The oracles share no code with the library's simplex or branch-and-bound:
//! LPs are solved by enumerating every basic solution, MILPs by enumerating
//! every integer assignment.

#![allow(dead_code)]

use milpenv::instgen::{sample_graph, Family, GeneratorConfig};
use milpenv::problem::{Problem, ProblemBuilder, Relation};
use milpenv::rng::SeededRng;

const FEAS_EPS: f64 = 1e-9;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` if (numerically) singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], total: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < total - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn feasible(p: &Problem, lower: &[f64], upper: &[f64], x: &[f64]) -> bool {
    let scale = |v: f64| FEAS_EPS * v.abs().max(1.0);
    for j in 0..x.len() {
        if x[j] < lower[j] - scale(lower[j]) || x[j] > upper[j] + scale(upper[j]) {
            return false;
        }
    }
    p.constraints.iter().all(|c| {
        let act = c.activity(x);
        let tol = 1e-8 * c.rhs.abs().max(1.0);
        match c.relation {
            Relation::Le => act <= c.rhs + tol,
            Relation::Ge => act >= c.rhs - tol,
            Relation::Eq => (act - c.rhs).abs() <= tol,
        }
    })
}

/// Optimal minimization objective of the LP relaxation of `p` under the
/// given finite bounds, by enumeration of all vertices. `None` if
/// infeasible.
pub fn lp_vertex_oracle(p: &Problem, lower: &[f64], upper: &[f64]) -> Option<f64> {
    lp_vertex_oracle_solution(p, lower, upper).map(|(v, _)| v)
}

pub fn lp_vertex_oracle_solution(p: &Problem, lower: &[f64], upper: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = p.num_vars();
    assert!(lower.iter().chain(upper).all(|v| v.is_finite()), "oracle needs finite bounds");
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return None;
    }
    // Fixed variables are substituted; the rest are the unknowns.
    let free: Vec<usize> = (0..n).filter(|&j| lower[j] < upper[j]).collect();
    let mut base = vec![0.0; n];
    for j in 0..n {
        if lower[j] == upper[j] {
            base[j] = lower[j];
        }
    }
    let k = free.len();
    if k == 0 {
        return feasible(p, lower, upper, &base).then(|| (p.objective_value(&base), base));
    }

    // Hyperplanes: each row, then each free variable at its lower and upper bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &p.constraints {
        let mut a = vec![0.0; k];
        let mut rhs = c.rhs;
        for &(j, v) in &c.coeffs {
            match free.iter().position(|&f| f == j) {
                Some(pos) => a[pos] += v,
                None => rhs -= v * base[j],
            }
        }
        planes.push((a, rhs));
    }
    for (pos, &j) in free.iter().enumerate() {
        let mut a = vec![0.0; k];
        a[pos] = 1.0;
        planes.push((a.clone(), lower[j]));
        planes.push((a, upper[j]));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(sol) = solve_dense(a, b) {
            let mut x = base.clone();
            for (pos, &j) in free.iter().enumerate() {
                x[j] = sol[pos];
            }
            if feasible(p, lower, upper, &x) {
                let v = p.objective_value(&x);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
        if !next_combination(&mut idx, planes.len()) {
            break;
        }
    }
    best
}

/// Optimal minimization objective of the MILP `p` by enumerating every
/// integer assignment (integer variables need finite bounds), solving the
/// remaining continuous LP with [`lp_vertex_oracle`]. `None` if infeasible.
pub fn milp_brute_force(p: &Problem) -> Option<f64> {
    let ints: Vec<usize> = (0..p.num_vars()).filter(|&j| p.is_integer[j]).collect();
    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| (p.var_lower[j].ceil() as i64, p.var_upper[j].floor() as i64))
        .collect();
    if ranges.iter().any(|(l, u)| l > u) {
        return None;
    }
    let mut assignment: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut best: Option<f64> = None;
    loop {
        let mut lower = p.var_lower.clone();
        let mut upper = p.var_upper.clone();
        for (pos, &j) in ints.iter().enumerate() {
            lower[j] = assignment[pos] as f64;
            upper[j] = assignment[pos] as f64;
        }
        let value = if ints.len() == p.num_vars() {
            let x = lower.clone();
            feasible(p, &lower, &upper, &x).then(|| p.objective_value(&x))
        } else {
            lp_vertex_oracle(p, &lower, &upper)
        };
        if let Some(v) = value {
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == ints.len() {
                return best;
            }
            if assignment[pos] < ranges[pos].1 {
                assignment[pos] += 1;
                break;
            }
            assignment[pos] = ranges[pos].0;
            pos += 1;
        }
    }
}

/// Random LP with `n` variables in `[-5, 5]`-ish boxes, `m` mixed rows and
/// small integer coefficients.
pub fn random_bounded_lp(rng: &mut SeededRng, n: usize, m: usize) -> Problem {
    let mut b = ProblemBuilder::new("random_lp");
    for _ in 0..n {
        let lo = rng.range_inclusive(-4, 2) as f64;
        let up = lo + rng.range_inclusive(0, 6) as f64;
        b.add_var(rng.range_inclusive(-9, 9) as f64, lo, up, false);
    }
    for _ in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.bernoulli(0.7) {
                let a = rng.range_inclusive(-6, 6) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let relation = match rng.below(5) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        b.add_constraint(coeffs, relation, rng.range_inclusive(-10, 15) as f64);
    }
    b.build()
}

/// Random pure-binary MILP with integer data. About half are maximizations.
pub fn random_binary_milp(rng: &mut SeededRng, n: usize, m: usize) -> Problem {
    let maximize = rng.bernoulli(0.5);
    let mut b = ProblemBuilder::new("random_milp");
    if maximize {
        b = b.maximize();
    }
    for _ in 0..n {
        b.add_binary(rng.range_inclusive(-10, 10) as f64);
    }
    for _ in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.bernoulli(0.6) {
                let a = rng.range_inclusive(-8, 8) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let weight: f64 = coeffs.iter().map(|c| c.1.abs()).sum();
        let relation = match rng.below(6) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let half = (weight / 2.0) as i64;
        let rhs = rng.range_inclusive(-half, half.max(1)) as f64;
        b.add_constraint(coeffs, relation, rhs);
    }
    b.build()
}

/// Small general-integer MILP with a continuous variable.
pub fn random_mixed_milp(rng: &mut SeededRng) -> Problem {
    let mut b = ProblemBuilder::new("random_mixed");
    for _ in 0..3 {
        b.add_var(rng.range_inclusive(-5, 5) as f64, 0.0, rng.range_inclusive(1, 3) as f64, true);
    }
    b.add_var(rng.range_inclusive(-5, 5) as f64, -2.0, 4.0, false);
    for _ in 0..3 {
        let coeffs = (0..4).map(|j| (j, rng.range_inclusive(-4, 4) as f64)).filter(|c| c.1 != 0.0).collect();
        let rel = if rng.bernoulli(0.5) { Relation::Le } else { Relation::Ge };
        b.add_constraint(coeffs, rel, rng.range_inclusive(-4, 6) as f64);
    }
    b.build()
}

/// `max 5x + 4y  s.t. 6x + 4y <= 9`, x, y binary. Root LP: x = 5/6, y = 1.
pub fn knapsack() -> Problem {
    let mut b = ProblemBuilder::new("knapsack").maximize();
    let x = b.add_binary(5.0);
    let y = b.add_binary(4.0);
    b.add_constraint(vec![(x, 6.0), (y, 4.0)], Relation::Le, 9.0);
    b.build()
}

/// Binary problem whose LP relaxation is already integral.
pub fn integral_root() -> Problem {
    let mut b = ProblemBuilder::new("integral").maximize();
    let x = b.add_binary(3.0);
    let y = b.add_binary(2.0);
    b.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 2.0);
    b.build()
}

/// Every subset of `0..n`, as bitmasks.
pub fn subsets(n: usize) -> impl Iterator<Item = u64> {
    assert!(n < 32);
    0..(1u64 << n)
}

fn row_vars(p: &Problem, i: usize) -> Vec<usize> {
    p.constraints[i].coeffs.iter().map(|c| c.0).collect()
}

/// Optimum of the `k`-th instance of a tiny generator configuration, in
/// minimization form, found by a family-specific enumeration.
pub fn family_oracle(cfg: &GeneratorConfig, k: u64, p: &Problem) -> f64 {
    let n = p.num_vars();
    match &cfg.family {
        Family::SetCover(_) => {
            let rows: Vec<Vec<usize>> = (0..p.num_cons()).map(|i| row_vars(p, i)).collect();
            subsets(n)
                .filter(|&s| rows.iter().all(|r| r.iter().any(|&j| s >> j & 1 == 1)))
                .map(|s| (0..n).filter(|&j| s >> j & 1 == 1).map(|j| p.objective[j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        }
        Family::CombAuction(_) => {
            let conflicts: Vec<u64> =
                (0..p.num_cons()).map(|i| row_vars(p, i).iter().fold(0, |m, &j| m | 1 << j)).collect();
            let best = subsets(n)
                .filter(|&s| conflicts.iter().all(|&c| (s & c).count_ones() <= 1))
                .map(|s| (0..n).filter(|&j| s >> j & 1 == 1).map(|j| -p.objective[j]).sum::<f64>())
                .fold(0.0, f64::max);
            -best
        }
        Family::IndepSet(params) => {
            let edges = sample_graph(params, &mut SeededRng::new(cfg.seed, k));
            let best = subsets(params.nodes)
                .filter(|&s| edges.iter().all(|&(u, v)| !(s >> u & 1 == 1 && s >> v & 1 == 1)))
                .map(|s| s.count_ones())
                .max()
                .unwrap();
            -(best as f64)
        }
        Family::CapFacility(params) => {
            let nf = params.facilities;
            let mut best = f64::INFINITY;
            for open in subsets(nf) {
                // Fix the open decisions; assignments to closed sites are zero.
                let mut lower = p.var_lower.clone();
                let mut upper = p.var_upper.clone();
                for i in 0..nf {
                    let v = (open >> i & 1) as f64;
                    lower[i] = v;
                    upper[i] = v;
                    if v == 0.0 {
                        for j in 0..params.customers {
                            upper[nf + i * params.customers + j] = 0.0;
                        }
                    }
                }
                if let Some(v) = lp_vertex_oracle(p, &lower, &upper) {
                    best = best.min(v);
                }
            }
            best
        }
    }
}

/// Panics unless `p`, the `k`-th instance of `cfg`, has its family's shape.
pub fn assert_family_structure(cfg: &GeneratorConfig, k: u64, p: &Problem) {
    assert!(p.validate().is_ok());
    assert_eq!(p.name, cfg.instance_name(k));
    let name = cfg.family.name();
    match &cfg.family {
        Family::SetCover(q) => {
            assert_eq!((p.num_cons(), p.num_vars()), (q.rows, q.cols), "{name}");
            let target = (q.density * (q.rows * q.cols) as f64).round() as usize;
            assert_eq!(p.num_nonzeros(), target.max(2 * q.rows), "{name}");
            let mut used = vec![false; q.cols];
            for c in &p.constraints {
                assert!(c.relation == Relation::Ge && c.rhs == 1.0 && c.coeffs.len() >= 2);
                assert!(c.coeffs.iter().all(|&(_, a)| a == 1.0));
                c.coeffs.iter().for_each(|&(j, _)| used[j] = true);
            }
            assert!(used.iter().all(|&u| u), "{name}: uncovered column");
            assert!(p.objective.iter().all(|&c| c >= 1.0 && c <= q.max_cost as f64 && c.fract() == 0.0));
            assert!(!p.maximize && p.is_integer.iter().all(|&b| b));
        }
        Family::CombAuction(q) => {
            assert!(p.maximize && p.num_vars() == q.bids && p.num_cons() <= q.items, "{name}");
            let mut size = vec![0usize; q.bids];
            for c in &p.constraints {
                assert!(c.relation == Relation::Le && c.rhs == 1.0 && !c.coeffs.is_empty());
                c.coeffs.iter().for_each(|&(j, _)| size[j] += 1);
            }
            for (j, &s) in size.iter().enumerate() {
                let price = -p.objective[j];
                assert!(s >= 1 && price.fract() == 0.0);
                assert!(price >= 75.0 * s as f64 && price <= 125.0 * s as f64, "{name}: bid {j}");
            }
        }
        Family::CapFacility(q) => {
            let (nf, nc) = (q.facilities, q.customers);
            assert_eq!((p.num_vars(), p.num_cons()), (nf + nf * nc, nc + nf + 1), "{name}");
            assert!(p.is_integer[..nf].iter().all(|&b| b) && p.is_integer[nf..].iter().all(|&b| !b));
            for j in 0..nc {
                assert_eq!(p.constraints[j].relation, Relation::Eq);
                assert_eq!(row_vars(p, j), (0..nf).map(|i| nf + i * nc + j).collect::<Vec<_>>());
            }
            let total = &p.constraints[nc + nf];
            let capacity: f64 = total.coeffs.iter().map(|c| c.1).sum();
            assert!((capacity - q.capacity_ratio * total.rhs).abs() <= 1e-9 * total.rhs, "{name}");
            assert!(p.objective.iter().all(|&c| c > 0.0));
        }
        Family::IndepSet(q) => {
            let edges = sample_graph(q, &mut SeededRng::new(cfg.seed, k));
            assert!(p.maximize && p.num_vars() == q.nodes && p.num_cons() == edges.len(), "{name}");
            for (i, &(u, v)) in edges.iter().enumerate() {
                assert!(u < v);
                assert_eq!(row_vars(p, i), vec![u, v]);
            }
            assert!(p.objective.iter().all(|&c| c == -1.0));
        }
    }
}

fn sparse_row(rng: &mut SeededRng, n: usize, density: f64, bound: i64) -> Vec<(usize, f64)> {
    let mut coeffs = Vec::new();
    for j in 0..n {
        if rng.bernoulli(density) {
            let a = rng.range_inclusive(-bound, bound) as f64;
            if a != 0.0 {
                coeffs.push((j, a));
            }
        }
    }
    coeffs
}

/// Rows with a right-hand side that `point` satisfies, loosened by a random
/// integer slack on inequalities.
fn rows_through(b: &mut ProblemBuilder, rng: &mut SeededRng, point: &[f64], m: usize, bound: i64) {
    for _ in 0..m {
        let coeffs = sparse_row(rng, point.len(), 0.6, bound);
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let slack = rng.range_inclusive(0, 4) as f64;
        let (relation, rhs) = match rng.below(5) {
            0 => (Relation::Eq, act),
            1 | 2 => (Relation::Ge, act - slack),
            _ => (Relation::Le, act + slack),
        };
        b.add_constraint(coeffs, relation, rhs);
    }
}

/// Random pure-binary MILP with integer data that is feasible by
/// construction.
pub fn random_feasible_binary_milp(rng: &mut SeededRng, n: usize, m: usize) -> Problem {
    let mut b = ProblemBuilder::new("feasible_milp");
    if rng.bernoulli(0.5) {
        b = b.maximize();
    }
    for _ in 0..n {
        b.add_binary(rng.range_inclusive(-10, 10) as f64);
    }
    let point: Vec<f64> = (0..n).map(|_| rng.below(2) as f64).collect();
    rows_through(&mut b, rng, &point, m, 8);
    b.build()
}

/// Random bounded LP, feasible by construction through an integer point of
/// the box.
pub fn random_feasible_lp(rng: &mut SeededRng, n: usize, m: usize) -> Problem {
    let mut b = ProblemBuilder::new("feasible_lp");
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.range_inclusive(-4, 2);
        let up = lo + rng.range_inclusive(0, 6);
        b.add_var(rng.range_inclusive(-9, 9) as f64, lo as f64, up as f64, false);
        point.push(rng.range_inclusive(lo, up) as f64);
    }
    rows_through(&mut b, rng, &point, m, 6);
    b.build()
}
