//! Seeded generators for four classic MILP families.
//!
//! Instance `k` of a stream is a pure function of the generator
//! configuration and `k`: it is drawn from [`SeededRng::new(seed, k)`], so
//! instances can be produced in any order or in parallel.
//!
//! [`SeededRng::new(seed, k)`]: crate::rng::SeededRng::new

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Problem, ProblemBuilder, Relation};
use crate::rng::SeededRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), GenError> {
    if ok {
        Ok(())
    } else {
        Err(GenError::InvalidParameter(message()))
    }
}

/// Minimum-cost set cover: `min c x` s.t. every row is covered at least once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetCoverParams {
    pub rows: usize,
    pub cols: usize,
    /// Fraction of nonzero entries in the constraint matrix.
    pub density: f64,
    /// Column costs are uniform on `1..=max_cost`.
    pub max_cost: u32,
}

impl Default for SetCoverParams {
    fn default() -> Self {
        Self { rows: 500, cols: 1000, density: 0.05, max_cost: 100 }
    }
}

impl SetCoverParams {
    pub fn validate(&self) -> Result<(), GenError> {
        check(self.rows > 0 && self.cols > 0, || "set cover needs rows > 0 and cols > 0".into())?;
        check(self.density > 0.0 && self.density <= 1.0, || format!("density must be in (0, 1], got {}", self.density))?;
        check(self.density * self.cols as f64 >= 2.0, || {
            format!("density * cols must be >= 2, got {}", self.density * self.cols as f64)
        })?;
        check(self.max_cost >= 1, || "max_cost must be >= 1".into())
    }
}

/// Every row gets two distinct random columns, every column left empty gets
/// one random row, then uniformly random cells are added until the target
/// density is reached.
pub fn set_cover(p: &SetCoverParams, rng: &mut SeededRng, name: &str) -> Result<Problem, GenError> {
    p.validate()?;
    let (m, n) = (p.rows, p.cols);
    let target = ((p.density * (m * n) as f64).round() as usize).min(m * n);
    let mut cell = vec![false; m * n];
    let mut count = 0usize;
    let mark = |cell: &mut Vec<bool>, i: usize, j: usize, count: &mut usize| {
        if !cell[i * n + j] {
            cell[i * n + j] = true;
            *count += 1;
        }
    };
    for i in 0..m {
        for j in rng.sample_distinct(2, n) {
            mark(&mut cell, i, j, &mut count);
        }
    }
    let mut covered = vec![false; n];
    for i in 0..m {
        for j in 0..n {
            covered[j] |= cell[i * n + j];
        }
    }
    for j in 0..n {
        if !covered[j] {
            let i = rng.index(m);
            mark(&mut cell, i, j, &mut count);
        }
    }
    while count < target {
        let k = rng.index(m * n);
        mark(&mut cell, k / n, k % n, &mut count);
    }

    let mut b = ProblemBuilder::new(name);
    for _ in 0..n {
        b.add_binary(rng.range_inclusive(1, i64::from(p.max_cost)) as f64);
    }
    for i in 0..m {
        let coeffs = (0..n).filter(|&j| cell[i * n + j]).map(|j| (j, 1.0)).collect();
        b.add_constraint(coeffs, Relation::Ge, 1.0);
    }
    Ok(b.build())
}

/// Combinatorial auction winner determination: accept a set of bids with
/// maximum total price so that no item is sold twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombAuctionParams {
    pub items: usize,
    pub bids: usize,
    /// Bundle size is `1 + Binomial(items - 1, extra_item_prob)`.
    pub extra_item_prob: f64,
}

impl Default for CombAuctionParams {
    fn default() -> Self {
        Self { items: 100, bids: 500, extra_item_prob: 0.05 }
    }
}

impl CombAuctionParams {
    pub fn validate(&self) -> Result<(), GenError> {
        check(self.items > 0 && self.bids > 0, || "auction needs items > 0 and bids > 0".into())?;
        check((0.0..=1.0).contains(&self.extra_item_prob), || {
            format!("extra_item_prob must be in [0, 1], got {}", self.extra_item_prob)
        })
    }
}

/// Each bid draws a bundle of distinct items (size `1 + Binomial(items - 1,
/// extra_item_prob)`) and a price of `size * U{75..=125}`. Items covered by
/// at least one bid get a row `sum x_b <= 1` with bids in index order.
pub fn comb_auction(p: &CombAuctionParams, rng: &mut SeededRng, name: &str) -> Result<Problem, GenError> {
    p.validate()?;
    let mut bidders_of: Vec<Vec<usize>> = vec![Vec::new(); p.items];
    let mut b = ProblemBuilder::new(name).maximize();
    for bid in 0..p.bids {
        let size = 1 + rng.binomial(p.items as u64 - 1, p.extra_item_prob) as usize;
        for item in rng.sample_distinct(size, p.items) {
            bidders_of[item].push(bid);
        }
        let price = size as i64 * rng.range_inclusive(75, 125);
        b.add_binary(price as f64);
    }
    for bids in bidders_of.iter().filter(|v| !v.is_empty()) {
        b.add_constraint(bids.iter().map(|&j| (j, 1.0)).collect(), Relation::Le, 1.0);
    }
    Ok(b.build())
}

/// Capacitated facility location with splittable demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapFacilityParams {
    pub customers: usize,
    pub facilities: usize,
    /// Total capacity divided by total demand.
    pub capacity_ratio: f64,
}

impl Default for CapFacilityParams {
    fn default() -> Self {
        Self { customers: 100, facilities: 100, capacity_ratio: 5.0 }
    }
}

impl CapFacilityParams {
    pub fn validate(&self) -> Result<(), GenError> {
        check(self.customers > 0 && self.facilities > 0, || "facility location needs customers and facilities".into())?;
        check(self.capacity_ratio > 0.0 && self.capacity_ratio.is_finite(), || {
            format!("capacity_ratio must be > 0, got {}", self.capacity_ratio)
        })
    }
}

/// Customers and facilities sit uniformly in the unit square. Demands are
/// `U{5..=35}`, raw capacities `U{10..=160}` rescaled so that total capacity
/// is `capacity_ratio` times total demand, fixed costs are
/// `U{100..=110} * sqrt(capacity) + U{0..=90}`, and serving customer `j`
/// entirely from facility `i` costs `10 * demand_j * distance(i, j)`.
///
/// Variables: `y_i` (open facility, binary) for every facility, then
/// `x_ij` (served fraction, continuous in `[0, 1]`) at index
/// `facilities + i * customers + j`. Rows: one demand equality per customer,
/// one capacity row per facility, one total-capacity row.
pub fn cap_facility(p: &CapFacilityParams, rng: &mut SeededRng, name: &str) -> Result<Problem, GenError> {
    p.validate()?;
    let (nc, nf) = (p.customers, p.facilities);
    let customers: Vec<(f64, f64)> = (0..nc).map(|_| (rng.unit(), rng.unit())).collect();
    let facilities: Vec<(f64, f64)> = (0..nf).map(|_| (rng.unit(), rng.unit())).collect();
    let demand: Vec<f64> = (0..nc).map(|_| rng.range_inclusive(5, 35) as f64).collect();
    let raw: Vec<f64> = (0..nf).map(|_| rng.range_inclusive(10, 160) as f64).collect();
    let total_demand: f64 = demand.iter().sum();
    let raw_total: f64 = raw.iter().sum();
    let capacity: Vec<f64> = raw.iter().map(|r| r * p.capacity_ratio * total_demand / raw_total).collect();
    let fixed: Vec<f64> = capacity
        .iter()
        .map(|s| rng.range_inclusive(100, 110) as f64 * s.sqrt() + rng.range_inclusive(0, 90) as f64)
        .collect();

    let mut b = ProblemBuilder::new(name);
    for (i, f) in fixed.iter().enumerate() {
        b.add_named_var(format!("y{i}"), *f, 0.0, 1.0, true);
    }
    for (i, &(fx, fy)) in facilities.iter().enumerate() {
        for (j, &(cx, cy)) in customers.iter().enumerate() {
            let dist = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt();
            b.add_named_var(format!("x{i}_{j}"), 10.0 * demand[j] * dist, 0.0, 1.0, false);
        }
    }
    let x = |i: usize, j: usize| nf + i * nc + j;
    for j in 0..nc {
        b.add_constraint((0..nf).map(|i| (x(i, j), 1.0)).collect(), Relation::Eq, 1.0);
    }
    for i in 0..nf {
        let mut coeffs = vec![(i, -capacity[i])];
        coeffs.extend((0..nc).map(|j| (x(i, j), demand[j])));
        b.add_constraint(coeffs, Relation::Le, 0.0);
    }
    b.add_constraint((0..nf).map(|i| (i, capacity[i])).collect(), Relation::Ge, total_demand);
    Ok(b.build())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GraphModel {
    ErdosRenyi { edge_prob: f64 },
    BarabasiAlbert { affinity: usize },
}

/// Maximum independent set with one packing row per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndepSetParams {
    pub nodes: usize,
    pub graph: GraphModel,
}

impl Default for IndepSetParams {
    fn default() -> Self {
        Self { nodes: 500, graph: GraphModel::BarabasiAlbert { affinity: 4 } }
    }
}

impl IndepSetParams {
    pub fn validate(&self) -> Result<(), GenError> {
        check(self.nodes >= 2, || format!("independent set needs >= 2 nodes, got {}", self.nodes))?;
        match self.graph {
            GraphModel::ErdosRenyi { edge_prob } => check((0.0..=1.0).contains(&edge_prob), || {
                format!("edge_prob must be in [0, 1], got {edge_prob}")
            }),
            GraphModel::BarabasiAlbert { affinity } => check(affinity >= 1, || "affinity must be >= 1".into()),
        }
    }
}

/// Undirected simple graph as sorted `(u, v)` pairs with `u < v`.
///
/// Erdos-Renyi tests every pair `u < v` in lexicographic order. Barabasi-
/// Albert starts from a clique on `affinity + 1` nodes and attaches each new
/// node to `affinity` distinct existing nodes chosen with probability
/// proportional to their degree.
pub fn sample_graph(p: &IndepSetParams, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let n = p.nodes;
    let mut edges = Vec::new();
    match p.graph {
        GraphModel::ErdosRenyi { edge_prob } => {
            for u in 0..n {
                for v in u + 1..n {
                    if rng.bernoulli(edge_prob) {
                        edges.push((u, v));
                    }
                }
            }
        }
        GraphModel::BarabasiAlbert { affinity } => {
            let seed_nodes = (affinity + 1).min(n);
            // Each node appears once per incident edge end.
            let mut ends = Vec::new();
            for u in 0..seed_nodes {
                for v in u + 1..seed_nodes {
                    edges.push((u, v));
                    ends.extend([u, v]);
                }
            }
            for v in seed_nodes..n {
                let mut targets: Vec<usize> = Vec::with_capacity(affinity);
                while targets.len() < affinity {
                    let t = ends[rng.index(ends.len())];
                    if !targets.contains(&t) {
                        targets.push(t);
                    }
                }
                for &t in &targets {
                    edges.push((t, v));
                    ends.extend([t, v]);
                }
            }
            edges.sort_unstable();
        }
    }
    edges
}

pub fn indep_set(p: &IndepSetParams, rng: &mut SeededRng, name: &str) -> Result<Problem, GenError> {
    p.validate()?;
    let edges = sample_graph(p, rng);
    let mut b = ProblemBuilder::new(name).maximize();
    for _ in 0..p.nodes {
        b.add_binary(1.0);
    }
    for (u, v) in edges {
        b.add_constraint(vec![(u, 1.0), (v, 1.0)], Relation::Le, 1.0);
    }
    Ok(b.build())
}

pub const FAMILIES: [&str; 4] = ["set_cover", "comb_auction", "cap_facility", "indep_set"];

/// Preset instance sizes. `Tiny` instances have at most a dozen integer
/// variables so they can be solved by enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Size {
    Tiny,
    Small,
    Default,
}

impl std::str::FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tiny" => Ok(Size::Tiny),
            "small" => Ok(Size::Small),
            "default" => Ok(Size::Default),
            _ => Err(format!("unknown size '{s}' (tiny, small, default)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    SetCover(SetCoverParams),
    CombAuction(CombAuctionParams),
    CapFacility(CapFacilityParams),
    IndepSet(IndepSetParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SetCover(_) => "set_cover",
            Family::CombAuction(_) => "comb_auction",
            Family::CapFacility(_) => "cap_facility",
            Family::IndepSet(_) => "indep_set",
        }
    }

    /// The family with its default parameters.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "set_cover" => Family::SetCover(SetCoverParams::default()),
            "comb_auction" => Family::CombAuction(CombAuctionParams::default()),
            "cap_facility" => Family::CapFacility(CapFacilityParams::default()),
            "indep_set" => Family::IndepSet(IndepSetParams::default()),
            _ => return None,
        })
    }

    /// The family at one of the preset sizes.
    pub fn preset(name: &str, size: Size) -> Option<Self> {
        let family = match (Self::by_name(name)?, size) {
            (f, Size::Default) => f,
            (Family::SetCover(_), Size::Small) => Family::SetCover(SetCoverParams { rows: 50, cols: 100, density: 0.1, max_cost: 100 }),
            (Family::SetCover(_), Size::Tiny) => Family::SetCover(SetCoverParams { rows: 6, cols: 10, density: 0.3, max_cost: 20 }),
            (Family::CombAuction(_), Size::Small) => {
                Family::CombAuction(CombAuctionParams { items: 20, bids: 50, extra_item_prob: 0.1 })
            }
            (Family::CombAuction(_), Size::Tiny) => {
                Family::CombAuction(CombAuctionParams { items: 5, bids: 10, extra_item_prob: 0.3 })
            }
            (Family::CapFacility(_), Size::Small) => {
                Family::CapFacility(CapFacilityParams { customers: 10, facilities: 6, capacity_ratio: 2.0 })
            }
            (Family::CapFacility(_), Size::Tiny) => {
                Family::CapFacility(CapFacilityParams { customers: 2, facilities: 3, capacity_ratio: 2.0 })
            }
            (Family::IndepSet(_), Size::Small) => {
                Family::IndepSet(IndepSetParams { nodes: 50, graph: GraphModel::BarabasiAlbert { affinity: 2 } })
            }
            (Family::IndepSet(_), Size::Tiny) => {
                Family::IndepSet(IndepSetParams { nodes: 10, graph: GraphModel::ErdosRenyi { edge_prob: 0.3 } })
            }
        };
        Some(family)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        match self {
            Family::SetCover(p) => p.validate(),
            Family::CombAuction(p) => p.validate(),
            Family::CapFacility(p) => p.validate(),
            Family::IndepSet(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }

    pub fn instance_name(&self, k: u64) -> String {
        format!("{}_{}_{}", self.family.name(), self.seed, k)
    }

    /// The `k`-th instance of this configuration's stream.
    pub fn generate(&self, k: u64) -> Result<Problem, GenError> {
        let mut rng = SeededRng::new(self.seed, k);
        let name = self.instance_name(k);
        match &self.family {
            Family::SetCover(p) => set_cover(p, &mut rng, &name),
            Family::CombAuction(p) => comb_auction(p, &mut rng, &name),
            Family::CapFacility(p) => cap_facility(p, &mut rng, &name),
            Family::IndepSet(p) => indep_set(p, &mut rng, &name),
        }
    }

    pub fn stream(&self) -> Result<InstanceStream, GenError> {
        self.family.validate()?;
        Ok(InstanceStream { config: self.clone(), next: 0 })
    }
}

/// Endless iterator over the instances of a [`GeneratorConfig`].
#[derive(Debug, Clone)]
pub struct InstanceStream {
    config: GeneratorConfig,
    next: u64,
}

impl Iterator for InstanceStream {
    type Item = Problem;

    fn next(&mut self) -> Option<Problem> {
        let k = self.next;
        self.next += 1;
        Some(self.config.generate(k).expect("parameters validated when the stream was created"))
    }

    fn nth(&mut self, n: usize) -> Option<Problem> {
        self.next += n as u64;
        self.next()
    }
}
