//! Search-space definition: operations, candidates, entanglement masks,
//! resource accounting, the uniform-sampling baseline, and its exact
//! sum-of-uniforms statistics.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Value};
use crate::error::{Error, Result};
use crate::stats::normal_cdf;

/// Resources are quantized to this pitch (in cost-units) when building exact
/// pmfs, so floating-point candidate costs land on a common lattice.
const TICKS_PER_UNIT: f64 = 1e6;

/// One searchable operation: an ordered menu of discrete sizes over a shared
/// weight store, plus per-unit costs and the nested entanglement masks.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub op_index: usize,
    pub candidates: Vec<usize>,
    pub unit_costs: Vec<f64>,
    /// Row i is mask m^i: candidates[i] ones in the lowest indices.
    mask_table: Matrix,
    /// Total cost of each candidate: sum of unit costs under its mask.
    cand_costs: Vec<f64>,
}

impl CandidateSet {
    /// `unit_costs[j]` prices unit j; length must equal the largest
    /// candidate. A first candidate of 0 models a skippable op (all-zero
    /// mask on a residual branch); otherwise candidates are positive.
    pub fn new(op_index: usize, candidates: Vec<usize>, unit_costs: Vec<f64>) -> Result<Self> {
        if candidates.len() < 2 {
            return Err(Error::contract(format!(
                "op {}: need at least 2 candidates",
                op_index
            )));
        }
        if !candidates.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract(format!(
                "op {}: candidates must be strictly increasing",
                op_index
            )));
        }
        let max_units = *candidates.last().unwrap();
        if max_units == 0 {
            return Err(Error::contract(format!("op {}: all candidates are zero", op_index)));
        }
        if unit_costs.len() != max_units {
            return Err(Error::contract(format!(
                "op {}: {} unit costs for max width {}",
                op_index,
                unit_costs.len(),
                max_units
            )));
        }
        if unit_costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::NumericDomain(format!(
                "op {}: unit costs must be finite and non-negative",
                op_index
            )));
        }
        let mut mask_table = Matrix::zeros(candidates.len(), max_units);
        for (i, &c) in candidates.iter().enumerate() {
            for j in 0..c {
                mask_table.set(i, j, 1.0);
            }
        }
        let cand_costs = candidates
            .iter()
            .map(|&c| unit_costs[..c].iter().sum())
            .collect();
        Ok(CandidateSet { op_index, candidates, unit_costs, mask_table, cand_costs })
    }

    /// Uniform per-unit cost of 1: a candidate of width w costs w.
    pub fn unit_priced(op_index: usize, candidates: Vec<usize>) -> Result<Self> {
        let max = *candidates.last().ok_or_else(|| Error::contract("empty candidate list"))?;
        CandidateSet::new(op_index, candidates, vec![1.0; max])
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn max_units(&self) -> usize {
        *self.candidates.last().unwrap()
    }

    pub fn candidate_cost(&self, i: usize) -> f64 {
        self.cand_costs[i]
    }

    pub fn min_cost(&self) -> f64 {
        // costs are non-negative and masks nested, so the smallest candidate
        // is the cheapest
        self.cand_costs[0]
    }

    pub fn max_cost(&self) -> f64 {
        *self.cand_costs.last().unwrap()
    }

    /// Mask rows as a matrix (n_candidates x max_units).
    pub fn mask_table(&self) -> &Matrix {
        &self.mask_table
    }

    pub fn mask_row(&self, i: usize) -> &[f64] {
        self.mask_table.row_slice(i)
    }

    pub fn is_skippable(&self) -> bool {
        self.candidates[0] == 0
    }
}

#[derive(Debug, Clone)]
pub struct SearchSpace {
    ops: Vec<CandidateSet>,
    pub resource_name: String,
}

impl SearchSpace {
    pub fn new(ops: Vec<CandidateSet>, resource_name: impl Into<String>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::contract("search space needs at least one op"));
        }
        for (i, op) in ops.iter().enumerate() {
            if op.op_index != i {
                return Err(Error::contract(format!(
                    "op_index {} at position {}",
                    op.op_index, i
                )));
            }
        }
        Ok(SearchSpace { ops, resource_name: resource_name.into() })
    }

    /// The default toy space: 6 width choices from {8, 16, 24}, unit cost 1.
    pub fn toy() -> SearchSpace {
        let ops = (0..6)
            .map(|d| CandidateSet::unit_priced(d, vec![8, 16, 24]).unwrap())
            .collect();
        SearchSpace::new(ops, "MACs").unwrap()
    }

    /// D identical unit-priced ops (statistics benchmarks).
    pub fn homogeneous(d: usize, candidates: &[usize]) -> Result<SearchSpace> {
        let ops = (0..d)
            .map(|i| CandidateSet::unit_priced(i, candidates.to_vec()))
            .collect::<Result<_>>()?;
        SearchSpace::new(ops, "MACs")
    }

    pub fn depth(&self) -> usize {
        self.ops.len()
    }

    pub fn op(&self, d: usize) -> &CandidateSet {
        &self.ops[d]
    }

    pub fn ops(&self) -> &[CandidateSet] {
        &self.ops
    }

    pub fn min_resource(&self) -> f64 {
        self.ops.iter().map(|o| o.min_cost()).sum()
    }

    pub fn max_resource(&self) -> f64 {
        self.ops.iter().map(|o| o.max_cost()).sum()
    }

    /// Number of distinct subnets, saturating at u128 bounds.
    pub fn cardinality(&self) -> u128 {
        self.ops
            .iter()
            .fold(1u128, |acc, o| acc.saturating_mul(o.n_candidates() as u128))
    }

    /// Total resource of a choice tuple (index per op).
    pub fn choices_resource(&self, choices: &[usize]) -> Result<f64> {
        if choices.len() != self.depth() {
            return Err(Error::dim(format!(
                "{} choices for {} ops",
                choices.len(),
                self.depth()
            )));
        }
        let mut total = 0.0;
        for (op, &c) in self.ops.iter().zip(choices) {
            if c >= op.n_candidates() {
                return Err(Error::Index(format!(
                    "choice {} out of range for op {}",
                    c, op.op_index
                )));
            }
            total += op.candidate_cost(c);
        }
        Ok(total)
    }

    /// Iterate every choice tuple (row-major, op 0 slowest).
    pub fn enumerate(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let dims: Vec<usize> = self.ops.iter().map(|o| o.n_candidates()).collect();
        let total = self.cardinality();
        (0..total).map(move |mut i| {
            let mut out = vec![0usize; dims.len()];
            for d in (0..dims.len()).rev() {
                out[d] = (i % dims[d] as u128) as usize;
                i /= dims[d] as u128;
            }
            out
        })
    }
}

/// A subnet: one policy vector per op (hard one-hot or soft during Gumbel
/// training), the mapped masks, and the differentiable resource total.
pub struct SubnetPolicy {
    pub onehots: Vec<Value>,
    pub masks: Vec<Value>,
    pub resource: Value,
}

impl SubnetPolicy {
    /// Hard choice indices (argmax per op; exact for one-hot policies).
    pub fn choices(&self) -> Vec<usize> {
        self.onehots.iter().map(|p| p.data().argmax_row(0)).collect()
    }

    pub fn resource_units(&self) -> f64 {
        self.resource.item()
    }

    /// True when every policy vector is exactly one-hot.
    pub fn is_hard(&self) -> bool {
        self.onehots.iter().all(|p| is_one_hot(&p.data()))
    }
}

fn is_one_hot(m: &Matrix) -> bool {
    let mut ones = 0;
    for &x in m.as_slice() {
        if x == 1.0 {
            ones += 1;
        } else if x != 0.0 {
            return false;
        }
    }
    ones == 1
}

/// Map a policy vector to its entanglement mask: p' = p * mask_table, the
/// soft mixture of nested masks (row i of the table is m^i). One-hot p
/// selects its candidate's mask exactly; the map is linear, so gradients
/// flow from the mask back into p.
///
/// `require_hard` is extraction mode: soft vectors are rejected there and
/// allowed only inside Gumbel training.
pub fn map_policy(p: &Value, op: &CandidateSet, require_hard: bool) -> Result<Value> {
    let data = p.data();
    if data.shape() != (1, op.n_candidates()) {
        return Err(Error::dim(format!(
            "policy shape {:?} for op {} with {} candidates",
            data.shape(),
            op.op_index,
            op.n_candidates()
        )));
    }
    if require_hard && !is_one_hot(&data) {
        return Err(Error::contract(format!(
            "op {}: extraction requires an exactly one-hot policy",
            op.op_index
        )));
    }
    let table = Value::constant(op.mask_table().clone());
    p.matmul(&table)
}

/// Assemble a [`SubnetPolicy`] from per-op policy vectors, computing masks
/// and the differentiable resource total (sum over ops of unit costs gated
/// by the mapped mask).
pub fn assemble_policy(
    space: &SearchSpace,
    onehots: Vec<Value>,
    require_hard: bool,
) -> Result<SubnetPolicy> {
    if onehots.len() != space.depth() {
        return Err(Error::dim(format!(
            "{} policy vectors for {} ops",
            onehots.len(),
            space.depth()
        )));
    }
    let mut masks = Vec::with_capacity(onehots.len());
    let mut resource: Option<Value> = None;
    for (op, p) in space.ops().iter().zip(&onehots) {
        let mask = map_policy(p, op, require_hard)?;
        let cost = mask.dot_const(&op.unit_costs)?;
        resource = Some(match resource {
            Some(r) => r.add(&cost)?,
            None => cost,
        });
        masks.push(mask);
    }
    Ok(SubnetPolicy { onehots, masks, resource: resource.unwrap() })
}

/// One-hot constant policy from explicit choice indices (no gradients).
pub fn policy_from_choices(space: &SearchSpace, choices: &[usize]) -> Result<SubnetPolicy> {
    if choices.len() != space.depth() {
        return Err(Error::dim(format!(
            "{} choices for {} ops",
            choices.len(),
            space.depth()
        )));
    }
    let mut onehots = Vec::with_capacity(choices.len());
    for (op, &c) in space.ops().iter().zip(choices) {
        if c >= op.n_candidates() {
            return Err(Error::Index(format!(
                "choice {} out of range for op {}",
                c, op.op_index
            )));
        }
        let mut row = Matrix::zeros(1, op.n_candidates());
        row.set(0, c, 1.0);
        onehots.push(Value::constant(row));
    }
    assemble_policy(space, onehots, true)
}

/// Differentiable total resource of a policy (Σ over ops of mask-gated unit
/// costs). Exact for one-hot policies.
pub fn subnet_resource(policy: &SubnetPolicy, space: &SearchSpace) -> Result<Value> {
    if policy.masks.len() != space.depth() {
        return Err(Error::dim("policy does not match space depth"));
    }
    Ok(policy.resource.clone())
}

/// Uniform choice indices, one per op (each candidate probability 1/n_d).
pub fn sample_choices(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<usize> {
    space
        .ops()
        .iter()
        .map(|op| rng.gen_range(0..op.n_candidates()))
        .collect()
}

/// Uniform random subnet as a full policy.
pub fn uniform_sample(space: &SearchSpace, rng: &mut ChaCha8Rng) -> SubnetPolicy {
    let choices = sample_choices(space, rng);
    policy_from_choices(space, &choices).expect("sampled choices are in range")
}

// ---- binning ---------------------------------------------------------------

/// Equal-width complexity bins over the reachable resource range.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceBinning {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    centers: Vec<f64>,
}

impl ResourceBinning {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || hi <= lo || step <= 0.0 {
            return Err(Error::config(format!(
                "binning range [{}, {}] step {} is invalid",
                lo, hi, step
            )));
        }
        let k = ((hi - lo) / step).round() as usize + 1;
        if k < 2 {
            return Err(Error::config("binning must produce at least 2 bins"));
        }
        let centers: Vec<f64> = (0..k).map(|i| lo + step * i as f64).collect();
        // step rounding can push the last center past the requested hi;
        // the range always covers every center so all of them are valid
        // generation targets
        let hi = hi.max(*centers.last().unwrap());
        Ok(ResourceBinning { lo, hi, step, centers })
    }

    /// Default granularity: an eighth of the range (K = 8), with the raw
    /// step rounded to a clean unit: the nearest integer when the raw step
    /// is at least 1, otherwise one significant digit. A [1.3, 2.0] range
    /// yields step 0.1; the toy space's [48, 144] yields step 14.
    pub fn auto(space: &SearchSpace) -> Result<Self> {
        let lo = space.min_resource();
        let hi = space.max_resource();
        let raw = (hi - lo) / 7.0;
        if !(raw > 0.0) {
            return Err(Error::config("degenerate resource range"));
        }
        let step = if raw >= 1.0 {
            raw.round()
        } else {
            let mag = 10f64.powf(raw.log10().floor());
            (raw / mag).round() * mag
        };
        ResourceBinning::new(lo, hi, step)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> f64 {
        self.centers[i]
    }

    /// Bin of a resource value; a value exactly on a bin edge goes to the
    /// lower bin. Out-of-range values clamp to the end bins.
    pub fn bin_index(&self, resource: f64) -> usize {
        let x = (resource - self.lo) / self.step + 0.5;
        let f = x.floor();
        let idx = if x == f { f - 1.0 } else { f };
        idx.clamp(0.0, (self.k() - 1) as f64) as usize
    }

    /// Affine map of the binning range onto [0, 1].
    pub fn normalize(&self, resource: f64) -> f64 {
        (resource - self.lo) / (self.hi - self.lo)
    }

    pub fn denormalize(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }
}

// ---- exact resource statistics ---------------------------------------------

/// Exact pmf of the total resource under uniform architecture sampling,
/// on a quantized lattice.
#[derive(Debug, Clone)]
pub struct ResourcePmf {
    /// Ascending resource values with nonzero probability.
    support: Vec<f64>,
    probs: Vec<f64>,
    /// Lattice pitch: gcd of support spacings, in cost-units.
    pitch: f64,
}

/// Exact resource pmf by convolving per-op cost distributions (each op
/// contributes candidate cost i with probability 1/n_d). The distribution
/// of a sum of independent per-op uniforms; Monte-Carlo histograms and the
/// normal approximation are validated against it.
///
/// Cost is governed by the number of *distinct* partial sums, not the
/// subnet count: commensurate costs collapse onto a small lattice, so deep
/// spaces stay cheap. The budget trips only when the support itself grows
/// past 1e7 points (incommensurate costs).
pub fn irwin_hall_reference(space: &SearchSpace) -> Result<ResourcePmf> {
    const SUPPORT_BUDGET: usize = 10_000_000;
    let mut pmf: HashMap<i64, f64> = HashMap::new();
    pmf.insert(0, 1.0);
    for op in space.ops() {
        let w = 1.0 / op.n_candidates() as f64;
        let mut next: HashMap<i64, f64> = HashMap::with_capacity(pmf.len() * op.n_candidates());
        for (&s, &p) in &pmf {
            for i in 0..op.n_candidates() {
                let t = s + to_ticks(op.candidate_cost(i));
                *next.entry(t).or_insert(0.0) += p * w;
            }
        }
        if next.len() > SUPPORT_BUDGET {
            return Err(Error::EnumerationBudget(next.len() as u128));
        }
        pmf = next;
    }
    let mut entries: Vec<(i64, f64)> = pmf.into_iter().collect();
    entries.sort_by_key(|e| e.0);
    let pitch_ticks = entries
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .fold(0i64, gcd_i64);
    let pitch = if pitch_ticks > 0 { pitch_ticks as f64 / TICKS_PER_UNIT } else { 0.0 };
    Ok(ResourcePmf {
        support: entries.iter().map(|&(t, _)| t as f64 / TICKS_PER_UNIT).collect(),
        probs: entries.into_iter().map(|(_, p)| p).collect(),
        pitch,
    })
}

fn to_ticks(x: f64) -> i64 {
    (x * TICKS_PER_UNIT).round() as i64
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd_i64(b, a % b) }
}

impl ResourcePmf {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn prob_of(&self, resource: f64) -> f64 {
        let t = to_ticks(resource);
        self.support
            .iter()
            .position(|&s| to_ticks(s) == t)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(s, p)| s * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| (s - m) * (s - m) * p)
            .sum()
    }

    /// Probability mass falling in bin k of a binning (edge ties follow
    /// the binning's lower-bin rule).
    pub fn bin_prob(&self, binning: &ResourceBinning, k: usize) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| binning.bin_index(**s) == k)
            .map(|(_, p)| p)
            .sum()
    }

    /// Total-variation distance to an empirical sample of resources.
    /// Samples are snapped to the pmf lattice; mass off the support counts
    /// fully against the distance.
    pub fn tv_distance(&self, samples: &[f64]) -> f64 {
        let mut counts: HashMap<i64, u64> = HashMap::new();
        for &x in samples {
            *counts.entry(to_ticks(x)).or_insert(0) += 1;
        }
        let n = samples.len() as f64;
        let mut tv = 0.0;
        for (s, p) in self.support.iter().zip(&self.probs) {
            let q = counts.remove(&to_ticks(*s)).unwrap_or(0) as f64 / n;
            tv += (p - q).abs();
        }
        for (_, c) in counts {
            tv += c as f64 / n;
        }
        tv / 2.0
    }

    /// Kolmogorov-Smirnov distance to the normal with matched mean and
    /// variance. The pmf lives on a lattice, so the normal CDF is evaluated
    /// at cell right edges (support + pitch/2, the lattice continuity
    /// correction); without it the distance would be dominated by the
    /// half-cell offset (about half the modal probability) rather than the
    /// actual shape mismatch.
    pub fn ks_vs_matched_normal(&self) -> f64 {
        let mean = self.mean();
        let sd = self.variance().sqrt();
        let half = self.pitch / 2.0;
        let mut cdf = 0.0;
        let mut ks: f64 = 0.0;
        for (s, p) in self.support.iter().zip(&self.probs) {
            cdf += p;
            ks = ks.max((cdf - normal_cdf(s + half, mean, sd)).abs());
        }
        ks
    }
}

// ---- rejection sampling ------------------------------------------------

/// Outcome of constraint-directed rejection sampling. Exhausting the try
/// budget is an expected outcome for rare bins, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectionOutcome {
    Found { choices: Vec<usize>, tries: u64 },
    Timeout { tries: u64 },
}

impl RejectionOutcome {
    pub fn tries(&self) -> u64 {
        match self {
            RejectionOutcome::Found { tries, .. } | RejectionOutcome::Timeout { tries } => *tries,
        }
    }
}

/// Keep sampling uniformly until a subnet lands in the target bin.
pub fn rejection_sample(
    space: &SearchSpace,
    binning: &ResourceBinning,
    target_bin: usize,
    rng: &mut ChaCha8Rng,
    max_tries: u64,
) -> Result<RejectionOutcome> {
    if target_bin >= binning.k() {
        return Err(Error::Index(format!(
            "bin {} out of range for {} bins",
            target_bin,
            binning.k()
        )));
    }
    for t in 1..=max_tries {
        let choices = sample_choices(space, rng);
        let r = space.choices_resource(&choices)?;
        if binning.bin_index(r) == target_bin {
            return Ok(RejectionOutcome::Found { choices, tries: t });
        }
    }
    Ok(RejectionOutcome::Timeout { tries: max_tries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSet;

    fn three_wide() -> CandidateSet {
        CandidateSet::unit_priced(0, vec![1, 2, 3]).unwrap()
    }

    #[test]
    fn masks_nest() {
        let op = CandidateSet::unit_priced(0, vec![8, 16, 24]).unwrap();
        for i in 0..op.n_candidates() - 1 {
            let a = op.mask_row(i);
            let b = op.mask_row(i + 1);
            assert!(a.iter().zip(b).all(|(x, y)| x <= y));
            assert_eq!(a.iter().sum::<f64>() as usize, op.candidates[i]);
        }
    }

    #[test]
    fn map_policy_selects_middle_mask() {
        let op = three_wide();
        let p = Value::constant(Matrix::row(&[0.0, 1.0, 0.0]));
        let mask = map_policy(&p, &op, true).unwrap();
        assert_eq!(mask.data(), Matrix::row(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn map_policy_smallest_and_full() {
        let op = three_wide();
        let lo = map_policy(&Value::constant(Matrix::row(&[1.0, 0.0, 0.0])), &op, true).unwrap();
        assert_eq!(lo.data(), Matrix::row(&[1.0, 0.0, 0.0]));
        let hi = map_policy(&Value::constant(Matrix::row(&[0.0, 0.0, 1.0])), &op, true).unwrap();
        assert_eq!(hi.data(), Matrix::row(&[1.0, 1.0, 1.0]));
    }

    #[test]
    fn map_policy_rejects_soft_in_extraction() {
        let op = three_wide();
        let p = Value::constant(Matrix::row(&[0.2, 0.5, 0.3]));
        assert!(map_policy(&p, &op, true).is_err());
        assert!(map_policy(&p, &op, false).is_ok());
    }

    #[test]
    fn resource_extremes_and_toy_example() {
        let space = SearchSpace::toy();
        assert_eq!(space.min_resource(), 48.0);
        assert_eq!(space.max_resource(), 144.0);
        // choices (8,16,24,8,16,24) = indices (0,1,2,0,1,2)
        let r = space.choices_resource(&[0, 1, 2, 0, 1, 2]).unwrap();
        assert_eq!(r, 96.0);
        let policy = policy_from_choices(&space, &[0, 1, 2, 0, 1, 2]).unwrap();
        assert_eq!(policy.resource_units(), 96.0);
    }

    #[test]
    fn auto_binning_matches_known_ranges() {
        let b = ResourceBinning::auto(&SearchSpace::toy()).unwrap();
        assert_eq!(b.step, 14.0);
        assert_eq!(b.k(), 8);
        assert_eq!(b.center(0), 48.0);

        // paper-style fractional range: [1.3, 2.0] at 0.1 pitch
        let f = ResourceBinning::new(1.3, 2.0, 0.1).unwrap();
        assert_eq!(f.k(), 8);
        let raw: f64 = (2.0 - 1.3) / 7.0;
        let mag = 10f64.powf(raw.log10().floor());
        assert!(((raw / mag).round() * mag - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bin_edges_go_low() {
        let b = ResourceBinning::new(0.0, 70.0, 10.0).unwrap();
        assert_eq!(b.bin_index(5.0), 0); // exact edge between bins 0 and 1
        assert_eq!(b.bin_index(5.1), 1);
        assert_eq!(b.bin_index(4.9), 0);
        assert_eq!(b.bin_index(-3.0), 0);
        assert_eq!(b.bin_index(99.0), 7);
    }

    #[test]
    fn two_coin_convolution() {
        let space = SearchSpace::homogeneous(2, &[1, 2]).unwrap();
        let pmf = irwin_hall_reference(&space).unwrap();
        assert_eq!(pmf.support(), &[2.0, 3.0, 4.0]);
        assert!((pmf.prob_of(2.0) - 0.25).abs() < 1e-12);
        assert!((pmf.prob_of(3.0) - 0.5).abs() < 1e-12);
        assert!((pmf.prob_of(4.0) - 0.25).abs() < 1e-12);
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn commensurate_deep_space_stays_within_budget() {
        // 3^30 subnets but only 61 distinct integer sums: the DP must not
        // care about cardinality
        let space = SearchSpace::homogeneous(30, &[1, 2, 3]).unwrap();
        let pmf = irwin_hall_reference(&space).unwrap();
        assert_eq!(pmf.len(), 61);
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn enumeration_budget_enforced() {
        // 24 binary ops priced at distinct powers of two: every choice
        // vector has a unique sum, so the support is 2^24 > 1e7
        let ops = (0..24)
            .map(|i| {
                CandidateSet::new(i, vec![0, 1], vec![(1u64 << i) as f64 / 1e6]).unwrap()
            })
            .collect();
        let space = SearchSpace::new(ops, "ticks").unwrap();
        match irwin_hall_reference(&space) {
            Err(Error::EnumerationBudget(n)) => assert!(n > 10_000_000),
            other => panic!("expected budget error, got {:?}", other.map(|p| p.len())),
        }
    }

    #[test]
    fn d1_resource_distribution_is_candidate_uniform() {
        let space = SearchSpace::homogeneous(1, &[1, 2, 3]).unwrap();
        let pmf = irwin_hall_reference(&space).unwrap();
        assert_eq!(pmf.support(), &[1.0, 2.0, 3.0]);
        for &p in pmf.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pmf_moments_match_closed_form() {
        // sum of D iid uniforms over {1,2,3}: mean 2D, var 2D/3
        let space = SearchSpace::homogeneous(12, &[1, 2, 3]).unwrap();
        let pmf = irwin_hall_reference(&space).unwrap();
        assert!((pmf.mean() - 24.0).abs() < 1e-9);
        assert!((pmf.variance() - 8.0).abs() < 1e-9);
        assert_eq!(pmf.pitch(), 1.0);
    }

    #[test]
    fn rejection_timeout_on_empty_bin() {
        // toy space resources live on a lattice of pitch 8; a binning whose
        // bin 1 covers only unreachable values forces a timeout
        let space = SearchSpace::homogeneous(2, &[8, 16]).unwrap();
        let binning = ResourceBinning::new(16.0, 32.0, 2.0).unwrap();
        // bin 1 center 18: covers (17, 19], no reachable resource
        let mut rng = RngSet::fork(0, 0);
        let out = rejection_sample(&space, &binning, 1, &mut rng, 500).unwrap();
        assert_eq!(out, RejectionOutcome::Timeout { tries: 500 });
    }

    #[test]
    fn rejection_finds_modal_bin_fast() {
        let space = SearchSpace::toy();
        let binning = ResourceBinning::auto(&space).unwrap();
        let pmf = irwin_hall_reference(&space).unwrap();
        let modal = (0..binning.k())
            .max_by(|&a, &b| {
                pmf.bin_prob(&binning, a)
                    .partial_cmp(&pmf.bin_prob(&binning, b))
                    .unwrap()
            })
            .unwrap();
        let mut rng = RngSet::fork(1, 0);
        match rejection_sample(&space, &binning, modal, &mut rng, 10_000).unwrap() {
            RejectionOutcome::Found { choices, tries } => {
                let r = space.choices_resource(&choices).unwrap();
                assert_eq!(binning.bin_index(r), modal);
                assert!(tries < 100);
            }
            RejectionOutcome::Timeout { .. } => panic!("modal bin should be easy"),
        }
    }

    #[test]
    fn assemble_policy_resource_is_differentiable() {
        let space = SearchSpace::toy();
        let soft: Vec<Value> = (0..space.depth())
            .map(|_| Value::leaf(Matrix::row(&[0.2, 0.3, 0.5])))
            .collect();
        let policy = assemble_policy(&space, soft, false).unwrap();
        policy.resource.backward().unwrap();
        // d resource / d p_i = candidate cost i (per op)
        let g = policy.onehots[0].grad();
        assert_eq!(g, Matrix::row(&[8.0, 16.0, 24.0]));
    }

    #[test]
    fn skip_candidate_gives_zero_mask() {
        let op = CandidateSet::new(0, vec![0, 4, 8], vec![1.0; 8]).unwrap();
        assert!(op.is_skippable());
        assert_eq!(op.mask_row(0), &[0.0; 8]);
        assert_eq!(op.candidate_cost(0), 0.0);
    }
}
