//! The inductive tower of free sets F_n ⊂ K_n = ∏_{j≤n} Γ_{p_j}.
//!
//! Level n is built from level n−1 by choosing a prime p_n and a base set
//! F = {h₁,…,h_{k₂}} ⊂ Γ_{p_n} with a certified spectral gap and no short
//! relations, then forming
//!
//!   F_n = {(g_i, h_i h_j h_i⁻¹) | 1 ≤ i ≤ k₁, 1 ≤ j ≤ k₂, j ≠ i},
//!
//! a (k₂−1)-fold covering of F_{n−1} = {g₁,…,g_{k₁}} under the prefix
//! projection. The base level is produced by the prime/size/sample search
//! over Γ_p directly. Every level carries a machine-checkable certificate:
//! covering fibers, base-set gap and girth, tuple relations, per-index
//! generation of the difference sets H_i, and a norm bound for the
//! representations new at this level — the bound either derived from the
//! base-set gap or measured directly on ℓ²(K_n) restricted to fiber-mean-zero
//! functions (the exact complement of everything factoring through the
//! prefix projection).
//!
//! The enumeration order of F_{n−1} used by the construction is its stored
//! serialization order; the same index i addresses both g_i and h_i, which
//! silently requires k₂ ≥ k₁.

use std::collections::BTreeMap;

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::pgl::{self, GroupTable, PglElement, sample_uniform};
use crate::rng::{Stream, tag};
use crate::spectral::{
    self, GapCertificate, GapMethod, MeanZeroOperator, PowerSettings, Threshold, Verdict,
};
use crate::words::{self, RelationReport, SearchMethod, WordGroup};

/// One element of K_n = ∏_{j≤n} Γ_{p_j}.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TupleElement {
    coords: Vec<PglElement>,
}

impl TupleElement {
    pub fn new(coords: Vec<PglElement>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("empty tuple".into()));
        }
        Ok(TupleElement { coords })
    }

    #[inline]
    pub fn coords(&self) -> &[PglElement] {
        &self.coords
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.coords.len()
    }

    /// Prefix projection θ_m onto the first m coordinates.
    pub fn prefix(&self, m: usize) -> &[PglElement] {
        &self.coords[..m]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.coords.len() * pgl::ENCODED_LEN);
        for c in &self.coords {
            out.extend_from_slice(&c.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() || !bytes.len().is_multiple_of(pgl::ENCODED_LEN) {
            return Err(Error::Format("tuple encoding length not a multiple of 20".into()));
        }
        let coords = bytes
            .chunks(pgl::ENCODED_LEN)
            .map(PglElement::from_bytes)
            .collect::<Result<Vec<_>>>()?;
        TupleElement::new(coords)
    }
}

impl WordGroup for TupleElement {
    fn op(&self, rhs: &Self) -> Self {
        assert_eq!(self.coords.len(), rhs.coords.len(), "tuple depth mismatch");
        let coords = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .map(|(a, b)| a.mul(b).expect("level moduli validated at construction"))
            .collect();
        TupleElement { coords }
    }

    fn invert(&self) -> Self {
        TupleElement { coords: self.coords.iter().map(PglElement::inv).collect() }
    }

    fn is_neutral(&self) -> bool {
        self.coords.iter().all(PglElement::is_identity)
    }
}

impl std::fmt::Display for TupleElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Per-level search thresholds.
///
/// In paper mode the thresholds are pinned to the exact rationals of the
/// inductive construction: ε_n = 1/(4n), ℓ_n = 3n and
/// k_min = max{2n+1, k₁} + 1. The desk-scale schedule replaces them with
/// configurable values; certificates record which schedule was used.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSpec {
    pub n: u32,
    pub p_min: u32,
    pub gap_threshold: Threshold,
    pub girth_threshold: u32,
    pub k_min: u32,
    pub retry_budget: u32,
    pub paper_mode: bool,
}

impl LevelSpec {
    /// Paper-mode spec for level n given k₁ = |F_{n−1}| (1 at the base).
    pub fn paper(n: u32, k1: u32, p_min: u32, retry_budget: u32) -> Self {
        LevelSpec {
            n,
            p_min,
            gap_threshold: Threshold::new(1, 4 * n as u64),
            girth_threshold: 3 * n,
            k_min: (2 * n + 1).max(k1) + 1,
            retry_budget,
            paper_mode: true,
        }
    }

    /// Re-derives the paper-mode fields and checks them against the stored
    /// values; desk-mode specs only get sanity checks.
    pub fn validate(&self, k1: u32) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("level index is 1-based".into()));
        }
        if self.paper_mode {
            let expect = LevelSpec::paper(self.n, k1, self.p_min, self.retry_budget);
            if self.gap_threshold != expect.gap_threshold
                || self.girth_threshold != expect.girth_threshold
                || self.k_min != expect.k_min
            {
                return Err(Error::VerificationFailed(format!(
                    "level {} paper-mode thresholds are not 1/(4n), 3n, max(2n+1,k1)+1",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// One constructed level: the base set F ⊂ Γ_{p_n} and the set F_n ⊂ K_n.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub n: u32,
    pub p: u32,
    pub base_gens: Vec<PglElement>,
    pub elements: Vec<TupleElement>,
}

impl LevelSet {
    /// Base level: F₁ is the searched set itself, as 1-tuples.
    pub fn base(p: u32, gens: Vec<PglElement>) -> Result<Self> {
        let elements = gens
            .iter()
            .map(|g| TupleElement::new(vec![*g]))
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelSet { n: 1, p, base_gens: gens, elements })
    }

    pub fn k2(&self) -> usize {
        self.base_gens.len()
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }
}

/// Builds F_n from F_{n−1} and a base set F ⊂ Γ_p.
pub fn build_level(prev: &LevelSet, p: u32, base: &[PglElement]) -> Result<LevelSet> {
    let k1 = prev.size();
    let k2 = base.len();
    let need = k1.max(3);
    if k2 < need {
        return Err(Error::TooFewGenerators { need, got: k2 });
    }
    for h in base {
        if h.modulus() != p {
            return Err(Error::ModulusMismatch { left: h.modulus(), right: p });
        }
    }
    let mut sorted = base.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != k2 {
        return Err(Error::InvalidArgument("base set has duplicate elements".into()));
    }
    let mut elements = Vec::with_capacity(k1 * (k2 - 1));
    for (i, g) in prev.elements.iter().enumerate() {
        let h_i = &base[i];
        for (j, h_j) in base.iter().enumerate() {
            if i == j {
                continue;
            }
            let last = h_i.mul(h_j)?.mul(&h_i.inv())?;
            let mut coords = g.coords().to_vec();
            coords.push(last);
            elements.push(TupleElement::new(coords)?);
        }
    }
    Ok(LevelSet { n: prev.n + 1, p, base_gens: base.to_vec(), elements })
}

/// Verifies that the prefix projection maps `cur` onto `prev` with fibers of
/// one constant size r ≥ 2, returning r. The base level has no covering and
/// returns the `None` sentinel.
pub fn verify_covering(cur: &LevelSet, prev: Option<&LevelSet>) -> Result<Option<u32>> {
    if cur.n == 1 {
        return Ok(None);
    }
    let prev = prev.ok_or_else(|| {
        Error::CoveringViolation(format!("level {} verified without its predecessor", cur.n))
    })?;
    let mut fibers: BTreeMap<&[PglElement], u32> = BTreeMap::new();
    let m = prev.elements.first().map_or(0, TupleElement::depth);
    for x in &cur.elements {
        *fibers.entry(x.prefix(m)).or_insert(0) += 1;
    }
    for g in &prev.elements {
        if !fibers.contains_key(g.coords()) {
            return Err(Error::CoveringViolation(format!("no fiber over {g}")));
        }
    }
    if fibers.len() != prev.size() {
        return Err(Error::CoveringViolation(format!(
            "projection image has {} points, previous level has {}",
            fibers.len(),
            prev.size()
        )));
    }
    let mut sizes = fibers.values();
    let r = *sizes.next().expect("nonempty level");
    if let Some(&bad) = sizes.clone().find(|&&c| c != r) {
        return Err(Error::CoveringViolation(format!("fiber sizes {r} and {bad} differ")));
    }
    if r < 2 {
        return Err(Error::CoveringViolation(format!("fiber size {r} < 2")));
    }
    Ok(Some(r))
}

/// Relation check for the tuples of a level (coordinate-wise evaluation;
/// identity iff identity in every coordinate).
pub fn verify_level_relations(level: &LevelSet, ell: u32, budget: u64) -> RelationReport {
    words::check_no_relations(&level.elements, ell, SearchMethod::Dfs, budget)
}

/// Per-index generation check: H_i = {h_s h_t⁻¹ | s, t ≠ i} must generate
/// Γ_p for every i < k1. When the dense oracle is affordable, the averaging
/// operator of {h_j | j ≠ i} is also checked to have norm < 1, which is the
/// spectral reason generation holds.
pub fn verify_generation(
    table: &GroupTable,
    base: &[PglElement],
    k1: usize,
    limits: &Limits,
) -> Result<Vec<bool>> {
    let k2 = base.len();
    if k2 < 3 {
        return Err(Error::TooFewGenerators { need: 3, got: k2 });
    }
    let mut verdicts = Vec::with_capacity(k1);
    for i in 0..k1 {
        let mut h_i = Vec::new();
        for (s, hs) in base.iter().enumerate() {
            if s == i {
                continue;
            }
            for (t, ht) in base.iter().enumerate() {
                if t == i || t == s {
                    continue;
                }
                h_i.push(hs.mul(&ht.inv())?);
            }
        }
        h_i.sort();
        h_i.dedup();
        let generates = spectral::check_generation(table, &h_i)?;
        if table.order() <= limits.dense_limit {
            let rest: Vec<PglElement> = base
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, h)| *h)
                .collect();
            let r_norm = spectral::dense_norm(table, &rest, limits.dense_limit)?;
            if r_norm < 1.0 - 1e-6 {
                assert!(
                    generates,
                    "averaging norm {r_norm} < 1 forces generation of H_{i}"
                );
            }
        }
        verdicts.push(generates);
    }
    Ok(verdicts)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LevelGapMode {
    Bound,
    Direct,
}

impl std::fmt::Display for LevelGapMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevelGapMode::Bound => write!(f, "bound"),
            LevelGapMode::Direct => write!(f, "direct"),
        }
    }
}

/// Norm bounds for the representations new at level n, derived from the
/// certified base-set bound u:
/// * `derived`: 2u + 1/(2n) — the inductive form, dominating the exact
///   triangle bound whenever k₂ ≥ 2n+1;
/// * `tight`: (k₂·u + 1)/(k₂−1) — the unconditional triangle bound.
///
/// Both are rounded upward so they remain sound in floating point.
pub fn level_bounds(n: u32, k2: usize, upper: f64) -> (f64, f64) {
    let derived = (2.0 * upper + 1.0 / (2.0 * n as f64)).next_up();
    let tight = ((k2 as f64 * upper + 1.0) / (k2 as f64 - 1.0)) * (1.0 + 1e-12);
    (derived, tight)
}

/// Bound-mode level gap: the norm bounds for representations new at level n
/// together with the 1/n target verdict. Fails with `TargetMissed` when the
/// base-set gap is not certified (a refuted or inconclusive base yields no
/// sound level bound at all). At the base level the certified bound applies
/// to F₁ directly.
pub fn verify_level_gap_bound(
    n: u32,
    k2: usize,
    gap: &GapCertificate,
) -> Result<LevelGapBounds> {
    let target = Threshold::new(1, n as u64);
    if gap.verdict != Verdict::Certified {
        return Err(Error::TargetMissed {
            bound: gap.estimate.lower_bound,
            target: target.to_string(),
        });
    }
    let upper = gap.certified_upper().ok_or(Error::MissingCertificate { n })?;
    let (derived, tight) = if n == 1 { (upper, upper) } else { level_bounds(n, k2, upper) };
    Ok(LevelGapBounds {
        derived,
        tight,
        target,
        meets_target: meets_threshold(derived, target),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct LevelGapBounds {
    pub derived: f64,
    pub tight: f64,
    pub target: Threshold,
    pub meets_target: bool,
}

/// Certificate for one level of the tower.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelCertificate {
    pub covering_r: Option<u32>,
    /// Base-set girth report at ℓ_n.
    pub base_relations: RelationReport,
    /// Base-set gap certificate at ε_n.
    pub gap: GapCertificate,
    /// Tuple relation report for F_n at length n.
    pub relations: RelationReport,
    /// H_i generation verdicts for i < k₁ (level 1: one entry for the base
    /// set itself).
    pub generation: Vec<bool>,
    pub mode: LevelGapMode,
    pub derived_bound: f64,
    pub tight_bound: f64,
    pub direct_norm: Option<f64>,
    /// The inductive target 1/n.
    pub target: Threshold,
    /// Whether derived_bound ≤ 1/n holds exactly. The inductive form is a
    /// valid norm bound only when k₂ ≥ 2n+1 (always true in paper mode);
    /// tight_bound is the unconditionally sound claim.
    pub meets_target: bool,
    pub attempts: u32,
}

/// The full tower: levels, certificates and the specs/seed that produced
/// them. Extension is atomic; verification needs no randomness beyond the
/// recorded seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TowerState {
    pub seed: u64,
    pub specs: Vec<LevelSpec>,
    pub levels: Vec<LevelSet>,
    pub certificates: Vec<LevelCertificate>,
}

impl TowerState {
    pub fn new(seed: u64) -> Self {
        TowerState { seed, specs: Vec::new(), levels: Vec::new(), certificates: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// Outcome of the prime/size/sample search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub p: u32,
    pub k: u32,
    pub gens: Vec<PglElement>,
    pub gap: GapCertificate,
    pub relations: RelationReport,
    pub generates: bool,
    pub attempts: u32,
}

/// The size schedule of the base search: k = max(k₀, ⌊(ln p)²⌋).
pub fn scheduled_k(p: u32, k0: u32) -> u32 {
    let ln = (p as f64).ln();
    k0.max((ln * ln).floor() as u32)
}

fn primes_from(p_min: u32, ceiling: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = if p_min <= 2 { 2 } else if pgl::is_prime(p_min) { p_min } else {
        match pgl::next_prime(p_min) {
            Some(q) => q,
            None => return out,
        }
    };
    while p <= ceiling {
        out.push(p);
        match pgl::next_prime(p) {
            Some(q) => p = q,
            None => break,
        }
    }
    out
}

fn gap_method_for(order: u64, eps: Threshold, limits: &Limits) -> GapMethod {
    if order <= limits.dense_limit as u64 {
        GapMethod::Dense
    } else {
        let m = limits.trace_order.unwrap_or_else(|| spectral::default_trace_order(order, eps));
        GapMethod::Trace { m }
    }
}

/// Searches for a prime p ≥ p₀ and a tuple of k = max(k₀, ⌊(ln p)²⌋)
/// elements of Γ_p that generate, carry a certified gap at ε and satisfy no
/// relation of length ≤ ℓ. Primes advance when the per-prime retry budget is
/// exhausted. `require_distinct` additionally rejects tuples with repeated
/// elements (plain sampling allows repeats; the tower base needs a set).
#[allow(clippy::too_many_arguments)]
pub fn search_generators(
    eps: Threshold,
    k0: u32,
    p0: u32,
    ell: u32,
    require_distinct: bool,
    retry_budget: u32,
    limits: &Limits,
    stream: &Stream,
) -> Result<SearchOutcome> {
    let mut attempts = 0u32;
    let primes = primes_from(p0.max(2), limits.prime_ceiling);
    for &p in &primes {
        let order = pgl::order_formula(p)?;
        if order > limits.table_limit {
            continue;
        }
        let table = GroupTable::build_with_limit(p, limits.table_limit)?;
        let k = scheduled_k(p, k0);
        let method = gap_method_for(order, eps, limits);
        for attempt in 0..retry_budget {
            attempts += 1;
            let mut draw = stream.derive(&[tag::SAMPLE, p as u64, k as u64, attempt as u64]);
            let gens: Vec<PglElement> =
                (0..k).map(|_| sample_uniform(p, &mut draw)).collect::<Result<_>>()?;
            if require_distinct {
                let mut sorted = gens.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != gens.len() {
                    continue;
                }
            }
            let relations =
                words::check_no_relations(&gens, ell, SearchMethod::Dfs, limits.word_budget);
            if !relations.certifies_no_relations() {
                continue;
            }
            let power_seed = stream
                .derive(&[tag::POWER_START, p as u64, k as u64, attempt as u64])
                .next_u64();
            let gap =
                spectral::certify_gap(&table, &gens, eps, method, power_seed, limits.dense_limit)?;
            if gap.verdict != Verdict::Certified {
                continue;
            }
            let generates = spectral::check_generation(&table, &gens)?;
            if eps < Threshold::new(1, 1) {
                // A certified gap below 1 leaves no invariant mean-zero
                // vector, which forces generation.
                assert!(generates, "certified gap {eps} < 1 must imply generation");
            }
            if !generates {
                continue;
            }
            return Ok(SearchOutcome { p, k, gens, gap, relations, generates, attempts });
        }
    }
    Err(Error::SearchExhausted(format!(
        "no admissible tuple: eps={eps}, k0={k0}, ell={ell}, primes {}..={}, {} attempts",
        p0,
        limits.prime_ceiling,
        attempts
    )))
}

/// Searches for the level-n base set: a prime p ≥ p_min and k₂ ≥ k_min
/// distinct elements of Γ_p with certified gap ε_n and no relation of length
/// ≤ ℓ_n. Retry order is: resample, then grow k₂, then advance p.
pub fn propose_base_set(
    spec: &LevelSpec,
    k1: usize,
    limits: &Limits,
    stream: &Stream,
) -> Result<SearchOutcome> {
    let floor = (spec.k_min as usize).max(k1.max(3)) as u32;
    let mut attempts = 0u32;
    for &p in &primes_from(spec.p_min, limits.prime_ceiling) {
        let order = pgl::order_formula(p)?;
        if order > limits.table_limit {
            continue;
        }
        if order <= floor as u64 {
            continue;
        }
        let table = GroupTable::build_with_limit(p, limits.table_limit)?;
        let method = gap_method_for(order, spec.gap_threshold, limits);
        for k2 in floor..=floor + limits.k_growth {
            if k2 as u64 >= order {
                break;
            }
            for attempt in 0..spec.retry_budget {
                attempts += 1;
                let mut draw = stream.derive(&[tag::SAMPLE, p as u64, k2 as u64, attempt as u64]);
                let mut gens: Vec<PglElement> = Vec::with_capacity(k2 as usize);
                while gens.len() < k2 as usize {
                    let g = sample_uniform(p, &mut draw)?;
                    if !gens.contains(&g) {
                        gens.push(g);
                    }
                }
                let relations = words::check_no_relations(
                    &gens,
                    spec.girth_threshold,
                    SearchMethod::Dfs,
                    limits.word_budget,
                );
                if !relations.certifies_no_relations() {
                    continue;
                }
                let power_seed = stream
                    .derive(&[tag::POWER_START, p as u64, k2 as u64, attempt as u64])
                    .next_u64();
                let gap = spectral::certify_gap(
                    &table,
                    &gens,
                    spec.gap_threshold,
                    method,
                    power_seed,
                    limits.dense_limit,
                )?;
                if gap.verdict != Verdict::Certified {
                    continue;
                }
                let generates = spectral::check_generation(&table, &gens)?;
                return Ok(SearchOutcome {
                    p,
                    k: k2,
                    gens,
                    gap,
                    relations,
                    generates,
                    attempts,
                });
            }
        }
    }
    Err(Error::SearchExhausted(format!(
        "no base set for level {}: eps={}, ell={}, k>={}, primes {}..={}, {} attempts",
        spec.n, spec.gap_threshold, spec.girth_threshold, floor, spec.p_min, limits.prime_ceiling,
        attempts
    )))
}

/// The F_n-averaging operator on ℓ²(K_n), with per-fiber mean subtraction as
/// the projection: the invariant subspace is exactly the orthogonal
/// complement of the functions pulled back along θ_{n−1}.
pub struct ProductOperator {
    dims: Vec<usize>,
    total: usize,
    perms: Vec<Vec<u32>>,
}

/// Flat left-translation permutations of `elements` on K_n = ∏ Γ_{p_j},
/// with the last coordinate contiguous (index = Σ digit_j · stride_j,
/// stride_n = 1), so θ_{n−1}-fibers are contiguous chunks.
pub(crate) fn flat_left_mul_perms(
    levels: &[LevelSet],
    elements: &[TupleElement],
    size_limit: u64,
    table_limit: u64,
) -> Result<(Vec<usize>, Vec<Vec<u32>>)> {
    let mut tables: BTreeMap<u32, GroupTable> = BTreeMap::new();
    let mut dims = Vec::with_capacity(levels.len());
    let mut total: u64 = 1;
    for level in levels {
        if let std::collections::btree_map::Entry::Vacant(slot) = tables.entry(level.p) {
            slot.insert(GroupTable::build_with_limit(level.p, table_limit)?);
        }
        let order = tables[&level.p].order();
        dims.push(order);
        total = total.saturating_mul(order as u64);
        if total > size_limit {
            return Err(Error::TooLarge { size: total, limit: size_limit });
        }
    }
    let total = total as usize;
    let mut strides = vec![1usize; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1];
    }
    let mut perms = Vec::with_capacity(elements.len());
    for f in elements {
        if f.depth() != levels.len() {
            return Err(Error::InvalidArgument("tuple depth does not match tower".into()));
        }
        let coord_perms: Vec<Vec<u32>> = f
            .coords()
            .iter()
            .zip(levels)
            .map(|(c, level)| tables[&level.p].left_mul_perm(c))
            .collect::<Result<_>>()?;
        let mut flat = vec![0u32; total];
        let mut digits = vec![0usize; dims.len()];
        for (x, slot) in flat.iter_mut().enumerate() {
            let mut y = 0usize;
            for (j, &d) in digits.iter().enumerate() {
                y += coord_perms[j][d] as usize * strides[j];
            }
            *slot = y as u32;
            // odometer over mixed radix, last digit fastest
            if x + 1 < total {
                for j in (0..digits.len()).rev() {
                    digits[j] += 1;
                    if digits[j] == dims[j] {
                        digits[j] = 0;
                    } else {
                        break;
                    }
                }
            }
        }
        perms.push(flat);
    }
    Ok((dims, perms))
}

impl ProductOperator {
    pub fn build(levels: &[LevelSet], limits: &Limits) -> Result<Self> {
        let cur = levels.last().ok_or_else(|| Error::InvalidArgument("empty tower".into()))?;
        let (dims, perms) =
            flat_left_mul_perms(levels, &cur.elements, limits.direct_limit, limits.table_limit)?;
        let total = dims.iter().product();
        Ok(ProductOperator { dims, total, perms })
    }

    pub fn fiber_size(&self) -> usize {
        *self.dims.last().expect("nonempty product")
    }
}

impl MeanZeroOperator for ProductOperator {
    fn dim(&self) -> usize {
        self.total
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for perm in &self.perms {
            for (src, &dst) in perm.iter().enumerate() {
                out[dst as usize] += v[src];
            }
        }
        let scale = 1.0 / self.perms.len() as f64;
        for x in out.iter_mut() {
            *x *= scale;
        }
    }

    fn apply_adjoint(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for perm in &self.perms {
            for (src, &dst) in perm.iter().enumerate() {
                out[src] += v[dst as usize];
            }
        }
        let scale = 1.0 / self.perms.len() as f64;
        for x in out.iter_mut() {
            *x *= scale;
        }
    }

    fn project(&self, v: &mut [f64]) {
        let fiber = self.fiber_size();
        for chunk in v.chunks_mut(fiber) {
            let mean = chunk.iter().sum::<f64>() / fiber as f64;
            for x in chunk.iter_mut() {
                *x -= mean;
            }
        }
    }
}

/// Direct-mode level norm: power iteration of the F_n-averaging operator on
/// fiber-mean-zero functions. Deterministic given the recorded seed; a lower
/// bound that in practice converges to the exact restricted norm.
pub fn direct_level_norm(levels: &[LevelSet], limits: &Limits, seed: u64) -> Result<f64> {
    let n = levels.len() as u64;
    let op = ProductOperator::build(levels, limits)?;
    let mut stream = Stream::root(seed).derive(&[tag::DIRECT_NORM, n]);
    let est = spectral::estimate_norm_power(&op, PowerSettings::default(), &mut stream);
    Ok(est.lower_bound)
}

fn meets_threshold(bound: f64, target: Threshold) -> bool {
    let num = num_bigint::BigUint::from(*target.numer());
    let den = num_bigint::BigUint::from(*target.denom());
    spectral::f64_le_ratio(bound, &num, &den)
}

/// Appends one certified level. On any failure the state is untouched and
/// the error carries the retry history (attempt counts are inside the
/// search errors).
pub fn extend_tower(state: &mut TowerState, spec: &LevelSpec, limits: &Limits) -> Result<()> {
    let n = state.depth() as u32 + 1;
    if spec.n != n {
        return Err(Error::InvalidArgument(format!(
            "spec is for level {}, tower is at depth {}",
            spec.n,
            state.depth()
        )));
    }
    let k1 = if n == 1 { 1 } else { state.levels[n as usize - 2].size() as u32 };
    let mut spec = spec.clone();
    if spec.paper_mode {
        // Re-derive the paper-mode schedule for the actual k₁.
        spec = LevelSpec::paper(n, k1, spec.p_min, spec.retry_budget);
    }
    spec.validate(k1)?;
    let level_stream = Stream::root(state.seed).derive(&[tag::TOWER_LEVEL, n as u64]);

    let (level, outcome) = if n == 1 {
        let outcome = search_generators(
            spec.gap_threshold,
            spec.k_min,
            spec.p_min,
            spec.girth_threshold,
            true,
            spec.retry_budget,
            limits,
            &level_stream,
        )?;
        (LevelSet::base(outcome.p, outcome.gens.clone())?, outcome)
    } else {
        let prev = &state.levels[n as usize - 2];
        let outcome = propose_base_set(&spec, prev.size(), limits, &level_stream)?;
        (build_level(prev, outcome.p, &outcome.gens)?, outcome)
    };

    let covering_r = verify_covering(&level, state.levels.last())?;
    let relations = verify_level_relations(&level, n, limits.word_budget);
    if !relations.certifies_no_relations() {
        return Err(Error::VerificationFailed(format!(
            "level {n} tuples admit a relation of length ≤ {n}: {:?}",
            relations.witness.map(|w| w.to_string())
        )));
    }

    let table = GroupTable::build_with_limit(level.p, limits.table_limit)?;
    let generation = if n == 1 {
        vec![outcome.generates]
    } else {
        let verdicts = verify_generation(&table, &level.base_gens, k1 as usize, limits)?;
        if let Some(bad) = verdicts.iter().position(|ok| !ok) {
            return Err(Error::GenerationFailure {
                index: bad,
                closure: 0,
                order: table.order() as u64,
            });
        }
        verdicts
    };

    let bounds = verify_level_gap_bound(n, level.k2(), &outcome.gap)?;
    let (derived_bound, tight_bound) = (bounds.derived, bounds.tight);
    let (target, meets_target) = (bounds.target, bounds.meets_target);

    let mut mode = LevelGapMode::Bound;
    let mut direct_norm = None;
    let total: u64 = state
        .levels
        .iter()
        .chain(std::iter::once(&level))
        .map(|l| pgl::order_formula(l.p).expect("level primes are prime"))
        .fold(1u64, u64::saturating_mul);
    if n >= 2 && total <= limits.direct_limit {
        let mut all_levels: Vec<LevelSet> = state.levels.clone();
        all_levels.push(level.clone());
        let direct = direct_level_norm(&all_levels, limits, state.seed)?;
        // The measured norm is a lower bound of the true restricted norm,
        // which the triangle bound dominates unconditionally. (The inductive
        // form is only a valid norm bound when k₂ ≥ 2n+1, where it already
        // lies above the triangle bound.)
        if direct > tight_bound + 1e-9 {
            return Err(Error::VerificationFailed(format!(
                "direct norm {direct} exceeds certified level bound {tight_bound}"
            )));
        }
        mode = LevelGapMode::Direct;
        direct_norm = Some(direct);
    }

    let certificate = LevelCertificate {
        covering_r,
        base_relations: outcome.relations,
        gap: outcome.gap,
        relations,
        generation,
        mode,
        derived_bound,
        tight_bound,
        direct_norm,
        target,
        meets_target,
        attempts: outcome.attempts,
    };

    state.specs.push(spec);
    state.levels.push(level);
    state.certificates.push(certificate);
    Ok(())
}

/// Full re-verification of a tower from its stored data. Never draws fresh
/// randomness: power-iteration runs replay from recorded seeds. Returns the
/// list of checks performed.
pub fn verify_tower(state: &TowerState, limits: &Limits) -> Result<Vec<String>> {
    let mut log = Vec::new();
    if state.levels.len() != state.certificates.len() || state.levels.len() != state.specs.len() {
        return Err(Error::VerificationFailed("levels/certificates/specs out of step".into()));
    }
    for (idx, level) in state.levels.iter().enumerate() {
        let n = idx as u32 + 1;
        let spec = &state.specs[idx];
        let cert = &state.certificates[idx];
        let k1 = if idx == 0 { 1 } else { state.levels[idx - 1].size() as u32 };
        spec.validate(k1)?;
        if level.n != n || spec.n != n {
            return Err(Error::VerificationFailed(format!("level {n} indices out of step")));
        }

        // Size recursion and covering.
        if idx > 0 {
            let prev = &state.levels[idx - 1];
            let expect = prev.size() * (level.k2() - 1);
            if level.size() != expect {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: |F_n| = {} but k1(k2−1) = {expect}",
                    level.size()
                )));
            }
            let r = verify_covering(level, Some(prev))?;
            if r != cert.covering_r {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: covering fiber {r:?} != recorded {:?}",
                    cert.covering_r
                )));
            }
            log.push(format!("level {n}: covering r = {}", r.expect("n ≥ 2")));
        }

        // Prefix compatibility against every earlier level.
        for m in 0..idx {
            let depth = state.levels[m].elements[0].depth();
            let mut prefixes: Vec<&[PglElement]> =
                level.elements.iter().map(|x| x.prefix(depth)).collect();
            prefixes.sort();
            prefixes.dedup();
            let mut earlier: Vec<&[PglElement]> =
                state.levels[m].elements.iter().map(TupleElement::coords).collect();
            earlier.sort();
            if prefixes != earlier {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: θ_{} projection does not equal level {}",
                    m + 1,
                    m + 1
                )));
            }
        }

        // Base-set girth re-run.
        let base_rel = words::check_no_relations(
            &level.base_gens,
            spec.girth_threshold,
            SearchMethod::Dfs,
            limits.word_budget,
        );
        if base_rel != cert.base_relations {
            return Err(Error::VerificationFailed(format!(
                "level {n}: base relation report mismatch"
            )));
        }
        if !base_rel.certifies_no_relations() {
            return Err(Error::VerificationFailed(format!("level {n}: base set has relations")));
        }
        log.push(format!("level {n}: base girth clean at {}", spec.girth_threshold));

        // Gap re-certification from recorded parameters.
        let table = GroupTable::build_with_limit(level.p, limits.table_limit)?;
        if cert.gap.gens != level.base_gens
            || cert.gap.p != level.p
            || cert.gap.epsilon != spec.gap_threshold
        {
            return Err(Error::VerificationFailed(format!(
                "level {n}: gap certificate does not match the level data"
            )));
        }
        let re_gap = spectral::certify_gap(
            &table,
            &level.base_gens,
            cert.gap.epsilon,
            cert.gap.method,
            cert.gap.power_seed,
            limits.dense_limit,
        )?;
        if re_gap.verdict != cert.gap.verdict {
            return Err(Error::VerificationFailed(format!(
                "level {n}: gap verdict changed on re-verification"
            )));
        }
        match (re_gap.certified_upper(), cert.gap.certified_upper()) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-9 => {}
            (None, None) => {}
            _ => {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: certified upper bound changed on re-verification"
                )));
            }
        }
        if re_gap.estimate.closed_walks != cert.gap.estimate.closed_walks {
            return Err(Error::VerificationFailed(format!(
                "level {n}: closed-walk count changed on re-verification"
            )));
        }
        if cert.gap.verdict != Verdict::Certified {
            return Err(Error::VerificationFailed(format!("level {n}: gap not certified")));
        }
        log.push(format!(
            "level {n}: gap re-certified at {} (upper {})",
            cert.gap.epsilon,
            cert.gap.certified_upper().expect("certified")
        ));

        // Tuple relations at length n.
        let rel = verify_level_relations(level, n, limits.word_budget);
        if rel != cert.relations {
            return Err(Error::VerificationFailed(format!(
                "level {n}: tuple relation report mismatch"
            )));
        }
        if !rel.certifies_no_relations() {
            return Err(Error::VerificationFailed(format!("level {n}: tuples have relations")));
        }
        log.push(format!("level {n}: tuple girth clean at {n}"));

        // Generation.
        if idx > 0 {
            let verdicts = verify_generation(&table, &level.base_gens, k1 as usize, limits)?;
            if verdicts != cert.generation {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: generation verdicts changed"
                )));
            }
            if verdicts.iter().any(|ok| !ok) {
                return Err(Error::VerificationFailed(format!("level {n}: generation fails")));
            }
            log.push(format!("level {n}: all {} difference sets generate", verdicts.len()));
        } else {
            if cert.generation != vec![spectral::check_generation(&table, &level.base_gens)?] {
                return Err(Error::VerificationFailed("level 1: generation verdict changed".into()));
            }
            log.push("level 1: base set generates".into());
        }

        // Level bounds.
        let bounds = verify_level_gap_bound(n, level.k2(), &cert.gap)?;
        if bounds.derived != cert.derived_bound || bounds.tight != cert.tight_bound {
            return Err(Error::VerificationFailed(format!(
                "level {n}: recomputed bounds ({}, {}) != recorded ({}, {})",
                bounds.derived, bounds.tight, cert.derived_bound, cert.tight_bound
            )));
        }
        if cert.meets_target != bounds.meets_target || cert.target != bounds.target {
            return Err(Error::VerificationFailed(format!("level {n}: target flag wrong")));
        }
        if let Some(direct) = cert.direct_norm {
            let re_direct = direct_level_norm(&state.levels[..=idx], limits, state.seed)?;
            if (re_direct - direct).abs() > 1e-9 {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: direct norm {re_direct} != recorded {direct}"
                )));
            }
            if direct > cert.tight_bound + 1e-9 {
                return Err(Error::VerificationFailed(format!(
                    "level {n}: direct norm exceeds certified bound"
                )));
            }
            log.push(format!("level {n}: direct norm {direct} ≤ bound"));
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgl::GroupTable;
    use crate::rng::Stream;

    fn el(p: u32, e: [u32; 4]) -> PglElement {
        PglElement::new(p, e).unwrap()
    }

    fn distinct_sample(p: u32, k: usize, seed: u64) -> Vec<PglElement> {
        let mut s = Stream::root(seed);
        let mut out = Vec::new();
        while out.len() < k {
            let g = sample_uniform(p, &mut s).unwrap();
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    #[test]
    fn build_level_shape() {
        let prev = LevelSet::base(7, distinct_sample(7, 5, 1)).unwrap();
        let base = distinct_sample(7, 6, 2);
        let level = build_level(&prev, 7, &base).unwrap();
        assert_eq!(level.size(), 25);
        assert_eq!(verify_covering(&level, Some(&prev)).unwrap(), Some(5));
        // last coordinate of the (i, j) element is h_i h_j h_i⁻¹
        let first = &level.elements[0];
        let expect = base[0].mul(&base[1]).unwrap().mul(&base[0].inv()).unwrap();
        assert_eq!(*first.coords().last().unwrap(), expect);
        assert_eq!(first.coords()[0], prev.elements[0].coords()[0]);
    }

    #[test]
    fn build_level_rejects_small_base() {
        let prev = LevelSet::base(7, distinct_sample(7, 1, 3)).unwrap();
        let base = distinct_sample(7, 2, 4);
        assert!(matches!(
            build_level(&prev, 7, &base),
            Err(Error::TooFewGenerators { need: 3, got: 2 })
        ));
    }

    #[test]
    fn covering_detects_tampering() {
        let prev = LevelSet::base(5, distinct_sample(5, 3, 5)).unwrap();
        let base = distinct_sample(5, 4, 6);
        let mut level = build_level(&prev, 5, &base).unwrap();
        assert_eq!(verify_covering(&level, Some(&prev)).unwrap(), Some(3));
        // Tamper one element's prefix.
        let mut coords = level.elements[0].coords().to_vec();
        coords[0] = coords[0].mul(&el(5, [1, 1, 0, 1])).unwrap();
        level.elements[0] = TupleElement::new(coords).unwrap();
        assert!(matches!(
            verify_covering(&level, Some(&prev)),
            Err(Error::CoveringViolation(_))
        ));
        // Base level returns the sentinel.
        assert_eq!(verify_covering(&prev, None).unwrap(), None);
    }

    #[test]
    fn level_relations_find_planted_inverse_pair() {
        let x = TupleElement::new(vec![el(5, [1, 1, 0, 1]), el(7, [1, 2, 0, 1])]).unwrap();
        let level = LevelSet {
            n: 2,
            p: 7,
            base_gens: vec![],
            elements: vec![x.clone(), x.invert()],
        };
        let report = verify_level_relations(&level, 2, u64::MAX);
        let w = report.witness.unwrap();
        assert_eq!(w.len(), 2);
        // ℓ = 1 passes: neither element is the identity tuple.
        assert!(verify_level_relations(&level, 1, u64::MAX).certifies_no_relations());
    }

    #[test]
    fn generation_verdicts() {
        let limits = Limits::default();
        // Nearly the whole of Γ₃: every difference set generates.
        let table = GroupTable::build(3).unwrap();
        let base: Vec<PglElement> = table.elements().iter().skip(1).copied().collect();
        let verdicts = verify_generation(&table, &base, 2, &limits).unwrap();
        assert_eq!(verdicts, vec![true, true]);
        // All elements inside the Borel subgroup of Γ₅: closure stalls at 20.
        let table5 = GroupTable::build(5).unwrap();
        let borel: Vec<PglElement> = table5
            .elements()
            .iter()
            .copied()
            .filter(|g| g.entries()[2] == 0)
            .take(5)
            .collect();
        let verdicts = verify_generation(&table5, &borel, 2, &limits).unwrap();
        assert_eq!(verdicts, vec![false, false]);
    }

    #[test]
    fn search_generators_easy_instance() {
        let limits = Limits { prime_ceiling: 13, ..Limits::default() };
        let stream = Stream::root(42).derive(&[tag::SEARCH]);
        let out = search_generators(
            Threshold::new(99, 100),
            2,
            5,
            2,
            true,
            64,
            &limits,
            &stream,
        )
        .unwrap();
        assert!(out.k >= 2);
        assert_eq!(out.gap.verdict, Verdict::Certified);
        assert!(out.generates);
        // Independent re-verification of both certificates.
        let table = GroupTable::build(out.p).unwrap();
        let re = spectral::certify_gap(
            &table,
            &out.gens,
            Threshold::new(99, 100),
            out.gap.method,
            out.gap.power_seed,
            limits.dense_limit,
        )
        .unwrap();
        assert_eq!(re.verdict, Verdict::Certified);
        let rel = words::check_no_relations(&out.gens, 2, SearchMethod::Dfs, u64::MAX);
        assert!(rel.certifies_no_relations());
    }

    #[test]
    fn search_k_schedule() {
        assert_eq!(scheduled_k(2, 1), 1);
        assert_eq!(scheduled_k(5, 1), 2);
        assert_eq!(scheduled_k(13, 1), 6);
        assert_eq!(scheduled_k(13, 9), 9);
    }

    #[test]
    fn search_pigeonhole_exhausts() {
        // More reduced-word images than |Γ_p| makes a clean girth report
        // impossible; the search must exhaust quickly.
        let limits = Limits { prime_ceiling: 3, ..Limits::default() };
        let stream = Stream::root(1).derive(&[tag::SEARCH]);
        let err = search_generators(
            Threshold::new(99, 100),
            30,
            2,
            5,
            false,
            4,
            &limits,
            &stream,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SearchExhausted(_)));
    }

    #[test]
    fn propose_base_set_success_rate() {
        // Weak demands (ε = 0.95, ℓ = 2, k ≥ 6) at p = 7: at least 45 of 50
        // seeds must succeed on the first prime. Measured once and pinned;
        // the per-attempt joint pass rate is ≈ 0.37 (dominated by the
        // no-involution condition), so 10 retries put each seed above 99%.
        let spec = LevelSpec {
            n: 2,
            p_min: 7,
            gap_threshold: Threshold::new(95, 100),
            girth_threshold: 2,
            k_min: 6,
            retry_budget: 10,
            paper_mode: false,
        };
        let limits = Limits { prime_ceiling: 7, ..Limits::default() };
        let mut successes = 0;
        for seed in 0..50u64 {
            let stream = Stream::root(seed).derive(&[tag::TOWER_LEVEL, 2]);
            if let Ok(out) = propose_base_set(&spec, 1, &limits, &stream) {
                assert_eq!(out.p, 7);
                assert!(out.k >= 6);
                successes += 1;
            }
        }
        assert!(successes >= 45, "only {successes}/50 seeds succeeded");
    }

    #[test]
    fn bound_mode_rejects_refuted_base_gap() {
        // A refuted base-set gap yields no sound level bound: TargetMissed.
        let table = GroupTable::build(5).unwrap();
        let g = el(5, [1, 1, 0, 1]);
        let refuted = spectral::certify_gap(
            &table,
            &[g],
            Threshold::new(1, 2),
            spectral::GapMethod::PowerRefute,
            17,
            Limits::default().dense_limit,
        )
        .unwrap();
        assert_eq!(refuted.verdict, Verdict::Refuted);
        assert!(matches!(
            verify_level_gap_bound(2, 4, &refuted),
            Err(Error::TargetMissed { .. })
        ));
        // A certified gap produces both bounds and the exact 1/n verdict.
        let all: Vec<PglElement> = table.elements().to_vec();
        let certified = spectral::certify_gap(
            &table,
            &all,
            Threshold::new(1, 10),
            spectral::GapMethod::Dense,
            18,
            Limits::default().dense_limit,
        )
        .unwrap();
        // With k₂ ≥ 2n+1 the inductive form dominates the triangle bound;
        // below that the triangle bound is the only sound claim.
        let wide = verify_level_gap_bound(2, 6, &certified).unwrap();
        assert!(wide.tight <= wide.derived);
        assert_eq!(wide.target, Threshold::new(1, 2));
        assert!(wide.meets_target);
        let narrow = verify_level_gap_bound(2, 4, &certified).unwrap();
        assert!(narrow.tight > narrow.derived);
    }

    #[test]
    fn paper_spec_exact_thresholds() {
        let spec = LevelSpec::paper(1, 1, 5, 8);
        assert_eq!(spec.gap_threshold, Threshold::new(1, 4));
        assert_eq!(spec.girth_threshold, 3);
        assert_eq!(spec.k_min, 4);
        let spec2 = LevelSpec::paper(2, 6, 5, 8);
        assert_eq!(spec2.gap_threshold, Threshold::new(1, 8));
        assert_eq!(spec2.girth_threshold, 6);
        assert_eq!(spec2.k_min, 7);
    }

    fn desk_spec(n: u32, eps: (u64, u64), ell: u32, k_min: u32, retry: u32) -> LevelSpec {
        LevelSpec {
            n,
            p_min: 5,
            gap_threshold: Threshold::new(eps.0, eps.1),
            girth_threshold: ell,
            k_min,
            retry_budget: retry,
            paper_mode: false,
        }
    }

    #[test]
    fn extend_tower_two_levels_and_verify() {
        // k = 4 at level 1 (pairs and triples never certify: a⁻¹b always
        // fixes coset-indicator vectors, so any 2-element average has norm
        // exactly 1, and 3-element norms sit above 0.9). k₂ = 7 at level 2
        // is where the girth-3 and gap-0.7 demands jointly become reachable.
        let limits = Limits { prime_ceiling: 13, ..Limits::default() };
        let mut state = TowerState::new(2026);
        extend_tower(&mut state, &desk_spec(1, (9, 10), 2, 4, 64), &limits).unwrap();
        assert_eq!(state.depth(), 1);
        extend_tower(&mut state, &desk_spec(2, (7, 10), 3, 7, 600), &limits).unwrap();
        assert_eq!(state.depth(), 2);

        let l1 = &state.levels[0];
        let l2 = &state.levels[1];
        assert_eq!(l2.size(), l1.size() * (l2.k2() - 1));
        let cert2 = &state.certificates[1];
        assert_eq!(cert2.covering_r, Some(l2.k2() as u32 - 1));
        assert!(cert2.generation.iter().all(|&ok| ok));
        if let Some(direct) = cert2.direct_norm {
            assert!(direct <= cert2.derived_bound + 1e-9);
            assert!(direct <= cert2.tight_bound + 1e-9);
        }
        verify_tower(&state, &limits).unwrap();

        // Determinism: a rerun from the same seed is identical.
        let mut again = TowerState::new(2026);
        extend_tower(&mut again, &desk_spec(1, (9, 10), 2, 4, 64), &limits).unwrap();
        extend_tower(&mut again, &desk_spec(2, (7, 10), 3, 7, 600), &limits).unwrap();
        assert_eq!(state, again);
    }

    #[test]
    fn extend_tower_failure_leaves_state_unchanged() {
        let limits = Limits { prime_ceiling: 5, ..Limits::default() };
        let mut state = TowerState::new(7);
        extend_tower(&mut state, &desk_spec(1, (9, 10), 2, 4, 64), &limits).unwrap();
        let snapshot = state.clone();
        // Harsh thresholds with no retries: must fail and change nothing.
        let harsh = desk_spec(2, (1, 100), 9, 4, 0);
        assert!(extend_tower(&mut state, &harsh, &limits).is_err());
        assert_eq!(state, snapshot);
    }

    #[test]
    fn direct_norm_matches_dense_oracle_on_tiny_tower() {
        // Synthetic 2-level tower over Γ₃ × Γ₃ (|K₂| = 576): compare the
        // matrix-free fiber-projected power value against a dense oracle
        // that materializes the operator and the fiber projection.
        let limits = Limits::default();
        let prev = LevelSet::base(3, distinct_sample(3, 3, 11)).unwrap();
        let base = distinct_sample(3, 4, 12);
        let level = build_level(&prev, 3, &base).unwrap();
        let levels = vec![prev, level];
        let direct = direct_level_norm(&levels, &limits, 99).unwrap();

        let table = GroupTable::build(3).unwrap();
        let n1 = table.order();
        let total = n1 * n1;
        let cur = &levels[1];
        let mut m = nalgebra::DMatrix::<f64>::zeros(total, total);
        let scale = 1.0 / cur.size() as f64;
        for f in &cur.elements {
            let p0 = table.left_mul_perm(&f.coords()[0]).unwrap();
            let p1 = table.left_mul_perm(&f.coords()[1]).unwrap();
            for (a, &pa) in p0.iter().enumerate() {
                for (b, &pb) in p1.iter().enumerate() {
                    let src = a * n1 + b;
                    let dst = pa as usize * n1 + pb as usize;
                    m[(dst, src)] += scale;
                }
            }
        }
        // Fiber projection: subtract the mean over the last coordinate.
        let mut proj = nalgebra::DMatrix::<f64>::identity(total, total);
        for a in 0..n1 {
            for b in 0..n1 {
                for c in 0..n1 {
                    proj[(a * n1 + b, a * n1 + c)] -= 1.0 / n1 as f64;
                }
            }
        }
        let oracle = crate::spectral::largest_singular_value(&(&m * &proj));
        assert!(
            (direct - oracle).abs() < 1e-7,
            "direct {direct} vs oracle {oracle}"
        );
    }
}
