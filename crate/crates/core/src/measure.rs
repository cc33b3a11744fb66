//! The inverse-limit measure carried by a tower, and its symmetrization.
//!
//! The measure is never materialized on an infinite space: it *is* the tower
//! plus the covering-consistency proofs, and every query is level-indexed.
//! The level-n marginal of ν₀ is the normalized counting measure on F_n; the
//! symmetrized measure ν places mass (w(x) + w(x⁻¹))/2 on F_n ∪ F_n⁻¹. All
//! masses are exact rationals; floating point appears only in the spectral
//! bounds quoted from the level certificates.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
#[cfg(test)]
use num_traits::One;

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::tower::{LevelSet, TowerState, TupleElement, flat_left_mul_perms};
use crate::words::WordGroup;

/// Level-indexed view of ν₀ (or of its symmetrization ν).
pub struct TowerMeasure<'a> {
    tower: &'a TowerState,
    symmetrized: bool,
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl<'a> TowerMeasure<'a> {
    pub fn new(tower: &'a TowerState, symmetrized: bool) -> Self {
        TowerMeasure { tower, symmetrized }
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    fn level(&self, n: u32) -> Result<&'a LevelSet> {
        self.tower
            .levels
            .get(n as usize - 1)
            .ok_or_else(|| Error::InvalidArgument(format!("tower has no level {n}")))
    }

    /// Pushforward consistency between levels n−1 and n: for every
    /// x ∈ F_{n−1}, the θ-fiber masses Σ 1/|F_n| must equal 1/|F_{n−1}|
    /// exactly. Returns false on tampered data; vacuously true at n = 1.
    pub fn marginal_consistency(&self, n: u32) -> Result<bool> {
        let cur = self.level(n)?;
        if n == 1 {
            return Ok(true);
        }
        let prev = self.level(n - 1)?;
        let point_mass = ratio(1, cur.size() as u64);
        let target = ratio(1, prev.size() as u64);
        let depth = prev.elements.first().map_or(0, TupleElement::depth);
        let mut fiber_mass: BTreeMap<&[crate::pgl::PglElement], BigRational> = BTreeMap::new();
        for x in &cur.elements {
            *fiber_mass.entry(x.prefix(depth)).or_insert_with(BigRational::zero) +=
                point_mass.clone();
        }
        if fiber_mass.len() != prev.size() {
            return Ok(false);
        }
        for g in &prev.elements {
            match fiber_mass.get(g.coords()) {
                Some(mass) if *mass == target => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Largest point mass per level (1/|F_n| for ν₀) and the non-atomicity
    /// verdict: every consecutive ratio must be ≤ 1/2, i.e. every covering
    /// fiber has r_n ≥ 2.
    pub fn non_atomic_check(&self) -> NonAtomicReport {
        let masses: Vec<BigRational> = self
            .tower
            .levels
            .iter()
            .map(|l| ratio(1, l.size() as u64))
            .collect();
        let half = ratio(1, 2);
        let non_atomic_trend = masses
            .windows(2)
            .all(|w| w[1].clone() / w[0].clone() <= half);
        NonAtomicReport { max_point_mass: masses, non_atomic_trend }
    }

    /// Support of the level-n marginal with exact masses: F_n for ν₀,
    /// F_n ∪ F_n⁻¹ with averaged masses for ν.
    pub fn support_descriptor(&self, n: u32) -> Result<Vec<(TupleElement, BigRational)>> {
        let level = self.level(n)?;
        let w = ratio(1, level.size() as u64);
        let mut out: BTreeMap<TupleElement, BigRational> = BTreeMap::new();
        if self.symmetrized {
            let half = w / ratio(2, 1);
            for x in &level.elements {
                *out.entry(x.clone()).or_insert_with(BigRational::zero) += half.clone();
                *out.entry(x.invert()).or_insert_with(BigRational::zero) += half.clone();
            }
        } else {
            for x in &level.elements {
                *out.entry(x.clone()).or_insert_with(BigRational::zero) += w.clone();
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Exact symmetry check of the level-n averaging matrix on ℓ²(K_n):
    /// the matrix Σ_x w(x)·P_x is materialized sparsely with rational
    /// entries and compared against its transpose, entry for entry.
    pub fn self_adjoint_check(&self, n: u32, limits: &Limits) -> Result<bool> {
        let support = self.support_descriptor(n)?;
        let levels = &self.tower.levels[..n as usize];
        let elements: Vec<TupleElement> = support.iter().map(|(x, _)| x.clone()).collect();
        let (_dims, perms) =
            flat_left_mul_perms(levels, &elements, limits.direct_limit, limits.table_limit)?;
        let mut entries: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
        for ((_, mass), perm) in support.iter().zip(&perms) {
            for (src, &dst) in perm.iter().enumerate() {
                *entries.entry((dst, src as u32)).or_insert_with(BigRational::zero) +=
                    mass.clone();
            }
        }
        for ((r, c), v) in &entries {
            if r < c {
                continue;
            }
            if entries.get(&(*c, *r)) != Some(v) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The spectral-decay profile: one row per level, echoing the certified
    /// bounds. `base_bound` is the certified upper bound for the base set
    /// (which at level 1 is the bound for F₁ itself); `level_bound` is the
    /// sound bound for ‖π(F_n)‖ over the representations of K_n that do not
    /// factor through θ_{n−1}; `target` is the inductive goal 1/n. A finite
    /// tower certifies the decay exactly for the representation blocks its
    /// levels resolve — the profile reports that resolution honestly rather
    /// than claiming the limit.
    pub fn c0_profile(&self) -> Result<C0Profile> {
        let mut rows = Vec::with_capacity(self.tower.depth());
        for (idx, level) in self.tower.levels.iter().enumerate() {
            let n = idx as u32 + 1;
            let cert = self
                .tower
                .certificates
                .get(idx)
                .ok_or(Error::MissingCertificate { n })?;
            let base_bound = cert
                .gap
                .certified_upper()
                .ok_or(Error::MissingCertificate { n })?;
            rows.push(ProfileRow {
                n,
                p: level.p,
                base_bound,
                level_bound: cert.tight_bound,
                derived_bound: cert.derived_bound,
                target: cert.target,
                meets_target: cert.meets_target,
            });
        }
        Ok(C0Profile { rows })
    }
}

#[derive(Clone, Debug)]
pub struct NonAtomicReport {
    /// 1/|F_n| per level.
    pub max_point_mass: Vec<BigRational>,
    /// True iff every consecutive mass ratio is ≤ 1/2.
    pub non_atomic_trend: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileRow {
    pub n: u32,
    pub p: u32,
    /// Certified upper bound for the base set of this level.
    pub base_bound: f64,
    /// Sound upper bound for the representations new at this level.
    pub level_bound: f64,
    /// The inductive 2u + 1/(2n) form (coincides with base_bound at n = 1).
    pub derived_bound: f64,
    pub target: crate::spectral::Threshold,
    pub meets_target: bool,
}

#[derive(Clone, Debug)]
pub struct C0Profile {
    pub rows: Vec<ProfileRow>,
}

impl C0Profile {
    /// Plain tab-delimited table, one row per level.
    pub fn to_table(&self) -> String {
        let mut out = String::from("n\tp\tbase_bound\tlevel_bound\tderived_bound\ttarget\tmeets_target\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}/{}\t{}\n",
                r.n,
                r.p,
                r.base_bound,
                r.level_bound,
                r.derived_bound,
                r.target.numer(),
                r.target.denom(),
                r.meets_target
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgl::{PglElement, sample_uniform};
    use crate::rng::Stream;
    use crate::spectral::Threshold;
    use crate::tower::{LevelSpec, TowerState, build_level, extend_tower};

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

    /// Synthetic uncertified tower (levels only) for the pure-arithmetic
    /// checks: F₁ of size 2 in Γ₃, then product-style levels with fiber
    /// sizes 5 and 4.
    fn synthetic_tower() -> TowerState {
        let g = distinct_sample(3, 2, 1);
        let h = distinct_sample(3, 5, 2);
        let f = distinct_sample(3, 4, 3);
        let l1 = LevelSet::base(3, g.clone()).unwrap();
        let mut l2 = LevelSet { n: 2, p: 3, base_gens: h.clone(), elements: vec![] };
        for gi in &l1.elements {
            for hj in &h {
                let mut coords = gi.coords().to_vec();
                coords.push(*hj);
                l2.elements.push(TupleElement::new(coords).unwrap());
            }
        }
        let mut l3 = LevelSet { n: 3, p: 3, base_gens: f.clone(), elements: vec![] };
        for gi in &l2.elements {
            for ft in &f {
                let mut coords = gi.coords().to_vec();
                coords.push(*ft);
                l3.elements.push(TupleElement::new(coords).unwrap());
            }
        }
        let mut state = TowerState::new(0);
        state.levels = vec![l1, l2, l3];
        state
    }

    #[test]
    fn marginal_consistency_holds_and_detects_tampering() {
        let mut state = synthetic_tower();
        let tm = TowerMeasure::new(&state, false);
        assert!(tm.marginal_consistency(1).unwrap());
        assert!(tm.marginal_consistency(2).unwrap());
        assert!(tm.marginal_consistency(3).unwrap());
        // r_n/|F_n| = 1/|F_{n−1}| in the shape of the synthetic tower.
        assert_eq!(state.levels[1].size(), 10);
        assert_eq!(state.levels[2].size(), 40);
        // Tamper: drop one element of one fiber.
        state.levels[2].elements.remove(0);
        let tm = TowerMeasure::new(&state, false);
        assert!(!tm.marginal_consistency(3).unwrap());
    }

    #[test]
    fn non_atomic_masses() {
        let state = synthetic_tower();
        let tm = TowerMeasure::new(&state, false);
        let report = tm.non_atomic_check();
        assert!(report.non_atomic_trend);
        assert_eq!(
            report.max_point_mass,
            vec![ratio(1, 2), ratio(1, 10), ratio(1, 40)]
        );
        // Single level: vacuously non-atomic-trending with mass 1/|F₁|.
        let mut single = TowerState::new(0);
        single.levels = vec![state.levels[0].clone()];
        let tm = TowerMeasure::new(&single, false);
        let report = tm.non_atomic_check();
        assert!(report.non_atomic_trend);
        assert_eq!(report.max_point_mass, vec![ratio(1, 2)]);
        // A fiber of size 1 breaks the trend.
        let mut flat = TowerState::new(0);
        let l1 = state.levels[0].clone();
        let mut l2 = LevelSet { n: 2, p: 3, base_gens: vec![], elements: vec![] };
        for g in &l1.elements {
            let mut coords = g.coords().to_vec();
            coords.push(crate::pgl::PglElement::identity(3).unwrap());
            l2.elements.push(TupleElement::new(coords).unwrap());
        }
        flat.levels = vec![l1, l2];
        let tm = TowerMeasure::new(&flat, false);
        assert!(!tm.non_atomic_check().non_atomic_trend);
    }

    #[test]
    fn support_masses_sum_to_one() {
        let state = synthetic_tower();
        for symmetrized in [false, true] {
            let tm = TowerMeasure::new(&state, symmetrized);
            for n in 1..=3u32 {
                let support = tm.support_descriptor(n).unwrap();
                let total: BigRational = support.iter().map(|(_, m)| m.clone()).sum();
                assert!(total.is_one());
                if symmetrized {
                    assert!(support.len() <= 2 * state.levels[n as usize - 1].size());
                } else {
                    assert_eq!(support.len(), state.levels[n as usize - 1].size());
                }
            }
        }
    }

    #[test]
    fn symmetrized_support_doubles_without_involutions() {
        // A base set free of length-≤2 relations has F ∩ F⁻¹ = ∅, so the
        // symmetrized support has exactly 2|F| points of mass 1/(2|F|).
        let gens = vec![
            PglElement::new(7, [1, 1, 0, 1]).unwrap(),
            PglElement::new(7, [1, 0, 1, 1]).unwrap(),
        ];
        let rel = crate::words::check_no_relations(
            &gens,
            2,
            crate::words::SearchMethod::Dfs,
            u64::MAX,
        );
        assert!(rel.certifies_no_relations());
        let mut state = TowerState::new(0);
        state.levels = vec![LevelSet::base(7, gens).unwrap()];
        let tm = TowerMeasure::new(&state, true);
        let support = tm.support_descriptor(1).unwrap();
        assert_eq!(support.len(), 4);
        assert!(support.iter().all(|(_, m)| *m == ratio(1, 4)));
    }

    #[test]
    fn self_adjoint_exact() {
        let limits = Limits::default();
        let mut state = TowerState::new(0);
        state.levels = vec![LevelSet::base(5, distinct_sample(5, 3, 9)).unwrap()];
        let sym = TowerMeasure::new(&state, true);
        assert!(sym.self_adjoint_check(1, &limits).unwrap());
        // The unsymmetrized measure is not self-adjoint unless F = F⁻¹.
        let plain = TowerMeasure::new(&state, false);
        let f = &state.levels[0].elements;
        let closed_under_inverse = f.iter().all(|x| f.contains(&x.invert()));
        assert!(!closed_under_inverse);
        assert!(!plain.self_adjoint_check(1, &limits).unwrap());
        // Symmetrization is idempotent at the level of masses.
        let sym_support = sym.support_descriptor(1).unwrap();
        let resym: BTreeMap<_, _> = sym_support
            .iter()
            .map(|(x, m)| {
                let inv_mass = sym_support
                    .iter()
                    .find(|(y, _)| *y == x.invert())
                    .map(|(_, m)| m.clone())
                    .unwrap_or_else(BigRational::zero);
                (x.clone(), (m.clone() + inv_mass) / ratio(2, 1))
            })
            .collect();
        for (x, m) in &sym_support {
            assert_eq!(resym[x], *m);
        }
    }

    #[test]
    fn two_level_symmetry_on_product_space() {
        // Real product level on Γ₃ × Γ₃ (|K₂| = 576).
        let limits = Limits::default();
        let prev = LevelSet::base(3, distinct_sample(3, 3, 21)).unwrap();
        let base = distinct_sample(3, 4, 22);
        let level = build_level(&prev, 3, &base).unwrap();
        let mut state = TowerState::new(0);
        state.levels = vec![prev, level];
        assert!(TowerMeasure::new(&state, true).self_adjoint_check(2, &limits).unwrap());
    }

    #[test]
    fn symmetrized_norm_never_exceeds_unsymmetrized() {
        // Triangle bound ‖(A + A*)/2‖ ≤ ‖A‖, asserted numerically on a
        // dense-oracle level: materialize both measure operators on ℓ²(K₁)
        // and compare their mean-zero norms.
        let mut state = TowerState::new(0);
        state.levels = vec![LevelSet::base(5, distinct_sample(5, 4, 31)).unwrap()];
        let table = crate::pgl::GroupTable::build(5).unwrap();
        let n = table.order();
        let dense_of = |symmetrized: bool| {
            let tm = TowerMeasure::new(&state, symmetrized);
            let support = tm.support_descriptor(1).unwrap();
            let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
            for (x, mass) in &support {
                let w = num_traits::ToPrimitive::to_f64(mass).unwrap();
                let perm = table.left_mul_perm(&x.coords()[0]).unwrap();
                for (src, &dst) in perm.iter().enumerate() {
                    m[(dst as usize, src)] += w;
                }
            }
            let restricted = crate::spectral::restrict_to_mean_zero(&m);
            crate::spectral::largest_singular_value(&restricted)
        };
        let plain = dense_of(false);
        let sym = dense_of(true);
        assert!(sym <= plain + 1e-12, "symmetrized norm {sym} above unsymmetrized {plain}");
    }

    #[test]
    fn profile_rows_echo_certificates() {
        let limits = Limits { prime_ceiling: 13, ..Limits::default() };
        let mut state = TowerState::new(2026);
        let spec1 = LevelSpec {
            n: 1,
            p_min: 5,
            gap_threshold: Threshold::new(9, 10),
            girth_threshold: 2,
            k_min: 4,
            retry_budget: 64,
            paper_mode: false,
        };
        extend_tower(&mut state, &spec1, &limits).unwrap();
        let tm = TowerMeasure::new(&state, false);
        let profile = tm.c0_profile().unwrap();
        assert_eq!(profile.rows.len(), 1);
        let row = &profile.rows[0];
        assert_eq!(row.n, 1);
        assert_eq!(row.target, Threshold::new(1, 1));
        assert_eq!(
            row.base_bound,
            state.certificates[0].gap.certified_upper().unwrap()
        );
        assert!(tm.marginal_consistency(1).unwrap());
        let table = profile.to_table();
        assert!(table.lines().count() == 2);
        assert!(table.starts_with("n\tp\t"));
    }
}
