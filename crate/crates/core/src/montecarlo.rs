//! Empirical and exhaustive verification of the quantitative bounds behind
//! the random-generator arguments.
//!
//! Gap trials sample generator tuples with repetition (independent uniform —
//! deliberately different from the tower's distinct-set sampling) and
//! compare the empirical success fraction against the runtime-computed
//! closed form 1 − 4|G|·exp(−kε²/(16·log 2)). Girth trials do the same
//! against 1 − (2k)^{ℓ+1}·3ℓ/p, whose validity additionally needs 3k ≤ p−1
//! and that no tested word is a law of Γ_p; laws are screened per word, not
//! predicted, since no effective prime threshold is available. Bounds are
//! never hard-coded: every run recomputes them from its own parameters, and
//! non-positive ("vacuous") or precondition-violating bounds are flagged
//! rather than asserted.
//!
//! The exact counting path enumerates word varieties over Γ_p^k and over the
//! full matrix space (F_p^{2×2})^k, checking the covering ratio (p−1)^k and
//! the degree bound |𝒲| ≤ ℓ·p^{4k−1} with integer arithmetic.

use nalgebra::DMatrix;
use num_bigint::BigUint;

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::pgl::{GroupTable, Mat2, PglElement, order_formula, sample_uniform};
use crate::rng::{Stream, tag};
use crate::spectral::{
    self, GapMethod, Threshold, Verdict, largest_singular_value, restrict_to_mean_zero,
};
use crate::words::{self, ReducedWord, SearchMethod};

/// Parameters of one Monte-Carlo run.
#[derive(Clone, Copy, Debug)]
pub struct TrialConfig {
    pub p: u32,
    pub k: usize,
    /// Gap threshold for gap trials.
    pub epsilon: Option<Threshold>,
    /// Relation length for girth trials.
    pub ell: Option<u32>,
    pub trials: u32,
    pub seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoundFormula {
    /// 1 − 4|G|·exp(−kε²/(16·log 2))
    AlonRoichmanGap,
    /// 1 − (2k)^{ℓ+1}·3ℓ/p
    GirthUnion,
}

impl std::fmt::Display for BoundFormula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundFormula::AlonRoichmanGap => write!(f, "alon-roichman-gap"),
            BoundFormula::GirthUnion => write!(f, "girth-union"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub successes: u32,
    /// Exact fraction successes/trials.
    pub fraction: Threshold,
    /// Runtime-computed lower bound for the success probability; may be ≤ 0.
    pub theoretical_bound: f64,
    pub bound_vacuous: bool,
    /// False when a precondition of the bound failed (law screening
    /// incomplete, or 3k > p−1 for the girth form).
    pub bound_applies: bool,
    pub formula: BoundFormula,
    /// Trials whose certification was inconclusive (counted as failures).
    pub inconclusive: u32,
}

/// Spectral-gap trials: k elements sampled uniformly with repetition per
/// trial; success means the gap certificate at ε holds for the tuple.
pub fn ar_trials(cfg: &TrialConfig, limits: &Limits) -> Result<TrialResult> {
    let eps = cfg
        .epsilon
        .ok_or_else(|| Error::InvalidArgument("gap trials need epsilon".into()))?;
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be ≥ 1".into()));
    }
    let order = order_formula(cfg.p)?;
    let table = GroupTable::build_with_limit(cfg.p, limits.table_limit)?;
    let method = if order <= limits.dense_limit as u64 {
        GapMethod::Dense
    } else {
        let m = limits
            .trace_order
            .unwrap_or_else(|| spectral::default_trace_order(order, eps));
        GapMethod::Trace { m }
    };
    let root = Stream::root(cfg.seed);
    let mut successes = 0u32;
    let mut inconclusive = 0u32;
    for trial in 0..cfg.trials {
        let mut draw = root.derive(&[tag::TRIAL, trial as u64]);
        let gens: Vec<PglElement> =
            (0..cfg.k).map(|_| sample_uniform(cfg.p, &mut draw)).collect::<Result<_>>()?;
        let power_seed = root.derive(&[tag::POWER_START, trial as u64]).next_u64();
        let cert =
            spectral::certify_gap(&table, &gens, eps, method, power_seed, limits.dense_limit)?;
        match cert.verdict {
            Verdict::Certified => successes += 1,
            Verdict::Refuted => {}
            Verdict::Inconclusive => inconclusive += 1,
        }
    }
    let eps_f = *eps.numer() as f64 / *eps.denom() as f64;
    let bound =
        1.0 - 4.0 * order as f64 * (-(cfg.k as f64) * eps_f * eps_f / (16.0 * 2f64.ln())).exp();
    Ok(TrialResult {
        config: *cfg,
        successes,
        fraction: Threshold::new(successes as u64, cfg.trials as u64),
        theoretical_bound: bound,
        bound_vacuous: bound <= 0.0,
        bound_applies: bound > 0.0,
        formula: BoundFormula::AlonRoichmanGap,
        inconclusive,
    })
}

/// Outcome of screening one word for being a law of Γ_p.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum LawScreen {
    NotALaw,
    Law,
    Unknown,
}

/// Screens a word: any substitution witnessing w ≠ e settles it; otherwise
/// fall back to the exhaustive check when affordable.
fn screen_law(word: &ReducedWord, p: u32, limits: &Limits, stream: &Stream) -> Result<LawScreen> {
    let k = word.arity();
    let mut draw = stream.clone();
    for _ in 0..24 {
        let gens: Vec<PglElement> =
            (0..k).map(|_| sample_uniform(p, &mut draw)).collect::<Result<_>>()?;
        if !words::evaluate(word, &gens)?.is_identity() {
            return Ok(LawScreen::NotALaw);
        }
    }
    let order = order_formula(p)?;
    if order.checked_pow(k as u32).is_some_and(|t| t <= limits.exhaustive_budget) {
        return Ok(if law_check(word, p, limits)? { LawScreen::Law } else { LawScreen::NotALaw });
    }
    Ok(LawScreen::Unknown)
}

/// Girth trials: success means no relation of length ≤ ℓ among the sampled
/// tuple. The theoretical bound applies only when every reduced word of
/// length ≤ ℓ was screened as a non-law and 3k ≤ p−1.
pub fn girth_trials(cfg: &TrialConfig, limits: &Limits) -> Result<TrialResult> {
    let ell = cfg
        .ell
        .ok_or_else(|| Error::InvalidArgument("girth trials need ell".into()))?;
    if cfg.trials == 0 || cfg.k == 0 {
        return Err(Error::InvalidArgument("trials and k must be ≥ 1".into()));
    }
    if !crate::pgl::is_prime(cfg.p) {
        return Err(Error::NotPrime { n: cfg.p });
    }
    let root = Stream::root(cfg.seed);

    // Law screening over all reduced words of length ≤ ℓ, gated by count.
    let word_count = words::reduced_word_count_cumulative(cfg.k, ell);
    let mut laws_excluded = true;
    if word_count <= 100_000 {
        'screen: for len in 1..=ell {
            for (i, w) in words::enumerate_reduced_words(cfg.k, len).iter().enumerate() {
                let stream = root.derive(&[tag::LAW_SCREEN, len as u64, i as u64]);
                match screen_law(w, cfg.p, limits, &stream)? {
                    LawScreen::NotALaw => {}
                    LawScreen::Law | LawScreen::Unknown => {
                        laws_excluded = false;
                        break 'screen;
                    }
                }
            }
        }
    } else {
        laws_excluded = false;
    }

    let mut successes = 0u32;
    let mut inconclusive = 0u32;
    for trial in 0..cfg.trials {
        let mut draw = root.derive(&[tag::TRIAL, trial as u64]);
        let gens: Vec<PglElement> =
            (0..cfg.k).map(|_| sample_uniform(cfg.p, &mut draw)).collect::<Result<_>>()?;
        let report =
            words::check_no_relations(&gens, ell, SearchMethod::Dfs, limits.word_budget);
        if !report.conclusive {
            inconclusive += 1;
        } else if report.witness.is_none() {
            successes += 1;
        }
    }

    let two_k = 2.0 * cfg.k as f64;
    let bound = 1.0 - two_k.powi(ell as i32 + 1) * 3.0 * ell as f64 / cfg.p as f64;
    let small_k = (3 * cfg.k as u64) < cfg.p as u64;
    Ok(TrialResult {
        config: *cfg,
        successes,
        fraction: Threshold::new(successes as u64, cfg.trials as u64),
        theoretical_bound: bound,
        bound_vacuous: bound <= 0.0,
        bound_applies: bound > 0.0 && laws_excluded && small_k,
        formula: BoundFormula::GirthUnion,
        inconclusive,
    })
}

/// Diagnostics of the Hermitian/skew decomposition λ₀(·) = T − iS on the
/// mean-zero complement, and of the auxiliary variables
/// X_j = (2 + λ₀(g_j) + λ₀(g_j)*)/4.
#[derive(Clone, Debug)]
pub struct TsReport {
    pub norm_op: f64,
    pub norm_t: f64,
    pub norm_s: f64,
    /// max |B − (T + (B−Bᵀ)/2)| entrywise: the reconstruction residual.
    pub reconstruction_residual: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl TsReport {
    pub fn x_spectrum_in_unit_interval(&self, tol: f64) -> bool {
        self.x_min >= -tol && self.x_max <= 1.0 + tol
    }

    pub fn triangle_holds(&self, tol: f64) -> bool {
        self.norm_op <= self.norm_t + self.norm_s + tol
    }
}

/// Checks the T/S decomposition on the mean-zero complement: T is the
/// Hermitian part, S the scaled skew part (for a real permutation average B,
/// ‖S‖ = ‖(B − Bᵀ)/2‖), every X_j has spectrum in [0, 1], and
/// ‖λ₀(·)‖ ≤ ‖T‖ + ‖S‖.
pub fn ts_decomposition_check(
    table: &GroupTable,
    gens: &[PglElement],
    limits: &Limits,
) -> Result<TsReport> {
    let n = table.order();
    if n > limits.dense_limit {
        return Err(Error::TooLarge { size: n as u64, limit: limits.dense_limit as u64 });
    }
    let op = spectral::AveragingOperator::build(table, gens)?;
    let b = restrict_to_mean_zero(&op.dense_matrix());
    let bt = b.transpose();
    let t = (&b + &bt) * 0.5;
    let skew = (&b - &bt) * 0.5;
    let reconstruction = (&t + &skew) - &b;
    let reconstruction_residual =
        reconstruction.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let norm_op = largest_singular_value(&b);
    let norm_t = largest_singular_value(&t);
    let norm_s = largest_singular_value(&skew);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let dim = n - 1;
    for g in gens {
        let single = spectral::AveragingOperator::build(table, std::slice::from_ref(g))?;
        let pg = restrict_to_mean_zero(&single.dense_matrix());
        let x = (DMatrix::<f64>::identity(dim, dim) * 2.0 + &pg + pg.transpose()) * 0.25;
        let eig = nalgebra::SymmetricEigen::new(x);
        for &lambda in eig.eigenvalues.iter() {
            x_min = x_min.min(lambda);
            x_max = x_max.max(lambda);
        }
    }
    Ok(TsReport { norm_op, norm_t, norm_s, reconstruction_residual, x_min, x_max })
}

/// Lifted variety counts over the full matrix space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedCount {
    /// |𝒲|: tuples of arbitrary matrices whose word value is a scalar
    /// multiple of the identity (zero included).
    pub w_count: BigUint,
    /// |𝒱| = |𝒲 ∩ GL₂^k|.
    pub v_count: BigUint,
    /// |𝒱| = (p−1)^k · |𝒰| held exactly.
    pub covering_exact: bool,
    /// |𝒲| ≤ ℓ·p^{4k−1}; None when the word is a law (no bound claimed).
    pub w_bound_ok: Option<bool>,
}

/// Exhaustive word-variety count over Γ_p^k with exact bound checks.
#[derive(Clone, Debug)]
pub struct ExactCount {
    pub word: ReducedWord,
    pub p: u32,
    pub k: usize,
    pub count_u: BigUint,
    pub total: BigUint,
    pub is_law: bool,
    /// count_u·(p−1)^k ≤ ℓ·p^{4k−1}; None for laws.
    pub u_bound_ok: Option<bool>,
    /// The probability bound: count_u/total ≤ (ℓ/p)·(1 + 1/(p−1))^{3k},
    /// checked as count_u·(p−1)^{3k} ≤ ℓ·p^{3k−1}·total. None for laws.
    pub est_bound_ok: Option<bool>,
    pub lifted: Option<LiftedCount>,
}

/// Counts the solutions of w(g₁,…,g_k) = e over Γ_p^k exhaustively and
/// verifies the variety-counting chain. `with_lifted` additionally counts
/// over the full matrix space (F_p^{2×2})^k, evaluating inverse letters by
/// the adjugate so the word map stays polynomial.
pub fn exact_word_count(
    word: &ReducedWord,
    p: u32,
    limits: &Limits,
    with_lifted: bool,
) -> Result<ExactCount> {
    let k = word.arity();
    let ell = word.len() as u64;
    let order = order_formula(p)?;
    let tuple_count = order
        .checked_pow(k as u32)
        .filter(|&t| t <= limits.exhaustive_budget)
        .ok_or(Error::BudgetExceeded {
            budget: limits.exhaustive_budget,
            spent: 0,
        })?;
    let table = GroupTable::build_with_limit(p, limits.table_limit)?;

    let mut count_u = BigUint::ZERO;
    let mut gens = vec![table.identity(); k];
    let mut digits = vec![0usize; k];
    for step in 0..tuple_count {
        for (j, &d) in digits.iter().enumerate() {
            gens[j] = *table.element(d);
        }
        if words::evaluate(word, &gens)?.is_identity() {
            count_u += 1u32;
        }
        if step + 1 < tuple_count {
            for j in (0..k).rev() {
                digits[j] += 1;
                if digits[j] == table.order() {
                    digits[j] = 0;
                } else {
                    break;
                }
            }
        }
    }

    let total = BigUint::from(order).pow(k as u32);
    let is_law = count_u == total;
    let p_big = BigUint::from(p);
    let pm1 = BigUint::from(p - 1);
    let (u_bound_ok, est_bound_ok) = if is_law {
        (None, None)
    } else {
        // |𝒰|·(p−1)^k ≤ ℓ·p^{4k−1}
        let u_ok = &count_u * pm1.pow(k as u32) <= BigUint::from(ell) * p_big.pow(4 * k as u32 - 1);
        // count_u/total ≤ ℓ·p^{3k−1}/(p−1)^{3k}
        let est_ok = &count_u * pm1.pow(3 * k as u32)
            <= BigUint::from(ell) * p_big.pow(3 * k as u32 - 1) * &total;
        (Some(u_ok), Some(est_ok))
    };

    let lifted = if with_lifted {
        Some(lifted_counts(word, p, k, ell, &count_u, is_law, limits)?)
    } else {
        None
    };

    Ok(ExactCount {
        word: word.clone(),
        p,
        k,
        count_u,
        total,
        is_law,
        u_bound_ok,
        est_bound_ok,
        lifted,
    })
}

fn lifted_counts(
    word: &ReducedWord,
    p: u32,
    k: usize,
    ell: u64,
    count_u: &BigUint,
    is_law: bool,
    limits: &Limits,
) -> Result<LiftedCount> {
    let space = (p as u64)
        .checked_pow(4 * k as u32)
        .filter(|&t| t <= limits.lifted_budget)
        .ok_or(Error::BudgetExceeded { budget: limits.lifted_budget, spent: 0 })?;
    let mut w_count = BigUint::ZERO;
    let mut v_count = BigUint::ZERO;
    let mut digits = vec![0u32; 4 * k];
    let mut mats: Vec<Mat2> = Vec::with_capacity(k);
    for step in 0..space {
        mats.clear();
        for j in 0..k {
            mats.push(Mat2::new(
                p,
                [digits[4 * j], digits[4 * j + 1], digits[4 * j + 2], digits[4 * j + 3]],
            )?);
        }
        // W(a) = b_{i₁}⋯b_{i_ℓ} with adjugates for inverse letters.
        let mut acc: Option<Mat2> = None;
        for letter in word.letters() {
            let m = &mats[letter.gen_index() as usize];
            let factor = if letter.exp() == 1 { *m } else { m.adjugate() };
            acc = Some(match acc {
                None => factor,
                Some(a) => a.mul(&factor)?,
            });
        }
        let value = acc.expect("words are nonempty");
        let e = value.entries();
        if e[0] == e[3] && e[1] == 0 && e[2] == 0 {
            w_count += 1u32;
            if mats.iter().all(|m| m.det() != 0) {
                v_count += 1u32;
            }
        }
        if step + 1 < space {
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d == p {
                    *d = 0;
                } else {
                    break;
                }
            }
        }
    }
    let covering_exact = v_count == BigUint::from(p - 1).pow(k as u32) * count_u;
    let w_bound_ok = if is_law {
        None
    } else {
        Some(w_count <= BigUint::from(ell) * BigUint::from(p).pow(4 * k as u32 - 1))
    };
    Ok(LiftedCount { w_count, v_count, covering_exact, w_bound_ok })
}

/// True iff w(g₁,…,g_k) = e for every substitution from Γ_p.
pub fn law_check(word: &ReducedWord, p: u32, limits: &Limits) -> Result<bool> {
    let k = word.arity();
    let order = order_formula(p)?;
    let tuple_count = order
        .checked_pow(k as u32)
        .filter(|&t| t <= limits.exhaustive_budget)
        .ok_or(Error::BudgetExceeded { budget: limits.exhaustive_budget, spent: 0 })?;
    let table = GroupTable::build_with_limit(p, limits.table_limit)?;
    let mut gens = vec![table.identity(); k];
    let mut digits = vec![0usize; k];
    for step in 0..tuple_count {
        for (j, &d) in digits.iter().enumerate() {
            gens[j] = *table.element(d);
        }
        if !words::evaluate(word, &gens)?.is_identity() {
            return Ok(false);
        }
        if step + 1 < tuple_count {
            for j in (0..k).rev() {
                digits[j] += 1;
                if digits[j] == table.order() {
                    digits[j] = 0;
                } else {
                    break;
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn ar_single_generator_never_succeeds() {
        // k = 1: a nontrivial element is unitary on the complement (norm 1)
        // and the identity keeps the operator equal to the identity; either
        // way the gap at ε < 1 is refuted.
        let cfg = TrialConfig {
            p: 3,
            k: 1,
            epsilon: Some(Threshold::new(1, 2)),
            ell: None,
            trials: 20,
            seed: 5,
        };
        let out = ar_trials(&cfg, &limits()).unwrap();
        assert_eq!(out.successes, 0);
        assert!(out.fraction.is_zero());
    }

    #[test]
    fn ar_bound_positive_case() {
        // p = 3, k = 150: the closed form is ≈ 0.9983 and oversampling the
        // 24-element group forces a tiny norm, so every trial succeeds.
        let cfg = TrialConfig {
            p: 3,
            k: 150,
            epsilon: Some(Threshold::new(4, 5)),
            ell: None,
            trials: 40,
            seed: 6,
        };
        let out = ar_trials(&cfg, &limits()).unwrap();
        assert!(!out.bound_vacuous);
        // 1 − 96·exp(−150·0.64/(16·log 2)) ≈ 0.9833
        assert!(out.theoretical_bound > 0.98);
        let frac = out.successes as f64 / out.config.trials as f64;
        assert!(frac >= out.theoretical_bound, "frac {frac} < bound {}", out.theoretical_bound);
    }

    #[test]
    fn ar_vacuous_bound_is_flagged() {
        let cfg = TrialConfig {
            p: 3,
            k: 10,
            epsilon: Some(Threshold::new(4, 5)),
            ell: None,
            trials: 5,
            seed: 7,
        };
        let out = ar_trials(&cfg, &limits()).unwrap();
        assert!(out.bound_vacuous);
        assert!(!out.bound_applies);
    }

    #[test]
    fn ts_decomposition_on_gamma3() {
        let table = GroupTable::build(3).unwrap();
        let mut s = Stream::root(8);
        let gens: Vec<PglElement> =
            (0..5).map(|_| sample_uniform(3, &mut s).unwrap()).collect();
        let report = ts_decomposition_check(&table, &gens, &limits()).unwrap();
        assert!(report.reconstruction_residual <= 1e-12);
        assert!(report.x_spectrum_in_unit_interval(1e-12));
        assert!(report.triangle_holds(1e-12));
    }

    #[test]
    fn ts_full_group_t_vanishes() {
        let table = GroupTable::build(3).unwrap();
        let gens: Vec<PglElement> = table.elements().to_vec();
        let report = ts_decomposition_check(&table, &gens, &limits()).unwrap();
        assert!(report.norm_t <= 1e-12);
        assert!(report.norm_s <= 1e-12);
        assert!(report.norm_op <= 1e-12);
    }

    #[test]
    fn girth_length_one_matches_binomial_oracle() {
        // Success at ℓ = 1 means no identity sampled: probability
        // (1 − 1/|G|)^k exactly. 3σ binomial slack around it.
        let cfg = TrialConfig {
            p: 5,
            k: 3,
            epsilon: None,
            ell: Some(1),
            trials: 400,
            seed: 9,
        };
        let out = girth_trials(&cfg, &limits()).unwrap();
        let p_success = (119.0f64 / 120.0).powi(3);
        let sigma = (p_success * (1.0 - p_success) / 400.0).sqrt();
        let frac = out.successes as f64 / 400.0;
        assert!(
            (frac - p_success).abs() <= 3.0 * sigma,
            "frac {frac} vs oracle {p_success} (3σ = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn girth_bound_positive_at_large_prime() {
        // p = 389, k = 2, ℓ = 2: bound = 1 − 4³·6/389 ≈ 0.013 > 0 and all
        // preconditions hold (laws screened, 3k ≤ p−1).
        let cfg = TrialConfig {
            p: 389,
            k: 2,
            epsilon: None,
            ell: Some(2),
            trials: 60,
            seed: 10,
        };
        let out = girth_trials(&cfg, &limits()).unwrap();
        assert!(out.theoretical_bound > 0.0);
        assert!(out.bound_applies);
        let frac = out.successes as f64 / 60.0;
        assert!(frac >= out.theoretical_bound);
    }

    #[test]
    fn girth_planted_inverse_fails() {
        let mut s = Stream::root(11);
        let g = sample_uniform(7, &mut s).unwrap();
        let gens = vec![g, g.inv()];
        let report = words::check_no_relations(&gens, 2, SearchMethod::Dfs, u64::MAX);
        let w = report.witness.unwrap();
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn exact_count_single_letter() {
        // w = a at p = 3: only the identity solves a = e.
        let w = ReducedWord::parse("a").unwrap();
        let out = exact_word_count(&w, 3, &limits(), true).unwrap();
        assert_eq!(out.count_u, BigUint::from(1u32));
        assert_eq!(out.total, BigUint::from(24u32));
        assert!(!out.is_law);
        assert_eq!(out.u_bound_ok, Some(true));
        assert_eq!(out.est_bound_ok, Some(true));
        let lifted = out.lifted.unwrap();
        // Scalar multiples of the identity in F₃^{2×2}: 0, I, 2I.
        assert_eq!(lifted.w_count, BigUint::from(3u32));
        assert_eq!(lifted.v_count, BigUint::from(2u32));
        assert!(lifted.covering_exact);
        assert_eq!(lifted.w_bound_ok, Some(true));
    }

    #[test]
    fn exact_count_commutator_on_s3() {
        // Γ₂ ≅ S₃: commuting pairs number Σ_g |C(g)| = 6·(number of classes)
        // = 18 of the 36 pairs.
        let w = ReducedWord::parse("aba'b'").unwrap();
        let out = exact_word_count(&w, 2, &limits(), true).unwrap();
        assert_eq!(out.count_u, BigUint::from(18u32));
        assert_eq!(out.total, BigUint::from(36u32));
        assert!(!out.is_law);
        // Independent oracle: direct double loop over the table.
        let table = GroupTable::build(2).unwrap();
        let mut commuting = 0u32;
        for a in table.elements() {
            for b in table.elements() {
                if a.mul(b).unwrap() == b.mul(a).unwrap() {
                    commuting += 1;
                }
            }
        }
        assert_eq!(commuting, 18);
        let lifted = out.lifted.unwrap();
        assert!(lifted.covering_exact);
        assert_eq!(lifted.v_count, BigUint::from(18u32));
        assert_eq!(lifted.w_bound_ok, Some(true));
    }

    #[test]
    fn law_checks() {
        // Every element of S₃ has order dividing 6, so a¹² is a law at p=2.
        let w12 = ReducedWord::parse("aaaaaaaaaaaa").unwrap();
        assert!(law_check(&w12, 2, &limits()).unwrap());
        let out = exact_word_count(&w12, 2, &limits(), false).unwrap();
        assert!(out.is_law);
        assert_eq!(out.u_bound_ok, None);
        // The commutator is not a law of the nonabelian S₃.
        let comm = ReducedWord::parse("aba'b'").unwrap();
        assert!(!law_check(&comm, 2, &limits()).unwrap());
        // A single letter is never a law.
        let a = ReducedWord::parse("a").unwrap();
        assert!(!law_check(&a, 5, &limits()).unwrap());
    }

    #[test]
    fn est_bound_holds_for_short_nonlaws_p3() {
        // All reduced words of length ≤ 3 over 2 symbols at p = 3.
        let lim = limits();
        for len in 1..=3u32 {
            for w in words::enumerate_reduced_words(2, len) {
                let out = exact_word_count(&w, 3, &lim, false).unwrap();
                if !out.is_law {
                    assert_eq!(out.est_bound_ok, Some(true), "word {w}");
                    assert_eq!(out.u_bound_ok, Some(true), "word {w}");
                }
            }
        }
    }
}
