//! Reduced words over a generating tuple and relation detection.
//!
//! A word is reduced when no letter is immediately followed by the inverse
//! letter of the same generator; repeated generators with equal exponents are
//! allowed. Two occurrences of the same group element in the input tuple are
//! treated as distinct letters throughout.
//!
//! Relation search runs in two modes. The primary mode is an iterative
//! deepening DFS over the reduced-word prefix tree carrying the running
//! product, which visits the words of each length in lexicographic order and
//! therefore reports the minimal-length, lexicographically smallest witness.
//! Its depth-1 and depth-2 passes double as the direct scans for identity
//! generators, involutions and duplicate/inverse pairs. The second mode is a
//! meet-in-the-middle search over half words keyed by evaluation, with seam
//! screening so that a collision is only accepted when the joined word is
//! reduced at the junction; the DFS is the oracle for it.

use std::collections::BTreeMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::pgl::PglElement;

/// One letter g_i^{±1} of a word.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Letter {
    gen_index: u32,
    exp: i8,
}

impl Letter {
    pub fn new(gen_index: u32, exp: i8) -> Result<Self> {
        if exp != 1 && exp != -1 {
            return Err(Error::InvalidArgument(format!("exponent must be ±1, got {exp}")));
        }
        Ok(Letter { gen_index, exp })
    }

    #[inline]
    pub fn gen_index(&self) -> u32 {
        self.gen_index
    }

    #[inline]
    pub fn exp(&self) -> i8 {
        self.exp
    }

    #[inline]
    pub fn inverse(&self) -> Letter {
        Letter { gen_index: self.gen_index, exp: -self.exp }
    }

    /// True when `self` followed by `next` cancels.
    #[inline]
    pub fn cancels(&self, next: &Letter) -> bool {
        self.gen_index == next.gen_index && self.exp != next.exp
    }
}

// Letters order by generator index with the positive exponent first, so the
// word a⁺ < a⁻ < b⁺ < b⁻ ordering matches the DFS exploration order.
impl Ord for Letter {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.gen_index, self.exp == -1).cmp(&(other.gen_index, other.exp == -1))
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Letter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = if self.gen_index < 26 {
            char::from(b'a' + self.gen_index as u8).to_string()
        } else {
            format!("g{}", self.gen_index)
        };
        write!(f, "{name}{}", if self.exp == 1 { "" } else { "'" })
    }
}

/// Returns whether a nonempty letter sequence is reduced.
pub fn is_reduced(letters: &[Letter]) -> Result<bool> {
    if letters.is_empty() {
        return Err(Error::EmptyWord);
    }
    Ok(letters.windows(2).all(|w| !w[0].cancels(&w[1])))
}

/// A nonempty reduced word.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

impl ReducedWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if !is_reduced(&letters)? {
            let position = letters
                .windows(2)
                .position(|w| w[0].cancels(&w[1]))
                .expect("unreduced word has a cancelling pair");
            return Err(Error::NotReduced { position });
        }
        Ok(ReducedWord { letters })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Formal inverse: reversed letters with flipped exponents; reduced iff
    /// the original is.
    pub fn inverse(&self) -> ReducedWord {
        let letters = self.letters.iter().rev().map(Letter::inverse).collect();
        ReducedWord { letters }
    }

    /// Parses words in apostrophe syntax: `aba'b'` means a·b·a⁻¹·b⁻¹.
    /// Letters a..z name generators 0..25.
    pub fn parse(s: &str) -> Result<Self> {
        let mut letters: Vec<Letter> = Vec::new();
        for ch in s.chars() {
            match ch {
                'a'..='z' => letters.push(Letter { gen_index: ch as u32 - 'a' as u32, exp: 1 }),
                '\'' => {
                    let last = letters.last_mut().ok_or_else(|| {
                        Error::Format("apostrophe with no preceding letter".into())
                    })?;
                    if last.exp == -1 {
                        return Err(Error::Format("double apostrophe".into()));
                    }
                    last.exp = -1;
                }
                ' ' | '\t' => {}
                other => {
                    return Err(Error::Format(format!("unexpected character {other:?} in word")));
                }
            }
        }
        ReducedWord::new(letters)
    }

    /// Number of distinct generator indices appearing in the word.
    pub fn distinct_generators(&self) -> usize {
        let mut gens: Vec<u32> = self.letters.iter().map(|l| l.gen_index).collect();
        gens.sort_unstable();
        gens.dedup();
        gens.len()
    }

    /// Largest generator index + 1, i.e. the arity needed to evaluate.
    pub fn arity(&self) -> usize {
        self.letters.iter().map(|l| l.gen_index as usize + 1).max().unwrap_or(0)
    }
}

impl std::fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Group operations needed by the word machinery. Implementations must be
/// total on the values actually passed in; modulus agreement is validated at
/// the public entry points.
pub trait WordGroup: Clone + Eq + Ord + Hash {
    fn op(&self, rhs: &Self) -> Self;
    fn invert(&self) -> Self;
    fn is_neutral(&self) -> bool;
}

impl WordGroup for PglElement {
    fn op(&self, rhs: &Self) -> Self {
        self.mul(rhs).expect("moduli validated before word evaluation")
    }

    fn invert(&self) -> Self {
        self.inv()
    }

    fn is_neutral(&self) -> bool {
        self.is_identity()
    }
}

/// Validates that every generator a word could index exists and that all
/// PGL generators share one modulus.
pub fn validate_gens(gens: &[PglElement]) -> Result<()> {
    if let Some(first) = gens.first() {
        for g in gens {
            if g.modulus() != first.modulus() {
                return Err(Error::ModulusMismatch {
                    left: first.modulus(),
                    right: g.modulus(),
                });
            }
        }
    }
    Ok(())
}

/// Evaluates a reduced word over a generator tuple.
pub fn evaluate<T: WordGroup>(word: &ReducedWord, gens: &[T]) -> Result<T> {
    let mut acc: Option<T> = None;
    for l in word.letters() {
        let g = gens
            .get(l.gen_index as usize)
            .ok_or(Error::IndexOutOfRange { index: l.gen_index as usize, count: gens.len() })?;
        let factor = if l.exp == 1 { g.clone() } else { g.invert() };
        acc = Some(match acc {
            None => factor,
            Some(a) => a.op(&factor),
        });
    }
    acc.ok_or(Error::EmptyWord)
}

/// Exact number of reduced words of length exactly `len` over `k` generators:
/// 2k·(2k−1)^(len−1).
pub fn reduced_word_count(k: usize, len: u32) -> u128 {
    if len == 0 || k == 0 {
        return if len == 0 { 1 } else { 0 };
    }
    let two_k = 2 * k as u128;
    let mut n = two_k;
    for _ in 1..len {
        n *= two_k - 1;
    }
    n
}

/// Cumulative count of reduced words of length 1..=ell.
pub fn reduced_word_count_cumulative(k: usize, ell: u32) -> u128 {
    (1..=ell).map(|j| reduced_word_count(k, j)).sum()
}

/// Materializes every reduced word of length exactly `len` over `k`
/// generators, in lexicographic order. Only for small (k, len).
pub fn enumerate_reduced_words(k: usize, len: u32) -> Vec<ReducedWord> {
    let mut partial: Vec<Vec<Letter>> = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &partial {
            for gi in 0..k as u32 {
                for exp in [1i8, -1] {
                    let l = Letter { gen_index: gi, exp };
                    if let Some(prev) = w.last()
                        && prev.cancels(&l)
                    {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        partial = next;
    }
    partial
        .into_iter()
        .filter(|w| !w.is_empty())
        .map(|w| ReducedWord::new(w).expect("extension preserves reducedness"))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SearchMethod {
    Dfs,
    MeetInMiddle,
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMethod::Dfs => write!(f, "dfs"),
            SearchMethod::MeetInMiddle => write!(f, "meet_in_middle"),
        }
    }
}

/// Outcome of a relation search up to a length bound.
///
/// `witness`, when present, is a reduced word of length ≤ `max_length`
/// evaluating to the identity — of minimal length, and in DFS mode also
/// lexicographically smallest at that length. `conclusive` is false when the
/// word budget ran out; an inconclusive report never certifies anything.
#[derive(Clone, Debug)]
pub struct RelationReport {
    pub max_length: u32,
    pub words_checked: u64,
    pub witness: Option<ReducedWord>,
    pub method: SearchMethod,
    pub conclusive: bool,
}

impl RelationReport {
    /// True only for a conclusive, witness-free report.
    pub fn certifies_no_relations(&self) -> bool {
        self.conclusive && self.witness.is_none()
    }
}

impl PartialEq for RelationReport {
    fn eq(&self, other: &Self) -> bool {
        self.max_length == other.max_length
            && self.words_checked == other.words_checked
            && self.witness == other.witness
            && self.conclusive == other.conclusive
    }
}

#[derive(PartialEq, Eq)]
enum DfsStop {
    Witness,
    Budget,
}

struct DfsState<'a, T: WordGroup> {
    gens: &'a [T],
    inverses: Vec<T>,
    budget: u64,
    checked: u64,
    witness: Option<Vec<Letter>>,
}

impl<'a, T: WordGroup> DfsState<'a, T> {
    /// Explores all reduced extensions of `prefix` out to `depth` letters,
    /// testing exactly the words of length `depth`.
    fn run(&mut self, prefix: &mut Vec<Letter>, value: Option<&T>, depth: u32) -> Option<DfsStop> {
        if prefix.len() as u32 == depth {
            if self.checked == self.budget {
                return Some(DfsStop::Budget);
            }
            self.checked += 1;
            if value.expect("depth ≥ 1 has a value").is_neutral() {
                self.witness = Some(prefix.clone());
                return Some(DfsStop::Witness);
            }
            return None;
        }
        let last = prefix.last().copied();
        for gi in 0..self.gens.len() as u32 {
            for exp in [1i8, -1] {
                let letter = Letter { gen_index: gi, exp };
                if let Some(prev) = last
                    && prev.cancels(&letter)
                {
                    continue;
                }
                let factor = if exp == 1 {
                    self.gens[gi as usize].clone()
                } else {
                    self.inverses[gi as usize].clone()
                };
                let next = match value {
                    None => factor,
                    Some(v) => v.op(&factor),
                };
                prefix.push(letter);
                let stop = self.run(prefix, Some(&next), depth);
                prefix.pop();
                if stop.is_some() {
                    return stop;
                }
            }
        }
        None
    }
}

/// Searches for a relation of length ≤ `ell` among `gens` by iterative
/// deepening DFS. `budget` caps the number of words evaluated; the report is
/// marked inconclusive only if further unevaluated words remained when the
/// budget ran out.
pub fn check_no_relations_dfs<T: WordGroup>(
    gens: &[T],
    ell: u32,
    budget: u64,
) -> RelationReport {
    let mut state = DfsState {
        gens,
        inverses: gens.iter().map(WordGroup::invert).collect(),
        budget,
        checked: 0,
        witness: None,
    };
    let mut conclusive = true;
    for depth in 1..=ell {
        if gens.is_empty() {
            break;
        }
        let mut prefix = Vec::with_capacity(depth as usize);
        match state.run(&mut prefix, None, depth) {
            Some(DfsStop::Witness) => break,
            Some(DfsStop::Budget) => {
                conclusive = false;
                break;
            }
            None => {}
        }
    }
    RelationReport {
        max_length: ell,
        words_checked: state.checked,
        witness: state
            .witness
            .map(|ls| ReducedWord::new(ls).expect("DFS emits reduced words")),
        method: SearchMethod::Dfs,
        conclusive,
    }
}

/// Per-evaluation bucket of a meet-in-the-middle level: for each last letter
/// the lexicographically smallest word of this length reaching the element.
type MitmLevel<T> = BTreeMap<T, BTreeMap<Letter, Vec<Letter>>>;

fn join_witness(u: &[Letter], v: &[Letter]) -> ReducedWord {
    let mut letters = u.to_vec();
    letters.extend(v.iter().rev().map(Letter::inverse));
    ReducedWord::new(letters).expect("seam-screened join is reduced")
}

/// Meet-in-the-middle relation search: enumerates reduced half words of
/// length ≤ ⌈ell/2⌉ into evaluation-keyed tables, then looks for a pair
/// (u, v) with equal evaluation, lengths (⌈L/2⌉, ⌊L/2⌋) and distinct last
/// letters; u·v⁻¹ is then a reduced relation of length exactly L. Every
/// relation of length L arises this way from its canonical split, so the
/// verdict is exact.
pub fn check_no_relations_mitm<T: WordGroup>(
    gens: &[T],
    ell: u32,
    budget: u64,
) -> RelationReport {
    let half = ell.div_ceil(2);
    let inverses: Vec<T> = gens.iter().map(WordGroup::invert).collect();
    let mut checked = 0u64;
    let mut levels: Vec<MitmLevel<T>> = Vec::with_capacity(half as usize + 1);

    // Level h is built from level h−1: (evaluation, last letter) classes
    // propagate, and extending each class-minimal word by a fixed letter
    // preserves class minimality. Only one representative per class is
    // stored, which is what caps memory at the half-word level.
    let mut conclusive = true;
    'build: for h in 0..=half {
        if h == 0 {
            levels.push(MitmLevel::new());
            continue;
        }
        let mut level = MitmLevel::new();
        let insert = |level: &mut MitmLevel<T>, value: T, letter: Letter, w: Vec<Letter>| {
            level
                .entry(value)
                .or_default()
                .entry(letter)
                .and_modify(|cur| {
                    if w < *cur {
                        *cur = w.clone();
                    }
                })
                .or_insert(w);
        };
        if h == 1 {
            for gi in 0..gens.len() as u32 {
                for exp in [1i8, -1] {
                    if checked == budget {
                        conclusive = false;
                        break 'build;
                    }
                    checked += 1;
                    let letter = Letter { gen_index: gi, exp };
                    let value = if exp == 1 {
                        gens[gi as usize].clone()
                    } else {
                        inverses[gi as usize].clone()
                    };
                    insert(&mut level, value, letter, vec![letter]);
                }
            }
        } else {
            let prev = &levels[h as usize - 1];
            for (value, by_last) in prev {
                for (last, word) in by_last {
                    for gi in 0..gens.len() as u32 {
                        for exp in [1i8, -1] {
                            let letter = Letter { gen_index: gi, exp };
                            if last.cancels(&letter) {
                                continue;
                            }
                            if checked == budget {
                                conclusive = false;
                                break 'build;
                            }
                            checked += 1;
                            let next = if exp == 1 {
                                value.op(&gens[gi as usize])
                            } else {
                                value.op(&inverses[gi as usize])
                            };
                            let mut w = word.clone();
                            w.push(letter);
                            insert(&mut level, next, letter, w);
                        }
                    }
                }
            }
        }
        levels.push(level);
    }

    if !conclusive {
        return RelationReport {
            max_length: ell,
            words_checked: checked,
            witness: None,
            method: SearchMethod::MeetInMiddle,
            conclusive: false,
        };
    }

    for total_len in 1..=ell {
        let h1 = total_len.div_ceil(2) as usize;
        let h2 = (total_len / 2) as usize;
        let mut best: Option<ReducedWord> = None;
        if h2 == 0 {
            // A single letter evaluating to the identity.
            for (value, by_last) in &levels[h1] {
                if value.is_neutral() {
                    for word in by_last.values() {
                        let w = ReducedWord::new(word.clone()).expect("letters are reduced");
                        if best.as_ref().is_none_or(|b| w < *b) {
                            best = Some(w);
                        }
                    }
                }
            }
        } else {
            for (value, by_last1) in &levels[h1] {
                let Some(by_last2) = levels[h2].get(value) else { continue };
                for (last1, u) in by_last1 {
                    for (last2, v) in by_last2 {
                        if last1 == last2 {
                            continue;
                        }
                        let w = join_witness(u, v);
                        if best.as_ref().is_none_or(|b| w < *b) {
                            best = Some(w);
                        }
                    }
                }
            }
        }
        if let Some(w) = best {
            debug_assert_eq!(w.len() as u32, total_len);
            return RelationReport {
                max_length: ell,
                words_checked: checked,
                witness: Some(w),
                method: SearchMethod::MeetInMiddle,
                conclusive: true,
            };
        }
    }

    RelationReport {
        max_length: ell,
        words_checked: checked,
        witness: None,
        method: SearchMethod::MeetInMiddle,
        conclusive: true,
    }
}

/// Relation search dispatcher; validates moduli for PGL generators at the
/// typed wrappers below.
pub fn check_no_relations<T: WordGroup>(
    gens: &[T],
    ell: u32,
    method: SearchMethod,
    budget: u64,
) -> RelationReport {
    match method {
        SearchMethod::Dfs => check_no_relations_dfs(gens, ell, budget),
        SearchMethod::MeetInMiddle => check_no_relations_mitm(gens, ell, budget),
    }
}

/// Typed wrapper for Γ_p generators.
pub fn check_no_relations_pgl(
    gens: &[PglElement],
    ell: u32,
    method: SearchMethod,
    budget: u64,
) -> Result<RelationReport> {
    validate_gens(gens)?;
    Ok(check_no_relations(gens, ell, method, budget))
}

/// How an injectivity check failed.
#[derive(Clone, Debug)]
pub enum InjectivityFailure {
    /// Some word of length ≤ L evaluates to the identity.
    IdentityImage(ReducedWord),
    /// Two distinct words evaluate to the same element.
    Collision(ReducedWord, ReducedWord),
}

#[derive(Clone, Debug)]
pub struct InjectivityReport {
    pub max_length: u32,
    pub words_checked: u64,
    pub failure: Option<InjectivityFailure>,
    pub conclusive: bool,
}

impl InjectivityReport {
    pub fn injective(&self) -> bool {
        self.conclusive && self.failure.is_none()
    }
}

/// Checks that all reduced words of length 1..=L evaluate to pairwise
/// distinct non-identity elements. Equivalent to the absence of relations of
/// length ≤ 2L: a collision w₁ ≠ w₂ yields the relation w₁·w₂⁻¹, of length
/// ≤ 2L after cancellation at the junction, and conversely a relation of
/// length m ≤ 2L splits into halves of length ≤ L with equal evaluation.
pub fn check_word_image_injectivity<T: WordGroup>(
    gens: &[T],
    max_len: u32,
    budget: u64,
) -> InjectivityReport {
    let inverses: Vec<T> = gens.iter().map(WordGroup::invert).collect();
    let mut seen: BTreeMap<T, ReducedWord> = BTreeMap::new();
    let mut frontier: Vec<(Vec<Letter>, T)> = Vec::new();
    let mut checked = 0u64;

    for len in 1..=max_len {
        let mut next_frontier = Vec::new();
        let extend_from: Vec<(Vec<Letter>, Option<T>)> = if len == 1 {
            vec![(Vec::new(), None)]
        } else {
            frontier
                .iter()
                .map(|(w, v)| (w.clone(), Some(v.clone())))
                .collect()
        };
        for (word, value) in extend_from {
            let last = word.last().copied();
            for gi in 0..gens.len() as u32 {
                for exp in [1i8, -1] {
                    let letter = Letter { gen_index: gi, exp };
                    if let Some(prev) = last
                        && prev.cancels(&letter)
                    {
                        continue;
                    }
                    checked += 1;
                    if checked > budget {
                        return InjectivityReport {
                            max_length: max_len,
                            words_checked: checked,
                            failure: None,
                            conclusive: false,
                        };
                    }
                    let factor = if exp == 1 {
                        gens[gi as usize].clone()
                    } else {
                        inverses[gi as usize].clone()
                    };
                    let next = match &value {
                        None => factor,
                        Some(v) => v.op(&factor),
                    };
                    let mut w = word.clone();
                    w.push(letter);
                    let rw = ReducedWord::new(w.clone()).expect("extension is reduced");
                    if next.is_neutral() {
                        return InjectivityReport {
                            max_length: max_len,
                            words_checked: checked,
                            failure: Some(InjectivityFailure::IdentityImage(rw)),
                            conclusive: true,
                        };
                    }
                    if let Some(first) = seen.get(&next) {
                        return InjectivityReport {
                            max_length: max_len,
                            words_checked: checked,
                            failure: Some(InjectivityFailure::Collision(first.clone(), rw)),
                            conclusive: true,
                        };
                    }
                    seen.insert(next.clone(), rw);
                    next_frontier.push((w, next));
                }
            }
        }
        frontier = next_frontier;
    }

    InjectivityReport {
        max_length: max_len,
        words_checked: checked,
        failure: None,
        conclusive: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgl::{PglElement, sample_uniform};
    use crate::rng::Stream;

    fn el(p: u32, e: [u32; 4]) -> PglElement {
        PglElement::new(p, e).unwrap()
    }

    fn letters(spec: &[(u32, i8)]) -> Vec<Letter> {
        spec.iter().map(|&(g, e)| Letter::new(g, e).unwrap()).collect()
    }

    #[test]
    fn reduced_checks() {
        assert!(is_reduced(&letters(&[(0, 1)])).unwrap());
        assert!(!is_reduced(&letters(&[(0, 1), (0, -1)])).unwrap());
        assert!(is_reduced(&letters(&[(0, 1), (1, -1), (0, 1)])).unwrap());
        assert!(is_reduced(&letters(&[(0, 1), (0, 1)])).unwrap());
        assert!(matches!(is_reduced(&[]), Err(Error::EmptyWord)));
    }

    #[test]
    fn word_constructor_rejects_cancellation() {
        assert!(matches!(
            ReducedWord::new(letters(&[(1, 1), (0, 1), (0, -1)])),
            Err(Error::NotReduced { position: 1 })
        ));
        assert!(matches!(ReducedWord::new(vec![]), Err(Error::EmptyWord)));
    }

    #[test]
    fn letter_order_positive_first() {
        let a_pos = Letter::new(0, 1).unwrap();
        let a_neg = Letter::new(0, -1).unwrap();
        let b_pos = Letter::new(1, 1).unwrap();
        assert!(a_pos < a_neg && a_neg < b_pos);
    }

    #[test]
    fn parse_apostrophe_syntax() {
        let w = ReducedWord::parse("aba'b'").unwrap();
        assert_eq!(w.letters(), &letters(&[(0, 1), (1, 1), (0, -1), (1, -1)])[..]);
        assert_eq!(w.to_string(), "aba'b'");
        assert!(ReducedWord::parse("aa'").is_err());
        assert!(ReducedWord::parse("'a").is_err());
    }

    #[test]
    fn evaluate_unipotent_power() {
        // [[1,1],[0,1]] has order 5 in Γ₅; verified here by repeated mul.
        let u = el(5, [1, 1, 0, 1]);
        let mut acc = u;
        for _ in 0..4 {
            acc = acc.mul(&u).unwrap();
        }
        assert!(acc.is_identity());
        let w = ReducedWord::new(letters(&[(0, 1); 5])).unwrap();
        assert!(evaluate(&w, &[u]).unwrap().is_identity());
    }

    #[test]
    fn evaluate_index_out_of_range() {
        let w = ReducedWord::new(letters(&[(1, 1)])).unwrap();
        let gens = vec![el(5, [1, 1, 0, 1])];
        assert!(matches!(
            evaluate(&w, &gens),
            Err(Error::IndexOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn word_counts_match_enumerator() {
        // 2k(2k−1)^(j−1) for k ≤ 3, j ≤ 5 by direct counting over the same
        // prefix tree the search walks.
        for k in 1..=3usize {
            for j in 1..=5u32 {
                let expected = reduced_word_count(k, j);
                // direct recursive count over the prefix tree
                fn count(k: usize, depth: u32, last: Option<Letter>) -> u128 {
                    if depth == 0 {
                        return 1;
                    }
                    let mut total = 0u128;
                    for gi in 0..k as u32 {
                        for exp in [1i8, -1] {
                            let l = Letter::new(gi, exp).unwrap();
                            if let Some(prev) = last
                                && prev.cancels(&l)
                            {
                                continue;
                            }
                            total += count(k, depth - 1, Some(l));
                        }
                    }
                    total
                }
                assert_eq!(count(k, j, None), expected, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn dfs_counts_all_words_when_clean() {
        // Two free-enough generators of Γ₇ at ℓ = 3: the DFS must visit
        // exactly Σ_j 2k(2k−1)^(j−1) words.
        let gens = vec![el(7, [1, 1, 0, 1]), el(7, [1, 0, 1, 1])];
        let report = check_no_relations_dfs(&gens, 3, u64::MAX);
        assert!(report.certifies_no_relations());
        assert_eq!(report.words_checked as u128, reduced_word_count_cumulative(2, 3));
    }

    #[test]
    fn identity_generator_gives_length_one_witness() {
        let gens = vec![el(5, [1, 1, 0, 1]), PglElement::identity(5).unwrap()];
        let report = check_no_relations_dfs(&gens, 4, u64::MAX);
        let w = report.witness.unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.letters()[0], Letter::new(1, 1).unwrap());
    }

    #[test]
    fn involution_gives_length_two_witness() {
        // [[0,1],[1,0]] squares to the identity in Γ₂; the reduced witness is
        // t⁺t⁺ since ε₁ = ε₂ is allowed for equal letters.
        let t = el(2, [0, 1, 1, 0]);
        assert!(t.mul(&t).unwrap().is_identity());
        let gens = vec![el(2, [0, 1, 1, 1]), t];
        let report = check_no_relations_dfs(&gens, 2, u64::MAX);
        let w = report.witness.unwrap();
        assert_eq!(w.letters(), &letters(&[(1, 1), (1, 1)])[..]);
    }

    #[test]
    fn gamma5_pair_clean_at_4_witness_at_5() {
        let gens = vec![el(5, [1, 1, 0, 1]), el(5, [1, 0, 1, 1])];
        let at4 = check_no_relations_dfs(&gens, 4, u64::MAX);
        assert!(at4.certifies_no_relations());
        let at5 = check_no_relations_dfs(&gens, 5, u64::MAX);
        let w = at5.witness.unwrap();
        assert_eq!(w.to_string(), "aaaaa");
        // Independent oracle: exhaustive enumeration of all reduced words of
        // length ≤ 5 with fresh evaluation per word.
        let oracle = oracle_search(&gens, 5);
        assert_eq!(oracle.as_ref().map(|w| w.to_string()), Some("aaaaa".into()));
        assert!(oracle_search(&gens, 4).is_none());
    }

    /// Test-only oracle: materializes every reduced word of length ≤ ell in
    /// (length, lex) order and evaluates each from scratch.
    fn oracle_search(gens: &[PglElement], ell: u32) -> Option<ReducedWord> {
        fn all_words(k: usize, len: u32) -> Vec<Vec<Letter>> {
            let mut out: Vec<Vec<Letter>> = vec![vec![]];
            for _ in 0..len {
                let mut next = Vec::new();
                for w in &out {
                    for gi in 0..k as u32 {
                        for exp in [1i8, -1] {
                            let l = Letter::new(gi, exp).unwrap();
                            if let Some(prev) = w.last()
                                && prev.cancels(&l)
                            {
                                continue;
                            }
                            let mut v = w.clone();
                            v.push(l);
                            next.push(v);
                        }
                    }
                }
                out = next;
            }
            out
        }
        for len in 1..=ell {
            let mut words = all_words(gens.len(), len);
            words.sort();
            for w in words {
                let rw = ReducedWord::new(w).unwrap();
                if evaluate(&rw, gens).unwrap().is_identity() {
                    return Some(rw);
                }
            }
        }
        None
    }

    #[test]
    fn budget_exhaustion_is_inconclusive() {
        let gens = vec![el(7, [1, 1, 0, 1]), el(7, [1, 0, 1, 1])];
        let report = check_no_relations_dfs(&gens, 6, 10);
        assert!(!report.conclusive);
        assert!(!report.certifies_no_relations());
        let report = check_no_relations_mitm(&gens, 6, 10);
        assert!(!report.conclusive);
    }

    #[test]
    fn mitm_agrees_with_dfs_on_random_instances() {
        // 100 random instances over Γ₃ and Γ₅ with ℓ ≤ 6: identical
        // witness-existence verdicts, and identical minimal witness length.
        let mut s = Stream::root(0xabcdef);
        for trial in 0..100u64 {
            let p = if trial % 2 == 0 { 3 } else { 5 };
            let k = 1 + (s.next_below(3) as usize);
            let ell = 1 + (s.next_below(6) as u32);
            let gens: Vec<PglElement> =
                (0..k).map(|_| sample_uniform(p, &mut s).unwrap()).collect();
            let dfs = check_no_relations_dfs(&gens, ell, u64::MAX);
            let mitm = check_no_relations_mitm(&gens, ell, u64::MAX);
            assert!(dfs.conclusive && mitm.conclusive);
            assert_eq!(
                dfs.witness.is_some(),
                mitm.witness.is_some(),
                "p={p} k={k} ell={ell} gens={gens:?}"
            );
            if let (Some(a), Some(b)) = (&dfs.witness, &mitm.witness) {
                assert_eq!(a.len(), b.len(), "witness lengths differ");
                assert!(evaluate(b, &gens).unwrap().is_identity());
            }
        }
    }

    #[test]
    fn certification_is_monotone_in_length() {
        let mut s = Stream::root(77);
        for _ in 0..20 {
            let gens: Vec<PglElement> =
                (0..2).map(|_| sample_uniform(5, &mut s).unwrap()).collect();
            let mut clean_up_to = 0;
            for ell in 1..=5 {
                let r = check_no_relations_dfs(&gens, ell, u64::MAX);
                if r.certifies_no_relations() {
                    assert_eq!(clean_up_to, ell - 1, "clean range must be a prefix");
                    clean_up_to = ell;
                }
            }
        }
    }

    #[test]
    fn injectivity_single_generator() {
        // Unipotent in Γ₁₁ has order 11 > 2·5, so all words a^±1..a^±5 have
        // distinct non-identity images. (Order L+1 is not enough: negative
        // powers collide with positive ones as soon as the order is ≤ 2L.)
        let gens = vec![el(11, [1, 1, 0, 1])];
        let report = check_word_image_injectivity(&gens, 5, u64::MAX);
        assert!(report.injective());
        // An order-3 element collides at L = 3 (a³ = e).
        let g3 = el(2, [0, 1, 1, 1]);
        assert!(g3.mul(&g3).unwrap().mul(&g3).unwrap().is_identity());
        let report = check_word_image_injectivity(&[g3], 3, u64::MAX);
        assert!(!report.injective());
        // First failure in enumeration order is the collision a⁺a⁺ = a⁻,
        // the length-2 face of the relation a³ = e.
        assert!(matches!(report.failure, Some(InjectivityFailure::Collision(_, _))));
    }

    #[test]
    fn injectivity_gamma5_pair_at_2() {
        let gens = vec![el(5, [1, 1, 0, 1]), el(5, [1, 0, 1, 1])];
        let report = check_word_image_injectivity(&gens, 2, u64::MAX);
        assert!(report.injective());
        // 4 words of length 1 plus 12 of length 2.
        assert_eq!(report.words_checked, 16);
    }

    #[test]
    fn injectivity_matches_relation_bound() {
        // Injectivity at L is equivalent to no relations at 2L.
        let mut s = Stream::root(31);
        for _ in 0..40 {
            let k = 1 + s.next_below(2) as usize;
            let gens: Vec<PglElement> =
                (0..k).map(|_| sample_uniform(5, &mut s).unwrap()).collect();
            for max_len in 1..=2u32 {
                let inj = check_word_image_injectivity(&gens, max_len, u64::MAX);
                let rel = check_no_relations_dfs(&gens, 2 * max_len, u64::MAX);
                assert_eq!(inj.injective(), rel.certifies_no_relations(), "gens={gens:?}");
            }
        }
    }

    #[test]
    fn inverse_word_is_reduced_and_inverts_evaluation() {
        let mut s = Stream::root(5);
        let gens: Vec<PglElement> = (0..3).map(|_| sample_uniform(7, &mut s).unwrap()).collect();
        let w = ReducedWord::parse("abc'ba").unwrap();
        let wi = w.inverse();
        assert!(is_reduced(wi.letters()).unwrap());
        let x = evaluate(&w, &gens).unwrap();
        let y = evaluate(&wi, &gens).unwrap();
        assert!(x.mul(&y).unwrap().is_identity());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Free reduction of an arbitrary letter soup; nonempty results are
        /// reduced by construction.
        fn reduce(raw: Vec<(u32, bool)>) -> Vec<Letter> {
            let mut out: Vec<Letter> = Vec::new();
            for (gi, neg) in raw {
                let l = Letter::new(gi, if neg { -1 } else { 1 }).unwrap();
                if out.last().is_some_and(|prev| prev.cancels(&l)) {
                    out.pop();
                } else {
                    out.push(l);
                }
            }
            out
        }

        proptest! {
            #[test]
            fn free_reduction_yields_reduced_words(
                raw in prop::collection::vec((0u32..3, any::<bool>()), 1..16)
            ) {
                let letters = reduce(raw);
                prop_assume!(!letters.is_empty());
                prop_assert!(is_reduced(&letters).unwrap());
                let w = ReducedWord::new(letters).unwrap();
                // The formal inverse is reduced and of equal length.
                let wi = w.inverse();
                prop_assert!(is_reduced(wi.letters()).unwrap());
                prop_assert_eq!(wi.inverse(), w.clone());
                // Evaluation respects inversion over Γ₅.
                let mut s = Stream::root(99);
                let gens: Vec<PglElement> =
                    (0..3).map(|_| sample_uniform(5, &mut s).unwrap()).collect();
                let x = evaluate(&w, &gens).unwrap();
                let y = evaluate(&wi, &gens).unwrap();
                prop_assert!(x.mul(&y).unwrap().is_identity());
            }

            #[test]
            fn relation_verdicts_agree_between_modes(
                seed in any::<u64>(),
                k in 1usize..4,
                ell in 1u32..6,
            ) {
                let mut s = Stream::root(seed);
                let gens: Vec<PglElement> =
                    (0..k).map(|_| sample_uniform(3, &mut s).unwrap()).collect();
                let dfs = check_no_relations_dfs(&gens, ell, u64::MAX);
                let mitm = check_no_relations_mitm(&gens, ell, u64::MAX);
                prop_assert_eq!(dfs.witness.is_some(), mitm.witness.is_some());
                if let (Some(a), Some(b)) = (&dfs.witness, &mitm.witness) {
                    prop_assert_eq!(a.len(), b.len());
                }
            }
        }
    }
}
