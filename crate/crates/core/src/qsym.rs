//! Exact symbolic engine for the quantum Weyl algebra `A_q(3)`.
//!
//! Generators are `X₁, X₂, X₃, ∂₁, ∂₂, ∂₃` with `q` kept formal. The
//! defining relations
//!
//! ```text
//! X_i X_j = q X_j X_i                                  (i < j)
//! ∂_i ∂_j = q⁻¹ ∂_j ∂_i                                (i < j)
//! ∂_i X_j = q X_j ∂_i                                  (i ≠ j)
//! ∂_i X_i − q² X_i ∂_i = 1 + (q² − 1) Σ_{j>i} X_j ∂_j
//! ```
//!
//! are oriented into a rewrite system whose normal words have the shape
//! `X₁^a X₂^b X₃^c ∂₁^d ∂₂^e ∂₃^f`. A single step rewrites one adjacent
//! out-of-order pair:
//!
//! | pair            | replacement                                   |
//! |-----------------|-----------------------------------------------|
//! | `X_j X_i`, i<j  | `q⁻¹ X_i X_j`                                 |
//! | `∂_j ∂_i`, i<j  | `q ∂_i ∂_j`                                   |
//! | `∂_i X_j`, i≠j  | `q X_j ∂_i`                                   |
//! | `∂_i X_i`       | `1 + q² X_i ∂_i + (q²−1) Σ_{j>i} X_j ∂_j`     |
//!
//! # Termination
//!
//! Give every word the measure `(m, s)` ordered lexicographically, where `m`
//! counts pairs of positions with a `∂` somewhere left of an `X`, and `s`
//! counts same-kind pairs (both `X` or both `∂`) whose indices are
//! descending. A `∂X` rewrite turns the rewritten pair into an `X∂` pair
//! without moving any other letter's kind, so `m` drops by exactly one for
//! every output word of the same length, and by at least one for the
//! shorter word from the constant `1`. An `XX` or `∂∂` swap keeps `m` and
//! lowers `s` by one. Every output word is therefore strictly smaller than
//! the input, and since the number of output words per step is bounded,
//! normalization terminates (multiset ordering). [`ordering_measure`]
//! exposes the measure so tests can check the decrease directly.
//!
//! Confluence is not assumed; it is tested by normalizing random words
//! under different rewrite orders.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::scalar::QScalar;

/// A word in the six generators.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NCWord(Vec<Generator>);

impl NCWord {
    pub fn new(letters: Vec<Generator>) -> Self {
        Self(letters)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn letters(&self) -> &[Generator] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_normal(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    /// Positions `p` with `word[p] > word[p+1]`.
    pub fn out_of_order_positions(&self) -> Vec<usize> {
        self.0
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > w[1])
            .map(|(p, _)| p)
            .collect()
    }

    pub fn concat(&self, other: &NCWord) -> NCWord {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        NCWord(v)
    }

    fn splice(&self, pos: usize, middle: &[Generator]) -> NCWord {
        let mut v = Vec::with_capacity(self.0.len());
        v.extend_from_slice(&self.0[..pos]);
        v.extend_from_slice(middle);
        v.extend_from_slice(&self.0[pos + 2..]);
        NCWord(v)
    }
}

/// The `(mixed inversions, same-kind inversions)` measure from the module docs.
pub fn ordering_measure(word: &NCWord) -> (usize, usize) {
    let w = word.letters();
    let mut mixed = 0;
    let mut same = 0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if w[i].is_deriv() && w[j].is_coord() {
                mixed += 1;
            } else if w[i].is_coord() == w[j].is_coord() && w[i] > w[j] {
                same += 1;
            }
        }
    }
    (mixed, same)
}

impl fmt::Display for NCWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let g = self.0[i];
            let mut run = 1;
            while i + run < self.0.len() && self.0[i + run] == g {
                run += 1;
            }
            if run == 1 {
                parts.push(g.to_string());
            } else {
                parts.push(format!("{g}^{run}"));
            }
            i += run;
        }
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for NCWord {
    type Err = Error;

    /// Parses the display form, e.g. `"X1^2 X3 d2"`; `"1"` is the empty word.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" || s.is_empty() {
            return Ok(NCWord::empty());
        }
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let (g, n) = match tok.split_once('^') {
                Some((g, n)) => (
                    g,
                    n.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad exponent in `{tok}`")))?,
                ),
                None => (tok, 1),
            };
            let g: Generator = g.parse()?;
            letters.extend(std::iter::repeat_n(g, n));
        }
        Ok(NCWord(letters))
    }
}

/// A finite linear combination of arbitrary (not necessarily normal) words.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordSum {
    terms: BTreeMap<NCWord, QScalar>,
}

impl WordSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_word(word: NCWord, coeff: QScalar) -> Self {
        let mut s = Self::zero();
        s.add_term(word, coeff);
        s
    }

    pub fn from_letters(letters: &[Generator], coeff: QScalar) -> Self {
        Self::from_word(NCWord::new(letters.to_vec()), coeff)
    }

    pub fn add_term(&mut self, word: NCWord, coeff: QScalar) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&word) {
            Some(c) => {
                *c += &coeff;
                if c.is_zero() {
                    self.terms.remove(&word);
                }
            }
            None => {
                self.terms.insert(word, coeff);
            }
        }
    }

    pub fn add(&mut self, other: &WordSum) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), c.clone());
        }
    }

    pub fn scaled(&self, c: &QScalar) -> WordSum {
        let mut out = WordSum::zero();
        for (w, v) in &self.terms {
            out.add_term(w.clone(), v * c);
        }
        out
    }

    /// Concatenation product, distributed over terms (no normalization).
    pub fn concat_product(&self, other: &WordSum) -> WordSum {
        let mut out = WordSum::zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                out.add_term(wa.concat(wb), ca * cb);
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NCWord, &QScalar)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl From<&NCPoly> for WordSum {
    fn from(p: &NCPoly) -> Self {
        WordSum {
            terms: p.terms.clone(),
        }
    }
}

/// Applies one defining relation to the adjacent pair at `pos`.
pub fn rewrite_at(word: &NCWord, coeff: &QScalar, pos: usize) -> Result<WordSum> {
    let w = word.letters();
    if pos + 1 >= w.len() || w[pos] <= w[pos + 1] {
        return Err(Error::BadRewritePosition {
            word: word.to_string(),
            pos,
        });
    }
    let (a, b) = (w[pos], w[pos + 1]);
    let mut out = WordSum::zero();
    if a.is_coord() && b.is_coord() {
        // X_j X_i = q^{-1} X_i X_j
        out.add_term(word.splice(pos, &[b, a]), coeff.shift(-1));
    } else if a.is_deriv() && b.is_deriv() {
        // ∂_j ∂_i = q ∂_i ∂_j
        out.add_term(word.splice(pos, &[b, a]), coeff.shift(1));
    } else if a.axis() != b.axis() {
        // ∂_i X_j = q X_j ∂_i
        out.add_term(word.splice(pos, &[b, a]), coeff.shift(1));
    } else {
        // ∂_i X_i = 1 + q² X_i ∂_i + (q² − 1) Σ_{j>i} X_j ∂_j
        let i = a.axis();
        out.add_term(word.splice(pos, &[]), coeff.clone());
        out.add_term(word.splice(pos, &[b, a]), coeff.shift(2));
        let q2m1 = &coeff.shift(2) - coeff;
        for j in i + 1..3 {
            out.add_term(
                word.splice(pos, &[Generator::coord(j), Generator::deriv(j)]),
                q2m1.clone(),
            );
        }
    }
    Ok(out)
}

/// Rewrites the leftmost out-of-order pair of `coeff · word`.
pub fn rewrite_step(word: &NCWord, coeff: &QScalar) -> Result<WordSum> {
    match word.out_of_order_positions().first() {
        Some(&pos) => rewrite_at(word, coeff, pos),
        None => Err(Error::NoRewrite(word.to_string())),
    }
}

/// Normalizes with the leftmost-pair strategy.
pub fn normalize(sum: &WordSum) -> NCPoly {
    normalize_with(sum, |_, positions| positions[0])
}

/// Normalizes to a fixpoint; `choose` picks which out-of-order position to
/// rewrite (it receives the non-empty list of candidates and must return
/// one of them).
pub fn normalize_with<F>(sum: &WordSum, mut choose: F) -> NCPoly
where
    F: FnMut(&NCWord, &[usize]) -> usize,
{
    let mut pending = sum.clone();
    let mut done = WordSum::zero();
    while let Some((word, coeff)) = pending.terms.pop_last() {
        let positions = word.out_of_order_positions();
        if positions.is_empty() {
            done.add_term(word, coeff);
            continue;
        }
        let pos = choose(&word, &positions);
        let rewritten = rewrite_at(&word, &coeff, pos)
            .expect("chooser returned a position that is not out of order");
        pending.add(&rewritten);
    }
    NCPoly { terms: done.terms }
}

/// Noncommutative polynomial in canonical normal form.
///
/// Invariants: every key is a normal word and no coefficient is zero, so
/// structural equality is algebraic equality.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NCPoly {
    terms: BTreeMap<NCWord, QScalar>,
}

impl NCPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(QScalar::one())
    }

    pub fn constant(c: QScalar) -> Self {
        normalize(&WordSum::from_word(NCWord::empty(), c))
    }

    pub fn generator(g: Generator) -> Self {
        normalize(&WordSum::from_letters(&[g], QScalar::one()))
    }

    /// Normal form of the product of `letters` in order.
    pub fn word(letters: &[Generator]) -> Self {
        normalize(&WordSum::from_letters(letters, QScalar::one()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NCWord, &QScalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, word: &NCWord) -> QScalar {
        self.terms.get(word).cloned().unwrap_or_default()
    }

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        let mut s = WordSum::from(self);
        s.add(&WordSum::from(other));
        NCPoly { terms: s.terms }
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        self.add(&other.scale(&QScalar::from_int(-1)))
    }

    pub fn scale(&self, c: &QScalar) -> NCPoly {
        NCPoly {
            terms: WordSum::from(self).scaled(c).terms,
        }
    }

    /// Value of the polynomial at `q = 1`, still in normal form.
    pub fn at_q_one(&self) -> NCPoly {
        let mut s = WordSum::zero();
        for (w, c) in &self.terms {
            s.add_term(w.clone(), QScalar::constant(c.at_q_one()));
        }
        NCPoly { terms: s.terms }
    }

    /// Coefficients evaluated at `q = e^{iθ}` (lossy).
    pub fn eval_theta(&self, theta: f64) -> Vec<(NCWord, Complex64)> {
        self.terms
            .iter()
            .map(|(w, c)| (w.clone(), c.eval_theta(theta)))
            .collect()
    }
}

/// Product in `A_q(3)`: distributed concatenation followed by normalization.
pub fn nc_mul(a: &NCPoly, b: &NCPoly) -> NCPoly {
    normalize(&WordSum::from(a).concat_product(&WordSum::from(b)))
}

impl fmt::Display for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                if w.is_empty() {
                    format!("({c})")
                } else {
                    format!("({c}) {w}")
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    word: String,
    coeff: Vec<[i64; 5]>,
}

impl Serialize for NCPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self
            .terms
            .iter()
            .map(|(w, c)| {
                Ok(TermJson {
                    word: w.to_string(),
                    coeff: c.to_rows()?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(S::Error::custom)?;
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NCPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<TermJson>::deserialize(deserializer)?;
        let mut sum = WordSum::zero();
        for row in rows {
            let word: NCWord = row.word.parse().map_err(D::Error::custom)?;
            let coeff = QScalar::from_rows(&row.coeff).map_err(D::Error::custom)?;
            sum.add_term(word, coeff);
        }
        Ok(normalize(&sum))
    }
}

/// Outcome of comparing two sides of a relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationReport {
    pub holds: bool,
    /// `normalize(lhs − rhs)`, reported in full.
    pub residual: NCPoly,
}

pub fn check_relation(lhs: &NCPoly, rhs: &NCPoly) -> RelationReport {
    let residual = lhs.sub(rhs);
    RelationReport {
        holds: residual.is_zero(),
        residual,
    }
}

/// A relation `lhs = rhs` with both sides given as raw word sums.
#[derive(Clone, Debug)]
pub struct Relation {
    pub name: String,
    pub lhs: WordSum,
    pub rhs: WordSum,
}

impl Relation {
    pub fn check(&self) -> RelationReport {
        check_relation(&normalize(&self.lhs), &normalize(&self.rhs))
    }
}

/// The fifteen defining relations: 3 `XX`, 3 `∂∂`, 6 mixed `∂X` with
/// `i ≠ j`, 3 diagonal `∂_i X_i`.
pub fn defining_relations() -> Vec<Relation> {
    use Generator as G;
    let one = QScalar::one;
    let mut rels = Vec::with_capacity(15);
    for i in 0..3 {
        for j in i + 1..3 {
            let (xi, xj) = (G::coord(i), G::coord(j));
            rels.push(Relation {
                name: format!("{xi} {xj} = q {xj} {xi}"),
                lhs: WordSum::from_letters(&[xi, xj], one()),
                rhs: WordSum::from_letters(&[xj, xi], QScalar::q_pow(1)),
            });
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let (di, dj) = (G::deriv(i), G::deriv(j));
            rels.push(Relation {
                name: format!("{di} {dj} = q^-1 {dj} {di}"),
                lhs: WordSum::from_letters(&[di, dj], one()),
                rhs: WordSum::from_letters(&[dj, di], QScalar::q_pow(-1)),
            });
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let (di, xj) = (G::deriv(i), G::coord(j));
            rels.push(Relation {
                name: format!("{di} {xj} = q {xj} {di}"),
                lhs: WordSum::from_letters(&[di, xj], one()),
                rhs: WordSum::from_letters(&[xj, di], QScalar::q_pow(1)),
            });
        }
    }
    let q2m1 = QScalar::q_pow(2) - QScalar::one();
    for i in 0..3 {
        let (di, xi) = (G::deriv(i), G::coord(i));
        let mut lhs = WordSum::from_letters(&[di, xi], one());
        lhs.add_term(NCWord::new(vec![xi, di]), -QScalar::q_pow(2));
        let mut rhs = WordSum::from_word(NCWord::empty(), one());
        for j in i + 1..3 {
            rhs.add_term(NCWord::new(vec![G::coord(j), G::deriv(j)]), q2m1.clone());
        }
        rels.push(Relation {
            name: format!(
                "{di} {xi} - q^2 {xi} {di} = 1 + (q^2-1) sum_{{j>{}}} Xj dj",
                i + 1
            ),
            lhs,
            rhs,
        });
    }
    rels
}

/// Test hook: the defining relations with the first `XX` relation's
/// right-hand side changed from `q X₂X₁` to `q² X₂X₁`.
#[doc(hidden)]
pub fn corrupted_defining_relations() -> Vec<Relation> {
    let mut rels = defining_relations();
    let first = &mut rels[0];
    first.rhs = first.rhs.scaled(&QScalar::q_pow(1));
    first.name.push_str(" [corrupted]");
    rels
}

/// Result of [`confluence_suite`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfluenceReport {
    pub words: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Words whose normal form depended on the rewrite order.
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Normalizes `count` seeded random words (length 1..=`max_len`) under the
/// leftmost, rightmost and a seeded random rewrite order and compares.
pub fn confluence_suite(count: usize, max_len: usize, seed: u64) -> ConfluenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for _ in 0..count {
        let len = rng.random_range(1..=max_len.max(1));
        let letters: Vec<Generator> = (0..len)
            .map(|_| Generator::ALL[rng.random_range(0..6)])
            .collect();
        let s = WordSum::from_letters(&letters, QScalar::one());
        let left = normalize(&s);
        let right = normalize_with(&s, |_, pos| *pos.last().expect("non-empty"));
        let random = normalize_with(&s, |_, pos| pos[rng.random_range(0..pos.len())]);
        if left != right || left != random {
            failures.push(NCWord::new(letters).to_string());
        }
    }
    ConfluenceReport {
        words: count,
        max_len,
        seed,
        passed: failures.is_empty(),
        failures,
    }
}

/// `y₁ = αq∂₃, y₂ = αq²∂₂, y₃ = αq³∂₁, y₄ = X₁, y₅ = X₂, y₆ = X₃`.
pub fn y_generator(i: usize, alpha: &QScalar) -> Result<NCPoly> {
    use Generator as G;
    let (g, scale) = match i {
        1 => (G::D3, alpha.shift(1)),
        2 => (G::D2, alpha.shift(2)),
        3 => (G::D1, alpha.shift(3)),
        4 => (G::X1, QScalar::one()),
        5 => (G::X2, QScalar::one()),
        6 => (G::X3, QScalar::one()),
        _ => return Err(Error::GeneratorIndex(i)),
    };
    Ok(NCPoly::generator(g).scale(&scale))
}

/// Which `y` index each tested `j` is paired with in
/// `y_{p(j)} y_j − q⁻² y_j y_{p(j)} = −q^{−j} α (q⁻² − 1) Σ_{k<j} q^{k−j} y_k y_{p(k)}`.
#[derive(Clone, Debug, Serialize)]
pub struct PairingSpec {
    pub label: String,
    /// `(j, p(j))` for every tested `j`.
    pub pairs: Vec<(usize, usize)>,
}

impl PairingSpec {
    /// `p(j) = 4 − j` for `j = 1, 2, 3`, as printed.
    pub fn literal() -> Self {
        Self {
            label: "4-j".into(),
            pairs: (1..=3).map(|j| (j, 4 - j)).collect(),
        }
    }

    /// `p(j) = 7 − j` for `j = 1, 2, 3` (derivative paired with its coordinate).
    pub fn seven_minus_j() -> Self {
        Self {
            label: "7-j".into(),
            pairs: (1..=3).map(|j| (j, 7 - j)).collect(),
        }
    }

    fn partner_map(&self) -> Result<BTreeMap<usize, usize>> {
        let mut map = BTreeMap::new();
        for &(j, p) in &self.pairs {
            if !(1..=6).contains(&j) || !(1..=6).contains(&p) {
                return Err(Error::Pairing(format!(
                    "index pair ({j}, {p}) outside 1..=6"
                )));
            }
            if map.insert(j, p).is_some() {
                return Err(Error::Pairing(format!("j = {j} listed twice")));
            }
        }
        for &j in map.keys() {
            for k in 1..j {
                if !map.contains_key(&k) {
                    return Err(Error::Pairing(format!(
                        "sum for j = {j} needs a partner for k = {k}"
                    )));
                }
            }
        }
        if map.is_empty() {
            return Err(Error::Pairing("no indices to test".into()));
        }
        Ok(map)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymplecticCheck {
    pub j: usize,
    pub partner: usize,
    pub lhs: NCPoly,
    pub rhs: NCPoly,
    pub report: RelationReport,
}

/// Evaluates the reduced symplectic relation for every `j` in `spec`.
pub fn check_reduced_symplectic(
    spec: &PairingSpec,
    alpha: &QScalar,
) -> Result<Vec<SymplecticCheck>> {
    let partners = spec.partner_map()?;
    let y = |i: usize| y_generator(i, alpha);
    let q_m2 = QScalar::q_pow(-2);
    let mut out = Vec::new();
    for (&j, &p) in &partners {
        let (yj, yp) = (y(j)?, y(p)?);
        let lhs = nc_mul(&yp, &yj).sub(&nc_mul(&yj, &yp).scale(&q_m2));
        let mut sum = NCPoly::zero();
        for k in 1..j {
            let pk = partners[&k];
            let term = nc_mul(&y(k)?, &y(pk)?).scale(&QScalar::q_pow(k as i32 - j as i32));
            sum = sum.add(&term);
        }
        // −q^{−j} α (q^{−2} − 1)
        let prefactor = &(&QScalar::q_pow(-(j as i32)) * alpha) * &(QScalar::one() - q_m2.clone());
        let rhs = sum.scale(&prefactor);
        let report = check_relation(&lhs, &rhs);
        out.push(SymplecticCheck {
            j,
            partner: p,
            lhs,
            rhs,
            report,
        });
    }
    Ok(out)
}
