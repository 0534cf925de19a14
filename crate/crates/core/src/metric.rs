//! Word length from the projection, geodesic and quasi-geodesic words, and
//! distances.
//!
//! For a permutation `sigma` of the trees put
//!
//! ```text
//! A(d) = m_{s1} + ... + m_{sd}
//! A(i) = m_{s2} + ... + m_{si} + l_{si} + ... + l_{s(d-1)}      2 <= i <= d-1
//! f_sigma = m_{s1} + l_{sd} + max_{2<=i<=d} A(i)
//! ```
//!
//! and the word length is the minimum of `f_sigma` over all `d!` permutations.

use std::fmt;
use std::sync::OnceLock;

use itertools::Itertools;
use serde::{Serialize, Serializer};

use crate::error::{DlError, Result};
use crate::geometry::{EdgeType, Projection};
use crate::group::{Generator, Group, GroupElem, Word};
use crate::ring::MAX_TREES;

/// A permutation of the trees; `images[p]` is the (zero-based) tree in
/// position `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || std::mem::replace(&mut seen[i], true) {
                return Err(DlError::Precondition(format!(
                    "{images:?} is not a permutation"
                )));
            }
        }
        Ok(Permutation { images })
    }

    /// From one-based images, as written in the text.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(DlError::Precondition(
                "one-based images must be positive".into(),
            ));
        }
        Permutation::new(images.iter().map(|i| i - 1).collect())
    }

    pub fn identity(d: usize) -> Self {
        Permutation {
            images: (0..d).collect(),
        }
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn at(&self, p: usize) -> usize {
        self.images[p]
    }

    pub fn d(&self) -> usize {
        self.images.len()
    }

    /// `tau(i) = sigma(i+1)` for `i < d`, `tau(d) = sigma(1)`.
    pub fn rotate_left(&self) -> Self {
        let mut images = self.images.clone();
        images.rotate_left(1);
        Permutation { images }
    }

    /// `tau(1) = sigma(d)`, `tau(i) = sigma(i-1)` for `i >= 2`.
    pub fn rotate_right(&self) -> Self {
        let mut images = self.images.clone();
        images.rotate_right(1);
        Permutation { images }
    }

    fn one_based(&self) -> Vec<usize> {
        self.images.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.one_based().iter().join(","))
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// All permutations of `d` trees in lexicographic order.
pub fn permutations(d: usize) -> &'static [Permutation] {
    static CACHE: [OnceLock<Vec<Permutation>>; MAX_TREES + 1] =
        [const { OnceLock::new() }; MAX_TREES + 1];
    assert!(d <= MAX_TREES, "at most {MAX_TREES} trees");
    CACHE[d].get_or_init(|| {
        (0..d)
            .permutations(d)
            .map(|images| Permutation { images })
            .collect()
    })
}

/// `A_sigma(i)` for `i = 2..=d`, stored from index 0.
pub fn a_values(proj: &Projection, sigma: &Permutation) -> Vec<u64> {
    let d = proj.d();
    let m = |p: usize| proj.m(sigma.at(p)) as u64;
    let l = |p: usize| proj.l(sigma.at(p)) as u64;
    let mut out = Vec::with_capacity(d - 1);
    for i in 2..d {
        let ms: u64 = (1..i).map(m).sum();
        let ls: u64 = (i - 1..d - 1).map(l).sum();
        out.push(ms + ls);
    }
    out.push((0..d).map(m).sum());
    out
}

/// `f_sigma` without allocating.
pub fn f_sigma(proj: &Projection, sigma: &Permutation) -> u64 {
    let d = proj.d();
    let mut m = [0u64; MAX_TREES];
    let mut l = [0u64; MAX_TREES];
    for p in 0..d {
        let (mp, lp) = proj.pairs[sigma.at(p)];
        m[p] = mp as u64;
        l[p] = lp as u64;
    }
    let total_m: u64 = m[..d].iter().sum();
    // A(i) = sum_{p=1}^{i-1} m_p + sum_{p=i-1}^{d-2} l_p
    let mut best = total_m;
    let mut prefix_m = 0;
    let mut suffix_l: u64 = l[1..d - 1].iter().sum();
    for i in 2..d {
        prefix_m += m[i - 1];
        best = best.max(prefix_m + suffix_l);
        suffix_l -= l[i - 1];
    }
    m[0] + l[d - 1] + best
}

/// The word length `min_sigma f_sigma`.
pub fn wordlength(proj: &Projection) -> u64 {
    permutations(proj.d())
        .iter()
        .map(|s| f_sigma(proj, s))
        .min()
        .expect("at least one permutation")
}

/// The word length together with its minimizing permutations.
pub fn wordlength_with_witnesses(proj: &Projection) -> (u64, Vec<Permutation>) {
    let values: Vec<u64> = permutations(proj.d())
        .iter()
        .map(|s| f_sigma(proj, s))
        .collect();
    let best = *values.iter().min().expect("at least one permutation");
    let witnesses = permutations(proj.d())
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v == best)
        .map(|(s, _)| s.clone())
        .collect();
    (best, witnesses)
}

/// Minimizers `Theta_g`, and `Theta'_g`, the minimizers whose first tree has
/// `l != 0`.
pub fn minimizing_permutations(proj: &Projection) -> Result<(Vec<Permutation>, Vec<Permutation>)> {
    if proj.is_zero() {
        return Err(DlError::Precondition(
            "the trivial projection has no minimizer structure".into(),
        ));
    }
    let (_, theta) = wordlength_with_witnesses(proj);
    let theta_prime: Vec<Permutation> = theta
        .iter()
        .filter(|s| proj.l(s.at(0)) != 0)
        .cloned()
        .collect();
    if theta_prime.is_empty() {
        return Err(DlError::Internal(format!(
            "no minimizer with l_sigma(1) != 0 for {proj}"
        )));
    }
    Ok((theta, theta_prime))
}

/// The terms of `f_sigma` for one permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormulaBreakdown {
    pub sigma: Permutation,
    /// `A_sigma(i)` for `i = 2..=d`.
    pub a_values: Vec<u64>,
    /// `f_sigma(g, i)` for `i = 2..=d`.
    pub per_i: Vec<u64>,
    pub f_sigma: u64,
}

impl FormulaBreakdown {
    pub fn new(proj: &Projection, sigma: &Permutation) -> Self {
        let a = a_values(proj, sigma);
        let base = proj.m(sigma.at(0)) as u64 + proj.l(sigma.at(proj.d() - 1)) as u64;
        let per_i: Vec<u64> = a.iter().map(|x| base + x).collect();
        let f_sigma = *per_i.iter().max().expect("d >= 2");
        FormulaBreakdown {
            sigma: sigma.clone(),
            a_values: a,
            per_i,
            f_sigma,
        }
    }
}

/// Full evaluation of the formula, as reported by `explain`.
#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub projection: Projection,
    pub f: u64,
    pub chosen: FormulaBreakdown,
    pub theta: Vec<Permutation>,
    pub theta_prime: Vec<Permutation>,
}

pub fn explain(proj: &Projection) -> Explanation {
    let (f, theta) = wordlength_with_witnesses(proj);
    let theta_prime: Vec<Permutation> = if proj.is_zero() {
        Vec::new()
    } else {
        theta
            .iter()
            .filter(|s| proj.l(s.at(0)) != 0)
            .cloned()
            .collect()
    };
    let chosen_sigma = theta_prime.first().unwrap_or(&theta[0]);
    Explanation {
        projection: proj.clone(),
        f,
        chosen: FormulaBreakdown::new(proj, chosen_sigma),
        theta,
        theta_prime,
    }
}

/// Edge types of the quasi-geodesic from the identity to an element with
/// projection `proj`, run-length encoded. Descend each finite tree to its
/// confluence, climb each finite tree to the element, then correct the
/// tree at infinity through tree 1.
pub fn quasi_geodesic_schedule(proj: &Projection) -> Vec<(EdgeType, u32)> {
    let d = proj.d();
    let inf = d - 1;
    let mut out = Vec::new();
    for i in 0..inf {
        out.push((EdgeType { up: inf, down: i }, proj.m(i)));
    }
    for i in 0..inf {
        out.push((EdgeType { up: i, down: inf }, proj.l(i)));
    }
    out.push((EdgeType { up: 0, down: inf }, proj.l(inf)));
    out.push((EdgeType { up: inf, down: 0 }, proj.l(inf)));
    out.retain(|&(_, n)| n > 0);
    out
}

impl Group {
    /// Word length of `g` from its projection.
    pub fn length(&self, g: &GroupElem) -> u64 {
        wordlength(&self.project(g))
    }

    /// Word distance between `g` and `h`, via the relative projection.
    pub fn distance(&self, g: &GroupElem, h: &GroupElem) -> u64 {
        wordlength(&self.project_relative(g, h))
    }

    /// The first generator in canonical order that shortens `g` by one.
    pub fn descent_step(&self, g: &GroupElem) -> Result<Generator> {
        if g.is_identity() {
            return Err(DlError::Precondition("the identity has no descent".into()));
        }
        let f = self.length(g);
        (0..self.generators().len())
            .find(|&idx| self.length(&self.step(g, idx)) + 1 == f)
            .map(|idx| self.generators()[idx])
            .ok_or_else(|| {
                DlError::Internal(format!(
                    "no descending generator from {}",
                    self.format_elem(g)
                ))
            })
    }

    /// A geodesic word for `g`, from iterated descent.
    pub fn geodesic_word(&self, g: &GroupElem) -> Result<Word> {
        let mut path = Vec::new();
        let mut x = g.clone();
        while !x.is_identity() {
            let s = self.descent_step(&x)?;
            x = self.multiply(&x, &self.generator_elem(s));
            path.push(s);
        }
        // g s_1 ... s_n = 1, so g = s_n^{-1} ... s_1^{-1}.
        Ok(self.invert_word(&Word(path)))
    }

    /// A word following the quasi-geodesic edge schedule and ending at `g`.
    /// Each ascending step takes the branch toward `g` in the tree it climbs.
    pub fn quasi_geodesic(&self, g: &GroupElem) -> Result<Word> {
        let proj = self.project(g);
        let schedule = quasi_geodesic_schedule(&proj);
        let word = self.walk_schedule(&schedule, |_, et, candidates| {
            candidates
                .iter()
                .enumerate()
                .min_by_key(|(_, y)| self.tree_gap(y, g, et.up))
                .map(|(n, _)| n)
                .expect("q >= 2 candidates")
        });
        if self.eval_word(&word) != *g {
            return Err(DlError::Internal(format!(
                "quasi-geodesic schedule missed {}",
                self.format_elem(g)
            )));
        }
        Ok(word)
    }

    /// Walks `schedule` from the identity. At each step `choose` sees the
    /// current element, the edge type, and the `q` candidate successors in
    /// offset order, and returns the index of the one to take.
    pub(crate) fn walk_schedule<F>(&self, schedule: &[(EdgeType, u32)], mut choose: F) -> Word
    where
        F: FnMut(&GroupElem, EdgeType, &[GroupElem]) -> usize,
    {
        let d = self.d();
        let q = self.params().q();
        let mut x = self.identity();
        let mut letters = Vec::new();
        for &(et, count) in schedule {
            let gens: Vec<Generator> = (0..q).map(|b| et.generator(d, b)).collect();
            for _ in 0..count {
                let candidates: Vec<GroupElem> = gens
                    .iter()
                    .map(|&s| self.multiply(&x, &self.generator_elem(s)))
                    .collect();
                let pick = choose(&x, et, &candidates);
                letters.push(gens[pick]);
                x = candidates.into_iter().nth(pick).expect("valid choice");
            }
        }
        Word(letters)
    }
}
