//! The group `Gamma_d(q)` of affine matrices, its generating set, words, and
//! text encodings.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};
use crate::ring::{Poly, RationalForm, Residue, RingParams};

/// Affine matrix `(prod (t+l_i)^{k_i}, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElem {
    k: Vec<i64>,
    p: RationalForm,
}

impl GroupElem {
    pub fn new(k: Vec<i64>, p: RationalForm) -> Self {
        debug_assert_eq!(k.len(), p.den_exp().len());
        GroupElem { k, p }
    }

    pub fn identity(d: usize) -> Self {
        GroupElem {
            k: vec![0; d - 1],
            p: RationalForm::zero(d),
        }
    }

    pub fn k(&self) -> &[i64] {
        &self.k
    }

    pub fn p(&self) -> &RationalForm {
        &self.p
    }

    pub fn is_identity(&self) -> bool {
        self.p.is_zero() && self.k.iter().all(|&x| x == 0)
    }
}

/// A member of the generating set. Tree indices are zero-based and range over
/// the finite places `0..d-1`.
///
/// The derived ordering is the canonical generator order used for every
/// tie-break: `Up` before `Down` before `Mixed`, then by indices and offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    /// `(t+l_i, b)`
    Up { tree: usize, b: Residue },
    /// `(t+l_i, b)^{-1}`
    Down { tree: usize, b: Residue },
    /// `((t+l_i)(t+l_j)^{-1}, -b (t+l_j)^{-1})`
    Mixed { up: usize, down: usize, b: Residue },
}

impl Generator {
    pub fn offset(&self) -> Residue {
        match *self {
            Generator::Up { b, .. } | Generator::Down { b, .. } | Generator::Mixed { b, .. } => b,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Generator::Up { tree, b } => write!(f, "u{}:{b}", tree + 1),
            Generator::Down { tree, b } => write!(f, "d{}:{b}", tree + 1),
            Generator::Mixed { up, down, b } => write!(f, "m{},{}:{b}", up + 1, down + 1),
        }
    }
}

/// A finite sequence of generators, evaluated left to right by right
/// multiplication.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<Generator>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Generator] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, g) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// `Gamma_d(q)` for fixed ring parameters, with its generating set in
/// canonical order.
#[derive(Debug, Clone)]
pub struct Group {
    params: RingParams,
    generators: Vec<Generator>,
    gen_elems: Vec<GroupElem>,
}

impl Group {
    pub fn new(params: RingParams) -> Self {
        let d = params.d();
        let q = params.q();
        let mut generators = Vec::with_capacity(d * (d - 1) * q as usize);
        for tree in 0..d - 1 {
            for b in 0..q {
                generators.push(Generator::Up { tree, b });
            }
        }
        for tree in 0..d - 1 {
            for b in 0..q {
                generators.push(Generator::Down { tree, b });
            }
        }
        for up in 0..d - 1 {
            for down in 0..d - 1 {
                if up == down {
                    continue;
                }
                for b in 0..q {
                    generators.push(Generator::Mixed { up, down, b });
                }
            }
        }
        let mut group = Group {
            params,
            generators: Vec::new(),
            gen_elems: Vec::new(),
        };
        group.gen_elems = generators
            .iter()
            .map(|&s| group.generator_elem(s))
            .collect();
        group.generators = generators;
        group
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn d(&self) -> usize {
        self.params.d()
    }

    pub fn identity(&self) -> GroupElem {
        GroupElem::identity(self.d())
    }

    /// The generating set in canonical order; `d(d-1)q` members.
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// Matrix of the `idx`-th generator in canonical order.
    pub fn generator_matrix(&self, idx: usize) -> &GroupElem {
        &self.gen_elems[idx]
    }

    pub fn generator_index(&self, s: Generator) -> usize {
        self.generators
            .binary_search(&s)
            .expect("generator belongs to this group")
    }

    /// Matrix of an arbitrary generator.
    pub fn generator_elem(&self, s: Generator) -> GroupElem {
        let r = &self.params;
        let d = r.d();
        let unit = |i: usize, sign: i64| {
            let mut k = vec![0i64; d - 1];
            k[i] = sign;
            k
        };
        match s {
            Generator::Up { tree, b } => GroupElem::new(unit(tree, 1), r.rat_const(b)),
            Generator::Down { tree, b } => {
                let k = unit(tree, -1);
                let p = r.rat_scale(&r.rat_const(r.neg(b)), &k, 1);
                GroupElem::new(k, p)
            }
            Generator::Mixed { up, down, b } => {
                let mut k = unit(up, 1);
                k[down] = -1;
                let p = r.rat_scale(&r.rat_const(r.neg(b)), &unit(down, -1), 1);
                GroupElem::new(k, p)
            }
        }
    }

    pub fn invert_generator(&self, s: Generator) -> Generator {
        match s {
            Generator::Up { tree, b } => Generator::Down { tree, b },
            Generator::Down { tree, b } => Generator::Up { tree, b },
            Generator::Mixed { up, down, b } => Generator::Mixed {
                up: down,
                down: up,
                b: self.params.neg(b),
            },
        }
    }

    /// `(a, P)(a', P') = (a a', a P' + P)`.
    pub fn multiply(&self, g: &GroupElem, h: &GroupElem) -> GroupElem {
        let r = &self.params;
        let k = g.k.iter().zip(&h.k).map(|(x, y)| x + y).collect();
        let p = r.rat_add(&r.rat_scale(&h.p, &g.k, 1), &g.p);
        GroupElem { k, p }
    }

    /// `g` times the `idx`-th generator.
    pub fn step(&self, g: &GroupElem, idx: usize) -> GroupElem {
        self.multiply(g, &self.gen_elems[idx])
    }

    /// `(a, P)^{-1} = (a^{-1}, -a^{-1} P)`.
    pub fn invert(&self, g: &GroupElem) -> GroupElem {
        let r = &self.params;
        let k: Vec<i64> = g.k.iter().map(|x| -x).collect();
        let p = r.rat_scale(&g.p, &k, r.neg(1));
        GroupElem { k, p }
    }

    pub fn eval_word(&self, w: &Word) -> GroupElem {
        w.0.iter().fold(self.identity(), |acc, &s| {
            self.multiply(&acc, &self.generator_elem(s))
        })
    }

    /// The word whose value is the inverse of `w`'s value.
    pub fn invert_word(&self, w: &Word) -> Word {
        Word(
            w.0.iter()
                .rev()
                .map(|&s| self.invert_generator(s))
                .collect(),
        )
    }

    // --- text encodings ---------------------------------------------------

    /// Parses the element JSON `{"k":[..],"num":[..],"den":[..]}`. The
    /// numerator and denominator are normalized.
    pub fn parse_elem(&self, text: &str) -> Result<GroupElem> {
        let raw: ElemJson = serde_json::from_str(text).map_err(|e| DlError::Parse {
            pos: byte_offset(text, e.line(), e.column()),
            msg: e.to_string(),
        })?;
        let d = self.d();
        let q = self.params.q();
        let bad = |msg: String| DlError::Parse { pos: 0, msg };
        if raw.k.len() != d - 1 {
            return Err(bad(format!("\"k\" must have {} entries", d - 1)));
        }
        if raw.den.len() != d - 1 {
            return Err(bad(format!("\"den\" must have {} entries", d - 1)));
        }
        if let Some(c) = raw.num.iter().find(|&&c| c >= q) {
            return Err(bad(format!("coefficient {c} is not below q = {q}")));
        }
        let p = self.params.normalize(Poly::from_coeffs(raw.num), raw.den);
        Ok(GroupElem::new(raw.k, p))
    }

    pub fn format_elem(&self, g: &GroupElem) -> String {
        serde_json::to_string(&ElemJson::from(g)).expect("element JSON serializes")
    }

    /// Parses whitespace separated tokens `u<i>:<b>`, `d<i>:<b>`,
    /// `m<i>,<j>:<b>` with one-based tree indices.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let mut letters = Vec::new();
        let mut pos = 0;
        for token in text.split_inclusive(char::is_whitespace) {
            let start = pos;
            pos += token.len();
            let tok = token.trim();
            if tok.is_empty() {
                continue;
            }
            letters.push(self.parse_letter(tok).map_err(|msg| DlError::Parse {
                pos: start,
                msg: format!("bad generator {tok:?}: {msg}"),
            })?);
        }
        Ok(Word(letters))
    }

    fn parse_letter(&self, tok: &str) -> std::result::Result<Generator, String> {
        let d = self.d();
        let q = self.params.q();
        let (head, b) = tok.split_once(':').ok_or("missing ':'")?;
        let b: Residue = b.parse().map_err(|_| format!("bad offset {b:?}"))?;
        if b >= q {
            return Err(format!("offset {b} is not below q = {q}"));
        }
        let tree = |s: &str| -> std::result::Result<usize, String> {
            let i: usize = s.parse().map_err(|_| format!("bad tree index {s:?}"))?;
            if i == 0 || i >= d {
                return Err(format!("tree index {i} outside 1..={}", d - 1));
            }
            Ok(i - 1)
        };
        let mut chars = head.chars();
        match chars.next() {
            Some('u') => Ok(Generator::Up {
                tree: tree(chars.as_str())?,
                b,
            }),
            Some('d') => Ok(Generator::Down {
                tree: tree(chars.as_str())?,
                b,
            }),
            Some('m') => {
                let (i, j) = chars
                    .as_str()
                    .split_once(',')
                    .ok_or("mixed generator needs i,j")?;
                let (up, down) = (tree(i)?, tree(j)?);
                if up == down {
                    return Err("mixed generator needs distinct trees".into());
                }
                Ok(Generator::Mixed { up, down, b })
            }
            _ => Err("expected 'u', 'd' or 'm'".into()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ElemJson {
    pub k: Vec<i64>,
    pub num: Vec<Residue>,
    pub den: Vec<u32>,
}

impl From<&GroupElem> for ElemJson {
    fn from(g: &GroupElem) -> Self {
        ElemJson {
            k: g.k.clone(),
            num: g.p.num().coeffs().to_vec(),
            den: g.p.den_exp().to_vec(),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    before + column.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn group(d: usize, q: u32) -> Group {
        Group::new(RingParams::new(d, q, None).unwrap())
    }

    #[test]
    fn generating_set_shape() {
        for (d, q) in [(2, 2), (3, 2), (3, 3), (4, 5)] {
            let g = group(d, q);
            let n = d * (d - 1) * q as usize;
            assert_eq!(g.generators().len(), n);
            let mut elems: Vec<_> = (0..n).map(|i| g.generator_matrix(i).clone()).collect();
            elems.sort();
            elems.dedup();
            assert_eq!(elems.len(), n, "generators distinct for d={d} q={q}");
            for &s in g.generators() {
                let inv = g.invert_generator(s);
                assert!(g.generators().contains(&inv));
                let prod = g.multiply(&g.generator_elem(s), &g.generator_elem(inv));
                assert!(prod.is_identity(), "{s} * {inv}");
                assert_eq!(g.invert(&g.generator_elem(s)), g.generator_elem(inv));
            }
        }
    }

    #[test]
    fn canonical_generator_order() {
        let g = group(3, 2);
        let s = g.generators();
        assert_eq!(s[0], Generator::Up { tree: 0, b: 0 });
        assert_eq!(s[4], Generator::Down { tree: 0, b: 0 });
        assert_eq!(
            s[8],
            Generator::Mixed {
                up: 0,
                down: 1,
                b: 0
            }
        );
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn multiply_examples() {
        let g = group(2, 2);
        let up1 = g.generator_elem(Generator::Up { tree: 0, b: 1 });
        let down1 = g.generator_elem(Generator::Down { tree: 0, b: 1 });
        assert_eq!(g.multiply(&g.identity(), &up1), up1);
        assert!(g.multiply(&up1, &down1).is_identity());
        // (t, 1)(t, 1) = (t^2, t + 1)
        let sq = g.multiply(&up1, &up1);
        assert_eq!(sq.k(), &[2]);
        assert_eq!(sq.p().num().coeffs(), &[1, 1]);
        assert_eq!(sq.p().den_exp(), &[0]);
    }

    #[test]
    fn mixed_inverse() {
        let g = group(3, 5);
        let s = Generator::Mixed {
            up: 0,
            down: 1,
            b: 2,
        };
        let inv = g.invert_generator(s);
        assert_eq!(
            inv,
            Generator::Mixed {
                up: 1,
                down: 0,
                b: 3
            }
        );
        assert!(g
            .multiply(&g.generator_elem(s), &g.generator_elem(inv))
            .is_identity());
    }

    #[test]
    fn eval_word_examples() {
        let g = group(2, 2);
        assert!(g.eval_word(&Word::default()).is_identity());
        let w = g.parse_word("u1:1 d1:0").unwrap();
        let x = g.eval_word(&w);
        assert_eq!(x.k(), &[0]);
        assert_eq!(x.p().num().coeffs(), &[1]);
    }

    #[test]
    fn elem_json_examples() {
        let g = group(2, 2);
        assert!(g
            .parse_elem(r#"{"k":[0],"num":[],"den":[0]}"#)
            .unwrap()
            .is_identity());
        let x = g.parse_elem(r#"{"k":[2],"num":[1,1],"den":[0]}"#).unwrap();
        assert_eq!(x, g.eval_word(&g.parse_word("u1:1 u1:1").unwrap()));

        let g3 = group(3, 2);
        let x = g3
            .parse_elem(r#"{"k":[1,0],"num":[1],"den":[0,1]}"#)
            .unwrap();
        assert_eq!(x.k(), &[1, 0]);
        assert_eq!(x.p().num().coeffs(), &[1]);
        assert_eq!(x.p().den_exp(), &[0, 1]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let g = group(3, 2);
        match g.parse_word("u1:1 x2:0") {
            Err(DlError::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(g.parse_word("u3:0").is_err());
        assert!(g.parse_word("u1:2").is_err());
        assert!(g.parse_word("m1,1:0").is_err());
        match g.parse_elem(r#"{"k":[0,0], "num":[1,}"#) {
            Err(DlError::Parse { pos, .. }) => assert!(pos > 10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(g.parse_elem(r#"{"k":[0],"num":[],"den":[0,0]}"#).is_err());
        assert!(g
            .parse_elem(r#"{"k":[0,0],"num":[2],"den":[0,0]}"#)
            .is_err());
    }

    fn arb_word(d: usize, q: u32) -> impl Strategy<Value = Word> {
        let n = d * (d - 1) * q as usize;
        let g = group(d, q);
        prop::collection::vec(0..n, 0..12)
            .prop_map(move |ix| Word(ix.into_iter().map(|i| g.generators()[i]).collect()))
    }

    proptest! {
        #[test]
        fn group_laws(w1 in arb_word(3, 3), w2 in arb_word(3, 3), w3 in arb_word(3, 3)) {
            let g = group(3, 3);
            let (a, b, c) = (g.eval_word(&w1), g.eval_word(&w2), g.eval_word(&w3));
            prop_assert_eq!(
                g.multiply(&g.multiply(&a, &b), &c),
                g.multiply(&a, &g.multiply(&b, &c))
            );
            prop_assert!(g.multiply(&a, &g.invert(&a)).is_identity());
            prop_assert!(g.multiply(&g.invert(&a), &a).is_identity());
            prop_assert_eq!(g.multiply(&a, &g.identity()), a.clone());
            prop_assert!(g.eval_word(&Word([w1.0.clone(), g.invert_word(&w1).0].concat())).is_identity());
        }

        #[test]
        fn text_round_trips(w in arb_word(4, 5)) {
            let g = group(4, 5);
            let x = g.eval_word(&w);
            prop_assert_eq!(g.parse_elem(&g.format_elem(&x)).unwrap(), x);
            prop_assert_eq!(g.parse_word(&w.to_string()).unwrap(), w);
        }
    }
}
