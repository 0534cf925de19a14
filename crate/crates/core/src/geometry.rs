//! Group elements as vertices of `DL_d(q)`: heights, tree addresses, and the
//! projection to pairs of distances from the confluence with the basepoint.
//!
//! The tree-`i` vertex of `(a, P)` is the ball of expansions agreeing with `P`
//! below height `h_i`, where `h_i = k_i` for the finite places and
//! `h_d = -sum k_i` at infinity. Two balls meet at height
//! `min(h, h', valuation(P - P'))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};
use crate::group::{Generator, Group, GroupElem};
use crate::ring::{Residue, Valuation};

/// Tree heights `(h_1, ..., h_d)`, summing to zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Heights(pub Vec<i64>);

/// The pairs `(m_i, l_i)`: distance from the reference vertex to the
/// confluence, and from the element's vertex to the confluence, in tree `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Projection {
    pub pairs: Vec<(u32, u32)>,
}

impl Projection {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        Projection { pairs }
    }

    pub fn zero(d: usize) -> Self {
        Projection {
            pairs: vec![(0, 0); d],
        }
    }

    pub fn d(&self) -> usize {
        self.pairs.len()
    }

    pub fn m(&self, i: usize) -> u32 {
        self.pairs[i].0
    }

    pub fn l(&self, i: usize) -> u32 {
        self.pairs[i].1
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.iter().all(|&(m, l)| m == 0 && l == 0)
    }

    /// Projections of vertices satisfy `sum (l_i - m_i) = 0`.
    pub fn is_feasible(&self) -> bool {
        let (sm, sl) = self.sums();
        sm == sl
    }

    pub fn sums(&self) -> (u64, u64) {
        self.pairs
            .iter()
            .fold((0, 0), |(a, b), &(m, l)| (a + m as u64, b + l as u64))
    }

    /// Checks feasibility, naming the violated constraint.
    pub fn check_feasible(&self) -> Result<()> {
        let (sm, sl) = self.sums();
        if sm != sl {
            return Err(DlError::Infeasible(format!(
                "sum of l_i ({sl}) differs from sum of m_i ({sm})"
            )));
        }
        Ok(())
    }

    /// Product-of-trees distance `sum (m_i + l_i)`.
    pub fn tree_distance(&self) -> u64 {
        let (sm, sl) = self.sums();
        sm + sl
    }

    pub fn heights(&self) -> Heights {
        Heights(
            self.pairs
                .iter()
                .map(|&(m, l)| l as i64 - m as i64)
                .collect(),
        )
    }

    /// The projection with trees reordered: entry `i` of the result is entry
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Projection {
        Projection {
            pairs: perm.iter().map(|&i| self.pairs[i]).collect(),
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (n, (m, l)) in self.pairs.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "({m},{l})")?;
        }
        f.write_str(")")
    }
}

/// Edge type `e_up - e_down`: height rises by one in tree `up` and falls by
/// one in tree `down`. Trees are zero-based; `d-1` is the tree at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeType {
    pub up: usize,
    pub down: usize,
}

impl EdgeType {
    pub fn of(s: Generator, d: usize) -> EdgeType {
        match s {
            Generator::Up { tree, .. } => EdgeType {
                up: tree,
                down: d - 1,
            },
            Generator::Down { tree, .. } => EdgeType {
                up: d - 1,
                down: tree,
            },
            Generator::Mixed { up, down, .. } => EdgeType { up, down },
        }
    }

    /// The generator of this type with offset `b`.
    pub fn generator(&self, d: usize, b: Residue) -> Generator {
        assert_ne!(self.up, self.down);
        if self.down == d - 1 {
            Generator::Up { tree: self.up, b }
        } else if self.up == d - 1 {
            Generator::Down { tree: self.down, b }
        } else {
            Generator::Mixed {
                up: self.up,
                down: self.down,
                b,
            }
        }
    }
}

/// A vertex of one tree: its height and the nonzero part of its address,
/// the digits at positions `start..height`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeVertex {
    pub height: i64,
    pub start: i64,
    pub digits: Vec<Residue>,
}

impl Group {
    pub fn heights(&self, g: &GroupElem) -> Heights {
        let mut h = g.k().to_vec();
        h.push(-g.k().iter().sum::<i64>());
        Heights(h)
    }

    fn height(&self, g: &GroupElem, i: usize) -> i64 {
        if i == self.d() - 1 {
            -g.k().iter().sum::<i64>()
        } else {
            g.k()[i]
        }
    }

    /// `Pi(g)`, relative to the identity.
    pub fn project(&self, g: &GroupElem) -> Projection {
        let r = self.params();
        let pairs = (0..self.d())
            .map(|i| {
                let h = self.height(g, i);
                let c = confluence(0, h, r.valuation(g.p(), i));
                ((-c) as u32, (h - c) as u32)
            })
            .collect();
        Projection { pairs }
    }

    /// `Pi_h(g)`: `m_i` is measured from `h`'s vertex and `l_i` from `g`'s.
    /// Equals `project(h^{-1} g)`.
    pub fn project_relative(&self, g: &GroupElem, h: &GroupElem) -> Projection {
        let r = self.params();
        let diff = r.rat_sub(g.p(), h.p());
        let pairs = (0..self.d())
            .map(|i| {
                let (hg, hh) = (self.height(g, i), self.height(h, i));
                let c = confluence(hg, hh, r.valuation(&diff, i));
                ((hh - c) as u32, (hg - c) as u32)
            })
            .collect();
        Projection { pairs }
    }

    /// Distance in tree `i` between the vertices of `g` and `h`.
    pub fn tree_gap(&self, g: &GroupElem, h: &GroupElem, i: usize) -> u32 {
        let r = self.params();
        let (hg, hh) = (self.height(g, i), self.height(h, i));
        let c = confluence(hg, hh, r.valuation(&r.rat_sub(g.p(), h.p()), i));
        ((hg - c) + (hh - c)) as u32
    }

    /// Address digits of `g`'s vertex in tree `i` at positions `lo..hi`.
    pub fn tree_digits(&self, g: &GroupElem, i: usize, lo: i64, hi: i64) -> Vec<Residue> {
        self.params().digits(g.p(), i, lo, hi)
    }

    /// `g`'s vertex in tree `i`, determined by its height and the digits
    /// below that height.
    pub fn tree_vertex(&self, g: &GroupElem, i: usize) -> TreeVertex {
        let height = self.height(g, i);
        let start = match self.params().valuation(g.p(), i) {
            Valuation::Finite(v) if v < height => v,
            _ => height,
        };
        TreeVertex {
            height,
            start,
            digits: self.tree_digits(g, i, start, height),
        }
    }
}

fn confluence(a: i64, b: i64, v: Valuation) -> i64 {
    let c = a.min(b);
    match v {
        Valuation::Finite(v) => c.min(v),
        Valuation::Infinite => c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Word;
    use crate::ring::RingParams;
    use proptest::prelude::*;

    fn group(d: usize, q: u32) -> Group {
        Group::new(RingParams::new(d, q, None).unwrap())
    }

    fn proj(p: &[(u32, u32)]) -> Projection {
        Projection::new(p.to_vec())
    }

    #[test]
    fn heights_examples() {
        let g = group(3, 2);
        assert_eq!(g.heights(&g.identity()).0, vec![0, 0, 0]);
        let up = g.generator_elem(Generator::Up { tree: 0, b: 1 });
        assert_eq!(g.heights(&up).0, vec![1, 0, -1]);
        let mixed = g.generator_elem(Generator::Mixed {
            up: 0,
            down: 1,
            b: 1,
        });
        assert_eq!(g.heights(&mixed).0, vec![1, -1, 0]);
    }

    #[test]
    fn project_examples() {
        let g = group(3, 2);
        assert!(g.project(&g.identity()).is_zero());
        for b in 0..2 {
            let up = g.generator_elem(Generator::Up { tree: 0, b });
            assert_eq!(g.project(&up), proj(&[(0, 1), (0, 0), (1, 0)]));
        }
        // Lamp at t^1 in the lamplighter group.
        let g2 = group(2, 2);
        let x = g2.parse_elem(r#"{"k":[0],"num":[0,1],"den":[0]}"#).unwrap();
        assert_eq!(g2.project(&x), proj(&[(0, 0), (2, 2)]));
        let one = g2.parse_elem(r#"{"k":[0],"num":[1],"den":[0]}"#).unwrap();
        assert_eq!(g2.project(&one), proj(&[(0, 0), (1, 1)]));
    }

    #[test]
    fn tree_distance_examples() {
        assert_eq!(Projection::zero(3).tree_distance(), 0);
        assert_eq!(proj(&[(1, 1), (1, 1), (1, 1)]).tree_distance(), 6);
        assert_eq!(proj(&[(2, 3), (3, 3), (2, 1)]).tree_distance(), 14);
    }

    #[test]
    fn edge_type_examples() {
        let g = group(3, 2);
        let x = g.eval_word(&g.parse_word("u1:1 m2,1:0 d2:1").unwrap());
        let hx = g.heights(&x).0;
        for (s, up, down) in [
            (Generator::Up { tree: 0, b: 1 }, 0, 2),
            (Generator::Down { tree: 1, b: 0 }, 2, 1),
            (
                Generator::Mixed {
                    up: 0,
                    down: 1,
                    b: 1,
                },
                0,
                1,
            ),
        ] {
            assert_eq!(EdgeType::of(s, 3), EdgeType { up, down });
            let hs = g.heights(&g.multiply(&x, &g.generator_elem(s))).0;
            for t in 0..3 {
                let delta = hs[t] - hx[t];
                let want = if t == up {
                    1
                } else if t == down {
                    -1
                } else {
                    0
                };
                assert_eq!(delta, want);
            }
            assert_eq!(EdgeType::of(s, 3).generator(3, s.offset()), s);
        }
    }

    #[test]
    fn tree_digit_examples() {
        let g = group(3, 2);
        assert_eq!(g.tree_digits(&g.identity(), 0, -3, 3), vec![0; 6]);
        for b in 0..2 {
            let up = g.generator_elem(Generator::Up { tree: 0, b });
            assert_eq!(g.tree_digits(&up, 0, 0, 1), vec![b]);
        }
        let x = g.eval_word(&g.parse_word("u1:1 u2:1 d1:0").unwrap());
        for b in 0..2 {
            let y = g.multiply(
                &x,
                &g.generator_elem(Generator::Mixed { up: 0, down: 1, b }),
            );
            assert_eq!(g.tree_vertex(&x, 2), g.tree_vertex(&y, 2));
            let h = g.heights(&x).0[2];
            assert_eq!(g.tree_digits(&x, 2, -6, h), g.tree_digits(&y, 2, -6, h));
        }
    }

    #[test]
    fn relative_projection_reductions() {
        let g = group(3, 2);
        let x = g.eval_word(&g.parse_word("u1:1 m2,1:0 d2:1 u2:1").unwrap());
        assert_eq!(g.project_relative(&x, &g.identity()), g.project(&x));
        assert!(g.project_relative(&x, &x).is_zero());
    }

    fn arb_word(d: usize, q: u32, max: usize) -> impl Strategy<Value = Word> {
        let g = group(d, q);
        let n = g.generators().len();
        prop::collection::vec(0..n, 0..max)
            .prop_map(move |ix| Word(ix.into_iter().map(|i| g.generators()[i]).collect()))
    }

    proptest! {
        #[test]
        fn heights_additive(a in arb_word(3, 3, 10), b in arb_word(3, 3, 10)) {
            let g = group(3, 3);
            let (x, y) = (g.eval_word(&a), g.eval_word(&b));
            let hxy = g.heights(&g.multiply(&x, &y)).0;
            let (hx, hy) = (g.heights(&x).0, g.heights(&y).0);
            for i in 0..3 {
                prop_assert_eq!(hxy[i], hx[i] + hy[i]);
            }
            prop_assert_eq!(hxy.iter().sum::<i64>(), 0);
            let p = g.project(&x);
            prop_assert!(p.is_feasible());
            prop_assert_eq!(p.heights().0, hx);
        }

        #[test]
        fn relative_projection_is_translated_projection(a in arb_word(4, 5, 8), b in arb_word(4, 5, 8)) {
            let g = group(4, 5);
            let (x, y) = (g.eval_word(&a), g.eval_word(&b));
            let rel = g.project_relative(&x, &y);
            prop_assert_eq!(&rel, &g.project(&g.multiply(&g.invert(&y), &x)));
            for i in 0..4 {
                prop_assert_eq!(g.tree_gap(&x, &y, i), rel.m(i) + rel.l(i));
            }
        }

        #[test]
        fn edge_steps_move_one_tree_edge(w in arb_word(3, 2, 12)) {
            let g = group(3, 2);
            let x = g.eval_word(&w);
            let px = g.project(&x);
            for (idx, &s) in g.generators().iter().enumerate() {
                let et = EdgeType::of(s, 3);
                let py = g.project(&g.step(&x, idx));
                for t in 0..3 {
                    let (m, l) = px.pairs[t];
                    let got = py.pairs[t];
                    if t == et.up {
                        let toward_base = l == 0 && m > 0 && got == (m - 1, 0);
                        prop_assert!(got == (m, l + 1) || toward_base, "up tree {t}: {px} -> {py}");
                    } else if t == et.down {
                        let want = if l > 0 { (m, l - 1) } else { (m + 1, 0) };
                        prop_assert_eq!(got, want);
                    } else {
                        prop_assert_eq!(got, (m, l));
                    }
                }
            }
        }

        #[test]
        fn neighbors_of_one_type_are_distinct(w in arb_word(4, 5, 6)) {
            let g = group(4, 5);
            let x = g.eval_word(&w);
            for up in 0..4 {
                for down in 0..4 {
                    if up == down { continue; }
                    let et = EdgeType { up, down };
                    let mut ys: Vec<_> = (0..5)
                        .map(|b| g.multiply(&x, &g.generator_elem(et.generator(4, b))))
                        .collect();
                    ys.sort();
                    ys.dedup();
                    prop_assert_eq!(ys.len(), 5);
                }
            }
        }
    }
}
