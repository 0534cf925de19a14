//! Elements with prescribed projections, and the witness families for dead
//! ends of arbitrary depth and for infinitely many cone types.
//!
//! Every claim in a certificate is recomputed from the formula and the
//! oracle primitives; nothing is carried over from the construction.

use std::collections::HashSet;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{DlError, Result};
use crate::geometry::Projection;
use crate::group::{ElemJson, Group, GroupElem};
use crate::metric::{explain, quasi_geodesic_schedule, wordlength, FormulaBreakdown};
use crate::oracle::{dead_end_depth, is_dead_end, Depth, DEFAULT_STATE_BUDGET};

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;

fn serialize_elem<S: Serializer>(g: &GroupElem, s: S) -> std::result::Result<S::Ok, S::Error> {
    ElemJson::from(g).serialize(s)
}

impl Group {
    /// Builds an element with projection exactly `target`.
    ///
    /// Follows the quasi-geodesic schedule. Each ascent takes digit 0,
    /// except that an ascent starting from a vertex strictly below the
    /// basepoint on its own line takes the smallest digit that leaves
    /// that line, which fixes the confluence depth.
    pub fn realize(&self, target: &Projection) -> Result<GroupElem> {
        if target.d() != self.d() {
            return Err(DlError::Precondition(format!(
                "target has {} pairs, expected {}",
                target.d(),
                self.d()
            )));
        }
        target.check_feasible()?;
        let schedule = quasi_geodesic_schedule(target);
        let word = self.walk_schedule(&schedule, |x, et, candidates| {
            let here = self.project(x);
            let (m, l) = here.pairs[et.up];
            if l != 0 || m == 0 {
                return 0;
            }
            candidates
                .iter()
                .position(|y| self.project(y).m(et.up) == m)
                .expect("q >= 2 leaves room for a fresh digit")
        });
        let g = self.eval_word(&word);
        let got = self.project(&g);
        if got != *target {
            return Err(DlError::Internal(format!(
                "realized {got} instead of {target}"
            )));
        }
        Ok(g)
    }
}

/// Certificate for the dead end with projection `((n,n), ..., (n,n))`.
#[derive(Debug, Clone, Serialize)]
pub struct DeadEndCertificate {
    pub schema_version: u32,
    pub d: usize,
    pub q: u32,
    pub n: u32,
    #[serde(serialize_with = "serialize_elem")]
    pub element: GroupElem,
    pub projection: Projection,
    pub f: u64,
    pub expected_f: u64,
    pub length_matches: bool,
    pub is_dead_end: bool,
    pub depth: Depth,
    pub depth_horizon: u32,
    pub depth_at_least_n: bool,
    pub breakdown: FormulaBreakdown,
}

impl DeadEndCertificate {
    pub fn holds(&self) -> bool {
        self.length_matches && self.is_dead_end && self.depth_at_least_n
    }
}

/// Realizes the dead-end witness of index `n` and certifies its length,
/// the dead-end property, and a depth of at least `n`. The depth search
/// stops after `horizon` steps; `horizon` must be at least `n - 1`.
pub fn deadend_witness(
    group: &Group,
    n: u32,
    horizon: u32,
) -> Result<(GroupElem, DeadEndCertificate)> {
    if n == 0 {
        return Err(DlError::Precondition(
            "witness index n must be at least 1".into(),
        ));
    }
    if horizon + 1 < n {
        return Err(DlError::Precondition(format!(
            "depth horizon {horizon} cannot certify depth {n}"
        )));
    }
    let d = group.d();
    let target = Projection::new(vec![(n, n); d]);
    let g = group.realize(&target)?;
    let projection = group.project(&g);
    let f = wordlength(&projection);
    let expected_f = (d as u64 + 2) * n as u64;
    let dead = is_dead_end(group, &g);
    let depth = if dead {
        dead_end_depth(group, &g, horizon, DEFAULT_STATE_BUDGET)?
    } else {
        Depth::Exact(0)
    };
    let breakdown = explain(&projection).chosen;
    let cert = DeadEndCertificate {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        d,
        q: group.params().q(),
        n,
        element: g.clone(),
        projection,
        f,
        expected_f,
        length_matches: f == expected_f,
        is_dead_end: dead,
        depth_at_least_n: dead && depth.at_least(n),
        depth,
        depth_horizon: horizon,
        breakdown,
    };
    Ok((g, cert))
}

/// Projection of the cone-type witness `g_n`.
pub fn cone_witness_projection(d: usize, n: u32) -> Projection {
    let mut pairs = vec![(2 * n, 3 * n)];
    for i in 2..d - 1 {
        pairs.push(((i as u32 + 1) * n, (i as u32 + 2) * n));
    }
    pairs.push((d as u32 * n, 3 * n));
    pairs.push((2 * n, n));
    Projection::new(pairs)
}

/// Projection of the step `g_{n,i}` toward the dead end `g_{n,n}`.
pub fn cone_step_projection(d: usize, n: u32, i: u32) -> Projection {
    let mut p = cone_witness_projection(d, n);
    p.pairs[0].1 = 3 * n - i;
    p.pairs[d - 1].1 = n + i;
    p
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeStep {
    pub i: u32,
    #[serde(serialize_with = "serialize_elem")]
    pub element: GroupElem,
    pub projection: Projection,
    pub f: u64,
    pub increments_by_i: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeCertificate {
    pub schema_version: u32,
    pub d: usize,
    pub q: u32,
    pub n: u32,
    #[serde(serialize_with = "serialize_elem")]
    pub element: GroupElem,
    pub projection: Projection,
    pub f: u64,
    pub length_matches: bool,
    pub steps: Vec<ConeStep>,
    pub last_step_is_dead_end: bool,
    /// No element within this distance of `g_n` is a dead end.
    pub dead_end_free_radius: u32,
    pub no_nearby_dead_end: bool,
    /// Length of the shortest outbound word from `g_n` ending at a dead end,
    /// searched up to `n + 1` letters.
    pub outbound_dead_end_distance: Option<u32>,
    pub breakdown: FormulaBreakdown,
}

impl ConeCertificate {
    pub fn holds(&self) -> bool {
        self.length_matches
            && self.steps.iter().all(|s| s.increments_by_i)
            && self.last_step_is_dead_end
            && self.no_nearby_dead_end
    }
}

/// Realizes the cone-type witness `g_n` and the steps `g_{n,i}`, and
/// certifies their lengths and the dead-end structure around `g_n`.
pub fn cone_witness(group: &Group, n: u32) -> Result<(GroupElem, Vec<GroupElem>, ConeCertificate)> {
    let d = group.d();
    if d < 3 {
        return Err(DlError::Precondition(
            "cone witnesses need at least 3 trees".into(),
        ));
    }
    if n == 0 {
        return Err(DlError::Precondition(
            "witness index n must be at least 1".into(),
        ));
    }
    let g = group.realize(&cone_witness_projection(d, n))?;
    let projection = group.project(&g);
    let f = wordlength(&projection);
    let (sum_m, _) = projection.sums();

    let mut path = Vec::new();
    let mut steps = Vec::new();
    for i in 1..=n {
        let gi = group.realize(&cone_step_projection(d, n, i))?;
        let pi = group.project(&gi);
        let fi = wordlength(&pi);
        steps.push(ConeStep {
            i,
            element: gi.clone(),
            projection: pi,
            f: fi,
            increments_by_i: fi == f + i as u64,
        });
        path.push(gi);
    }
    let last_step_is_dead_end = path.last().is_some_and(|x| is_dead_end(group, x));

    let radius = n - 1;
    let no_nearby_dead_end = ball_around(group, &g, radius)
        .par_iter()
        .all(|x| !is_dead_end(group, x));

    let cert = ConeCertificate {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        d,
        q: group.params().q(),
        n,
        element: g.clone(),
        length_matches: f == 3 * n as u64 + sum_m,
        breakdown: explain(&projection).chosen,
        projection,
        f,
        steps,
        last_step_is_dead_end,
        dead_end_free_radius: radius,
        no_nearby_dead_end,
        outbound_dead_end_distance: outbound_dead_end_distance(group, &g, n + 1),
    };
    Ok((g, path, cert))
}

/// All elements within `radius` generator steps of `g`, in canonical order.
pub fn ball_around(group: &Group, g: &GroupElem, radius: u32) -> Vec<GroupElem> {
    let mut seen: HashSet<GroupElem> = HashSet::from([g.clone()]);
    let mut frontier = vec![g.clone()];
    for _ in 0..radius {
        let mut next = Vec::new();
        for x in &frontier {
            for idx in 0..group.generators().len() {
                let y = group.step(x, idx);
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    let mut out: Vec<_> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Fewest letters of an outbound word from `g` that ends at a dead end.
pub fn outbound_dead_end_distance(group: &Group, g: &GroupElem, max_len: u32) -> Option<u32> {
    let mut layer = vec![(g.clone(), group.length(g))];
    for r in 1..=max_len {
        let next: HashSet<(GroupElem, u64)> = layer
            .par_iter()
            .flat_map_iter(|(x, fx)| {
                (0..group.generators().len()).filter_map(move |idx| {
                    let y = group.step(x, idx);
                    let fy = group.length(&y);
                    (fy > *fx).then_some((y, fy))
                })
            })
            .collect();
        if next.par_iter().any(|(y, _)| is_dead_end(group, y)) {
            return Some(r);
        }
        layer = next.into_iter().collect();
    }
    None
}

/// Result of the exhaustive sweep over the projection set `H_n`.
#[derive(Debug, Clone, Serialize)]
pub struct HnReport {
    pub schema_version: u32,
    pub d: usize,
    pub n: u32,
    pub bound: u64,
    pub count: usize,
    pub max_f: u64,
    pub maximizers: Vec<Projection>,
    pub violations: Vec<Projection>,
    pub diagonal_is_maximizer: bool,
}

impl HnReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.diagonal_is_maximizer && self.max_f <= self.bound
    }
}

/// Evaluates the formula on every feasible projection with `m_i <= n` and
/// `l_i <= m_i + n`.
pub fn hn_sweep(d: usize, n: u32) -> HnReport {
    let bound = (d as u64 + 2) * n as u64;
    let ms: Vec<Vec<u32>> = (0..d).map(|_| 0..=n).multi_cartesian_product().collect();
    let evaluated: Vec<(Projection, u64)> = ms
        .par_iter()
        .flat_map_iter(|m| {
            let sum_m: u32 = m.iter().sum();
            let m = m.clone();
            m.iter()
                .map(|&mi| 0..=mi + n)
                .multi_cartesian_product()
                .filter(move |l| l.iter().sum::<u32>() == sum_m)
                .map(move |l| {
                    let p = Projection::new(m.iter().copied().zip(l).collect());
                    let f = wordlength(&p);
                    (p, f)
                })
        })
        .collect();
    let max_f = evaluated.iter().map(|&(_, f)| f).max().unwrap_or(0);
    let mut maximizers: Vec<Projection> = evaluated
        .iter()
        .filter(|&&(_, f)| f == max_f)
        .map(|(p, _)| p.clone())
        .collect();
    maximizers.sort();
    let mut violations: Vec<Projection> = evaluated
        .iter()
        .filter(|&&(_, f)| f > bound)
        .map(|(p, _)| p.clone())
        .collect();
    violations.sort();
    let diagonal = Projection::new(vec![(n, n); d]);
    HnReport {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        d,
        n,
        bound,
        count: evaluated.len(),
        max_f,
        diagonal_is_maximizer: maximizers.contains(&diagonal),
        maximizers,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingParams;
    use proptest::prelude::*;

    fn group(d: usize, q: u32) -> Group {
        Group::new(RingParams::new(d, q, None).unwrap())
    }

    #[test]
    fn realize_examples() {
        let g = group(3, 2);
        assert_eq!(g.realize(&Projection::zero(3)).unwrap(), g.identity());
        let bad = Projection::new(vec![(0, 1), (0, 0), (0, 0)]);
        assert!(matches!(g.realize(&bad), Err(DlError::Infeasible(_))));
        let t = Projection::new(vec![(1, 1); 3]);
        assert_eq!(g.project(&g.realize(&t).unwrap()), t);
    }

    #[test]
    fn deadend_examples() {
        let g3 = group(3, 2);
        let (_, c) = deadend_witness(&g3, 1, 4).unwrap();
        assert_eq!(c.f, 5);
        assert!(c.holds());
        let g2 = group(2, 2);
        let (_, c) = deadend_witness(&g2, 2, 4).unwrap();
        assert_eq!(c.f, 8);
        assert!(c.holds());
    }

    #[test]
    fn cone_examples() {
        let g = group(3, 2);
        assert_eq!(
            cone_witness_projection(3, 1),
            Projection::new(vec![(2, 3), (3, 3), (2, 1)])
        );
        let (_, path, c) = cone_witness(&g, 1).unwrap();
        assert_eq!(c.f, 10);
        assert_eq!(path.len(), 1);
        assert_eq!(c.steps[0].f, 11);
        assert!(c.holds());
        let (_, _, c2) = cone_witness(&g, 2).unwrap();
        assert!(c2.no_nearby_dead_end);
        assert!(matches!(
            cone_witness(&group(2, 2), 1),
            Err(DlError::Precondition(_))
        ));
    }

    #[test]
    fn cone_projections_feasible() {
        for d in 3..=6 {
            for n in 1..=4 {
                assert!(cone_witness_projection(d, n).is_feasible());
                for i in 1..=n {
                    assert!(cone_step_projection(d, n, i).is_feasible());
                }
            }
        }
    }

    #[test]
    fn hn_examples() {
        let r = hn_sweep(3, 1);
        assert_eq!(r.max_f, 5);
        assert!(r.holds());
        let r = hn_sweep(2, 2);
        assert_eq!(r.max_f, 8);
        assert!(r.holds());
    }

    fn feasible(d: usize, max: u32) -> impl Strategy<Value = Projection> {
        proptest::collection::vec((0..=max, 0..=max), d).prop_filter_map(
            "infeasible",
            |mut pairs| {
                let (sm, sl): (u32, u32) =
                    pairs.iter().fold((0, 0), |(a, b), &(m, l)| (a + m, b + l));
                if sm >= sl {
                    pairs[0].1 += sm - sl;
                } else {
                    pairs[0].0 += sl - sm;
                }
                Some(Projection::new(pairs))
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn realize_then_project(t in feasible(3, 4), q in 2u32..4) {
            let g = group(3, q);
            prop_assert_eq!(g.project(&g.realize(&t).unwrap()), t);
        }

        #[test]
        fn realize_then_project_d4(t in feasible(4, 3)) {
            let g = group(4, 5);
            prop_assert_eq!(g.project(&g.realize(&t).unwrap()), t);
        }
    }
}
