//! Exact rational linear constraints, polyhedra, and finite unions of
//! polyhedra (the guard and target set language).
//!
//! Emptiness is decided by Fourier-Motzkin elimination with mixed
//! strict/non-strict inequalities; a satisfying point is reconstructed by
//! back-substitution whenever the system is satisfiable. This module is the
//! exact oracle the automata layer is tested against, so there are no
//! tolerances anywhere.

use crate::rational::{format_q, parse_q, qvec, Q};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constraint sense: `<=` or strict `<`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "le")]
    Le,
    #[serde(rename = "lt")]
    Lt,
}

/// A single constraint `<a, x> rel b` over dimension `a.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    #[serde(with = "qvec")]
    pub a: Vec<Q>,
    #[serde(with = "crate::rational::qstr")]
    pub b: Q,
    pub rel: Rel,
}

impl LinearConstraint {
    pub fn le(a: Vec<Q>, b: Q) -> Self {
        LinearConstraint { a, b, rel: Rel::Le }
    }

    pub fn lt(a: Vec<Q>, b: Q) -> Self {
        LinearConstraint { a, b, rel: Rel::Lt }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Exact satisfaction test.
    pub fn holds(&self, x: &[Q]) -> Result<bool, GeometryError> {
        if x.len() != self.a.len() {
            return Err(GeometryError::DimMismatch {
                expected: self.a.len(),
                got: x.len(),
            });
        }
        let mut lhs = Q::zero();
        for (c, v) in self.a.iter().zip(x) {
            if !c.is_zero() {
                lhs += c * v;
            }
        }
        Ok(match self.rel {
            Rel::Le => lhs <= self.b,
            Rel::Lt => lhs < self.b,
        })
    }

    /// The negation `<a, x> rel b` -> `<-a, x> rel' -b` with the sense
    /// flipped between strict and non-strict.
    pub fn negate(&self) -> LinearConstraint {
        LinearConstraint {
            a: self.a.iter().map(|c| -c).collect(),
            b: -self.b.clone(),
            rel: match self.rel {
                Rel::Le => Rel::Lt,
                Rel::Lt => Rel::Le,
            },
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

/// A finite intersection of constraints over a common dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub dim: usize,
    pub constraints: Vec<LinearConstraint>,
}

impl Polyhedron {
    pub fn new(dim: usize, constraints: Vec<LinearConstraint>) -> Self {
        assert!(
            constraints.iter().all(|c| c.dim() == dim),
            "constraint dimension mismatch"
        );
        Polyhedron { dim, constraints }
    }

    /// The whole space.
    pub fn universe(dim: usize) -> Self {
        Polyhedron {
            dim,
            constraints: Vec::new(),
        }
    }

    pub fn contains(&self, x: &[Q]) -> Result<bool, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        for c in &self.constraints {
            if !c.holds(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A satisfying rational point, if one exists.
    pub fn witness(&self) -> Option<Vec<Q>> {
        fm_witness(self.dim, &self.constraints)
    }

    pub fn is_empty(&self) -> bool {
        self.witness().is_none()
    }

    /// Pointwise complement as a union of negated constraints. The
    /// complement of the universe is the empty union.
    pub fn complement(&self) -> PolyUnion {
        PolyUnion {
            dim: self.dim,
            polys: self
                .constraints
                .iter()
                .map(|c| Polyhedron::new(self.dim, vec![c.negate()]))
                .collect(),
        }
    }

    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron, GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Ok(Polyhedron::new(self.dim, constraints))
    }
}

/// A finite union of polyhedra over a common dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyUnion {
    pub dim: usize,
    pub polys: Vec<Polyhedron>,
}

impl PolyUnion {
    pub fn new(dim: usize, polys: Vec<Polyhedron>) -> Self {
        assert!(polys.iter().all(|p| p.dim == dim), "dimension mismatch");
        PolyUnion { dim, polys }
    }

    pub fn empty(dim: usize) -> Self {
        PolyUnion {
            dim,
            polys: Vec::new(),
        }
    }

    pub fn universe(dim: usize) -> Self {
        PolyUnion {
            dim,
            polys: vec![Polyhedron::universe(dim)],
        }
    }

    pub fn from_poly(p: Polyhedron) -> Self {
        PolyUnion {
            dim: p.dim,
            polys: vec![p],
        }
    }

    pub fn contains(&self, x: &[Q]) -> Result<bool, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        for p in &self.polys {
            if p.contains(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn witness(&self) -> Option<Vec<Q>> {
        self.polys.iter().find_map(|p| p.witness())
    }

    pub fn is_empty(&self) -> bool {
        self.witness().is_none()
    }

    pub fn union(&self, other: &PolyUnion) -> Result<PolyUnion, GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut polys = self.polys.clone();
        polys.extend(other.polys.iter().cloned());
        Ok(PolyUnion::new(self.dim, polys))
    }

    pub fn intersect(&self, other: &PolyUnion) -> Result<PolyUnion, GeometryError> {
        if self.dim != other.dim {
            return Err(GeometryError::DimMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut polys = Vec::new();
        for p in &self.polys {
            for q in &other.polys {
                polys.push(p.intersect(q)?);
            }
        }
        Ok(PolyUnion::new(self.dim, polys))
    }

    /// Pointwise complement: intersection of the member complements.
    pub fn complement(&self) -> PolyUnion {
        let mut acc = PolyUnion::universe(self.dim);
        for p in &self.polys {
            acc = acc
                .intersect(&p.complement())
                .expect("dimensions agree by construction");
        }
        acc
    }

    /// Embed into a larger space: constraints keep their coefficients on the
    /// first `self.dim` coordinates and are zero elsewhere.
    pub fn extend_dims(&self, new_dim: usize) -> PolyUnion {
        assert!(new_dim >= self.dim);
        let polys = self
            .polys
            .iter()
            .map(|p| {
                Polyhedron::new(
                    new_dim,
                    p.constraints
                        .iter()
                        .map(|c| {
                            let mut a = c.a.clone();
                            a.resize(new_dim, Q::zero());
                            LinearConstraint {
                                a,
                                b: c.b.clone(),
                                rel: c.rel,
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        PolyUnion::new(new_dim, polys)
    }
}

/// Convenience: the singleton `{x}` as a polyhedron (pairs of inequalities).
pub fn singleton(point: &[Q]) -> Polyhedron {
    let dim = point.len();
    let mut constraints = Vec::with_capacity(2 * dim);
    for (i, v) in point.iter().enumerate() {
        let mut a = vec![Q::zero(); dim];
        a[i] = Q::one();
        constraints.push(LinearConstraint::le(a.clone(), v.clone()));
        let mut neg = vec![Q::zero(); dim];
        neg[i] = -Q::one();
        constraints.push(LinearConstraint::le(neg, -v.clone()));
    }
    Polyhedron::new(dim, constraints)
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin elimination with witness reconstruction.
// ---------------------------------------------------------------------------

// A constraint during elimination, normalized over the remaining variables.
#[derive(Clone)]
struct Row {
    a: Vec<Q>,
    b: Q,
    strict: bool,
}

fn fm_witness(dim: usize, constraints: &[LinearConstraint]) -> Option<Vec<Q>> {
    let rows: Vec<Row> = constraints
        .iter()
        .map(|c| Row {
            a: c.a.clone(),
            b: c.b.clone(),
            strict: c.rel == Rel::Lt,
        })
        .collect();
    // levels[j] holds the system over variables 0..=j before x_j is
    // eliminated; levels[0] is the original system when dim > 0.
    let mut levels: Vec<Vec<Row>> = Vec::with_capacity(dim);
    let mut current = rows;
    for j in (0..dim).rev() {
        levels.push(current.clone());
        current = eliminate(&current, j);
    }
    // Variable-free residue: every row reads 0 rel b.
    for row in &current {
        let ok = if row.strict {
            Q::zero() < row.b
        } else {
            Q::zero() <= row.b
        };
        if !ok {
            return None;
        }
    }
    // Back-substitute, from x_0 (eliminated last) up to x_{dim-1}.
    let mut point = vec![Q::zero(); dim];
    for j in 0..dim {
        let system = &levels[dim - 1 - j];
        point[j] = choose_value(system, &point, j)?;
    }
    Some(point)
}

// Eliminate variable x_j from the system (all rows have zero coefficients
// above j by construction).
fn eliminate(rows: &[Row], j: usize) -> Vec<Row> {
    let mut lowers = Vec::new(); // a_j < 0: bound x_j from below
    let mut uppers = Vec::new(); // a_j > 0: bound x_j from above
    let mut rest = Vec::new();
    for row in rows {
        let coeff = &row.a[j];
        if coeff.is_zero() {
            rest.push(row.clone());
        } else if *coeff > Q::zero() {
            uppers.push(row.clone());
        } else {
            lowers.push(row.clone());
        }
    }
    for lo in &lowers {
        for up in &uppers {
            // Scale so the x_j coefficients cancel: up/up_j + lo/(-lo_j).
            let up_scale = up.a[j].recip();
            let lo_scale = -lo.a[j].recip();
            let mut a = vec![Q::zero(); j];
            for (idx, slot) in a.iter_mut().enumerate() {
                *slot = &up.a[idx] * &up_scale + &lo.a[idx] * &lo_scale;
            }
            a.push(Q::zero()); // coefficient of x_j, cancelled
            let b = &up.b * &up_scale + &lo.b * &lo_scale;
            rest.push(Row {
                a,
                b,
                strict: up.strict || lo.strict,
            });
        }
    }
    rest
}

// Pick a value for x_j given the already-fixed values of x_0..x_{j-1} and a
// system over x_0..x_j known to be satisfiable.
fn choose_value(system: &[Row], point: &[Q], j: usize) -> Option<Q> {
    let mut lower: Option<(Q, bool)> = None; // (bound, strict)
    let mut upper: Option<(Q, bool)> = None;
    for row in system {
        let coeff = &row.a[j];
        if coeff.is_zero() {
            continue;
        }
        // coeff * x_j rel b - sum of fixed part
        let mut rhs = row.b.clone();
        for (idx, v) in point.iter().enumerate().take(j) {
            if !row.a[idx].is_zero() {
                rhs -= &row.a[idx] * v;
            }
        }
        let bound = &rhs / coeff;
        if *coeff > Q::zero() {
            // x_j <= bound
            let tighter = match &upper {
                None => true,
                Some((u, us)) => bound < *u || (bound == *u && row.strict && !us),
            };
            if tighter {
                upper = Some((bound, row.strict));
            }
        } else {
            // x_j >= bound (dividing by a negative flips the sense)
            let tighter = match &lower {
                None => true,
                Some((l, ls)) => bound > *l || (bound == *l && row.strict && !ls),
            };
            if tighter {
                lower = Some((bound, row.strict));
            }
        }
    }
    match (lower, upper) {
        (None, None) => Some(Q::zero()),
        (Some((l, _)), None) => Some(l + Q::one()),
        (None, Some((u, _))) => Some(u - Q::one()),
        (Some((l, ls)), Some((u, us))) => {
            if l < u {
                Some((l + u) / (Q::one() + Q::one()))
            } else if l == u && !ls && !us {
                Some(l)
            } else {
                // Elimination promised satisfiability; an empty interval here
                // would be a bug, so fail loudly in debug and gracefully
                // otherwise.
                debug_assert!(false, "empty interval during back-substitution");
                None
            }
        }
    }
}

/// Parse the FUP JSON shape used by bundles: an array of constraint arrays.
pub fn poly_union_from_json(value: &serde_json::Value) -> Result<PolyUnion, String> {
    serde_json::from_value(value.clone()).map_err(|e| e.to_string())
}

/// Human-oriented rendering used in validation reports.
pub fn render_constraint(c: &LinearConstraint) -> String {
    let terms: Vec<String> = c
        .a
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| format!("{}*x{}", format_q(v), i))
        .collect();
    let lhs = if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    };
    let rel = match c.rel {
        Rel::Le => "<=",
        Rel::Lt => "<",
    };
    format!("{lhs} {rel} {}", format_q(&c.b))
}

/// Keep `parse_q` reachable for bundle code that reads raw constraint text.
pub fn parse_rational(text: &str) -> Result<Q, String> {
    parse_q(text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q_int, q_ratio};
    use rand::{Rng, SeedableRng};

    fn half_space_le(a: Vec<i64>, b: i64) -> LinearConstraint {
        LinearConstraint::le(a.into_iter().map(q_int).collect(), q_int(b))
    }

    fn half_space_lt(a: Vec<i64>, b: i64) -> LinearConstraint {
        LinearConstraint::lt(a.into_iter().map(q_int).collect(), q_int(b))
    }

    #[test]
    fn contains_honors_strictness() {
        let p = Polyhedron::new(1, vec![half_space_le(vec![1], 0)]);
        assert!(p.contains(&[q_int(0)]).unwrap());
        let p = Polyhedron::new(1, vec![half_space_lt(vec![1], 0)]);
        assert!(!p.contains(&[q_int(0)]).unwrap());
    }

    #[test]
    fn contains_simplex_point() {
        let p = Polyhedron::new(
            2,
            vec![
                half_space_le(vec![1, 1], 1),
                half_space_le(vec![-1, 0], 0),
                half_space_le(vec![0, -1], 0),
            ],
        );
        assert!(p.contains(&[q_ratio(1, 2), q_ratio(1, 2)]).unwrap());
        assert!(!p.contains(&[q_int(1), q_int(1)]).unwrap());
    }

    #[test]
    fn contains_checks_dimensions() {
        let p = Polyhedron::new(2, vec![half_space_le(vec![1, 0], 0)]);
        assert!(matches!(
            p.contains(&[q_int(0)]),
            Err(GeometryError::DimMismatch { .. })
        ));
    }

    #[test]
    fn emptiness_basics() {
        // x <= 0 and x >= 1
        let p = Polyhedron::new(
            1,
            vec![half_space_le(vec![1], 0), half_space_le(vec![-1], -1)],
        );
        assert!(p.is_empty());

        // x < 0 and -x < 0
        let p = Polyhedron::new(
            1,
            vec![half_space_lt(vec![1], 0), half_space_lt(vec![-1], 0)],
        );
        assert!(p.is_empty());

        // x <= 3 and x >= 3: the single point 3
        let p = Polyhedron::new(
            1,
            vec![half_space_le(vec![1], 3), half_space_le(vec![-1], -3)],
        );
        assert_eq!(p.witness(), Some(vec![q_int(3)]));
    }

    #[test]
    fn strict_shell_is_nonempty() {
        // 0 < x < 1
        let p = Polyhedron::new(
            1,
            vec![half_space_lt(vec![1], 1), half_space_lt(vec![-1], 0)],
        );
        let w = p.witness().expect("open interval is nonempty");
        assert!(p.contains(&w).unwrap());
    }

    #[test]
    fn witness_satisfies_constraints_randomized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut nonempty = 0;
        for _ in 0..300 {
            let dim = rng.gen_range(1..=3);
            let n = rng.gen_range(0..=5);
            let constraints: Vec<LinearConstraint> = (0..n)
                .map(|_| {
                    let a: Vec<Q> = (0..dim).map(|_| q_int(rng.gen_range(-4..=4))).collect();
                    let b = q_int(rng.gen_range(-6..=6));
                    if rng.gen_bool(0.3) {
                        LinearConstraint::lt(a, b)
                    } else {
                        LinearConstraint::le(a, b)
                    }
                })
                .collect();
            let p = Polyhedron::new(dim, constraints);
            match p.witness() {
                Some(w) => {
                    nonempty += 1;
                    assert!(p.contains(&w).unwrap(), "witness violates constraints");
                }
                None => {
                    // Random rational probes must not refute emptiness.
                    for _ in 0..40 {
                        let x: Vec<Q> = (0..dim)
                            .map(|_| q_ratio(rng.gen_range(-12..=12), rng.gen_range(1..=4)))
                            .collect();
                        assert!(!p.contains(&x).unwrap(), "sampling refuted emptiness");
                    }
                }
            }
        }
        assert!(nonempty > 50, "random systems should often be satisfiable");
    }

    #[test]
    fn complement_is_pointwise_negation() {
        let p = Polyhedron::new(1, vec![half_space_le(vec![1], 0)]);
        let c = p.complement();
        assert_eq!(c.polys.len(), 1);
        assert_eq!(c.polys[0].constraints[0], half_space_lt(vec![-1], 0));

        assert!(Polyhedron::universe(2).complement().polys.is_empty());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = Polyhedron::new(
            2,
            vec![half_space_le(vec![1, -2], 1), half_space_lt(vec![-3, 1], 2)],
        );
        let c = p.complement();
        for _ in 0..100 {
            let x: Vec<Q> = (0..2)
                .map(|_| q_ratio(rng.gen_range(-10..=10), rng.gen_range(1..=5)))
                .collect();
            assert_eq!(
                c.contains(&x).unwrap(),
                !p.contains(&x).unwrap(),
                "complement mismatch at {x:?}"
            );
        }
    }

    #[test]
    fn complement_is_an_involution_pointwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let u = PolyUnion::new(
            2,
            vec![
                Polyhedron::new(
                    2,
                    vec![half_space_le(vec![1, -2], 1), half_space_lt(vec![0, 1], 2)],
                ),
                Polyhedron::new(2, vec![half_space_le(vec![-1, 0], -3)]),
            ],
        );
        let twice = u.complement().complement();
        for _ in 0..1000 {
            let x: Vec<Q> = (0..2)
                .map(|_| q_ratio(rng.gen_range(-12..=12), rng.gen_range(1..=6)))
                .collect();
            assert_eq!(
                twice.contains(&x).unwrap(),
                u.contains(&x).unwrap(),
                "double complement differs at {x:?}"
            );
        }
    }

    #[test]
    fn union_and_intersection_are_pointwise() {
        let a = PolyUnion::new(
            1,
            vec![
                Polyhedron::new(1, vec![half_space_le(vec![1], 1)]),
                Polyhedron::new(1, vec![half_space_le(vec![-1], -3)]),
            ],
        );
        let b = PolyUnion::from_poly(Polyhedron::new(1, vec![half_space_le(vec![1], 0)]));
        let isect = a.intersect(&b).unwrap();
        assert!(isect.contains(&[q_int(0)]).unwrap());
        assert!(!isect.contains(&[q_int(3)]).unwrap());

        let empty = PolyUnion::empty(1);
        let u = a.union(&empty).unwrap();
        for v in [-4, 0, 2, 3, 5] {
            assert_eq!(
                u.contains(&[q_int(v)]).unwrap(),
                a.contains(&[q_int(v)]).unwrap()
            );
        }

        // Idempotence on sample points.
        let aa = a.intersect(&a).unwrap();
        for v in [-4, 0, 2, 3, 5] {
            assert_eq!(
                aa.contains(&[q_int(v)]).unwrap(),
                a.contains(&[q_int(v)]).unwrap()
            );
        }
    }

    #[test]
    fn singleton_has_unique_witness() {
        let s = singleton(&[q_int(2), q_ratio(-1, 3)]);
        assert_eq!(s.witness(), Some(vec![q_int(2), q_ratio(-1, 3)]));
        assert!(s.contains(&[q_int(2), q_ratio(-1, 3)]).unwrap());
        assert!(!s.contains(&[q_int(2), q_int(0)]).unwrap());
    }

    #[test]
    fn json_roundtrip() {
        let u = PolyUnion::new(
            2,
            vec![Polyhedron::new(
                2,
                vec![
                    LinearConstraint::le(vec![q_ratio(1, 2), q_int(-1)], q_ratio(7, 3)),
                    half_space_lt(vec![0, 1], 4),
                ],
            )],
        );
        let json = serde_json::to_string(&u).unwrap();
        let back: PolyUnion = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
    }
}
