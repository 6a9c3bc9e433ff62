//! Data model for divisor geometry and KMS spectral tables.
//!
//! A `ParabolicFlatData` records, for a regular filtered λ-flat bundle on a
//! surface, the divisor intersection data and the KMS spectrum (parabolic
//! weight, residue eigenvalue, graded rank) at every divisor component and
//! every intersection point. `FilteredLocalSystemData` is its local-system
//! counterpart with (filtration index, monodromy eigenvalue) pairs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::exact::{crat_zero, rat_floor, CRat, Rat};

/// One intersection point record between components `i` and `j`,
/// canonicalized so that `i < j`. `mult` is the intersection multiplicity
/// [P] entering all point sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionPoint {
    pub i: String,
    pub j: String,
    pub label: String,
    pub mult: u32,
}

/// Divisor geometry: component labels, self-intersections [D_i]²,
/// polarization degrees (D_i, c₁(L)), and labelled intersection points.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DivisorGeometry {
    pub components: Vec<String>,
    pub selfint: BTreeMap<String, Rat>,
    pub deg_l: BTreeMap<String, Rat>,
    pub points: Vec<IntersectionPoint>,
}

impl DivisorGeometry {
    pub fn point(&self, label: &str) -> Option<&IntersectionPoint> {
        self.points.iter().find(|p| p.label == label)
    }
}

/// One KMS spectrum entry at a divisor component: parabolic weight `a`,
/// residue eigenvalue `alpha`, graded rank `r` (the paper's r(i,u)).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KmsPoint {
    pub a: Rat,
    pub alpha: CRat,
    pub r: u32,
}

/// One joint KMS entry at an intersection point P ∈ D_i ∩ D_j:
/// the two one-divisor spectra it refines and the joint rank r(P,u_i,u_j).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointKmsEntry {
    pub u_i: (Rat, CRat),
    pub u_j: (Rat, CRat),
    pub r: u32,
}

/// KMS data of a regular filtered λ-flat bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicFlatData {
    pub lambda: CRat,
    pub rank: u32,
    pub geometry: DivisorGeometry,
    pub divisor_spectra: BTreeMap<String, Vec<KmsPoint>>,
    pub point_spectra: BTreeMap<String, Vec<PointKmsEntry>>,
    /// Truncation parameter c_i per divisor; weights live in (c_i − 1, c_i].
    /// Missing entries default to 0.
    pub truncation: BTreeMap<String, Rat>,
}

impl ParabolicFlatData {
    pub fn trunc(&self, i: &str) -> Rat {
        self.truncation.get(i).copied().unwrap_or_else(Rat::zero)
    }
}

/// Exact representation of a nonzero complex number as exp(−2πi·mu) with
/// rational mu. Normalized so that 0 ≤ Re mu < 1. This is exactly the
/// subgroup of C* needed for monodromy eigenvalues of rational KMS data,
/// and it makes the local-system ↔ flat-bundle transport exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitExp {
    pub mu: CRat,
}

impl UnitExp {
    pub fn new(mu: CRat) -> Self {
        UnitExp { mu }
    }

    pub fn one() -> Self {
        UnitExp { mu: crat_zero() }
    }

    /// The represented value exp(−2πi·mu) as a float.
    pub fn value(&self) -> num_complex::Complex<f64> {
        let m = crate::exact::crat_to_c64(&self.mu);
        (num_complex::Complex::new(0.0, -2.0 * core::f64::consts::PI) * m).exp()
    }
}

/// One spectrum entry of a filtered local system at a divisor component:
/// filtration index `b`, monodromy eigenvalue `omega` (exactly, in
/// exponent form), graded rank `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LsKmsPoint {
    pub b: Rat,
    pub omega: UnitExp,
    pub r: u32,
}

/// Joint local-system entry at an intersection point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LsPointEntry {
    pub u_i: (Rat, UnitExp),
    pub u_j: (Rat, UnitExp),
    pub r: u32,
}

/// Spectrum tables of a filtered local system.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredLocalSystemData {
    pub rank: u32,
    pub geometry: DivisorGeometry,
    pub divisor_spectra: BTreeMap<String, Vec<LsKmsPoint>>,
    pub point_spectra: BTreeMap<String, Vec<LsPointEntry>>,
}

pub type ValidationReport = Vec<String>;

fn validate_geometry(g: &DivisorGeometry, out: &mut ValidationReport) {
    for i in &g.components {
        if !g.selfint.contains_key(i) {
            out.push(format!("geometry.selfint: missing component {i}"));
        }
        if !g.deg_l.contains_key(i) {
            out.push(format!("geometry.degL: missing component {i}"));
        }
    }
    let mut seen: Vec<(&str, &str, &str)> = Vec::new();
    for (n, p) in g.points.iter().enumerate() {
        if p.i == p.j {
            out.push(format!("geometry.points[{n}]: i == j ({})", p.i));
        }
        if p.i > p.j {
            out.push(format!(
                "geometry.points[{n}]: not canonicalized (i = {} > j = {})",
                p.i, p.j
            ));
        }
        if p.mult < 1 {
            out.push(format!("geometry.points[{n}]: mult < 1"));
        }
        if !g.components.contains(&p.i) || !g.components.contains(&p.j) {
            out.push(format!("geometry.points[{n}]: unknown component"));
        }
        let key = (p.i.as_str(), p.j.as_str(), p.label.as_str());
        if seen.contains(&key) {
            out.push(format!(
                "geometry.points[{n}]: duplicate (i, j, label) = ({}, {}, {})",
                p.i, p.j, p.label
            ));
        }
        seen.push(key);
    }
}

type SpectrumKey = (Rat, Rat, Rat);

fn marginal_of_spectrum(sp: &[KmsPoint]) -> BTreeMap<SpectrumKey, u64> {
    let mut m = BTreeMap::new();
    for p in sp {
        *m.entry((p.a, p.alpha.re, p.alpha.im)).or_insert(0) += p.r as u64;
    }
    m
}

fn check_point_tables<K: Ord + core::fmt::Debug>(
    label: &str,
    point: &IntersectionPoint,
    entries_rank: u64,
    rank: u32,
    marg_i: &BTreeMap<K, u64>,
    marg_j: &BTreeMap<K, u64>,
    div_i: &BTreeMap<K, u64>,
    div_j: &BTreeMap<K, u64>,
    out: &mut ValidationReport,
) {
    if entries_rank != rank as u64 {
        out.push(format!(
            "point_spectra[{label}]: rank sum {entries_rank} != rank {rank}"
        ));
    }
    if marg_i != div_i {
        out.push(format!(
            "point_spectra[{label}]: {}-side marginal disagrees with divisor_spectra[{}]",
            point.i, point.i
        ));
    }
    if marg_j != div_j {
        out.push(format!(
            "point_spectra[{label}]: {}-side marginal disagrees with divisor_spectra[{}]",
            point.j, point.j
        ));
    }
}

/// Validate KMS data of a λ-flat bundle. Returns one message per violated
/// invariant; empty report means valid.
pub fn validate_flat(d: &ParabolicFlatData) -> ValidationReport {
    let mut out = Vec::new();
    validate_geometry(&d.geometry, &mut out);
    if d.lambda.re.is_zero() && d.lambda.im.is_zero() {
        out.push(String::from("lambda: must be nonzero"));
    }
    if d.rank < 1 {
        out.push(String::from("rank: must be >= 1"));
    }
    for (i, sp) in &d.divisor_spectra {
        if !d.geometry.components.contains(i) {
            out.push(format!("divisor_spectra[{i}]: unknown component"));
            continue;
        }
        let c = d.trunc(i);
        let total: u64 = sp.iter().map(|p| p.r as u64).sum();
        if total != d.rank as u64 {
            out.push(format!(
                "divisor_spectra[{i}]: rank sum {total} != rank {}",
                d.rank
            ));
        }
        for (n, p) in sp.iter().enumerate() {
            if p.r < 1 {
                out.push(format!("divisor_spectra[{i}][{n}].r: must be >= 1"));
            }
            if !(p.a > c - Rat::new(1, 1) && p.a <= c) {
                out.push(format!(
                    "divisor_spectra[{i}][{n}].a: {} outside ({} - 1, {}]",
                    p.a, c, c
                ));
            }
        }
    }
    for i in &d.geometry.components {
        if !d.divisor_spectra.contains_key(i) {
            out.push(format!("divisor_spectra: missing component {i}"));
        }
    }
    for (label, entries) in &d.point_spectra {
        let Some(pt) = d.geometry.point(label) else {
            out.push(format!("point_spectra[{label}]: unknown point label"));
            continue;
        };
        let (Some(sp_i), Some(sp_j)) = (
            d.divisor_spectra.get(&pt.i),
            d.divisor_spectra.get(&pt.j),
        ) else {
            continue;
        };
        let mut marg_i: BTreeMap<SpectrumKey, u64> = BTreeMap::new();
        let mut marg_j: BTreeMap<SpectrumKey, u64> = BTreeMap::new();
        let mut total: u64 = 0;
        for e in entries {
            total += e.r as u64;
            *marg_i
                .entry((e.u_i.0, e.u_i.1.re, e.u_i.1.im))
                .or_insert(0) += e.r as u64;
            *marg_j
                .entry((e.u_j.0, e.u_j.1.re, e.u_j.1.im))
                .or_insert(0) += e.r as u64;
        }
        check_point_tables(
            label,
            pt,
            total,
            d.rank,
            &marg_i,
            &marg_j,
            &marginal_of_spectrum(sp_i),
            &marginal_of_spectrum(sp_j),
            &mut out,
        );
    }
    out
}

type LsKey = (Rat, Rat, Rat);

fn ls_marginal(sp: &[LsKmsPoint]) -> BTreeMap<LsKey, u64> {
    let mut m = BTreeMap::new();
    for p in sp {
        *m.entry((p.b, p.omega.mu.re, p.omega.mu.im)).or_insert(0) += p.r as u64;
    }
    m
}

/// Validate a filtered-local-system table; same shape of checks as
/// `validate_flat` minus the weight-range condition (filtration indices
/// are unconstrained reals).
pub fn validate_ls(d: &FilteredLocalSystemData) -> ValidationReport {
    let mut out = Vec::new();
    validate_geometry(&d.geometry, &mut out);
    if d.rank < 1 {
        out.push(String::from("rank: must be >= 1"));
    }
    for (i, sp) in &d.divisor_spectra {
        if !d.geometry.components.contains(i) {
            out.push(format!("divisor_spectra[{i}]: unknown component"));
            continue;
        }
        let total: u64 = sp.iter().map(|p| p.r as u64).sum();
        if total != d.rank as u64 {
            out.push(format!(
                "divisor_spectra[{i}]: rank sum {total} != rank {}",
                d.rank
            ));
        }
        for (n, p) in sp.iter().enumerate() {
            if p.r < 1 {
                out.push(format!("divisor_spectra[{i}][{n}].r: must be >= 1"));
            }
            if p.omega.mu.re < Rat::zero() || p.omega.mu.re >= Rat::new(1, 1) {
                out.push(format!(
                    "divisor_spectra[{i}][{n}].omega: exponent Re mu = {} not in [0, 1)",
                    p.omega.mu.re
                ));
            }
        }
    }
    for i in &d.geometry.components {
        if !d.divisor_spectra.contains_key(i) {
            out.push(format!("divisor_spectra: missing component {i}"));
        }
    }
    for (label, entries) in &d.point_spectra {
        let Some(pt) = d.geometry.point(label) else {
            out.push(format!("point_spectra[{label}]: unknown point label"));
            continue;
        };
        let (Some(sp_i), Some(sp_j)) = (
            d.divisor_spectra.get(&pt.i),
            d.divisor_spectra.get(&pt.j),
        ) else {
            continue;
        };
        let mut marg_i: BTreeMap<LsKey, u64> = BTreeMap::new();
        let mut marg_j: BTreeMap<LsKey, u64> = BTreeMap::new();
        let mut total: u64 = 0;
        for e in entries {
            total += e.r as u64;
            *marg_i
                .entry((e.u_i.0, e.u_i.1.mu.re, e.u_i.1.mu.im))
                .or_insert(0) += e.r as u64;
            *marg_j
                .entry((e.u_j.0, e.u_j.1.mu.re, e.u_j.1.mu.im))
                .or_insert(0) += e.r as u64;
        }
        check_point_tables(
            label,
            pt,
            total,
            d.rank,
            &marg_i,
            &marg_j,
            &ls_marginal(sp_i),
            &ls_marginal(sp_j),
            &mut out,
        );
    }
    out
}

/// The unique ℤ-translate (a+n, α−n) of a KMS point with a+n ∈ (c−1, c].
pub fn canonical_kms(p: &KmsPoint, c: Rat) -> KmsPoint {
    let n = rat_floor(&(c - p.a));
    let nr = Rat::new(n, 1);
    KmsPoint {
        a: p.a + nr,
        alpha: CRat::new(p.alpha.re - nr, p.alpha.im),
        r: p.r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{crat_i, rat};
    use alloc::string::ToString;
    use alloc::vec;

    pub fn one_divisor_geometry() -> DivisorGeometry {
        DivisorGeometry {
            components: vec!["D1".to_string()],
            selfint: [("D1".to_string(), rat(0, 1))].into(),
            deg_l: [("D1".to_string(), rat(1, 1))].into(),
            points: vec![],
        }
    }

    fn minimal_flat(r: u32) -> ParabolicFlatData {
        ParabolicFlatData {
            lambda: crat_i(1, 1, 0, 1),
            rank: 1,
            geometry: one_divisor_geometry(),
            divisor_spectra: [(
                "D1".to_string(),
                vec![KmsPoint {
                    a: rat(0, 1),
                    alpha: crat_zero(),
                    r,
                }],
            )]
            .into(),
            point_spectra: BTreeMap::new(),
            truncation: BTreeMap::new(),
        }
    }

    #[test]
    fn minimal_valid() {
        assert!(validate_flat(&minimal_flat(1)).is_empty());
    }

    #[test]
    fn rank_sum_violation() {
        let report = validate_flat(&minimal_flat(2));
        assert_eq!(report.len(), 1);
        assert!(report[0].contains("rank sum"));
    }

    #[test]
    fn marginal_violation() {
        let mut g = one_divisor_geometry();
        g.components.push("D2".to_string());
        g.selfint.insert("D2".to_string(), rat(0, 1));
        g.deg_l.insert("D2".to_string(), rat(0, 1));
        g.points.push(IntersectionPoint {
            i: "D1".to_string(),
            j: "D2".to_string(),
            label: "P".to_string(),
            mult: 1,
        });
        let d = ParabolicFlatData {
            lambda: crat_i(1, 1, 0, 1),
            rank: 1,
            geometry: g,
            divisor_spectra: [
                (
                    "D1".to_string(),
                    vec![KmsPoint { a: rat(0, 1), alpha: crat_zero(), r: 1 }],
                ),
                (
                    "D2".to_string(),
                    vec![KmsPoint { a: rat(-1, 2), alpha: crat_zero(), r: 1 }],
                ),
            ]
            .into(),
            point_spectra: [(
                "P".to_string(),
                vec![PointKmsEntry {
                    u_i: (rat(0, 1), crat_zero()),
                    // wrong j-side weight: divisor table says -1/2
                    u_j: (rat(0, 1), crat_zero()),
                    r: 1,
                }],
            )]
            .into(),
            truncation: BTreeMap::new(),
        };
        let report = validate_flat(&d);
        assert_eq!(report.len(), 1, "{report:?}");
        assert!(report[0].contains("marginal"));
    }

    #[test]
    fn canonical_examples() {
        let p = KmsPoint { a: rat(0, 1), alpha: crat_zero(), r: 1 };
        assert_eq!(canonical_kms(&p, rat(0, 1)), p);

        // a = 5/4, c = 0: n = -2 places a + n = -3/4 in (-1, 0]
        let p = KmsPoint { a: rat(5, 4), alpha: crat_i(-1, 2, 0, 1), r: 1 };
        let q = canonical_kms(&p, rat(0, 1));
        assert_eq!(q.a, rat(-3, 4));
        assert_eq!(q.alpha, crat_i(3, 2, 0, 1));

        // a = -5/2, c = 1/2: n = 3 places a + n = 1/2 = c in (-1/2, 1/2]
        let p = KmsPoint { a: rat(-5, 2), alpha: crat_i(3, 1, 0, 1), r: 1 };
        let q = canonical_kms(&p, rat(1, 2));
        assert_eq!(q.a, rat(1, 2));
        assert_eq!(q.alpha, crat_i(0, 1, 0, 1));
    }

    #[test]
    fn canonical_idempotent_equivariant() {
        let p = KmsPoint { a: rat(7, 3), alpha: crat_i(1, 5, 2, 7), r: 3 };
        let c = rat(-1, 3);
        let q = canonical_kms(&p, c);
        assert_eq!(canonical_kms(&q, c), q);
        for n in -3i128..=3 {
            let shifted = KmsPoint {
                a: p.a + rat(n, 1),
                alpha: CRat::new(p.alpha.re - rat(n, 1), p.alpha.im),
                r: p.r,
            };
            assert_eq!(canonical_kms(&shifted, c), q);
        }
        // a + Re alpha is preserved
        assert_eq!(q.a + q.alpha.re, p.a + p.alpha.re);
    }
}
