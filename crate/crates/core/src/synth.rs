//! Synthetic spectrum tables: seeded random generators for consistent
//! filtered-local-system data (point marginals agreeing with the divisor
//! tables by construction) and a few small named fixtures. Used by the
//! randomized identity checks and by the scan pipelines.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::exact::{crat, rat, CRat, Rat};
use crate::pardata::{
    DivisorGeometry, FilteredLocalSystemData, IntersectionPoint, LsKmsPoint, LsPointEntry,
    UnitExp,
};

fn random_rat(rng: &mut impl Rng, lo: i128, hi: i128, max_den: i128) -> Rat {
    let den = rng.gen_range(1..=max_den);
    let num = rng.gen_range(lo * den..=hi * den);
    Rat::new(num, den)
}

/// Random μ with 0 ≤ Re μ < 1 and a small imaginary part, in exponent
/// form ω = exp(−2πiμ).
fn random_mu(rng: &mut impl Rng) -> CRat {
    let den = rng.gen_range(1..=12i128);
    let re = Rat::new(rng.gen_range(0..den), den);
    let im = random_rat(rng, -1, 1, 8);
    crat(re, im)
}

/// Random partition of `rank` into at most `rank` positive parts.
fn random_partition(rng: &mut impl Rng, rank: u32) -> Vec<u32> {
    let mut left = rank;
    let mut parts = Vec::new();
    while left > 0 {
        let p = rng.gen_range(1..=left);
        parts.push(p);
        left -= p;
    }
    parts
}

/// Joint table whose marginals reproduce the two given spectra exactly:
/// the northwest-corner transport, consuming ranks greedily.
fn northwest_corner(
    si: &[LsKmsPoint],
    sj: &[LsKmsPoint],
) -> Vec<LsPointEntry> {
    let mut out = Vec::new();
    let mut ii = 0;
    let mut jj = 0;
    let mut ri = si.first().map_or(0, |p| p.r);
    let mut rj = sj.first().map_or(0, |p| p.r);
    while ii < si.len() && jj < sj.len() {
        let take = ri.min(rj);
        if take > 0 {
            out.push(LsPointEntry {
                u_i: (si[ii].b, si[ii].omega),
                u_j: (sj[jj].b, sj[jj].omega),
                r: take,
            });
        }
        ri -= take;
        rj -= take;
        if ri == 0 {
            ii += 1;
            ri = si.get(ii).map_or(0, |p| p.r);
        }
        if rj == 0 {
            jj += 1;
            rj = sj.get(jj).map_or(0, |p| p.r);
        }
    }
    out
}

/// Random consistent filtered-local-system tables: `n_divisors`
/// components in a chain with one intersection point between consecutive
/// ones; every point table has marginals matching the divisor spectra.
pub fn random_ls(
    rng: &mut impl Rng,
    rank: u32,
    n_divisors: usize,
) -> FilteredLocalSystemData {
    assert!(rank >= 1 && n_divisors >= 1);
    let components: Vec<String> = (1..=n_divisors).map(|k| format!("D{k}")).collect();
    let mut selfint = BTreeMap::new();
    let mut deg_l = BTreeMap::new();
    for comp in &components {
        selfint.insert(comp.clone(), random_rat(rng, -2, 2, 2));
        deg_l.insert(comp.clone(), random_rat(rng, 0, 3, 2));
    }
    let mut points = Vec::new();
    for k in 0..n_divisors.saturating_sub(1) {
        points.push(IntersectionPoint {
            i: components[k].clone(),
            j: components[k + 1].clone(),
            label: format!("P{}", k + 1),
            mult: rng.gen_range(1..=2),
        });
    }
    let geometry = DivisorGeometry {
        components: components.clone(),
        selfint,
        deg_l,
        points,
    };

    let mut divisor_spectra = BTreeMap::new();
    for comp in &components {
        let parts = random_partition(rng, rank);
        let sp: Vec<LsKmsPoint> = parts
            .into_iter()
            .map(|r| LsKmsPoint {
                b: random_rat(rng, -1, 1, 12),
                omega: UnitExp::new(random_mu(rng)),
                r,
            })
            .collect();
        divisor_spectra.insert(comp.clone(), sp);
    }

    let mut point_spectra = BTreeMap::new();
    for pt in &geometry.points {
        let entries = northwest_corner(&divisor_spectra[&pt.i], &divisor_spectra[&pt.j]);
        point_spectra.insert(pt.label.clone(), entries);
    }

    FilteredLocalSystemData {
        rank,
        geometry,
        divisor_spectra,
        point_spectra,
    }
}

/// Two rational curves meeting in one point, trivial self-intersections:
/// the rank-1 local system with filtration indices 1/2 and 1/3 has
/// par-ch₂ = 1/6.
pub fn two_divisor_rank1_ls() -> FilteredLocalSystemData {
    let components = vec!["D1".to_string(), "D2".to_string()];
    let geometry = DivisorGeometry {
        components: components.clone(),
        selfint: [
            ("D1".to_string(), rat(0, 1)),
            ("D2".to_string(), rat(0, 1)),
        ]
        .into(),
        deg_l: [
            ("D1".to_string(), rat(1, 1)),
            ("D2".to_string(), rat(1, 1)),
        ]
        .into(),
        points: vec![IntersectionPoint {
            i: "D1".to_string(),
            j: "D2".to_string(),
            label: "P".to_string(),
            mult: 1,
        }],
    };
    let b = [rat(1, 2), rat(1, 3)];
    let divisor_spectra = [
        (
            "D1".to_string(),
            vec![LsKmsPoint {
                b: b[0],
                omega: UnitExp::one(),
                r: 1,
            }],
        ),
        (
            "D2".to_string(),
            vec![LsKmsPoint {
                b: b[1],
                omega: UnitExp::one(),
                r: 1,
            }],
        ),
    ]
    .into();
    let point_spectra = [(
        "P".to_string(),
        vec![LsPointEntry {
            u_i: (b[0], UnitExp::one()),
            u_j: (b[1], UnitExp::one()),
            r: 1,
        }],
    )]
    .into();
    FilteredLocalSystemData {
        rank: 1,
        geometry,
        divisor_spectra,
        point_spectra,
    }
}
