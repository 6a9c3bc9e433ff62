//! The correspondence between filtered local systems and regular filtered
//! flat data at a puncture: unipotent logarithm of the monodromy,
//! residue-exponent branch selection, truncation integers, and the exact
//! table-level transport of KMS spectra.
//!
//! Matrix-level operations work in floating point on matrices of size ≤ 8
//! (the local models); the table-level transport `kms_table_transport` is
//! exact, with monodromy eigenvalues carried in exponent form
//! ω = exp(−2πi·μ).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::cmat::{CMat, C64};
use crate::exact::{rat_floor, CRat, Rat};
use crate::pardata::{
    validate_ls, FilteredLocalSystemData, KmsPoint, ParabolicFlatData, PointKmsEntry,
    UnitExp, ValidationReport,
};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Monodromy of a local system around one puncture, together with a
/// filtration weight per basis vector. The basis must be compatible with
/// the generalized eigendecomposition of `m`: each basis vector lies in a
/// single generalized eigenspace.
#[derive(Clone, Debug)]
pub struct MonodromyDatum {
    pub m: CMat,
    pub filtration: Vec<f64>,
}

/// One graded piece of the flat-side local datum: the basis vectors it
/// contains, their weights a = b − Re α + n, the residue eigenvalue
/// α − n, and the nilpotent block induced by N.
#[derive(Clone, Debug)]
pub struct FlatGradedPiece {
    pub residue_eigenvalue: C64,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub nilpotent: CMat,
}

/// Flat-side local datum produced by `phi_local`: per-vector weights in
/// (c − 1, c], residue data per graded piece, and the truncation c.
#[derive(Clone, Debug)]
pub struct FlatLocalDatum {
    pub c: f64,
    pub weights: Vec<f64>,
    pub pieces: Vec<FlatGradedPiece>,
}

/// Result of the multiplicative Jordan decomposition M = M^s·M^u.
#[derive(Clone, Debug)]
pub struct UnipotentLogReport {
    /// Eigenvalue ω of the semisimple part together with a basis of the
    /// corresponding generalized eigenspace.
    pub eigen: Vec<(C64, Vec<Vec<C64>>)>,
    pub semisimple: CMat,
    pub unipotent: CMat,
    /// N = −(2πi)⁻¹·log M^u, nilpotent.
    pub n: CMat,
}

fn frob_norm(m: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..m.n {
        for j in 0..m.n {
            s += m[(i, j)].norm_sqr();
        }
    }
    libm::sqrt(s)
}

/// Characteristic polynomial coefficients of M, monic:
/// x^n + c[n−1]x^{n−1} + … + c[0], by the Faddeev–LeVerrier recursion.
fn char_poly(m: &CMat) -> Vec<C64> {
    let n = m.n;
    let mut c = alloc::vec![C64::new(0.0, 0.0); n];
    let mut mk = CMat::identity(n);
    for k in 1..=n {
        mk = m.mul(&mk);
        let ck = mk.trace() * C64::new(-1.0 / k as f64, 0.0);
        c[n - k] = ck;
        for i in 0..n {
            mk[(i, i)] += ck;
        }
    }
    c
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len();
    let eval = |x: C64| -> C64 {
        let mut p = C64::new(1.0, 0.0);
        for k in (0..n).rev() {
            p = p * x + coeffs[k];
        }
        p
    };
    // radius bound keeps the initial guesses on a relevant scale
    let bound = 1.0 + coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut xs: Vec<C64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) * C64::new(bound, 0.0))
        .collect();
    for _ in 0..300 {
        let mut shift = 0.0f64;
        for i in 0..n {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= xs[i] - xs[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let d = eval(xs[i]) / denom;
            xs[i] -= d;
            shift = shift.max(d.norm());
        }
        if shift < 1e-15 * bound {
            break;
        }
    }
    xs
}

/// Group numerically equal roots; returns (representative, multiplicity).
fn cluster_roots(mut roots: Vec<C64>, scale: f64) -> Vec<(C64, usize)> {
    let tol = 1e-6 * scale.max(1.0);
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    roots.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    for r in roots {
        if let Some((rep, cnt)) = clusters
            .iter_mut()
            .find(|(rep, _)| (*rep - r).norm() < tol)
        {
            // running mean keeps the representative centred
            let k = *cnt as f64;
            *rep = (*rep * C64::new(k, 0.0) + r) / C64::new(k + 1.0, 0.0);
            *cnt += 1;
        } else {
            clusters.push((r, 1));
        }
    }
    clusters
}

/// Hermite interpolation evaluated on a matrix: nodes are cluster
/// representatives repeated to multiplicity, target values are per-cluster
/// constants (all derivative conditions vanish, since the interpolated
/// function is locally constant near each cluster).
fn hermite_on_matrix(m: &CMat, clusters: &[(C64, usize)], values: &[C64]) -> CMat {
    let mut nodes: Vec<C64> = Vec::new();
    let mut fvals: Vec<C64> = Vec::new();
    let mut which: Vec<usize> = Vec::new();
    for (ci, (z, mult)) in clusters.iter().enumerate() {
        for _ in 0..*mult {
            nodes.push(*z);
            fvals.push(values[ci]);
            which.push(ci);
        }
    }
    let n = nodes.len();
    // divided differences; repeated nodes inside one cluster contribute
    // zero because every prescribed derivative is zero
    let mut dd: Vec<Vec<C64>> = alloc::vec![alloc::vec![C64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        dd[i][0] = fvals[i];
    }
    for k in 1..n {
        for i in 0..n - k {
            if which[i] == which[i + k] {
                dd[i][k] = C64::new(0.0, 0.0);
            } else {
                dd[i][k] = (dd[i + 1][k - 1] - dd[i][k - 1]) / (nodes[i + k] - nodes[i]);
            }
        }
    }
    // Newton form on the matrix argument
    let dim = m.n;
    let mut acc = CMat::identity(dim).scale(dd[0][0]);
    let mut prod = CMat::identity(dim);
    for k in 1..n {
        let mut shifted = m.clone();
        for i in 0..dim {
            shifted[(i, i)] -= nodes[k - 1];
        }
        prod = prod.mul(&shifted);
        acc = acc.add(&prod.scale(dd[0][k]));
    }
    acc
}

/// Orthonormal basis of the column space of `p`, kept only above a
/// numerical rank tolerance.
fn column_space(p: &CMat, tol: f64) -> Vec<Vec<C64>> {
    let n = p.n;
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for j in 0..n {
        let mut v: Vec<C64> = (0..n).map(|i| p[(i, j)]).collect();
        for b in &basis {
            let dot: C64 = b
                .iter()
                .zip(&v)
                .map(|(x, y)| x.conj() * *y)
                .sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * *bi;
            }
        }
        let nrm = libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum());
        if nrm > tol {
            for x in v.iter_mut() {
                *x /= C64::new(nrm, 0.0);
            }
            basis.push(v);
        }
    }
    basis
}

/// Multiplicative Jordan decomposition M = M^s·M^u and the nilpotent
/// logarithm N = −(2πi)⁻¹·Σ_{k≥1}(−1)^{k+1}(M^u − I)^k/k (finite series).
pub fn unipotent_log(m: &CMat) -> Result<UnipotentLogReport, &'static str> {
    let n = m.n;
    if n == 0 || n > 8 {
        return Err("matrix size must be between 1 and 8");
    }
    let scale = frob_norm(m);
    let roots = poly_roots(&char_poly(m));
    if roots.iter().any(|r| r.norm() < 1e-10 * scale.max(1.0)) {
        return Err("singular monodromy matrix");
    }
    let mut clusters = cluster_roots(roots, scale);

    // refine each representative through its spectral projector:
    // tr(P_ω·M) = mult·ω exactly (the nilpotent block is traceless),
    // which repairs the limited root accuracy at multiple eigenvalues
    for ci in 0..clusters.len() {
        let ind: Vec<C64> = (0..clusters.len())
            .map(|k| {
                if k == ci {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let proj = hermite_on_matrix(m, &clusters, &ind);
        let mult = clusters[ci].1 as f64;
        clusters[ci].0 = proj.mul(m).trace() / C64::new(mult, 0.0);
    }

    // semisimple part: interpolate the locally-constant eigenvalue map
    let values: Vec<C64> = clusters.iter().map(|(z, _)| *z).collect();
    let semisimple = hermite_on_matrix(m, &clusters, &values);
    let unipotent = semisimple
        .inverse()
        .ok_or("singular monodromy matrix")?
        .mul(m);

    // N through the finite logarithm series of the unipotent part
    let mut x = unipotent.clone();
    for i in 0..n {
        x[(i, i)] -= C64::new(1.0, 0.0);
    }
    let mut logu = CMat::zeros(n);
    let mut pw = CMat::identity(n);
    for k in 1..n {
        pw = pw.mul(&x);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        logu = logu.add(&pw.scale(C64::new(sign / k as f64, 0.0)));
    }
    // −(2πi)⁻¹ = i/(2π)
    let nil = logu.scale(C64::new(0.0, 1.0 / TWO_PI));

    // spectral projectors give the generalized eigenspace bases
    let mut eigen = Vec::with_capacity(clusters.len());
    for (ci, (omega, mult)) in clusters.iter().enumerate() {
        let ind: Vec<C64> = (0..clusters.len())
            .map(|k| {
                if k == ci {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let proj = hermite_on_matrix(m, &clusters, &ind);
        let basis = column_space(&proj, 1e-7 * scale.max(1.0));
        if basis.len() != *mult {
            return Err("generalized eigenspace extraction failed");
        }
        eigen.push((*omega, basis));
    }

    Ok(UnipotentLogReport {
        eigen,
        semisimple,
        unipotent,
        n: nil,
    })
}

/// The unique α with exp(−2πiα) = ω and 0 ≤ Re α < 1.
pub fn alpha_of(omega: C64) -> Result<C64, &'static str> {
    if omega.norm() == 0.0 {
        return Err("omega must be nonzero");
    }
    let phi = omega.arg(); // in (−π, π]
    let rho = omega.norm();
    let mut re = -phi / TWO_PI;
    let im = libm::log(rho) / TWO_PI;
    re -= libm::floor(re);
    Ok(C64::new(re, im))
}

/// The inverse direction of the KMS correspondence on one spectrum point:
/// (a, α) ↦ (b, ω) = (a + Re α, exp(−2πiα)). Constant on ℤ-orbits
/// (a + n, α − n).
pub fn phi_inverse_kms(a: f64, alpha: C64) -> (f64, C64) {
    let b = a + alpha.re;
    let omega = (C64::new(0.0, -TWO_PI) * alpha).exp();
    (b, omega)
}

fn cluster_of_vector(
    eigen: &[(C64, Vec<Vec<C64>>)],
    k: usize,
    dim: usize,
) -> Option<usize> {
    // e_k lies in the generalized eigenspace iff projecting it onto the
    // basis reproduces it
    for (ci, (_, basis)) in eigen.iter().enumerate() {
        let mut resid: Vec<C64> = (0..dim)
            .map(|i| {
                if i == k {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        for b in basis {
            let dot = b[k].conj();
            for (ri, bi) in resid.iter_mut().zip(b) {
                *ri -= dot * *bi;
            }
        }
        let nrm: f64 = resid.iter().map(|x| x.norm_sqr()).sum();
        if libm::sqrt(nrm) < 1e-7 {
            return Some(ci);
        }
    }
    None
}

/// Validate a monodromy datum: size, invertibility, and compatibility of
/// the basis with the generalized eigendecomposition.
pub fn validate_monodromy(datum: &MonodromyDatum) -> ValidationReport {
    let mut out = Vec::new();
    let dim = datum.m.n;
    if datum.filtration.len() != dim {
        out.push(format!(
            "filtration length {} != matrix size {}",
            datum.filtration.len(),
            dim
        ));
        return out;
    }
    match unipotent_log(&datum.m) {
        Err(e) => out.push(String::from(e)),
        Ok(rep) => {
            for k in 0..dim {
                if cluster_of_vector(&rep.eigen, k, dim).is_none() {
                    out.push(format!(
                        "basis vector {k} does not lie in a single generalized eigenspace"
                    ));
                }
            }
        }
    }
    out
}

/// The local correspondence at one puncture: selects the residue branch
/// α = alpha_of(ω), the truncation integer n with b − Re α + n ∈ (c−1, c],
/// and groups the outcome into graded pieces carrying the nilpotent part.
pub fn phi_local(datum: &MonodromyDatum, c: f64) -> Result<FlatLocalDatum, ValidationReport> {
    let report = validate_monodromy(datum);
    if !report.is_empty() {
        return Err(report);
    }
    let dim = datum.m.n;
    let rep = unipotent_log(&datum.m).expect("validated above");

    let mut weights = alloc::vec![0.0f64; dim];
    // group key: (cluster index, truncation integer n)
    let mut groups: BTreeMap<(usize, i64), Vec<usize>> = BTreeMap::new();
    for k in 0..dim {
        let ci = cluster_of_vector(&rep.eigen, k, dim).expect("validated above");
        let alpha = alpha_of(rep.eigen[ci].0).expect("invertible");
        let b = datum.filtration[k];
        // unique n with b − Re α + n ∈ (c − 1, c]
        let n = libm::floor(c - b + alpha.re + 1e-12) as i64;
        weights[k] = b - alpha.re + n as f64;
        groups.entry((ci, n)).or_default().push(k);
    }

    let mut pieces = Vec::with_capacity(groups.len());
    for ((ci, n), indices) in groups {
        let alpha = alpha_of(rep.eigen[ci].0).expect("invertible");
        let sz = indices.len();
        let mut nil = CMat::zeros(sz);
        for (bi, &i) in indices.iter().enumerate() {
            for (bj, &j) in indices.iter().enumerate() {
                nil[(bi, bj)] = rep.n[(i, j)];
            }
        }
        pieces.push(FlatGradedPiece {
            residue_eigenvalue: alpha - C64::new(n as f64, 0.0),
            weights: indices.iter().map(|&k| weights[k]).collect(),
            indices,
            nilpotent: nil,
        });
    }

    Ok(FlatLocalDatum { c, weights, pieces })
}

/// Exact one-entry transport: given the filtration index b, the eigenvalue
/// exponent μ (ω = exp(−2πiμ), 0 ≤ Re μ < 1), and the truncation c,
/// produce (a, α) with a ∈ (c − 1, c] and Re(λ⁻¹α) + a = b exactly.
fn transport_entry(b: Rat, mu: &CRat, c: Rat, lambda: &CRat) -> (Rat, CRat) {
    let n = Rat::new(rat_floor(&(c - b + mu.re)), 1);
    let a = b - mu.re + n;
    // λ = 1 branch: α₁ = μ − n; general λ scales it so that
    // Re(λ⁻¹α) = Re α₁ is preserved
    let alpha1 = CRat::new(mu.re - n, mu.im);
    let alpha = *lambda * alpha1;
    (a, alpha)
}

/// Transport a filtered local system's KMS tables to the flat side for the
/// λ-connection bookkeeping, divisor by divisor and point by point;
/// preserves every graded rank and the quantities Re(λ⁻¹α) + a = b.
pub fn kms_table_transport(
    ls: &FilteredLocalSystemData,
    lambda: CRat,
    truncation: &BTreeMap<String, Rat>,
) -> Result<ParabolicFlatData, ValidationReport> {
    if lambda == CRat::zero() {
        return Err(alloc::vec![String::from("lambda must be nonzero")]);
    }
    let report = validate_ls(ls);
    if !report.is_empty() {
        return Err(report);
    }
    let trunc_of = |i: &str| truncation.get(i).copied().unwrap_or_else(Rat::zero);

    let mut divisor_spectra = BTreeMap::new();
    for (i, sp) in &ls.divisor_spectra {
        let c = trunc_of(i);
        let entries: Vec<KmsPoint> = sp
            .iter()
            .map(|p| {
                let (a, alpha) = transport_entry(p.b, &p.omega.mu, c, &lambda);
                KmsPoint { a, alpha, r: p.r }
            })
            .collect();
        divisor_spectra.insert(i.clone(), entries);
    }

    let mut point_spectra = BTreeMap::new();
    for pt in &ls.geometry.points {
        let Some(entries) = ls.point_spectra.get(&pt.label) else {
            continue;
        };
        let ci = trunc_of(&pt.i);
        let cj = trunc_of(&pt.j);
        let mapped: Vec<PointKmsEntry> = entries
            .iter()
            .map(|e| {
                let (ai, alpha_i) = transport_entry(e.u_i.0, &e.u_i.1.mu, ci, &lambda);
                let (aj, alpha_j) = transport_entry(e.u_j.0, &e.u_j.1.mu, cj, &lambda);
                PointKmsEntry {
                    u_i: (ai, alpha_i),
                    u_j: (aj, alpha_j),
                    r: e.r,
                }
            })
            .collect();
        point_spectra.insert(pt.label.clone(), mapped);
    }

    Ok(ParabolicFlatData {
        lambda,
        rank: ls.rank,
        geometry: ls.geometry.clone(),
        divisor_spectra,
        point_spectra,
        truncation: truncation.clone(),
    })
}

/// The rescaling functor between λ-connections: keeps weights and ranks,
/// scales every residue eigenvalue by λ₂/λ₁.
pub fn lambda_rescale(d: &ParabolicFlatData, new_lambda: CRat) -> ParabolicFlatData {
    let factor = new_lambda * crate::exact::crat_inv(&d.lambda);
    let mut out = d.clone();
    out.lambda = new_lambda;
    for sp in out.divisor_spectra.values_mut() {
        for p in sp.iter_mut() {
            p.alpha = factor * p.alpha;
        }
    }
    for entries in out.point_spectra.values_mut() {
        for e in entries.iter_mut() {
            e.u_i.1 = factor * e.u_i.1;
            e.u_j.1 = factor * e.u_j.1;
        }
    }
    out
}

/// Exact inverse transport on one spectrum point: (a, α) ↦ (b, μ) with
/// ω = exp(−2πiμ), using the λ-bookkeeping of `kms_table_transport`.
pub fn phi_inverse_kms_exact(a: Rat, alpha: &CRat, lambda: &CRat) -> (Rat, UnitExp) {
    let re1 = crate::charnum::re_lambda_inv(lambda, alpha);
    let im1 = crate::charnum::im_lambda_inv(lambda, alpha);
    let b = a + re1;
    let shift = Rat::new(rat_floor(&re1), 1);
    (b, UnitExp::new(CRat::new(re1 - shift, im1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{crat, crat_i, rat};
    use crate::synth::two_divisor_rank1_ls;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mat2(rows: [[C64; 2]; 2]) -> CMat {
        let mut m = CMat::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = rows[i][j];
            }
        }
        m
    }

    fn exp_nilpotent(m: &CMat) -> CMat {
        // exp of a nilpotent matrix: finite series
        let n = m.n;
        let mut acc = CMat::identity(n);
        let mut pw = CMat::identity(n);
        let mut fact = 1.0;
        for k in 1..n {
            pw = pw.mul(m);
            fact *= k as f64;
            acc = acc.add(&pw.scale(C64::new(1.0 / fact, 0.0)));
        }
        acc
    }

    #[test]
    fn unipotent_log_identity() {
        let rep = unipotent_log(&CMat::identity(2)).unwrap();
        assert_eq!(rep.eigen.len(), 1);
        assert!((rep.eigen[0].0 - c(1.0, 0.0)).norm() < 1e-10);
        assert!(frob_norm(&rep.n) < 1e-12);
    }

    #[test]
    fn unipotent_log_jordan_block() {
        let m = mat2([[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
        let rep = unipotent_log(&m).unwrap();
        // N = −(2πi)⁻¹[[0,1],[0,0]] = (i/2π)[[0,1],[0,0]]
        let expected = c(0.0, 1.0 / TWO_PI);
        assert!((rep.n[(0, 1)] - expected).norm() < 1e-12, "{:?}", rep.n[(0, 1)]);
        assert!(rep.n[(0, 0)].norm() + rep.n[(1, 0)].norm() + rep.n[(1, 1)].norm() < 1e-12);
        // exp(2πi·(−N)) reproduces M^u
        let back = exp_nilpotent(&rep.n.scale(c(0.0, -TWO_PI)));
        assert!(frob_norm(&back.sub(&rep.unipotent)) < 1e-10);
    }

    #[test]
    fn unipotent_log_scaled_jordan() {
        let m = mat2([[c(-1.0, 0.0), c(-1.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        let rep = unipotent_log(&m).unwrap();
        assert_eq!(rep.eigen.len(), 1);
        assert!((rep.eigen[0].0 - c(-1.0, 0.0)).norm() < 1e-8);
        let expected = c(0.0, 1.0 / TWO_PI);
        assert!((rep.n[(0, 1)] - expected).norm() < 1e-10);
    }

    #[test]
    fn unipotent_log_mixed_spectrum() {
        // distinct eigenvalues 2 and i with a coupling entry
        let m = mat2([[c(2.0, 0.0), c(3.0, 0.5)], [c(0.0, 0.0), c(0.0, 1.0)]]);
        let rep = unipotent_log(&m).unwrap();
        assert_eq!(rep.eigen.len(), 2);
        assert!(frob_norm(&rep.n) < 1e-9);
        let prod = rep.semisimple.mul(&rep.unipotent);
        assert!(frob_norm(&prod.sub(&m)) < 1e-9);
    }

    #[test]
    fn unipotent_log_rejects_singular() {
        let m = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(unipotent_log(&m).is_err());
    }

    #[test]
    fn alpha_of_examples() {
        assert!((alpha_of(c(1.0, 0.0)).unwrap()).norm() < 1e-14);
        assert!((alpha_of(c(-1.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-14);
        let rho = libm::exp(-TWO_PI);
        let a = alpha_of(c(rho, 0.0)).unwrap();
        assert!((a - c(0.0, -1.0)).norm() < 1e-12, "{a:?}");
        // defining relation holds on random inputs
        for k in 1..40 {
            let w = c(0.3 + 0.1 * k as f64, -1.0 + 0.07 * k as f64);
            let a = alpha_of(w).unwrap();
            assert!(a.re >= 0.0 && a.re < 1.0);
            let back = (c(0.0, -TWO_PI) * a).exp();
            assert!((back - w).norm() < 1e-10 * w.norm());
        }
    }

    #[test]
    fn phi_local_examples() {
        // b = 0, ω = 1, c = 0
        let datum = MonodromyDatum {
            m: CMat::identity(1),
            filtration: alloc::vec![0.0],
        };
        let out = phi_local(&datum, 0.0).unwrap();
        assert!(out.weights[0].abs() < 1e-12);
        assert!(out.pieces[0].residue_eigenvalue.norm() < 1e-12);

        // b = 0.75, ω = −1, c = 0 → a = −0.75, residue 3/2
        let mut m = CMat::zeros(1);
        m[(0, 0)] = c(-1.0, 0.0);
        let datum = MonodromyDatum {
            m,
            filtration: alloc::vec![0.75],
        };
        let out = phi_local(&datum, 0.0).unwrap();
        assert!((out.weights[0] + 0.75).abs() < 1e-12, "{}", out.weights[0]);
        assert!(
            (out.pieces[0].residue_eigenvalue - c(1.5, 0.0)).norm() < 1e-12,
            "{:?}",
            out.pieces[0].residue_eigenvalue
        );

        // b = 0.25, ω = 1, c = 0.5 → a = 0.25, residue 0
        let datum = MonodromyDatum {
            m: CMat::identity(1),
            filtration: alloc::vec![0.25],
        };
        let out = phi_local(&datum, 0.5).unwrap();
        assert!((out.weights[0] - 0.25).abs() < 1e-12);
        assert!(out.pieces[0].residue_eigenvalue.norm() < 1e-12);
    }

    #[test]
    fn phi_local_weights_in_window() {
        let m = mat2([[c(-1.0, 0.0), c(-1.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        let datum = MonodromyDatum {
            m,
            filtration: alloc::vec![0.75, -1.3],
        };
        for &cc in &[0.0, 0.4, -0.7, 1.2] {
            let out = phi_local(&datum, cc).unwrap();
            for &a in &out.weights {
                assert!(a > cc - 1.0 - 1e-9 && a <= cc + 1e-9, "a={a} c={cc}");
            }
        }
    }

    #[test]
    fn phi_roundtrip() {
        let m = mat2([[c(-1.0, 0.0), c(-1.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        let datum = MonodromyDatum {
            m,
            filtration: alloc::vec![0.75, -0.25],
        };
        let out = phi_local(&datum, 0.0).unwrap();
        for piece in &out.pieces {
            for (&k, &a) in piece.indices.iter().zip(&piece.weights) {
                let (b, omega) = phi_inverse_kms(a, piece.residue_eigenvalue);
                assert!((b - datum.filtration[k]).abs() < 1e-12);
                assert!((omega - c(-1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phi_inverse_orbit_invariance() {
        let (b1, w1) = phi_inverse_kms(0.25, c(0.5, 0.0));
        assert!((b1 - 0.75).abs() < 1e-14);
        assert!((w1 - c(-1.0, 0.0)).norm() < 1e-12);
        let (b2, w2) = phi_inverse_kms(1.25, c(-0.5, 0.0));
        assert!((b1 - b2).abs() < 1e-14);
        assert!((w1 - w2).norm() < 1e-12);
    }

    #[test]
    fn transport_entry_preserves_delta() {
        let lambda = crat_i(1, 1, 1, 2); // λ = 1 + i/2
        let cases = [
            (rat(1, 2), crat_i(1, 3, -2, 5)),
            (rat(-5, 4), crat_i(7, 8, 1, 7)),
            (rat(3, 1), crat_i(0, 1, 0, 1)),
        ];
        for (b, mu) in cases {
            for &cval in &[rat(0, 1), rat(1, 2), rat(-3, 4)] {
                let (a, alpha) = transport_entry(b, &mu, cval, &lambda);
                assert!(a > cval - rat(1, 1) && a <= cval);
                assert_eq!(crate::charnum::re_lambda_inv(&lambda, &alpha) + a, b);
                // inverse recovers (b, μ)
                let (b2, ue) = phi_inverse_kms_exact(a, &alpha, &lambda);
                assert_eq!(b2, b);
                assert_eq!(ue.mu, mu);
            }
        }
    }

    #[test]
    fn table_transport_two_divisor_example() {
        let ls = two_divisor_rank1_ls();
        let report = crate::charnum::char_report_ls(&ls);
        let lambda = crat(rat(1, 1), rat(0, 1));
        let flat = kms_table_transport(&ls, lambda, &BTreeMap::new()).unwrap();
        let flat_report = crate::charnum::char_report_flat(&flat);
        assert_eq!(report.par_ch2, flat_report.par_ch2);
        assert_eq!(report.par_ch2, rat(1, 6));
        assert_eq!(report.c1_coeffs, flat_report.c1_coeffs);
    }

    #[test]
    fn table_transport_random_tables() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let lambda = crat_i(2, 1, -1, 3);
        for _ in 0..50 {
            let ls = crate::synth::random_ls(&mut rng, 4, 2);
            assert!(validate_ls(&ls).is_empty());
            let mut trunc = BTreeMap::new();
            for (k, comp) in ls.geometry.components.iter().enumerate() {
                trunc.insert(comp.clone(), rat(k as i128, 2));
            }
            let flat = kms_table_transport(&ls, lambda, &trunc).unwrap();
            assert!(crate::pardata::validate_flat(&flat).is_empty());
            let lsr = crate::charnum::char_report_ls(&ls);
            let fr = crate::charnum::char_report_flat(&flat);
            assert_eq!(lsr.c1_coeffs, fr.c1_coeffs);
            assert_eq!(lsr.par_deg, fr.par_deg);
            assert_eq!(lsr.par_ch2, fr.par_ch2);
        }
    }

    #[test]
    fn lambda_rescale_scales_residues() {
        let ls = two_divisor_rank1_ls();
        let l1 = crat(rat(1, 1), rat(0, 1));
        let l2 = crat_i(0, 1, 2, 1); // 2i
        let flat = kms_table_transport(&ls, l1, &BTreeMap::new()).unwrap();
        let scaled = lambda_rescale(&flat, l2);
        assert_eq!(scaled.lambda, l2);
        for (i, sp) in &flat.divisor_spectra {
            for (p, q) in sp.iter().zip(&scaled.divisor_spectra[i]) {
                assert_eq!(q.alpha, l2 * p.alpha);
                assert_eq!(q.a, p.a);
            }
        }
    }
}
