//! Weight filtrations of nilpotent residues and ε-perturbation of
//! parabolic weights (schemes (I) and (II)).
//!
//! Scheme (II) replaces each refined weight (a, k) by
//! φ(a,k) = a(ε,i) + k/m, where a(ε,i) = a′ − L with a′ the rounding of a
//! to the 1/m grid and L the rank-weighted average of the rounding
//! errors. Because the weight-filtration levels of each nilpotent block
//! are symmetric around zero, Σ φ·r = Σ a·r holds exactly and par-c₁ is
//! preserved on the nose.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::exact::{rat_ceil, rat_round_to_grid, CRat, Rat};
use crate::pardata::KmsPoint;
use crate::ratmat::{span_intersect, span_sum, RatMat};

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbError {
    NotNilpotent,
    SizeMismatch(String),
    BadTargets(String),
    GapTooSmall { gap: Rat, m: i128 },
}

impl core::fmt::Display for PerturbError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PerturbError::NotNilpotent => write!(f, "matrix is not nilpotent"),
            PerturbError::SizeMismatch(s) => write!(f, "size mismatch: {s}"),
            PerturbError::BadTargets(s) => write!(f, "bad targets: {s}"),
            PerturbError::GapTooSmall { gap, m } => {
                write!(f, "gap {gap} too small for m = {m} (need 10·rank/m < gap)")
            }
        }
    }
}

/// The weight filtration W of a nilpotent endomorphism: graded ranks per
/// level k and a basis of each W_k.
#[derive(Clone, Debug)]
pub struct WeightFiltration {
    /// (k, rank of Gr_k), only levels with nonzero rank, ascending in k.
    pub graded: Vec<(i32, u32)>,
    /// (k, basis of W_k), ascending in k, every level from the lowest
    /// nonzero one up to the top.
    pub levels: Vec<(i32, Vec<Vec<CRat>>)>,
}

/// The unique increasing filtration with N·W_k ⊂ W_{k−2} and
/// N^k: Gr_k ≅ Gr_{−k}, computed by the subspace formula
/// W_k = Σ_{j≥0} im(N^j) ∩ ker(N^{k+j+1}) over exact arithmetic.
pub fn weight_filtration(n_mat: &RatMat) -> Result<WeightFiltration, PerturbError> {
    assert_eq!(n_mat.rows, n_mat.cols);
    let size = n_mat.rows;
    if size == 0 {
        return Ok(WeightFiltration {
            graded: Vec::new(),
            levels: Vec::new(),
        });
    }
    if !n_mat.pow(size).is_zero() {
        return Err(PerturbError::NotNilpotent);
    }
    // powers, kernels, images
    let mut powers = Vec::with_capacity(size + 1);
    powers.push(RatMat::identity(size));
    for j in 1..=size {
        powers.push(powers[j - 1].mul(n_mat));
    }
    let kernels: Vec<Vec<Vec<CRat>>> = powers.iter().map(|p| p.kernel_basis()).collect();
    let images: Vec<Vec<Vec<CRat>>> = powers.iter().map(|p| p.col_space_basis()).collect();

    let kmax = size as i32;
    let mut levels = Vec::new();
    let mut prev_dim = 0usize;
    let mut graded = Vec::new();
    for k in -kmax..=kmax {
        let mut w: Vec<Vec<CRat>> = Vec::new();
        for j in 0..=size {
            let e = k + j as i32 + 1;
            if e <= 0 {
                continue;
            }
            let ker = if e as usize >= size {
                &kernels[size]
            } else {
                &kernels[e as usize]
            };
            let term = span_intersect(&images[j], ker);
            w = span_sum(&w, &term);
        }
        let dim = w.len();
        if dim > prev_dim {
            graded.push((k, (dim - prev_dim) as u32));
        }
        if dim > 0 {
            levels.push((k, w.clone()));
        }
        prev_dim = dim;
    }
    debug_assert_eq!(prev_dim, size);
    Ok(WeightFiltration { graded, levels })
}

/// True iff every nilpotent block vanishes (graded semisimple data).
pub fn graded_semisimple_check(blocks: &[RatMat]) -> bool {
    blocks.iter().all(|b| b.is_zero())
}

/// One entry of the refined spectrum: original weight `a`, weight level
/// `k`, rank of the (a, k) graded piece, and the residue eigenvalue
/// carried along unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedEntry {
    pub a: Rat,
    pub k: i32,
    pub r: u32,
    pub alpha: CRat,
}

/// Refined index set S̃ of one divisor, lexicographically ordered in
/// (a, k), together with the truncation c.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedSpectrum {
    pub c: Rat,
    pub entries: Vec<RefinedEntry>,
}

impl RefinedSpectrum {
    pub fn rank(&self) -> u32 {
        self.entries.iter().map(|e| e.r).sum()
    }
}

/// Split each (a, α, r) by the weight filtration of its nilpotent block.
pub fn refine(
    spectrum: &[KmsPoint],
    blocks: &[RatMat],
    c: Rat,
) -> Result<RefinedSpectrum, PerturbError> {
    if spectrum.len() != blocks.len() {
        return Err(PerturbError::SizeMismatch(format!(
            "{} spectrum entries vs {} blocks",
            spectrum.len(),
            blocks.len()
        )));
    }
    let mut entries = Vec::new();
    for (p, b) in spectrum.iter().zip(blocks) {
        if b.rows != p.r as usize {
            return Err(PerturbError::SizeMismatch(format!(
                "block size {} vs graded rank {}",
                b.rows, p.r
            )));
        }
        let wf = weight_filtration(b)?;
        for (k, r) in wf.graded {
            entries.push(RefinedEntry {
                a: p.a,
                k,
                r,
                alpha: p.alpha,
            });
        }
    }
    entries.sort_by(|x, y| (x.a, x.k).cmp(&(y.a, y.k)));
    Ok(RefinedSpectrum { c, entries })
}

/// Scheme (I): replace refined weights by explicit rational targets.
pub fn perturb_i(
    refined: &RefinedSpectrum,
    eps: Rat,
    targets: &[Rat],
) -> Result<Vec<(RefinedEntry, Rat)>, PerturbError> {
    if targets.len() != refined.entries.len() {
        return Err(PerturbError::BadTargets(format!(
            "{} targets for {} entries",
            targets.len(),
            refined.entries.len()
        )));
    }
    let rank = refined.rank();
    let bound = Rat::new(rank as i128, 1) * eps;
    for w in targets.windows(2) {
        if w[1] <= w[0] {
            return Err(PerturbError::BadTargets(String::from(
                "targets not strictly increasing",
            )));
        }
    }
    for (e, t) in refined.entries.iter().zip(targets) {
        if *t <= refined.c - Rat::new(1, 1) || *t > refined.c {
            return Err(PerturbError::BadTargets(format!(
                "target {t} outside ({} - 1, {}]",
                refined.c, refined.c
            )));
        }
        if (*t - e.a).abs() > bound {
            return Err(PerturbError::BadTargets(format!(
                "target {t} too far from weight {} (bound {bound})",
                e.a
            )));
        }
    }
    Ok(refined
        .entries
        .iter()
        .cloned()
        .zip(targets.iter().copied())
        .collect())
}

/// Scheme (II) output for one divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbPlan {
    pub m: i128,
    /// γ with all new weights in {c + γ + p/m}, γ ∈ (−1/m, 0].
    pub gamma: Rat,
    /// The averaged rounding error L(ε, i).
    pub l: Rat,
    /// (entry, new weight φ(a, k)).
    pub new_weights: Vec<(RefinedEntry, Rat)>,
    /// Spectrum gap and whether 10·rank/m < gap holds. Σφ·r = Σa·r is
    /// exact either way; the guard only protects ordering/stability.
    pub gap: Rat,
    pub gap_ok: bool,
    /// Whether the perturbed weights are strictly increasing in
    /// lexicographic (a, k). Implied by the gap guard.
    pub monotone: bool,
}

/// Minimal distance between consecutive distinct weights and from each
/// weight to the endpoints {c − 1, c}.
pub fn spectrum_gap(refined: &RefinedSpectrum) -> Rat {
    let mut distinct: Vec<Rat> = refined.entries.iter().map(|e| e.a).collect();
    distinct.dedup();
    if distinct.is_empty() {
        return Rat::new(1, 1);
    }
    let mut gap = distinct[0] - (refined.c - Rat::new(1, 1));
    let last = refined.c - *distinct.last().unwrap();
    if last < gap {
        gap = last;
    }
    for w in distinct.windows(2) {
        let d = w[1] - w[0];
        if d < gap {
            gap = d;
        }
    }
    gap
}

/// Scheme (II) with ε = 1/m. The gap guard 10·rank/m < gap is recorded
/// in the plan rather than enforced; use `perturb_ii_strict` to reject
/// undersized m.
pub fn perturb_ii(refined: &RefinedSpectrum, m: i128) -> Result<PerturbPlan, PerturbError> {
    assert!(m >= 1);
    let rank = refined.rank();
    let gap = spectrum_gap(refined);
    let gap_ok = Rat::new(10 * rank as i128, m) < gap;
    // per distinct weight a: rounding a' and graded rank r_a
    let mut l_num = Rat::zero();
    for e in &refined.entries {
        let a_prime = rat_round_to_grid(&e.a, m);
        l_num += (a_prime - e.a) * Rat::new(e.r as i128, 1);
    }
    let l = l_num / Rat::new(rank as i128, 1);

    let mut new_weights = Vec::new();
    for e in &refined.entries {
        let a_prime = rat_round_to_grid(&e.a, m);
        let a_eps = a_prime - l;
        let phi = a_eps + Rat::new(e.k as i128, m);
        new_weights.push((e.clone(), phi));
    }

    // closeness |φ − a| ≤ rank/m always holds with round-to-nearest
    let bound = Rat::new(rank as i128, m);
    for (e, phi) in &new_weights {
        assert!(
            (*phi - e.a).abs() <= bound,
            "perturbed weight drifted beyond rank·eps"
        );
    }
    let monotone = new_weights.windows(2).all(|w| w[1].1 > w[0].1);

    // single gamma: all weights are ≡ −l (mod 1/m)
    let t = -l - refined.c;
    let tm = t * Rat::new(m, 1);
    let gamma = (tm - Rat::new(rat_ceil(&tm), 1)) / Rat::new(m, 1);
    debug_assert!(gamma > Rat::new(-1, m) && gamma <= Rat::zero());
    for (_, phi) in &new_weights {
        let p = (*phi - refined.c - gamma) * Rat::new(m, 1);
        debug_assert!(p.is_integer(), "weight {phi} not in the gamma lattice");
    }

    Ok(PerturbPlan {
        m,
        gamma,
        l,
        new_weights,
        gap,
        gap_ok,
        monotone,
    })
}

/// Scheme (II) rejecting configurations that violate 10·rank/m < gap.
pub fn perturb_ii_strict(
    refined: &RefinedSpectrum,
    m: i128,
) -> Result<PerturbPlan, PerturbError> {
    let plan = perturb_ii(refined, m)?;
    if !plan.gap_ok {
        return Err(PerturbError::GapTooSmall { gap: plan.gap, m });
    }
    Ok(plan)
}
