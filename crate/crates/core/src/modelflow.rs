//! The explicit rank-2 model family on the punctured disc, its symmetric
//! powers, inequality and uniform-bound scans, the Donaldson functional,
//! the Hermitian–Einstein heat flow, and the degree boundary integral.
//!
//! Model scalars at parameter ε ∈ [0, 1/2):
//!   L₀ = −log|z|²,  L_ε = (|z|^{−ε} − |z|^{ε})/ε = 2·sinh(εL₀/2)/ε,
//!   K_ε = cosh(εL₀/2),  M_ε = e^{−2εL₀}(1 + 2εL₀),
//! with series branches near ε·L₀ = 0 to avoid cancellation.
//!
//! Rank-2 metric in the u-frame:
//!   H_ε = [[L_ε, −λ̄M_ε], [−λM_ε, (1+|λ|²)L_ε⁻¹]],
//! connection coefficient N·dz/z with N = [[0,0],[1,0]].
//!
//! Volume convention: ω = √−1·w(z)dζ∧dζ̄ on the log-polar cylinder
//! ζ = log z, with the model weight w_ε(z) = ε²|z|^{ε−2} + 1;
//! integrals use dvol = w(z)·dx·dy over the grid coordinates, and
//! iΛ_ω of a form g·dz∧dz̄ is g·|z|²/w.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cmat::{herm_eig, CMat, C64};
use crate::speccalc::{
    endo_norm_h, grid_z_derivatives, induced_ops, metric_orthonormalizer, pseudo_curvature,
    transition_endo, ConnectionModel, GridMetricField, LogPolarGrid,
};

#[derive(Clone, Copy, Debug)]
pub struct ModelScalars {
    pub l: f64,
    pub k: f64,
    pub m: f64,
    /// K_ε − 1 evaluated without cancellation.
    pub k_minus_one: f64,
    /// 1 − M_ε evaluated without cancellation.
    pub one_minus_m: f64,
}

/// L_ε, K_ε, M_ε at a point of the punctured unit disc.
pub fn model_scalars(z: C64, eps: f64) -> Result<ModelScalars, &'static str> {
    let r = z.norm();
    if !(r > 0.0 && r < 1.0) {
        return Err("z must lie in the punctured unit disc");
    }
    if eps < 0.0 {
        return Err("eps must be non-negative");
    }
    let l0 = -2.0 * libm::log(r);
    let u = 0.5 * eps * l0;
    let (l, k, k_minus_one) = if u < 1e-4 {
        // sinh(u)/u and cosh expansions: L = L₀(1 + u²/6), K − 1 = u²/2
        (
            l0 * (1.0 + u * u / 6.0),
            1.0 + 0.5 * u * u,
            0.5 * u * u * (1.0 + u * u / 12.0),
        )
    } else {
        let s = libm::sinh(u);
        let half = libm::sinh(0.5 * u);
        (2.0 * s / eps, libm::cosh(u), 2.0 * half * half)
    };
    let t = 2.0 * eps * l0;
    let one_minus_m = if t < 1e-3 {
        // 1 − e^{−t}(1+t) = Σ_{k≥2} (−1)^k (k−1) t^k / k!
        t * t * (0.5 - t / 3.0 + t * t / 8.0 - t * t * t / 30.0)
    } else {
        1.0 - libm::exp(-t) * (1.0 + t)
    };
    Ok(ModelScalars {
        l,
        k,
        m: 1.0 - one_minus_m,
        k_minus_one,
        one_minus_m,
    })
}

/// Kähler weight of the model form ω_ε.
pub fn model_weight(z: C64, eps: f64) -> f64 {
    eps * eps * libm::pow(z.norm(), eps - 2.0) + 1.0
}

/// Rank-2 model metric at a sample.
pub fn rank2_metric(z: C64, lambda: C64, eps: f64) -> CMat {
    let s = model_scalars(z, eps).expect("sample outside the punctured disc");
    let opl = 1.0 + lambda.norm_sqr();
    let mut h = CMat::zeros(2);
    h[(0, 0)] = C64::new(s.l, 0.0);
    h[(0, 1)] = -lambda.conj() * s.m;
    h[(1, 0)] = -lambda * s.m;
    h[(1, 1)] = C64::new(opl / s.l, 0.0);
    h
}

/// Rank-2 model: connection N·dz/z in the u-frame plus the metric field.
pub fn rank2_model(
    lambda: C64,
    eps: f64,
    grid: LogPolarGrid,
) -> Result<(ConnectionModel, GridMetricField), &'static str> {
    if lambda.norm() == 0.0 {
        return Err("lambda must be nonzero");
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err("eps must lie in [0, 1/2]");
    }
    let mut n = CMat::zeros(2);
    n[(1, 0)] = C64::new(1.0, 0.0);
    let conn = ConnectionModel::new(lambda, n);
    let hf = GridMetricField::sample(grid, 2, |z| rank2_metric(z, lambda, eps));
    Ok((conn, hf))
}

/// Closed-form dz-coefficient of θ_ε for the rank-2 model,
/// θ = (1+|λ|²)⁻¹(N/z − λ·H̄⁻¹∂H̄).
pub fn rank2_theta_closed_form(z: C64, lambda: C64, eps: f64) -> CMat {
    let s = model_scalars(z, eps).expect("sample outside the punctured disc");
    let l2 = lambda.norm_sqr();
    let opl = 1.0 + l2;
    let l0 = -2.0 * libm::log(z.norm());
    // ∂L = −K·dz/z, ∂L⁻¹ = K·L⁻²·dz/z, ∂M = 4ε²|z|^{4ε}L₀·dz/z
    let dl = -s.k;
    let dlinv = s.k / (s.l * s.l);
    let dm = 4.0 * eps * eps * libm::pow(z.norm(), 4.0 * eps) * l0;
    let pref = 1.0 / (1.0 + l2 * (1.0 - s.m * s.m));
    let mut b = CMat::zeros(2);
    b[(0, 0)] = C64::new(pref * (opl * dl / s.l - l2 * s.m * dm), 0.0);
    b[(0, 1)] = lambda * (pref * opl * (-dm / s.l + s.m * dlinv));
    b[(1, 0)] = lambda.conj() * (pref * (s.m * dl - s.l * dm));
    b[(1, 1)] = C64::new(pref * (opl * s.l * dlinv - l2 * s.m * dm), 0.0);
    let mut n = CMat::zeros(2);
    n[(1, 0)] = C64::new(1.0, 0.0) / z;
    n.sub(&b.scale(lambda / z)).scale(C64::new(1.0 / opl, 0.0))
}

/// Gram matrix of the monomial basis m_k = Σ_{|S|=k} e_S of Sym^{l−1}
/// with respect to the tensor-power metric of a rank-2 metric.
pub fn sym_gram(h2: &CMat, l: usize) -> CMat {
    assert_eq!(h2.n, 2);
    assert!((2..=8).contains(&l));
    let p = l - 1;
    let masks: u32 = 1 << p;
    let mut g = CMat::zeros(l);
    for s_mask in 0..masks {
        let ks = s_mask.count_ones() as usize;
        for t_mask in 0..masks {
            let kt = t_mask.count_ones() as usize;
            let mut prod = C64::new(1.0, 0.0);
            for pos in 0..p {
                let si = ((s_mask >> pos) & 1) as usize;
                let ti = ((t_mask >> pos) & 1) as usize;
                prod *= h2[(si, ti)];
            }
            g[(ks, kt)] += prod;
        }
    }
    g
}

/// Symmetric-power model of rank l induced from the rank-2 model.
pub fn sym_power_model(
    l: usize,
    lambda: C64,
    eps: f64,
    grid: LogPolarGrid,
) -> Result<(ConnectionModel, GridMetricField), &'static str> {
    if !(2..=8).contains(&l) {
        return Err("rank of the symmetric power must lie in 2..=8");
    }
    if lambda.norm() == 0.0 {
        return Err("lambda must be nonzero");
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err("eps must lie in [0, 1/2]");
    }
    // the derivation in the monomial basis: residue sends m_k to (k+1)m_{k+1}
    let mut res = CMat::zeros(l);
    for k in 0..l - 1 {
        res[(k + 1, k)] = C64::new(k as f64 + 1.0, 0.0);
    }
    let conn = ConnectionModel::new(lambda, res);
    let hf = GridMetricField::sample(grid, l, |z| sym_gram(&rank2_metric(z, lambda, eps), l));
    Ok((conn, hf))
}

#[derive(Clone, Debug)]
pub struct InequalityViolation {
    pub log_abs_z: f64,
    pub eps: f64,
    pub which: &'static str,
}

#[derive(Clone, Debug)]
pub struct InequalityScanReport {
    pub samples: usize,
    pub violations: Vec<InequalityViolation>,
}

/// Randomized check of the scalar model inequalities:
/// L₀ ≤ L_ε; K_ε − 1 ≤ ½L_ε²ε²|z|^ε; 0 ≤ 1 − M_ε ≤ 3L_ε²ε²|z|^ε;
/// |z|^{bε}(εL₀)^d ≤ sup_{u∈(0,1)} u^b(−log u²)^d for b ∈ {1,4}, d ∈ {1,2,3}.
pub fn inequality_scan(samples: usize, seed: u64) -> InequalityScanReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let tol = 1e-9;
    for _ in 0..samples {
        let x: f64 = rng.gen_range(-12.0..-0.01);
        let eps: f64 = rng.gen_range(1e-9..0.5);
        let z = C64::new(libm::exp(x), 0.0);
        let s = model_scalars(z, eps).unwrap();
        let l0 = -2.0 * x;
        let zeps = libm::pow(z.norm(), eps);
        let bound = s.l * s.l * eps * eps * zeps;
        if l0 > s.l * (1.0 + tol) {
            violations.push(InequalityViolation {
                log_abs_z: x,
                eps,
                which: "L0 <= L_eps",
            });
        }
        if s.k_minus_one > 0.5 * bound * (1.0 + tol) {
            violations.push(InequalityViolation {
                log_abs_z: x,
                eps,
                which: "K-1 <= L^2 eps^2 |z|^eps / 2",
            });
        }
        if s.one_minus_m < -tol || s.one_minus_m > 3.0 * bound * (1.0 + tol) {
            violations.push(InequalityViolation {
                log_abs_z: x,
                eps,
                which: "0 <= 1-M <= 3 L^2 eps^2 |z|^eps",
            });
        }
        for b in [1.0f64, 4.0] {
            for d in [1.0f64, 2.0, 3.0] {
                let val = libm::pow(z.norm(), b * eps) * libm::pow(eps * l0, d);
                let sup = libm::exp(-d) * libm::pow(2.0 * d / b, d);
                if val > sup * (1.0 + tol) {
                    violations.push(InequalityViolation {
                        log_abs_z: x,
                        eps,
                        which: "|z|^{b eps} (eps L0)^d <= sup u^b (-log u^2)^d",
                    });
                }
            }
        }
    }
    InequalityScanReport {
        samples,
        violations,
    }
}

/// Sup over the deep interior of |∂̄_εθ_ε| measured against (h_ε, ω_ε),
/// for each ε in the list.
pub fn uniform_bound_scan(
    eps_list: &[f64],
    lambda: C64,
    grid: LogPolarGrid,
) -> Result<Vec<(f64, f64)>, &'static str> {
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (conn, hf) = rank2_model(lambda, eps, grid)?;
        let ops = induced_ops(&hf, &conn);
        let (_, dtheta_zb) = grid_z_derivatives(&grid, &ops.theta);
        let mut sup = 0.0f64;
        for (i, j) in grid.deep_interior() {
            let k = grid.idx(i, j);
            let z = grid.z(i, j);
            // covariant (0,1)-derivative of θ: coefficient of dz∧dz̄ up to sign
            let cov = dtheta_zb[k].add(&ops.dbar_h[k].commutator(&ops.theta[k]));
            let lam = z.norm_sqr() / model_weight(z, eps);
            sup = sup.max(endo_norm_h(&hf.data[k], &cov) * lam);
        }
        out.push((eps, sup));
    }
    Ok(out)
}

/// Quadrature weight of a sample: trapezoid in the radial direction,
/// periodic (full weight) in angle, times the volume density w·dxdy.
fn quad_weight(grid: &LogPolarGrid, i: usize, _z: C64, w: f64) -> f64 {
    let trap = if i == 0 || i == grid.n_rad - 1 { 0.5 } else { 1.0 };
    trap * grid.h_x() * grid.h_y() * w
}

/// Donaldson Ψ(t₁,t₂) = (e^{t₂−t₁} − (t₂−t₁) − 1)/(t₂−t₁)², with the
/// Taylor branch Ψ(t,t) = 1/2.
pub fn donaldson_psi(t1: f64, t2: f64) -> f64 {
    let d = t2 - t1;
    if libm::fabs(d) < 1e-4 {
        0.5 + d / 6.0 + d * d / 24.0
    } else {
        (libm::exp(d) - d - 1.0) / (d * d)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DonaldsonReport {
    pub value: f64,
    /// magnitude of the imaginary part of the first integral (should be
    /// of discretization size).
    pub imag_residual: f64,
}

/// Donaldson functional
/// M(h₁,h₂) = √−1∫tr(s·ΛG(h₁))dvol + ∫(Ψ(s)𝔻^λs, 𝔻^λs)dvol,
/// with h₂ = h₁s.
pub fn donaldson(
    h1f: &GridMetricField,
    h2f: &GridMetricField,
    conn: &ConnectionModel,
    w: impl Fn(C64) -> f64,
) -> Result<DonaldsonReport, &'static str> {
    let grid = h1f.grid;
    let g1 = pseudo_curvature(h1f, conn);
    let s: Vec<CMat> = h1f
        .data
        .iter()
        .zip(&h2f.data)
        .map(|(a, b)| transition_endo(a, b))
        .collect();
    // log s per sample (s must be positive h₁-self-adjoint)
    let mut logs = Vec::with_capacity(s.len());
    let mut frames = Vec::with_capacity(s.len());
    for (k, sk) in s.iter().enumerate() {
        let (q, qinv) = metric_orthonormalizer(&h1f.data[k]);
        let m = q.mul(sk).mul(&qinv);
        if !m.is_hermitian(1e-8) {
            return Err("transition endomorphism is not self-adjoint");
        }
        let e = herm_eig(&m);
        if e.values[0] <= 0.0 {
            return Err("transition endomorphism is not positive");
        }
        let n = sk.n;
        let mut d = CMat::zeros(n);
        for a in 0..n {
            d[(a, a)] = C64::new(libm::log(e.values[a]), 0.0);
        }
        let u = e.vectors;
        logs.push(qinv.mul(&u).mul(&d).mul(&u.adjoint()).mul(&q));
        frames.push((q, qinv, u, e.values));
    }
    let (dlog_z, dlog_zb) = crate::speccalc::lambda_connection_endo(&grid, conn, &logs);

    let mut first = C64::new(0.0, 0.0);
    let mut second = 0.0f64;
    for i in 0..grid.n_rad {
        for j in 0..grid.n_ang {
            let k = grid.idx(i, j);
            let z = grid.z(i, j);
            let wk = w(z);
            let dv = quad_weight(&grid, i, z, wk);
            // √−1·tr(log s·ΛG) = tr(log s·G_c)·|z|²/w for G = G_c·dz∧dz̄
            let lam = z.norm_sqr() / wk;
            first += logs[k].mul(&g1.data[k]).trace() * (dv * lam);

            let (q, qinv, u, kappa) = &frames[k];
            let xp = u.adjoint().mul(&q.mul(&dlog_z[k]).mul(qinv)).mul(u);
            let yp = u.adjoint().mul(&q.mul(&dlog_zb[k]).mul(qinv)).mul(u);
            let n = logs[k].n;
            let mut term = 0.0;
            for a in 0..n {
                for b in 0..n {
                    term += donaldson_psi(libm::log(kappa[b]), libm::log(kappa[a]))
                        * (xp[(a, b)].norm_sqr() + yp[(a, b)].norm_sqr());
                }
            }
            second += term * dv * lam;
        }
    }
    Ok(DonaldsonReport {
        value: first.re + second,
        imag_residual: libm::fabs(first.im),
    })
}

/// Deform a metric field by h ↦ h·exp(u), where u is h-self-adjoint,
/// trace-free, and supported away from the radial boundary by a sine
/// bump so that the deformed metric agrees with h on the boundary rows.
/// sup|u|_h = amp (attained at the bump maximum); `freq` sets the
/// angular oscillation.
pub fn trace_free_bump(hf: &GridMetricField, amp: f64, freq: f64) -> GridMetricField {
    let grid = hf.grid;
    let n = hf.dim;
    let x0 = libm::log(grid.r_min);
    let x1 = libm::log(grid.r_max);
    let pi = core::f64::consts::PI;
    let mut data = Vec::with_capacity(hf.data.len());
    for i in 0..grid.n_rad {
        for j in 0..grid.n_ang {
            let k = grid.idx(i, j);
            let x = grid.x(i);
            let y = grid.y(j);
            let bump = libm::sin(pi * (x - x0) / (x1 - x0));
            // trace-free Hermitian pattern in the orthonormal frame,
            // normalized to unit endomorphism norm
            let c = libm::cos(freq * y);
            let s = libm::sin(freq * y);
            let mut p = CMat::zeros(n);
            if n > 1 {
                p[(0, 0)] = C64::new(c, 0.0);
                p[(1, 1)] = C64::new(-c, 0.0);
                p[(0, 1)] = C64::new(s, 0.0);
                p[(1, 0)] = C64::new(s, 0.0);
            }
            let scale = amp * bump / libm::sqrt(2.0);
            let u_mat = p.scale(C64::new(scale, 0.0));
            let e = herm_eig(&u_mat);
            let mut d = CMat::zeros(n);
            for a in 0..n {
                d[(a, a)] = C64::new(libm::exp(e.values[a]), 0.0);
            }
            let (q, qinv) = metric_orthonormalizer(&hf.data[k]);
            let exp_frame = qinv.mul(&e.vectors).mul(&d).mul(&e.vectors.adjoint()).mul(&q);
            let hbar_new = hf.data[k].conj().mul(&exp_frame);
            let mut h_new = hbar_new.conj();
            h_new = h_new.add(&h_new.adjoint()).scale(C64::new(0.5, 0.0));
            data.push(h_new);
        }
    }
    GridMetricField { grid, dim: n, data }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowStep {
    pub t: f64,
    /// max |det s_t − 1| before renormalization at this step.
    pub det_residual: f64,
    pub donaldson: f64,
    pub lambda_g_perp_l2: f64,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub hf: GridMetricField,
    pub t: f64,
    pub trace: Vec<FlowStep>,
    pub aborted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowError {
    GuardViolated,
    BadInitial,
}

impl core::fmt::Display for FlowError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FlowError::GuardViolated => write!(f, "dt * sup|LambdaG| exceeds the 0.1 guard"),
            FlowError::BadInitial => write!(f, "initial metric is not positive definite"),
        }
    }
}

/// Hermitian–Einstein heat flow s_t⁻¹ds_t/dt = −√−1Λ_ωG(h_t)^⊥ by
/// explicit multiplicative Euler steps with Dirichlet boundary rows and
/// per-sample determinant renormalization (det s_t pinned to 1).
pub fn heat_flow(
    conn: &ConnectionModel,
    w: impl Fn(C64) -> f64 + Copy,
    dt: f64,
    steps: usize,
    initial: &GridMetricField,
) -> Result<FlowState, FlowError> {
    assert!(dt > 0.0 && steps >= 1);
    let grid = initial.grid;
    let rank = initial.dim;
    if !initial.is_positive() {
        return Err(FlowError::BadInitial);
    }
    let det0: Vec<f64> = initial.data.iter().map(|h| h.det().re).collect();

    let mut hf = initial.clone();
    let mut trace = Vec::with_capacity(steps);
    let mut aborted = false;
    let mut t = 0.0f64;

    for step in 0..steps {
        let g = pseudo_curvature(&hf, conn);
        // √−1Λ_ωG and its trace-free part, per sample
        let mut ilg_perp = Vec::with_capacity(grid.len());
        let mut sup = 0.0f64;
        let mut l2 = 0.0f64;
        for i in 0..grid.n_rad {
            for j in 0..grid.n_ang {
                let k = grid.idx(i, j);
                let z = grid.z(i, j);
                let wk = w(z);
                let ilg = g.data[k].scale(C64::new(z.norm_sqr() / wk, 0.0));
                let tracepart = ilg.trace() / rank as f64;
                let mut perp = ilg;
                for a in 0..rank {
                    perp[(a, a)] -= tracepart;
                }
                let nrm = endo_norm_h(&hf.data[k], &perp);
                sup = sup.max(endo_norm_h(&hf.data[k], &ilg));
                l2 += nrm * nrm * quad_weight(&grid, i, z, wk);
                ilg_perp.push(perp);
            }
        }
        if step == 0 && dt * sup > 0.1 {
            return Err(FlowError::GuardViolated);
        }
        let m_val = donaldson(initial, &hf, conn, w)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);

        // advance the interior rows
        let mut new_data = hf.data.clone();
        let mut det_res = 0.0f64;
        let mut positive = true;
        for i in 1..grid.n_rad - 1 {
            for j in 0..grid.n_ang {
                let k = grid.idx(i, j);
                let (q, qinv) = metric_orthonormalizer(&hf.data[k]);
                // Hermitian projection of −dt·√−1ΛG^⊥ in the orthonormal frame
                let m = q.mul(&ilg_perp[k].scale(C64::new(-dt, 0.0))).mul(&qinv);
                let mh = m.add(&m.adjoint()).scale(C64::new(0.5, 0.0));
                let e = herm_eig(&mh);
                let n = rank;
                let mut d = CMat::zeros(n);
                for a in 0..n {
                    d[(a, a)] = C64::new(libm::exp(e.values[a]), 0.0);
                }
                let u = e.vectors;
                let exp_frame = qinv.mul(&u).mul(&d).mul(&u.adjoint()).mul(&q);
                let hbar_new = hf.data[k].conj().mul(&exp_frame);
                let mut h_new = hbar_new.conj();
                h_new = h_new.add(&h_new.adjoint()).scale(C64::new(0.5, 0.0));
                // det s_t drift, then renormalize back to det0
                let det_now = h_new.det().re;
                det_res = det_res.max(libm::fabs(det_now / det0[k] - 1.0));
                let scalef = libm::pow(det0[k] / det_now, 1.0 / rank as f64);
                if !(scalef.is_finite() && scalef > 0.0) {
                    positive = false;
                } else {
                    h_new = h_new.scale(C64::new(scalef, 0.0));
                }
                new_data[k] = h_new;
            }
        }
        trace.push(FlowStep {
            t,
            det_residual: det_res,
            donaldson: m_val,
            lambda_g_perp_l2: libm::sqrt(l2),
        });
        if !positive {
            aborted = true;
            break;
        }
        let cand = GridMetricField {
            grid,
            dim: rank,
            data: new_data,
        };
        if !cand.is_positive() {
            aborted = true;
            break;
        }
        hf = cand;
        t += dt;
    }

    Ok(FlowState {
        hf,
        t,
        trace,
        aborted,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryReport {
    pub lhs: C64,
    pub rhs: C64,
}

/// Degree boundary integral on the annulus: the metric is diagonal
/// |z|^{−2aᵢ} near the inner radius, smoothly interpolated (in log|z|)
/// to the identity near the outer radius. The left side is the Stokes
/// difference of circle integrals of tr θ; the right side is
/// λ(1+|λ|²)⁻¹(λ⁻¹tr Res + Σaᵢ).
pub fn boundary_integral(
    a_weights: &[f64],
    residue: &CMat,
    lambda: C64,
    grid: LogPolarGrid,
) -> Result<BoundaryReport, &'static str> {
    let rank = a_weights.len();
    if rank != residue.n {
        return Err("weight list must match the residue size");
    }
    if lambda.norm() == 0.0 {
        return Err("lambda must be nonzero");
    }
    let x0 = libm::log(grid.r_min);
    let x1 = libm::log(grid.r_max);
    let span = x1 - x0;
    // product form for x ≤ x0 + 0.3·span, identity for x ≥ x1 − 0.3·span
    let blend = move |x: f64| -> f64 {
        let t = (x - (x0 + 0.3 * span)) / (0.4 * span);
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    };
    let weights: Vec<f64> = a_weights.to_vec();
    let hf = GridMetricField::sample(grid, rank, move |z| {
        let x = libm::log(z.norm());
        let chi = blend(x);
        let mut h = CMat::zeros(weights.len());
        for (i, &a) in weights.iter().enumerate() {
            h[(i, i)] = C64::new(libm::exp(-2.0 * a * chi * x), 0.0);
        }
        h
    });
    let conn = ConnectionModel::new(lambda, *residue);
    let ops = induced_ops(&hf, &conn);

    // circle integral of tr θ at a radial row: ∮f dz = ∫f·(√−1 z)dy
    let circle = |row: usize| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..grid.n_ang {
            let k = grid.idx(row, j);
            let z = grid.z(row, j);
            acc += ops.theta[k].trace() * C64::new(0.0, 1.0) * z * grid.h_y();
        }
        acc
    };
    let inner = circle(2);
    let outer = circle(grid.n_rad - 3);
    let two_pi = 2.0 * core::f64::consts::PI;
    let lhs = C64::new(0.0, 1.0 / two_pi) * (outer - inner);

    let sum_a: f64 = a_weights.iter().sum();
    let opl = 1.0 + lambda.norm_sqr();
    let rhs = lambda / opl * (residue.trace() / lambda + sum_a);
    Ok(BoundaryReport { lhs, rhs })
}


#[cfg(test)]
mod diag {
    use super::*;
    use crate::speccalc::*;
    fn c(re: f64, im: f64) -> C64 { C64::new(re, im) }

    #[test]
    fn donaldson_path_integral_check() {
        let lambda = c(1.0, 0.0);
        let grid = LogPolarGrid::new(0.1, 0.6, 48, 48);
        let (conn, h1) = rank2_model(lambda, 0.0, grid).unwrap();
        let w = |z: C64| model_weight(z, 0.0);
        let x0 = libm::log(0.1);
        let x1 = libm::log(0.6);
        // s field: trace-free, bump profile, h1-self-adjoint
        let sfield: Vec<CMat> = h1.data.iter().enumerate().map(|(k, h)| {
            let i = k / grid.n_ang;
            let x = grid.x(i);
            let bump = libm::sin(core::f64::consts::PI * (x - x0) / (x1 - x0));
            let (q, qinv) = metric_orthonormalizer(h);
            let mut m = CMat::zeros(2);
            m[(0,0)] = c(0.3 * bump * libm::sin(1.1 * x), 0.0);
            m[(1,1)] = c(-0.3 * bump * libm::sin(1.1 * x), 0.0);
            qinv.mul(&m).mul(&q)
        }).collect();
        let h_at = |t: f64| -> GridMetricField {
            let data = h1.data.iter().zip(&sfield).map(|(h, s)| {
                // h e^{ts}: H̄_new = H̄ · exp(t s)
                let (q, qinv) = metric_orthonormalizer(h);
                let m = q.mul(s).mul(&qinv);
                let e = crate::cmat::herm_eig(&m);
                let mut d = CMat::zeros(2);
                for a in 0..2 { d[(a,a)] = c(libm::exp(t * e.values[a]), 0.0); }
                let ef = qinv.mul(&e.vectors).mul(&d).mul(&e.vectors.adjoint()).mul(&q);
                h.conj().mul(&ef).conj()
            }).collect();
            GridMetricField { grid, dim: 2, data }
        };
        // path integral via Simpson over t with 9 nodes
        let nodes = 8usize;
        let mut path = 0.0f64;
        for it in 0..=nodes {
            let t = it as f64 / nodes as f64;
            let ht = h_at(t);
            let g = pseudo_curvature(&ht, &conn);
            let mut integrand = 0.0f64;
            for i in 0..grid.n_rad {
                for j in 0..grid.n_ang {
                    let k = grid.idx(i, j);
                    let z = grid.z(i, j);
                    let wk = w(z);
                    let dv = quad_weight(&grid, i, z, wk);
                    integrand += (sfield[k].mul(&g.data[k]).trace() * (dv * z.norm_sqr() / wk)).re;
                }
            }
            let simp = if it == 0 || it == nodes { 1.0 } else if it % 2 == 1 { 4.0 } else { 2.0 };
            path += simp * integrand;
        }
        path *= 1.0 / (3.0 * nodes as f64);
        let closed = donaldson(&h1, &h_at(1.0), &conn, w).unwrap();
        let rel = libm::fabs(closed.value - path) / libm::fabs(path);
        assert!(rel < 5e-3, "path={path} closed={}", closed.value);
    }
}
