//! JSON file formats. Field names mirror the core type fields verbatim;
//! rationals travel as "p/q" strings, complex numbers as {"re", "im"}
//! objects (rational strings where the core value is exact, floats where
//! it is numeric).

use std::collections::BTreeMap;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use kms_hodge_core::cmat::{C64, CMat};
use kms_hodge_core::corrfun::MonodromyDatum;
use kms_hodge_core::exact::{CRat, Rat};
use kms_hodge_core::pardata::{
    DivisorGeometry, FilteredLocalSystemData, IntersectionPoint, KmsPoint, LsKmsPoint,
    LsPointEntry, ParabolicFlatData, PointKmsEntry, UnitExp,
};
use kms_hodge_core::speccalc::LogPolarGrid;

pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rat_from_string(s: &str, path: &str) -> Result<Rat> {
    if s.contains('/') {
        Rat::from_str(s).map_err(|e| anyhow!("{path}: bad rational {s:?}: {e}"))
    } else {
        let n: i128 = s
            .parse()
            .map_err(|e| anyhow!("{path}: bad rational {s:?}: {e}"))?;
        Ok(Rat::new(n, 1))
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct CRatJson {
    pub re: String,
    pub im: String,
}

impl CRatJson {
    pub fn from_crat(c: &CRat) -> Self {
        CRatJson {
            re: rat_to_string(&c.re),
            im: rat_to_string(&c.im),
        }
    }
    pub fn to_crat(&self, path: &str) -> Result<CRat> {
        Ok(CRat::new(
            rat_from_string(&self.re, &format!("{path}.re"))?,
            rat_from_string(&self.im, &format!("{path}.im"))?,
        ))
    }
}

#[derive(Serialize, Deserialize, Clone, Copy)]
pub struct C64Json {
    pub re: f64,
    pub im: f64,
}

impl C64Json {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct PointJson {
    pub i: String,
    pub j: String,
    pub label: String,
    pub mult: u32,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct GeometryJson {
    pub components: Vec<String>,
    pub selfint: BTreeMap<String, String>,
    pub deg_l: BTreeMap<String, String>,
    pub points: Vec<PointJson>,
}

impl GeometryJson {
    pub fn from_core(g: &DivisorGeometry) -> Self {
        GeometryJson {
            components: g.components.clone(),
            selfint: g
                .selfint
                .iter()
                .map(|(k, v)| (k.clone(), rat_to_string(v)))
                .collect(),
            deg_l: g
                .deg_l
                .iter()
                .map(|(k, v)| (k.clone(), rat_to_string(v)))
                .collect(),
            points: g
                .points
                .iter()
                .map(|p| PointJson {
                    i: p.i.clone(),
                    j: p.j.clone(),
                    label: p.label.clone(),
                    mult: p.mult,
                })
                .collect(),
        }
    }

    pub fn to_core(&self) -> Result<DivisorGeometry> {
        let mut selfint = BTreeMap::new();
        for (k, v) in &self.selfint {
            selfint.insert(k.clone(), rat_from_string(v, &format!("geometry.selfint.{k}"))?);
        }
        let mut deg_l = BTreeMap::new();
        for (k, v) in &self.deg_l {
            deg_l.insert(k.clone(), rat_from_string(v, &format!("geometry.deg_l.{k}"))?);
        }
        Ok(DivisorGeometry {
            components: self.components.clone(),
            selfint,
            deg_l,
            points: self
                .points
                .iter()
                .map(|p| IntersectionPoint {
                    i: p.i.clone(),
                    j: p.j.clone(),
                    label: p.label.clone(),
                    mult: p.mult,
                })
                .collect(),
        })
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct KmsPointJson {
    pub a: String,
    pub alpha: CRatJson,
    pub r: u32,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct KmsSideJson {
    pub a: String,
    pub alpha: CRatJson,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct PointKmsJson {
    pub u_i: KmsSideJson,
    pub u_j: KmsSideJson,
    pub r: u32,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct BundleJson {
    pub lambda: CRatJson,
    pub rank: u32,
    pub geometry: GeometryJson,
    pub divisor_spectra: BTreeMap<String, Vec<KmsPointJson>>,
    pub point_spectra: BTreeMap<String, Vec<PointKmsJson>>,
    pub truncation: BTreeMap<String, String>,
}

impl BundleJson {
    pub fn from_core(d: &ParabolicFlatData) -> Self {
        BundleJson {
            lambda: CRatJson::from_crat(&d.lambda),
            rank: d.rank,
            geometry: GeometryJson::from_core(&d.geometry),
            divisor_spectra: d
                .divisor_spectra
                .iter()
                .map(|(k, sp)| {
                    (
                        k.clone(),
                        sp.iter()
                            .map(|p| KmsPointJson {
                                a: rat_to_string(&p.a),
                                alpha: CRatJson::from_crat(&p.alpha),
                                r: p.r,
                            })
                            .collect(),
                    )
                })
                .collect(),
            point_spectra: d
                .point_spectra
                .iter()
                .map(|(k, entries)| {
                    (
                        k.clone(),
                        entries
                            .iter()
                            .map(|e| PointKmsJson {
                                u_i: KmsSideJson {
                                    a: rat_to_string(&e.u_i.0),
                                    alpha: CRatJson::from_crat(&e.u_i.1),
                                },
                                u_j: KmsSideJson {
                                    a: rat_to_string(&e.u_j.0),
                                    alpha: CRatJson::from_crat(&e.u_j.1),
                                },
                                r: e.r,
                            })
                            .collect(),
                    )
                })
                .collect(),
            truncation: d
                .truncation
                .iter()
                .map(|(k, v)| (k.clone(), rat_to_string(v)))
                .collect(),
        }
    }

    pub fn to_core(&self) -> Result<ParabolicFlatData> {
        let mut divisor_spectra = BTreeMap::new();
        for (k, sp) in &self.divisor_spectra {
            let mut out = Vec::with_capacity(sp.len());
            for (n, p) in sp.iter().enumerate() {
                let path = format!("divisor_spectra.{k}[{n}]");
                out.push(KmsPoint {
                    a: rat_from_string(&p.a, &format!("{path}.a"))?,
                    alpha: p.alpha.to_crat(&format!("{path}.alpha"))?,
                    r: p.r,
                });
            }
            divisor_spectra.insert(k.clone(), out);
        }
        let mut point_spectra = BTreeMap::new();
        for (k, entries) in &self.point_spectra {
            let mut out = Vec::with_capacity(entries.len());
            for (n, e) in entries.iter().enumerate() {
                let path = format!("point_spectra.{k}[{n}]");
                out.push(PointKmsEntry {
                    u_i: (
                        rat_from_string(&e.u_i.a, &format!("{path}.u_i.a"))?,
                        e.u_i.alpha.to_crat(&format!("{path}.u_i.alpha"))?,
                    ),
                    u_j: (
                        rat_from_string(&e.u_j.a, &format!("{path}.u_j.a"))?,
                        e.u_j.alpha.to_crat(&format!("{path}.u_j.alpha"))?,
                    ),
                    r: e.r,
                });
            }
            point_spectra.insert(k.clone(), out);
        }
        let mut truncation = BTreeMap::new();
        for (k, v) in &self.truncation {
            truncation.insert(k.clone(), rat_from_string(v, &format!("truncation.{k}"))?);
        }
        Ok(ParabolicFlatData {
            lambda: self.lambda.to_crat("lambda")?,
            rank: self.rank,
            geometry: self.geometry.to_core()?,
            divisor_spectra,
            point_spectra,
            truncation,
        })
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct OmegaJson {
    pub mu: CRatJson,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct LsKmsPointJson {
    pub b: String,
    pub omega: OmegaJson,
    pub r: u32,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct LsSideJson {
    pub b: String,
    pub omega: OmegaJson,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct LsPointJson {
    pub u_i: LsSideJson,
    pub u_j: LsSideJson,
    pub r: u32,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct LocalSystemJson {
    pub rank: u32,
    pub geometry: GeometryJson,
    pub divisor_spectra: BTreeMap<String, Vec<LsKmsPointJson>>,
    pub point_spectra: BTreeMap<String, Vec<LsPointJson>>,
}

impl LocalSystemJson {
    pub fn to_core(&self) -> Result<FilteredLocalSystemData> {
        let mut divisor_spectra = BTreeMap::new();
        for (k, sp) in &self.divisor_spectra {
            let mut out = Vec::with_capacity(sp.len());
            for (n, p) in sp.iter().enumerate() {
                let path = format!("divisor_spectra.{k}[{n}]");
                out.push(LsKmsPoint {
                    b: rat_from_string(&p.b, &format!("{path}.b"))?,
                    omega: UnitExp::new(p.omega.mu.to_crat(&format!("{path}.omega.mu"))?),
                    r: p.r,
                });
            }
            divisor_spectra.insert(k.clone(), out);
        }
        let mut point_spectra = BTreeMap::new();
        for (k, entries) in &self.point_spectra {
            let mut out = Vec::with_capacity(entries.len());
            for (n, e) in entries.iter().enumerate() {
                let path = format!("point_spectra.{k}[{n}]");
                out.push(LsPointEntry {
                    u_i: (
                        rat_from_string(&e.u_i.b, &format!("{path}.u_i.b"))?,
                        UnitExp::new(e.u_i.omega.mu.to_crat(&format!("{path}.u_i.omega.mu"))?),
                    ),
                    u_j: (
                        rat_from_string(&e.u_j.b, &format!("{path}.u_j.b"))?,
                        UnitExp::new(e.u_j.omega.mu.to_crat(&format!("{path}.u_j.omega.mu"))?),
                    ),
                    r: e.r,
                });
            }
            point_spectra.insert(k.clone(), out);
        }
        Ok(FilteredLocalSystemData {
            rank: self.rank,
            geometry: self.geometry.to_core()?,
            divisor_spectra,
            point_spectra,
        })
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct MonodromyJson {
    pub m: Vec<Vec<C64Json>>,
    pub filtration: Vec<f64>,
}

impl MonodromyJson {
    pub fn to_core(&self) -> Result<MonodromyDatum> {
        let n = self.m.len();
        if n == 0 || n > 8 {
            bail!("m: matrix size must be between 1 and 8");
        }
        let mut mat = CMat::zeros(n);
        for (i, row) in self.m.iter().enumerate() {
            if row.len() != n {
                bail!("m[{i}]: row length {} != size {n}", row.len());
            }
            for (j, e) in row.iter().enumerate() {
                mat[(i, j)] = e.value();
            }
        }
        Ok(MonodromyDatum {
            m: mat,
            filtration: self.filtration.clone(),
        })
    }
}

/// localsys.json carries either spectrum tables or a monodromy list.
#[derive(Serialize, Deserialize, Clone)]
#[serde(untagged)]
pub enum LocalSystemFile {
    Tables(LocalSystemJson),
    Monodromy(Vec<MonodromyJson>),
}

#[derive(Serialize, Deserialize, Clone)]
pub struct GridJson {
    pub r_min: f64,
    pub r_max: f64,
    pub n_rad: usize,
    pub n_ang: usize,
}

impl GridJson {
    pub fn to_core(&self) -> Result<LogPolarGrid> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max < 1.0) {
            bail!("grid: need 0 < r_min < r_max < 1");
        }
        if self.n_rad < 4 || self.n_ang < 4 {
            bail!("grid: need n_rad ≥ 4 and n_ang ≥ 4");
        }
        Ok(LogPolarGrid::new(self.r_min, self.r_max, self.n_rad, self.n_ang))
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct FlowConfigJson {
    pub grid: GridJson,
    pub lambda: C64Json,
    pub eps: f64,
    /// auxiliary exponent; when positive it must dominate the weights,
    /// 10·rank·ε < η
    #[serde(default)]
    pub eta: f64,
    pub dt: f64,
    pub steps: usize,
    /// amplitude of the trace-free deformation applied to the model
    /// metric before the flow starts
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default = "default_kahler")]
    pub kahler: String,
    #[serde(default = "default_boundary")]
    pub boundary: String,
}

fn default_kahler() -> String {
    "model".into()
}
fn default_boundary() -> String {
    "dirichlet-model".into()
}

impl FlowConfigJson {
    pub fn validate(&self) -> Result<()> {
        self.grid.to_core()?;
        if self.lambda.value().norm() == 0.0 {
            bail!("lambda: must be nonzero");
        }
        if !(self.eps >= 0.0 && self.eps <= 0.5) {
            bail!("eps: must lie in [0, 0.5]");
        }
        if self.eta > 0.0 && 10.0 * 2.0 * self.eps >= self.eta {
            bail!("eta: auxiliary exponent must satisfy 10 * rank * eps < eta");
        }
        if !(self.dt > 0.0) {
            bail!("dt: must be positive");
        }
        if self.steps < 1 {
            bail!("steps: must be at least 1");
        }
        if self.kahler != "model" {
            bail!("kahler: only the \"model\" weight is available");
        }
        if self.boundary != "dirichlet-model" {
            bail!("boundary: only \"dirichlet-model\" is available");
        }
        Ok(())
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
