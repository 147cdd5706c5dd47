//! Almost-calibrations: constant k-covectors plus a small polynomial
//! perturbation, evaluated on oriented planes, with a sampled comass check.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::geometry::{orthonormalize, AffinePlane, Frame, Orientation};
use crate::linalg::dot;
use crate::math::{det, gaussian, powi, sqrt, uniform_in_ball};

/// Coefficient of `dx^{i_1} ∧ .. ∧ dx^{i_k}` on a strictly increasing
/// (0-based) multi-index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormTerm {
    pub index: Vec<usize>,
    pub coeff: f64,
}

/// Perturbation term `coeff * x^monomial` on the component `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub index: Vec<usize>,
    /// Exponent per ambient coordinate; total degree at most 3.
    pub monomial: Vec<u32>,
    pub coeff: f64,
}

pub const MAX_PERTURBATION_DEGREE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationForm {
    pub n: usize,
    pub k: usize,
    pub omega0: Vec<FormTerm>,
    #[serde(default)]
    pub perturbation: Vec<PolyTerm>,
    #[serde(default)]
    pub eta: f64,
}

fn check_index(index: &[usize], n: usize, k: usize) -> Result<()> {
    if index.len() != k {
        return Err(Error::InvalidInput("multi-index length differs from the form degree"));
    }
    if index.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("multi-index must be strictly increasing"));
    }
    if index.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("multi-index entry exceeds ambient dimension"));
    }
    Ok(())
}

/// `det` of the rows `index` of the `n x k` matrix with columns `vectors`.
fn minor(vectors: &[Vec<f64>], index: &[usize]) -> f64 {
    let k = index.len();
    let mut a = Vec::with_capacity(k * k);
    for &row in index {
        for v in vectors {
            a.push(v[row]);
        }
    }
    det(a, k)
}

/// All strictly increasing k-subsets of `0..n`, lexicographic.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

impl CalibrationForm {
    /// Validates structure: degrees, index ranges, perturbation degree, and
    /// merges duplicate constant terms.
    pub fn new(n: usize, k: usize, omega0: Vec<FormTerm>, perturbation: Vec<PolyTerm>, eta: f64) -> Result<Self> {
        let mut form = Self { n, k, omega0, perturbation, eta };
        form.normalize()?;
        Ok(form)
    }

    /// Re-checks a form obtained by deserialization.
    pub fn normalize(&mut self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidInput("form degree must satisfy 1 <= k <= n"));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::ParamOutOfRange("eta must be a nonnegative real"));
        }
        for t in &self.omega0 {
            check_index(&t.index, self.n, self.k)?;
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput("non-finite form coefficient"));
            }
        }
        for t in &self.perturbation {
            check_index(&t.index, self.n, self.k)?;
            if t.monomial.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: t.monomial.len() });
            }
            if t.monomial.iter().sum::<u32>() > MAX_PERTURBATION_DEGREE {
                return Err(Error::ParamOutOfRange("perturbation degree exceeds 3"));
            }
        }
        let mut merged: Vec<FormTerm> = Vec::new();
        let mut terms = core::mem::take(&mut self.omega0);
        terms.sort_by(|a, b| a.index.cmp(&b.index));
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.index == t.index => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        self.omega0 = merged;
        Ok(())
    }

    /// `dx^1 ∧ .. ∧ dx^k`
    pub fn volume_form(n: usize, k: usize) -> Self {
        Self { n, k, omega0: vec![FormTerm { index: (0..k).collect(), coeff: 1.0 }], perturbation: Vec::new(), eta: 0.0 }
    }

    /// Volume form of the oriented plane spanned by `frame` (its Plücker
    /// coordinates).
    pub fn plane_volume_form(frame: &Frame) -> Self {
        let vecs = frame.oriented_vectors();
        let (n, k) = (frame.n(), frame.k());
        let omega0 = multi_indices(n, k)
            .into_iter()
            .map(|index| {
                let coeff = minor(&vecs, &index);
                FormTerm { index, coeff }
            })
            .filter(|t| t.coeff != 0.0)
            .collect();
        Self { n, k, omega0, perturbation: Vec::new(), eta: 0.0 }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in out.omega0.iter_mut() {
            t.coeff *= s;
        }
        for t in out.perturbation.iter_mut() {
            t.coeff *= s;
        }
        out
    }

    pub fn reversed(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn constant_part(&self) -> Self {
        Self { perturbation: Vec::new(), ..self.clone() }
    }

    /// Perturbation components at `x`, keyed like the terms.
    fn perturbation_at(&self, x: &[f64]) -> Vec<(&[usize], f64)> {
        self.perturbation
            .iter()
            .map(|t| {
                let mut v = t.coeff;
                for (xi, &e) in x.iter().zip(&t.monomial) {
                    if e > 0 {
                        v *= powi(*xi, e as i32);
                    }
                }
                (t.index.as_slice(), v)
            })
            .collect()
    }

    /// Euclidean coefficient norm of `Omega(x) - Omega_0`; an upper bound
    /// for its comass.
    pub fn perturbation_norm(&self, x: &[f64]) -> f64 {
        let mut comps: Vec<(Vec<usize>, f64)> = Vec::new();
        for (idx, v) in self.perturbation_at(x) {
            match comps.iter_mut().find(|(i, _)| i.as_slice() == idx) {
                Some(c) => c.1 += v,
                None => comps.push((idx.to_vec(), v)),
            }
        }
        sqrt(comps.iter().map(|(_, v)| v * v).sum())
    }

    /// `Omega_x[v_1, .., v_k]` for arbitrary vectors (multilinear, alternating).
    pub fn evaluate_vectors(&self, x: &[f64], vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.len() != self.k {
            return Err(Error::DegreeMismatch { form: self.k, plane: vectors.len() });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.n) {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        let mut val: f64 = self.omega0.iter().map(|t| t.coeff * minor(vectors, &t.index)).sum();
        if !self.perturbation.is_empty() {
            val += self.perturbation_at(x).into_iter().map(|(idx, c)| c * minor(vectors, idx)).sum::<f64>();
        }
        Ok(val)
    }

    /// `Omega_x` on the oriented frame.
    pub fn evaluate_frame(&self, x: &[f64], frame: &Frame) -> Result<f64> {
        self.evaluate_vectors(x, &frame.oriented_vectors())
    }
}

/// `Omega_at[L]` on the plane's oriented frame.
pub fn evaluate(form: &CalibrationForm, at: &[f64], plane: &AffinePlane) -> Result<f64> {
    if plane.k() != form.k {
        return Err(Error::DegreeMismatch { form: form.k, plane: plane.k() });
    }
    form.evaluate_frame(at, &plane.frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComassReport {
    /// Best value found; a certified lower bound on the comass.
    pub max_value: f64,
    pub argmax_frame: Frame,
    pub argmax_point: Vec<f64>,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// Largest sampled perturbation norm over `B_2`.
    pub perturbation_sup: f64,
    pub perturbation_ok: bool,
}

pub const COMASS_TOLERANCE: f64 = 1e-9;
const ASCENT_STEPS: usize = 200;

fn random_frame(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    loop {
        let raw: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
        if let Ok((f, _)) = orthonormalize(&raw, 1e-6, 1.0) {
            return f.vectors().to_vec();
        }
    }
}

fn retract(v: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let (f, _) = orthonormalize(v, 1e-9, 1.0).ok()?;
    // QR keeps the orientation only if diag(R) > 0, which modified GS ensures
    Some(f.vectors().to_vec())
}

/// Projected-gradient ascent of `Omega_x[V]` over orthonormal frames and
/// points in `B_2`.
fn ascend(form: &CalibrationForm, mut x: Vec<f64>, mut v: Vec<Vec<f64>>) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let n = form.n;
    let f = |x: &[f64], v: &[Vec<f64>]| form.evaluate_vectors(x, v).unwrap_or(f64::NEG_INFINITY);
    let mut val = f(&x, &v);
    let mut step = 0.5;
    let h = 1e-6;
    let vary_x = !form.perturbation.is_empty();
    for _ in 0..ASCENT_STEPS {
        // Euclidean gradient by central differences
        let mut g: Vec<Vec<f64>> = vec![vec![0.0; n]; form.k];
        for j in 0..form.k {
            for i in 0..n {
                let mut vp = v.clone();
                vp[j][i] += h;
                let mut vm = v.clone();
                vm[j][i] -= h;
                g[j][i] = (f(&x, &vp) - f(&x, &vm)) / (2.0 * h);
            }
        }
        // tangent projection: G - V sym(V^T G)
        let mut tg = g.clone();
        for a in 0..form.k {
            for b in 0..form.k {
                let s = 0.5 * (dot(&v[b], &g[a]) + dot(&v[a], &g[b]));
                for i in 0..n {
                    tg[a][i] -= s * v[b][i];
                }
            }
        }
        let mut gx = vec![0.0; n];
        if vary_x {
            for i in 0..n {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                gx[i] = (f(&xp, &v) - f(&xm, &v)) / (2.0 * h);
            }
        }
        let gnorm = sqrt(tg.iter().map(|c| dot(c, c)).sum::<f64>() + dot(&gx, &gx));
        if gnorm < 1e-12 {
            break;
        }
        let mut improved = false;
        while step > 1e-12 {
            let cand: Vec<Vec<f64>> = v.iter().zip(&tg).map(|(vi, gi)| vi.iter().zip(gi).map(|(a, b)| a + step * b).collect()).collect();
            let Some(cand) = retract(&cand) else {
                step *= 0.5;
                continue;
            };
            let mut xc: Vec<f64> = x.iter().zip(&gx).map(|(a, b)| a + step * b).collect();
            let len = sqrt(dot(&xc, &xc));
            if len > 2.0 {
                for c in xc.iter_mut() {
                    *c *= 2.0 / len;
                }
            }
            let cv = f(&xc, &cand);
            if cv > val {
                val = cv;
                v = cand;
                x = xc;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (val, x, v)
}

/// Sampled comass check with a sequential executor.
pub fn validate_eta_calibration(form: &CalibrationForm, budget: usize, seed: u64) -> ComassReport {
    validate_eta_calibration_with(&Sequential, form, budget, seed)
}

/// Sampled comass check; each sample draws from its own ChaCha stream so
/// results do not depend on the executor.
pub fn validate_eta_calibration_with<E: Executor>(exec: &E, form: &CalibrationForm, budget: usize, seed: u64) -> ComassReport {
    let budget = budget.max(1);
    let (n, k) = (form.n, form.k);
    let ids: Vec<u64> = (0..budget as u64).collect();
    let results = exec.map(&ids, |_, &i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let x = if form.perturbation.is_empty() { vec![0.0; n] } else { uniform_in_ball(&mut rng, n, 2.0) };
        let pert = form.perturbation_norm(&x);
        let v = random_frame(&mut rng, n, k);
        let (val, x, v) = ascend(form, x, v);
        (val, x, v, pert)
    });
    let mut best = 0usize;
    let mut perturbation_sup: f64 = 0.0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
        perturbation_sup = perturbation_sup.max(r.3);
    }
    let (max_value, x, v, _) = results[best].clone();
    ComassReport {
        max_value,
        argmax_frame: Frame::from_trusted(v, Orientation::Positive),
        argmax_point: x,
        samples: budget,
        tolerance: COMASS_TOLERANCE,
        passed: max_value <= 1.0 + form.eta + COMASS_TOLERANCE,
        perturbation_sup,
        perturbation_ok: perturbation_sup <= form.eta + COMASS_TOLERANCE,
    }
}
