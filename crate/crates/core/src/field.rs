//! Subspace selection: the averaged projector `M_y = sum phi_a pi^_a`, its
//! top-`k` eigenspace `L^_y`, the affine projection
//! `pi_y[z] = pi^_y[z - l_y] + l_y`, and the potential
//! `Phi(y) = |y - pi_y[y]|^2 / 2`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationForm;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::geometry::{one_sided_hausdorff, plane_to_plane_hausdorff, AffinePlane, Ball, Frame, Orientation, Point, Target};
use crate::linalg::{axpy, dot, norm, norm_sq, sub, Matrix, SymEigen};
use crate::math::{det, sin, sqrt};
use crate::multiscale::{best_fit_plane, PointCloud};
use crate::partition::PartitionOfUnity;

pub const DEFAULT_GAP_THRESHOLD: f64 = 0.5;
/// Top-block eigenvalue splits below this flag the sample.
pub const BLOCK_DEGENERACY: f64 = 1e-8;

/// Relative steps (times `r~_y`) for first and second finite differences.
const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 1e-3;

/// Partition of unity with one plane per center.
#[derive(Debug, Clone)]
pub struct SubspaceField {
    pou: PartitionOfUnity,
    planes: Vec<AffinePlane>,
    projectors: Vec<Matrix>,
    deltas: Vec<f64>,
    n: usize,
    k: usize,
    gap_threshold: f64,
    bar_factor: f64,
}

/// Field quantities at one point, without derivatives.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub weights: Vec<(usize, f64)>,
    pub matrix: Matrix,
    pub eigvals: Vec<f64>,
    pub frame: Frame,
    pub projector: Matrix,
    pub ell: Vec<f64>,
    pub m: Vec<f64>,
    pub phi: f64,
    pub gap: f64,
    /// Partition-weighted `r~_y`.
    pub radius: f64,
    /// Largest deviation among contributing planes.
    pub delta: f64,
    pub block_degenerate: bool,
}

impl Assembled {
    /// `pi_y[z]`
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.projector.mul_vec(&sub(z, &self.ell));
        axpy(&mut out, 1.0, &self.ell);
        out
    }

    /// `L_y = l_y + L^_y`
    pub fn plane(&self) -> AffinePlane {
        AffinePlane { base: Point::new(self.ell.clone()), frame: self.frame.clone() }
    }
}

impl SubspaceField {
    pub fn new(pou: PartitionOfUnity, planes: Vec<AffinePlane>, deltas: Vec<f64>, bar_factor: f64) -> Result<Self> {
        if planes.len() != pou.len() || deltas.len() != pou.len() {
            return Err(Error::InvalidInput("one plane and deviation per partition center"));
        }
        let first = planes.first().ok_or(Error::InvalidInput("subspace field needs a plane"))?;
        let (n, k) = (first.n(), first.k());
        for p in &planes {
            if p.k() != k {
                return Err(Error::RankMismatch { left: k, right: p.k() });
            }
            if p.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.n() });
            }
        }
        if pou.centers()[0].dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: pou.centers()[0].dim() });
        }
        let projectors = planes.iter().map(|p| p.frame.projector().matrix().clone()).collect();
        Ok(Self { pou, planes, projectors, deltas, n, k, gap_threshold: DEFAULT_GAP_THRESHOLD, bar_factor })
    }

    /// Fits `L_a` on `B_{bar * r~_a}(x_a)` for every center.
    pub fn from_cloud(cloud: &PointCloud, pou: PartitionOfUnity, bar_factor: f64, form: Option<&CalibrationForm>) -> Result<Self> {
        Self::from_cloud_with(&Sequential, cloud, pou, bar_factor, form)
    }

    pub fn from_cloud_with<E: Executor>(exec: &E, cloud: &PointCloud, pou: PartitionOfUnity, bar_factor: f64, form: Option<&CalibrationForm>) -> Result<Self> {
        let items: Vec<usize> = (0..pou.len()).collect();
        let fits = exec.map(&items, |_, &a| {
            let ball = Ball { center: pou.centers()[a].clone(), radius: bar_factor * pou.radii()[a] };
            best_fit_plane(cloud, &ball, form)
        });
        let mut planes = Vec::with_capacity(fits.len());
        let mut deltas = Vec::with_capacity(fits.len());
        for f in fits {
            let f = f?;
            planes.push(f.plane);
            deltas.push(f.delta_actual);
        }
        Self::new(pou, planes, deltas, bar_factor)
    }

    pub fn with_gap_threshold(mut self, threshold: f64) -> Self {
        self.gap_threshold = threshold;
        self
    }

    pub fn gap_threshold(&self) -> f64 {
        self.gap_threshold
    }

    pub fn bar_factor(&self) -> f64 {
        self.bar_factor
    }

    pub fn partition(&self) -> &PartitionOfUnity {
        &self.pou
    }

    pub fn planes(&self) -> &[AffinePlane] {
        &self.planes
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assemble(&self, y: &[f64]) -> Result<Assembled> {
        let (n, k) = (self.n, self.k);
        let weights = self.pou.weights(y)?;
        let mut matrix = Matrix::zeros(n, n);
        let mut ell = vec![0.0; n];
        let mut radius = 0.0;
        let mut delta: f64 = 0.0;
        let mut lead = (0usize, -1.0);
        for &(a, w) in &weights {
            matrix.add_scaled(w, &self.projectors[a]);
            axpy(&mut ell, w, &self.planes[a].project(y));
            radius += w * self.pou.radii()[a];
            delta = delta.max(self.deltas[a]);
            if w > lead.1 {
                lead = (a, w);
            }
        }
        matrix.symmetrize();
        let eig = SymEigen::new(&matrix);
        let lam = |i: usize| if i < n { eig.values[i] } else { 0.0 };
        let gap = lam(k - 1) - lam(k);
        if gap < self.gap_threshold {
            return Err(Error::EigengapTooSmall { gap, threshold: self.gap_threshold });
        }
        let block_degenerate = (1..k).any(|i| lam(i - 1) - lam(i) < BLOCK_DEGENERACY);
        let mut vecs: Vec<Vec<f64>> = eig.vectors[..k].to_vec();
        // orient along the heaviest contributing plane
        let lead_vecs = self.planes[lead.0].frame.oriented_vectors();
        let mut g = Vec::with_capacity(k * k);
        for f in &vecs {
            for e in &lead_vecs {
                g.push(dot(f, e));
            }
        }
        if det(g, k) < 0.0 {
            for x in vecs[0].iter_mut() {
                *x = -*x;
            }
        }
        let frame = Frame::from_trusted(vecs, Orientation::Positive);
        let projector = eig.top_projector(k);
        let mut m = projector.mul_vec(&sub(y, &ell));
        axpy(&mut m, 1.0, &ell);
        let phi = 0.5 * norm_sq(&sub(y, &m));
        Ok(Assembled { weights, matrix, eigvals: eig.values, frame, projector, ell, m, phi, gap, radius, delta, block_degenerate })
    }

    pub fn phi(&self, y: &[f64]) -> Result<f64> {
        Ok(self.assemble(y)?.phi)
    }
}

/// `f(y + h sum s_i e_i)` for a list of signed axis steps.
fn shifted(y: &[f64], steps: &[(usize, f64)], h: f64) -> Vec<f64> {
    let mut z = y.to_vec();
    for &(i, s) in steps {
        z[i] += s * h;
    }
    z
}

fn fd_gradient<F: Fn(&[f64]) -> Result<f64>>(f: &F, y: &[f64], h: f64) -> Result<Vec<f64>> {
    (0..y.len()).map(|i| Ok((f(&shifted(y, &[(i, 1.0)], h))? - f(&shifted(y, &[(i, -1.0)], h))?) / (2.0 * h))).collect()
}

fn fd_hessian<F: Fn(&[f64]) -> Result<f64>>(f: &F, y: &[f64], h: f64) -> Result<Matrix> {
    let n = y.len();
    let f0 = f(y)?;
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (f(&shifted(y, &[(i, 1.0)], h))? - 2.0 * f0 + f(&shifted(y, &[(i, -1.0)], h))?) / (h * h);
        for j in (i + 1)..n {
            let v = (f(&shifted(y, &[(i, 1.0), (j, 1.0)], h))? - f(&shifted(y, &[(i, 1.0), (j, -1.0)], h))? - f(&shifted(y, &[(i, -1.0), (j, 1.0)], h))?
                + f(&shifted(y, &[(i, -1.0), (j, -1.0)], h))?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// First derivatives of a vector-valued map, one vector per axis.
fn fd_jacobian<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: &F, y: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    (0..y.len())
        .map(|i| {
            let a = f(&shifted(y, &[(i, 1.0)], h))?;
            let b = f(&shifted(y, &[(i, -1.0)], h))?;
            Ok(a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect())
        })
        .collect()
}

/// Second derivatives of a vector-valued map, one vector per axis pair.
fn fd_second<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: &F, y: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let n = y.len();
    let f0 = f(y)?;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v: Vec<f64> = if i == j {
                let a = f(&shifted(y, &[(i, 1.0)], h))?;
                let b = f(&shifted(y, &[(i, -1.0)], h))?;
                (0..f0.len()).map(|t| (a[t] - 2.0 * f0[t] + b[t]) / (h * h)).collect()
            } else {
                let pp = f(&shifted(y, &[(i, 1.0), (j, 1.0)], h))?;
                let pm = f(&shifted(y, &[(i, 1.0), (j, -1.0)], h))?;
                let mp = f(&shifted(y, &[(i, -1.0), (j, 1.0)], h))?;
                let mm = f(&shifted(y, &[(i, -1.0), (j, -1.0)], h))?;
                (0..f0.len()).map(|t| (pp[t] - pm[t] - mp[t] + mm[t]) / (4.0 * h * h)).collect()
            };
            out.push(v);
        }
    }
    Ok(out)
}

fn tensor_norm(parts: &[Vec<f64>]) -> f64 {
    sqrt(parts.iter().map(|p| norm_sq(p)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFieldSample {
    pub y: Point,
    pub matrix: Matrix,
    pub eigvals: Vec<f64>,
    pub gap: f64,
    pub lhat: Frame,
    pub ell: Point,
    pub m: Point,
    pub phi: f64,
    pub grad: Vec<f64>,
    pub hess: Matrix,
    pub radius: f64,
    pub delta: f64,
    pub block_degenerate: bool,
}

/// All field quantities at `y`, with the gradient and Hessian of `Phi` by
/// central differences at steps `1e-5 r~_y` and `1e-3 r~_y`.
pub fn field_sample(field: &SubspaceField, y: &[f64]) -> Result<SubspaceFieldSample> {
    let a = field.assemble(y)?;
    let phi = |z: &[f64]| field.phi(z);
    let grad = fd_gradient(&phi, y, GRAD_STEP * a.radius)?;
    let hess = fd_hessian(&phi, y, HESS_STEP * a.radius)?;
    Ok(SubspaceFieldSample {
        y: Point::from(y),
        matrix: a.matrix,
        eigvals: a.eigvals,
        gap: a.gap,
        lhat: a.frame,
        ell: Point::new(a.ell),
        m: Point::new(a.m),
        phi: a.phi,
        grad,
        hess,
        radius: a.radius,
        delta: a.delta,
        block_degenerate: a.block_degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    /// `r- |grad pi^|`
    pub grad_projector: f64,
    /// `r-^2 |hess pi^|`
    pub hess_projector: f64,
    /// `|grad m - pi^|`
    pub grad_m_defect: f64,
    /// `r- |hess m|`
    pub hess_m: f64,
    /// `|d(l_y - pi^_y[y])|` in coordinates centered at the probe.
    pub ell_claim: f64,
    /// `r~ |d^2 l_y|`
    pub ell_second: f64,
    /// `|d(l_y - M_y[y])|` in coordinates centered at the probe.
    pub m_claim: f64,
    pub delta: f64,
    pub radius: f64,
}

fn flatten(m: &Matrix) -> Vec<f64> {
    m.data().to_vec()
}

/// Finite-difference derivative norms of the projector field and of `m_y`.
/// Steps are `1e-4 r~` and `1e-2 r~` so eigenvector roundoff stays below the
/// quantities measured on exactly flat data.
pub fn projector_derivative_check(field: &SubspaceField, y: &[f64]) -> Result<ProjectorReport> {
    let a = field.assemble(y)?;
    let n = field.n;
    let (h1, h2) = (1e-4 * a.radius, 1e-2 * a.radius);
    let bar = field.bar_factor * a.radius;
    let proj = |z: &[f64]| Ok(flatten(&field.assemble(z)?.projector));
    let mfun = |z: &[f64]| Ok(field.assemble(z)?.m);
    let dp = fd_jacobian(&proj, y, h1)?;
    let ddp = fd_second(&proj, y, h2)?;
    let dm = fd_jacobian(&mfun, y, h1)?;
    let ddm = fd_second(&mfun, y, h2)?;
    let mut jac = Matrix::zeros(n, n);
    for (i, col) in dm.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            jac[(r, i)] = *v;
        }
    }
    let grad_m_defect = jac.sub(&a.projector).spectral_norm();

    let o = y.to_vec();
    let ell_claim_fn = |z: &[f64]| {
        let b = field.assemble(z)?;
        let mut v = b.ell.clone();
        let p = b.projector.mul_vec(&sub(z, &o));
        axpy(&mut v, -1.0, &p);
        Ok(sub(&v, &o))
    };
    let m_claim_fn = |z: &[f64]| {
        let b = field.assemble(z)?;
        let mut v = b.ell.clone();
        let p = b.matrix.mul_vec(&sub(z, &o));
        axpy(&mut v, -1.0, &p);
        Ok(sub(&v, &o))
    };
    let ell_fn = |z: &[f64]| Ok(field.assemble(z)?.ell);
    let to_matrix = |cols: &[Vec<f64>]| {
        let mut j = Matrix::zeros(n, n);
        for (i, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                j[(r, i)] = *v;
            }
        }
        j.spectral_norm()
    };
    let ell_claim = to_matrix(&fd_jacobian(&ell_claim_fn, y, h1)?);
    let m_claim = to_matrix(&fd_jacobian(&m_claim_fn, y, h1)?);
    let ell_second = a.radius * tensor_norm(&fd_second(&ell_fn, y, h2)?);
    Ok(ProjectorReport {
        grad_projector: bar * tensor_norm(&dp),
        hess_projector: bar * bar * tensor_norm(&ddp),
        grad_m_defect,
        hess_m: bar * tensor_norm(&ddm),
        ell_claim,
        ell_second,
        m_claim,
        delta: a.delta,
        radius: a.radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    /// One-sided distance from the samples in `B_{r-}(y)` to `L_y`.
    pub local: f64,
    /// Distance between `L_y` and the plane fitted on `B_{10 r-}(y)`,
    /// inside `B_{10 r-}(y)`.
    pub far: f64,
    pub local_ratio: f64,
    pub far_ratio: f64,
    pub delta: f64,
    pub bar_radius: f64,
}

pub fn plane_closeness_check(field: &SubspaceField, cloud: &PointCloud, y: &[f64]) -> Result<ClosenessReport> {
    let a = field.assemble(y)?;
    let bar = field.bar_factor * a.radius;
    let near = Ball { center: Point::from(y), radius: bar };
    let idx = cloud.indices_in(y, bar, false);
    if idx.is_empty() {
        return Err(Error::EmptyBall);
    }
    let pts: Vec<Point> = idx.iter().map(|&i| cloud.point(i).clone()).collect();
    let plane = a.plane();
    let local = one_sided_hausdorff(&pts, Target::Plane(&plane), &near).value;
    let wide = Ball { center: Point::from(y), radius: 10.0 * bar };
    let fit = best_fit_plane(cloud, &wide, None)?;
    let far = plane_to_plane_hausdorff(&plane, &fit.plane, &wide).value;
    let delta = a.delta.max(fit.delta_actual);
    let denom = delta * bar;
    let ratio = |v: f64| {
        if denom > 0.0 {
            v / denom
        } else if v == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    Ok(ClosenessReport { local, far, local_ratio: ratio(local), far_ratio: ratio(far), delta, bar_radius: bar })
}

/// Perturbed plane `L_v = graph of v over L_b`, a tangent direction `w` and
/// a normal direction `u_j`, all in ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFunctionalProbe {
    /// Orthonormal basis of `L_b`.
    pub base: Vec<Vec<f64>>,
    /// Orthonormal basis of `L_b`'s complement.
    pub normals: Vec<Vec<f64>>,
    /// `(n-k) x k` coefficients of `v` in these bases.
    pub v: Matrix,
    /// Unit coefficients of `w` in `base`.
    pub w: Vec<f64>,
    /// Index of `u_j` in `normals`.
    pub j: usize,
}

pub const MAX_TILT: f64 = 0.1;

impl TraceFunctionalProbe {
    fn validate(&self) -> Result<()> {
        let k = self.base.len();
        if self.v.rows() != self.normals.len() || self.v.cols() != k || self.w.len() != k || self.j >= self.normals.len() {
            return Err(Error::InvalidInput("inconsistent trace probe shapes"));
        }
        if self.v.spectral_norm() > MAX_TILT + 1e-12 {
            return Err(Error::ParamOutOfRange("|v| must not exceed 0.1"));
        }
        if (norm(&self.w) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("w must be a unit vector"));
        }
        Ok(())
    }

    fn lift(&self, t: &[f64]) -> Vec<f64> {
        let n = self.base[0].len();
        let mut out = vec![0.0; n];
        for (i, b) in self.base.iter().enumerate() {
            axpy(&mut out, t[i], b);
        }
        let vt = self.v.mul_vec(t);
        for (l, u) in self.normals.iter().enumerate() {
            axpy(&mut out, vt[l], u);
        }
        out
    }

    /// `(e_w, u, basis of L_v starting with e_w)`.
    pub fn frame(&self) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let k = self.base.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut first = self.lift(&self.w);
        let l = norm(&first);
        first.iter_mut().for_each(|x| *x /= l);
        basis.push(first);
        for i in 0..k {
            let mut t = vec![0.0; k];
            t[i] = 1.0;
            let mut e = self.lift(&t);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &e);
                    axpy(&mut e, -c, b);
                }
            }
            let l = norm(&e);
            if l > 1e-8 && basis.len() < k {
                e.iter_mut().for_each(|x| *x /= l);
                basis.push(e);
            }
        }
        let mut u = self.normals[self.j].clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &u);
                axpy(&mut u, -c, b);
            }
        }
        let l = norm(&u);
        u.iter_mut().for_each(|x| *x /= l);
        (basis[0].clone(), u, basis)
    }
}

/// `(d/dtheta, d^2/dtheta^2)` of `tr_{R L_v}(M)` at 0, where `R` turns
/// `e_w` toward `u`: `2<e_w, M u>` and `2(<u, M u> - <e_w, M e_w>)`.
pub fn trace_functional_derivatives(probe: &TraceFunctionalProbe, m: &Matrix) -> Result<(f64, f64)> {
    probe.validate()?;
    let (e, u, _) = probe.frame();
    let me = m.mul_vec(&e);
    let mu = m.mul_vec(&u);
    Ok((2.0 * dot(&e, &mu), 2.0 * (dot(&u, &mu) - dot(&e, &me))))
}

/// Same derivatives by central differences in `theta` of the rotated trace.
/// Trace increments use `<Rf - f, M(Rf + f)>` with `Rf - f` formed from
/// `sin` and `1 - cos` directly, which keeps the second difference clean.
pub fn numeric_trace_derivatives(probe: &TraceFunctionalProbe, m: &Matrix, h: f64) -> Result<(f64, f64)> {
    probe.validate()?;
    let (e, u, basis) = probe.frame();
    // R_theta = I + sin(theta) A + (1 - cos(theta)) A^2,  A = u e^T - e u^T
    let increment = |theta: f64| -> f64 {
        let s = sin(theta);
        let c1 = 2.0 * sin(theta / 2.0) * sin(theta / 2.0);
        let mut total = 0.0;
        for f in &basis {
            let (fe, fu) = (dot(&e, f), dot(&u, f));
            let mut d = vec![0.0; f.len()];
            // A f = u (e.f) - e (u.f),  A^2 f = -(e (e.f) + u (u.f))
            axpy(&mut d, s * fe, &u);
            axpy(&mut d, -s * fu, &e);
            axpy(&mut d, -c1 * fe, &e);
            axpy(&mut d, -c1 * fu, &u);
            let mut sum = d.clone();
            axpy(&mut sum, 2.0, f);
            total += dot(&d, &m.mul_vec(&sum));
        }
        total
    };
    let (p, q) = (increment(h), increment(-h));
    Ok(((p - q) / (2.0 * h), (p + q) / (h * h)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub phi: f64,
    /// `||grad Phi|^2 - 2 Phi| / Phi`, skipped when `Phi <= 1e-14`.
    pub grad_defect: Option<f64>,
    /// `|hess Phi - pi^_perp|`
    pub hess_defect: f64,
    pub delta: f64,
}

pub fn phi_properties_check(field: &SubspaceField, y: &[f64]) -> Result<PhiReport> {
    let s = field_sample(field, y)?;
    let n = field.n;
    let mut perp = Matrix::identity(n);
    let a = field.assemble(y)?;
    perp.add_scaled(-1.0, &a.projector);
    let grad_defect = if s.phi > 1e-14 { Some((norm_sq(&s.grad) - 2.0 * s.phi).abs() / s.phi) } else { None };
    Ok(PhiReport { phi: s.phi, grad_defect, hess_defect: s.hess.sub(&perp).sym_spectral_norm(), delta: s.delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, PI};
    use crate::multiscale::PointCloud;
    use crate::partition::Domain;

    fn flat_field() -> (SubspaceField, PointCloud) {
        let mut pts = Vec::new();
        for i in 0..41 {
            for j in 0..41 {
                pts.push(Point::new(vec![-1.0 + i as f64 / 20.0, -1.0 + j as f64 / 20.0, 0.3]));
            }
        }
        let cloud = PointCloud::new(pts.clone(), 2).unwrap();
        let clip = Ball::new(Point::new(vec![0.0, 0.0, 0.3]), 0.6).unwrap();
        let domain = Domain::Samples { points: pts, clip: Some(clip) };
        let pou = PartitionOfUnity::build(&domain, &|_: &[f64]| 0.1, 0.05).unwrap();
        (SubspaceField::from_cloud(&cloud, pou, 4.0, None).unwrap(), cloud)
    }

    #[test]
    fn flat_cloud_gives_exact_projector() {
        let (f, _) = flat_field();
        let y = [0.05, -0.02, 0.35];
        let s = field_sample(&f, &y).unwrap();
        assert!((s.gap - 1.0).abs() < 1e-12);
        let p = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]);
        assert!(s.matrix.sub(&p).max_abs() < 1e-12);
        assert!((s.phi - 0.5 * 0.05 * 0.05).abs() < 1e-15);
        assert!(f.phi(&y).unwrap() == s.phi);
        let on = field_sample(&f, &[0.05, -0.02, 0.3]).unwrap();
        assert!(on.m.dist(&[0.05, -0.02, 0.3]) < 1e-15);
        assert!(norm(&on.grad) < 1e-12);
    }

    #[test]
    fn two_lines_at_an_angle() {
        for deg in [10.0, 30.0, 50.0] {
            let th: f64 = deg * PI / 180.0;
            let pou = PartitionOfUnity::new(vec![Point::new(vec![-0.2, 0.0]), Point::new(vec![0.2, 0.0])], vec![0.1, 0.1]).unwrap();
            let l1 = AffinePlane::new(Point::origin(2), Frame::new(vec![vec![1.0, 0.0]], Orientation::Positive).unwrap()).unwrap();
            let l2 = AffinePlane::new(Point::origin(2), Frame::new(vec![vec![cos(th), sin(th)]], Orientation::Positive).unwrap()).unwrap();
            let f = SubspaceField::new(pou, vec![l1, l2], vec![0.0, 0.0], 4.0).unwrap().with_gap_threshold(0.0);
            let a = f.assemble(&[0.0, 0.0]).unwrap();
            // closed-form 2x2 eigenvalues of (P1 + P2)/2
            let (l_hi, l_lo) = ((1.0 + cos(th)) / 2.0, (1.0 - cos(th)) / 2.0);
            assert!((a.eigvals[0] - l_hi).abs() < 1e-14);
            assert!((a.eigvals[1] - l_lo).abs() < 1e-14);
            assert!((a.gap - cos(th)).abs() < 1e-14);
        }
    }

    #[test]
    fn small_gap_is_an_error() {
        let pou = PartitionOfUnity::new(vec![Point::new(vec![-0.2, 0.0]), Point::new(vec![0.2, 0.0])], vec![0.1, 0.1]).unwrap();
        let l1 = AffinePlane::axis(Point::origin(2), 1);
        let l2 = AffinePlane::new(Point::origin(2), Frame::new(vec![vec![0.0, 1.0]], Orientation::Positive).unwrap()).unwrap();
        let f = SubspaceField::new(pou, vec![l1, l2], vec![0.0, 0.0], 4.0).unwrap();
        assert!(matches!(f.assemble(&[0.0, 0.0]), Err(Error::EigengapTooSmall { .. })));
    }

    fn probe_2d() -> TraceFunctionalProbe {
        TraceFunctionalProbe { base: vec![vec![1.0, 0.0]], normals: vec![vec![0.0, 1.0]], v: Matrix::zeros(1, 1), w: vec![1.0], j: 0 }
    }

    #[test]
    fn trace_derivative_example() {
        let m = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.1, 0.0]]);
        let (a1, a2) = trace_functional_derivatives(&probe_2d(), &m).unwrap();
        assert!((a1 - 0.2).abs() < 1e-15);
        assert!((a2 + 2.0).abs() < 1e-15);
        let (n1, n2) = numeric_trace_derivatives(&probe_2d(), &m, 1e-5).unwrap();
        assert!((n1 - a1).abs() <= 1e-6 * a1.abs());
        assert!((n2 - a2).abs() <= 1e-6 * a2.abs());
    }

    #[test]
    fn trace_is_stationary_at_its_own_projector() {
        let mut p = probe_2d();
        p.v = Matrix::from_rows(&[vec![0.07]]);
        let (e, _, _) = p.frame();
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(1.0, &e, &e);
        let (first, second) = trace_functional_derivatives(&p, &m).unwrap();
        assert!(first.abs() < 1e-15);
        assert!((second + 2.0).abs() < 1e-14);
        p.v = Matrix::from_rows(&[vec![0.2]]);
        assert!(trace_functional_derivatives(&p, &m).is_err());
    }

    #[test]
    fn flat_derivative_checks_vanish() {
        let (f, cloud) = flat_field();
        let y = [0.03, 0.04, 0.31];
        let r = projector_derivative_check(&f, &y).unwrap();
        for v in [r.grad_projector, r.hess_projector, r.grad_m_defect, r.hess_m] {
            assert!(v <= 1e-8, "{r:?}");
        }
        let c = plane_closeness_check(&f, &cloud, &y).unwrap();
        assert!(c.local < 1e-12 && c.far < 1e-12, "{c:?}");
        let p = phi_properties_check(&f, &y).unwrap();
        assert!(p.grad_defect.unwrap() <= 1e-6, "{p:?}");
        assert!(p.hess_defect <= 1e-6, "{p:?}");
        let on = phi_properties_check(&f, &[0.03, 0.04, 0.3]).unwrap();
        assert!(on.grad_defect.is_none());
        assert!(on.hess_defect <= 1e-6);
    }
}
