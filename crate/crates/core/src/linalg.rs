//! Complex dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Real inner product `Re tr(X^H Y)` on complex matrices.
pub fn inner(x: &CMat, y: &CMat) -> f64 {
    x.dotc(y).re
}

pub fn frobenius_sq(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Thin SVD with singular values sorted in descending order and a fixed
/// phase convention: the largest-magnitude entry of every right singular
/// vector is real and positive (left vectors rotate with it).
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

pub fn svd_sorted(m: &CMat) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let v = v_t.adjoint();
    let n = svd.singular_values.len();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the backend order on exact ties.
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut su = CMat::zeros(u.nrows(), n);
    let mut sv = CMat::zeros(v.nrows(), n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let phase = canonical_phase(&v.column(src).into_owned());
        su.set_column(dst, &(u.column(src) * phase));
        sv.set_column(dst, &(v.column(src) * phase));
        sigma.push(svd.singular_values[src]);
    }
    SortedSvd {
        u: su,
        singular_values: sigma,
        v: sv,
    }
}

/// Unit-modulus factor that rotates the largest-magnitude entry of `v` onto
/// the positive real axis. The first entry wins ties.
pub fn canonical_phase(v: &CVec) -> C64 {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs <= 0.0 {
        return C64::new(1.0, 0.0);
    }
    (v[best] / best_abs).conj()
}

/// Average `M` with its adjoint.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix (only the lower triangle is read).
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(&hermitian_part(m))
        .0
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a Hermitian matrix, or `None` unless it is positive
/// definite. The complex factorization in nalgebra does not fail on
/// indefinite input (a negative pivot just gets an imaginary root), so the
/// pivots are checked here.
pub fn hpd_cholesky(m: &CMat) -> Option<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(hermitian_part(m))?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|z| z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-9 * z.re);
    ok.then_some(chol)
}

/// `log2 det(M)` for Hermitian positive-definite `M`, via Cholesky.
pub fn log2_det_hpd(m: &CMat) -> Option<f64> {
    let chol = hpd_cholesky(m)?;
    let l = chol.l_dirty();
    Some((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pseudo_inverse(m: &CMat) -> CMat {
    let svd = svd_sorted(m);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-12 * (m.nrows().max(m.ncols()) as f64);
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let v = svd.v.column(i);
            let u = svd.u.column(i);
            out += (v * u.adjoint()) * C64::new(1.0 / s, 0.0);
        }
    }
    out
}

/// Extend the orthonormal columns of `basis` to `target` columns with
/// Gram-Schmidt over the standard basis.
pub fn complete_orthonormal(basis: &CMat, target: usize) -> CMat {
    let n = basis.nrows();
    let mut cols: Vec<CVec> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < target && e < n {
        let mut cand = CVec::zeros(n);
        cand[e] = C64::new(1.0, 0.0);
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&cand);
                cand -= c * proj;
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cols.push(cand / C64::new(norm, 0.0));
        }
        e += 1;
    }
    CMat::from_columns(&cols)
}
