//! Dense complex matrix helpers shared by every layer.
//!
//! Everything spectral goes through [`eigh`], which always works on the
//! explicitly Hermitized matrix `(X + X*)/2` so the spectrum is real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(X + X*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Largest singular value. Zero for empty matrices.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular triplets `(σ, u, v)` with `M v = σ u`, in descending order of `σ`.
///
/// Computed from the Hermitian dilation `[[0, M], [M*, 0]]`, whose positive
/// eigenvalues are the singular values with eigenvectors `(u, v)/√2`. Only
/// the `min(rows, cols)` largest eigenvalues are kept; vectors attached to a
/// zero singular value are not meaningful.
pub fn svd_triplets(m: &CMat) -> Vec<(f64, CVec, CVec)> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Vec::new();
    }
    let mut h = CMat::zeros(r + c, r + c);
    h.view_mut((0, r), (r, c)).copy_from(m);
    h.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let (values, vectors) = eigh(&h);
    let scale = 2f64.sqrt();
    (0..k)
        .map(|i| {
            let j = r + c - 1 - i;
            let w = vectors.column(j);
            let u = w.rows(0, r).scale(scale);
            let v = w.rows(r, c).scale(scale);
            (values[j].max(0.0), u, v)
        })
        .collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    svd_triplets(m).into_iter().map(|(s, _, _)| s).collect()
}

/// Spectral decomposition of `Herm(m)`: eigenvalues ascending, eigenvectors as
/// matching columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Rebuild `V diag(f(λ)) V*` from a spectral decomposition.
pub fn spectral_map(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let s = f(values[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Square root of `Herm(m)` with negative eigenvalues clamped to zero.
pub fn sqrt_psd_clamped(m: &CMat) -> CMat {
    let (values, vectors) = eigh(m);
    spectral_map(&values, &vectors, |l| l.max(0.0).sqrt())
}

/// Moore–Penrose inverse of `Herm(m)`; eigenvalues at or below
/// `rel_tol * max(1, |λ|_max)` in magnitude are treated as zero.
pub fn pinv_hermitian(m: &CMat, rel_tol: f64) -> CMat {
    let (values, vectors) = eigh(m);
    let top = values.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
    let cut = rel_tol * top;
    spectral_map(&values, &vectors, |l| if l.abs() > cut { 1.0 / l } else { 0.0 })
}

/// General Moore–Penrose inverse through the SVD.
pub fn pinv(m: &CMat, rel_tol: f64) -> CMat {
    let triplets = svd_triplets(m);
    let top = triplets.first().map_or(0.0, |t| t.0);
    let cut = rel_tol * top.max(1.0);
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (s, u, v) in triplets.iter().filter(|t| t.0 > cut) {
        out += (v * u.adjoint()).unscale(*s);
    }
    out
}

/// Smallest singular value above the `rel_tol` cut, if any.
pub fn smallest_positive_singular_value(m: &CMat, rel_tol: f64) -> Option<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return None;
    }
    let svals = singular_values(m);
    let top = svals.first().copied().unwrap_or(0.0);
    let cut = rel_tol * top.max(1.0);
    svals.iter().copied().filter(|&s| s > cut).reduce(f64::min)
}

/// Evaluate `Σ_j coeffs[j] · X^j` by Horner's rule.
pub fn matrix_polynomial(m: &CMat, coeffs: &[C64]) -> CMat {
    let n = m.nrows();
    let mut acc = CMat::zeros(n, n);
    for &cj in coeffs.iter().rev() {
        acc = &acc * m + CMat::identity(n, n) * cj;
    }
    acc
}

pub fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
    op_norm(&(a * b - b * a))
}

/// `[re, im]` pairs, the JSON encoding of complex data.
pub fn vec_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Rows of `[re, im]` pairs.
pub fn mat_to_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| random_complex(rng))
}

/// Haar-ish unitary from the QR factor of a random complex matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    random_matrix(rng, n, n).qr().q()
}

/// Random Hermitian matrix with spectrum drawn uniformly from `[lo, hi]`.
pub fn random_hermitian_with_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
) -> CMat {
    let q = random_unitary(rng, n);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut scaled = q.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= values[j];
        }
    }
    hermitian_part(&(scaled * q.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_sorts_ascending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian_with_spectrum(&mut rng, 5, -2.0, 3.0);
        let (values, vectors) = eigh(&h);
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let back = spectral_map(&values, &vectors, |l| l);
        assert!(max_abs(&(back - &h)) < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 4, 2);
        let m = &a * a.adjoint();
        let p = pinv_hermitian(&m, 1e-12);
        assert!(max_abs(&(&m * &p * &m - &m)) < 1e-10);
        let g = pinv(&a, 1e-12);
        assert!(max_abs(&(&a * &g * &a - &a)) < 1e-10);
    }

    #[test]
    fn polynomial_horner_matches_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 3, 3);
        let coeffs = [c(1.0, 0.5), c(-2.0, 0.0), c(0.25, 1.0)];
        let direct = CMat::identity(3, 3) * coeffs[0] + &x * coeffs[1] + &x * &x * coeffs[2];
        assert!(max_abs(&(matrix_polynomial(&x, &coeffs) - direct)) < 1e-12);
    }

    #[test]
    fn pinv_with_repeated_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut mask = CMat::identity(3, 3);
        mask[(2, 2)] = ZERO;
        let block = random_matrix(&mut rng, 3, 3) * mask * random_matrix(&mut rng, 3, 3);
        // kron(block, I_2) doubles every singular value
        let m = CMat::from_fn(6, 6, |i, j| if i % 2 == j % 2 { block[(i / 2, j / 2)] } else { ZERO });
        for (s, u, v) in svd_triplets(&m).into_iter().filter(|t| t.0 > 1e-9) {
            assert!((&m * v - u.scale(s)).norm() < 1e-10);
        }
        let g = pinv(&m, 1e-9);
        assert!(max_abs(&(&m * &g * &m - &m)) < 1e-10);
        let svals = singular_values(&m);
        assert!(svals.windows(2).all(|w| w[0] >= w[1]));
        assert!(svals[4] < 1e-12 && svals[3] > 1e-6);
    }
}
