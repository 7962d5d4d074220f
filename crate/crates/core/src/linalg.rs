//! Zero-forcing pseudo-inverse through a Cholesky solve of the Gram matrix.

use nalgebra::DMatrix;

use crate::channel::C64;

/// Samples whose equilibrated Gram matrix has a reciprocal condition number
/// below this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Pseudo-inverse `A = (Ĝᴴ Ĝ)⁻¹ Ĝᴴ` of an `M × K` estimate matrix, stored
/// transposed as `M × K` so that column k is the detector row `a_k`.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub rows_t: DMatrix<C64>,
    /// Reciprocal 1-norm condition number of the diagonally scaled Gram matrix.
    pub rcond: f64,
}

impl PseudoInverse {
    pub fn users(&self) -> usize {
        self.rows_t.ncols()
    }

    /// Detector row `a_k` as a contiguous slice of length M.
    pub fn row(&self, k: usize) -> &[C64] {
        let m = self.rows_t.nrows();
        &self.rows_t.as_slice()[k * m..(k + 1) * m]
    }
}

#[inline]
fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// `y -= c · x`
#[inline]
fn axpy_neg(y: &mut [C64], c: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi.re -= c.re * xi.re - c.im * xi.im;
        yi.im -= c.re * xi.im + c.im * xi.re;
    }
}

/// Lower Cholesky factor (row-major `K × K`) of a Hermitian matrix, or `None`
/// when a pivot is not strictly positive.
fn cholesky(gram: &[C64], k: usize) -> Option<Vec<C64>> {
    let mut l = vec![C64::new(0.0, 0.0); k * k];
    for j in 0..k {
        let mut d = gram[j * k + j].re;
        for p in 0..j {
            d -= l[j * k + p].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j * k + j] = C64::new(ljj, 0.0);
        for i in j + 1..k {
            let mut s = gram[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p].conj();
            }
            l[i * k + j] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse of `L Lᴴ` from its Cholesky factor.
fn inverse_from_cholesky(l: &[C64], k: usize) -> Vec<C64> {
    // Linv lower-triangular with L · Linv = I.
    let mut linv = vec![C64::new(0.0, 0.0); k * k];
    for c in 0..k {
        linv[c * k + c] = C64::new(1.0 / l[c * k + c].re, 0.0);
        for i in c + 1..k {
            let mut s = C64::new(0.0, 0.0);
            for p in c..i {
                s += l[i * k + p] * linv[p * k + c];
            }
            linv[i * k + c] = -s / l[i * k + i].re;
        }
    }
    // (L Lᴴ)⁻¹ = Linvᴴ Linv
    let mut inv = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = C64::new(0.0, 0.0);
            for p in i.max(j)..k {
                s += linv[p * k + i].conj() * linv[p * k + j];
            }
            inv[i * k + j] = s;
        }
    }
    inv
}

fn equilibrated_rcond(gram: &[C64], inv: &[C64], k: usize) -> f64 {
    let scale: Vec<f64> = (0..k).map(|i| gram[i * k + i].re.sqrt()).collect();
    let (mut norm, mut norm_inv) = (0.0f64, 0.0f64);
    for j in 0..k {
        let (mut s, mut t) = (0.0, 0.0);
        for i in 0..k {
            s += gram[i * k + j].norm() / (scale[i] * scale[j]);
            t += inv[i * k + j].norm() * (scale[i] * scale[j]);
        }
        norm = norm.max(s);
        norm_inv = norm_inv.max(t);
    }
    1.0 / (norm * norm_inv)
}

/// Computes the ZF pseudo-inverse of `g_hat`, or `None` when the Gram matrix
/// is numerically singular (failed factorization or rcond below
/// [`RCOND_THRESHOLD`]).
pub fn pseudo_inverse(g_hat: &DMatrix<C64>) -> Option<PseudoInverse> {
    let (m, k) = g_hat.shape();
    let cols = g_hat.as_slice();
    let col = |u: usize| &cols[u * m..(u + 1) * m];

    let mut gram = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in i..k {
            let s = dot_conj(col(i), col(j));
            gram[i * k + j] = s;
            gram[j * k + i] = s.conj();
        }
        gram[i * k + i].im = 0.0;
    }

    let l = cholesky(&gram, k)?;
    let inv = inverse_from_cholesky(&l, k);
    let rcond = equilibrated_rcond(&gram, &inv, k);
    if !(rcond >= RCOND_THRESHOLD) {
        return None;
    }

    // L W = Ĝᴴ, then Lᴴ A = W; rows of length M.
    let mut rows = vec![C64::new(0.0, 0.0); k * m];
    for u in 0..k {
        let (done, rest) = rows.split_at_mut(u * m);
        let row = &mut rest[..m];
        for (r, g) in row.iter_mut().zip(col(u)) {
            *r = g.conj();
        }
        for j in 0..u {
            axpy_neg(row, l[u * k + j], &done[j * m..(j + 1) * m]);
        }
        let inv_d = 1.0 / l[u * k + u].re;
        row.iter_mut().for_each(|r| *r *= inv_d);
    }
    for u in (0..k).rev() {
        let (head, tail) = rows.split_at_mut((u + 1) * m);
        let row = &mut head[u * m..];
        for j in u + 1..k {
            axpy_neg(row, l[j * k + u].conj(), &tail[(j - u - 1) * m..(j - u) * m]);
        }
        let inv_d = 1.0 / l[u * k + u].re;
        row.iter_mut().for_each(|r| *r *= inv_d);
    }

    Some(PseudoInverse {
        rows_t: DMatrix::from_vec(m, k, rows),
        rcond,
    })
}

/// Accumulates `|A_km|²` for split-form estimate matrices (see
/// [`crate::channel::draw_estimates_split`]) using two real matrix products
/// per draw: the Gram matrix and `A = (ĜᴴĜ)⁻¹Ĝᴴ` from the explicit inverse.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    m: usize,
    k: usize,
    gram_split: Vec<f64>,
    mix: Vec<f64>,
    rows_split: Vec<f64>,
}

impl PsiKernel {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            gram_split: vec![0.0; 4 * k * k],
            mix: vec![0.0; 4 * k * k],
            rows_split: vec![0.0; 2 * m * k],
        }
    }

    /// Adds `|A_km|²` into `psi` (`M × K` column-major). Returns `false`
    /// and leaves `psi` untouched when the Gram matrix is numerically
    /// singular.
    pub fn accumulate(&mut self, split: &[f64], psi: &mut [f64]) -> bool {
        let (m, k) = (self.m, self.k);
        let k2 = 2 * k;
        assert_eq!(split.len(), m * k2, "split matrix has the wrong size");
        assert_eq!(psi.len(), m * k, "psi has the wrong size");

        // W = Xᵀ X, row-major 2K × 2K.
        // SAFETY: every pointer/stride pair addresses only elements inside
        // the slices whose lengths are checked above or fixed in `new`.
        unsafe {
            matrixmultiply::dgemm(
                k2, m, k2, 1.0,
                split.as_ptr(), m as isize, 1,
                split.as_ptr(), 1, m as isize,
                0.0, self.gram_split.as_mut_ptr(), k2 as isize, 1,
            );
        }
        let w = |i: usize, j: usize| self.gram_split[i * k2 + j];
        let mut gram = vec![C64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = C64::new(w(i, j) + w(k + i, k + j), w(i, k + j) - w(k + i, j));
            }
            gram[i * k + i].im = 0.0;
        }
        let Some(l) = cholesky(&gram, k) else {
            return false;
        };
        let inv = inverse_from_cholesky(&l, k);
        if !(equilibrated_rcond(&gram, &inv, k) >= RCOND_THRESHOLD) {
            return false;
        }

        // Real form of conj-transposed multiplication by the inverse, so that
        // column c of X·T is the real (c < K) or imaginary part of row c of A.
        for j in 0..k {
            for u in 0..k {
                let p = inv[u * k + j];
                self.mix[j * k2 + u] = p.re;
                self.mix[(k + j) * k2 + u] = p.im;
                self.mix[j * k2 + k + u] = p.im;
                self.mix[(k + j) * k2 + k + u] = -p.re;
            }
        }
        // SAFETY: as above.
        unsafe {
            matrixmultiply::dgemm(
                m, k2, k2, 1.0,
                split.as_ptr(), 1, m as isize,
                self.mix.as_ptr(), k2 as isize, 1,
                0.0, self.rows_split.as_mut_ptr(), 1, m as isize,
            );
        }
        let (re, im) = self.rows_split.split_at(m * k);
        for ((p, a), b) in psi.iter_mut().zip(re).zip(im) {
            *p += a * a + b * b;
        }
        true
    }
}
