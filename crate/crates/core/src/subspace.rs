//! Hankel lifting of single-snapshot data and SVD-based subspace splitting.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::{CMatrix, Real};

/// Pencil parameter `L` for a length-`len` sub-vector.
///
/// The lifted matrix is `(L+1) × (len−L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelParams {
    pencil: usize,
    len: usize,
}

impl HankelParams {
    pub fn new(pencil: usize, len: usize) -> Result<Self> {
        if pencil < 1 || pencil >= len {
            return Err(Error::PencilOutOfRange { pencil, len });
        }
        Ok(Self { pencil, len })
    }

    /// `L = ⌊len/2⌋`.
    pub fn balanced(len: usize) -> Result<Self> {
        Self::new(len / 2, len)
    }

    pub fn pencil(&self) -> usize {
        self.pencil
    }

    pub fn rows(&self) -> usize {
        self.pencil + 1
    }

    pub fn cols(&self) -> usize {
        self.len - self.pencil
    }

    /// Identifiability: `1 ≤ K ≤ L` and `K ≤ len − L`.
    pub fn check_order(&self, order: usize) -> Result<()> {
        let max = self.pencil.min(self.len - self.pencil);
        if order == 0 || order > max {
            return Err(Error::InvalidOrder { order, max });
        }
        Ok(())
    }
}

/// `H[i][j] = y[i + j]` for `i ∈ [0, L]`, `j ∈ [0, len − L − 1]`.
pub fn hankel<T: Real>(y: &[Complex<T>], pencil: usize) -> Result<CMatrix<T>> {
    let params = HankelParams::new(pencil, y.len())?;
    Ok(DMatrix::from_fn(params.rows(), params.cols(), |i, j| y[i + j]))
}

/// Signal and noise bases from the left singular vectors of a lifted matrix.
#[derive(Debug, Clone)]
pub struct SubspacePair<T: Real> {
    signal: CMatrix<T>,
    noise: CMatrix<T>,
    singular_values: Vec<T>,
}

impl<T: Real> SubspacePair<T> {
    /// Assembles a pair from precomputed parts. Both bases must have the same
    /// row count.
    pub fn from_parts(signal: CMatrix<T>, noise: CMatrix<T>, singular_values: Vec<T>) -> Result<Self> {
        if signal.nrows() != noise.nrows() {
            return Err(Error::LengthMismatch { expected: signal.nrows(), got: noise.nrows() });
        }
        Ok(Self { signal, noise, singular_values })
    }

    pub fn signal(&self) -> &CMatrix<T> {
        &self.signal
    }

    pub fn noise(&self) -> &CMatrix<T> {
        &self.noise
    }

    /// Non-increasing.
    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    pub fn order(&self) -> usize {
        self.signal.ncols()
    }

    pub fn rows(&self) -> usize {
        self.signal.nrows()
    }
}

/// Complete set of left singular vectors (`rows × rows`) and the
/// `min(rows, cols)` singular values, descending.
///
/// Tall inputs are zero-padded to square so the SVD returns the full left
/// basis; padding adds only zero singular values.
pub fn left_singular<T: Real>(h: &CMatrix<T>) -> Result<(CMatrix<T>, Vec<T>)> {
    let (rows, cols) = h.shape();
    let work = if rows > cols {
        let mut padded = CMatrix::<T>::zeros(rows, rows);
        padded.view_mut((0, 0), (rows, cols)).copy_from(h);
        padded
    } else {
        h.clone()
    };
    let svd = SVD::try_new(work, true, false, T::eps(), 0).ok_or(Error::NoConvergence)?;
    let u = svd.u.ok_or(Error::NoConvergence)?;
    let values = svd.singular_values.iter().take(rows.min(cols)).copied().collect();
    Ok((u, values))
}

/// First `order` left singular vectors as signal basis, the rest as noise.
pub fn split_subspaces<T: Real>(h: &CMatrix<T>, order: usize) -> Result<SubspacePair<T>> {
    let max = h.nrows().min(h.ncols());
    if order == 0 || order >= max {
        return Err(Error::InvalidOrder { order, max: max.saturating_sub(1) });
    }
    let (u, singular_values) = left_singular(h)?;
    let rows = h.nrows();
    Ok(SubspacePair {
        signal: u.columns(0, order).into_owned(),
        noise: u.columns(order, rows - order).into_owned(),
        singular_values,
    })
}

/// SVD of the vertically stacked `[H(y1); H(y2)]`.
///
/// Both ULA blocks share one right factor, so the signal basis spans
/// `[A_L·D₁; A_L·D₂]` with the inter-ULA phases intact.
pub fn stacked_subspace<T: Real>(
    y1: &[Complex<T>],
    y2: &[Complex<T>],
    pencil: usize,
    order: usize,
) -> Result<SubspacePair<T>> {
    if y1.len() != y2.len() {
        return Err(Error::LengthMismatch { expected: y1.len(), got: y2.len() });
    }
    let h1 = hankel(y1, pencil)?;
    let h2 = hankel(y2, pencil)?;
    let rows = h1.nrows();
    let mut stacked = CMatrix::<T>::zeros(2 * rows, h1.ncols());
    stacked.rows_mut(0, rows).copy_from(&h1);
    stacked.rows_mut(rows, rows).copy_from(&h2);
    split_subspaces(&stacked, order)
}

/// `[U_s(H(y1)); U_s(H(y2))]` from two independent SVDs.
///
/// Each SVD picks its own basis of the same span, so the inter-ULA phase is
/// lost. Kept for comparison with [`stacked_subspace`].
pub fn concatenated_subspace<T: Real>(
    y1: &[Complex<T>],
    y2: &[Complex<T>],
    pencil: usize,
    order: usize,
) -> Result<CMatrix<T>> {
    let s1 = split_subspaces(&hankel(y1, pencil)?, order)?;
    let s2 = split_subspaces(&hankel(y2, pencil)?, order)?;
    let rows = s1.rows();
    let mut out = CMatrix::<T>::zeros(2 * rows, order);
    out.rows_mut(0, rows).copy_from(s1.signal());
    out.rows_mut(rows, rows).copy_from(s2.signal());
    Ok(out)
}

/// Smallest `K` whose trailing energy `Σ_{i>K} σ_i²` is below `10⁻³·Σ σ_i²`.
pub fn estimate_order<T: Real>(singular_values: &[T]) -> usize {
    let total = singular_values.iter().fold(T::zero(), |acc, s| acc + *s * *s);
    if total <= T::zero() {
        return 0;
    }
    let threshold = total * crate::num::lit(1e-3);
    let mut tail = total;
    for (k, s) in singular_values.iter().enumerate() {
        if tail < threshold {
            return k;
        }
        tail -= *s * *s;
    }
    singular_values.len()
}
