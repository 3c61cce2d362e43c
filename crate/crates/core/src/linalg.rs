//! Small fixed-size helpers on top of nalgebra.

use nalgebra::SMatrix;

/// Symmetrizes in place: `P <- (P + P^T) / 2`.
pub fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    for i in 0..N {
        for j in (i + 1)..N {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Lower-triangular factor `L` with `L L^T = m` for positive semi-definite `m`.
///
/// Zero pivots (for example unused noise dimensions) produce zero columns instead
/// of failing. Returns `None` for indefinite input.
pub fn psd_cholesky<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let scale = (0..N).map(|i| m[(i, i)].abs()).fold(1.0_f64, f64::max);
    let tol = 1e-13 * scale;
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > tol {
            let pivot = d.sqrt();
            l[(j, j)] = pivot;
            for i in (j + 1)..N {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / pivot;
            }
        } else if d >= -tol {
            // zero pivot: the remaining column must vanish for a PSD input
            for i in (j + 1)..N {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > 1e-9 * scale {
                    return None;
                }
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// [`psd_cholesky`], retrying once on `m + jitter * I`.
pub fn cholesky_with_jitter<const N: usize>(
    m: &SMatrix<f64, N, N>,
    jitter: f64,
) -> Option<SMatrix<f64, N, N>> {
    psd_cholesky(m).or_else(|| psd_cholesky(&(m + SMatrix::<f64, N, N>::identity() * jitter)))
}
