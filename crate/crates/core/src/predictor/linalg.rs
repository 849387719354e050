//! Row-major dense helpers for the hand-written forward/backward passes.

use crate::scalar::Real;

/// `out = M x` for `M` of shape `rows × cols`.
pub(crate) fn matvec<T: Real>(m: &[T], rows: usize, cols: usize, x: &[T], out: &mut [T]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
    }
}

/// `out += M x`.
pub(crate) fn matvec_acc<T: Real>(m: &[T], rows: usize, cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
    }
}

/// `out += Mᵀ y`.
pub(crate) fn matvec_t_acc<T: Real>(m: &[T], rows: usize, cols: usize, y: &[T], out: &mut [T]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == T::zero() {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `G += y xᵀ`.
pub(crate) fn outer_acc<T: Real>(g: &mut [T], rows: usize, cols: usize, y: &[T], x: &[T]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, &b) in row.iter_mut().zip(x) {
            *o += yr * b;
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub type Mat4<T> = [[T; 4]; 4];

pub(crate) fn mat4_zero<T: Real>() -> Mat4<T> {
    [[T::zero(); 4]; 4]
}

pub(crate) fn mat4_mul<T: Real>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut c = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub(crate) fn mat4_transpose<T: Real>(a: &Mat4<T>) -> Mat4<T> {
    let mut t = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real, const N: usize>(m: &[[T; N]; N]) -> [T; N] {
    let mut a = *m;
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        let off: T = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: T = (0..N).map(|i| a[i][i] * a[i][i]).sum::<T>() + off;
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev = [T::zero(); N];
    for i in 0..N {
        ev[i] = a[i][i];
    }
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Symmetric within `tol` and minimum eigenvalue ≥ `-tol`.
pub fn is_symmetric_psd<T: Real, const N: usize>(m: &[[T; N]; N], tol: T) -> bool {
    for i in 0..N {
        for j in 0..N {
            if !m[i][j].is_finite() || (m[i][j] - m[j][i]).abs() > tol {
                return false;
            }
        }
    }
    symmetric_eigenvalues(m)[0] >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_known_matrix() {
        // eigenvalues 1, 3 for [[2,1],[1,2]]
        let ev = symmetric_eigenvalues(&[[2.0f64, 1.0], [1.0, 2.0]]);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        let m = [
            [4.0f64, 1.0, 0.0, 0.5],
            [1.0, 3.0, 0.2, 0.0],
            [0.0, 0.2, 2.0, 0.1],
            [0.5, 0.0, 0.1, 1.0],
        ];
        let ev = symmetric_eigenvalues(&m);
        let trace: f64 = ev.iter().sum();
        assert!((trace - 10.0).abs() < 1e-12);
        assert!(is_symmetric_psd(&m, 1e-12));
        assert!(!is_symmetric_psd(&[[1.0f64, 2.0], [2.0, 1.0]], 1e-12));
    }

    #[test]
    fn matvec_transpose_consistency() {
        let m = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = [1.0, -1.0, 2.0];
        let mut y = [0.0; 2];
        matvec(&m, 2, 3, &x, &mut y);
        assert_eq!(y, [5.0, 11.0]);
        let mut back = [0.0; 3];
        matvec_t_acc(&m, 2, 3, &[1.0, 1.0], &mut back);
        assert_eq!(back, [5.0, 7.0, 9.0]);
    }
}
