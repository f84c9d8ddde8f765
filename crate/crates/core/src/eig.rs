//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.

use crate::cplx::{CMat, C64, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

fn frobenius(a: &CMat) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal(a: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition `A = U diag(lambda) U^H` of a Hermitian matrix.
/// Eigenvalues are returned in descending order with matching columns of `U`.
pub fn herm_eig(a: &CMat) -> Result<(CMat, Vec<f64>)> {
    if a.rows != a.cols {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let scale = frobenius(a);
    if !scale.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if frobenius(&a.sub(&a.adjoint())) > 1e-10 * scale {
        return Err(Error::invalid("matrix is not Hermitian"));
    }
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
    }
    let mut v = CMat::identity(n);
    let tol = f64::EPSILON * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / mag;
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let gpp = C64::new(c, 0.0);
                let gpq = C64::new(s, 0.0);
                let gqp = phase.conj() * (-s);
                let gqq = phase.conj() * c;

                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = aip * gpp + aiq * gqp;
                    m[(i, q)] = aip * gpq + aiq * gqq;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * gpp + viq * gqp;
                    v[(i, q)] = vip * gpq + viq * gqq;
                }
                for j in 0..n {
                    let apj = m[(p, j)];
                    let aqj = m[(q, j)];
                    m[(p, j)] = gpp.conj() * apj + gqp.conj() * aqj;
                    m[(q, j)] = gpq.conj() * apj + gqq.conj() * aqj;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
            }
        }
    }
    if off_diagonal(&m) > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical("Jacobi sweeps did not converge"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].re.total_cmp(&m[(x, x)].re));
    let lambda = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut u = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            u[(i, dst)] = v[(i, src)];
        }
    }
    Ok((u, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(u: &CMat, lambda: &[f64]) -> CMat {
        let mut d = CMat::zeros(lambda.len(), lambda.len());
        for (i, &l) in lambda.iter().enumerate() {
            d[(i, i)] = C64::new(l, 0.0);
        }
        u.matmul(&d).matmul(&u.adjoint())
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        // Gram-Schmidt on random columns.
        let mut cols: Vec<Vec<C64>> = Vec::new();
        while cols.len() < n {
            let mut v: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            for c in &cols {
                let p = crate::cplx::dot_h(c, &v);
                crate::cplx::axpy(-p, c, &mut v);
            }
            let nv = crate::cplx::norm(&v);
            cols.push(v.iter().map(|z| z / nv).collect());
        }
        let refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
        CMat::from_columns(&refs)
    }

    fn check(a: &CMat) -> (CMat, Vec<f64>) {
        let (u, l) = herm_eig(a).unwrap();
        let scale = a.max_abs().max(1e-300);
        assert!(reconstruct(&u, &l).sub(a).max_abs() <= 1e-10 * scale);
        assert!(
            u.adjoint()
                .matmul(&u)
                .sub(&CMat::identity(a.rows))
                .max_abs()
                <= 1e-10
        );
        assert!(l.windows(2).all(|w| w[0] >= w[1]));
        (u, l)
    }

    #[test]
    fn identity_matrix() {
        let (_, l) = check(&CMat::identity(4));
        assert!(l.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_is_sorted() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(3.0, 0.0);
        let (u, l) = check(&a);
        assert_eq!(l, vec![3.0, 1.0]);
        assert!((u[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((u[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn known_spectrum_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_unitary(6, &mut rng);
        let d = [5.0, 3.5, 2.0, 0.5, -1.0, -4.0];
        let a = reconstruct(&q, &d);
        let (_, l) = check(&a);
        for (x, y) in l.iter().zip(d) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn random_up_to_32() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8, 13, 21, 32] {
            let mut a = CMat::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = C64::new(rng.random::<f64>() * 4.0 - 2.0, 0.0);
                for j in i + 1..n {
                    let z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    a[(i, j)] = z;
                    a[(j, i)] = z.conj();
                }
            }
            check(&a);
        }
    }

    #[test]
    fn tiny_scale_matrix() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = C64::new(2e-13, 0.0);
        a[(0, 1)] = C64::new(1e-13, 3e-14);
        a[(1, 0)] = C64::new(1e-13, -3e-14);
        a[(1, 1)] = C64::new(1e-13, 0.0);
        a[(2, 2)] = C64::new(5e-14, 0.0);
        check(&a);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = CMat::identity(2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(herm_eig(&a), Err(Error::InvalidArgument(_))));
        assert!(herm_eig(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_matrix() {
        let (_, l) = check(&CMat::zeros(3, 3));
        assert_eq!(l, vec![0.0; 3]);
    }
}
