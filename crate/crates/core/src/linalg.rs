//! Unpreconditioned conjugate gradient for symmetric positive (semi-)definite
//! operators. Shared by the pressure projection and the cage deformation
//! limiter.

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once `max_i |r_i| <= tol`.
    MaxAbs(f64),
    /// Stop once `||r||_2 <= tol`.
    Euclidean(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn measure(rule: StopRule, r: &[f64]) -> (f64, f64) {
    match rule {
        StopRule::MaxAbs(tol) => (r.iter().fold(0.0f64, |m, v| m.max(v.abs())), tol),
        StopRule::Euclidean(tol) => (dot(r, r).sqrt(), tol),
    }
}

/// Solves `A x = b`, starting from the value already in `x`.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    rule: StopRule,
    max_iter: usize,
) -> CgOutcome {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let (mut res, tol) = measure(rule, &r);
    if res <= tol {
        return CgOutcome {
            iterations: 0,
            residual: res,
            converged: true,
        };
    }

    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return CgOutcome {
                iterations: it,
                residual: res,
                converged: false,
            };
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = measure(rule, &r).0;
        if res <= tol {
            return CgOutcome {
                iterations: it,
                residual: res,
                converged: true,
            };
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgOutcome {
        iterations: max_iter,
        residual: res,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Vec<Vec<f64>>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            for (o, row) in out.iter_mut().zip(&self.0) {
                *o = dot(row, x);
            }
        }
    }

    #[test]
    fn solves_small_spd_system() {
        let a = Dense(vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ]);
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        let out = conjugate_gradient(&a, &b, &mut x, StopRule::Euclidean(1e-12), 50);
        assert!(out.converged);
        let mut ax = [0.0; 3];
        a.apply(&x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = Dense(vec![vec![2.0]]);
        let mut x = [0.0];
        let out = conjugate_gradient(&a, &[0.0], &mut x, StopRule::MaxAbs(1e-9), 10);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }
}
