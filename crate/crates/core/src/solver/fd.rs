use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default relative finite-difference step.
pub const DEFAULT_H_REL: f64 = 1e-6;

/// Central-difference gradient with per-coordinate step
/// `h = h_rel * max(1, |p_n|)`. Perturbed vectors are passed to `f` as they
/// are, without renormalization.
pub fn fd_gradient<T, F>(f: &F, p: &[T], h_rel: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + ?Sized,
{
    let mut probe = p.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for n in 0..p.len() {
        let h = h_rel * p[n].abs().max(T::one());
        let (up, down) = (p[n] + h, p[n] - h);
        probe[n] = up;
        let fu = f(&probe);
        probe[n] = down;
        let fd = f(&probe);
        probe[n] = p[n];
        if !(fu.is_finite() && fd.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        // The representable stencil width, not 2h.
        grad.push((fu - fd) / (up - down));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        let c = [0.3, -1.2, 2.5];
        let f = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let g = fd_gradient(&f, &[0.2, 0.3, 0.5], 1e-6).unwrap();
        for (a, b) in g.iter().zip(&c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_gives_zero() {
        let g = fd_gradient(&|_: &[f64]| 4.0, &[0.5, 0.5], 1e-6).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn nan_is_reported() {
        let f = |p: &[f64]| if p[0] > 0.5 { f64::NAN } else { p[0] };
        assert!(matches!(
            fd_gradient(&f, &[0.5, 0.5], 1e-6),
            Err(Error::NonFiniteEvaluation)
        ));
    }
}
