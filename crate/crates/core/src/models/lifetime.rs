use super::ModelWarning;
use crate::domain::TimePs;
use crate::error::{Error, Result};

/// Sum of two exponential decays, defined for `t >= 0`.
pub fn lifetime_decay(t_ps: TimePs, amplitudes: [f64; 2], taus_ps: [TimePs; 2]) -> Result<f64> {
    if t_ps < 0.0 || !t_ps.is_finite() {
        return Err(Error::input(format!("decay time must be >= 0, got {t_ps}")));
    }
    if taus_ps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::input("decay constants must be positive"));
    }
    Ok(amplitudes[0] * (-t_ps / taus_ps[0]).exp() + amplitudes[1] * (-t_ps / taus_ps[1]).exp())
}

/// `T2 / 2T1`; values above one are returned with a warning.
pub fn fourier_limit_ratio(t2_ps: TimePs, t1_ps: TimePs) -> Result<(f64, Option<ModelWarning>)> {
    if !(t2_ps > 0.0 && t1_ps > 0.0 && t2_ps.is_finite() && t1_ps.is_finite()) {
        return Err(Error::input("coherence and lifetime must be positive"));
    }
    let ratio = t2_ps / (2.0 * t1_ps);
    let warning = (ratio > 1.0).then_some(ModelWarning::UnphysicalCoherence { ratio });
    Ok((ratio, warning))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_examples() {
        assert_eq!(lifetime_decay(0.0, [2.0, 0.5], [1765.0, 300.0]).unwrap(), 2.5);
        let single = lifetime_decay(1765.0, [1.0, 0.0], [1765.0, 300.0]).unwrap();
        assert!((single - (-1.0f64).exp()).abs() < 1e-15);
        assert!(lifetime_decay(-1.0, [1.0, 0.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn fourier_limit_examples() {
        let (r, w) = fourier_limit_ratio(1058.0, 1765.0).unwrap();
        assert!((r - 0.2997).abs() < 1e-4);
        assert!(w.is_none());
        assert_eq!(fourier_limit_ratio(2.0 * 900.0, 900.0).unwrap().0, 1.0);
        assert!(fourier_limit_ratio(1e-3, 1765.0).unwrap().0 < 1e-6);
        assert!(fourier_limit_ratio(5000.0, 1000.0).unwrap().1.is_some());
    }
}
