use super::AnalyzeError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    /// `slope + 1/2`: the gain over the `ε^{−1/2}` rate.
    pub fn beta(&self) -> f64 {
        self.slope + 0.5
    }
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit, AnalyzeError> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(AnalyzeError::Degenerate(format!(
            "need at least 4 pairs, got {}",
            x.len().min(y.len())
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(AnalyzeError::Degenerate(format!("non-positive value {v}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

fn linear_fit(x: &[f64], y: &[f64]) -> Result<PowerLawFit, AnalyzeError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(AnalyzeError::Degenerate("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let stderr = if x.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        stderr,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscDecay {
    /// Slope of `log₂ osc` against `log₂ r`.
    pub sigma: f64,
    /// `osc(r_{k+1}) / osc(r_k)` for consecutive radii.
    pub step_ratios: Vec<f64>,
    pub r_squared: f64,
}

pub fn osc_decay_fit(radii: &[f64], osc: &[f64]) -> Result<OscDecay, AnalyzeError> {
    if radii.len() != osc.len() || radii.len() < 4 {
        return Err(AnalyzeError::Degenerate(format!(
            "need at least 4 radii, got {}",
            radii.len()
        )));
    }
    if let Some(v) = osc.iter().chain(radii).find(|v| !(**v > 0.0)) {
        return Err(AnalyzeError::Degenerate(format!(
            "oscillation data contains {v}"
        )));
    }
    let lx: Vec<f64> = radii.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = osc.iter().map(|v| v.log2()).collect();
    let fit = linear_fit(&lx, &ly)?;
    let step_ratios = osc.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(OscDecay {
        sigma: fit.slope,
        step_ratios,
        r_squared: fit.r_squared,
    })
}

/// Decay rate implied by a Harnack constant through `2^{−σ} = (C₁ − 1)/(C₁ + 1)`.
pub fn sigma_from_harnack(c1: f64) -> f64 {
    -((c1 - 1.0) / (c1 + 1.0)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: [f64; 5] = [4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3];

    #[test]
    fn exact_power_laws_are_recovered() {
        let m: Vec<f64> = EPS.iter().map(|e| e.powf(-0.5)).collect();
        let f = fit_power_law(&EPS, &m).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        let yun = (2f64.sqrt() - 2.0) / 2.0;
        let m: Vec<f64> = EPS.iter().map(|e| 3.0 * e.powf(yun)).collect();
        let f = fit_power_law(&EPS, &m).unwrap();
        assert!((f.slope - -0.292_893_218_813_452_5).abs() < 1e-12);
        let flat = fit_power_law(&EPS, &[2.0; 5]).unwrap();
        assert!(flat.slope.abs() < 1e-15);
    }

    #[test]
    fn bad_data_is_rejected() {
        assert!(fit_power_law(&EPS[..3], &[1.0; 3]).is_err());
        assert!(fit_power_law(&EPS, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(osc_decay_fit(&[1.0, 0.5, 0.25, 0.125], &[1.0, 0.5, 0.0, 0.1]).is_err());
    }

    #[test]
    fn oscillation_decay_examples() {
        let r = [0.4, 0.2, 0.1, 0.05, 0.025];
        let d = osc_decay_fit(&r, &r).unwrap();
        assert!((d.sigma - 1.0).abs() < 1e-12);
        assert!(d.step_ratios.iter().all(|s| (s - 0.5).abs() < 1e-12));
        assert!(osc_decay_fit(&r, &[0.3; 5]).unwrap().sigma.abs() < 1e-12);
        assert!((sigma_from_harnack(3.0) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn scaling_data_moves_only_the_intercept(slope in -1.0f64..0.5, noise in prop::array::uniform5(-0.1f64..0.1), c in 0.1f64..10.0) {
            let m: Vec<f64> = EPS.iter().zip(noise).map(|(e, z)| c * e.powf(slope) * (1.0 + z)).collect();
            let a = fit_power_law(&EPS, &m).unwrap();
            let m10: Vec<f64> = m.iter().map(|v| 10.0 * v).collect();
            let b = fit_power_law(&EPS, &m10).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-12);
            prop_assert!((b.intercept - a.intercept - 10f64.ln()).abs() < 1e-12);
            prop_assert!((a.r_squared - b.r_squared).abs() < 1e-12);
        }
    }
}
