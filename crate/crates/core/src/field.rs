//! Field storage: complex wavefunctions and Madelung amplitude/action pairs.

use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Complex wavefunction samples psi(x_i) on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            values: (0..grid.n_points()).map(|i| f(grid.x(i))).collect(),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Total probability sum |psi_i|^2 dx.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// Rescale to norm_squared = 1.
    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_squared();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::DegenerateState {
                operation: "normalize",
            });
        }
        let scale = 1.0 / n2.sqrt();
        for v in &mut self.values {
            *v *= scale;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Pointwise |psi_i|.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm()).collect()
    }

    /// Pointwise |psi_i|^2.
    pub fn intensities(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Madelung pair: non-negative amplitude R and action S (units of hbar),
/// with psi = R exp(i S / hbar).
///
/// The material phase is the derived read-out Phi = -S / hbar; all evolution
/// and residual checks work on S itself.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    grid: Grid1D,
    r: Vec<f64>,
    s: Vec<f64>,
}

impl HydroFields {
    pub fn new(grid: Grid1D, r: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if r.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                got: r.len(),
            });
        }
        if s.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                got: s.len(),
            });
        }
        if r.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "amplitude samples must be finite and non-negative".into(),
            });
        }
        Ok(Self { grid, r, s })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// Material phase Phi = -S / hbar.
    pub fn material_phase(&self, constants: &PhysicalConstants) -> Vec<f64> {
        self.s.iter().map(|&s| -s / constants.hbar).collect()
    }
}

/// Normalized Gaussian wavepacket
/// psi(x) ~ exp(-(x - x0)^2 / (4 sigma0^2)) exp(i k0 x).
pub fn make_gaussian(grid: &Grid1D, x0: f64, sigma0: f64, k0: f64) -> Result<ComplexField> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma0",
            reason: format!("must be finite and positive, got {sigma0}"),
        });
    }
    if sigma0 < 2.0 * grid.dx() {
        return Err(Error::UnresolvableSigma {
            sigma0,
            min_sigma: 2.0 * grid.dx(),
        });
    }
    if k0.abs() >= grid.nyquist() {
        return Err(Error::Aliasing {
            k0,
            nyquist: grid.nyquist(),
        });
    }
    let mut psi = ComplexField::from_fn(*grid, |x| {
        let envelope = (-(x - x0).powi(2) / (4.0 * sigma0 * sigma0)).exp();
        envelope * Complex64::cis(k0 * x)
    });
    psi.normalize()?;
    Ok(psi)
}

/// Free function form of [`ComplexField::norm_squared`].
pub fn norm_squared(psi: &ComplexField) -> f64 {
    psi.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        // x = 0 and x = 2 are exact samples on this grid (dx = 1/32), which
        // the analytic ratio checks below rely on.
        Grid1D::new(1024, -16.0, 16.0).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let psi = make_gaussian(&grid(), 0.0, 1.0, 0.0).unwrap();
        assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_intensity_ratio_matches_analytic() {
        // |psi(0)|^2 / |psi(2)|^2 = exp(2^2 / (2 sigma^2)) = e^2 for sigma = 1.
        let g = grid();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let i0 = psi.values()[g.nearest_index(0.0)].norm_sqr();
        let i2 = psi.values()[g.nearest_index(2.0)].norm_sqr();
        let expected = std::f64::consts::E.powi(2);
        assert!(
            ((i0 / i2) - expected).abs() < 1e-6,
            "ratio {} vs {}",
            i0 / i2,
            expected
        );
    }

    #[test]
    fn gaussian_rejects_aliased_carrier() {
        let g = grid();
        let k_alias = std::f64::consts::TAU / g.dx();
        assert!(matches!(
            make_gaussian(&g, 0.0, 1.0, k_alias),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn gaussian_rejects_unresolvable_sigma() {
        let g = grid();
        assert!(matches!(
            make_gaussian(&g, 0.0, 0.5 * g.dx(), 0.0),
            Err(Error::UnresolvableSigma { .. })
        ));
    }

    #[test]
    fn norm_squared_basics() {
        let g = grid();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        assert!((norm_squared(&psi) - 1.0).abs() < 1e-12);

        let zero = ComplexField::zeros(g);
        assert_eq!(norm_squared(&zero), 0.0);

        let mut doubled = psi.clone();
        for v in doubled.values_mut() {
            *v *= 2.0;
        }
        assert!((doubled.norm_squared() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn norm_squared_is_phase_invariant() {
        let g = grid();
        let psi = make_gaussian(&g, 0.5, 1.3, 2.0).unwrap();
        for alpha in [std::f64::consts::PI / 7.0, 1.0, 3.0] {
            let mut rotated = psi.clone();
            let phase = Complex64::cis(alpha);
            for v in rotated.values_mut() {
                *v *= phase;
            }
            assert!((rotated.norm_squared() - psi.norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn hydro_fields_reject_negative_amplitude() {
        let g = grid();
        let n = g.n_points();
        let r = vec![-1.0; n];
        let s = vec![0.0; n];
        assert!(HydroFields::new(g, r, s).is_err());
    }

    #[test]
    fn material_phase_is_minus_s_over_hbar() {
        let g = grid();
        let n = g.n_points();
        let c = PhysicalConstants::natural();
        let f = HydroFields::new(g, vec![1.0; n], vec![0.5; n]).unwrap();
        assert!(f.material_phase(&c).iter().all(|&p| (p + 0.5).abs() < 1e-15));
    }
}
