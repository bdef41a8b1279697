//! Hydrodynamic (Madelung) form of the wavefunction.
//!
//! Writing psi = R exp(iS/hbar) turns the Schrödinger equation into two
//! coupled real equations,
//!
//! ```text
//! dS/dt + (grad S)²/2m + V - (hbar²/2m)(lap R / R) = 0      (Hamilton-Jacobi)
//! d(R²)/dt + div(R² grad S / m) = 0                          (continuity)
//! ```
//!
//! so amplitude and action codetermine each other: neither field can be
//! changed without the residuals above lighting up. This module extracts
//! (R, S) from oracle wavefunctions, evaluates both residuals, and also
//! integrates the pair directly for node-free packets as an independent
//! evolution route.
//!
//! Near amplitude nodes lap R / R diverges and the phase loses meaning, so
//! everything phase-related is computed against a [`ValidMask`] of samples
//! with R above a relative threshold.

use std::f64::consts::{PI, TAU};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::field::{ComplexField, HydroFields};
use crate::grid::Grid1D;
use crate::schrodinger::Potential;
use crate::spectral::{fd4_derivative, fd4_second_derivative, Spectral};

/// Default relative amplitude threshold for [`ValidMask`].
pub const DEFAULT_MASK_EPSILON: f64 = 1e-3;

/// A residual jump this close to pi is an ambiguous branch choice and is
/// reported as an unwrap failure instead of silently picked.
const UNWRAP_AMBIGUITY_MARGIN: f64 = 1e-3;

/// Amplitude floor used before taking logarithms (far below any physical
/// amplitude on the supported domains, far above the subnormal range).
const LOG_AMPLITUDE_FLOOR: f64 = 1e-300;

/// Relative amplitude below which samples take no part in the direct
/// integration. The hull of the region above this threshold is advanced
/// with extrapolated ghost cells at its ends; outside it the fields are
/// frozen. Differencing across the domain seam would otherwise mix the two
/// tails of the packet, whose log-amplitude and action are not periodic,
/// and the resulting kink blows up through the (grad S)² nonlinearity.
const LIVE_EPSILON: f64 = 1e-9;

/// Samples where the amplitude is large enough for phase quantities to be
/// trustworthy: mask[i] = R[i] > epsilon * max(R).
#[derive(Debug, Clone)]
pub struct ValidMask {
    epsilon: f64,
    mask: Vec<bool>,
}

impl ValidMask {
    pub fn from_amplitude(r: &[f64], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("mask threshold must lie in (0, 1), got {epsilon}"),
            });
        }
        let r_max = r.iter().copied().fold(0.0, f64::max);
        let threshold = epsilon * r_max;
        Ok(Self {
            epsilon,
            mask: r.iter().map(|&v| v > threshold).collect(),
        })
    }

    pub fn from_fields(fields: &HydroFields, epsilon: f64) -> Result<Self> {
        Self::from_amplitude(fields.r(), epsilon)
    }

    /// Mask of samples valid in *every* snapshot (each against its own
    /// amplitude maximum).
    pub fn intersection_of(snapshots: &[HydroFields], epsilon: f64) -> Result<Self> {
        let first = snapshots.first().ok_or(Error::InsufficientSnapshots {
            required: 1,
            got: 0,
        })?;
        let mut combined = Self::from_fields(first, epsilon)?;
        for f in &snapshots[1..] {
            let m = Self::from_fields(f, epsilon)?;
            if m.mask.len() != combined.mask.len() {
                return Err(Error::DimensionMismatch {
                    expected: combined.mask.len(),
                    got: m.mask.len(),
                });
            }
            for (a, b) in combined.mask.iter_mut().zip(&m.mask) {
                *a = *a && *b;
            }
        }
        Ok(combined)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&m| !m)
    }

    /// Indices of valid samples.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    /// True if the valid samples form one contiguous run (no interior
    /// below-threshold dip, i.e. no node between occupied regions).
    pub fn is_contiguous(&self) -> bool {
        let mut seen_run = false;
        let mut in_run = false;
        for &m in &self.mask {
            if m && !in_run {
                if seen_run {
                    return false;
                }
                in_run = true;
                seen_run = true;
            } else if !m {
                in_run = false;
            }
        }
        seen_run
    }

    fn max_on_mask(&self, values: &[f64]) -> f64 {
        self.indices().map(|i| values[i].abs()).fold(0.0, f64::max)
    }
}

/// Unwrap raw phases (radians) along the grid: every step between adjacent
/// samples is folded into (-pi, pi]. The mask is used for failure detection
/// only — a span whose total jump lands within [`UNWRAP_AMBIGUITY_MARGIN`]
/// of ±pi (or beyond) between consecutive *valid* samples, including across
/// a masked-out gap, means the branch cannot be chosen reliably.
fn spatial_unwrap(theta_raw: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let n = theta_raw.len();
    let mut out = Vec::with_capacity(n);
    out.push(theta_raw[0]);
    let mut correction = 0.0;
    for i in 1..n {
        let raw_jump = theta_raw[i] - theta_raw[i - 1];
        let wrapped = raw_jump - TAU * (raw_jump / TAU).round();
        correction += wrapped - raw_jump;
        out.push(theta_raw[i] + correction);
    }
    let mut prev_valid: Option<usize> = None;
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        if let Some(p) = prev_valid {
            let jump = out[i] - out[p];
            if jump.abs() > PI - UNWRAP_AMBIGUITY_MARGIN {
                return Err(Error::UnwrapFailure {
                    prev: p,
                    index: i,
                    jump,
                    margin: UNWRAP_AMBIGUITY_MARGIN,
                });
            }
        }
        prev_valid = Some(i);
    }
    Ok(out)
}

/// Extract (R, S) from wavefunction snapshots with the default mask
/// threshold. See [`polar_decompose_with_epsilon`].
pub fn polar_decompose(
    snapshots: &[ComplexField],
    constants: &PhysicalConstants,
) -> Result<Vec<HydroFields>> {
    polar_decompose_with_epsilon(snapshots, DEFAULT_MASK_EPSILON, constants)
}

/// Extract R = |psi| and S = hbar arg(psi), with the phase unwrapped
/// spatially (left to right, 2pi-fold removal, ambiguity detection on the
/// valid mask) and continued temporally: each snapshot's overall 2pi-branch
/// is chosen to minimize max|S_t - S_{t-1}| over the common mask, so S stays
/// continuous through accumulated phases beyond ±pi.
pub fn polar_decompose_with_epsilon(
    snapshots: &[ComplexField],
    epsilon: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<HydroFields>> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientSnapshots {
            required: 1,
            got: 0,
        });
    }
    let grid = *snapshots[0].grid();
    let mut out = Vec::with_capacity(snapshots.len());
    let mut prev: Option<(Vec<f64>, Vec<bool>)> = None;
    for psi in snapshots {
        if psi.grid() != &grid {
            return Err(Error::InvalidParameter {
                name: "snapshots",
                reason: "all snapshots must share one grid".into(),
            });
        }
        if psi.norm_squared() <= 0.0 {
            return Err(Error::DegenerateState {
                operation: "polar-decompose",
            });
        }
        let r = psi.amplitudes();
        let mask = ValidMask::from_amplitude(&r, epsilon)?;
        let theta_raw: Vec<f64> = psi.values().iter().map(|c| c.arg()).collect();
        let theta = spatial_unwrap(&theta_raw, mask.mask())?;
        let mut s: Vec<f64> = theta.iter().map(|&t| t * constants.hbar).collect();

        if let Some((prev_s, prev_mask)) = &prev {
            let branch = TAU * constants.hbar;
            let mut min_d = f64::INFINITY;
            let mut max_d = f64::NEG_INFINITY;
            for i in 0..s.len() {
                if mask.mask()[i] && prev_mask[i] {
                    let d = s[i] - prev_s[i];
                    min_d = min_d.min(d);
                    max_d = max_d.max(d);
                }
            }
            if min_d.is_finite() {
                let shift = -(min_d + max_d) / 2.0;
                let folds = (shift / branch).round();
                if folds != 0.0 {
                    for v in &mut s {
                        *v += branch * folds;
                    }
                }
            }
        }
        prev = Some((s.clone(), mask.mask().to_vec()));
        out.push(HydroFields::new(grid, r, s)?);
    }
    Ok(out)
}

/// Rebuild psi = R exp(iS/hbar). Inverse of [`polar_decompose`] on the valid
/// mask (off the mask the phase is whatever the unwrap filled in).
pub fn reconstruct_psi(fields: &HydroFields, constants: &PhysicalConstants) -> ComplexField {
    let values = fields
        .r()
        .iter()
        .zip(fields.s())
        .map(|(&r, &s)| r * num_complex::Complex64::cis(s / constants.hbar))
        .collect();
    ComplexField::new(*fields.grid(), values).expect("matching grid by construction")
}

/// Quantum potential Q = -(hbar²/2m) lap R / R on the mask, 0 (invalid)
/// elsewhere. The Laplacian is spectral: R is periodic-decaying for the
/// supported states.
pub fn quantum_potential(
    fields: &HydroFields,
    mask: &ValidMask,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    if mask.len() != fields.grid().n_points() {
        return Err(Error::DimensionMismatch {
            expected: fields.grid().n_points(),
            got: mask.len(),
        });
    }
    let spectral = Spectral::new(*fields.grid());
    let lap_r = spectral.second_derivative_real(fields.r())?;
    let coeff = -constants.hbar * constants.hbar / (2.0 * constants.mass);
    Ok(fields
        .r()
        .iter()
        .zip(&lap_r)
        .zip(mask.mask())
        .map(|((&r, &lap), &m)| if m { coeff * lap / r } else { 0.0 })
        .collect())
}

/// Pointwise residuals of the two coupled equations, with maxima taken over
/// the valid mask. The stored arrays belong to the interior snapshot where
/// the respective maximum was attained.
#[derive(Debug, Clone)]
pub struct QhjResiduals {
    /// Hamilton-Jacobi residual dS/dt + (grad S)²/2m + V + Q (energy units).
    pub hj_residual: Vec<f64>,
    /// Continuity residual d(R²)/dt + div(R² grad S / m).
    pub continuity_residual: Vec<f64>,
    pub hj_max: f64,
    pub continuity_max: f64,
}

/// Evaluate both coupled-equation residuals over equally spaced snapshots
/// (2nd-order central time differences at the interior snapshots).
///
/// grad S uses the 4th-order local stencil: the unwrapped action of a
/// spreading packet grows quadratically toward the domain edge and is not
/// periodic, so a spectral derivative would ring globally. R and the flux
/// R² grad S / m decay at the edges and stay spectral.
pub fn qhj_residuals(
    fields_t: &[HydroFields],
    times: &[f64],
    v: &Potential,
    mask: &ValidMask,
    constants: &PhysicalConstants,
) -> Result<QhjResiduals> {
    if fields_t.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            required: 3,
            got: fields_t.len(),
        });
    }
    if times.len() != fields_t.len() {
        return Err(Error::DimensionMismatch {
            expected: fields_t.len(),
            got: times.len(),
        });
    }
    let grid = *fields_t[0].grid();
    if fields_t.iter().any(|f| f.grid() != &grid) {
        return Err(Error::InvalidParameter {
            name: "fields_t",
            reason: "all snapshots must share one grid".into(),
        });
    }
    if mask.len() != grid.n_points() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_points(),
            got: mask.len(),
        });
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "must be strictly increasing".into(),
        });
    }
    let tol = 1e-9 * h.abs().max(1.0);
    let max_dev = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) - h).abs())
        .fold(0.0, f64::max);
    if max_dev > tol {
        return Err(Error::NonuniformSpacing { max_dev, tol });
    }
    v.validate(&grid)?;

    let spectral = Spectral::new(grid);
    let v_samples = v.sample(&grid, constants);
    let n = grid.n_points();
    let m = constants.mass;

    let mut best_hj: Option<(f64, Vec<f64>)> = None;
    let mut best_cont: Option<(f64, Vec<f64>)> = None;

    for j in 1..fields_t.len() - 1 {
        let f = &fields_t[j];
        let grad_s = fd4_derivative(f.s(), grid.dx());
        let q = quantum_potential(f, mask, constants)?;
        let flux: Vec<f64> = f
            .r()
            .iter()
            .zip(&grad_s)
            .map(|(&r, &gs)| r * r * gs / m)
            .collect();
        let div_flux = spectral.derivative_real(&flux)?;

        let mut hj = vec![0.0; n];
        let mut cont = vec![0.0; n];
        for i in 0..n {
            if !mask.mask()[i] {
                continue;
            }
            let ds_dt = (fields_t[j + 1].s()[i] - fields_t[j - 1].s()[i]) / (2.0 * h);
            let rp = fields_t[j + 1].r()[i];
            let rm = fields_t[j - 1].r()[i];
            let dp_dt = (rp * rp - rm * rm) / (2.0 * h);
            hj[i] = ds_dt + grad_s[i] * grad_s[i] / (2.0 * m) + v_samples[i] + q[i];
            cont[i] = dp_dt + div_flux[i];
        }
        let hj_max = mask.max_on_mask(&hj);
        let cont_max = mask.max_on_mask(&cont);
        if best_hj.as_ref().map_or(true, |(b, _)| hj_max > *b) {
            best_hj = Some((hj_max, hj));
        }
        if best_cont.as_ref().map_or(true, |(b, _)| cont_max > *b) {
            best_cont = Some((cont_max, cont));
        }
    }

    let (hj_max, hj_residual) = best_hj.expect("at least one interior snapshot");
    let (continuity_max, continuity_residual) =
        best_cont.expect("at least one interior snapshot");
    Ok(QhjResiduals {
        hj_residual,
        continuity_residual,
        hj_max,
        continuity_max,
    })
}

/// Stability guard for [`madelung_step`]: dt must not exceed
/// 0.2 dx² m / hbar (the quantum-potential branch is dispersive with
/// omega ~ hbar k²/2m, and the explicit RK4 stepper needs the fastest mode
/// resolved with margin).
pub fn madelung_max_dt(grid: &Grid1D, constants: &PhysicalConstants) -> f64 {
    0.2 * grid.dx() * grid.dx() * constants.mass / constants.hbar
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MadelungStepInfo {
    /// Samples held at the internal amplitude floor during the step
    /// (structurally zero for the node-free states the stepper accepts).
    pub clamp_count: usize,
}

struct DirectStepper<'a> {
    grid: Grid1D,
    v: Vec<f64>,
    epsilon: f64,
    constants: &'a PhysicalConstants,
}

impl<'a> DirectStepper<'a> {
    fn new(
        grid: Grid1D,
        v: &Potential,
        epsilon: f64,
        constants: &'a PhysicalConstants,
    ) -> Result<Self> {
        v.validate(&grid)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("mask threshold must lie in (0, 1), got {epsilon}"),
            });
        }
        Ok(Self {
            grid,
            v: v.sample(&grid, constants),
            epsilon,
            constants,
        })
    }

    /// Node gate: the above-threshold samples must form one contiguous run.
    /// (A plain min/max test over the whole grid cannot work here — any
    /// localized packet has tails far below threshold at the domain edges.
    /// What the direct scheme cannot cross is an *interior* dip between
    /// occupied regions.)
    fn check_node_free(&self, r: &[f64]) -> Result<()> {
        let mask = ValidMask::from_amplitude(r, self.epsilon)?;
        if mask.is_empty() {
            return Err(Error::DegenerateState {
                operation: "integrate the Madelung equations",
            });
        }
        if !mask.is_contiguous() {
            let first = mask.indices().next().unwrap();
            let last = mask.indices().last().unwrap();
            let dip = (first..=last)
                .filter(|&i| !mask.mask()[i])
                .min_by(|&a, &b| r[a].total_cmp(&r[b]))
                .unwrap_or(first);
            return Err(Error::NodePresent {
                x: self.grid.x(dip),
            });
        }
        Ok(())
    }

    /// Hull [lo, hi] of the samples that take part in the integration.
    fn live_region(&self, r: &[f64]) -> (usize, usize) {
        let r_max = r.iter().copied().fold(0.0, f64::max);
        let threshold = LIVE_EPSILON * r_max;
        let lo = r.iter().position(|&v| v > threshold).unwrap_or(0);
        let hi = r
            .iter()
            .rposition(|&v| v > threshold)
            .unwrap_or(r.len() - 1);
        (lo, hi)
    }

    /// Time derivatives of (u = ln R, S):
    ///   du/dt = -(u' S' + S''/2) / m            (continuity)
    ///   dS/dt = -((S')²/2m + V + Q)             (Hamilton-Jacobi)
    /// with Q = -(hbar²/2m)(u'' + (u')²) = -(hbar²/2m) R''/R.
    ///
    /// Derivatives are evaluated on the live hull only, padded with
    /// quadratically extrapolated ghost cells; the frozen tails get zero
    /// time derivative. All stencils are local, so edge errors cannot ring
    /// across the grid the way a global transform would.
    fn rhs(&self, u: &[f64], s: &[f64], lo: usize, hi: usize) -> (Vec<f64>, Vec<f64>) {
        const GHOST: usize = 4;
        let dx = self.grid.dx();
        let m = self.constants.mass;
        let hb = self.constants.hbar;
        let n = u.len();

        let pad = |f: &[f64]| -> Vec<f64> {
            let len = hi - lo + 1;
            let mut out = vec![0.0; len + 2 * GHOST];
            out[GHOST..GHOST + len].copy_from_slice(&f[lo..=hi]);
            // quadratic extrapolation through the three edge samples
            let (a0, a1, a2) = (f[lo], f[lo + 1], f[lo + 2]);
            let (b0, b1, b2) = (f[hi], f[hi - 1], f[hi - 2]);
            for g in 1..=GHOST {
                let gf = g as f64;
                out[GHOST - g] = a0 * (1.0 + 1.5 * gf + 0.5 * gf * gf)
                    - a1 * (2.0 * gf + gf * gf)
                    + a2 * (0.5 * gf + 0.5 * gf * gf);
                out[GHOST + len - 1 + g] = b0 * (1.0 + 1.5 * gf + 0.5 * gf * gf)
                    - b1 * (2.0 * gf + gf * gf)
                    + b2 * (0.5 * gf + 0.5 * gf * gf);
            }
            out
        };

        let u_pad = pad(u);
        let s_pad = pad(s);
        let du_dx = fd4_derivative(&u_pad, dx);
        let d2u = fd4_second_derivative(&u_pad, dx);
        let ds_dx = fd4_derivative(&s_pad, dx);
        let d2s = fd4_second_derivative(&s_pad, dx);

        let mut du_dt = vec![0.0; n];
        let mut ds_dt = vec![0.0; n];
        for i in lo..=hi {
            let p = i - lo + GHOST;
            du_dt[i] = -(du_dx[p] * ds_dx[p] + 0.5 * d2s[p]) / m;
            let q = -hb * hb / (2.0 * m) * (d2u[p] + du_dx[p] * du_dx[p]);
            ds_dt[i] = -(ds_dx[p] * ds_dx[p] / (2.0 * m) + self.v[i] + q);
        }
        (du_dt, ds_dt)
    }

    fn step(&self, fields: &HydroFields, dt: f64) -> Result<(HydroFields, MadelungStepInfo)> {
        self.check_node_free(fields.r())?;
        let max_dt = madelung_max_dt(&self.grid, self.constants);
        if !(dt > 0.0) || dt > max_dt {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!(
                    "must satisfy 0 < dt <= 0.2 dx² m / hbar = {max_dt:.3e}, got {dt}"
                ),
            });
        }

        let mut info = MadelungStepInfo::default();
        let u0: Vec<f64> = fields
            .r()
            .iter()
            .map(|&r| {
                if r < LOG_AMPLITUDE_FLOOR {
                    info.clamp_count += 1;
                    LOG_AMPLITUDE_FLOOR.ln()
                } else {
                    r.ln()
                }
            })
            .collect();
        let s0 = fields.s().to_vec();
        let n = u0.len();

        let (lo, hi) = self.live_region(fields.r());
        if hi - lo + 1 < 5 {
            return Err(Error::DegenerateState {
                operation: "integrate the Madelung equations",
            });
        }

        let advance = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(&x, &dx)| x + h * dx).collect()
        };

        let (ku1, ks1) = self.rhs(&u0, &s0, lo, hi);
        let (ku2, ks2) = self.rhs(
            &advance(&u0, &ku1, dt / 2.0),
            &advance(&s0, &ks1, dt / 2.0),
            lo,
            hi,
        );
        let (ku3, ks3) = self.rhs(
            &advance(&u0, &ku2, dt / 2.0),
            &advance(&s0, &ks2, dt / 2.0),
            lo,
            hi,
        );
        let (ku4, ks4) = self.rhs(&advance(&u0, &ku3, dt), &advance(&s0, &ks3, dt), lo, hi);

        let mut r_new = Vec::with_capacity(n);
        let mut s_new = Vec::with_capacity(n);
        for i in 0..n {
            let u = u0[i] + dt / 6.0 * (ku1[i] + 2.0 * ku2[i] + 2.0 * ku3[i] + ku4[i]);
            let s = s0[i] + dt / 6.0 * (ks1[i] + 2.0 * ks2[i] + 2.0 * ks3[i] + ks4[i]);
            if !u.is_finite() || !s.is_finite() {
                return Err(Error::NonFinite {
                    context: "madelung_step update",
                });
            }
            r_new.push(u.exp());
            s_new.push(s);
        }

        let before = fields.s().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let after = s_new.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if after > 1e3 * (before + self.constants.hbar) {
            return Err(Error::Instability { before, after });
        }

        Ok((HydroFields::new(self.grid, r_new, s_new)?, info))
    }
}

/// One explicit 4th-order step of the coupled equations for a node-free
/// state. The pair is advanced as (ln R, S); R = exp(ln R) keeps the
/// amplitude positive by construction, and any sample that had to be held at
/// the internal floor is counted in [`MadelungStepInfo`]. The mask supplies
/// the node-gate threshold.
pub fn madelung_step(
    fields: &HydroFields,
    v: &Potential,
    dt: f64,
    mask: &ValidMask,
    constants: &PhysicalConstants,
) -> Result<(HydroFields, MadelungStepInfo)> {
    DirectStepper::new(*fields.grid(), v, mask.epsilon(), constants)?.step(fields, dt)
}

/// Result of [`madelung_evolve`].
#[derive(Debug, Clone)]
pub struct MadelungRun {
    pub fields: HydroFields,
    pub steps: usize,
    pub clamp_count: usize,
}

/// Repeated [`madelung_step`]s to t_final (dt must divide it within
/// rounding). The node gate is re-checked every step.
pub fn madelung_evolve(
    fields0: &HydroFields,
    v: &Potential,
    t_final: f64,
    dt: f64,
    epsilon: f64,
    constants: &PhysicalConstants,
) -> Result<MadelungRun> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_final",
            reason: format!("must be finite and positive, got {t_final}"),
        });
    }
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || (steps as f64 * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("dt = {dt} does not divide t_final = {t_final} within rounding"),
        });
    }
    let stepper = DirectStepper::new(*fields0.grid(), v, epsilon, constants)?;
    let mut fields = fields0.clone();
    let mut clamp_count = 0;
    for _ in 0..steps {
        let (next, info) = stepper.step(&fields, dt)?;
        clamp_count += info.clamp_count;
        fields = next;
    }
    Ok(MadelungRun {
        fields,
        steps,
        clamp_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_gaussian;
    use crate::schrodinger::{evolve, harmonic_ground_state};
    use num_complex::Complex64;

    fn natural() -> PhysicalConstants {
        PhysicalConstants::natural()
    }

    fn grid() -> Grid1D {
        Grid1D::new(1024, -16.0, 16.0).unwrap()
    }

    #[test]
    fn global_phase_becomes_constant_action() {
        let c = natural();
        let mut psi = make_gaussian(&grid(), 0.0, 1.0, 0.0).unwrap();
        let phase = Complex64::cis(PI / 3.0);
        for v in psi.values_mut() {
            *v *= phase;
        }
        let fields = polar_decompose(&[psi.clone()], &c).unwrap().remove(0);
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        for i in mask.indices() {
            assert!(
                (fields.s()[i] - PI / 3.0).abs() < 1e-10,
                "S[{i}] = {}",
                fields.s()[i]
            );
            assert!((fields.r()[i] - psi.values()[i].norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_phase_gradient() {
        let c = natural();
        let psi = make_gaussian(&grid(), 0.0, 1.0, 2.0).unwrap();
        let fields = polar_decompose(&[psi], &c).unwrap().remove(0);
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let grad_s = fd4_derivative(fields.s(), fields.grid().dx());
        for i in mask.indices() {
            assert!(
                (grad_s[i] - 2.0).abs() < 1e-8,
                "grad S [{i}] = {}",
                grad_s[i]
            );
        }
    }

    #[test]
    fn stationary_state_action_is_minus_e0_t() {
        let c = natural();
        let psi0 = harmonic_ground_state(&grid(), 1.0, &c).unwrap();
        let v = Potential::Harmonic { omega: 1.0 };
        let run = evolve(&psi0, &v, 1.0, 2e-4, 1000, &c).unwrap();
        let fields = polar_decompose(&run.snapshots, &c).unwrap();
        for (f, &t) in fields.iter().zip(&run.times) {
            let mask = ValidMask::from_fields(f, DEFAULT_MASK_EPSILON).unwrap();
            for i in mask.indices() {
                assert!(
                    (f.s()[i] - (-0.5 * t)).abs() < 1e-6,
                    "S(x, {t}) = {} expected {}",
                    f.s()[i],
                    -0.5 * t
                );
            }
        }
    }

    #[test]
    fn temporal_branch_tracking_beyond_pi() {
        // By t = 10 the accumulated stationary phase E0 t = 5 rad has crossed
        // the principal branch; the temporal alignment must keep S = -E0 t.
        let c = natural();
        let psi0 = harmonic_ground_state(&grid(), 1.0, &c).unwrap();
        let v = Potential::Harmonic { omega: 1.0 };
        let run = evolve(&psi0, &v, 10.0, 1e-3, 500, &c).unwrap();
        let fields = polar_decompose(&run.snapshots, &c).unwrap();
        let last = fields.last().unwrap();
        let mask = ValidMask::from_fields(last, DEFAULT_MASK_EPSILON).unwrap();
        let i = mask.indices().next().unwrap();
        assert!(
            (last.s()[i] - (-5.0)).abs() < 1e-3,
            "S at t=10 is {}, expected -5",
            last.s()[i]
        );
    }

    #[test]
    fn round_trip_identity_on_mask() {
        let c = natural();
        let psi0 = make_gaussian(&grid(), 0.0, 1.0, 1.0).unwrap();
        let run = evolve(&psi0, &Potential::Free, 1.0, 1e-3, 250, &c).unwrap();
        let fields = polar_decompose(&run.snapshots, &c).unwrap();
        for (f, psi) in fields.iter().zip(&run.snapshots) {
            let rebuilt = reconstruct_psi(f, &c);
            let mask = ValidMask::from_fields(f, DEFAULT_MASK_EPSILON).unwrap();
            for i in mask.indices() {
                let dev = (rebuilt.values()[i] - psi.values()[i]).norm();
                assert!(dev <= 1e-10, "roundtrip deviation {dev} at {i}");
            }
        }
    }

    #[test]
    fn global_phase_covariance() {
        let c = natural();
        let base = make_gaussian(&grid(), 0.5, 1.2, 0.7).unwrap();
        let fields0 = polar_decompose(&[base.clone()], &c).unwrap().remove(0);
        let mask = ValidMask::from_fields(&fields0, DEFAULT_MASK_EPSILON).unwrap();
        let branch = TAU * c.hbar;
        for alpha in [PI / 7.0, 1.0, 3.0] {
            let mut rotated = base.clone();
            let ph = Complex64::cis(alpha);
            for v in rotated.values_mut() {
                *v *= ph;
            }
            let fields1 = polar_decompose(&[rotated], &c).unwrap().remove(0);
            for i in mask.indices() {
                assert!((fields1.r()[i] - fields0.r()[i]).abs() < 1e-13);
                let shift = fields1.s()[i] - fields0.s()[i] - c.hbar * alpha;
                let folded = shift - branch * (shift / branch).round();
                assert!(
                    folded.abs() < 1e-10,
                    "alpha {alpha}: S shift off by {folded} at {i}"
                );
            }
        }
    }

    #[test]
    fn unwrap_failure_on_antisymmetric_node() {
        // Two packets 12 sigma apart with a pi relative phase: the bridge
        // dips below the mask and the branch across it is exactly ambiguous.
        let c = natural();
        let g = grid();
        let mut psi = ComplexField::from_fn(g, |x| {
            let l = (-(x + 6.0) * (x + 6.0) / 4.0).exp();
            let r = (-(x - 6.0) * (x - 6.0) / 4.0).exp();
            Complex64::new(l - r, 0.0)
        });
        psi.normalize().unwrap();
        match polar_decompose(&[psi], &c) {
            Err(Error::UnwrapFailure { jump, .. }) => {
                assert!((jump.abs() - PI).abs() < 0.05, "jump {jump}");
            }
            other => panic!("expected UnwrapFailure, got {other:?}"),
        }
    }

    #[test]
    fn quantum_potential_of_gaussian() {
        // Q(x) = (hbar²/2m)(1/(2 sigma²) - x²/(4 sigma⁴)); Q(0) = 0.25 and
        // Q(2 sigma) = -0.25 for sigma = 1.
        let c = natural();
        let g = grid();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let fields = polar_decompose(&[psi], &c).unwrap().remove(0);
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let q = quantum_potential(&fields, &mask, &c).unwrap();
        let i0 = g.nearest_index(0.0);
        let i2 = g.nearest_index(2.0);
        assert!((q[i0] - 0.25).abs() < 1e-6, "Q(0) = {}", q[i0]);
        assert!((q[i2] + 0.25).abs() < 1e-6, "Q(2) = {}", q[i2]);
    }

    #[test]
    fn quantum_potential_of_constant_amplitude_is_zero() {
        let c = natural();
        let g = grid();
        let n = g.n_points();
        let fields = HydroFields::new(g, vec![0.7; n], vec![0.0; n]).unwrap();
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let q = quantum_potential(&fields, &mask, &c).unwrap();
        assert!(q.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn analytic_stationary_state_satisfies_both_equations() {
        // R = harmonic ground state, S(t) = -E0 t solves both equations
        // exactly; the numerical residuals must vanish to stencil accuracy.
        let c = natural();
        let g = grid();
        let psi = harmonic_ground_state(&g, 1.0, &c).unwrap();
        let r = psi.amplitudes();
        let times = [0.0, 0.01, 0.02];
        let fields: Vec<HydroFields> = times
            .iter()
            .map(|&t| HydroFields::new(g, r.clone(), vec![-0.5 * t; g.n_points()]).unwrap())
            .collect();
        let mask = ValidMask::intersection_of(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let res = qhj_residuals(
            &fields,
            &times,
            &Potential::Harmonic { omega: 1.0 },
            &mask,
            &c,
        )
        .unwrap();
        assert!(res.hj_max <= 1e-6, "hj_max = {}", res.hj_max);
        assert!(
            res.continuity_max <= 1e-10,
            "continuity_max = {}",
            res.continuity_max
        );
    }

    #[test]
    fn deliberate_action_perturbation_is_detected() {
        let c = natural();
        let g = grid();
        let psi0 = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let run = evolve(&psi0, &Potential::Free, 0.2, 1e-3, 10, &c).unwrap();
        let fields = polar_decompose(&run.snapshots, &c).unwrap();
        let mask = ValidMask::intersection_of(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let baseline = qhj_residuals(&fields, &run.times, &Potential::Free, &mask, &c).unwrap();

        let perturbed: Vec<HydroFields> = fields
            .iter()
            .map(|f| {
                let s: Vec<f64> = f
                    .s()
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| s + 0.1 * g.x(i))
                    .collect();
                HydroFields::new(g, f.r().to_vec(), s).unwrap()
            })
            .collect();
        let shifted = qhj_residuals(&perturbed, &run.times, &Potential::Free, &mask, &c).unwrap();
        assert!(
            shifted.hj_max >= 1e-3,
            "perturbed hj_max = {} too small",
            shifted.hj_max
        );
        assert!(shifted.hj_max > 5.0 * baseline.hj_max);
    }

    #[test]
    fn residual_input_validation() {
        let c = natural();
        let g = grid();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let fields = polar_decompose(&[psi.clone(), psi.clone()], &c).unwrap();
        let mask = ValidMask::intersection_of(&fields, DEFAULT_MASK_EPSILON).unwrap();
        assert!(matches!(
            qhj_residuals(&fields, &[0.0, 0.1], &Potential::Free, &mask, &c),
            Err(Error::InsufficientSnapshots { .. })
        ));
        let three = polar_decompose(&[psi.clone(), psi.clone(), psi], &c).unwrap();
        assert!(matches!(
            qhj_residuals(&three, &[0.0, 0.1, 0.35], &Potential::Free, &mask, &c),
            Err(Error::NonuniformSpacing { .. })
        ));
    }

    #[test]
    fn static_solution_is_a_fixed_point() {
        let c = natural();
        let g = grid();
        let n = g.n_points();
        let fields = HydroFields::new(g, vec![0.5; n], vec![0.3; n]).unwrap();
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let dt = 0.9 * madelung_max_dt(&g, &c);
        let (next, info) = madelung_step(&fields, &Potential::Free, dt, &mask, &c).unwrap();
        assert_eq!(info.clamp_count, 0);
        for i in 0..n {
            assert!((next.r()[i] - 0.5).abs() < 1e-12);
            assert!((next.s()[i] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn node_gate_rejects_two_packet_states() {
        let c = natural();
        let g = grid();
        let mut psi = ComplexField::from_fn(g, |x| {
            let l = (-(x + 6.0) * (x + 6.0) / 4.0).exp();
            let r = (-(x - 6.0) * (x - 6.0) / 4.0).exp();
            Complex64::new(l + r, 0.0)
        });
        psi.normalize().unwrap();
        let fields = HydroFields::new(g, psi.amplitudes(), vec![0.0; g.n_points()]).unwrap();
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let dt = 0.9 * madelung_max_dt(&g, &c);
        match madelung_step(&fields, &Potential::Free, dt, &mask, &c) {
            Err(Error::NodePresent { x }) => assert!(x.abs() < 1.0, "dip at {x}"),
            other => panic!("expected NodePresent, got {other:?}"),
        }
    }

    #[test]
    fn oversized_dt_is_rejected() {
        let c = natural();
        let g = grid();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        let fields = polar_decompose(&[psi], &c).unwrap().remove(0);
        let mask = ValidMask::from_fields(&fields, DEFAULT_MASK_EPSILON).unwrap();
        let dt = 2.0 * madelung_max_dt(&g, &c);
        assert!(matches!(
            madelung_step(&fields, &Potential::Free, dt, &mask, &c),
            Err(Error::InvalidParameter { name: "dt", .. })
        ));
    }

    #[test]
    fn mask_contiguity() {
        let m = ValidMask::from_amplitude(&[0.0, 0.5, 1.0, 0.5, 0.0], 0.1).unwrap();
        assert!(m.is_contiguous());
        let m2 = ValidMask::from_amplitude(&[1.0, 0.0, 0.0, 1.0, 0.0], 0.1).unwrap();
        assert!(!m2.is_contiguous());
        assert_eq!(m2.indices().collect::<Vec<_>>(), vec![0, 3]);
        assert!(ValidMask::from_amplitude(&[1.0], 1.5).is_err());
    }
}
