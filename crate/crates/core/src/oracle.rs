//! Reference eigenvalues of `-d^2/dx^2 + V(x)` by direct diagonalization.
//!
//! Two independent discretizations:
//!
//! * finite differences on `[c - L, c + L]` with Dirichlet ends; eigenvalues of
//!   the tridiagonal matrix by Sturm-sequence bisection at three grid
//!   resolutions, combined by Richardson extrapolation;
//! * a harmonic-oscillator basis with exact matrix elements of `x^k` from the
//!   ladder operators, diagonalized densely.
//!
//! Neither route shares code with the contour integrals.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffpoly::rational_to_f64;
use crate::potential::{horner, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    FiniteDifference,
    OscillatorBasis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Oscillator basis size; also caps `count <= basis_size / 4` in both modes.
    pub basis_size: usize,
    /// Half-width of the finite-difference box; chosen from the potential when `None`.
    pub domain_half_width: Option<f64>,
    /// Intervals on the coarsest finite-difference grid.
    pub grid_points: usize,
    pub mode: OracleMode,
    /// Largest accepted convergence estimate per level.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            basis_size: 96,
            domain_half_width: None,
            grid_points: 4000,
            mode: OracleMode::OscillatorBasis,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("requested {count} levels but basis_size {basis_size} only supports {}", basis_size / 4)]
    TooManyLevels { count: usize, basis_size: usize },
    #[error("at least one level is required")]
    NoLevels,
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("level {level} not converged (estimate {estimate:e} > {tolerance:e}); raise grid_points, domain_half_width or basis_size")]
    Resolution { level: usize, estimate: f64, tolerance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub mode: OracleMode,
    pub eigenvalues: Vec<f64>,
    pub convergence_estimate: Vec<f64>,
    /// Box half-width (finite differences) or oscillator frequency (basis).
    pub scale: f64,
    pub center: f64,
}

impl OracleConfig {
    fn validate(&self) -> Result<(), OracleError> {
        if self.basis_size < 16 {
            return Err(OracleError::Config(format!("basis_size {} < 16", self.basis_size)));
        }
        if self.grid_points < 200 {
            return Err(OracleError::Config(format!("grid_points {} < 200", self.grid_points)));
        }
        if let Some(l) = self.domain_half_width {
            if !(l > 0.0) {
                return Err(OracleError::Config(format!("domain_half_width {l} must be positive")));
            }
        }
        Ok(())
    }
}

/// The lowest `count` eigenvalues of `-d^2/dx^2 + V`.
pub fn eigensolve(v: &Potential, count: usize, cfg: &OracleConfig) -> Result<OracleSpectrum, OracleError> {
    cfg.validate()?;
    if count == 0 {
        return Err(OracleError::NoLevels);
    }
    if count > cfg.basis_size / 4 {
        return Err(OracleError::TooManyLevels {
            count,
            basis_size: cfg.basis_size,
        });
    }
    let spectrum = match cfg.mode {
        OracleMode::FiniteDifference => finite_difference(v, count, cfg),
        OracleMode::OscillatorBasis => oscillator_basis(v, count, cfg),
    };
    for (level, &estimate) in spectrum.convergence_estimate.iter().enumerate() {
        if !(estimate <= cfg.tolerance) {
            return Err(OracleError::Resolution {
                level,
                estimate,
                tolerance: cfg.tolerance,
            });
        }
    }
    Ok(spectrum)
}

fn well_center(v: &Potential) -> f64 {
    if v.is_even() {
        0.0
    } else {
        v.minimum().0
    }
}

// ---------------------------------------------------------------------------
// finite differences

/// Uniform grid of interior points on `[c - L, c + L]` split into `intervals` pieces.
struct Grid {
    start: f64,
    h: f64,
    potential: Vec<f64>,
}

impl Grid {
    fn new(v: &Potential, center: f64, half_width: f64, intervals: usize) -> Grid {
        let h = 2.0 * half_width / intervals as f64;
        let start = center - half_width;
        let potential = (1..intervals).map(|i| v.eval(start + i as f64 * h)).collect();
        Grid { start, h, potential }
    }

    fn x(&self, i: usize) -> f64 {
        self.start + (i + 1) as f64 * self.h
    }

    /// Number of eigenvalues of `(1/h^2) tridiag(-1, 2 + h^2 V, -1)` below `e`.
    ///
    /// Pivots are carried as `d_i = 1 + u_i` with
    /// `u_i = h^2 (V_i - e) + u_{i-1} / (1 + u_{i-1})`, which keeps the small
    /// deviation from 1 free of cancellation.
    fn count_below(&self, e: f64) -> usize {
        let h2 = self.h * self.h;
        let mut count = 0;
        let mut u = 0.0;
        for (i, &vi) in self.potential.iter().enumerate() {
            let w = h2 * (vi - e);
            u = if i == 0 {
                1.0 + w
            } else {
                let mut d_prev = 1.0 + u;
                if d_prev == 0.0 {
                    d_prev = f64::MIN_POSITIVE;
                }
                w + u / d_prev
            };
            if 1.0 + u < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th eigenvalue (0-based) by bisection on the Sturm count.
    fn eigenvalue(&self, k: usize, floor: f64) -> f64 {
        let mut lo = floor;
        let mut step = 1.0;
        let mut hi = floor + step;
        while self.count_below(hi) <= k {
            lo = hi;
            step *= 2.0;
            hi = floor + step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for eigenvalue `e` by inverse iteration (Thomas algorithm).
    fn eigenvector(&self, e: f64) -> Vec<f64> {
        let n = self.potential.len();
        let h2 = self.h * self.h;
        let shift = e * (1.0 + 1e-10) + 1e-12;
        let mut x = vec![1.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            // break symmetry so both parities are present in the start vector
            *xi += 1e-3 * i as f64 / n as f64;
        }
        for _ in 0..3 {
            // (T - h^2 shift) y = h^2 x with T = tridiag(-1, 2 + h^2 V, -1)
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let diag = |i: usize| 2.0 + h2 * (self.potential[i] - shift);
            let mut denom = diag(0);
            c[0] = -1.0 / denom;
            d[0] = h2 * x[0] / denom;
            for i in 1..n {
                denom = diag(i) + c[i - 1];
                c[i] = -1.0 / denom;
                d[i] = (h2 * x[i] + d[i - 1]) / denom;
            }
            let mut y = vec![0.0; n];
            y[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                y[i] = d[i] - c[i] * y[i + 1];
            }
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            x = y.into_iter().map(|a| a / norm).collect();
        }
        x
    }
}

/// Half-width such that the classically forbidden tail beyond the outermost
/// turning point of `e_max` carries an action of at least `tail_action` and
/// `V(c +- L) >= e_max + 25`.
fn box_half_width(v: &Potential, center: f64, e_max: f64, tail_action: f64) -> f64 {
    let reach = |dir: f64| {
        let mut x = center;
        let mut step = 1e-3;
        while v.eval(x) < e_max {
            x += dir * step;
            step *= 1.05;
        }
        let dx = 1e-3;
        let mut action = 0.0;
        while action < tail_action || v.eval(x) < e_max + 25.0 {
            action += (v.eval(x) - e_max).max(0.0).sqrt() * dx;
            x += dir * dx;
        }
        (x - center).abs()
    };
    reach(1.0).max(reach(-1.0))
}

fn fd_levels(v: &Potential, center: f64, half_width: f64, intervals: usize, count: usize) -> Vec<f64> {
    let grid = Grid::new(v, center, half_width, intervals);
    let floor = grid.potential.iter().copied().fold(f64::INFINITY, f64::min);
    (0..count).map(|k| grid.eigenvalue(k, floor)).collect()
}

fn fd_half_width(v: &Potential, center: f64, count: usize, cfg: &OracleConfig) -> f64 {
    cfg.domain_half_width.unwrap_or_else(|| {
        // coarse pass to locate the highest requested level
        let (_, v_min) = v.minimum();
        let rough = box_half_width(v, center, v_min + 50.0, 0.0);
        let mut e_max = *fd_levels(v, center, rough, 400, count).last().unwrap();
        let mut l = box_half_width(v, center, e_max, 18.0);
        if l > rough {
            e_max = *fd_levels(v, center, l, 800, count).last().unwrap();
            l = box_half_width(v, center, e_max, 18.0);
        }
        l
    })
}

fn finite_difference(v: &Potential, count: usize, cfg: &OracleConfig) -> OracleSpectrum {
    let center = well_center(v);
    let l = fd_half_width(v, center, count, cfg);
    let n = cfg.grid_points;
    let e1 = fd_levels(v, center, l, n, count);
    let e2 = fd_levels(v, center, l, 2 * n, count);
    let e4 = fd_levels(v, center, l, 4 * n, count);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut convergence_estimate = Vec::with_capacity(count);
    for k in 0..count {
        // second-order scheme: error ~ h^2, removed by Richardson extrapolation
        let coarse = (4.0 * e2[k] - e1[k]) / 3.0;
        let fine = (4.0 * e4[k] - e2[k]) / 3.0;
        eigenvalues.push(fine);
        convergence_estimate.push((fine - coarse).abs());
    }
    OracleSpectrum {
        mode: OracleMode::FiniteDifference,
        eigenvalues,
        convergence_estimate,
        scale: l,
        center,
    }
}

/// Grid points and the finite-difference eigenvector of level `k`.
pub fn fd_eigenvector(v: &Potential, k: usize, cfg: &OracleConfig) -> (Vec<f64>, Vec<f64>) {
    let center = well_center(v);
    let l = fd_half_width(v, center, k + 1, cfg);
    let grid = Grid::new(v, center, l, cfg.grid_points);
    let floor = grid.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let e = grid.eigenvalue(k, floor);
    let xs = (0..grid.potential.len()).map(|i| grid.x(i)).collect();
    (xs, grid.eigenvector(e))
}

// ---------------------------------------------------------------------------
// oscillator basis

/// Coefficients of `V(c + y)` in powers of `y`.
fn shifted_coefficients(v: &Potential, center: f64) -> Vec<f64> {
    let d = v.degree();
    let mut fact = 1.0;
    (0..=d)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            if center == 0.0 {
                rational_to_f64(&v.coefficients()[k])
            } else {
                horner(v.derivative_table(k), center) / fact
            }
        })
        .collect()
}

/// Eigenvalues of `p^2 + V` in the lowest `basis` states of `p^2 + omega^2 (x - c)^2`.
pub fn oscillator_basis_eigenvalues(v: &Potential, center: f64, omega: f64, basis: usize) -> Vec<f64> {
    let coeffs = shifted_coefficients(v, center);
    let dim = basis + coeffs.len();
    let mut y = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..dim - 1 {
        let el = ((n + 1) as f64 / (2.0 * omega)).sqrt();
        y[(n, n + 1)] = el;
        y[(n + 1, n)] = el;
    }
    let mut vm = DMatrix::<f64>::zeros(dim, dim);
    for &c in coeffs.iter().rev() {
        vm = &vm * &y;
        for i in 0..dim {
            vm[(i, i)] += c;
        }
    }
    let mut h = vm.view((0, 0), (basis, basis)).into_owned();
    for n in 0..basis {
        h[(n, n)] += 0.5 * omega * (2 * n + 1) as f64;
        if n + 2 < basis {
            let el = -0.5 * omega * (((n + 1) * (n + 2)) as f64).sqrt();
            h[(n, n + 2)] += el;
            h[(n + 2, n)] += el;
        }
    }
    // symmetrize away roundoff from the matrix powers
    let h = (&h + h.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Frequency minimizing the sum of the lowest `count` Ritz values at size `basis`.
pub fn best_frequency(v: &Potential, center: f64, count: usize, basis: usize) -> f64 {
    let sum = |omega: f64| -> f64 { oscillator_basis_eigenvalues(v, center, omega, basis)[..count].iter().sum() };
    let mut best = (sum(1.0), 1.0);
    // outward from 1 on a quarter-octave grid; ties within rounding keep the earlier point
    for j in (1..=24).flat_map(|j| [j, -j]).filter(|j| *j >= -16) {
        let omega = 2f64.powf(j as f64 / 4.0);
        let s = sum(omega);
        if s < best.0 - 1e-12 * best.0.abs() {
            best = (s, omega);
        }
    }
    best.1
}

fn oscillator_basis(v: &Potential, count: usize, cfg: &OracleConfig) -> OracleSpectrum {
    let center = well_center(v);
    let b = cfg.basis_size;
    let omega = best_frequency(v, center, count, b);
    let coarse = oscillator_basis_eigenvalues(v, center, omega, b);
    let fine = oscillator_basis_eigenvalues(v, center, omega, 2 * b);
    OracleSpectrum {
        mode: OracleMode::OscillatorBasis,
        eigenvalues: fine[..count].to_vec(),
        convergence_estimate: (0..count).map(|k| (coarse[k] - fine[k]).abs()).collect(),
        scale: omega,
        center,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pot(s: &str) -> Potential {
        Potential::parse(s).unwrap()
    }

    fn fd() -> OracleConfig {
        OracleConfig {
            mode: OracleMode::FiniteDifference,
            ..OracleConfig::default()
        }
    }

    #[test]
    fn harmonic_both_modes() {
        for cfg in [fd(), OracleConfig::default()] {
            let s = eigensolve(&pot("x^2"), 3, &cfg).unwrap();
            for (k, e) in s.eigenvalues.iter().enumerate() {
                assert!((e - (2 * k + 1) as f64).abs() < 1e-9, "{:?} level {k}: {e}", cfg.mode);
            }
        }
    }

    #[test]
    fn quartic_ground_state() {
        let s = eigensolve(&pot("x^4"), 1, &OracleConfig::default()).unwrap();
        assert!((s.eigenvalues[0] - 1.060362).abs() < 1e-6, "{}", s.eigenvalues[0]);
        let f = eigensolve(&pot("x^4"), 1, &fd()).unwrap();
        assert!((f.eigenvalues[0] - s.eigenvalues[0]).abs() < 1e-8);
    }

    #[test]
    fn preconditions() {
        let cfg = OracleConfig {
            basis_size: 16,
            ..OracleConfig::default()
        };
        assert!(matches!(
            eigensolve(&pot("x^2"), 5, &cfg),
            Err(OracleError::TooManyLevels { count: 5, basis_size: 16 })
        ));
        assert!(matches!(eigensolve(&pot("x^2"), 0, &cfg), Err(OracleError::NoLevels)));
        let bad = OracleConfig {
            grid_points: 10,
            ..OracleConfig::default()
        };
        assert!(matches!(eigensolve(&pot("x^2"), 1, &bad), Err(OracleError::Config(_))));
    }

    #[test]
    fn unresolved_grid_is_reported() {
        let cfg = OracleConfig {
            grid_points: 200,
            ..fd()
        };
        assert!(matches!(
            eigensolve(&pot("x^4"), 4, &cfg),
            Err(OracleError::Resolution { .. })
        ));
    }

    #[test]
    fn asymmetric_well_modes_agree() {
        let v = pot("x^4 + x^3 + x^2");
        let a = eigensolve(&v, 4, &OracleConfig::default()).unwrap();
        let b = eigensolve(&v, 4, &fd()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn variational_monotone_in_basis_size() {
        let v = pot("x^4");
        let omega = 2.0;
        let mut prev = oscillator_basis_eigenvalues(&v, 0.0, omega, 16);
        for b in [24, 32, 48, 64] {
            let cur = oscillator_basis_eigenvalues(&v, 0.0, omega, b);
            for k in 0..4 {
                assert!(cur[k] <= prev[k] + 1e-12, "level {k}, basis {b}");
            }
            prev = cur;
        }
    }

    #[test]
    fn parity_alternates() {
        let v = pot("x^4 + x^2");
        for k in 0..4 {
            let (xs, psi) = fd_eigenvector(&v, k, &fd());
            let n = psi.len();
            assert!((xs[0] + xs[n - 1]).abs() < 1e-9);
            let overlap: f64 = (0..n).map(|i| psi[i] * psi[n - 1 - i]).sum();
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((overlap - expected).abs() < 1e-6, "level {k}: {overlap}");
        }
    }
}
