//! Numeric action integrals `B_n(E) = (1/2i) ∮ T_n(z) dz` on an ellipse that
//! encloses both turning points of `Q(z) = V(z) - E`.
//!
//! `sqrt(Q)` is made single valued on the contour by continuation from the
//! rightmost node, where `Q > 0` and the principal root is taken. With exactly
//! two simple zeros inside, the continued root closes on itself.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffpoly::{EvalError, NumericExpr};
use crate::potential::Potential;
use crate::roots::poly_roots;
use crate::wkb_series::WkbSeries;

/// Numeric settings shared by the contour layer and the solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    /// Semi-major axis is `(1 + margin) * (x2 - x1) / 2`.
    pub margin: f64,
    /// Other roots of `V - E` must sit at elliptic radius `>= 1 + clearance`.
    pub clearance: f64,
    /// Smallest admissible `semi_minor / semi_major`.
    pub min_aspect: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    /// `|Im B_n| < reality_tol * (1 + |Re B_n|)`.
    pub reality_tol: f64,
    /// `|s_M - s_0| / |s_0|` after one loop.
    pub closure_tol: f64,
    /// Largest allowed change of `arg sqrt(Q)` between neighbouring nodes.
    pub max_phase_step: f64,
    /// A root counts as real when `|Im z| <= real_root_tol * max(1, |z|)`.
    pub real_root_tol: f64,
    /// Two real roots closer than `degenerate_tol * (1 + |x|)` form a double root.
    pub degenerate_tol: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            margin: 0.5,
            clearance: 0.2,
            min_aspect: 1e-3,
            min_nodes: 64,
            max_nodes: 1 << 20,
            quad_rel_tol: 1e-10,
            quad_abs_tol: 1e-12,
            reality_tol: 1e-8,
            closure_tol: 1e-8,
            max_phase_step: PI / 4.0,
            real_root_tol: 1e-9,
            degenerate_tol: 1e-7,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("V - E has {count} real roots at E = {energy}; exactly two turning points are required")]
    Unsupported { energy: f64, count: usize },
    #[error("companion-matrix eigenvalue iteration failed at E = {energy}")]
    RootFinding { energy: f64 },
    #[error("degenerate turning point near x = {x} at E = {energy}")]
    Degenerate { energy: f64, x: f64 },
    #[error("no ellipse separates the turning points from the root {root} (semi-minor would be {semi_minor:e})")]
    Construction { root: Complex64, semi_minor: f64 },
    #[error("phase step of sqrt(Q) reached {step:.3} rad with {nodes} nodes")]
    InsufficientNodes { nodes: usize, step: f64 },
    #[error("sqrt(Q) does not close around the contour (relative defect {defect:e})")]
    BranchClosure { defect: f64 },
    #[error("trapezoidal rule for B_{order} did not converge below {max_nodes} nodes")]
    Quadrature { order: usize, max_nodes: usize },
    #[error("B_{order} has imaginary part {im:e} (real part {re:e}); branch or contour inconsistent")]
    NotReal { order: usize, re: f64, im: f64 },
    #[error("order {order} exceeds the series maximum {max_order}")]
    OrderOutOfRange { order: usize, max_order: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The two real simple roots of `V - E` plus the full root list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningPair {
    pub x1: f64,
    pub x2: f64,
    pub all_roots: Vec<Complex64>,
}

pub fn turning_points(v: &Potential, energy: f64) -> Result<TurningPair, ContourError> {
    turning_points_with(v, energy, &NumericConfig::default())
}

pub fn turning_points_with(v: &Potential, energy: f64, cfg: &NumericConfig) -> Result<TurningPair, ContourError> {
    let mut coeffs = v.derivative_table(0).to_vec();
    coeffs[0] -= energy;
    let roots = poly_roots(&coeffs).ok_or(ContourError::RootFinding { energy })?;
    let mut real: Vec<f64> = roots
        .iter()
        .filter(|z| z.im.abs() <= cfg.real_root_tol * z.norm().max(1.0))
        .map(|z| z.re)
        .collect();
    real.sort_by(f64::total_cmp);
    for w in real.windows(2) {
        if (w[1] - w[0]).abs() <= cfg.degenerate_tol * (1.0 + w[0].abs()) {
            return Err(ContourError::Degenerate { energy, x: w[0] });
        }
    }
    if real.len() != 2 {
        return Err(ContourError::Unsupported {
            energy,
            count: real.len(),
        });
    }
    let all_roots = roots
        .into_iter()
        .map(|z| {
            if z.im.abs() <= cfg.real_root_tol * z.norm().max(1.0) {
                Complex64::new(z.re, 0.0)
            } else {
                z
            }
        })
        .collect();
    Ok(TurningPair {
        x1: real[0],
        x2: real[1],
        all_roots,
    })
}

/// Ellipse `z(t) = center + a cos t + i b sin t`, traversed counterclockwise
/// from its rightmost point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: Complex64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub nodes: usize,
}

impl ContourSpec {
    /// `(z(t_i), z'(t_i))` for `t_i = 2 pi i / m`.
    pub fn node(&self, i: usize, m: usize) -> (Complex64, Complex64) {
        let t = 2.0 * PI * i as f64 / m as f64;
        let (s, c) = t.sin_cos();
        (
            self.center + Complex64::new(self.semi_major * c, self.semi_minor * s),
            Complex64::new(-self.semi_major * s, self.semi_minor * c),
        )
    }

    /// `sqrt(((re-c)/a)^2 + (im/b)^2)`; below 1 means inside.
    pub fn elliptic_radius(&self, z: Complex64) -> f64 {
        let u = (z.re - self.center.re) / self.semi_major;
        let w = (z.im - self.center.im) / self.semi_minor;
        u.hypot(w)
    }

    pub fn with_nodes(&self, nodes: usize) -> ContourSpec {
        ContourSpec { nodes, ..self.clone() }
    }
}

pub fn build_contour(tp: &TurningPair, margin: f64) -> Result<ContourSpec, ContourError> {
    let cfg = NumericConfig {
        margin,
        ..NumericConfig::default()
    };
    build_contour_with(tp, &cfg)
}

pub fn build_contour_with(tp: &TurningPair, cfg: &NumericConfig) -> Result<ContourSpec, ContourError> {
    assert!(cfg.margin > 0.0, "contour margin must be positive");
    let center = 0.5 * (tp.x1 + tp.x2);
    let a = (1.0 + cfg.margin) * 0.5 * (tp.x2 - tp.x1);
    let mut b = 0.5 * a;
    let limit = 1.0 + cfg.clearance;
    for &r in &tp.all_roots {
        let is_turning = r.im == 0.0 && (r.re == tp.x1 || r.re == tp.x2);
        if is_turning {
            continue;
        }
        let u = (r.re - center) / a;
        if u.abs() >= limit {
            continue;
        }
        let allowed = r.im.abs() / (limit * limit - u * u).sqrt();
        if allowed < b {
            b = allowed;
        }
        if b < cfg.min_aspect * a {
            return Err(ContourError::Construction { root: r, semi_minor: b });
        }
    }
    let nodes = cfg.min_nodes.max(64).next_multiple_of(2);
    Ok(ContourSpec {
        center: Complex64::new(center, 0.0),
        semi_major: a,
        semi_minor: b,
        nodes,
    })
}

/// Continued branch of `sqrt(Q)` at the contour nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchTrace {
    pub node_points: Vec<Complex64>,
    pub tangents: Vec<Complex64>,
    pub sqrt_values: Vec<Complex64>,
    pub closure_defect: f64,
    pub max_phase_step: f64,
}

/// Traces `sqrt(Q)` for `Q(z) = V(z) - E`.
pub fn trace_branch(v: &Potential, energy: f64, c: &ContourSpec) -> Result<BranchTrace, ContourError> {
    trace_branch_with(|z| v.eval_derivs_complex(z, 0)[0] - energy, c, &NumericConfig::default())
}

/// Traces `sqrt(q(z))` on the nodes of `c` by nearest-value continuation.
pub fn trace_branch_with(
    q: impl Fn(Complex64) -> Complex64,
    c: &ContourSpec,
    cfg: &NumericConfig,
) -> Result<BranchTrace, ContourError> {
    let m = c.nodes;
    let mut node_points = Vec::with_capacity(m);
    let mut tangents = Vec::with_capacity(m);
    let mut sqrt_values: Vec<Complex64> = Vec::with_capacity(m);
    let mut max_step = 0.0f64;
    let mut prev = Complex64::new(0.0, 0.0);
    for i in 0..=m {
        let (z, dz) = c.node(i % m, m);
        let p = q(z).sqrt();
        let s = if i == 0 || (p - prev).norm() <= (p + prev).norm() { p } else { -p };
        if i > 0 {
            let step = (s / prev).arg().abs();
            max_step = max_step.max(step);
            if step >= cfg.max_phase_step {
                return Err(ContourError::InsufficientNodes { nodes: m, step });
            }
        }
        if i == m {
            let defect = (s - sqrt_values[0]).norm() / sqrt_values[0].norm();
            if defect >= cfg.closure_tol {
                return Err(ContourError::BranchClosure { defect });
            }
            return Ok(BranchTrace {
                node_points,
                tangents,
                sqrt_values,
                closure_defect: defect,
                max_phase_step: max_step,
            });
        }
        node_points.push(z);
        tangents.push(dz);
        sqrt_values.push(s);
        prev = s;
    }
    unreachable!("loop returns at i == m")
}

/// Trapezoidal sums `(1/2i) sum_j T(z_j) z'(t_j) dt` for several compiled terms
/// on a fixed trace. Complex results.
pub fn trapezoid_sums(
    exprs: &[NumericExpr],
    v: &Potential,
    energy: f64,
    trace: &BranchTrace,
) -> Result<Vec<Complex64>, ContourError> {
    trapezoid_sums_scaled(exprs, v, energy, trace).map(|(sums, _)| sums)
}

/// Sums together with `(1/2) sum_j |T(z_j) z'(t_j)| dt`, the scale that sets
/// the rounding floor of each sum.
fn trapezoid_sums_scaled(
    exprs: &[NumericExpr],
    v: &Potential,
    energy: f64,
    trace: &BranchTrace,
) -> Result<(Vec<Complex64>, Vec<f64>), ContourError> {
    let m = trace.node_points.len();
    let need = exprs.iter().map(NumericExpr::required_derivs).max().unwrap_or(1);
    let dt = 2.0 * PI / m as f64;
    let mut sums = vec![Complex64::new(0.0, 0.0); exprs.len()];
    let mut mags = vec![0.0; exprs.len()];
    for ((&z, &dz), &s) in trace.node_points.iter().zip(&trace.tangents).zip(&trace.sqrt_values) {
        let mut qd = v.eval_derivs_complex(z, need.saturating_sub(1));
        qd[0] -= energy;
        for ((sum, mag), e) in sums.iter_mut().zip(mags.iter_mut()).zip(exprs) {
            let term = e.eval(&qd, s)? * dz;
            *sum += term;
            *mag += term.norm();
        }
    }
    let factor = Complex64::new(0.0, -0.5 * dt); // dt / (2i)
    Ok((
        sums.into_iter().map(|s| s * factor).collect(),
        mags.into_iter().map(|a| a * 0.5 * dt).collect(),
    ))
}

/// `B_n(E)` for each requested order, refined by node doubling until every
/// order has converged.
pub fn action_integrals(
    series: &WkbSeries,
    orders: &[usize],
    v: &Potential,
    energy: f64,
    c: &ContourSpec,
    cfg: &NumericConfig,
) -> Result<Vec<f64>, ContourError> {
    let exprs = orders
        .iter()
        .map(|&n| {
            series
                .terms()
                .get(n)
                .map(|t| t.compile())
                .ok_or(ContourError::OrderOutOfRange {
                    order: n,
                    max_order: series.max_order(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    integrate_compiled(&exprs, orders, v, energy, c, cfg)
}

pub(crate) fn integrate_compiled(
    exprs: &[NumericExpr],
    orders: &[usize],
    v: &Potential,
    energy: f64,
    c: &ContourSpec,
    cfg: &NumericConfig,
) -> Result<Vec<f64>, ContourError> {
    let mut m = c.nodes.max(cfg.min_nodes);
    let mut previous: Option<Vec<Complex64>> = None;
    let mut unconverged: Option<usize> = None;
    let q = |z: Complex64| v.eval_derivs_complex(z, 0)[0] - energy;
    while m <= cfg.max_nodes {
        let trace = match trace_branch_with(q, &c.with_nodes(m), cfg) {
            Ok(t) => t,
            Err(ContourError::InsufficientNodes { .. }) => {
                m *= 2;
                previous = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (current, scales) = trapezoid_sums_scaled(exprs, v, energy, &trace)?;
        // cancellation between large integrand values leaves a rounding floor
        let noise = 64.0 * f64::EPSILON * (m as f64).sqrt();
        if let Some(prev) = &previous {
            unconverged = current.iter().zip(prev).zip(&scales).position(|((a, b), scale)| {
                let diff = (a - b).norm();
                !(diff <= cfg.quad_abs_tol || diff <= cfg.quad_rel_tol * a.norm() || diff <= noise * scale)
            });
            if unconverged.is_none() {
                return current
                    .iter()
                    .zip(orders)
                    .map(|(val, &order)| {
                        if val.im.abs() >= cfg.reality_tol * (1.0 + val.re.abs()) {
                            Err(ContourError::NotReal {
                                order,
                                re: val.re,
                                im: val.im,
                            })
                        } else {
                            Ok(val.re)
                        }
                    })
                    .collect();
            }
        }
        previous = Some(current);
        m *= 2;
    }
    let order = orders[unconverged.unwrap_or(0).min(orders.len().saturating_sub(1))];
    Err(ContourError::Quadrature {
        order,
        max_nodes: cfg.max_nodes,
    })
}

/// Single-order convenience wrapper around [`action_integrals`].
pub fn action_integral(
    series: &WkbSeries,
    n: usize,
    v: &Potential,
    energy: f64,
    c: &ContourSpec,
    cfg: &NumericConfig,
) -> Result<f64, ContourError> {
    action_integrals(series, &[n], v, energy, c, cfg).map(|r| r[0])
}

/// Turning points, contour and actions in one call.
pub fn actions_at(
    series: &WkbSeries,
    orders: &[usize],
    v: &Potential,
    energy: f64,
    cfg: &NumericConfig,
) -> Result<Vec<f64>, ContourError> {
    let tp = turning_points_with(v, energy, cfg)?;
    let c = build_contour_with(&tp, cfg)?;
    action_integrals(series, orders, v, energy, &c, cfg)
}
