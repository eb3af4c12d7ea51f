//! Eigenvalues from the all-order quantization condition
//!
//! ```text
//! B_0(E) + B_1(E) + sum_{n=1}^{N} B_{2n}(E) = K pi,     B_1 = -pi/2
//! ```
//!
//! i.e. `B_0 + sum B_{2n} = (K + 1/2) pi`. Odd orders `>= 3` are exact
//! derivatives and integrate to zero; they are left out once their
//! antiderivatives have been certified, unless numeric inclusion is requested.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{build_contour_with, integrate_compiled, turning_points_with, ContourError, NumericConfig};
use crate::diffpoly::NumericExpr;
use crate::potential::Potential;
use crate::wkb_series::{gen_terms, SeriesError, WkbSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("odd term T_{index} failed its total-derivative certificate")]
    Uncertified { index: usize },
    #[error("no bracket for K = {k} found in [{lo}, {hi}] after {steps} expansions")]
    NoBracket { k: usize, lo: f64, hi: f64, steps: usize },
    #[error("residual {residual:e} at E = {energy} exceeds tolerance {tol:e}")]
    Residual { energy: f64, residual: f64, tol: f64 },
    #[error("at least one level is required")]
    NoLevels,
    #[error("eigenvalues not strictly increasing: E_{k} = {current} <= E_{} = {previous}", k - 1)]
    NonMonotone { k: usize, previous: f64, current: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub numeric: NumericConfig,
    /// Take `B_1 = -pi/2` instead of integrating `T_1`.
    pub use_analytic_maslov: bool,
    /// Integrate the odd orders `3, 5, ..., 2N-1` and add them to the phase.
    pub include_odd_numeric: bool,
    /// Bisection stops at bracket width `bisection_tol * (1 + |E|)`.
    pub bisection_tol: f64,
    /// Required `|phase(E*) - K pi|`.
    pub residual_tol: f64,
    pub max_bracket_steps: usize,
    /// Caller-supplied initial bracket, replacing the leading-order seed.
    pub seed_bracket: Option<(f64, f64)>,
    /// Actions below this magnitude count as exact zeros in truncation diagnostics.
    pub negligible: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            numeric: NumericConfig::default(),
            use_analytic_maslov: false,
            include_odd_numeric: false,
            bisection_tol: 1e-12,
            residual_tol: 1e-10,
            max_bracket_steps: 60,
            seed_bracket: None,
            negligible: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationRequest {
    pub potential: Potential,
    #[serde(rename = "K")]
    pub k: usize,
    /// `N`: terms `T_0 ..= T_{2N}` are kept.
    pub order: usize,
    pub use_analytic_maslov: bool,
}

/// Energy at which the truncated quantization condition holds, with the
/// per-order actions `B_0, B_2, ..., B_{2N}` evaluated there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationResult {
    #[serde(rename = "K")]
    pub k: usize,
    pub order: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub residual: f64,
    pub actions: Vec<f64>,
    pub optimal_truncation_index: usize,
    pub warnings: Vec<String>,
}

/// Phase decomposition at one energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub total: f64,
    /// `B_0, B_2, ..., B_{2N}`.
    pub even: Vec<f64>,
    /// `B_1`, numeric or `-pi/2`.
    pub maslov: f64,
    /// `B_3, B_5, ..., B_{2N-1}` when integrated.
    pub odd: Vec<f64>,
}

/// Precompiled series for phase evaluations at a fixed truncation order.
pub struct Dunham {
    potential: Potential,
    order: usize,
    cfg: SolverConfig,
    /// Orders integrated on every phase evaluation and their compiled terms.
    orders: Vec<usize>,
    exprs: Vec<NumericExpr>,
    odd_orders: Vec<usize>,
    odd_exprs: Vec<NumericExpr>,
}

impl Dunham {
    pub fn new(potential: Potential, order: usize, cfg: SolverConfig) -> Result<Self, SolverError> {
        let series = gen_terms(2 * order + 1);
        Dunham::with_series(potential, order, cfg, &series)
    }

    /// `series` must reach at least `T_{2N}` (and `T_{2N-1}` for the odd spot checks).
    pub fn with_series(potential: Potential, order: usize, cfg: SolverConfig, series: &WkbSeries) -> Result<Self, SolverError> {
        series.term(2 * order)?;
        // odd orders 3..=2N-1 are dropped on the strength of their certificates
        for n in 1..order {
            if !series.certify_total_derivative(n)?.verified {
                return Err(SolverError::Uncertified { index: 2 * n + 1 });
            }
        }
        let mut orders: Vec<usize> = (0..=order).map(|n| 2 * n).collect();
        if !cfg.use_analytic_maslov {
            orders.push(1);
        }
        let odd_orders: Vec<usize> = (1..order).map(|n| 2 * n + 1).collect();
        if cfg.include_odd_numeric {
            orders.extend(&odd_orders);
        }
        let compile = |o: &[usize]| o.iter().map(|&n| series.terms()[n].compile()).collect::<Vec<_>>();
        Ok(Dunham {
            exprs: compile(&orders),
            odd_exprs: compile(&odd_orders),
            potential,
            order,
            cfg,
            orders,
            odd_orders,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn integrate(&self, exprs: &[NumericExpr], orders: &[usize], energy: f64) -> Result<Vec<f64>, ContourError> {
        let cfg = &self.cfg.numeric;
        let tp = turning_points_with(&self.potential, energy, cfg)?;
        let c = build_contour_with(&tp, cfg)?;
        integrate_compiled(exprs, orders, &self.potential, energy, &c, cfg)
    }

    /// `B_0 + B_1 + sum_{n=1}^{N} B_{2n}` (plus odd orders if configured).
    pub fn total_phase(&self, energy: f64) -> Result<Phase, SolverError> {
        let vals = self.integrate(&self.exprs, &self.orders, energy)?;
        let n_even = self.order + 1;
        let even = vals[..n_even].to_vec();
        let mut rest = vals[n_even..].iter().copied();
        let maslov = if self.cfg.use_analytic_maslov {
            -PI / 2.0
        } else {
            rest.next().expect("B_1 integrated")
        };
        let odd: Vec<f64> = rest.collect();
        let total = even.iter().sum::<f64>() + maslov + odd.iter().sum::<f64>();
        Ok(Phase { total, even, maslov, odd })
    }

    /// `B_3, B_5, ..., B_{2N-1}` at `energy`.
    pub fn odd_actions(&self, energy: f64) -> Result<Vec<f64>, SolverError> {
        if self.odd_orders.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.integrate(&self.odd_exprs, &self.odd_orders, energy)?)
    }

    fn leading_seed(&self, k: usize) -> Result<(f64, f64), SolverError> {
        let (_, v_min) = self.potential.minimum();
        let d = self.potential.degree() as f64;
        // B_0 ~ C (E - V_min)^gamma for a homogeneous well of degree d
        let gamma = (d + 2.0) / (2.0 * d);
        let target = (k as f64 + 0.5) * PI;
        let mut e = v_min + 1.0;
        for _ in 0..3 {
            let b0 = self.integrate(&self.exprs[..1], &[0], e)?[0];
            let c = b0 / (e - v_min).powf(gamma);
            e = v_min + (target / c).powf(1.0 / gamma);
        }
        Ok((v_min, e))
    }

    pub fn quantize(&self, k: usize) -> Result<QuantizationResult, SolverError> {
        let target = k as f64 * PI;
        let f = |e: f64| self.total_phase(e).map(|p| p.total - target);

        let (mut lo, mut hi, mut f_lo, mut f_hi);
        let mut steps = 0;
        if let Some((a, b)) = self.cfg.seed_bracket {
            (lo, hi) = (a.min(b), a.max(b));
            f_lo = f(lo)?;
            f_hi = f(hi)?;
            if f_lo > 0.0 || f_hi < 0.0 {
                return Err(SolverError::NoBracket { k, lo, hi, steps });
            }
        } else {
            let (v_min, seed) = self.leading_seed(k)?;
            let width = seed - v_min;
            lo = v_min + 0.8 * width;
            hi = v_min + 1.25 * width;
            f_lo = f(lo)?;
            while f_lo > 0.0 {
                steps += 1;
                // a phase still above K pi this close to the well bottom means the
                // truncated condition has no root here (divergent regime)
                if steps > self.cfg.max_bracket_steps || lo - v_min < 1e-3 * width {
                    return Err(SolverError::NoBracket { k, lo, hi, steps });
                }
                hi = lo;
                lo = v_min + 0.5 * (lo - v_min);
                f_lo = f(lo)?;
            }
            f_hi = f(hi)?;
            while f_hi < 0.0 {
                steps += 1;
                if steps > self.cfg.max_bracket_steps {
                    return Err(SolverError::NoBracket { k, lo, hi, steps });
                }
                lo = hi;
                f_lo = f_hi;
                hi = v_min + 2.0 * (hi - v_min);
                f_hi = f(hi)?;
            }
        }

        while hi - lo > self.cfg.bisection_tol * (1.0 + 0.5 * (lo + hi).abs()) {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                f_lo = 0.0;
                f_hi = 0.0;
                break;
            }
            if fm < 0.0 {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
        }
        // secant polish inside the final bracket
        let mut energy = if f_hi != f_lo { lo - f_lo * (hi - lo) / (f_hi - f_lo) } else { lo };
        if !(lo..=hi).contains(&energy) {
            energy = 0.5 * (lo + hi);
        }
        let mut phase = self.total_phase(energy)?;
        let mut residual = phase.total - target;
        // steep phase (large high-order actions): keep halving down to float resolution
        while residual.abs() >= self.cfg.residual_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let p = self.total_phase(mid)?;
            let fm = p.total - target;
            if fm.abs() < residual.abs() {
                (energy, phase, residual) = (mid, p, fm);
            }
            if fm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if residual.abs() >= self.cfg.residual_tol {
            return Err(SolverError::Residual {
                energy,
                residual,
                tol: self.cfg.residual_tol,
            });
        }

        let optimal = optimal_truncation_index(&phase.even, self.cfg.negligible);
        let mut warnings = Vec::new();
        if self.order > optimal && phase.even[optimal + 1..].iter().any(|b| b.abs() > self.cfg.negligible) {
            warnings.push(format!(
                "requested order {} exceeds the optimal truncation index {optimal}: the series is past its smallest term",
                self.order
            ));
        }
        let odd = if self.cfg.include_odd_numeric { phase.odd.clone() } else { self.odd_actions(energy)? };
        for (i, b) in odd.iter().enumerate() {
            if b.abs() >= 1e-8 {
                warnings.push(format!("odd action B_{} = {b:e} is not numerically zero", 2 * i + 3));
            }
        }
        Ok(QuantizationResult {
            k,
            order: self.order,
            energy,
            residual,
            actions: phase.even,
            optimal_truncation_index: optimal,
            warnings,
        })
    }
}

/// Index `n` of the smallest `|B_{2n}|`; values below `negligible` count as zero
/// and ties go to the lowest index.
pub fn optimal_truncation_index(even_actions: &[f64], negligible: f64) -> usize {
    let mag = |b: f64| if b.abs() < negligible { 0.0 } else { b.abs() };
    let mut best = 0;
    for (i, &b) in even_actions.iter().enumerate() {
        if mag(b) < mag(even_actions[best]) {
            best = i;
        }
    }
    best
}

pub fn total_phase(req: &QuantizationRequest, energy: f64, cfg: &SolverConfig) -> Result<Phase, SolverError> {
    let cfg = SolverConfig {
        use_analytic_maslov: req.use_analytic_maslov,
        ..cfg.clone()
    };
    Dunham::new(req.potential.clone(), req.order, cfg)?.total_phase(energy)
}

pub fn quantize(req: &QuantizationRequest, cfg: &SolverConfig) -> Result<QuantizationResult, SolverError> {
    let cfg = SolverConfig {
        use_analytic_maslov: req.use_analytic_maslov,
        ..cfg.clone()
    };
    Dunham::new(req.potential.clone(), req.order, cfg)?.quantize(req.k)
}

/// Levels `K = 0..levels`, solved in parallel. Per-level failures are kept in
/// place; the outer error covers bad input and non-increasing energies.
pub fn spectrum(
    v: &Potential,
    levels: usize,
    order: usize,
    cfg: &SolverConfig,
) -> Result<Vec<Result<QuantizationResult, SolverError>>, SolverError> {
    if levels == 0 {
        return Err(SolverError::NoLevels);
    }
    let dunham = Dunham::new(v.clone(), order, cfg.clone())?;
    let results: Vec<_> = (0..levels).into_par_iter().map(|k| dunham.quantize(k)).collect();
    let mut previous: Option<f64> = None;
    for r in results.iter().flatten() {
        if let Some(p) = previous {
            if r.energy <= p {
                return Err(SolverError::NonMonotone {
                    k: r.k,
                    previous: p,
                    current: r.energy,
                });
            }
        }
        previous = Some(r.energy);
    }
    Ok(results)
}
