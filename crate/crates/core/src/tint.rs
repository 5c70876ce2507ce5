//! Implicit Newmark-β integration with Newton-Raphson iterations, shared by
//! the full finite-element model and reduced models.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::fe::{Domain, Model};
use crate::linalg::{csc_combination, spmv, SparseCholesky};
use crate::rom::ReducedModel;
use crate::{Error, Result};

/// `M a + D v + f_el(x) = f_ext(t)`.
pub trait SecondOrderSystem {
    fn dim(&self) -> usize;
    fn mass_times(&self, a: &DVector<f64>) -> DVector<f64>;
    fn damping_times(&self, v: &DVector<f64>) -> DVector<f64>;
    fn elastic_force(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Solves `(c_k K_t(x) + c_d D + c_m M) dx = rhs`.
    fn solve_iteration(&mut self, x: &DVector<f64>, c_k: f64, c_d: f64, c_m: f64, rhs: &DVector<f64>) -> Result<DVector<f64>>;
    fn potential_energy(&self, x: &DVector<f64>) -> Result<f64>;
}

/// Full finite-element system over the model's free DoFs.
pub struct FullSystem<'a> {
    model: &'a Model,
    domain: Domain,
    mass: CscMatrix<f64>,
    damping: CscMatrix<f64>,
    stiffness: CscMatrix<f64>,
}

impl<'a> FullSystem<'a> {
    /// Pass `model.linearized()` for the linear variant.
    pub fn new(model: &'a Model) -> Self {
        let domain = model.full_domain();
        let mass = domain.mass(model);
        let damping = domain.damping(model);
        let stiffness = domain.stiffness(model);
        Self {
            model,
            domain,
            mass,
            damping,
            stiffness,
        }
    }
}

impl SecondOrderSystem for FullSystem<'_> {
    fn dim(&self) -> usize {
        self.domain.n
    }

    fn mass_times(&self, a: &DVector<f64>) -> DVector<f64> {
        spmv(&self.mass, a)
    }

    fn damping_times(&self, v: &DVector<f64>) -> DVector<f64> {
        spmv(&self.damping, v)
    }

    fn elastic_force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.model.is_linear() {
            return Ok(spmv(&self.stiffness, x));
        }
        self.domain.internal_force(self.model, x)
    }

    fn solve_iteration(&mut self, x: &DVector<f64>, c_k: f64, c_d: f64, c_m: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let kt = if c_k == 0.0 || self.model.is_linear() {
            self.stiffness.clone()
        } else {
            self.domain.tangent_stiffness(self.model, x)?
        };
        let a = csc_combination(&[(c_k, &kt), (c_d, &self.damping), (c_m, &self.mass)]);
        Ok(SparseCholesky::factor(&a)?.solve(rhs))
    }

    fn potential_energy(&self, x: &DVector<f64>) -> Result<f64> {
        self.domain.strain_energy(self.model, x)
    }
}

/// Reduced system with dense operators.
pub struct RomSystem<'a> {
    pub rom: &'a ReducedModel,
}

impl SecondOrderSystem for RomSystem<'_> {
    fn dim(&self) -> usize {
        self.rom.m()
    }

    fn mass_times(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.rom.mass * a
    }

    fn damping_times(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.rom.damping * v
    }

    fn elastic_force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.rom.force(x))
    }

    fn solve_iteration(&mut self, x: &DVector<f64>, c_k: f64, c_d: f64, c_m: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut a: DMatrix<f64> = &self.rom.mass * c_m + &self.rom.damping * c_d;
        if c_k != 0.0 {
            a += self.rom.jacobian(x) * c_k;
        }
        if let Some(ch) = a.clone().cholesky() {
            return Ok(ch.solve(rhs));
        }
        a.lu()
            .solve(rhs)
            .ok_or_else(|| Error::Factorization("singular reduced iteration matrix".into()))
    }

    fn potential_energy(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.rom.potential(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub gamma: f64,
    pub beta: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub t_end: f64,
}

impl IntegratorConfig {
    /// Average-acceleration scheme with the default Newton settings.
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            gamma: 0.5,
            beta: 0.25,
            newton_tol: 1e-6,
            max_iter: 20,
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.gamma >= 0.5 && 2.0 * self.beta >= self.gamma) {
            return bad(format!(
                "Newmark parameters must satisfy 2β ≥ γ ≥ 1/2, got γ = {}, β = {}",
                self.gamma, self.beta
            ));
        }
        if self.max_iter < 1 {
            return bad("at least one Newton iteration is required".into());
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("Newton tolerance must be positive, got {}", self.newton_tol));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("end time must be non-negative, got {}", self.t_end));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Energy bookkeeping of one step. Work and dissipation are cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub kinetic: f64,
    pub potential: f64,
    pub external_work: f64,
    pub dissipated: f64,
    /// Cumulative trapezoidal elastic work `Σ Δxᵀ avg(f_el)`.
    pub elastic_work: f64,
    /// `ΔT + ΔW_el + ΔW_diss - ΔW_ext` of this step; for the average
    /// acceleration scheme it equals `Δxᵀ avg(r)` and so measures the Newton
    /// residual left in the step.
    pub balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistory {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub a: Vec<DVector<f64>>,
    /// Linear solves per step (zero for the initial state).
    pub iterations: Vec<usize>,
    pub audit: Vec<EnergyRecord>,
}

impl TimeHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, dof: usize) -> Vec<f64> {
        self.x.iter().map(|x| x[dof]).collect()
    }

    /// CSV with columns `t`, the probed values, energy terms and iterations.
    pub fn write_csv(&self, mut w: impl Write, probes: &[(String, Vec<f64>)]) -> Result<()> {
        write!(w, "t")?;
        for (name, _) in probes {
            write!(w, ",{name}")?;
        }
        writeln!(w, ",kinetic,potential,external_work,dissipated,balance_residual,iterations")?;
        for k in 0..self.len() {
            write!(w, "{:.9e}", self.times[k])?;
            for (_, s) in probes {
                write!(w, ",{:.9e}", s[k])?;
            }
            let e = &self.audit[k];
            writeln!(
                w,
                ",{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                e.kinetic, e.potential, e.external_work, e.dissipated, e.balance_residual, self.iterations[k]
            )?;
        }
        Ok(())
    }
}

/// Initial displacement and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
}

impl InitialState {
    pub fn rest(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            v: DVector::zeros(n),
        }
    }
}

/// Integrates from `t = 0` to `config.t_end`. Each step iterates Newton from
/// a constant-displacement predictor until the relative residual drops below
/// `config.newton_tol`.
pub fn integrate(
    system: &mut dyn SecondOrderSystem,
    config: &IntegratorConfig,
    initial: &InitialState,
    load: &dyn Fn(f64) -> DVector<f64>,
) -> Result<TimeHistory> {
    config.validate()?;
    let n = system.dim();
    if initial.x.len() != n || initial.v.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: n,
            found: initial.x.len(),
        });
    }
    let (h, gamma, beta) = (config.dt, config.gamma, config.beta);
    let steps = config.steps();

    let mut x = initial.x.clone();
    let mut v = initial.v.clone();
    let mut f_ext = load(0.0);
    if f_ext.len() != n {
        return Err(Error::DimensionMismatch {
            context: "load vector",
            expected: n,
            found: f_ext.len(),
        });
    }
    let mut f_el = system.elastic_force(&x)?;
    let rhs0 = &f_ext - system.damping_times(&v) - &f_el;
    let mut a = if rhs0.amax() == 0.0 {
        DVector::zeros(n)
    } else {
        system.solve_iteration(&x, 0.0, 0.0, 1.0, &rhs0)?
    };

    let mut hist = TimeHistory {
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        a: Vec::with_capacity(steps + 1),
        iterations: Vec::with_capacity(steps + 1),
        audit: Vec::with_capacity(steps + 1),
    };
    let mut record = EnergyRecord {
        kinetic: 0.5 * v.dot(&system.mass_times(&v)),
        potential: system.potential_energy(&x)?,
        ..Default::default()
    };
    hist.times.push(0.0);
    hist.x.push(x.clone());
    hist.v.push(v.clone());
    hist.a.push(a.clone());
    hist.iterations.push(0);
    hist.audit.push(record);

    let c_m = 1.0 / (beta * h * h);
    let c_d = gamma / (beta * h);
    for step in 1..=steps {
        let t = step as f64 * h;
        let f_next = load(t);
        let (x_n, v_n, a_n) = (x.clone(), v.clone(), a.clone());
        let mut residuals = Vec::new();
        let mut iterations = 0;
        loop {
            a = (&x - &x_n - &v_n * h) * c_m - &a_n * (0.5 / beta - 1.0);
            v = &v_n + (&a_n * (1.0 - gamma) + &a * gamma) * h;
            let f_el_new = system.elastic_force(&x)?;
            let ma = system.mass_times(&a);
            let dv = system.damping_times(&v);
            let r = &ma + &dv + &f_el_new - &f_next;
            let reference = f_el_new.norm() + ma.norm() + dv.norm() + f_next.norm();
            let rel = if reference > 0.0 { r.norm() / reference } else { 0.0 };
            residuals.push(rel);
            if !rel.is_finite() {
                return Err(Error::NewtonDivergence { step, time: t, residuals });
            }
            if rel <= config.newton_tol {
                // energy audit over the converged step
                let dx = &x - &x_n;
                let avg_v = (&v_n + &v) * 0.5;
                let kinetic = 0.5 * v.dot(&system.mass_times(&v));
                let elastic = dx.dot(&((&f_el + &f_el_new) * 0.5));
                let external = dx.dot(&((&f_ext + &f_next) * 0.5));
                let dissipated = h * avg_v.dot(&system.damping_times(&avg_v));
                record = EnergyRecord {
                    kinetic,
                    potential: system.potential_energy(&x)?,
                    external_work: record.external_work + external,
                    dissipated: record.dissipated + dissipated,
                    elastic_work: record.elastic_work + elastic,
                    balance_residual: (kinetic - record.kinetic) + elastic + dissipated - external,
                };
                f_el = f_el_new;
                break;
            }
            if iterations == config.max_iter {
                return Err(Error::NewtonDivergence { step, time: t, residuals });
            }
            let dx = system.solve_iteration(&x, 1.0, c_d, c_m, &(-r))?;
            x += dx;
            iterations += 1;
        }
        f_ext = f_next;
        hist.times.push(t);
        hist.x.push(x.clone());
        hist.v.push(v.clone());
        hist.a.push(a.clone());
        hist.iterations.push(iterations);
        hist.audit.push(record);
    }
    Ok(hist)
}
