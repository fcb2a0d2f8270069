//! Crank-Nicolson marching for `eps^2 u_xx - u_t = f(u)` on `[a, b]` with
//! Dirichlet data.
//!
//! Each step solves the theta-weighted scheme
//!
//! ```text
//! (u' - u)/dt = theta (eps^2 D2 u' - f(u')) + (1 - theta)(eps^2 D2 u - f(u))
//! ```
//!
//! by Picard iteration: `f(u')` is linearised about the previous iterate and
//! every inner solve is a tridiagonal elimination.

pub mod tridiag;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::market::MarketParams;
use crate::transform::{
    boundary_values, cubic_nonlinearity, derive_constants, terminal_profile, ContractSpec,
    DerivedConstants, NoReaction, Nonlinearity,
};

/// Uniform grid on `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub h: f64,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n_nodes: usize) -> Result<Self> {
        ensure(a.is_finite() && b.is_finite() && a < b, || {
            format!("grid needs finite a < b, got [{a}, {b}]")
        })?;
        ensure(n_nodes >= 3, || format!("grid needs at least 3 nodes, got {n_nodes}"))?;
        let n = n_nodes - 1;
        let h = (b - a) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        nodes[n] = b;
        Ok(Self { a, b, nodes, h })
    }

    /// Grid over the computational corridor `[K-, K+]` with `n_intervals` cells.
    pub fn corridor(contract: &ContractSpec, n_intervals: usize) -> Result<Self> {
        Self::new(contract.k_minus, contract.k_plus, n_intervals + 1)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Cell index `i` and weight `w` with `x = (1-w) x_i + w x_{i+1}`; clamps to the grid.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.a) / self.h).clamp(0.0, self.n_intervals() as f64);
        let i = (s.floor() as usize).min(self.n_intervals() - 1);
        (i, s - i as f64)
    }

    /// Linear interpolation of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (i, w) = self.locate(x);
        (1.0 - w) * values[i] + w * values[i + 1]
    }

    /// Nodal first derivative: centred inside, one-sided at the ends.
    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        (0..n)
            .map(|i| {
                if i == 0 {
                    (values[1] - values[0]) / self.h
                } else if i == n - 1 {
                    (values[n - 1] - values[n - 2]) / self.h
                } else {
                    (values[i + 1] - values[i - 1]) / (2.0 * self.h)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub theta: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub snapshot_stride: usize,
}

impl SolverConfig {
    /// Crank-Nicolson (theta = 1/2) with the default Picard settings.
    pub fn new(dt: f64) -> Self {
        Self { dt, theta: 0.5, picard_tol: 1e-10, picard_max: 50, snapshot_stride: 1 }
    }

    pub fn with_picard_tol(self, picard_tol: f64) -> Self {
        Self { picard_tol, ..self }
    }

    pub fn with_snapshot_stride(self, snapshot_stride: usize) -> Self {
        Self { snapshot_stride, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt.is_finite(), || format!("dt must be positive, got {}", self.dt))?;
        ensure((0.0..=1.0).contains(&self.theta), || format!("theta must be in [0, 1], got {}", self.theta))?;
        ensure(self.picard_tol > 0.0, || "picard_tol must be positive".into())?;
        ensure(self.picard_max >= 1, || "picard_max must be at least 1".into())?;
        ensure(self.snapshot_stride >= 1, || "snapshot_stride must be at least 1".into())
    }
}

/// Stored time levels of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSurface {
    pub grid: Grid1D,
    pub taus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub eps: f64,
}

impl SolutionSurface {
    pub fn final_profile(&self) -> &[f64] {
        self.values.last().expect("surface stores at least one level")
    }

    pub fn final_tau(&self) -> f64 {
        *self.taus.last().expect("surface stores at least one level")
    }

    /// Profile at `tau`, linear in time between stored levels; clamped to the stored range.
    pub fn profile_at(&self, tau: f64) -> Vec<f64> {
        let (k, w) = self.locate_time(tau);
        if w == 0.0 {
            return self.values[k].clone();
        }
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    /// `u(y, tau)`, bilinear in `(y, tau)`.
    pub fn value_at(&self, y: f64, tau: f64) -> f64 {
        let (k, w) = self.locate_time(tau);
        let lo = self.grid.interpolate(&self.values[k], y);
        if w == 0.0 {
            return lo;
        }
        (1.0 - w) * lo + w * self.grid.interpolate(&self.values[k + 1], y)
    }

    fn locate_time(&self, tau: f64) -> (usize, f64) {
        let last = self.taus.len() - 1;
        if last == 0 || tau <= self.taus[0] {
            return (0, 0.0);
        }
        if tau >= self.taus[last] {
            return (last, 0.0);
        }
        let k = self.taus.partition_point(|t| *t <= tau) - 1;
        (k, (tau - self.taus[k]) / (self.taus[k + 1] - self.taus[k]))
    }

    /// CSV with columns `tau,node_index,y1,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,node_index,y1,u")?;
        for (tau, level) in self.taus.iter().zip(&self.values) {
            for (i, (y, u)) in self.grid.nodes.iter().zip(level).enumerate() {
                writeln!(w, "{tau},{i},{y},{u}")?;
            }
        }
        Ok(())
    }
}

/// One theta-scheme step with Picard iteration, reusing its buffers.
struct Stepper<'a, F: Nonlinearity + ?Sized> {
    f: &'a F,
    cfg: SolverConfig,
    dt: f64,
    mesh: f64,
    bc: (f64, f64),
    base: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    iterate: Vec<f64>,
    next: Vec<f64>,
}

impl<'a, F: Nonlinearity + ?Sized> Stepper<'a, F> {
    fn new(grid: &Grid1D, eps: f64, f: &'a F, bc: (f64, f64), dt: f64, cfg: SolverConfig) -> Self {
        let n = grid.n_nodes();
        let mesh = eps * eps / (grid.h * grid.h);
        let mut lower = vec![-cfg.theta * mesh; n];
        let mut upper = vec![-cfg.theta * mesh; n];
        lower[0] = 0.0;
        upper[0] = 0.0;
        lower[n - 1] = 0.0;
        upper[n - 1] = 0.0;
        Self {
            f,
            cfg,
            dt,
            mesh,
            bc,
            base: vec![0.0; n],
            lower,
            diag: vec![0.0; n],
            upper,
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
            iterate: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    /// Advance `u` by one step; `step` and `tau` only label errors.
    fn advance(&mut self, u: &mut [f64], step: usize, tau: f64) -> Result<()> {
        let n = u.len();
        let theta = self.cfg.theta;
        let explicit = 1.0 - theta;
        for i in 1..n - 1 {
            let lap = self.mesh * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
            self.base[i] = u[i] / self.dt + explicit * (lap - self.f.value(u[i]));
        }
        self.iterate.copy_from_slice(u);

        let mut last_update = f64::INFINITY;
        for _ in 0..self.cfg.picard_max {
            self.diag[0] = 1.0;
            self.rhs[0] = self.bc.0;
            self.diag[n - 1] = 1.0;
            self.rhs[n - 1] = self.bc.1;
            for i in 1..n - 1 {
                let w = self.iterate[i];
                let slope = self.f.derivative(w);
                self.diag[i] = 1.0 / self.dt + 2.0 * theta * self.mesh + theta * slope;
                self.rhs[i] = self.base[i] - theta * (self.f.value(w) - slope * w);
            }
            tridiag::solve_into(&self.lower, &self.diag, &self.upper, &self.rhs, &mut self.scratch, &mut self.next)
                .map_err(|_| Error::NonFinite { step, tau })?;
            if self.next.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { step, tau });
            }
            last_update = self
                .next
                .iter()
                .zip(&self.iterate)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            std::mem::swap(&mut self.iterate, &mut self.next);
            if last_update <= self.cfg.picard_tol {
                u.copy_from_slice(&self.iterate);
                return Ok(());
            }
        }
        Err(Error::PicardDiverged { step, tau, last_update })
    }
}

fn prepare_initial(grid: &Grid1D, eps: f64, u0: &[f64], bc: (f64, f64)) -> Result<Vec<f64>> {
    ensure(eps > 0.0 && eps.is_finite(), || format!("eps must be positive, got {eps}"))?;
    ensure(u0.len() == grid.n_nodes(), || {
        format!("initial data has {} values for {} nodes", u0.len(), grid.n_nodes())
    })?;
    ensure(u0.iter().all(|x| x.is_finite()), || "initial data must be finite".into())?;
    let scale = 1.0 + bc.0.abs().max(bc.1.abs());
    let n = u0.len();
    ensure((u0[0] - bc.0).abs() <= 1e-9 * scale && (u0[n - 1] - bc.1).abs() <= 1e-9 * scale, || {
        format!(
            "initial data ({}, {}) does not match boundary values ({}, {})",
            u0[0], u0[n - 1], bc.0, bc.1
        )
    })?;
    let mut u = u0.to_vec();
    u[0] = bc.0;
    u[n - 1] = bc.1;
    Ok(u)
}

/// March from `u0` at `tau = 0` to `t_end`.
///
/// The number of steps is `ceil(t_end / dt)`, with `dt` shrunk so the last
/// step lands on `t_end`. Levels are stored every `snapshot_stride` steps
/// plus the first and last.
#[allow(clippy::too_many_arguments)]
pub fn solve_semilinear<F: Nonlinearity + ?Sized>(
    grid: &Grid1D,
    eps: f64,
    f: &F,
    u0: &[f64],
    bc_left: f64,
    bc_right: f64,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<SolutionSurface> {
    cfg.validate()?;
    ensure(t_end >= 0.0 && t_end.is_finite(), || format!("t_end must be non-negative, got {t_end}"))?;
    let bc = (bc_left, bc_right);
    let mut u = prepare_initial(grid, eps, u0, bc)?;

    let n_steps = if t_end == 0.0 { 0 } else { ((t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize };
    let dt = if n_steps == 0 { cfg.dt } else { t_end / n_steps as f64 };
    let mut stepper = Stepper::new(grid, eps, f, bc, dt, *cfg);

    let mut taus = vec![0.0];
    let mut values = vec![u.clone()];
    for step in 1..=n_steps {
        let tau = step as f64 * dt;
        stepper.advance(&mut u, step, tau)?;
        if step % cfg.snapshot_stride == 0 || step == n_steps {
            taus.push(if step == n_steps { t_end } else { tau });
            values.push(u.clone());
        }
    }
    Ok(SolutionSurface { grid: grid.clone(), taus, values, eps })
}

/// Result of [`march_to_stationary`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub profile: Vec<f64>,
    pub tau_reached: f64,
    pub steps: usize,
}

/// March until `max |u' - u| / dt < stat_tol`, giving up after `tau_max`.
#[allow(clippy::too_many_arguments)]
pub fn march_to_stationary<F: Nonlinearity + ?Sized>(
    grid: &Grid1D,
    eps: f64,
    f: &F,
    u0: &[f64],
    bcs: (f64, f64),
    cfg: &SolverConfig,
    stat_tol: f64,
    tau_max: f64,
) -> Result<StationaryState> {
    cfg.validate()?;
    ensure(stat_tol > 0.0, || "stationary tolerance must be positive".into())?;
    ensure(tau_max > 0.0, || "tau_max must be positive".into())?;
    let mut u = prepare_initial(grid, eps, u0, bcs)?;
    let mut stepper = Stepper::new(grid, eps, f, bcs, cfg.dt, *cfg);
    let max_steps = (tau_max / cfg.dt).ceil() as usize;
    let mut prev = u.clone();
    let mut rate = f64::INFINITY;
    for step in 1..=max_steps {
        let tau = step as f64 * cfg.dt;
        stepper.advance(&mut u, step, tau)?;
        rate = u.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / cfg.dt;
        if rate < stat_tol {
            return Ok(StationaryState { profile: u, tau_reached: tau, steps: step });
        }
        prev.copy_from_slice(&u);
    }
    Err(Error::NotConverged { tau_reached: max_steps as f64 * cfg.dt, last_rate: rate })
}

fn check_corridor_grid(grid: &Grid1D, contract: &ContractSpec) -> Result<()> {
    let tol = 1e-12 * (1.0 + contract.k_plus.abs().max(contract.k_minus.abs()));
    ensure((grid.a - contract.k_minus).abs() <= tol && (grid.b - contract.k_plus).abs() <= tol, || {
        format!(
            "grid [{}, {}] does not span the corridor [{}, {}]",
            grid.a, grid.b, contract.k_minus, contract.k_plus
        )
    })
}

/// Payoff at the grid nodes with the boundary nodes set to the frozen Dirichlet data.
pub fn payoff_nodes(grid: &Grid1D, contract: &ContractSpec, dc: &DerivedConstants) -> Vec<f64> {
    let mut u0: Vec<f64> = grid.nodes.iter().map(|y| terminal_profile(*y, contract)).collect();
    let (left, right) = boundary_values(dc);
    let n = u0.len();
    u0[0] = left;
    u0[n - 1] = right;
    u0
}

/// Classical Black-Scholes control: the transformed problem with `f = 0`
/// (`delta2 = 0`), marched from the payoff to the contract maturity.
pub fn solve_classical_bs(
    params: &MarketParams,
    contract: &ContractSpec,
    grid: &Grid1D,
    cfg: &SolverConfig,
) -> Result<SolutionSurface> {
    solve_corridor_problem(params, contract, grid, cfg, &NoReaction)
}

/// The two-asset arbitrage problem: cubic reaction `u (u - A)(u - 2A)`.
pub fn solve_contrast_problem(
    params: &MarketParams,
    contract: &ContractSpec,
    grid: &Grid1D,
    cfg: &SolverConfig,
) -> Result<SolutionSurface> {
    let dc = derive_constants(params, contract)?;
    solve_corridor_problem(params, contract, grid, cfg, &cubic_nonlinearity(&dc))
}

fn solve_corridor_problem<F: Nonlinearity + ?Sized>(
    params: &MarketParams,
    contract: &ContractSpec,
    grid: &Grid1D,
    cfg: &SolverConfig,
    f: &F,
) -> Result<SolutionSurface> {
    let dc = derive_constants(params, contract)?;
    check_corridor_grid(grid, contract)?;
    let u0 = payoff_nodes(grid, contract, &dc);
    let (left, right) = boundary_values(&dc);
    solve_semilinear(grid, dc.eps, f, &u0, left, right, contract.maturity, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::FnNonlinearity;
    use std::f64::consts::PI;

    #[test]
    fn grid_is_uniform_and_spans_interval() {
        let g = Grid1D::new(-2.0, 3.0, 101).unwrap();
        assert_eq!(g.nodes[0], -2.0);
        assert_eq!(*g.nodes.last().unwrap(), 3.0);
        for w in g.nodes.windows(2) {
            assert!((w[1] - w[0] - g.h).abs() < 1e-12);
        }
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn locate_and_interpolate() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|x| 3.0 * x - 1.0).collect();
        for x in [0.0, 0.05, 0.37, 0.999, 1.0] {
            assert!((g.interpolate(&vals, x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        assert_eq!(g.locate(1.0), (9, 1.0));
    }

    #[test]
    fn constant_equilibrium_stays_put() {
        let g = Grid1D::new(0.0, 1.0, 21).unwrap();
        let u0 = vec![2.5; 21];
        let s = solve_semilinear(&g, 0.3, &NoReaction, &u0, 2.5, 2.5, 1.0, &SolverConfig::new(0.01)).unwrap();
        for level in &s.values {
            for v in level {
                assert!((v - 2.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn heat_eigenmode_decays_at_the_analytic_rate() {
        let g = Grid1D::new(0.0, 1.0, 200).unwrap();
        let eps = 0.5;
        let u0: Vec<f64> = g.nodes.iter().map(|x| (PI * x).sin()).collect();
        let t_end = 1.0;
        let s = solve_semilinear(&g, eps, &NoReaction, &u0, 0.0, 0.0, t_end, &SolverConfig::new(1e-3)).unwrap();
        let decay = (-eps * eps * PI * PI * t_end).exp();
        let err = s
            .final_profile()
            .iter()
            .zip(&u0)
            .fold(0.0f64, |m, (u, v)| m.max((u - decay * v).abs()));
        assert!(err < 1e-4, "err = {err}");
    }

    #[test]
    fn boundary_nodes_are_exact_and_snapshots_strided() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let u0: Vec<f64> = g.nodes.iter().map(|x| 1.0 + 2.0 * x + (3.0 * x).sin() * x * (1.0 - x)).collect();
        let cfg = SolverConfig::new(0.01).with_snapshot_stride(7);
        let s = solve_semilinear(&g, 0.2, &NoReaction, &u0, 1.0, 3.0, 0.2, &cfg).unwrap();
        assert_eq!(s.taus.len(), 4);
        assert_eq!((s.taus[0], s.taus[3]), (0.0, 0.2));
        assert!((s.taus[1] - 0.07).abs() < 1e-12 && (s.taus[2] - 0.14).abs() < 1e-12);
        for level in &s.values {
            assert_eq!(level[0], 1.0);
            assert_eq!(level[10], 3.0);
        }
    }

    #[test]
    fn steady_heat_is_a_straight_line() {
        let g = Grid1D::new(-1.0, 2.0, 31).unwrap();
        let u0: Vec<f64> = g.nodes.iter().map(|x| if *x < 2.0 { 0.0 } else { 80.0 }).collect();
        let st = march_to_stationary(&g, 0.5, &NoReaction, &u0, (0.0, 80.0), &SolverConfig::new(0.01), 1e-9, 500.0)
            .unwrap();
        for (x, u) in g.nodes.iter().zip(&st.profile) {
            assert!((u - 80.0 * (x + 1.0) / 3.0).abs() < 1e-6, "x {x}: {u}");
        }
    }

    #[test]
    fn linear_decay_kills_a_bump() {
        let g = Grid1D::new(0.0, 1.0, 41).unwrap();
        let u0: Vec<f64> = g.nodes.iter().map(|x| 1e-2 * (PI * x).sin().powi(2)).collect();
        let f = FnNonlinearity::new(|u| u, |_| 1.0);
        let st = march_to_stationary(&g, 0.1, &f, &u0, (0.0, 0.0), &SolverConfig::new(0.01), 1e-10, 100.0).unwrap();
        assert!(st.profile.iter().all(|u| u.abs() < 1e-9));
    }

    #[test]
    fn stationary_cap_reports_not_converged() {
        let g = Grid1D::new(0.0, 1.0, 41).unwrap();
        let u0: Vec<f64> = g.nodes.iter().map(|x| (PI * x).sin()).collect();
        let r = march_to_stationary(&g, 0.01, &NoReaction, &u0, (0.0, 0.0), &SolverConfig::new(0.01), 1e-12, 0.1);
        assert!(matches!(r, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn picard_cap_reports_divergence() {
        let g = Grid1D::new(0.0, 1.0, 21).unwrap();
        let u0: Vec<f64> = g.nodes.iter().map(|x| 0.5 * (PI * x).sin()).collect();
        let cubic = crate::transform::CubicNonlinearity::new(1.0, 2.0);
        let cfg = SolverConfig { picard_max: 1, picard_tol: 1e-300, ..SolverConfig::new(0.01) };
        let r = solve_semilinear(&g, 0.1, &cubic, &u0, 0.0, 0.0, 0.05, &cfg);
        assert!(matches!(r, Err(Error::PicardDiverged { .. })));
    }

    #[test]
    fn blow_up_is_reported_as_non_finite() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let mut u0: Vec<f64> = g.nodes.iter().map(|x| 1e200 * (PI * x).sin()).collect();
        u0[10] = 0.0;
        let f = FnNonlinearity::new(|u: f64| -u * u * u, |u: f64| -3.0 * u * u);
        let r = solve_semilinear(&g, 0.1, &f, &u0, 0.0, 0.0, 0.1, &SolverConfig::new(0.01));
        assert!(matches!(r, Err(Error::NonFinite { .. }) | Err(Error::PicardDiverged { .. })), "{r:?}");
    }

    #[test]
    fn rejects_mismatched_initial_data() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let u0 = vec![1.0; 11];
        assert!(solve_semilinear(&g, 0.1, &NoReaction, &u0, 0.0, 1.0, 1.0, &SolverConfig::new(0.1)).is_err());
        assert!(solve_semilinear(&g, 0.0, &NoReaction, &u0, 1.0, 1.0, 1.0, &SolverConfig::new(0.1)).is_err());
    }

    #[test]
    fn surface_interpolates_in_time() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        let s = SolutionSurface {
            grid: g,
            taus: vec![0.0, 1.0],
            values: vec![vec![0.0, 0.0, 0.0], vec![2.0, 4.0, 6.0]],
            eps: 1.0,
        };
        assert_eq!(s.profile_at(0.25), vec![0.5, 1.0, 1.5]);
        assert_eq!(s.value_at(0.25, 0.5), 1.5);
        assert_eq!(s.value_at(1.0, 7.0), 6.0);
    }
}
