//! θ-scheme time integration and the alternating adapt/solve loop.

use std::fmt;
use std::str::FromStr;

use log::{debug, info};

use crate::adapt::{
    interpolate, mmpde_step, recover_hessian, MetricField, MmpdeConfig, StepReport,
};
use crate::assembly::{apply_dirichlet, assemble, AssembledSystem};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::problems::ProblemSpec;
use crate::sparse::{LuFactors, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FmFem,
    FmSupg,
    MmFem,
    MmSupg,
}

impl Method {
    /// Table order.
    pub const ALL: [Method; 4] = [Method::FmFem, Method::FmSupg, Method::MmFem, Method::MmSupg];

    pub fn name(self) -> &'static str {
        match self {
            Method::FmFem => "FM-FEM",
            Method::FmSupg => "FM-SUPG",
            Method::MmFem => "MM-FEM",
            Method::MmSupg => "MM-SUPG",
        }
    }

    pub fn is_moving(self) -> bool {
        matches!(self, Method::MmFem | Method::MmSupg)
    }

    pub fn supg(self) -> bool {
        matches!(self, Method::FmSupg | Method::MmSupg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fmfem" => Ok(Method::FmFem),
            "fmsupg" => Ok(Method::FmSupg),
            "mmfem" => Ok(Method::MmFem),
            "mmsupg" => Ok(Method::MmSupg),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    /// Cells per side of the initial uniform mesh; `N = 2 n²` elements.
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub mmpde: MmpdeConfig,
    /// Keep every `output_every`-th state in the history; 0 keeps only the
    /// initial and final states.
    pub output_every: usize,
    /// Adaptation rounds on the initial condition for moving-mesh methods.
    pub init_adapt_cycles: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::MmSupg,
            n: 16,
            dt: 1e-3,
            t_final: 0.5,
            theta: 0.5,
            mmpde: MmpdeConfig::default(),
            output_every: 0,
            init_adapt_cycles: 5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "mesh level n must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time {} must be at least one step ({})",
                self.t_final, self.dt
            )));
        }
        if self.method.is_moving() {
            self.mmpde.validate()?;
        }
        Ok(())
    }

    /// Number of fixed steps, `T / dt` rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionState {
    pub mesh: TriMesh,
    pub u: Vec<f64>,
    pub t: f64,
}

/// One mesh-movement call during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct MmpdeRecord {
    /// Time step the movement preceded; `None` for initial adaptation.
    pub step: Option<usize>,
    pub report: StepReport,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub history: Vec<SolutionState>,
    pub steps: usize,
    pub mmpde: Vec<MmpdeRecord>,
    /// `max_t |u_h|_inf` over all time levels.
    pub max_abs_u: f64,
    /// Hessian patches that fell back to zero, summed over the run.
    pub rank_deficient_patches: usize,
}

impl RunOutput {
    pub fn final_state(&self) -> &SolutionState {
        self.history
            .last()
            .expect("history always holds the final state")
    }
}

/// Combined matrix `M/dt + θ A^{m+1}` and right-hand side
/// `θ f^{m+1} + (1-θ) f^m + (M/dt - (1-θ) A^m) u^m`.
#[allow(clippy::too_many_arguments)]
pub fn theta_system(
    mass: &SparseMatrix,
    a_m: &SparseMatrix,
    a_mp1: &SparseMatrix,
    f_m: &[f64],
    f_mp1: &[f64],
    u_m: &[f64],
    dt: f64,
    theta: f64,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let n = mass.n_rows();
    for len in [
        a_m.n_rows(),
        a_mp1.n_rows(),
        f_m.len(),
        f_mp1.len(),
        u_m.len(),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let lhs = mass.linear_combination(1.0 / dt, a_mp1, theta)?;
    let explicit = mass.linear_combination(1.0 / dt, a_m, -(1.0 - theta))?;
    let mut rhs = explicit.matvec(u_m)?;
    for ((r, fm), fp) in rhs.iter_mut().zip(f_m).zip(f_mp1) {
        *r += theta * fp + (1.0 - theta) * fm;
    }
    Ok((lhs, rhs))
}

/// One θ-step with the given Dirichlet rows imposed.
#[allow(clippy::too_many_arguments)]
pub fn theta_step(
    mass: &SparseMatrix,
    a_m: &SparseMatrix,
    a_mp1: &SparseMatrix,
    f_m: &[f64],
    f_mp1: &[f64],
    u_m: &[f64],
    dt: f64,
    theta: f64,
    dirichlet: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let (mut lhs, mut rhs) = theta_system(mass, a_m, a_mp1, f_m, f_mp1, u_m, dt, theta)?;
    apply_dirichlet(dirichlet, &mut lhs, &mut rhs);
    lhs.solve(&rhs)
}

/// Reuses a factorization while the combined matrix is unchanged, which is
/// the case on fixed meshes with steady flow.
#[derive(Default)]
struct FactorCache {
    lu: Option<LuFactors>,
}

impl FactorCache {
    fn solve(&mut self, lhs: SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.lu {
            Some(lu) if *lu.matrix() == lhs => {}
            _ => self.lu = Some(LuFactors::factor(&lhs)?),
        }
        self.lu.as_ref().expect("factorization present").solve(rhs)
    }
}

fn adapt_once(
    mesh: &TriMesh,
    u: &[f64],
    cfg: &MmpdeConfig,
    step: Option<usize>,
) -> Result<(TriMesh, StepReport, usize)> {
    let rec = recover_hessian(mesh, u)?;
    let metric =
        MetricField::from_hessians(mesh, &rec.hessians)?.smoothed(mesh, cfg.metric_smoothing)?;
    let (moved, report) =
        mmpde_step(mesh, &metric, cfg).map_err(|e| e.at_step(step.unwrap_or(0)))?;
    Ok((moved, report, rec.rank_deficient))
}

fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Runs a simulation, calling `observer` on every state at `t = m dt`.
pub fn run_simulation_with<F>(
    problem: &ProblemSpec,
    cfg: &RunConfig,
    mut observer: F,
) -> Result<RunOutput>
where
    F: FnMut(&SolutionState, usize) -> Result<()>,
{
    problem.validate()?;
    cfg.validate()?;
    let steps = cfg.n_steps();
    let moving = cfg.method.is_moving();
    let supg = cfg.method.supg();
    let mut mesh = TriMesh::uniform(cfg.n)?;
    let eval_initial = |mesh: &TriMesh| -> Vec<f64> {
        mesh.vertices()
            .iter()
            .map(|p| (problem.initial)(p, 0.0))
            .collect()
    };
    let mut u = eval_initial(&mesh);
    let mut mmpde_log = Vec::new();
    let mut rank_deficient_patches = 0;

    if moving {
        for cycle in 0..cfg.init_adapt_cycles {
            let (moved, report, deficient) = adapt_once(&mesh, &u, &cfg.mmpde, None)?;
            debug!(
                "initial adaptation {cycle}: energy {:.6e} -> {:.6e}",
                report.energy_before, report.energy_after
            );
            mmpde_log.push(MmpdeRecord { step: None, report });
            rank_deficient_patches += deficient;
            mesh = moved;
            u = eval_initial(&mesh);
        }
    }

    let mut state = SolutionState { mesh, u, t: 0.0 };
    let mut history = vec![state.clone()];
    let mut max_u = max_abs(&state.u);
    observer(&state, 0)?;

    let mut cache = FactorCache::default();
    let mut previous: Option<AssembledSystem> = None;
    for m in 0..steps {
        let t_m = m as f64 * cfg.dt;
        let t_next = (m + 1) as f64 * cfg.dt;
        if moving {
            let (moved, report, deficient) =
                adapt_once(&state.mesh, &state.u, &cfg.mmpde, Some(m))?;
            rank_deficient_patches += deficient;
            mmpde_log.push(MmpdeRecord {
                step: Some(m),
                report,
            });
            state.u = interpolate(&state.mesh, &state.u, &moved)?;
            state.mesh = moved;
            previous = None;
        }
        let sys_m = match previous.take() {
            Some(sys) => sys,
            None => assemble(&state.mesh, problem, t_m, supg)?,
        };
        let sys_next = assemble(&state.mesh, problem, t_next, supg)?;
        let (mut lhs, mut rhs) = theta_system(
            &sys_next.mass,
            &sys_m.operator,
            &sys_next.operator,
            &sys_m.load,
            &sys_next.load,
            &state.u,
            cfg.dt,
            cfg.theta,
        )?;
        sys_next.apply_dirichlet(&mut lhs, &mut rhs);
        state.u = cache.solve(lhs, &rhs)?;
        state.t = t_next;
        max_u = max_u.max(max_abs(&state.u));
        observer(&state, m + 1)?;
        if m + 1 == steps || (cfg.output_every > 0 && (m + 1) % cfg.output_every == 0) {
            history.push(state.clone());
        }
        if !moving {
            previous = Some(sys_next);
        }
    }
    info!(
        "{} on n={} finished {steps} steps, t = {}",
        cfg.method, cfg.n, state.t
    );
    Ok(RunOutput {
        history,
        steps,
        mmpde: mmpde_log,
        max_abs_u: max_u,
        rank_deficient_patches,
    })
}

pub fn run_simulation(problem: &ProblemSpec, cfg: &RunConfig) -> Result<RunOutput> {
    run_simulation_with(problem, cfg, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![v]]).unwrap()
    }

    #[test]
    fn scalar_crank_nicolson() {
        let one = scalar(1.0);
        let u = theta_step(&one, &one, &one, &[0.0], &[0.0], &[1.0], 0.1, 0.5, &[]).unwrap();
        assert_abs_diff_eq!(u[0], 9.5 / 10.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u[0], 0.9047619, epsilon = 1e-7);
    }

    #[test]
    fn no_dynamics() {
        let one = scalar(1.0);
        let zero = SparseMatrix::zeros(1, 1);
        for theta in [0.0, 0.3, 0.5, 1.0] {
            let u =
                theta_step(&one, &zero, &zero, &[0.0], &[0.0], &[0.7], 0.05, theta, &[]).unwrap();
            assert_abs_diff_eq!(u[0], 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn backward_euler() {
        let one = scalar(1.0);
        let u = theta_step(&one, &one, &one, &[1.0], &[1.0], &[0.0], 1.0, 1.0, &[]).unwrap();
        assert_abs_diff_eq!(u[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn crank_nicolson_is_second_order() {
        // u' = -u on [0, 1].
        let one = scalar(1.0);
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut u = vec![1.0];
            for _ in 0..steps {
                u = theta_step(&one, &one, &one, &[0.0], &[0.0], &u, dt, 0.5, &[]).unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order >= 1.9, "{order}");
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("mm-supg".parse::<Method>().unwrap(), Method::MmSupg);
        assert!("xx".parse::<Method>().is_err());
    }

    #[test]
    fn step_count() {
        let cfg = RunConfig {
            dt: 1e-3,
            t_final: 0.5,
            ..RunConfig::default()
        };
        assert_eq!(cfg.n_steps(), 500);
        assert!(RunConfig {
            theta: 1.5,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            dt: 0.0,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            t_final: 1e-4,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
    }
}
