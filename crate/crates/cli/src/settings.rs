//! Resolved run settings: defaults, then config-file keys, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use mmsupg::problems::{by_name, HillFlow};
use mmsupg::{Error, ProblemSpec, Result, RunConfig};

/// Flags shared by every solver subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// example1, example2, example3 or heat.
    #[arg(long)]
    pub problem: Option<String>,
    /// fm-fem, fm-supg, mm-fem or mm-supg.
    #[arg(long)]
    pub method: Option<String>,
    /// Cells per side of the initial mesh (2 n² elements).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Diffusivity; defaults to the problem's benchmark value.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Layer steepness of example1.
    #[arg(long)]
    pub c: Option<f64>,
    /// Flow of example3: constant or time-dependent.
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "mmpde-substeps")]
    pub mmpde_substeps: Option<usize>,
    #[arg(long = "init-adapt-cycles")]
    pub init_adapt_cycles: Option<usize>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Write a snapshot every k steps; 0 writes only the first and last.
    #[arg(long = "output-every")]
    pub output_every: Option<usize>,
    /// Flat `key = value` file with RunConfig and MmpdeConfig field names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub problem_name: String,
    pub eps: f64,
    pub c: f64,
    pub flow: HillFlow,
    pub run: RunConfig,
    pub out_dir: PathBuf,
}

impl Settings {
    pub fn problem(&self) -> Result<ProblemSpec> {
        by_name(&self.problem_name, self.c, self.eps, self.flow)
    }

    pub fn resolve(args: &SolverArgs) -> Result<Settings> {
        let file = match &args.config {
            Some(path) => mmsupg::io::read_config(path)?,
            None => BTreeMap::new(),
        };
        resolve_with(args, file)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

pub fn parse_flow(s: &str) -> Result<HillFlow> {
    match s {
        "constant" => Ok(HillFlow::Constant),
        "time-dependent" | "rotating" => Ok(HillFlow::TimeDependent),
        other => Err(Error::InvalidArgument(format!("unknown flow {other:?}"))),
    }
}

fn default_eps(problem: &str) -> f64 {
    match problem {
        "example3" => 1e-6,
        "heat" => 1.0,
        _ => 1e-4,
    }
}

fn resolve_with(args: &SolverArgs, mut file: BTreeMap<String, String>) -> Result<Settings> {
    let mut take = |key: &str| file.remove(key);

    let problem_name = match (&args.problem, take("problem")) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "no problem given (--problem or `problem` key)".into(),
            ))
        }
    };
    let mut run = RunConfig::default();
    let mut eps = default_eps(&problem_name);
    let mut c = 100.0;
    let mut flow = HillFlow::Constant;
    let mut out_dir = PathBuf::from("out");

    // Config file first.
    macro_rules! from_file {
        ($key:literal, $slot:expr) => {
            if let Some(v) = take($key) {
                $slot = parse($key, &v)?;
            }
        };
    }
    if let Some(v) = take("method") {
        run.method = v.parse()?;
    }
    if let Some(v) = take("flow") {
        flow = parse_flow(&v)?;
    }
    if let Some(v) = take("out_dir") {
        out_dir = PathBuf::from(v);
    }
    if let Some(v) = take("d_tau") {
        run.mmpde.d_tau = if v == "auto" {
            None
        } else {
            Some(parse("d_tau", &v)?)
        };
    }
    from_file!("eps", eps);
    from_file!("c", c);
    from_file!("n", run.n);
    from_file!("dt", run.dt);
    from_file!("t_final", run.t_final);
    from_file!("theta", run.theta);
    from_file!("output_every", run.output_every);
    from_file!("init_adapt_cycles", run.init_adapt_cycles);
    from_file!("alpha", run.mmpde.alpha);
    from_file!("p", run.mmpde.p);
    from_file!("gamma", run.mmpde.gamma);
    from_file!("sub_steps", run.mmpde.sub_steps);
    from_file!("step_fraction", run.mmpde.step_fraction);
    from_file!("max_move", run.mmpde.max_move);
    from_file!("metric_smoothing", run.mmpde.metric_smoothing);
    if let Some(key) = file.keys().next() {
        return Err(Error::Config(format!("unknown key {key:?}")));
    }

    // Flags win.
    if let Some(m) = &args.method {
        run.method = m.parse()?;
    }
    if let Some(f) = &args.flow {
        flow = parse_flow(f)?;
    }
    if let Some(d) = &args.out_dir {
        out_dir = d.clone();
    }
    eps = args.eps.unwrap_or(eps);
    c = args.c.unwrap_or(c);
    run.n = args.n.unwrap_or(run.n);
    run.dt = args.dt.unwrap_or(run.dt);
    run.t_final = args.t_final.unwrap_or(run.t_final);
    run.theta = args.theta.unwrap_or(run.theta);
    run.output_every = args.output_every.unwrap_or(run.output_every);
    run.init_adapt_cycles = args.init_adapt_cycles.unwrap_or(run.init_adapt_cycles);
    run.mmpde.gamma = args.gamma.unwrap_or(run.mmpde.gamma);
    run.mmpde.sub_steps = args.mmpde_substeps.unwrap_or(run.mmpde.sub_steps);

    run.validate()?;
    run.mmpde.validate()?;
    let settings = Settings {
        problem_name,
        eps,
        c,
        flow,
        run,
        out_dir,
    };
    settings.problem()?;
    Ok(settings)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}
