//! Resolution of `--system/--data/--gram` with kernel and sampling into a
//! Gram triple. Parsing happens up front so bad specs exit as usage errors
//! before any computation.

use std::path::PathBuf;

use serde_json::{json, Value};
use specrkhs::dynamics::{generate_snapshots, Point, Sampling, SnapshotSet, System};
use specrkhs::gram::{build_gram, build_gram_markov_exact, GramTriple};
use specrkhs::io::{parse_complex, read_gram, snapshots_from_csv};
use specrkhs::kernels::KernelSpec;
use specrkhs::c64;

use crate::cli::DataArgs;
use crate::error::{usage, CliError};

pub enum Source {
    Gram(PathBuf),
    Snapshots { set: SnapshotSet, origin: Value },
    Generate { system: System, sampling: Sampling, samples: usize, seed: u64 },
    MarkovExact { system: System, window: i64, seed: u64 },
}

pub struct DataPlan {
    pub source: Source,
    pub kernel: Option<KernelSpec>,
    pub threshold: f64,
}

pub struct Dataset {
    pub gram: GramTriple,
    /// Pre-states (and sampled successors); absent for a loaded Gram artifact.
    pub snapshots: Option<SnapshotSet>,
    pub kernel: Option<KernelSpec>,
    pub threshold: f64,
    pub describe: Value,
}

impl Dataset {
    pub fn require_snapshots(&self, what: &str) -> Result<(&SnapshotSet, &KernelSpec), CliError> {
        match (&self.snapshots, &self.kernel) {
            (Some(s), Some(k)) => Ok((s, k)),
            _ => Err(CliError::Usage(format!("{what} needs snapshot data and a kernel, not a Gram artifact alone"))),
        }
    }
}

fn default_kernel(system: &System) -> &'static str {
    match system {
        System::GaussMap { .. } => "h1:a=-1,b=0",
        System::Duffing { .. } => "matern:d=2,n=3,sigma=6",
        System::Lorenz { .. } => "wendland:d=3,k=0,sigma=0.1",
        System::Mobius { .. } => "hyperbolic-gaussian:sigma=5",
        System::RandomWalk | System::RandomWalkPerturbed { .. } => "delta",
        _ => "gaussian-rbf:sigma=1",
    }
}

fn default_sampling(system: &System, n: Option<usize>, seed: u64) -> Sampling {
    let dim = system.dim();
    match system {
        System::GaussMap { .. } => Sampling::Chebyshev { lo: -1.0, hi: 0.0, intervals: n.unwrap_or(201).max(2) - 1 },
        System::Duffing { .. } => Sampling::RandomTrajectories {
            lo: vec![-1.0; 2],
            hi: vec![1.0; 2],
            count: (n.unwrap_or(1200) / 30).max(1),
            len: 30,
            seed,
        },
        System::Lorenz { .. } => Sampling::RandomTrajectories {
            lo: vec![-25.0, -25.0, 0.0],
            hi: vec![25.0, 25.0, 50.0],
            count: (n.unwrap_or(2000) / 20).max(1),
            len: 20,
            seed,
        },
        System::Mobius { .. } => Sampling::Disk { count: n.unwrap_or(200), alpha: 0.25, seed },
        System::RandomWalk | System::RandomWalkPerturbed { .. } => Sampling::IntegerWindow { w: 1000 },
        _ => Sampling::RandomBox { lo: vec![-1.0; dim], hi: vec![1.0; dim], count: n.unwrap_or(100), seed },
    }
}

fn is_markov(system: &System) -> bool {
    matches!(system, System::RandomWalk | System::RandomWalkPerturbed { .. })
}

/// `kind:key=value,...`; vector values use `;` and scalars broadcast to `dim`.
pub fn parse_sampling(spec: &str, dim: usize, seed: u64) -> Result<Sampling, CliError> {
    let (kind, body) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
    let mut kv = Vec::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("sampling '{spec}': expected key=value, got '{part}'")))?;
        kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    let allowed: &[&str] = match kind.to_ascii_lowercase().as_str() {
        "chebyshev" => &["lo", "hi", "intervals"],
        "box" => &["lo", "hi", "count"],
        "trajectories" => &["lo", "hi", "count", "len"],
        "trajectory" => &["x0", "len"],
        "disk" => &["count", "alpha"],
        "window" => &["w"],
        other => return Err(CliError::Usage(format!("unknown sampling '{other}'"))),
    };
    if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("sampling '{spec}': unknown key '{k}'")));
    }
    let raw = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let need = |key: &str| raw(key).ok_or_else(|| CliError::Usage(format!("sampling '{spec}' requires '{key}'")));
    let num = |key: &str| -> Result<f64, CliError> {
        need(key)?.parse().map_err(|_| CliError::Usage(format!("sampling '{spec}': bad value for '{key}'")))
    };
    let int = |key: &str| -> Result<usize, CliError> {
        need(key)?.parse().map_err(|_| CliError::Usage(format!("sampling '{spec}': bad value for '{key}'")))
    };
    let vector = |key: &str| -> Result<Vec<f64>, CliError> {
        let v: Vec<f64> = need(key)?
            .split(';')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("sampling '{spec}': bad vector for '{key}'")))?;
        match v.len() {
            1 => Ok(vec![v[0]; dim]),
            l if l == dim => Ok(v),
            l => Err(CliError::Usage(format!("sampling '{spec}': '{key}' has {l} entries, system dimension is {dim}"))),
        }
    };
    Ok(match kind.to_ascii_lowercase().as_str() {
        "chebyshev" => Sampling::Chebyshev { lo: num("lo")?, hi: num("hi")?, intervals: int("intervals")? },
        "box" => Sampling::RandomBox { lo: vector("lo")?, hi: vector("hi")?, count: int("count")?, seed },
        "trajectories" => Sampling::RandomTrajectories {
            lo: vector("lo")?,
            hi: vector("hi")?,
            count: int("count")?,
            len: int("len")?,
            seed,
        },
        "trajectory" => Sampling::Trajectory { x0: parse_point(need("x0")?)?, len: int("len")? },
        "disk" => Sampling::Disk { count: int("count")?, alpha: num("alpha")?, seed },
        _ => Sampling::IntegerWindow {
            w: need("w")?.parse().map_err(|_| CliError::Usage(format!("sampling '{spec}': bad window")))?,
        },
    })
}

/// Coordinates separated by `;`, each a complex literal.
pub fn parse_point(s: &str) -> Result<Point, CliError> {
    s.split(';').map(|t| parse_complex(t)).collect::<Result<_, _>>().map_err(usage)
}

impl DataPlan {
    pub fn from_args(args: &DataArgs) -> Result<Self, CliError> {
        if args.samples == 0 {
            return Err(CliError::Usage("--samples must be >= 1".into()));
        }
        if !(args.threshold > 0.0 && args.threshold < 1.0) {
            return Err(CliError::Usage("--threshold must lie in (0, 1)".into()));
        }
        if args.window < 1 {
            return Err(CliError::Usage("--window must be >= 1".into()));
        }
        let parse_kernel = |s: &str| s.parse::<KernelSpec>().map_err(usage);
        let kernel = args.kernel.as_deref().map(parse_kernel).transpose()?;
        if let Some(path) = &args.gram {
            if kernel.is_some() || args.sampling.is_some() {
                log::warn!("--kernel and --sampling are ignored with --gram");
            }
            check_file(path)?;
            return Ok(Self { source: Source::Gram(path.clone()), kernel: None, threshold: args.threshold });
        }
        if let Some(path) = &args.data {
            check_file(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let set = snapshots_from_csv(&text).map_err(usage)?;
            let kernel = kernel.ok_or_else(|| CliError::Usage("--data requires --kernel".into()))?;
            let origin = json!({ "data": path, "hash": set.hash() });
            return Ok(Self { source: Source::Snapshots { set, origin }, kernel: Some(kernel), threshold: args.threshold });
        }
        let spec = args
            .system
            .as_deref()
            .ok_or_else(|| CliError::Usage("one of --system, --data or --gram is required".into()))?;
        let mut system: System = spec.parse().map_err(usage)?;
        let kernel = match kernel {
            Some(k) => k,
            None => parse_kernel(default_kernel(&system))?,
        };
        // identity takes its dimension from the kernel unless given
        if let (System::Identity { .. }, Some(d)) = (&system, kernel.dim()) {
            if !spec.to_ascii_lowercase().contains("d=") {
                system = System::Identity { dim: d };
            }
        }
        if let Some(d) = kernel.dim() {
            if d != system.dim() {
                return Err(CliError::Usage(format!(
                    "kernel dimension {d} does not match system dimension {}",
                    system.dim()
                )));
            }
        }
        if is_markov(&system) && !args.monte_carlo {
            if args.sampling.is_some() {
                return Err(CliError::Usage("Markov chains use --window; pass --monte-carlo to sample".into()));
            }
            return Ok(Self {
                source: Source::MarkovExact { system, window: args.window, seed: args.seed },
                kernel: Some(kernel),
                threshold: args.threshold,
            });
        }
        let sampling = match &args.sampling {
            Some(s) => parse_sampling(s, system.dim(), args.seed)?,
            None if is_markov(&system) => Sampling::IntegerWindow { w: args.window },
            None => default_sampling(&system, args.n, args.seed),
        };
        if !system.is_stochastic() && args.samples != 1 {
            return Err(CliError::Usage("deterministic systems take --samples 1".into()));
        }
        Ok(Self {
            source: Source::Generate { system, sampling, samples: args.samples, seed: args.seed },
            kernel: Some(kernel),
            threshold: args.threshold,
        })
    }

    pub fn build(self) -> Result<Dataset, CliError> {
        let Self { source, kernel, threshold } = self;
        let kernel_name = kernel.as_ref().map(|k| k.to_string());
        match source {
            Source::Gram(path) => {
                let gram = read_gram(&path)?;
                let describe = json!({ "gram": path, "kernel": gram.provenance.kernel, "n": gram.n() });
                Ok(Dataset { gram, snapshots: None, kernel: None, threshold, describe })
            }
            Source::Snapshots { set, origin } => {
                let k = kernel.expect("kernel resolved with snapshots");
                let gram = build_gram(&set, &k)?;
                let describe = json!({ "source": origin, "kernel": kernel_name, "n": set.len(), "samples": set.samples() });
                Ok(Dataset { gram, snapshots: Some(set), kernel: Some(k), threshold, describe })
            }
            Source::Generate { system, sampling, samples, seed } => {
                let k = kernel.expect("kernel resolved with system");
                let set = generate_snapshots(&system, &sampling, samples, seed)?;
                let gram = build_gram(&set, &k)?;
                let describe = json!({
                    "system": system.to_string(),
                    "sampling": format!("{sampling:?}"),
                    "samples": samples,
                    "seed": seed,
                    "kernel": kernel_name,
                    "n": set.len(),
                    "snapshot_hash": set.hash(),
                });
                Ok(Dataset { gram, snapshots: Some(set), kernel: Some(k), threshold, describe })
            }
            Source::MarkovExact { system, window, seed } => {
                let k = kernel.expect("kernel resolved with system");
                let states: Vec<i64> = (-window..=window).collect();
                let gram = build_gram_markov_exact(&system, &states, &k)?;
                // pre-states only; successors are unused with exact transitions
                let x: Vec<c64> = states.iter().map(|&s| c64::new(s as f64, 0.0)).collect();
                let set = SnapshotSet::new(1, 1, x.clone(), x)?;
                let describe = json!({
                    "system": system.to_string(),
                    "window": window,
                    "exact_transitions": true,
                    "seed": seed,
                    "kernel": kernel_name,
                    "n": states.len(),
                });
                Ok(Dataset { gram, snapshots: Some(set), kernel: Some(k), threshold, describe })
            }
        }
    }
}

fn check_file(path: &PathBuf) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}
