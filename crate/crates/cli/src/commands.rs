//! Subcommand bodies. Each takes parsed arguments and a [`Run`] and writes
//! its artifacts through it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use specrkhs::c64;
use specrkhs::forecast::{
    error_bound, predict_series, project_state_observables, rkhs_norm, values_at_snapshots, ModeFitter,
};
use specrkhs::gram::{compress, CompressedBasis, GramTriple};
use specrkhs::io::{csv_table, format_complex, format_real, gram_to_bytes, snapshots_to_csv};
use specrkhs::measures::{check_normality, observable_from_kernel_coeffs, MeasureDecomposition, RationalSmoothingKernel};
use specrkhs::spectra::{
    pseudospectrum_compressed, pseudospectrum_koop_with, pseudospectrum_pf_with, verify_eigenpairs_with,
    PseudospectrumOptions, PseudospectrumResult, VerifiedEigenpair,
};

use crate::cli::{DataArgs, GridArgs, MeasureArgs, MeasureKind};
use crate::data::{parse_point, DataPlan, Dataset};
use crate::error::{usage, CliError};
use crate::grid::{parse_grid, parse_points, Grid};
use crate::run::Run;
use crate::svg::heat_map;

/// Entrywise tolerance for `R = G` and `A = A*`, relative to `max |G|`.
const NORMALITY_TOL: f64 = 1e-12;

pub fn load(run: &mut Run, args: &DataArgs) -> Result<Dataset, CliError> {
    let plan = DataPlan::from_args(args)?;
    let ds = run.timed("gram", || plan.build())?;
    run.note("data", ds.describe.clone());
    Ok(ds)
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--eps must be positive and finite, got {eps}")))
    }
}

fn check_rank(rank: Option<usize>, n: usize) -> Result<usize, CliError> {
    match rank {
        None => Ok(n),
        Some(r) if (1..=n).contains(&r) => Ok(r),
        Some(r) => Err(CliError::Usage(format!("--rank must lie in 1..={n}, got {r}"))),
    }
}

pub fn gram(run: &mut Run, data: &DataArgs) -> Result<(), CliError> {
    let ds = load(run, data)?;
    run.write("gram.bin", &gram_to_bytes(&ds.gram)?)?;
    if let Some(set) = &ds.snapshots {
        run.write("snapshots.csv", snapshots_to_csv(set).as_bytes())?;
    }
    run.note("n", json!(ds.gram.n()));
    Ok(())
}

pub fn eig_pairs(run: &mut Run, ds: &Dataset, eps: f64) -> Result<Vec<VerifiedEigenpair>, CliError> {
    check_eps(eps)?;
    let pairs = run.timed("eig", || verify_eigenpairs_with(&ds.gram, eps, ds.threshold))?;
    let rows = pairs.iter().map(|p| {
        vec![format_real(p.lambda.re), format_real(p.lambda.im), format_real(p.residual), p.verified.to_string()]
    });
    run.write("eig.csv", csv_table(&["lambda_re", "lambda_im", "residual", "verified"], rows).as_bytes())?;
    let verified = pairs.iter().filter(|p| p.verified).count();
    run.note("eig", json!({ "eps": eps, "pairs": pairs.len(), "verified": verified }));
    Ok(pairs)
}

pub fn eig(run: &mut Run, data: &DataArgs, eps: f64) -> Result<(), CliError> {
    check_eps(eps)?;
    let ds = load(run, data)?;
    eig_pairs(run, &ds, eps).map(|_| ())
}

fn pseudo_csv(res: &PseudospectrumResult) -> String {
    let mut flagged = vec![false; res.grid.len()];
    res.flagged.iter().for_each(|&i| flagged[i] = true);
    let rows = res.grid.iter().zip(&res.tau).zip(&flagged).map(|((z, t), f)| {
        vec![format_real(z.re), format_real(z.im), format_real(*t), f.to_string()]
    });
    csv_table(&["re", "im", "tau", "flagged"], rows)
}

pub fn write_pseudo(run: &mut Run, stem: &str, res: &PseudospectrumResult, grid: &Grid, svg: bool) -> Result<(), CliError> {
    run.write(&format!("{stem}.csv"), pseudo_csv(res).as_bytes())?;
    if svg {
        let title = format!("{stem}: log10 tau, eps = {}", res.epsilon);
        let map = heat_map(&res.grid, &res.tau, &res.flagged, grid.cell, &title);
        run.write(&format!("{stem}.svg"), map.as_bytes())?;
    }
    let failures: Vec<Value> = res.failures.iter().map(|(i, m)| json!({ "index": i, "message": m })).collect();
    run.note(stem, json!({
        "eps": res.epsilon,
        "points": res.grid.len(),
        "flagged": res.flagged.len(),
        "failures": failures,
    }));
    Ok(())
}

pub fn pseudo_pf(run: &mut Run, ds: &Dataset, grid: &Grid, eps: f64, rank: Option<usize>) -> Result<PseudospectrumResult, CliError> {
    check_eps(eps)?;
    let r = check_rank(rank, ds.gram.n())?;
    if rank.is_some() {
        let basis = run.timed("compress", || compress(&ds.gram, r, ds.threshold))?;
        run.note("rank", json!(basis.rank()));
        Ok(run.timed("pseudospectrum", || pseudospectrum_compressed(&basis, &ds.gram, &grid.points, eps))?)
    } else {
        let opts = PseudospectrumOptions { store_witnesses: false, threshold: ds.threshold };
        Ok(run.timed("pseudospectrum", || pseudospectrum_pf_with(&ds.gram, &grid.points, eps, &opts))?)
    }
}

pub fn pseudospec(run: &mut Run, data: &DataArgs, g: &GridArgs, rank: Option<usize>) -> Result<(), CliError> {
    check_eps(g.eps)?;
    let grid = parse_grid(&g.grid)?;
    let ds = load(run, data)?;
    let res = pseudo_pf(run, &ds, &grid, g.eps, rank)?;
    write_pseudo(run, "pseudospec", &res, &grid, g.svg)
}

pub fn pseudospec_koop(
    run: &mut Run,
    data: &DataArgs,
    g: &GridArgs,
    n1: Option<usize>,
    n2: Option<usize>,
) -> Result<(), CliError> {
    check_eps(g.eps)?;
    let grid = parse_grid(&g.grid)?;
    let ds = load(run, data)?;
    let n = ds.gram.n();
    let n1 = n1.unwrap_or(n);
    let n2 = n2.unwrap_or(n1);
    if !(1..=n).contains(&n1) || !(1..=n1).contains(&n2) {
        return Err(CliError::Usage(format!("need 1 <= n2 <= n1 <= {n}, got n1 = {n1}, n2 = {n2}")));
    }
    let gram = if n1 < n { ds.gram.leading(n1)? } else { ds.gram.clone() };
    let opts = PseudospectrumOptions { store_witnesses: false, threshold: ds.threshold };
    let res = run.timed("pseudospectrum", || pseudospectrum_koop_with(&gram, n1, n2, &grid.points, g.eps, &opts))?;
    run.note("truncation", json!({ "n1": n1, "n2": n2 }));
    write_pseudo(run, "pseudospec_koop", &res, &grid, g.svg)
}

/// Values at the snapshots and RKHS norm of a forecast observable.
fn forecast_observable(spec: &str, ds: &Dataset) -> Result<(Vec<c64>, f64), CliError> {
    let (set, kernel) = ds.require_snapshots("forecast")?;
    let (kind, arg) = spec.split_once(':').ok_or_else(|| CliError::Usage(format!("bad observable '{spec}'")))?;
    match kind {
        "state" => {
            let k: usize = arg.parse().map_err(|_| CliError::Usage(format!("bad state index in '{spec}'")))?;
            if k >= set.dim() {
                return Err(CliError::Usage(format!("state index {k} out of range for dimension {}", set.dim())));
            }
            let c = project_state_observables(&ds.gram, set)?;
            let c: Vec<c64> = (0..ds.gram.n()).map(|i| c[(i, k)]).collect();
            Ok((values_at_snapshots(&c, &ds.gram)?, rkhs_norm(&c, &ds.gram)?))
        }
        "kernel" => {
            let z = parse_point(arg)?;
            kernel.check_point(&z).map_err(usage)?;
            let values = (0..set.len()).map(|j| kernel.eval(set.x(j), &z)).collect::<Result<Vec<_>, _>>()?;
            Ok((values, kernel.eval(&z, &z)?.re.max(0.0).sqrt()))
        }
        _ => Err(CliError::Usage(format!("unknown observable '{spec}'; use state:K or kernel:Z"))),
    }
}

pub struct ForecastRequest<'a> {
    pub x0: &'a str,
    pub steps: u32,
    pub observable: &'a str,
    pub eps: f64,
    pub norm_kstar: Option<f64>,
}

pub fn forecast_with(run: &mut Run, ds: &Dataset, pairs: Option<&[VerifiedEigenpair]>, req: &ForecastRequest) -> Result<(), CliError> {
    check_eps(req.eps)?;
    if let Some(k) = req.norm_kstar {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(CliError::Usage(format!("--norm-kstar must be finite and >= 0, got {k}")));
        }
    }
    let (set, kernel) = ds.require_snapshots("forecast")?;
    let x0 = parse_point(req.x0)?;
    if x0.len() != set.dim() {
        return Err(CliError::Usage(format!("--x0 has {} coordinates, data dimension is {}", x0.len(), set.dim())));
    }
    let (values, norm_g) = forecast_observable(req.observable, ds)?;
    let owned;
    let pairs = match pairs {
        Some(p) => p,
        None => {
            owned = run.timed("eig", || verify_eigenpairs_with(&ds.gram, req.eps, ds.threshold))?;
            &owned
        }
    };
    let verified: Vec<VerifiedEigenpair> = pairs.iter().filter(|p| p.verified && p.residual < req.eps).cloned().collect();
    if verified.is_empty() {
        return Err(specrkhs::Error::InvalidParameter(format!("no eigenpairs verified at eps = {}", req.eps)).into());
    }
    let model = run.timed("fit", || -> Result<_, specrkhs::Error> {
        ModeFitter::new(&verified, &ds.gram)?.fit(&ds.gram, kernel, set, &x0, req.norm_kstar)
    })?;
    let pred = predict_series(&model, &values, req.steps)?;
    let rows = pred.iter().enumerate().map(|(n, p)| {
        vec![n.to_string(), format_complex(*p), format_real(error_bound(&model, norm_g, n as u32))]
    });
    run.write("forecast.csv", csv_table(&["n", "predicted", "bound"], rows).as_bytes())?;
    let meta = json!({
        "x0": x0.iter().map(|z| format_complex(*z)).collect::<Vec<_>>(),
        "observable": req.observable,
        "observable_norm": norm_g,
        "steps": req.steps,
        "modes": verified.len(),
        "eps_ver": model.eps_ver,
        "delta": model.delta,
        "norm_kstar": model.norm_kstar,
        "certified": model.is_certified(),
    });
    let mut text = serde_json::to_string_pretty(&meta).expect("serializes");
    text.push('\n');
    run.write("forecast.json", text.as_bytes())?;
    run.note("forecast", meta);
    Ok(())
}

pub fn forecast(run: &mut Run, data: &DataArgs, req: &ForecastRequest) -> Result<(), CliError> {
    check_eps(req.eps)?;
    parse_point(req.x0)?;
    let ds = load(run, data)?;
    forecast_with(run, &ds, None, req)
}

/// Kernel-section coefficients of a measure observable and whether they
/// are rescaled to unit norm.
fn measure_coeffs(spec: &str, ds: &Dataset) -> Result<(Vec<c64>, bool), CliError> {
    let n = ds.gram.n();
    let (kind, arg) = spec.split_once(':').ok_or_else(|| CliError::Usage(format!("bad observable '{spec}'")))?;
    match kind {
        "random" => {
            let seed: u64 = arg.parse().map_err(|_| CliError::Usage(format!("bad seed in '{spec}'")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(((0..n).map(|_| c64::new(rng.random(), 0.0)).collect(), true))
        }
        "state" => {
            let (set, _) = ds.require_snapshots("a state observable")?;
            let k: usize = arg.parse().map_err(|_| CliError::Usage(format!("bad state index in '{spec}'")))?;
            if k >= set.dim() {
                return Err(CliError::Usage(format!("state index {k} out of range")));
            }
            let c = project_state_observables(&ds.gram, set)?;
            Ok(((0..n).map(|i| c[(i, k)]).collect(), false))
        }
        "coeffs" => {
            let mut c = vec![c64::new(0.0, 0.0); n];
            for part in arg.split(';').filter(|p| !p.trim().is_empty()) {
                let (i, v) = part.split_once('=').ok_or_else(|| CliError::Usage(format!("bad coefficient '{part}'")))?;
                let i: usize = i.trim().parse().map_err(|_| CliError::Usage(format!("bad index '{i}'")))?;
                if i >= n {
                    return Err(CliError::Usage(format!("coefficient index {i} out of range 0..{n}")));
                }
                c[i] = specrkhs::io::parse_complex(v).map_err(usage)?;
            }
            Ok((c, false))
        }
        _ => Err(CliError::Usage(format!("unknown observable '{spec}'; use random:SEED, state:K or coeffs:I=V;..."))),
    }
}

pub struct MeasureOutput {
    pub points: Vec<f64>,
    pub density: Vec<f64>,
}

pub fn measure_with(run: &mut Run, ds: &Dataset, m: &MeasureArgs, extra: Option<(&str, &dyn Fn(f64) -> f64)>) -> Result<MeasureOutput, CliError> {
    check_eps(m.eps)?;
    let r = check_rank(m.rank, ds.gram.n())?;
    let points = match (&m.points, m.kind) {
        (Some(s), _) => parse_points(s)?,
        (None, MeasureKind::Selfadjoint) => parse_points("-1.5:1.5:301")?,
        (None, MeasureKind::Unitary) => parse_points("-pi:pi:361")?,
    };
    let kernel = RationalSmoothingKernel::with_order(m.order).map_err(usage)?;
    let (c, normalize) = measure_coeffs(&m.observable, ds)?;
    let basis: CompressedBasis = run.timed("compress", || compress(&ds.gram, r, ds.threshold))?;
    let (unitary, selfadjoint) = kernel_level_normality(&ds.gram);
    match m.kind {
        MeasureKind::Selfadjoint if !selfadjoint => log::warn!("A differs from A*: the operator is not self-adjoint"),
        MeasureKind::Unitary if !unitary => log::warn!("R differs from G: the operator is not an isometry"),
        _ => {}
    }
    let mut g = observable_from_kernel_coeffs(&c, &basis, &ds.gram, m.orthogonal_to_constant)?;
    let norm = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if normalize {
        if !(norm > 0.0) {
            return Err(specrkhs::Error::Degenerate("observable has zero norm".into()).into());
        }
        g.iter_mut().for_each(|v| *v /= norm);
    }
    let samples = run.timed("measure", || -> Result<_, specrkhs::Error> {
        let dec = MeasureDecomposition::new(basis.khat_t.as_ref(), &g)?;
        match m.kind {
            MeasureKind::Selfadjoint => dec.selfadjoint(&points, m.eps, &kernel),
            MeasureKind::Unitary => dec.unitary(&points, m.eps, &kernel),
        }
    })?;
    let axis = if m.kind == MeasureKind::Unitary { "theta" } else { "x" };
    let mut header = vec![axis, "density"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let rows = samples.points.iter().zip(&samples.values).map(|(x, v)| {
        let mut row = vec![format_real(*x), format_real(*v)];
        if let Some((_, f)) = extra {
            row.push(format_real(f(*x)));
        }
        row
    });
    run.write("measure.csv", csv_table(&header, rows).as_bytes())?;
    let failures: Vec<Value> = samples.failures.iter().map(|(i, e)| json!({ "index": i, "message": e })).collect();
    run.note("measure", json!({
        "type": m.kind,
        "order": m.order,
        "eps": m.eps,
        "rank": basis.rank(),
        "observable": m.observable,
        "observable_norm": if normalize { 1.0 } else { norm },
        "hermitian_path": samples.hermitian_path,
        "cond_v": samples.cond_v,
        "max_imag": samples.max_imag,
        "failures": failures,
    }));
    Ok(MeasureOutput { points: samples.points, density: samples.values })
}

pub fn measure(run: &mut Run, data: &DataArgs, m: &MeasureArgs) -> Result<(), CliError> {
    check_eps(m.eps)?;
    RationalSmoothingKernel::with_order(m.order).map_err(usage)?;
    if let Some(p) = &m.points {
        parse_points(p)?;
    }
    let ds = load(run, data)?;
    measure_with(run, &ds, m, None).map(|_| ())
}

/// Isometry (`R = G`) and self-adjointness (`A = A*`) tests on the Gram
/// triple, relative to the largest entry of `G`.
fn kernel_level_normality(gram: &GramTriple) -> (bool, bool) {
    let report = normality_entries(gram);
    (report.0 <= report.2, report.1 <= report.2)
}

/// `(max |R - G|, max |A - A*|, tolerance)`.
fn normality_entries(gram: &GramTriple) -> (f64, f64, f64) {
    let tol = NORMALITY_TOL * gram.g.norm_max().max(1.0);
    (
        (&gram.r - &gram.g).norm_max(),
        (&gram.a - gram.a.adjoint()).norm_max(),
        tol,
    )
}

pub fn normality_with(run: &mut Run, gram: &GramTriple, rank: Option<usize>, threshold: f64) -> Result<Value, CliError> {
    let r = check_rank(rank, gram.n())?;
    let basis = run.timed("compress", || compress(gram, r, threshold))?;
    let rep = check_normality(gram, &basis);
    let tol = normality_entries(gram).2;
    let out = json!({
        "rank": basis.rank(),
        "max_r_minus_g": rep.max_r_minus_g,
        "max_a_minus_adjoint": rep.max_a_minus_adjoint,
        "unitary_defect": rep.unitary_defect,
        "selfadjoint_defect": rep.selfadjoint_defect,
        "compressed_unitary": rep.is_unitary(),
        "compressed_selfadjoint": rep.is_selfadjoint(),
        "tolerance": tol,
        "unitary": rep.max_r_minus_g <= tol,
        "selfadjoint": rep.max_a_minus_adjoint <= tol,
    });
    let mut text = serde_json::to_string_pretty(&out).expect("serializes");
    text.push('\n');
    run.write("normality.json", text.as_bytes())?;
    run.note("normality", out.clone());
    Ok(out)
}

pub fn check_normality_cmd(run: &mut Run, data: &DataArgs, rank: Option<usize>) -> Result<(), CliError> {
    let ds = load(run, data)?;
    normality_with(run, &ds.gram, rank, ds.threshold).map(|_| ())
}
