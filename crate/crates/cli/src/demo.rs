//! End-to-end experiments on the built-in systems.

use std::f64::consts::PI;

use serde_json::json;
use specrkhs::c64;
use specrkhs::dynamics::System;
use specrkhs::forecast::{kedmd_forecast, project_state_observables, values_at_snapshots};
use specrkhs::gram::compress;
use specrkhs::io::{csv_table, format_real};
use specrkhs::spectra::pseudospectrum_compressed;

use crate::cli::{DataArgs, DemoName, MeasureArgs, MeasureKind};
use crate::commands::{eig_pairs, forecast_with, load, measure_with, normality_with, pseudo_pf, write_pseudo, ForecastRequest};
use crate::error::CliError;
use crate::grid::parse_grid;
use crate::run::Run;

pub struct DemoArgs {
    pub name: DemoName,
    pub eps: Option<f64>,
    pub order: Option<usize>,
    pub n: Option<usize>,
    pub window: i64,
    pub seed: u64,
    pub svg: bool,
}

fn data(system: &str, n: Option<usize>, seed: u64, window: i64) -> DataArgs {
    DataArgs {
        system: Some(system.to_string()),
        data: None,
        gram: None,
        kernel: None,
        sampling: None,
        n,
        samples: 1,
        seed,
        window,
        monte_carlo: false,
        threshold: specrkhs::linalg::DEFAULT_THRESHOLD,
    }
}

const SPECTRUM_GRID: &str = "-1.2:1.2:0.1,-1.2:1.2:0.1";

pub fn run_demo(run: &mut Run, a: &DemoArgs) -> Result<(), CliError> {
    if let Some(e) = a.eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(CliError::Usage(format!("--eps must be positive and finite, got {e}")));
        }
    }
    if a.window < 1 {
        return Err(CliError::Usage("--window must be >= 1".into()));
    }
    let grid = parse_grid(SPECTRUM_GRID)?;
    match a.name {
        DemoName::Gauss => {
            let ds = load(run, &data("gauss-map", a.n, a.seed, a.window))?;
            let eps = a.eps.unwrap_or(0.1);
            eig_pairs(run, &ds, eps)?;
            let res = pseudo_pf(run, &ds, &grid, eps, None)?;
            write_pseudo(run, "pseudospec", &res, &grid, a.svg)?;
            // state prediction c = G^+ X^T against the true iterates
            let (set, kernel) = ds.require_snapshots("demo")?;
            let c = project_state_observables(&ds.gram, set)?;
            let values = values_at_snapshots(&(0..ds.gram.n()).map(|i| c[(i, 0)]).collect::<Vec<_>>(), &ds.gram)?;
            let sys = System::gauss_map();
            let mut rows = Vec::new();
            for x0 in [-0.9, -0.55, -0.13] {
                let start = vec![c64::new(x0, 0.0)];
                let pred = kedmd_forecast(&ds.gram, kernel, set, &start, &[values.clone()], 10)?;
                let mut x = start.clone();
                for (n, p) in pred[0].iter().enumerate() {
                    if n > 0 {
                        x = sys.step(&x, None)?;
                    }
                    let rel = (p - x[0]).norm() / x[0].norm();
                    rows.push(vec![format_real(x0), n.to_string(), format_real(p.re), format_real(x[0].re), format_real(rel)]);
                }
            }
            let header = ["x0", "n", "predicted", "true", "relative_error"];
            run.write("state_forecast.csv", csv_table(&header, rows).as_bytes())
        }
        DemoName::Duffing => {
            let ds = load(run, &data("duffing", a.n, a.seed, a.window))?;
            let eps = a.eps.unwrap_or(0.1);
            let pairs = eig_pairs(run, &ds, eps)?;
            let rank = Some(200.min(ds.gram.n()));
            let res = pseudo_pf(run, &ds, &grid, eps, rank)?;
            write_pseudo(run, "pseudospec", &res, &grid, a.svg)?;
            let req = ForecastRequest { x0: "0.5;0.5", steps: 30, observable: "kernel:0;0", eps, norm_kstar: Some(1.0) };
            forecast_with(run, &ds, Some(&pairs), &req)
        }
        DemoName::Lorenz => {
            let ds = load(run, &data("lorenz", a.n, a.seed, a.window))?;
            let eps = a.eps.unwrap_or(0.1);
            eig_pairs(run, &ds, eps)?;
            let r = 200.min(ds.gram.n());
            let res = pseudo_pf(run, &ds, &grid, eps, Some(r))?;
            write_pseudo(run, "pseudospec", &res, &grid, a.svg)?;
            // pseudoeigenfunctions at exp(i pi j / 10) along the data
            let basis = run.timed("compress", || compress(&ds.gram, r, ds.threshold))?;
            let zs: Vec<c64> = (0..6).map(|j| c64::from_polar(1.0, PI * j as f64 / 10.0)).collect();
            let pe = run.timed("pseudoeigenfunctions", || pseudospectrum_compressed(&basis, &ds.gram, &zs, f64::MAX))?;
            let (set, _) = ds.require_snapshots("demo")?;
            let witnesses = pe.witnesses.as_ref().expect("compressed pseudospectra keep witnesses");
            let values: Vec<Vec<c64>> =
                witnesses.iter().map(|w| values_at_snapshots(w, &ds.gram)).collect::<Result<_, _>>()?;
            let mut header = vec!["u1".to_string(), "u2".into(), "u3".into()];
            header.extend((0..6).map(|j| format!("g{j}")));
            let rows = (0..set.len()).map(|l| {
                let mut row: Vec<String> = set.x(l).iter().map(|v| format_real(v.re)).collect();
                row.extend(values.iter().map(|g| format_real(g[l].re)));
                row
            });
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            run.write("pseudoeigenfunctions.csv", csv_table(&header, rows).as_bytes())?;
            run.note("pseudoeigenfunction_residuals", json!(pe.tau));
            Ok(())
        }
        DemoName::Mobius => {
            let ds = load(run, &data("mobius:preset=t2", a.n, a.seed, a.window))?;
            eig_pairs(run, &ds, a.eps.unwrap_or(0.1))?;
            normality_with(run, &ds.gram, None, ds.threshold)?;
            let m = MeasureArgs {
                kind: MeasureKind::Unitary,
                rank: None,
                order: a.order.unwrap_or(4),
                eps: a.eps.unwrap_or(0.05),
                points: None,
                observable: "random:0".into(),
                orthogonal_to_constant: false,
            };
            measure_with(run, &ds, &m, None).map(|_| ())
        }
        DemoName::Randomwalk => {
            let w = a.window;
            let ds = load(run, &data("random-walk", None, a.seed, w))?;
            // g = (delta_1 - delta_{-1}) / 2; states are -w..=w
            let m = MeasureArgs {
                kind: MeasureKind::Selfadjoint,
                rank: None,
                order: a.order.unwrap_or(6),
                eps: a.eps.unwrap_or(0.05),
                points: Some("-0.6:1.3:381".into()),
                observable: format!("coeffs:{}=0.5;{}=-0.5", w + 1, w - 1),
                orthogonal_to_constant: false,
            };
            let rho = |l: f64| 3.0 / (4.0 * PI) * (6.0 * l + 3.0 - 9.0 * l * l).max(0.0).sqrt();
            let out = measure_with(run, &ds, &m, Some(("exact", &rho)))?;
            let dev = out.points.iter().zip(&out.density).map(|(&x, &v)| (v - rho(x)).abs()).fold(0.0, f64::max);
            run.note("max_abs_deviation_from_exact", json!(dev));
            Ok(())
        }
    }
}
