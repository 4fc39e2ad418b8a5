use std::collections::BTreeMap;
use std::path::Path;

use palmfbm::ergodicity::{geometric_grid, mixing_decay_check};
use palmfbm::pointproc::{depalmize, PalmLatticeSampler};
use palmfbm::spectrum::{dual_grid, empirical_structure_factor, theoretical_curve, EmpiricalOptions, SpectrumMethod};
use palmfbm::stats::{log_spaced, loglog_regress, loglog_regress_weighted, number_variance_scan, RegressionSummary, ScanParams};
use palmfbm::{io, ConfigKind, PointConfiguration, StreamKey};
use rayon::prelude::*;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{sibling, RunManifest};
use crate::plot;

type Params = BTreeMap<String, String>;

fn param(m: &mut Params, k: &str, v: impl ToString) {
    m.insert(k.to_string(), v.to_string());
}

fn half_window(n: usize) -> CliResult<usize> {
    if n < 2 || n % 2 != 0 {
        return Err(CliError::Usage(format!("--n must be an even number >= 2, got {n}")));
    }
    Ok(n / 2)
}

fn finish(command: &str, params: Params, seed: u64, primary: &Path, outputs: &[&Path]) -> CliResult<()> {
    RunManifest::new(command, params, seed, outputs).write_next_to(primary)?;
    Ok(())
}

pub fn run(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Variance(a) => variance(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Mixing(a) => mixing(a),
        Command::Regress(a) => regress(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn sample(a: &SampleArgs) -> CliResult<()> {
    let half = half_window(a.n)?;
    let seed = a.common.seed;
    let key = StreamKey::root(seed);
    let palm = PalmLatticeSampler::new(a.h, half, a.fbm_mode)?.sample(key);

    let mut p = Params::new();
    param(&mut p, "command", "sample");
    param(&mut p, "h", a.h);
    param(&mut p, "n", a.n);
    param(&mut p, "N", half);
    param(&mut p, "seed", seed);
    param(&mut p, "mode", a.mode);
    param(&mut p, "fbm_mode", a.fbm_mode);
    let config = match a.mode {
        ConfigKind::Palm => palm,
        ConfigKind::Stationarized => {
            let x = a.shift.unwrap_or(half as f64 / 4.0);
            let c = depalmize(&palm, x, key)?;
            param(&mut p, "shift_halfwidth", format!("{x:?}"));
            param(&mut p, "shift", format!("{:?}", c.meta.shift.unwrap_or(0.0)));
            c
        }
    };
    param(&mut p, "points", config.len());
    io::write_points_file(&a.out, config.points(), &p)?;
    finish("sample", p, seed, &a.out, &[&a.out])
}

fn variance(a: &VarianceArgs) -> CliResult<()> {
    let half = half_window(a.n)?;
    let seed = a.common.seed;
    let rmax = a.rmax.unwrap_or(a.n as f64 / 16.0);
    if !(a.rmin > 0.0 && rmax > a.rmin) || a.nr < 2 {
        return Err(CliError::Usage(format!(
            "need 0 < rmin < rmax and nr >= 2, got rmin={} rmax={rmax} nr={}",
            a.rmin, a.nr
        )));
    }
    let mut params = ScanParams::new(a.h, half, a.realizations);
    params.radii = log_spaced(a.rmin, rmax, a.nr);
    params.mode = a.mode;
    params.shift_halfwidth = a.shift;
    params.bootstrap = a.bootstrap;
    params.fbm_mode = a.fbm_mode;
    let mut table = number_variance_scan(&params, StreamKey::root(seed))?;
    let fit = loglog_regress(&table)?;
    let summary = RegressionSummary::from(&fit);

    param(&mut table.params, "command", "variance");
    param(&mut table.params, "n", a.n);
    param(&mut table.params, "rmin", format!("{:?}", a.rmin));
    param(&mut table.params, "rmax", format!("{rmax:?}"));
    param(&mut table.params, "nr", a.nr);
    io::write_variance_table_file(&a.out, &table)?;
    let fit_path = sibling(&a.out, "fit.json");
    io::write_json_file(&fit_path, &summary)?;
    println!("slope: {:?}", summary.slope);
    println!("r_squared: {:?}", summary.r_squared);
    finish("variance", table.params.clone(), seed, &a.out, &[&a.out, &fit_path])
}

fn empirical_configs(a: &SpectrumArgs, half: usize, key: StreamKey) -> CliResult<Vec<PointConfiguration>> {
    let sampler = PalmLatticeSampler::new(a.h, half, palmfbm::FbmMode::TwoSided)?;
    let m = a.realizations;
    if m < 2 {
        return Err(palmfbm::Error::DegenerateEnsemble(m).into());
    }
    let mut configs: Vec<PointConfiguration> = (0..m.div_ceil(2) as u64)
        .into_par_iter()
        .flat_map_iter(|j| {
            let (x, y) = sampler.positions_pair(key.child(j));
            [x, y].map(|pts| PointConfiguration::palm(pts).expect("lattice sampler keeps the origin"))
        })
        .collect();
    configs.truncate(m);
    Ok(configs)
}

fn spectrum(a: &SpectrumArgs) -> CliResult<()> {
    let seed = a.common.seed;
    let mut p = Params::new();
    param(&mut p, "command", "spectrum");
    param(&mut p, "h", a.h);
    param(&mut p, "seed", seed);
    param(&mut p, "mode", a.mode);
    param(&mut p, "tol", format!("{:?}", a.tol));
    if !(a.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let curve = if a.mode == SpectrumMethod::Empirical {
        let half = half_window(a.n)?;
        let length = a.window.unwrap_or(half as f64);
        if !(length > 0.0 && length <= 2.0 * half as f64) {
            return Err(CliError::Usage(format!("--window must lie in (0, n], got {length}")));
        }
        let ts = match &a.t {
            Some(ts) => ts.clone(),
            None => dual_grid(length, a.tmin, a.tmax),
        };
        if ts.is_empty() {
            return Err(CliError::Usage("empty t grid".into()));
        }
        let opts = EmpiricalOptions {
            length,
            allow_off_grid: a.allow_off_grid,
        };
        // validate the grid before spending time on sampling
        if !a.allow_off_grid {
            if let Some(&t) = ts.iter().find(|&&t| palmfbm::spectrum::dual_grid_index(t, length).is_none()) {
                return Err(palmfbm::Error::GridMismatch { t, length }.into());
            }
        }
        param(&mut p, "n", a.n);
        param(&mut p, "N", half);
        param(&mut p, "realizations", a.realizations);
        param(&mut p, "window", format!("{length:?}"));
        param(&mut p, "allow_off_grid", a.allow_off_grid);
        let configs = empirical_configs(a, half, StreamKey::root(seed))?;
        empirical_structure_factor(&configs, &ts, opts)?
    } else {
        let ts = match &a.t {
            Some(ts) => ts.clone(),
            None => {
                if a.nt < 1 || !(a.tmin > 0.0 && a.tmax >= a.tmin) {
                    return Err(CliError::Usage(format!(
                        "need 0 < tmin <= tmax and nt >= 1, got tmin={} tmax={} nt={}",
                        a.tmin, a.tmax, a.nt
                    )));
                }
                if a.nt == 1 {
                    vec![a.tmin]
                } else {
                    (0..a.nt)
                        .map(|i| a.tmin + (a.tmax - a.tmin) * i as f64 / (a.nt - 1) as f64)
                        .collect()
                }
            }
        };
        theoretical_curve(a.h, &ts, a.mode, a.tol)?
    };
    param(&mut p, "points", curve.t.len());
    io::write_spectrum_file(&a.out, &curve, &p)?;
    let mut all = curve.params.clone();
    all.extend(p);
    finish("spectrum", all, seed, &a.out, &[&a.out])
}

fn mixing(a: &MixingArgs) -> CliResult<()> {
    if !(a.tmin > 0.0 && a.tmax > a.tmin) || a.nt < 2 {
        return Err(CliError::Usage(format!(
            "need 0 < tmin < tmax and nt >= 2, got tmin={} tmax={} nt={}",
            a.tmin, a.tmax, a.nt
        )));
    }
    let grid = geometric_grid(a.tmin, a.tmax, a.nt);
    let verdict = mixing_decay_check(a.h, a.a, a.b, &grid)?;
    println!("mixing: {}", verdict.mixing);
    if let Some(out) = &a.out {
        let mut p = verdict.curve.params();
        param(&mut p, "command", "mixing");
        param(&mut p, "seed", a.common.seed);
        param(&mut p, "tmin", format!("{:?}", a.tmin));
        param(&mut p, "tmax", format!("{:?}", a.tmax));
        param(&mut p, "nt", a.nt);
        param(&mut p, "mixing", verdict.mixing);
        io::write_mixing_file(out, &verdict.curve, &p)?;
        finish("mixing", p, a.common.seed, out, &[out])?;
    }
    Ok(())
}

fn regress(a: &RegressArgs) -> CliResult<()> {
    let table = io::read_variance_table_file(&a.input).map_err(|e| CliError::input(&a.input, e))?;
    let fit = if a.weighted {
        loglog_regress_weighted(&table)?
    } else {
        loglog_regress(&table)?
    };
    let summary = RegressionSummary::from(&fit);
    match &a.out {
        Some(out) => {
            io::write_json_file(out, &summary)?;
            let mut p = Params::new();
            param(&mut p, "command", "regress");
            param(&mut p, "in", a.input.display());
            param(&mut p, "weighted", a.weighted);
            let seed = table
                .params
                .get("seed")
                .and_then(|s| s.parse().ok())
                .unwrap_or(a.common.seed);
            finish("regress", p, seed, out, &[out])?;
        }
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn plot_cmd(a: &PlotArgs) -> CliResult<()> {
    let panels = a.inputs.iter().map(|p| plot::load_panel(p)).collect::<CliResult<Vec<_>>>()?;
    std::fs::write(&a.out, plot::render(&panels))?;
    let mut p = Params::new();
    param(&mut p, "command", "plot");
    param(
        &mut p,
        "in",
        a.inputs.iter().map(|i| i.display().to_string()).collect::<Vec<_>>().join(","),
    );
    finish("plot", p, a.common.seed, &a.out, &[&a.out])
}
