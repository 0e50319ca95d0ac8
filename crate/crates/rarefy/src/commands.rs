//! Subcommand bodies. Each validates its configuration completely before
//! computing anything, then writes its outputs and the resolved config.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rarefaction_core::exec::Executor;
use rarefaction_core::rarefaction::{convergence_sweep, Experiment, ExperimentSettings, TrialMode};
use rarefaction_core::sde::{mc_survival, Stepping};
use rarefaction_core::special::j0_roots;
use rarefaction_core::spectral::{Spectrum, SurvivalModel};
use rarefaction_core::{Error as CoreError, Point};

use crate::config::{ModeConfig, RunConfig};
use crate::error::CliError;

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn prepare_out(dir: &Path, config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut resolved = config.clone();
    resolved.out = None;
    write_file(dir, "config.resolved.toml", &resolved.to_toml())
}

/// `m,mu` for the first `roots.count` zeros of `J0`, on `stdout`.
pub fn roots(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let count = config.roots_section()?.count;
    let table = j0_roots(count)?;
    let mut csv = String::from("m,mu\n");
    for (i, mu) in table.roots().iter().enumerate() {
        writeln!(csv, "{},{}", i + 1, num(*mu)).unwrap();
    }
    stdout.write_all(csv.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn spectrum_of(config: &RunConfig) -> Result<Spectrum, CliError> {
    let diffusion = config.diffusion()?;
    Ok(Spectrum::for_domain(
        &config.domain()?,
        diffusion.sigma_x(),
        diffusion.sigma_y(),
        config.modes,
    )?)
}

/// `spectrum.csv` with `k,lambda,c,mult`; the Parseval defect goes to `stdout`.
pub fn spectrum(config: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    config.validate_common()?;
    let spectrum = spectrum_of(config)?;
    let mut csv = String::from("k,lambda,c,mult\n");
    for (k, mode) in spectrum.modes().iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{}",
            k + 1,
            num(mode.lambda),
            num(mode.coefficient),
            spectrum.multiplicity(mode)
        )
        .unwrap();
    }
    prepare_out(out, config)?;
    write_file(out, "spectrum.csv", &csv)?;
    writeln!(stdout, "parseval_defect={}", num(spectrum.parseval_defect())).map_err(|source| {
        CliError::Io {
            path: "<stdout>".into(),
            source,
        }
    })
}

fn survival_points(config: &RunConfig) -> Result<Vec<Point>, CliError> {
    let section = config.survival_section()?;
    let domain = config.domain()?;
    let mut points = Vec::new();
    if section.grid >= 2 {
        let (lo, hi) = domain.bounding_box();
        let g = section.grid;
        let at = |axis: usize, i: usize| lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (g - 1) as f64;
        for j in 0..g {
            for i in 0..g {
                let p = [at(0, i), at(1, j)];
                if domain.signed_distance(p) >= 0.0 {
                    points.push(p);
                }
            }
        }
    }
    points.extend(section.points.iter().copied());
    Ok(points)
}

/// `survival.csv` with `t,x,y,u,err_bound`. Refuses any time below `t_min`.
pub fn survival(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let points = survival_points(config)?;
    let times = &config.survival_section()?.times;
    let model = SurvivalModel::with_cap(spectrum_of(config)?, config.certificate_cap)?;
    if let Some(&t) = times.iter().find(|&&t| t < model.t_min()) {
        return Err(CoreError::Uncertified {
            t,
            t_min: model.t_min(),
            bound: model.truncation_bound(t),
        }
        .into());
    }
    let mut csv = String::from("t,x,y,u,err_bound\n");
    for &t in times {
        for &p in &points {
            let v = model.survival_probability(t, p)?;
            writeln!(csv, "{},{},{},{},{}",
                num(t),
                num(p[0]),
                num(p[1]),
                num(v.probability()),
                num(v.bound)
            ).unwrap();
        }
    }
    prepare_out(out, config)?;
    write_file(out, "survival.csv", &csv)
}

/// `simulate.json` with `estimate, stderr, ci_low, ci_high, n`, echoed to `stdout`.
pub fn simulate(
    config: &RunConfig,
    out: &Path,
    exec: &dyn Executor,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let s = config.simulate_section()?;
    let stepping = Stepping::new(s.tau, s.dt, s.bridge)?;
    let estimate = mc_survival(
        &config.diffusion()?,
        &config.domain()?,
        s.start,
        &stepping,
        s.paths,
        config.seed,
        exec,
    )?;
    let json = serde_json::to_string_pretty(&estimate).expect("plain numbers serialize") + "\n";
    prepare_out(out, config)?;
    write_file(out, "simulate.json", &json)?;
    stdout.write_all(json.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

/// `report.json` (one report per tau) and `pmf.csv` with `tau,k,empirical,poisson`.
/// The row `k = k_max + 1` holds the lumped tail mass.
pub fn experiment(config: &RunConfig, out: &Path, exec: &dyn Executor) -> Result<(), CliError> {
    let e = config.experiment_section()?;
    let domain = config.domain()?;
    let diffusion = config.diffusion()?;
    let measure = config.measure()?;
    let mode = match e.mode {
        ModeConfig::Thinning => TrialMode::Thinning,
        ModeConfig::Sde => TrialMode::Sde {
            diffusion,
            dt: e.dt,
            bridge: e.bridge,
        },
    };
    let settings = ExperimentSettings {
        scheme: e.scheme.into(),
        mode,
        trials: e.trials,
        seed: config.seed,
        max_particles: e.max_particles,
    };
    let experiment = Experiment::new(
        &domain,
        &diffusion,
        &measure,
        config.modes,
        config.certificate_cap,
        settings,
    )?;
    let model = experiment.model();
    let growth_base = measure.total(&domain)?;
    for &tau in &e.taus {
        if e.mode == ModeConfig::Thinning && tau < model.t_min() {
            return Err(CoreError::Uncertified {
                t: tau,
                t_min: model.t_min(),
                bound: model.truncation_bound(tau),
            }
            .into());
        }
        let requested = (0.5 * tau * experiment.principal().lambda1()).exp() * growth_base;
        if !(requested <= e.max_particles as f64) {
            return Err(CliError::Config(format!(
                "tau = {tau} needs {requested:.0} particles, above max_particles = {}",
                e.max_particles
            )));
        }
    }
    let reports = convergence_sweep(&experiment, &e.taus, exec)?;
    let mut pmf = String::from("tau,k,empirical,poisson\n");
    for r in &reports {
        for (k, (emp, poi)) in r.empirical.iter().zip(&r.poisson).enumerate() {
            writeln!(pmf, "{},{},{},{}", num(r.tau), k, num(*emp), num(*poi)).unwrap();
        }
        writeln!(
            pmf,
            "{},{},{},{}",
            num(r.tau),
            r.k_max + 1,
            num(r.empirical_tail),
            num(r.poisson_tail)
        ).unwrap();
    }
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    prepare_out(out, config)?;
    write_file(out, "report.json", &json)?;
    write_file(out, "pmf.csv", &pmf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, 0.1, 2.5e-110, 123456.789, 1e20, -3.25e-7] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.5e-9), "1.5e-9");
        assert_eq!(num(0.25), "0.25");
    }
}
