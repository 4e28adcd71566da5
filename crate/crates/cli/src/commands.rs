use serde_json::{json, Value};
use smallball::asymptotics::dmz_estimate;
use smallball::gamma_class::{
    build_self_neglect_repr, estimate_aux, gamma_membership_check, reconstruct_spectrum,
    self_neglect_check, GammaCheckReport, SmoothDensity,
};
use smallball::inversion::{eval_rho, invert_mu};
use smallball::kernel_stats::kernel_expectation_grid;
use smallball::oracle::{cf_inversion_cdf, mc_plain_batch, mc_tilted_batch, McConfig};
use smallball::series::{self, SeriesValue};
use smallball::{EigenSpectrum, Family, Method, TailModel};

use crate::config::{decreasing_grid, grid, powers_of_ten, ExperimentConfig, OracleParams};
use crate::output::{Cell, Table};
use crate::{CliError, Command};

pub struct Outcome {
    pub table: Table,
    pub summary: Value,
}

fn c<E: Into<smallball::Error>>(e: E) -> CliError {
    CliError::Compute(e.into())
}

pub fn run(cmd: &Command, cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Mu => series_table(cfg, series::eval_mu),
        Command::Psi => series_table(cfg, series::eval_psi),
        Command::I => series_table(cfg, series::eval_i),
        Command::Invert => invert(cfg),
        Command::Rho => rho(cfg),
        Command::Estimate => estimate(cfg),
        Command::Oracle => oracle(cfg),
        Command::GammaCheck => gamma_check(cfg),
        Command::SelfNeglect => self_neglect(cfg),
        Command::AuxEstimate => aux_estimate(cfg),
        Command::Reconstruct => reconstruct(cfg),
        Command::Repr2 => repr2(cfg),
        Command::Kernel => kernel(cfg),
    }
}

type SeriesFn =
    fn(&EigenSpectrum, f64, &smallball::TruncationPolicy) -> smallball::Result<SeriesValue>;

fn series_table(cfg: &mut ExperimentConfig, f: SeriesFn) -> Result<Outcome, CliError> {
    let s = cfg.spectrum()?;
    let policy = cfg.policy()?;
    let thetas = grid(&mut cfg.theta_grid, "theta_grid", powers_of_ten(4, -2))?;
    if thetas.iter().any(|t| *t < 0.0) {
        return Err(CliError::Config("theta_grid must be non-negative".into()));
    }
    let mut t = Table::new(&["theta", "value", "log_value", "tail_error", "terms_used"]);
    let mut worst: f64 = 0.0;
    for &theta in &thetas {
        let v = f(&s, theta, &policy).map_err(c)?;
        worst = worst.max(v.tail_error);
        t.push(vec![
            theta.into(),
            v.value.into(),
            v.value.ln().into(),
            v.tail_error.into(),
            v.terms_used.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "points": thetas.len(), "max_tail_error": worst }),
    })
}

fn invert(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.spectrum()?;
    let tol = cfg.tolerance()?;
    let eps = grid(&mut cfg.epsilon_grid, "epsilon_grid", powers_of_ten(-1, -4))?;
    let mut t = Table::new(&["epsilon", "theta", "residual", "iterations"]);
    for &e in &eps {
        let sol = invert_mu(&s, e, tol).map_err(c)?;
        t.push(vec![
            e.into(),
            sol.theta.into(),
            sol.residual.into(),
            sol.iterations.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "points": eps.len() }),
    })
}

fn rho(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.spectrum()?;
    let xs = grid(&mut cfg.s_grid, "s_grid", powers_of_ten(-1, -6))?;
    let mut t = Table::new(&["s", "rho", "log_rho", "theta"]);
    for &x in &xs {
        let r = eval_rho(&s, x).map_err(c)?;
        t.push(vec![x.into(), r.into(), r.ln().into(), (1.0 / r).into()]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "points": xs.len() }),
    })
}

fn estimate(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.spectrum()?;
    let tol = cfg.tolerance()?;
    let eps = grid(&mut cfg.epsilon_grid, "epsilon_grid", powers_of_ten(-1, -4))?;
    let mut t = Table::new(&["epsilon", "theta", "i_value", "psi", "value", "log_value"]);
    for &e in &eps {
        let r = dmz_estimate(&s, e, tol).map_err(c)?;
        t.push(vec![
            e.into(),
            r.theta.into(),
            r.i_value.into(),
            r.psi_value.into(),
            r.value.into(),
            r.log_value.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "points": eps.len() }),
    })
}

fn oracle(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.spectrum()?;
    let eps = grid(&mut cfg.epsilon_grid, "epsilon_grid", vec![0.3, 0.5, 0.8])?;
    let params = cfg
        .oracle
        .get_or_insert(OracleParams {
            method: Method::McTilted,
            terms: 1000,
            samples: 100_000,
        })
        .clone();
    if params.terms == 0 {
        return Err(CliError::Config("oracle.terms must be positive".into()));
    }
    let estimates = match params.method {
        Method::CfInversion => {
            let tol = cfg.quad_tolerance()?;
            eps.iter()
                .map(|&e| cf_inversion_cdf(&s, e, params.terms, tol))
                .collect::<smallball::Result<Vec<_>>>()
                .map_err(c)?
        }
        m => {
            if params.samples == 0 {
                return Err(CliError::Config("oracle.samples must be positive".into()));
            }
            let mc = McConfig::new(params.terms, params.samples, cfg.seed()?);
            if m == Method::McTilted {
                mc_tilted_batch(&s, &eps, &mc).map_err(c)?
            } else {
                mc_plain_batch(&s, &eps, &mc).map_err(c)?
            }
        }
    };
    let mut t = Table::new(&[
        "epsilon",
        "method",
        "estimate",
        "log_estimate",
        "std_error",
        "rel_std_error",
        "bracket_lo",
        "bracket_hi",
        "terms",
        "samples",
        "seed",
        "tilt",
    ]);
    for e in &estimates {
        let (lo, hi) = e.bracket.map_or((f64::NAN, f64::NAN), |b| (b.lo, b.hi));
        t.push(vec![
            e.epsilon.into(),
            e.method.as_str().into(),
            e.estimate.into(),
            e.log_estimate.into(),
            e.std_error.into(),
            e.rel_std_error.into(),
            lo.into(),
            hi.into(),
            e.terms.into(),
            e.samples.into(),
            e.seed.into(),
            e.tilt.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "method": params.method.as_str(), "points": eps.len() }),
    })
}

fn check_table(r: &GammaCheckReport) -> Outcome {
    let mut t = Table::new(&["s", "x", "ratio", "target", "rel_error"]);
    for (i, &s) in r.s_grid.iter().enumerate() {
        for (j, &x) in r.x_grid.iter().enumerate() {
            let ratio = r.ratios[i][j];
            let target = r.targets[j];
            t.push(vec![
                s.into(),
                x.into(),
                ratio.into(),
                target.into(),
                (ratio / target - 1.0).abs().into(),
            ]);
        }
    }
    Outcome {
        table: t,
        summary: json!({
            "verdict": r.verdict,
            "threshold": r.threshold,
            "max_rel_error": r.max_rel_error,
        }),
    }
}

fn gamma_check(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let rho = cfg.rho()?;
    let f = cfg.function()?;
    let ss = decreasing_grid(&mut cfg.s_grid, "s_grid", powers_of_ten(-2, -4))?;
    let xs = grid(&mut cfg.x_grid, "x_grid", vec![-1.0, 1.0, 2.0])?;
    let r = gamma_membership_check(|s| f(s), &rho, &ss, &xs).map_err(c)?;
    Ok(check_table(&r))
}

fn self_neglect(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let rho = cfg.rho()?;
    let ss = decreasing_grid(&mut cfg.s_grid, "s_grid", powers_of_ten(-2, -4))?;
    let xs = grid(&mut cfg.x_grid, "x_grid", vec![-1.0, 1.0, 2.0])?;
    let r = self_neglect_check(&rho, &ss, &xs).map_err(c)?;
    Ok(check_table(&r))
}

fn aux_estimate(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let f = cfg.function()?;
    let tol = cfg.quad_tolerance()?;
    let ss = grid(&mut cfg.s_grid, "s_grid", powers_of_ten(-1, -4))?;
    let mut t = Table::new(&["s", "aux", "log_aux", "aux_over_s"]);
    for &s in &ss {
        let v = estimate_aux(|x| f(x), s, tol).map_err(c)?;
        t.push(vec![s.into(), v.into(), v.ln().into(), (v / s).into()]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "points": ss.len() }),
    })
}

fn reconstruct(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let rho = cfg.rho()?;
    let k = *cfg.constant.get_or_insert(1.0);
    let i_max = *cfg.i_max.get_or_insert(1000);
    let s = reconstruct_spectrum(&rho, k, i_max).map_err(c)?;
    let tail = match s.family() {
        Family::Explicit {
            tail: TailModel::Power { exponent },
            ..
        } => *exponent,
        _ => f64::NAN,
    };
    let mut t = Table::new(&["i", "a_sq", "a"]);
    for i in 1..=i_max {
        let a2 = s.a_sq(i).unwrap_or(f64::NAN);
        t.push(vec![i.into(), a2.into(), a2.sqrt().into()]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "tail_exponent": tail, "listed": i_max }),
    })
}

fn repr2(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let rho = cfg.rho()?;
    let phi = cfg.phi()?;
    let x0 = *cfg.x0.get_or_insert(0.5);
    let n_max = *cfg.n_max.get_or_insert(200);
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(CliError::Config(format!("x0 must lie in (0, 1), got {x0}")));
    }
    let r = build_self_neglect_repr(
        |x| Ok(phi.coefficient * x.powf(phi.exponent)),
        &rho,
        x0,
        &SmoothDensity::bump(),
        n_max,
    )
    .map_err(c)?;
    let mut t = Table::new(&[
        "n",
        "x",
        "log_phi",
        "log_reconstruction",
        "coefficient",
        "epsilon_max",
    ]);
    for (n, &x) in r.grid_points.iter().enumerate() {
        let (k, e) = match (r.coefficients.get(n), r.epsilon_values.get(n)) {
            (Some(&k), Some(&e)) => (k, e),
            _ => (f64::NAN, f64::NAN),
        };
        t.push(vec![
            n.into(),
            x.into(),
            r.log_phi[n].into(),
            r.log_reconstruction[n].into(),
            Cell::Num(k),
            Cell::Num(e),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({
            "identity_error": r.identity_error(),
            "c_value": r.c_value,
            "initial_coefficient": r.initial_coefficient,
            "rho_self_neglecting": r.rho_self_neglecting,
            "density": r.density,
        }),
    })
}

fn kernel(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let k = cfg.kernel()?;
    let f = cfg.function()?;
    let tol = cfg.quad_tolerance()?;
    let hs = grid(&mut cfg.h_grid, "h_grid", powers_of_ten(-1, -3))?;
    if hs.iter().any(|h| *h <= 0.0) {
        return Err(CliError::Config("h_grid must be positive".into()));
    }
    let rows = kernel_expectation_grid(|h| f(h), &k, &hs, tol).map_err(c)?;
    let mut t = Table::new(&["h", "expectation", "log_expectation", "ratio_to_k1f"]);
    for r in &rows {
        t.push(vec![
            r.h.into(),
            r.value.into(),
            r.log_value.into(),
            r.ratio_to_leading(&k).into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        summary: json!({ "kernel_at_one": k.at_one(), "points": hs.len() }),
    })
}
