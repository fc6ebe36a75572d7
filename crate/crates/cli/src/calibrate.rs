use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use rofsim::link::{run_default, Scenario};
use rofsim::Error;
use serde::{Deserialize, Serialize};

use crate::{load_scenario, read_json, thread_pool, write_json, Exit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FreeParameter {
    /// Dotted scenario path.
    pub path: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    DownlinkEvm,
    UplinkEvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub observable: Observable,
    pub of1_length_km: f64,
    pub value_percent: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub free_parameters: Vec<FreeParameter>,
    pub targets: Vec<Target>,
    /// Fixed seeds averaged at every evaluation.
    pub seeds: Vec<u64>,
    pub symbols_per_evaluation: usize,
    pub max_evaluations: usize,
    /// Residual RMS at which the search stops (and below which the
    /// starting point is accepted as is).
    pub tolerance: f64,
    /// Residual RMS above which the fit counts as failed.
    pub max_residual_rms: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        let target = |observable, of1_length_km, value_percent| Target {
            observable,
            of1_length_km,
            value_percent,
            weight: 1.0,
        };
        Self {
            free_parameters: vec![
                FreeParameter {
                    path: "receiver.noise_floor_dbm_hz".into(),
                    lower: -160.0,
                    upper: -110.0,
                },
                FreeParameter {
                    path: "vcsel.injection_penalty_db_per_db".into(),
                    lower: 0.0,
                    upper: 10.0,
                },
                FreeParameter {
                    path: "vcsel.detector_responsivity_a_w".into(),
                    lower: 0.05,
                    upper: 1.2,
                },
            ],
            targets: vec![
                target(Observable::DownlinkEvm, 0.0, 3.2),
                target(Observable::UplinkEvm, 0.0, 4.3),
                target(Observable::UplinkEvm, 5.0, 8.0),
            ],
            seeds: vec![1, 2],
            symbols_per_evaluation: 20_000,
            max_evaluations: 200,
            tolerance: 0.01,
            max_residual_rms: 0.10,
        }
    }
}

impl CalibrationSpec {
    pub fn validate(&self, base: &Scenario) -> rofsim::Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.free_parameters.is_empty() {
            return bad("nothing to fit: no free parameters".into());
        }
        if self.targets.is_empty() {
            return bad("no calibration targets".into());
        }
        if self.seeds.is_empty() {
            return bad("calibration needs at least one seed".into());
        }
        if self.max_evaluations == 0 {
            return bad("max_evaluations must be positive".into());
        }
        for p in &self.free_parameters {
            if !(p.lower < p.upper) {
                return bad(format!("{}: lower bound must be below upper bound", p.path));
            }
            if !base.get(&p.path)?.is_f64() {
                return bad(format!("{} is not a real-valued parameter", p.path));
            }
        }
        for t in &self.targets {
            if !(t.value_percent > 0.0 && t.weight > 0.0 && t.of1_length_km >= 0.0) {
                return bad(
                    "targets need positive values and weights and non-negative lengths".into(),
                );
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> rofsim::Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterFit {
    pub path: String,
    pub initial: f64,
    pub fitted: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub observable: Observable,
    pub of1_length_km: f64,
    pub target_percent: f64,
    pub achieved_percent: f64,
    pub relative_error: f64,
    pub weight: f64,
}

/// Contents of `calibration.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationOutcome {
    pub converged: bool,
    pub evaluations: usize,
    pub residual_rms: f64,
    pub parameters: Vec<ParameterFit>,
    pub residuals: Vec<Residual>,
    pub fitted: Scenario,
}

struct Objective<'a> {
    base: &'a Scenario,
    spec: &'a CalibrationSpec,
    lengths: Vec<f64>,
    cache: HashMap<Vec<u64>, Option<Vec<Residual>>>,
    evaluations: usize,
}

impl Objective<'_> {
    fn scenario(&self, x: &[f64]) -> rofsim::Result<Scenario> {
        let mut s = self.base.clone();
        for (p, &v) in self.spec.free_parameters.iter().zip(x) {
            s = s.with_number(&p.path, v)?;
        }
        s.symbols = self.spec.symbols_per_evaluation;
        Ok(s)
    }

    /// Residuals at `x`; `None` when some run fails (e.g. lock loss).
    fn residuals(&mut self, x: &[f64]) -> Option<Vec<Residual>> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        self.evaluations += 1;
        let result = self.evaluate(x);
        self.cache.insert(key, result.clone());
        result
    }

    fn evaluate(&self, x: &[f64]) -> Option<Vec<Residual>> {
        let s = self.scenario(x).ok()?;
        let jobs: Vec<(f64, u64)> = self
            .lengths
            .iter()
            .flat_map(|&l| self.spec.seeds.iter().map(move |&seed| (l, seed)))
            .collect();
        let runs: Vec<Option<(f64, f64, f64)>> = jobs
            .par_iter()
            .map(|&(l, seed)| {
                let mut point = s.with_number("of1.length_km", l).ok()?;
                point.seed = seed;
                let r = run_default::<f64>(&point).ok()?;
                Some((
                    l,
                    r.downlink_evm.evm_rms_percent,
                    r.uplink_evm.evm_rms_percent,
                ))
            })
            .collect();
        let runs: Vec<(f64, f64, f64)> = runs.into_iter().collect::<Option<_>>()?;
        let mut means: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
        for (l, d, u) in runs {
            let e = means.entry(l.to_bits()).or_insert((0.0, 0.0, 0));
            e.0 += d;
            e.1 += u;
            e.2 += 1;
        }
        Some(
            self.spec
                .targets
                .iter()
                .map(|t| {
                    let (d, u, n) = means[&t.of1_length_km.to_bits()];
                    let achieved = match t.observable {
                        Observable::DownlinkEvm => d,
                        Observable::UplinkEvm => u,
                    } / n as f64;
                    Residual {
                        observable: t.observable,
                        of1_length_km: t.of1_length_km,
                        target_percent: t.value_percent,
                        achieved_percent: achieved,
                        relative_error: (achieved - t.value_percent) / t.value_percent,
                        weight: t.weight,
                    }
                })
                .collect(),
        )
    }

    fn rms(&mut self, x: &[f64]) -> f64 {
        self.residuals(x)
            .map_or(f64::INFINITY, |r| residual_rms(&r))
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.spec.max_evaluations
    }
}

/// Weighted RMS of the relative target errors.
fn residual_rms(r: &[Residual]) -> f64 {
    let w: f64 = r.iter().map(|x| x.weight).sum();
    (r.iter()
        .map(|x| x.weight * x.relative_error.powi(2))
        .sum::<f64>()
        / w)
        .sqrt()
}

/// Solves the small dense system `a·x = b` by Gaussian elimination with
/// partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (t, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *t -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn weighted(r: &[Residual]) -> Vec<f64> {
    r.iter()
        .map(|x| x.weight.sqrt() * x.relative_error)
        .collect()
}

/// Bounded Levenberg-Marquardt on the weighted relative residuals, with
/// forward-difference Jacobians. Steps are clamped to the box.
fn levenberg_marquardt(
    obj: &mut Objective,
    mut x: Vec<f64>,
    bounds: &[(f64, f64)],
) -> (Vec<f64>, f64) {
    let n = x.len();
    let spans: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let Some(mut r) = obj.residuals(&x).map(|r| weighted(&r)) else {
        return (x, f64::INFINITY);
    };
    let mut fx = obj.rms(&x);
    let mut lambda = 1e-2;
    while fx > obj.spec.tolerance && !obj.exhausted() {
        let mut jac = vec![vec![0.0; n]; r.len()];
        for i in 0..n {
            let (lo, hi) = bounds[i];
            let mut h = 1e-4 * spans[i];
            if x[i] + h > hi {
                h = -h;
            }
            let mut y = x.clone();
            y[i] = (x[i] + h).clamp(lo, hi);
            let Some(ry) = obj.residuals(&y).map(|r| weighted(&r)) else {
                return (x, fx);
            };
            for (row, (a, b)) in jac.iter_mut().zip(ry.iter().zip(&r)) {
                row[i] = (a - b) / h;
            }
        }
        let jtj: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| jac.iter().map(|row| row[i] * row[k]).sum())
                    .collect()
            })
            .collect();
        let jtr: Vec<f64> = (0..n)
            .map(|i| -jac.iter().zip(&r).map(|(row, e)| row[i] * e).sum::<f64>())
            .collect();
        let mut improved = false;
        while !obj.exhausted() && lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve(a, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let y: Vec<f64> = (0..n)
                .map(|i| (x[i] + step[i]).clamp(bounds[i].0, bounds[i].1))
                .collect();
            if y == x {
                break;
            }
            let fy = obj.rms(&y);
            if fy < fx {
                r = obj.residuals(&y).map(|r| weighted(&r)).unwrap_or_default();
                x = y;
                fx = fy;
                lambda = (lambda / 3.0).max(1e-9);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

/// Fits the free parameters of `base` to the targets by bounded
/// Levenberg-Marquardt, starting from the scenario's own values.
pub fn calibrate(
    base: &Scenario,
    spec: &CalibrationSpec,
    threads: Option<usize>,
) -> rofsim::Result<CalibrationOutcome> {
    spec.validate(base)?;
    let mut lengths: Vec<f64> = spec.targets.iter().map(|t| t.of1_length_km).collect();
    lengths.sort_by(f64::total_cmp);
    lengths.dedup();
    let mut obj = Objective {
        base,
        spec,
        lengths,
        cache: HashMap::new(),
        evaluations: 0,
    };
    let bounds: Vec<(f64, f64)> = spec
        .free_parameters
        .iter()
        .map(|p| (p.lower, p.upper))
        .collect();
    let initial: Vec<f64> = spec
        .free_parameters
        .iter()
        .zip(&bounds)
        .map(|(p, &(lo, hi))| {
            base.get(&p.path)
                .ok()
                .and_then(|v| v.as_f64())
                .unwrap_or(lo)
                .clamp(lo, hi)
        })
        .collect();

    let pool = thread_pool(threads)?;
    let (x, fx) = pool.install(|| levenberg_marquardt(&mut obj, initial.clone(), &bounds));

    let residuals = obj.residuals(&x).unwrap_or_default();
    let fitted = obj.scenario(&x)?;
    let fitted = Scenario {
        symbols: base.symbols,
        ..fitted
    };
    Ok(CalibrationOutcome {
        converged: fx <= spec.max_residual_rms,
        evaluations: obj.evaluations,
        residual_rms: fx,
        parameters: spec
            .free_parameters
            .iter()
            .enumerate()
            .map(|(i, p)| ParameterFit {
                path: p.path.clone(),
                initial: initial[i],
                fitted: x[i],
                lower: p.lower,
                upper: p.upper,
            })
            .collect(),
        residuals,
        fitted,
    })
}

/// Writes `fitted.json` (full scenario) and `calibration.json`. Exit 3
/// when the residual RMS stays above the spec's limit.
pub fn cmd_calibrate(
    config: Option<&Path>,
    spec: &CalibrationSpec,
    out: &Path,
    threads: Option<usize>,
) -> rofsim::Result<(Exit, CalibrationOutcome)> {
    let base = load_scenario(config)?;
    let outcome = calibrate(&base, spec, threads)?;
    std::fs::create_dir_all(out)?;
    crate::write_text(&out.join("fitted.json"), &outcome.fitted.to_json_pretty())?;
    write_json(&out.join("calibration.json"), &outcome)?;
    let exit = if outcome.converged {
        Exit::Success
    } else {
        Exit::NotConverged
    };
    Ok((exit, outcome))
}
