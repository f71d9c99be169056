use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use snakelab::bounds::{
    exit_time_laplace, exit_time_monte_carlo, keller_check, lemma_constants, radii_theta, sn_sequence,
    subordinator_series,
};
use snakelab::mechanism::{exponents, ExponentGrid, Gauge, GaugeFunction};
use snakelab::packing::{box_dimension, log_grid, packing_report};
use snakelab::rng::seed_stream;
use snakelab::spine_palm::{graft, palm_mass_profile, sample_spine};
use snakelab::trees_snakes::{occupation_and_range, sample_height_excursion, sample_snake};

use crate::config::{Issue, Params, Validated};
use crate::output::{csv_bytes, num, FileDigest, Outputs, SCHEMA_VERSION};

#[derive(Debug)]
pub struct RunError(pub String);

impl<E: std::error::Error> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError(e.to_string())
    }
}

type Run<T> = std::result::Result<T, RunError>;

#[derive(Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub config: Validated,
    pub wall_clock_seconds: f64,
    pub versions: serde_json::Value,
    /// Replica k draws from seed_stream(master, k).
    pub replica_seeds: Vec<(u64, u64)>,
    pub warnings: Vec<Issue>,
    pub outputs: Vec<FileDigest>,
}

pub fn run(cfg: &Validated) -> Run<RunManifest> {
    let start = Instant::now();
    let mut out = Outputs::default();
    match &cfg.params {
        Params::GaugeTable(p) => gauge_table(cfg, p, &mut out)?,
        Params::Exponents(p) => {
            let rep = exponents(&cfg.mechanism, &ExponentGrid { lam_min: p.lam_min, lam_max: p.lam_max })?;
            out.json("exponents.json", &rep)?;
        }
        Params::PackingDims(p) => packing_dims(cfg, p, &mut out)?,
        Params::SnakeSample(p) => snake_sample(cfg, p, &mut out)?,
        Params::PalmDensity(p) => palm_density(cfg, p, &mut out)?,
        Params::Keller(p) => {
            let rows = p
                .r_list
                .iter()
                .map(|&r| keller_check(&cfg.mechanism, cfg.d, r))
                .collect::<snakelab::Result<Vec<_>>>()?;
            out.json("keller.json", &rows)?;
        }
        Params::BoundsSeries(p) => bounds_series(cfg, p, &mut out)?,
        Params::ExitTime(p) => {
            let mut rep = exit_time_laplace(cfg.d, p.r, p.lam)?;
            if p.monte_carlo {
                let mut rng = seed_stream(cfg.seed.unwrap(), 0);
                rep.monte_carlo = Some(exit_time_monte_carlo(cfg.d, p.r, p.lam, p.dt, cfg.replicas.max(2), &mut rng)?);
            }
            out.json("exit_time.json", &rep)?;
        }
    }
    let replica_seeds = match cfg.seed {
        Some(s) if cfg.is_stochastic() => (0..cfg.replicas as u64).map(|k| (s, k)).collect(),
        _ => Vec::new(),
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment.name(),
        config: cfg.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        versions: json!({ "snakelab": env!("CARGO_PKG_VERSION") }),
        replica_seeds,
        warnings: cfg.warnings.clone(),
        outputs: out.digests(),
    };
    out.commit(&cfg.out, &manifest)?;
    Ok(manifest)
}

fn gauge_table(cfg: &Validated, p: &crate::config::GaugeTableParams, out: &mut Outputs) -> Run<()> {
    let g = GaugeFunction::g(cfg.mechanism.clone());
    let k = GaugeFunction::k(cfg.mechanism.clone());
    let rows = log_grid(p.r_min, p.r_max, p.per_decade).into_iter().filter(|&r| r < g.domain_bound()).map(|r| {
        let cell = |v: snakelab::Result<f64>| v.map(num).unwrap_or_default();
        vec![num(r), cell(g.eval(r)), cell(k.eval(r)), cell(g.doubling_ratio(r))]
    });
    out.add("gauge_table.csv", csv_bytes(&["r", "g", "k", "doubling_ratio"], rows)?);
    Ok(())
}

fn packing_dims(cfg: &Validated, p: &crate::config::PackingDimsParams, out: &mut Outputs) -> Run<()> {
    let seed = cfg.seed.unwrap();
    let gauge = GaugeFunction::g(cfg.mechanism.clone());
    let reps = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed_stream(seed, k);
            let exc = sample_height_excursion(&cfg.mechanism, p.n_target, &mut rng, None)?;
            let snake = sample_snake(&exc, &vec![0.0; cfg.d], &mut rng)?;
            let occ = occupation_and_range(&snake);
            let boxes = box_dimension(&occ.cloud, p.per_decade)?;
            let packing = if p.packing_eps.is_empty() {
                None
            } else {
                Some(packing_report(&occ.cloud, &p.packing_eps, &gauge, "g", seed ^ k, (0.0, f64::INFINITY))?)
            };
            Ok((occ.cloud.len(), exc.sigma, boxes, packing))
        })
        .collect::<snakelab::Result<Vec<_>>>()?;
    let rows = reps
        .iter()
        .enumerate()
        .flat_map(|(k, r)| r.2.rows.iter().map(move |&(s, c)| vec![k.to_string(), num(s), c.to_string()]));
    out.add("box_counts.csv", csv_bytes(&["replica", "side", "count"], rows)?);
    let mut slopes: Vec<f64> = reps.iter().map(|r| r.2.regression.slope).collect();
    slopes.sort_by(f64::total_cmp);
    let median = if slopes.len() % 2 == 1 {
        slopes[slopes.len() / 2]
    } else {
        0.5 * (slopes[slopes.len() / 2 - 1] + slopes[slopes.len() / 2])
    };
    let per_replica: Vec<_> = reps
        .iter()
        .map(|r| json!({ "points": r.0, "sigma": r.1, "box_dimension": r.2.regression, "packing": r.3 }))
        .collect();
    out.json("packing_dims.json", &json!({ "median_box_slope": median, "replicas": per_replica }))?;
    Ok(())
}

fn snake_sample(cfg: &Validated, p: &crate::config::SnakeSampleParams, out: &mut Outputs) -> Run<()> {
    let seed = cfg.seed.unwrap();
    let reps = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed_stream(seed, k);
            let exc = sample_height_excursion(&cfg.mechanism, p.n_target, &mut rng, p.sigma_floor)?;
            let snake = sample_snake(&exc, &vec![0.0; cfg.d], &mut rng)?;
            let occ = occupation_and_range(&snake);
            let mut e = Vec::new();
            exc.write_csv(&mut e)?;
            let mut c = Vec::new();
            occ.cloud.write_csv(&mut c)?;
            Ok((
                e,
                c,
                json!({ "replica": k, "sigma": exc.sigma, "points": occ.cloud.len(), "provenance": exc.provenance }),
            ))
        })
        .collect::<snakelab::Result<Vec<_>>>()?;
    let mut sidecar = Vec::new();
    for (k, (e, c, meta)) in reps.into_iter().enumerate() {
        out.add(format!("excursion_{k}.csv"), e);
        out.add(format!("cloud_{k}.csv"), c);
        sidecar.push(meta);
    }
    out.json("provenance.json", &sidecar)?;
    Ok(())
}

fn palm_density(cfg: &Validated, p: &crate::config::PalmDensityParams, out: &mut Outputs) -> Run<()> {
    let seed = cfg.seed.unwrap();
    let grid = log_grid(p.r_min, p.r_max, p.per_decade);
    let reps = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed_stream(seed, k);
            let spine = sample_spine(&cfg.mechanism, cfg.d, p.a, p.grid_step, &mut rng)?;
            let forest = graft(&spine, p.eps_trunc, p.n_vertices, &mut rng)?;
            Ok((palm_mass_profile(&forest, &grid)?, forest.summary()))
        })
        .collect::<snakelab::Result<Vec<_>>>()?;
    let rows = reps.iter().enumerate().flat_map(|(k, (prof, _))| {
        (0..prof.r.len()).map(move |i| {
            vec![k.to_string(), num(prof.r[i]), num(prof.mass[i]), prof.ratio[i].map(num).unwrap_or_default()]
        })
    });
    out.add("palm_profile.csv", csv_bytes(&["replica", "r", "mass", "ratio"], rows)?);
    let forests: Vec<_> = reps.iter().map(|(_, s)| s).collect();
    out.json("forests.json", &forests)?;
    Ok(())
}

fn bounds_series(cfg: &Validated, p: &crate::config::BoundsSeriesParams, out: &mut Outputs) -> Run<()> {
    let mech = &cfg.mechanism;
    let d = cfg.d;
    let constants = lemma_constants(mech, d, p.varrho, None)?;
    let g = exponents(mech, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 })?.gamma_lower;
    let (lo, hi) = (2.0 / (d as f64 - 2.0), g - 1.0);
    let c = p.c.unwrap_or(0.5 * (lo + hi));
    let ln_thetas: Vec<f64> = (1..=p.theta_n_max).map(|n| (n * n) as f64).collect();
    let radii = radii_theta(mech, d, c, constants.c2.value, &ln_thetas, p.ladder_n_max)?;
    let series = subordinator_series(mech, &radii.rho, p.threshold, p.ladder_n_max as usize, p.tail_from)?;
    let top = 2.0 * g / (g - 1.0);
    let sn = sn_sequence(mech, p.sn_u.unwrap_or(0.5 * top), p.sn_n_max, p.threshold)?;
    let ladder = RadiiSummary {
        c: radii.c,
        c2: radii.c2,
        admissible: radii.admissible,
        rows: &radii.rows,
        rungs: radii.rho.len(),
    };
    out.json("bounds.json", &json!({ "constants": constants, "radii": ladder, "series": series, "sn": sn }))?;
    Ok(())
}

#[derive(Serialize)]
struct RadiiSummary<'a> {
    c: f64,
    c2: f64,
    admissible: (f64, f64),
    rows: &'a [snakelab::bounds::ThetaRow],
    rungs: usize,
}
