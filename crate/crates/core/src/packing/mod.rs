//! Estimators from geometric measure theory on weighted point clouds: greedy
//! gauge packings, dyadic box counts, dimension regression, local densities
//! and the density/packing comparison.

pub(crate) mod cloud;
mod dyadic;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::mechanism::Gauge;
use crate::rng::seed_stream;
pub use cloud::PointCloud;
use cloud::{dist2, GridIndex};
pub use dyadic::{dyadic_level, dyadic_locate, dyadic_p, DyadicCube};

const BRUTE_FORCE_BELOW: usize = 2000;
pub const GREEDY_RESTARTS: u64 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub eps: f64,
    pub count: usize,
    /// count·g(eps), a lower bound for the ε-packing pre-measure.
    pub sum: f64,
    /// Indices of the centres in the cloud.
    pub centers: Vec<usize>,
}

fn lexicographic(cloud: &PointCloud) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    idx.sort_by(|&a, &b| {
        cloud
            .point(a)
            .iter()
            .zip(cloud.point(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

fn greedy_in_order(cloud: &PointCloud, eps: f64, order: &[usize]) -> Vec<usize> {
    let sep2 = 4.0 * eps * eps;
    let mut centers: Vec<usize> = Vec::new();
    if cloud.len() < BRUTE_FORCE_BELOW {
        for &i in order {
            let p = cloud.point(i);
            if centers.iter().all(|&c| dist2(p, cloud.point(c)) > sep2) {
                centers.push(i);
            }
        }
        return centers;
    }
    let mut index = GridIndex::new(cloud.dim(), 2.0 * eps);
    for &i in order {
        let p = cloud.point(i);
        let mut free = true;
        index.for_each_near(p, |c| {
            free = dist2(p, cloud.point(c)) > sep2;
            free
        });
        if free {
            index.insert(p, i);
            centers.push(i);
        }
    }
    centers
}

/// Greedy ε-packing by closed balls of radius eps centred at cloud points.
/// Restart 0 scans in lexicographic order and the others in shuffles seeded
/// from `seed`; the largest packing is kept.
pub fn greedy_packing(cloud: &PointCloud, eps: f64, gauge: &dyn Gauge, seed: u64, restarts: u64) -> Result<Packing> {
    if !(eps > 0.0 && eps < gauge.domain_bound()) {
        return domain(format!("eps = {eps} outside the gauge domain (0, {})", gauge.domain_bound()));
    }
    let g = gauge.eval(eps)?;
    let base = lexicographic(cloud);
    let best = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut order = base.clone();
            if k > 0 {
                order.shuffle(&mut seed_stream(seed, k));
            }
            greedy_in_order(cloud, eps, &order)
        })
        .reduce(Vec::new, |a, b| if b.len() > a.len() { b } else { a });
    debug_assert!(is_packing(cloud, &best, eps));
    Ok(Packing { eps, count: best.len(), sum: best.len() as f64 * g, centers: best })
}

/// Pairwise centre distances exceed 2·eps.
pub fn is_packing(cloud: &PointCloud, centers: &[usize], eps: f64) -> bool {
    let sep2 = 4.0 * eps * eps;
    centers
        .iter()
        .enumerate()
        .all(|(k, &a)| centers[k + 1..].iter().all(|&b| dist2(cloud.point(a), cloud.point(b)) > sep2))
}

/// Occupied cells of the aligned partition ∏[k2^{−n}, (k+1)2^{−n}) at the
/// level n(eps). Each cell has circumradius below eps, so the count bounds the
/// covering number by open eps-balls from above, and dyadic eps ladders give
/// nested partitions.
pub fn box_count(cloud: &PointCloud, eps: f64) -> usize {
    if cloud.is_empty() {
        return 0;
    }
    let n = dyadic_level(cloud.dim(), eps);
    let s = 2f64.powi(n);
    let mut cells: HashSet<Vec<i64>> = HashSet::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        cells.insert(cloud.point(i).iter().map(|x| (x * s).floor() as i64).collect());
    }
    cells.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionKind {
    /// log(count) against log(1/eps).
    Box,
    /// log(sum) against log(eps).
    Packing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub rows_used: usize,
    pub window: (f64, f64),
}

/// Least-squares slope over the rows with eps in `window`.
pub fn dim_regress(rows: &[(f64, f64)], window: (f64, f64), kind: RegressionKind) -> Result<Regression> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(e, _)| *e >= window.0 && *e <= window.1)
        .map(|&(e, v)| match kind {
            RegressionKind::Box => (-e.ln(), v.ln()),
            RegressionKind::Packing => (e.ln(), v.ln()),
        })
        .collect();
    if pts.len() < 5 {
        return invalid(format!("{} rows in the window, at least 5 needed", pts.len()));
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return invalid("counts and sums must be positive");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return invalid("degenerate window: all eps equal");
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(Regression { slope, intercept, half_width: 2.0 * se, rows_used: pts.len(), window })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingRow {
    pub eps: f64,
    pub count: usize,
    pub sum: f64,
    /// max of the greedy sums at radii ≤ eps: also a lower bound for the
    /// ε-packing pre-measure, and non-increasing as eps decreases.
    pub certified: f64,
    pub box_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingReport {
    pub gauge: String,
    pub rows: Vec<PackingRow>,
    pub box_dimension: Option<Regression>,
    pub packing_scaling: Option<Regression>,
}

/// Greedy packings and box counts over an eps list, with both regressions
/// over `window` when it holds at least five rows.
pub fn packing_report(
    cloud: &PointCloud,
    eps_list: &[f64],
    gauge: &dyn Gauge,
    gauge_id: &str,
    seed: u64,
    window: (f64, f64),
) -> Result<PackingReport> {
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut rows = eps
        .par_iter()
        .map(|&e| {
            let p = greedy_packing(cloud, e, gauge, seed, GREEDY_RESTARTS)?;
            Ok(PackingRow { eps: e, count: p.count, sum: p.sum, certified: p.sum, box_count: box_count(cloud, e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0.0f64;
    for r in rows.iter_mut() {
        best = best.max(r.sum);
        r.certified = best;
    }
    let box_rows: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.box_count as f64)).collect();
    let sum_rows: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.sum)).collect();
    Ok(PackingReport {
        gauge: gauge_id.to_string(),
        box_dimension: dim_regress(&box_rows, window, RegressionKind::Box).ok(),
        packing_scaling: dim_regress(&sum_rows, window, RegressionKind::Packing).ok(),
        rows,
    })
}

/// Occupied cells of the aligned grid of side `side`.
pub fn box_count_side(cloud: &PointCloud, side: f64) -> usize {
    let mut cells: HashSet<Vec<i64>> = HashSet::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        cells.insert(cloud.point(i).iter().map(|x| (x / side).floor() as i64).collect());
    }
    cells.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    /// (side, occupied cells), from the coarsest side down.
    pub rows: Vec<(f64, usize)>,
    pub regression: Regression,
}

/// Box-counting slope over a window fixed by the cloud itself: sides run down
/// from half the largest bounding-box extent, `per_decade` per decade, and stop
/// once the count exceeds a tenth of the number of points, where the count
/// starts to saturate.
pub fn box_dimension(cloud: &PointCloud, per_decade: usize) -> Result<BoxDimension> {
    if cloud.len() < 2 || per_decade == 0 {
        return invalid("box_dimension needs at least two points and per_decade ≥ 1");
    }
    let d = cloud.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..cloud.len() {
        for (j, &x) in cloud.point(i).iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if !(extent > 0.0) {
        return invalid("all points coincide");
    }
    let cap = cloud.len() / 10;
    let step = 10f64.powf(-1.0 / per_decade as f64);
    let mut rows = Vec::new();
    let mut side = 0.5 * extent;
    loop {
        let c = box_count_side(cloud, side);
        if c > cap {
            break;
        }
        rows.push((side, c));
        side *= step;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(s, c)| (s, c as f64)).collect();
    let window = (rows.last().map_or(side, |r| r.0), 0.5 * extent);
    let regression = dim_regress(&pts, window, RegressionKind::Box)?;
    Ok(BoxDimension { rows, regression })
}

/// Log-spaced grid from lo to hi with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Minimum of the ratios over the grid, a proxy for the liminf as r → 0.
    pub min_ratio: f64,
}

/// Closed-ball masses around x divided by g(r) on `r_grid`.
pub fn local_density(cloud: &PointCloud, gauge: &dyn Gauge, x: &[f64], r_grid: &[f64]) -> Result<DensityProfile> {
    if r_grid.is_empty() {
        return invalid("empty radius grid");
    }
    if x.len() != cloud.dim() {
        return invalid("query point has the wrong dimension");
    }
    let mut dw: Vec<(f64, f64)> =
        (0..cloud.len()).map(|i| (dist2(cloud.point(i), x).sqrt(), cloud.weight(i))).collect();
    dw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix = Vec::with_capacity(dw.len() + 1);
    prefix.push(0.0);
    for (_, w) in &dw {
        prefix.push(prefix.last().unwrap() + w);
    }
    let mut mass = Vec::with_capacity(r_grid.len());
    let mut ratio = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let k = dw.partition_point(|(d, _)| *d <= r);
        mass.push(prefix[k]);
        ratio.push(prefix[k] / gauge.eval(r)?);
    }
    let min_ratio = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DensityProfile { r: r_grid.to_vec(), mass, ratio, min_ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub points: usize,
    pub mass: f64,
    /// Mass of the closed eps-neighbourhood of the class.
    pub neighbourhood_mass: f64,
    pub packing_sum: f64,
    /// The one-sided inequality of the class; true when the class is empty.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub kappa: f64,
    pub eps: f64,
    pub doubling_constant: f64,
    /// Points whose grid-minimum ratio exceeds κ; checked against μ(B^eps) ≥ κ·Σg,
    /// B^eps the eps-neighbourhood, which tends to μ(B) as eps → 0.
    pub above: ClassSummary,
    /// Points whose grid-minimum ratio is below κ; checked against μ(B) ≤ κ·C²·Σg.
    pub below: ClassSummary,
}

/// Splits the sample points (cloud indices) by their density ratio against κ
/// and compares each class's mass with κ times its greedy packing sum at
/// `eps`. C is the largest g(2r)/g(r) over `r_grid`.
///
/// A class's mass is the cloud's total mass times the class's share of the
/// sample weight, which is exact when every point is sampled.
pub fn comparison_check(
    cloud: &PointCloud,
    samples: &[usize],
    gauge: &dyn Gauge,
    kappa: f64,
    r_grid: &[f64],
    eps: f64,
    seed: u64,
) -> Result<ComparisonReport> {
    if !(kappa > 0.0) {
        return domain("kappa must be positive");
    }
    let ratios = samples
        .par_iter()
        .map(|&i| Ok(local_density(cloud, gauge, cloud.point(i), r_grid)?.min_ratio))
        .collect::<Result<Vec<f64>>>()?;
    let mut doubling_constant = 1.0f64;
    for &r in r_grid {
        if 2.0 * r < gauge.domain_bound() {
            doubling_constant = doubling_constant.max(gauge.eval(2.0 * r)? / gauge.eval(r)?);
        }
    }
    let sample_mass: f64 = samples.iter().map(|&i| cloud.weight(i)).sum();
    let total = cloud.total_mass();
    let summarize = |idx: Vec<usize>, above: bool| -> Result<ClassSummary> {
        if idx.is_empty() {
            return Ok(ClassSummary {
                points: 0,
                mass: 0.0,
                neighbourhood_mass: 0.0,
                packing_sum: 0.0,
                consistent: true,
            });
        }
        let sub = cloud.subset(&idx);
        let packing_sum = greedy_packing(&sub, eps, gauge, seed, GREEDY_RESTARTS)?.sum;
        let mass = total * sub.total_mass() / sample_mass;
        let neighbourhood_mass = neighbourhood_mass(cloud, &sub, eps);
        let consistent = if above {
            neighbourhood_mass >= kappa * packing_sum
        } else {
            mass <= kappa * doubling_constant * doubling_constant * packing_sum
        };
        Ok(ClassSummary { points: idx.len(), mass, neighbourhood_mass, packing_sum, consistent })
    };
    let hi: Vec<usize> = samples.iter().zip(&ratios).filter(|(_, r)| **r > kappa).map(|(i, _)| *i).collect();
    let lo: Vec<usize> = samples.iter().zip(&ratios).filter(|(_, r)| **r < kappa).map(|(i, _)| *i).collect();
    Ok(ComparisonReport { kappa, eps, doubling_constant, above: summarize(hi, true)?, below: summarize(lo, false)? })
}

/// Mass of the cloud points within distance eps of some point of `set`.
fn neighbourhood_mass(cloud: &PointCloud, set: &PointCloud, eps: f64) -> f64 {
    let e2 = eps * eps;
    let mut index = GridIndex::new(set.dim(), eps);
    for j in 0..set.len() {
        index.insert(set.point(j), j);
    }
    (0..cloud.len())
        .filter(|&i| {
            let p = cloud.point(i);
            let mut hit = false;
            index.for_each_near(p, |j| {
                hit = dist2(p, set.point(j)) <= e2;
                !hit
            });
            hit
        })
        .map(|i| cloud.weight(i))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_dimension_of_uniform_square() {
        let mut rng = seed_stream(90, 0);
        let pts: Vec<f64> = (0..200_000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let c = PointCloud::with_total_mass(2, pts, 1.0).unwrap();
        let b = box_dimension(&c, 10).unwrap();
        assert!(b.rows.iter().all(|r| r.1 <= 10_000));
        assert!((b.regression.slope - 2.0).abs() < 0.15, "{:?}", b.regression);
        assert_eq!(box_count_side(&c, 2.0), 1);
        assert!(box_dimension(&PointCloud::with_total_mass(1, vec![0.5; 4], 1.0).unwrap(), 10).is_err());
    }
    use crate::mechanism::{BranchingMechanism, GaugeFunction, PowerGauge};
    use proptest::prelude::*;
    use rand::Rng;

    fn line(n: usize, h: f64) -> PointCloud {
        PointCloud::with_total_mass(1, (0..n).map(|i| i as f64 * h).collect(), 1.0).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let g = GaugeFunction::g(BranchingMechanism::quadratic(1.0));
        let tri = PointCloud::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
        let p = greedy_packing(&tri, 0.01, &g, 1, 8).unwrap();
        assert_eq!(p.count, 3);
        assert!((p.sum - 3.0 * g.eval(0.01).unwrap()).abs() < 1e-300);
        let twin = PointCloud::from_points(&[vec![0.2, 0.2], vec![0.2, 0.2]]).unwrap();
        assert_eq!(greedy_packing(&twin, 0.01, &g, 1, 8).unwrap().count, 1);
        let pw = PowerGauge { constant: 1.0, exponent: 1.0 };
        // 2·0.015 equals the spacing of three points exactly; just below it the answer is ⌈100/3⌉
        let p = greedy_packing(&line(100, 0.01), 0.0149, &pw, 1, 8).unwrap();
        assert_eq!(p.count, 34);
        assert!(is_packing(&line(100, 0.01), &p.centers, 0.0149));
        assert!(greedy_packing(&tri, 0.1, &g, 1, 8).is_err());
    }

    #[test]
    fn greedy_uses_index_above_threshold() {
        let mut rng = seed_stream(3, 0);
        let pts: Vec<f64> = (0..3 * 5000).map(|_| rng.gen::<f64>()).collect();
        let c = PointCloud::with_total_mass(3, pts, 1.0).unwrap();
        let pw = PowerGauge { constant: 1.0, exponent: 3.0 };
        let p = greedy_packing(&c, 0.03, &pw, 9, 2).unwrap();
        assert!(is_packing(&c, &p.centers, 0.03));
        // maximality: every point is within 2·eps of some centre
        for i in 0..c.len() {
            assert!(p.centers.iter().any(|&k| dist2(c.point(i), c.point(k)) <= 4.0 * 0.03 * 0.03));
        }
    }

    #[test]
    fn box_count_examples() {
        let single = PointCloud::from_points(&[vec![0.3, 0.7]]).unwrap();
        for e in [1e-6, 1e-3, 0.1] {
            assert_eq!(box_count(&single, e), 1);
        }
        let p = dyadic_p(2);
        for k in 1..6 {
            let m = 1usize << k;
            let pts: Vec<Vec<f64>> =
                (0..m * m).map(|i| vec![(i % m) as f64 / m as f64, (i / m) as f64 / m as f64]).collect();
            let c = PointCloud::from_points(&pts).unwrap();
            let eps = 2f64.powi(-k - p - 1) * 2f64.sqrt() * (1.0 + 2f64.powi(-p));
            assert_eq!(box_count(&c, eps), 4usize.pow(k as u32));
        }
    }

    #[test]
    fn regression_examples() {
        let rows: Vec<(f64, f64)> = (1..10)
            .map(|k| {
                let e = 2f64.powi(-k);
                (e, (1.0 / e).powi(2))
            })
            .collect();
        let r = dim_regress(&rows, (0.0, 1.0), RegressionKind::Box).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && r.half_width < 1e-10);
        let flat: Vec<(f64, f64)> = rows.iter().map(|&(e, _)| (e, 7.0)).collect();
        assert!(dim_regress(&flat, (0.0, 1.0), RegressionKind::Box).unwrap().slope.abs() < 1e-12);
        assert!(dim_regress(&rows[..4], (0.0, 1.0), RegressionKind::Box).is_err());
        let same = vec![(0.1, 1.0); 6];
        assert!(dim_regress(&same, (0.0, 1.0), RegressionKind::Box).is_err());
    }

    #[test]
    fn uniform_cube_box_dimension() {
        let mut rng = seed_stream(1, 0);
        let pts: Vec<f64> = (0..3 * 100_000).map(|_| rng.gen::<f64>()).collect();
        let c = PointCloud::with_total_mass(3, pts, 1.0).unwrap();
        let rows: Vec<(f64, f64)> = log_grid(0.01, 0.4, 20).iter().map(|&e| (e, box_count(&c, e) as f64)).collect();
        // below eps ≈ 0.035 the 10⁵ points saturate the 2^{3n} cells
        let r = dim_regress(&rows, (0.04, 0.4), RegressionKind::Box).unwrap();
        assert!((2.8..=3.2).contains(&r.slope), "{r:?}");
    }

    #[test]
    fn density_examples() {
        let pw = PowerGauge { constant: 1.0, exponent: 1.0 };
        let atom = PointCloud::new(1, vec![0.5], vec![2.0]).unwrap();
        let grid = log_grid(1e-3, 1e-1, 40);
        assert!(grid.len() >= 81);
        let prof = local_density(&atom, &pw, &[0.5], &grid).unwrap();
        for (r, q) in grid.iter().zip(&prof.ratio) {
            assert!((q - 2.0 / r).abs() < 1e-9 / r);
        }
        // uniform mass 1 on [0, 1], fine lattice: mass of B(x, r) ≈ 2r
        let n = 200_000;
        let seg = PointCloud::with_total_mass(1, (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(), 1.0).unwrap();
        let prof = local_density(&seg, &pw, &[0.5], &grid).unwrap();
        for q in &prof.ratio {
            assert!((q - 2.0).abs() < 0.01);
        }
        assert!(prof.ratio.iter().all(|q| *q >= prof.min_ratio));
        assert!(local_density(&seg, &pw, &[0.5], &[]).is_err());
    }

    fn cantor_dust(level: u32) -> PointCloud {
        let mut pts = vec![vec![0.0, 0.0]];
        for k in 1..=level {
            let s = 0.25f64.powi(k as i32) * 3.0;
            pts = pts
                .iter()
                .flat_map(|p| [(0.0, 0.0), (s, 0.0), (0.0, s), (s, s)].map(|(a, b)| vec![p[0] + a, p[1] + b]))
                .collect();
        }
        PointCloud::from_points(&pts).unwrap()
    }

    #[test]
    fn comparison_examples() {
        let dust = cantor_dust(5);
        let pw = PowerGauge { constant: 1.0, exponent: 1.0 };
        let grid = log_grid(1e-2, 1e-1, 40);
        let samples: Vec<usize> = (0..dust.len()).collect();
        let huge = comparison_check(&dust, &samples, &pw, 1e12, &grid, 0.01, 5).unwrap();
        assert_eq!(huge.below.points, samples.len());
        assert_eq!(huge.above.points, 0);
        for kappa in [0.05, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let rep = comparison_check(&dust, &samples, &pw, kappa, &grid, 0.01, 5).unwrap();
            assert!(rep.above.consistent && rep.below.consistent, "{rep:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn box_count_nested(seed in 0u64..1000, k in 1i32..8) {
            let mut rng = seed_stream(seed, 0);
            let pts: Vec<f64> = (0..2 * 300).map(|_| rng.gen::<f64>()).collect();
            let c = PointCloud::with_total_mass(2, pts, 1.0).unwrap();
            let e = 0.3 * 2f64.powi(-k);
            prop_assert!(box_count(&c, e) >= box_count(&c, 2.0 * e));
        }

        #[test]
        fn greedy_is_a_packing(seed in 0u64..1000, eps in 0.005f64..0.2) {
            let mut rng = seed_stream(seed, 1);
            let pts: Vec<f64> = (0..2 * 400).map(|_| rng.gen::<f64>()).collect();
            let c = PointCloud::with_total_mass(2, pts, 1.0).unwrap();
            let pw = PowerGauge { constant: 1.0, exponent: 2.0 };
            let p = greedy_packing(&c, eps, &pw, seed, 3).unwrap();
            prop_assert!(is_packing(&c, &p.centers, eps));
        }
    }
}
