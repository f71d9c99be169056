use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HeightExcursion;
use crate::error::{domain, Result};
use crate::packing::PointCloud;

/// Snake endpoints Ŵ_i ∈ ℝ^d on the grid of the driving excursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnakeSample {
    pub excursion: HeightExcursion,
    pub origin: Vec<f64>,
    /// Row-major endpoints, one row per grid point.
    pub path: Vec<f64>,
}

impl SnakeSample {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.path.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn endpoint(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.path[i * d..(i + 1) * d]
    }
}

/// Snake driven by `exc` from `x`. Each coordinate follows an independent
/// Brownian path along the current ancestral line, kept as knots (level, value);
/// a step to i+1 cuts the line at b = min(H_i, H_{i+1}), filling the value at b
/// by a Brownian bridge when no knot sits there, then grows it to H_{i+1}.
pub fn sample_snake<R: Rng + ?Sized>(exc: &HeightExcursion, x: &[f64], rng: &mut R) -> Result<SnakeSample> {
    let d = x.len();
    if d == 0 {
        return domain("the snake needs d ≥ 1");
    }
    let h = &exc.heights;
    let mut path = Vec::with_capacity(h.len() * d);
    let mut levels: Vec<f64> = vec![0.0];
    let mut values: Vec<f64> = x.to_vec();
    if h[0] > 0.0 {
        levels.push(h[0]);
        values.extend(x.iter().map(|v| v + h[0].sqrt() * rng.sample::<f64, _>(StandardNormal)));
    }
    path.extend_from_slice(&values[values.len() - d..]);
    let mut upper = vec![0.0; d];
    for i in 0..h.len() - 1 {
        let b = h[i].min(h[i + 1]);
        let mut cut: Option<f64> = None;
        while *levels.last().unwrap() > b {
            let l = levels.pop().unwrap();
            let n = values.len();
            upper.copy_from_slice(&values[n - d..]);
            values.truncate(n - d);
            cut = Some(l);
        }
        let lo = *levels.last().unwrap();
        if let (Some(hi), true) = (cut, lo < b) {
            let w = (b - lo) / (hi - lo);
            let sd = ((b - lo) * (hi - b) / (hi - lo)).sqrt();
            let n = values.len();
            for j in 0..d {
                let v =
                    values[n - d + j] + w * (upper[j] - values[n - d + j]) + sd * rng.sample::<f64, _>(StandardNormal);
                values.push(v);
            }
            levels.push(b);
        }
        let top = *levels.last().unwrap();
        if h[i + 1] > top {
            let sd = (h[i + 1] - top).sqrt();
            let n = values.len();
            for j in 0..d {
                let v = values[n - d + j] + sd * rng.sample::<f64, _>(StandardNormal);
                values.push(v);
            }
            levels.push(h[i + 1]);
        }
        path.extend_from_slice(&values[values.len() - d..]);
    }
    Ok(SnakeSample { excursion: exc.clone(), origin: x.to_vec(), path })
}

/// Occupation measure of a snake: every grid point carries σ/grid_count, and
/// points visited more than once are merged into one atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationCloud {
    pub cloud: PointCloud,
    pub sigma: f64,
    pub grid_count: usize,
}

impl OccupationCloud {
    /// The range: the support of the cloud as a list of points.
    pub fn range(&self) -> Vec<Vec<f64>> {
        (0..self.cloud.len()).map(|i| self.cloud.point(i).to_vec()).collect()
    }
}

pub fn occupation_and_range(snake: &SnakeSample) -> OccupationCloud {
    let d = snake.dim();
    let n = snake.len();
    let w = snake.excursion.point_weight();
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let p = snake.endpoint(i);
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        let k = *slot.entry(key).or_insert_with(|| {
            coords.extend_from_slice(p);
            counts.push(0);
            counts.len() - 1
        });
        counts[k] += 1;
    }
    let weights = counts.iter().map(|&c| c as f64 * w).collect();
    let cloud = PointCloud::new(d, coords, weights).expect("snake endpoints are finite");
    OccupationCloud { cloud, sigma: snake.excursion.sigma, grid_count: n }
}

/// Smallest grid index whose endpoint lies in the closed ball B̄(center, radius).
pub fn first_hitting(snake: &SnakeSample, center: &[f64], radius: f64) -> Result<Option<usize>> {
    if !(radius > 0.0) || center.len() != snake.dim() {
        return domain("first_hitting needs radius > 0 and a centre of the snake's dimension");
    }
    let r2 = radius * radius;
    Ok((0..snake.len()).find(|&i| crate::packing::cloud::dist2(snake.endpoint(i), center) <= r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::BranchingMechanism;
    use crate::rng::seed_stream;
    use crate::trees_snakes::{sample_height_excursion, tree_distance};

    #[test]
    fn flat_excursion_gives_constant_snake() {
        let e = HeightExcursion::from_heights(vec![0.0; 10], 0.1).unwrap();
        let s = sample_snake(&e, &[1.0, -2.0], &mut seed_stream(0, 0)).unwrap();
        assert!(s.path.chunks(2).all(|p| p == [1.0, -2.0]));
        let occ = occupation_and_range(&s);
        assert_eq!(occ.cloud.len(), 1);
        assert!((occ.cloud.total_mass() - e.sigma).abs() < 1e-12 * e.sigma);
        assert!(sample_snake(&e, &[], &mut seed_stream(0, 0)).is_err());
    }

    #[test]
    fn snake_starts_at_origin_and_returns() {
        let mut rng = seed_stream(5, 0);
        let e = sample_height_excursion(&BranchingMechanism::quadratic(1.0), 200, &mut rng, None).unwrap();
        let s = sample_snake(&e, &[0.5, 0.5, 0.5], &mut rng).unwrap();
        assert_eq!(s.endpoint(0), &[0.5, 0.5, 0.5]);
        assert_eq!(s.endpoint(s.len() - 1), &[0.5, 0.5, 0.5]);
        // equal tree distance zero means equal endpoints
        for i in 0..s.len() {
            for j in (i..s.len()).step_by(17) {
                if tree_distance(&e.heights, i, j) == 0.0 {
                    assert_eq!(s.endpoint(i), s.endpoint(j));
                }
            }
        }
        let occ = occupation_and_range(&s);
        assert!((occ.cloud.total_mass() - e.sigma).abs() < 1e-12 * e.sigma);
        assert_eq!(occ.grid_count, e.len());
        assert!(occ.cloud.len() < e.len());
    }

    #[test]
    fn occupation_ball_mass_matches_time_count() {
        let mut rng = seed_stream(6, 0);
        let e = sample_height_excursion(&BranchingMechanism::quadratic(1.0), 300, &mut rng, None).unwrap();
        let s = sample_snake(&e, &[0.0, 0.0], &mut rng).unwrap();
        let occ = occupation_and_range(&s);
        for r in [0.05, 0.1, 0.3] {
            let c = [0.02, -0.01];
            let direct = (0..s.len()).filter(|&i| crate::packing::cloud::dist2(s.endpoint(i), &c) <= r * r).count()
                as f64
                * e.point_weight();
            let cloud: f64 = (0..occ.cloud.len())
                .filter(|&i| crate::packing::cloud::dist2(occ.cloud.point(i), &c) <= r * r)
                .map(|i| occ.cloud.weight(i))
                .sum();
            assert!((direct - cloud).abs() < 1e-12);
        }
    }

    #[test]
    fn hitting_examples() {
        let mut rng = seed_stream(7, 0);
        let e = sample_height_excursion(&BranchingMechanism::quadratic(1.0), 200, &mut rng, None).unwrap();
        let s = sample_snake(&e, &[0.0, 0.0, 0.0], &mut rng).unwrap();
        assert_eq!(first_hitting(&s, &[0.0, 0.0, 0.0], 0.01).unwrap(), Some(0));
        assert_eq!(first_hitting(&s, &[1e6, 0.0, 0.0], 1.0).unwrap(), None);
        assert!(first_hitting(&s, &[0.0, 0.0, 0.0], 0.0).is_err());
        for (c, r) in [([0.3, 0.0, 0.0], 0.1), ([0.0, -0.2, 0.1], 0.15)] {
            let scan = (0..s.len()).filter(|&i| crate::packing::cloud::dist2(s.endpoint(i), &c) <= r * r).min();
            assert_eq!(first_hitting(&s, &c, r).unwrap(), scan);
        }
    }

    #[test]
    fn bridge_fill_on_irregular_heights() {
        // a step down to a level strictly between knots exercises the bridge
        let h = vec![0.0, 1.0, 0.4, 0.9, 0.0];
        let e = HeightExcursion::from_heights(h.clone(), 0.25).unwrap();
        let reps = 20_000;
        let mut rng = seed_stream(8, 0);
        let mut acc = [0.0; 3];
        for _ in 0..reps {
            let s = sample_snake(&e, &[0.0], &mut rng).unwrap();
            let w = &s.path;
            acc[0] += (w[1] - w[2]).powi(2);
            acc[1] += (w[2] - w[3]).powi(2);
            acc[2] += (w[1] - w[3]).powi(2);
        }
        for (a, (i, j)) in acc.iter().zip([(1, 2), (2, 3), (1, 3)]) {
            let v = a / reps as f64;
            let t = tree_distance(&h, i, j);
            assert!((v - t).abs() < 0.05 * t, "{i} {j}: {v} vs {t}");
        }
    }

    #[test]
    fn covariance_matches_tree_distance() {
        let mut rng = seed_stream(9, 0);
        let e = sample_height_excursion(&BranchingMechanism::quadratic(1.0), 100, &mut rng, None).unwrap();
        let d = 3;
        let reps = 10_000;
        let pairs: Vec<(usize, usize)> = (0..20)
            .map(|_| loop {
                let (s, t) = (rng.gen_range(1..e.len() - 1), rng.gen_range(1..e.len() - 1));
                if tree_distance(&e.heights, s, t) > 0.0 {
                    break (s, t);
                }
            })
            .collect();
        let mut sq = vec![[0.0; 3]; pairs.len()];
        let mut cross = vec![(0.0, 0.0); pairs.len()];
        for _ in 0..reps {
            let s = sample_snake(&e, &[0.0; 3], &mut rng).unwrap();
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let inc: Vec<f64> = (0..d).map(|j| s.endpoint(b)[j] - s.endpoint(a)[j]).collect();
                for j in 0..d {
                    sq[k][j] += inc[j] * inc[j];
                }
                cross[k].0 += inc[0] * inc[1];
                cross[k].1 += (inc[0] * inc[1]).powi(2);
            }
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let t = tree_distance(&e.heights, a, b);
            for j in 0..d {
                let v = sq[k][j] / reps as f64;
                assert!((v - t).abs() < 0.05 * t, "pair {k} coord {j}: {v} vs {t}");
            }
            let n = reps as f64;
            let m = cross[k].0 / n;
            let se = ((cross[k].1 / n - m * m) / n).sqrt();
            assert!(m.abs() < 3.0 * se, "pair {k}: cross moment {m}, se {se}");
        }
    }
}
