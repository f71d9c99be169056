use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Weighted points in ℝ^d, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    d: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be positive");
        }
        if coords.len() != d * weights.len() {
            return invalid(format!(
                "{} coordinates do not match {} weights in dimension {d}",
                coords.len(),
                weights.len()
            ));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return invalid("coordinates must be finite");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and nonnegative");
        }
        Ok(PointCloud { d, coords, weights })
    }

    /// Equal weights summing to `total_mass`.
    pub fn with_total_mass(d: usize, coords: Vec<f64>, total_mass: f64) -> Result<Self> {
        let n = if d == 0 { 0 } else { coords.len() / d };
        let w = if n == 0 { 0.0 } else { total_mass / n as f64 };
        Self::new(d, coords, vec![w; n])
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != d) {
            return invalid("points of mixed dimension");
        }
        Self::with_total_mass(d, points.concat(), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn subset(&self, idx: &[usize]) -> PointCloud {
        let coords = idx.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        let weights = idx.iter().map(|&i| self.weights[i]).collect();
        PointCloud { d: self.d, coords, weights }
    }

    /// CSV with header `x1,...,xd,weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        header.push("weight".into());
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.point(i).iter().map(|x| format!("{x:e}")).collect();
            rec.push(format!("{:e}", self.weights[i]));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected: Vec<String> = (1..=d).map(|j| format!("x{j}")).chain(["weight".to_string()]).collect();
        if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return invalid("point-cloud CSV header must be x1,...,xd,weight");
        }
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| crate::Error::Invalid(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            coords.extend_from_slice(&vals[..d]);
            weights.push(vals[d]);
        }
        Self::new(d, coords, weights)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform grid over the first (at most three) coordinates with a fixed cell
/// side. Neighbour queries return a superset of the points within one cell
/// side of the query.
pub(crate) struct GridIndex {
    h: f64,
    k: usize,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl GridIndex {
    pub fn new(d: usize, h: f64) -> Self {
        GridIndex { h, k: d.min(3), cells: HashMap::new() }
    }

    fn key(&self, p: &[f64]) -> [i64; 3] {
        let mut key = [0i64; 3];
        for j in 0..self.k {
            key[j] = (p[j] / self.h).floor() as i64;
        }
        key
    }

    pub fn insert(&mut self, p: &[f64], id: usize) {
        let key = self.key(p);
        self.cells.entry(key).or_default().push(id);
    }

    pub fn for_each_near(&self, p: &[f64], mut f: impl FnMut(usize) -> bool) {
        let base = self.key(p);
        let span = |j: usize| if j < self.k { -1..=1 } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    let key = [base[0] + a, base[1] + b, base[2] + c];
                    if let Some(ids) = self.cells.get(&key) {
                        for &id in ids {
                            if !f(id) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }
}
