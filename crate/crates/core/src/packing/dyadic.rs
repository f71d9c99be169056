use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// p = ⌊log₂(4√d)⌋.
pub fn dyadic_p(d: usize) -> i32 {
    // 4√d ≥ 2^k ⇔ d ≥ 4^{k−2}; integer comparison avoids rounding at powers of 4
    let mut p = 2;
    while 4usize.pow(p as u32 - 1) <= d {
        p += 1;
    }
    p
}

/// Level n(r): the least n with ½(1 + 2^{−p})√d·2^{−n} < r.
pub fn dyadic_level(d: usize, r: f64) -> i32 {
    let k = (1.0 + 2f64.powi(-dyadic_p(d))) * (d as f64).sqrt();
    let half_diam = |n: i32| 0.5 * k * 2f64.powi(-n);
    let mut n = (k / r).log2().floor() as i32;
    while half_diam(n) >= r {
        n += 1;
    }
    while half_diam(n - 1) < r {
        n -= 1;
    }
    n
}

/// A cube pair indexed by level n and centre y ∈ 2^{−n−p}ℤ^d: the outer cube
/// D_n(y) of side 2^{−n} and the inner cube D•_n(y) of side 2^{−n−p}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub p: i32,
    /// Centre in units of 2^{−n−p}.
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn center(&self) -> Vec<f64> {
        let s = 2f64.powi(-self.level - self.p);
        self.index.iter().map(|&i| i as f64 * s).collect()
    }

    pub fn inner_side(&self) -> f64 {
        2f64.powi(-self.level - self.p)
    }

    pub fn outer_side(&self) -> f64 {
        2f64.powi(-self.level)
    }

    /// x ∈ D•_n(y), half-open on the upper faces.
    pub fn inner_contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.inner_side();
        self.center().iter().zip(x).all(|(c, v)| *v >= c - h && *v < c + h)
    }
}

/// Level n(r) and the cube whose inner part contains x; then D_{n(r)}(y) ⊂ B(x, r).
pub fn dyadic_locate(x: &[f64], r: f64) -> Result<DyadicCube> {
    let d = x.len();
    if d == 0 || !(r > 0.0 && r < 0.5 / d as f64) {
        return domain("dyadic_locate needs 0 < r < 1/(2d)");
    }
    let p = dyadic_p(d);
    let level = dyadic_level(d, r);
    let scale = 2f64.powi(level + p);
    let index = x.iter().map(|v| (v * scale + 0.5).floor() as i64).collect();
    Ok(DyadicCube { level, p, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p_and_level_examples() {
        assert_eq!(dyadic_p(1), 2);
        assert_eq!(dyadic_p(3), 2);
        assert_eq!(dyadic_p(4), 3);
        for d in 1..200 {
            assert_eq!(dyadic_p(d), (4.0 * (d as f64).sqrt()).log2().floor() as i32, "d = {d}");
        }
        assert_eq!(dyadic_level(1, 0.1), 3);
        let c = dyadic_locate(&[0.0, 0.0], 0.01).unwrap();
        assert!(c.index.iter().all(|&i| i == 0));
        assert!(dyadic_locate(&[0.0], 0.6).is_err());
    }

    #[test]
    fn inner_cubes_are_disjoint() {
        let a = DyadicCube { level: 3, p: 2, index: vec![1, 2] };
        let b = DyadicCube { level: 3, p: 2, index: vec![2, 2] };
        let s = a.inner_side();
        for i in 0..50 {
            for j in 0..50 {
                let x = [s * (0.5 + i as f64 / 25.0), s * (1.5 + j as f64 / 25.0)];
                assert!(!(a.inner_contains(&x) && b.inner_contains(&x)));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn containment(d in 1usize..6, seed in proptest::collection::vec(-1.0f64..1.0, 6), t in 0.001f64..1.0) {
            let x = &seed[..d];
            let r = t * 0.5 / d as f64;
            let c = dyadic_locate(x, r).unwrap();
            prop_assert!(c.inner_contains(x));
            let y = c.center();
            let dist = crate::packing::cloud::dist2(x, &y).sqrt();
            // D•_n(y) ⊂ B̄(y, 2^{−n−p}√d) ⊂ D_n(y), and D_n(y) ⊂ B(x, r)
            let dd = (d as f64).sqrt();
            prop_assert!(dist <= 0.5 * c.inner_side() * dd * (1.0 + 1e-12));
            prop_assert!(c.inner_side() * dd <= 0.5 * c.outer_side());
            prop_assert!(dist + 0.5 * c.outer_side() * dd < r);
        }
    }
}
