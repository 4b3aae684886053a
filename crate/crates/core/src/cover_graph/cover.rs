use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::cocycle::BoxDomain;

/// Uniform partition of `Q` into half-open boxes (the last box in each
/// dimension is closed). Linear indices are row-major, last coordinate
/// fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCover {
    domain: BoxDomain,
    per_dim: Vec<usize>,
}

impl BoxCover {
    pub fn new(domain: BoxDomain, per_dim: Vec<usize>) -> Result<Self, GraphError> {
        if per_dim.len() != domain.dim() || per_dim.contains(&0) {
            return Err(GraphError::BadCover(per_dim));
        }
        Ok(BoxCover { domain, per_dim })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn per_dim(&self) -> &[usize] {
        &self.per_dim
    }

    pub fn box_count(&self) -> usize {
        self.per_dim.iter().product()
    }

    pub fn width(&self, k: usize) -> f64 {
        (self.domain.hi()[k] - self.domain.lo()[k]) / self.per_dim[k] as f64
    }

    /// Max-norm diameter `δ_box`.
    pub fn box_diameter(&self) -> f64 {
        (0..self.per_dim.len()).map(|k| self.width(k)).fold(0.0, f64::max)
    }

    fn coord_index(&self, k: usize, v: f64) -> Option<usize> {
        let lo = self.domain.lo()[k];
        let hi = self.domain.hi()[k];
        if !(lo <= v && v <= hi) {
            return None;
        }
        let n = self.per_dim[k];
        let j = ((v - lo) / self.width(k)).floor() as usize;
        Some(j.min(n - 1))
    }

    /// Box containing `x`, or `None` outside `Q`.
    pub fn box_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (k, &v) in x.iter().enumerate() {
            idx = idx * self.per_dim[k] + self.coord_index(k, v)?;
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut out = vec![0; self.per_dim.len()];
        for (slot, &n) in out.iter_mut().zip(&self.per_dim).rev() {
            *slot = linear % n;
            linear /= n;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.per_dim).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn center(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .enumerate()
            .map(|(k, &j)| self.domain.lo()[k] + (j as f64 + 0.5) * self.width(k))
            .collect()
    }

    /// Lower and upper corner.
    pub fn corners(&self, linear: usize) -> (Vec<f64>, Vec<f64>) {
        let multi = self.multi_index(linear);
        let lo: Vec<f64> =
            multi.iter().enumerate().map(|(k, &j)| self.domain.lo()[k] + j as f64 * self.width(k)).collect();
        let hi: Vec<f64> = lo.iter().enumerate().map(|(k, l)| l + self.width(k)).collect();
        (lo, hi)
    }

    /// Center plus all `2^d` corners.
    pub fn test_points(&self, linear: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.corners(linear);
        let d = lo.len();
        let mut pts = vec![self.center(linear)];
        for mask in 0..(1usize << d) {
            pts.push((0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect());
        }
        pts
    }

    /// Boxes whose center lies within max-norm distance `< eps` of `y`,
    /// sorted ascending.
    pub fn boxes_near(&self, y: &[f64], eps: f64) -> Vec<usize> {
        let mut ranges = Vec::with_capacity(y.len());
        for (k, &v) in y.iter().enumerate() {
            let lo = self.domain.lo()[k];
            let w = self.width(k);
            let n = self.per_dim[k] as i64;
            let first = (((v - eps - lo) / w) - 0.5).floor() as i64;
            let last = (((v + eps - lo) / w) - 0.5).ceil() as i64;
            let mut js = Vec::new();
            for j in first.max(0)..=last.min(n - 1) {
                let c = lo + (j as f64 + 0.5) * w;
                if (c - v).abs() < eps {
                    js.push(j as usize);
                }
            }
            if js.is_empty() {
                return Vec::new();
            }
            ranges.push(js);
        }
        let mut out = vec![0usize];
        for (k, js) in ranges.iter().enumerate() {
            let n = self.per_dim[k];
            out = out.into_iter().flat_map(|acc| js.iter().map(move |&j| acc * n + j)).collect();
        }
        out
    }

    /// Boxes whose multi-index differs by at most `r` in every coordinate.
    pub fn inflate_box(&self, linear: usize, r: usize) -> Vec<usize> {
        let multi = self.multi_index(linear);
        let mut out = vec![0usize];
        for (k, &j) in multi.iter().enumerate() {
            let n = self.per_dim[k];
            let lo = j.saturating_sub(r);
            let hi = (j + r).min(n - 1);
            out = out.into_iter().flat_map(|acc| (lo..=hi).map(move |i| acc * n + i)).collect();
        }
        out
    }
}

pub fn build_cover(domain: BoxDomain, per_dim: Vec<usize>) -> Result<BoxCover, GraphError> {
    BoxCover::new(domain, per_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_boxes_on_an_interval() {
        let c = BoxCover::new(BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(), vec![4]).unwrap();
        assert_eq!(c.box_count(), 4);
        assert_eq!(c.box_diameter(), 1.0);
        assert_eq!(c.box_of(&[0.5]), Some(2));
        assert_eq!(c.box_of(&[-1.0]), Some(1));
        assert_eq!(c.box_of(&[2.0]), Some(3));
        assert_eq!(c.box_of(&[2.0001]), None);
        assert_eq!(c.corners(0), (vec![-2.0], vec![-1.0]));
        assert_eq!(c.corners(3), (vec![1.0], vec![2.0]));
    }

    #[test]
    fn square_cover() {
        let c = BoxCover::new(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), vec![2, 2]).unwrap();
        assert_eq!(c.box_count(), 4);
        for b in 0..4 {
            assert_eq!(c.box_of(&c.center(b)), Some(b));
            assert_eq!(c.linear_index(&c.multi_index(b)), b);
        }
        assert_eq!(c.test_points(0).len(), 5);
        assert!(BoxCover::new(BoxDomain::new(vec![0.0], vec![1.0]).unwrap(), vec![0]).is_err());
    }

    #[test]
    fn near_boxes_use_center_distance() {
        let c = BoxCover::new(BoxDomain::new(vec![0.0], vec![4.0]).unwrap(), vec![4]).unwrap();
        // centers 0.5, 1.5, 2.5, 3.5
        assert_eq!(c.boxes_near(&[1.0], 1.0), vec![0, 1]);
        assert_eq!(c.boxes_near(&[1.5], 1.0), vec![1]);
        assert_eq!(c.boxes_near(&[1.4], 1.0), vec![0, 1]);
        assert_eq!(c.boxes_near(&[-0.6], 1.0), Vec::<usize>::new());
        assert_eq!(c.boxes_near(&[5.0], 2.0), vec![3]);
        let sq = BoxCover::new(BoxDomain::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(), vec![2, 2]).unwrap();
        assert_eq!(sq.boxes_near(&[1.0, 1.0], 0.75), vec![0, 1, 2, 3]);
        assert_eq!(sq.inflate_box(0, 1), vec![0, 1, 2, 3]);
    }
}
