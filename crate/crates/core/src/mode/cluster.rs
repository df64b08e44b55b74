use serde::{Deserialize, Serialize};

/// Clustering feature of a set of scalar samples: count, linear sum and sum
/// of squares.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub count: u64,
    pub linear_sum: f64,
    pub squared_sum: f64,
}

impl ClusterSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::default();
        for &v in values {
            s.insert(v);
        }
        s
    }

    pub fn insert(&mut self, v: f64) {
        self.count += 1;
        self.linear_sum += v;
        self.squared_sum += v * v;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            count: self.count + other.count,
            linear_sum: self.linear_sum + other.linear_sum,
            squared_sum: self.squared_sum + other.squared_sum,
        }
    }

    pub fn centroid(&self) -> Option<f64> {
        (self.count > 0).then(|| self.linear_sum / self.count as f64)
    }

    /// Root-mean-square distance of the members from the centroid.
    pub fn radius(&self) -> f64 {
        match self.centroid() {
            Some(c) => (self.squared_sum / self.count as f64 - c * c)
                .max(0.0)
                .sqrt(),
            None => 0.0,
        }
    }

    pub fn distance(&self, v: f64) -> f64 {
        self.centroid().map_or(f64::INFINITY, |c| (v - c).abs())
    }
}
