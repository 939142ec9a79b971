use crate::geometry::{lex_cmp, TorusGeometry};

/// Finite point set on the torus in canonical (lexicographic) order, with its
/// minimum pairwise torus distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    geometry: TorusGeometry,
    points: Vec<Vec<f64>>,
    separation: f64,
}

impl PointPattern {
    pub fn new(geometry: TorusGeometry, mut points: Vec<Vec<f64>>) -> Self {
        points.sort_by(|a, b| lex_cmp(a, b));
        let mut separation = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                separation = separation.min(geometry.torus_distance(&points[i], &points[j]));
            }
        }
        Self { geometry, points, separation }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Minimum pairwise torus distance; infinite for fewer than two points.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Every point moved by `t` modulo L.
    pub fn translated(&self, t: &[f64]) -> Self {
        let g = &self.geometry;
        let pts = self
            .points
            .iter()
            .map(|p| p.iter().zip(t).map(|(&x, &s)| g.wrap(x + s)).collect())
            .collect();
        Self::new(g.clone(), pts)
    }
}
