use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Feature vectors with class labels and domain labels.
///
/// Labels are fixed at construction; point-replacing operations keep them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LabeledBatch<F> {
    points: Vec<Vec<F>>,
    class_labels: Vec<usize>,
    domain_labels: Vec<usize>,
}

impl<F: Scalar> LabeledBatch<F> {
    pub fn new(points: Vec<Vec<F>>, class_labels: Vec<usize>, domain_labels: Vec<usize>) -> Result<Self> {
        if points.len() != class_labels.len() || points.len() != domain_labels.len() {
            return invalid(format!(
                "batch has {} points, {} class labels, {} domain labels",
                points.len(),
                class_labels.len(),
                domain_labels.len()
            ));
        }
        if let Some(first) = points.first() {
            let d = first.len();
            if d == 0 || points.iter().any(|p| p.len() != d) {
                return invalid("points must share a positive dimension");
            }
        }
        Ok(Self { points, class_labels, domain_labels })
    }

    /// All points from one domain.
    pub fn single_domain(points: Vec<Vec<F>>, class_labels: Vec<usize>, domain: usize) -> Result<Self> {
        let n = points.len();
        Self::new(points, class_labels, vec![domain; n])
    }

    pub fn points(&self) -> &[Vec<F>] {
        &self.points
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn domain_labels(&self) -> &[usize] {
        &self.domain_labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Same labels, new points.
    pub fn with_points(&self, points: Vec<Vec<F>>) -> Result<Self> {
        if points.len() != self.len() {
            return Err(Error::ContractViolation(format!(
                "{} replacement points for a batch of {}",
                points.len(),
                self.len()
            )));
        }
        Self::new(points, self.class_labels.clone(), self.domain_labels.clone())
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            class_labels: indices.iter().map(|&i| self.class_labels[i]).collect(),
            domain_labels: indices.iter().map(|&i| self.domain_labels[i]).collect(),
        }
    }

    pub fn concat(batches: &[Self]) -> Result<Self> {
        let mut points = Vec::new();
        let mut class_labels = Vec::new();
        let mut domain_labels = Vec::new();
        for b in batches {
            points.extend(b.points.iter().cloned());
            class_labels.extend(&b.class_labels);
            domain_labels.extend(&b.domain_labels);
        }
        Self::new(points, class_labels, domain_labels)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[F], usize, usize)> {
        self.points
            .iter()
            .zip(&self.class_labels)
            .zip(&self.domain_labels)
            .map(|((p, &c), &d)| (p.as_slice(), c, d))
    }
}
