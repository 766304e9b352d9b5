use crate::error::{invalid, Result};
use crate::numkernel::{logdet_psd, RealMatrix};

/// Features as columns plus their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub z: RealMatrix,
    pub memberships: Vec<usize>,
    pub num_classes: usize,
    pub epsilon_sq: f64,
}

impl FeatureBatch {
    /// `num_classes` may exceed the largest label; such classes are empty.
    pub fn new(
        z: RealMatrix,
        memberships: Vec<usize>,
        num_classes: usize,
        epsilon_sq: f64,
    ) -> Result<Self> {
        if z.rows() == 0 || z.cols() == 0 {
            return Err(invalid("feature batch needs d >= 1 and m >= 1"));
        }
        if memberships.len() != z.cols() {
            return Err(invalid(format!(
                "{} labels for {} samples",
                memberships.len(),
                z.cols()
            )));
        }
        if let Some(&bad) = memberships.iter().find(|&&c| c >= num_classes) {
            return Err(invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !(epsilon_sq > 0.0 && epsilon_sq.is_finite()) {
            return Err(invalid("epsilon_sq must be positive"));
        }
        if !z.all_finite() {
            return Err(invalid("features must be finite"));
        }
        Ok(Self {
            z,
            memberships,
            num_classes,
            epsilon_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }

    pub fn len(&self) -> usize {
        self.z.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.cols() == 0
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes];
        for &c in &self.memberships {
            sizes[c] += 1;
        }
        sizes
    }

    /// Columns belonging to class `j`, in sample order.
    pub fn class_columns(&self, j: usize) -> RealMatrix {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.memberships[i] == j)
            .collect();
        RealMatrix::from_fn(self.dim(), idx.len(), |r, c| self.z[(r, idx[c])])
    }

    pub fn with_features(&self, z: RealMatrix) -> Result<Self> {
        Self::new(
            z,
            self.memberships.clone(),
            self.num_classes,
            self.epsilon_sq,
        )
    }
}

/// `ln det(I + alpha Z Z^T)`.
pub(crate) fn logdet_regularized_gram(z: &RealMatrix, alpha: f64) -> Result<f64> {
    let mut m = z.matmul(&z.transpose())?.scale(alpha);
    for i in 0..m.rows() {
        m[(i, i)] += 1.0;
    }
    m.symmetrize();
    logdet_psd(&m)
}

pub fn coding_rate(batch: &FeatureBatch) -> Result<f64> {
    let d = batch.dim() as f64;
    let alpha = d / (batch.len() as f64 * batch.epsilon_sq);
    Ok(0.5 * logdet_regularized_gram(&batch.z, alpha)? / std::f64::consts::LN_2)
}

/// Empty classes contribute zero.
pub fn conditional_coding_rate(batch: &FeatureBatch) -> Result<f64> {
    let d = batch.dim() as f64;
    let m = batch.len() as f64;
    let mut total = 0.0;
    for (j, &mj) in batch.class_sizes().iter().enumerate() {
        if mj == 0 {
            continue;
        }
        let mj = mj as f64;
        let alpha = d / (mj * batch.epsilon_sq);
        let zj = batch.class_columns(j);
        total += mj / (2.0 * m) * logdet_regularized_gram(&zj, alpha)? / std::f64::consts::LN_2;
    }
    Ok(total)
}

/// `R - R^c`.
pub fn rate_reduction(batch: &FeatureBatch) -> Result<f64> {
    Ok(coding_rate(batch)? - conditional_coding_rate(batch)?)
}
