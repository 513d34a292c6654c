use super::{Architecture, ConstraintSpec};
use crate::linalg::SparseVec;

type FeatureJ = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type FeatureQ = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Architecture from user closures returning dense feature vectors.
pub struct FnBasis {
    pub name: String,
    pub d: usize,
    psi_j: FeatureJ,
    psi: FeatureQ,
    pub constraint: ConstraintSpec,
}

impl FnBasis {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        psi_j: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        psi: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnBasis {
            name: name.into(),
            d,
            psi_j: Box::new(psi_j),
            psi: Box::new(psi),
            constraint: ConstraintSpec::None,
        }
    }

    pub fn with_constraint(mut self, c: ConstraintSpec) -> Self {
        self.constraint = c;
        self
    }
}

impl Architecture for FnBasis {
    fn dim(&self) -> usize {
        self.d
    }

    fn psi_j(&self, x: &[f64]) -> SparseVec {
        let v = (self.psi_j)(x);
        debug_assert_eq!(v.len(), self.d);
        SparseVec::from_dense(&v)
    }

    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        let v = (self.psi)(x, u);
        debug_assert_eq!(v.len(), self.d);
        SparseVec::from_dense(&v)
    }

    fn constraint(&self) -> ConstraintSpec {
        self.constraint.clone()
    }

    fn descriptor(&self) -> String {
        format!("fn:{}:d={}:{:?}", self.name, self.d, self.constraint)
    }
}
