use crate::error::{ensure_dim, Result};

/// Anything that maps a feature vector to a logit vector.
///
/// Implementations must be pure: the same input always yields the same logits.
/// Smoothing and certification evaluate classifiers from several worker
/// threads, so the trait requires `Sync`.
pub trait Classifier: Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).logits(x)
    }
    fn predict(&self, x: &[f64]) -> Result<usize> {
        (**self).predict(x)
    }
}

impl<C: Classifier + ?Sized + Send> Classifier for Box<C> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).logits(x)
    }
    fn predict(&self, x: &[f64]) -> Result<usize> {
        (**self).predict(x)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Wraps a closure as a classifier. Handy for teachers with no parameters at all.
pub struct FnClassifier<F> {
    dim: usize,
    classes: usize,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(dim: usize, classes: usize, f: F) -> Self {
        Self { dim, classes, f }
    }
}

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, x.len())?;
        let out = (self.f)(x);
        ensure_dim(self.classes, out.len())?;
        Ok(out)
    }
}
