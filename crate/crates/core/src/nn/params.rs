use crate::{HgrError, Result};

/// A model whose trainable tensors can be enumerated in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn tensor_names(&self) -> Vec<String>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// One gradient buffer per parameter tensor plus an optional gradient with
/// respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub tensors: Vec<Vec<f64>>,
    pub input: Option<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like<P: Parameters + ?Sized>(p: &P) -> Self {
        GradientSet { tensors: p.tensors().iter().map(|t| vec![0.0; t.len()]).collect(), input: None }
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(HgrError::Shape("gradient tensor count".into()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            if a.len() != b.len() {
                return Err(HgrError::Shape("gradient tensor length".into()));
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        match (&mut self.input, &other.input) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (None, Some(b)) => self.input = Some(b.clone()),
            _ => {}
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
            && self.input.as_ref().map_or(true, |v| v.iter().all(|x| x.is_finite()))
    }

    /// Adds a flat vector laid out like [`GradientSet::flat`].
    pub fn add_flat(&mut self, values: &[f64]) -> Result<()> {
        let n: usize = self.tensors.iter().map(|t| t.len()).sum();
        if values.len() != n {
            return Err(HgrError::Shape(format!("{} values for {n} gradient entries", values.len())));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            for (x, v) in t.iter_mut().zip(&values[offset..]) {
                *x += *v;
            }
            offset += t.len();
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn check_shapes<P: Parameters + ?Sized>(&self, p: &P) -> Result<()> {
        let lens: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
        let mine: Vec<usize> = self.tensors.iter().map(|t| t.len()).collect();
        if lens != mine {
            return Err(HgrError::Shape(format!("gradient shapes {mine:?} vs parameters {lens:?}")));
        }
        Ok(())
    }
}

pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    p.tensors().into_iter().flat_map(|t| t.iter().copied()).collect()
}

pub fn assign_flat<P: Parameters + ?Sized>(p: &mut P, values: &[f64]) -> Result<()> {
    if values.len() != p.param_count() {
        return Err(HgrError::Shape(format!("{} values for {} parameters", values.len(), p.param_count())));
    }
    let mut offset = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&values[offset..offset + n]);
        offset += n;
    }
    Ok(())
}
