//! Named parameter arrays and the teacher moving average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Ordered, named parameter arrays of one network copy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    arrays: Vec<NamedArray>,
}

impl ParamSet {
    pub fn new(arrays: Vec<NamedArray>) -> Self {
        Self { arrays }
    }

    pub fn arrays(&self) -> &[NamedArray] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [NamedArray] {
        &mut self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut NamedArray> {
        self.arrays.iter_mut().find(|a| a.name == name)
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays.iter().map(|a| a.data.len()).sum()
    }

    /// Same array names and shapes, in the same order.
    pub fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        let sig = |p: &ParamSet| -> Vec<(String, Vec<usize>)> {
            p.arrays.iter().map(|a| (a.name.clone(), a.shape.clone())).collect()
        };
        let (a, b) = (sig(self), sig(other));
        if a != b {
            return Err(Error::shape(format!("{a:?}"), format!("{b:?}")));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            arrays: self
                .arrays
                .iter()
                .map(|a| NamedArray::zeros(a.name.clone(), a.shape.clone()))
                .collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        for a in &mut self.arrays {
            a.data.fill(value);
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn iter_scalars(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrays.iter().flat_map(|a| a.data.iter().copied())
    }

    /// Copies every array except those whose name starts with
    /// `head_prefix`, for initializing from a network trained on another
    /// task. Returns the number of arrays copied.
    pub fn import_except(&mut self, source: &ParamSet, head_prefix: &str) -> Result<usize> {
        let mut copied = 0;
        for dst in &mut self.arrays {
            if dst.name.starts_with(head_prefix) {
                continue;
            }
            let src = source
                .get(&dst.name)
                .ok_or_else(|| Error::Checkpoint(format!("source has no array {:?}", dst.name)))?;
            if src.shape != dst.shape {
                return Err(Error::shape(format!("{}{:?}", dst.name, dst.shape), format!("{:?}", src.shape)));
            }
            dst.data.copy_from_slice(&src.data);
            copied += 1;
        }
        Ok(copied)
    }
}

/// Teacher update `teacher <- alpha * teacher + (1 - alpha) * student`.
pub fn ema_update(teacher: &ParamSet, student: &ParamSet, alpha: f64) -> Result<ParamSet> {
    let mut out = teacher.clone();
    ema_update_in_place(&mut out, student, alpha)?;
    Ok(out)
}

pub fn ema_update_in_place(teacher: &mut ParamSet, student: &ParamSet, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("EMA decay must lie in [0, 1], got {alpha}")));
    }
    teacher.check_compatible(student)?;
    let beta = 1.0 - alpha;
    for (t, s) in teacher.arrays.iter_mut().zip(&student.arrays) {
        for (tv, sv) in t.data.iter_mut().zip(&s.data) {
            *tv = alpha * *tv + beta * sv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ParamSet {
        ParamSet::new(vec![NamedArray {
            name: "w".into(),
            shape: vec![1],
            data: vec![v],
        }])
    }

    #[test]
    fn ema_examples() {
        let teacher = scalar(1.0);
        let student = scalar(0.0);
        assert_eq!(ema_update(&teacher, &student, 1.0).unwrap(), teacher);
        assert_eq!(ema_update(&teacher, &student, 0.0).unwrap(), student);
        let t = ema_update(&teacher, &student, 0.9).unwrap();
        assert!((t.arrays()[0].data[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ema_rejects_mismatched_sets() {
        let other = ParamSet::new(vec![NamedArray::zeros("v", vec![1])]);
        assert!(matches!(ema_update(&scalar(0.0), &other, 0.5), Err(Error::ShapeMismatch { .. })));
        assert!(ema_update(&scalar(0.0), &scalar(1.0), 1.5).is_err());
    }

    #[test]
    fn import_skips_head() {
        let mk = |v: f64| {
            ParamSet::new(vec![
                NamedArray { name: "enc0.weight".into(), shape: vec![2], data: vec![v; 2] },
                NamedArray { name: "head.weight".into(), shape: vec![1], data: vec![v] },
            ])
        };
        let mut dst = mk(0.0);
        assert_eq!(dst.import_except(&mk(3.0), "head.").unwrap(), 1);
        assert_eq!(dst.arrays()[0].data, vec![3.0, 3.0]);
        assert_eq!(dst.arrays()[1].data, vec![0.0]);
    }
}
