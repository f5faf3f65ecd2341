use std::ops::Range;

use crate::error::{dimension, Result};

/// Named parameter groups of a layer, in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldGroup {
    Kernels,
    Biases,
    /// Bell or sigmoid widths, stored as `log sigma`.
    Widths,
    HeadWeights,
    HeadBias,
}

impl FieldGroup {
    pub fn label(self) -> &'static str {
        match self {
            FieldGroup::Kernels => "K",
            FieldGroup::Biases => "b",
            FieldGroup::Widths => "sigma",
            FieldGroup::HeadWeights => "A",
            FieldGroup::HeadBias => "A_bias",
        }
    }
}

/// Maps slices of a flat vector back to layer fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    groups: Vec<(FieldGroup, Range<usize>)>,
}

impl Layout {
    pub(crate) fn from_sizes(sizes: &[(FieldGroup, usize)]) -> Self {
        let mut start = 0;
        let groups = sizes
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|&(g, n)| {
                let r = start..start + n;
                start += n;
                (g, r)
            })
            .collect();
        Self { groups }
    }

    pub fn len(&self) -> usize {
        self.groups.last().map_or(0, |(_, r)| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, group: FieldGroup) -> Option<Range<usize>> {
        self.groups.iter().find(|(g, _)| *g == group).map(|(_, r)| r.clone())
    }

    pub fn groups(&self) -> impl Iterator<Item = (FieldGroup, Range<usize>)> + '_ {
        self.groups.iter().cloned()
    }
}

/// Flat parameter (or gradient) values with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

/// Gradients share the parameter layout.
pub type GradVector = ParamVector;

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        Self { values: vec![0.0; layout.len()], layout }
    }

    pub fn group(&self, group: FieldGroup) -> &[f64] {
        match self.layout.range(group) {
            Some(r) => &self.values[r],
            None => &[],
        }
    }

    pub fn group_mut(&mut self, group: FieldGroup) -> &mut [f64] {
        match self.layout.range(group) {
            Some(r) => &mut self.values[r],
            None => &mut [],
        }
    }

    /// `self += factor * other`; layouts must agree.
    pub fn add_scaled(&mut self, other: &ParamVector, factor: f64) -> Result<()> {
        if self.layout != other.layout {
            return Err(dimension("parameter layouts differ"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}
