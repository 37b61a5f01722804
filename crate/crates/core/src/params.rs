//! Flat parameter vectors with a named segment layout.
//!
//! All outer-loop arithmetic (outer gradients, momentum, biased
//! initialization) runs on [`ParamVector`]s sharing one [`Layout`].

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, contiguous, non-overlapping segments.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub fn new() -> Self {
        Layout::default()
    }

    /// Appends a segment directly after the last one and returns its range.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>) -> Range<usize> {
        let offset = self.len();
        let seg = Segment {
            name: name.into(),
            offset,
            shape,
        };
        let r = seg.range();
        self.segments.push(seg);
        r
    }

    /// Rebuilds a layout from stored segments, checking contiguity.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let mut expected = 0;
        for s in &segments {
            if s.offset != expected {
                return Err(Error::Format(format!(
                    "segment `{}` at offset {} but expected {}",
                    s.name, s.offset, expected
                )));
            }
            expected += s.len();
        }
        Ok(Layout { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Range spanning every segment whose name starts with `prefix`.
    pub fn prefix_range(&self, prefix: &str) -> Option<Range<usize>> {
        let mut it = self.segments.iter().filter(|s| s.name.starts_with(prefix));
        let first = it.next()?;
        let last = it.last().unwrap_or(first);
        Some(first.offset..last.offset + last.len())
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}@{}{:?}", s.name, s.offset, s.shape)?;
        }
        write!(f, "] (len {})", self.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.len()];
        ParamVector { layout, data }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension {
                context: "ParamVector::from_vec",
                expected: layout.len(),
                got: data.len(),
            });
        }
        Ok(ParamVector { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                left: self.layout.to_string(),
                right: other.layout.to_string(),
            })
        }
    }

    /// `a * x + y`, leaving both inputs untouched.
    pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
        x.check_layout(y)?;
        let data = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(xi, yi)| a * xi + yi)
            .collect();
        Ok(ParamVector {
            layout: y.layout.clone(),
            data,
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_layout(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(ParamVector {
            layout: self.layout.clone(),
            data,
        })
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_layout(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ParamVector {
            layout: self.layout.clone(),
            data,
        })
    }

    pub fn scale(&self, a: f64) -> ParamVector {
        ParamVector {
            layout: self.layout.clone(),
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.segment(name).map(|s| &self.data[s.range()])
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0` and comparing NaN payloads.
    pub fn bit_eq(&self, other: &ParamVector) -> bool {
        self.layout == other.layout
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}
