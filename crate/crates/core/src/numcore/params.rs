use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which side of the representation/classifier split a segment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentGroup {
    Body,
    Head,
}

impl SegmentGroup {
    pub fn other(self) -> Self {
        match self {
            SegmentGroup::Body => SegmentGroup::Head,
            SegmentGroup::Head => SegmentGroup::Body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub group: SegmentGroup,
}

impl Segment {
    #[inline]
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Ordered, contiguous, non-overlapping named segments covering a flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    total: usize,
}

impl Layout {
    pub fn new<S: Into<String>>(specs: impl IntoIterator<Item = (S, usize, SegmentGroup)>) -> Result<Self> {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut seen = BTreeSet::new();
        for (name, len, group) in specs {
            let name = name.into();
            if !seen.insert(name.clone()) {
                return Err(Error::Layout(format!("duplicate segment name `{name}`")));
            }
            segments.push(Segment {
                name,
                offset,
                len,
                group,
            });
            offset += len;
        }
        Ok(Self {
            segments,
            total: offset,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Number of scalars in all segments of `group`.
    pub fn group_len(&self, group: SegmentGroup) -> usize {
        self.segments
            .iter()
            .filter(|s| s.group == group)
            .map(|s| s.len)
            .sum()
    }

    pub fn group_ranges(&self, group: SegmentGroup) -> impl Iterator<Item = Range<usize>> + '_ {
        self.segments
            .iter()
            .filter(move |s| s.group == group)
            .map(Segment::range)
    }
}

/// A set of segments, selected by name or by group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentMask {
    Names(BTreeSet<String>),
    Group(SegmentGroup),
}

impl SegmentMask {
    pub fn names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        SegmentMask::Names(names.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, seg: &Segment) -> bool {
        match self {
            SegmentMask::Names(n) => n.contains(&seg.name),
            SegmentMask::Group(g) => seg.group == *g,
        }
    }
}

/// Flat model parameters with a shared segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.len()];
        Self { layout, data }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{} values for a layout of {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, data })
    }

    #[inline]
    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }

    pub fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Layout(format!(
                "vectors of {} and {} parameters have different segment layouts",
                self.len(),
                other.len()
            )))
        }
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.segment(name).map(|s| &self.data[s.range()])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.segment(name)?.range();
        Some(&mut self.data[range])
    }

    /// Concatenation of every segment in `group`, in layout order.
    pub fn group_values(&self, group: SegmentGroup) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout.group_len(group));
        for r in self.layout.group_ranges(group) {
            out.extend_from_slice(&self.data[r]);
        }
        out
    }

    /// Inverse of [`group_values`](Self::group_values).
    pub fn set_group_values(&mut self, group: SegmentGroup, values: &[f64]) -> Result<()> {
        if values.len() != self.layout.group_len(group) {
            return Err(Error::Layout(format!(
                "{} values for a {:?} group of {}",
                values.len(),
                group,
                self.layout.group_len(group)
            )));
        }
        let layout = Arc::clone(&self.layout);
        let mut cursor = 0;
        for r in layout.group_ranges(group) {
            let n = r.len();
            self.data[r].copy_from_slice(&values[cursor..cursor + n]);
            cursor += n;
        }
        Ok(())
    }

    /// Copies every segment of `group` from `src`.
    pub fn copy_group_from(&mut self, src: &ParamVector, group: SegmentGroup) -> Result<()> {
        self.check_layout(src)?;
        let layout = Arc::clone(&self.layout);
        for r in layout.group_ranges(group) {
            self.data[r.clone()].copy_from_slice(&src.data[r]);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// In place `self += a · x`.
    pub fn axpy_in_place(&mut self, a: f64, x: &ParamVector) -> Result<()> {
        self.check_layout(x)?;
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, a: f64) {
        for s in &mut self.data {
            *s *= a;
        }
    }

    /// `self − other`, layout-checked.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_layout(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(ParamVector {
            layout: Arc::clone(&self.layout),
            data,
        })
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_layout(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ParamVector {
            layout: Arc::clone(&self.layout),
            data,
        })
    }
}

/// `y + a · x`.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    let mut out = y.clone();
    out.axpy_in_place(a, x)?;
    Ok(out)
}

pub fn scale(a: f64, x: &ParamVector) -> ParamVector {
    let mut out = x.clone();
    out.scale_in_place(a);
    out
}

pub fn dot(x: &ParamVector, y: &ParamVector) -> Result<f64> {
    x.check_layout(y)?;
    Ok(x.data.iter().zip(&y.data).map(|(a, b)| a * b).sum())
}

pub fn sq_norm(x: &ParamVector) -> f64 {
    x.data.iter().map(|v| v * v).sum()
}

pub fn hadamard(x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    x.check_layout(y)?;
    let data = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
    Ok(ParamVector {
        layout: Arc::clone(&x.layout),
        data,
    })
}

pub fn clip01(x: &ParamVector) -> ParamVector {
    let data = x.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    ParamVector {
        layout: Arc::clone(&x.layout),
        data,
    }
}

/// One SGD step, `p − lr·g`, leaving every segment selected by `frozen` untouched.
pub fn sgd_step(
    params: &ParamVector,
    grad: &ParamVector,
    lr: f64,
    frozen: Option<&SegmentMask>,
) -> Result<ParamVector> {
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grad, lr, frozen)?;
    Ok(out)
}

/// In-place form of [`sgd_step`].
pub fn sgd_step_in_place(
    params: &mut ParamVector,
    grad: &ParamVector,
    lr: f64,
    frozen: Option<&SegmentMask>,
) -> Result<()> {
    params.check_layout(grad)?;
    let layout = Arc::clone(&params.layout);
    for seg in layout.segments() {
        if frozen.is_some_and(|m| m.contains(seg)) {
            continue;
        }
        let r = seg.range();
        for (p, &g) in params.data[r.clone()].iter_mut().zip(&grad.data[r]) {
            *p -= lr * g;
        }
    }
    Ok(())
}
