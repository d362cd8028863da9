//! One-hidden-layer ReLU perceptron with explicit backpropagation.
//!
//! Parameter layout, in order:
//!
//! | segment | shape                    | group |
//! |---------|--------------------------|-------|
//! | `W1`    | `input_dim × hidden_dim` | body  |
//! | `b1`    | `hidden_dim`             | body  |
//! | `W2`    | `rep_dim × num_classes`  | head  |
//! | `b2`    | `num_classes`            | head  |
//!
//! With `hidden_dim = 0` the body is empty and the representation is the
//! input itself, i.e. a linear-softmax classifier.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy_grad, Layout, Matrix, ParamVector, SegmentGroup};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

/// Output of [`MlpShape::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// Post-ReLU hidden activations (or the inputs for a linear model).
    pub reps: Matrix,
    pub logits: Matrix,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() || inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "batch of {} inputs and {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl MlpShape {
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::Config("input_dim and num_classes must be positive".into()));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            num_classes,
        })
    }

    /// A model without hidden layer (`hidden_dim = 0`).
    pub fn linear(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(input_dim, 0, num_classes)
    }

    #[inline]
    pub fn has_body(&self) -> bool {
        self.hidden_dim > 0
    }

    /// Width of the representation fed to the head.
    #[inline]
    pub fn rep_dim(&self) -> usize {
        if self.has_body() {
            self.hidden_dim
        } else {
            self.input_dim
        }
    }

    pub fn num_params(&self) -> usize {
        let body = if self.has_body() {
            self.input_dim * self.hidden_dim + self.hidden_dim
        } else {
            0
        };
        body + self.rep_dim() * self.num_classes + self.num_classes
    }

    pub fn layout(&self) -> Arc<Layout> {
        let mut segs = Vec::with_capacity(4);
        if self.has_body() {
            segs.push(("W1", self.input_dim * self.hidden_dim, SegmentGroup::Body));
            segs.push(("b1", self.hidden_dim, SegmentGroup::Body));
        }
        segs.push(("W2", self.rep_dim() * self.num_classes, SegmentGroup::Head));
        segs.push(("b2", self.num_classes, SegmentGroup::Head));
        Arc::new(Layout::new(segs).expect("segment names are unique"))
    }

    /// Layout of a standalone head (`Wp`, `bp`), used for auxiliary classifiers.
    pub fn head_layout(&self) -> Arc<Layout> {
        Arc::new(
            Layout::new([
                ("Wp", self.rep_dim() * self.num_classes, SegmentGroup::Head),
                ("bp", self.num_classes, SegmentGroup::Head),
            ])
            .expect("segment names are unique"),
        )
    }

    /// Uniform He-style initialization for weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut p = ParamVector::zeros(self.layout());
        if self.has_body() {
            let lim = (6.0 / self.input_dim as f64).sqrt();
            for w in p.segment_mut("W1").expect("W1") {
                *w = rng.random_range(-lim..lim);
            }
        }
        let lim = (6.0 / (self.rep_dim() + self.num_classes) as f64).sqrt();
        for w in p.segment_mut("W2").expect("W2") {
            *w = rng.random_range(-lim..lim);
        }
        p
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        let expect = if self.has_body() { 4 } else { 2 };
        if params.len() != self.num_params() || params.layout().segments().len() != expect {
            return Err(Error::Layout(format!(
                "parameter vector of {} does not match model with {} parameters",
                params.len(),
                self.num_params()
            )));
        }
        Ok(())
    }

    fn seg<'a>(params: &'a ParamVector, name: &str) -> Result<&'a [f64]> {
        params
            .segment(name)
            .ok_or_else(|| Error::Layout(format!("missing segment `{name}`")))
    }

    /// Representation only.
    pub fn represent(&self, params: &ParamVector, inputs: &Matrix) -> Result<Matrix> {
        self.check_params(params)?;
        if inputs.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "inputs have {} columns, model expects {}",
                inputs.cols(),
                self.input_dim
            )));
        }
        if !self.has_body() {
            return Ok(inputs.clone());
        }
        let mut h = inputs.matmul_slice(Self::seg(params, "W1")?, self.hidden_dim)?;
        h.add_row_vector(Self::seg(params, "b1")?)?;
        for v in h.as_mut_slice() {
            *v = v.max(0.0);
        }
        Ok(h)
    }

    /// Logits of a head (`W`, `b`) applied to representations.
    pub fn head_logits(&self, reps: &Matrix, w: &[f64], b: &[f64]) -> Result<Matrix> {
        let mut z = reps.matmul_slice(w, self.num_classes)?;
        z.add_row_vector(b)?;
        Ok(z)
    }

    pub fn forward(&self, params: &ParamVector, inputs: &Matrix) -> Result<Forward> {
        let reps = self.represent(params, inputs)?;
        let logits = self.head_logits(&reps, Self::seg(params, "W2")?, Self::seg(params, "b2")?)?;
        Ok(Forward { reps, logits })
    }

    /// Gradient of the loss with respect to every parameter, given the
    /// loss gradient at the logits and, optionally, an extra gradient
    /// contribution at the representation.
    pub fn backward_from(
        &self,
        params: &ParamVector,
        inputs: &Matrix,
        fwd: &Forward,
        dlogits: &Matrix,
        drep_extra: Option<&Matrix>,
    ) -> Result<ParamVector> {
        self.check_params(params)?;
        if dlogits.rows() != fwd.reps.rows() || dlogits.cols() != self.num_classes {
            return Err(Error::Shape("logit gradient does not match forward pass".into()));
        }
        let mut grad = ParamVector::zeros(Arc::clone(params.layout()));
        {
            let dw2 = grad.segment_mut("W2").expect("W2");
            fwd.reps.tmatmul_into(dlogits, dw2)?;
        }
        grad.segment_mut("b2")
            .expect("b2")
            .copy_from_slice(&dlogits.column_sums());

        if !self.has_body() {
            return Ok(grad);
        }

        let mut drep = dlogits.matmul_t_slice(Self::seg(params, "W2")?, self.hidden_dim)?;
        if let Some(extra) = drep_extra {
            if extra.rows() != drep.rows() || extra.cols() != drep.cols() {
                return Err(Error::Shape("representation gradient shape mismatch".into()));
            }
            for (d, e) in drep.as_mut_slice().iter_mut().zip(extra.as_slice()) {
                *d += e;
            }
        }
        for (d, &h) in drep.as_mut_slice().iter_mut().zip(fwd.reps.as_slice()) {
            if h <= 0.0 {
                *d = 0.0;
            }
        }
        {
            let dw1 = grad.segment_mut("W1").expect("W1");
            inputs.tmatmul_into(&drep, dw1)?;
        }
        grad.segment_mut("b1")
            .expect("b1")
            .copy_from_slice(&drep.column_sums());
        Ok(grad)
    }

    /// Mean cross-entropy on `batch` and its gradient.
    pub fn loss_and_grad(&self, params: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
        let fwd = self.forward(params, &batch.inputs)?;
        let (loss, dlogits) = cross_entropy_grad(&fwd.logits, &batch.labels)?;
        let grad = self.backward_from(params, &batch.inputs, &fwd, &dlogits, None)?;
        Ok((loss, grad))
    }

    pub fn loss(&self, params: &ParamVector, batch: &Batch) -> Result<f64> {
        let fwd = self.forward(params, &batch.inputs)?;
        super::cross_entropy(&fwd.logits, &batch.labels)
    }

    pub fn predict(&self, params: &ParamVector, inputs: &Matrix) -> Result<Vec<usize>> {
        Ok(self.forward(params, inputs)?.logits.argmax_rows())
    }
}

/// A shape plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub shape: MlpShape,
    pub params: ParamVector,
}

impl MlpModel {
    pub fn new(shape: MlpShape, params: ParamVector) -> Result<Self> {
        shape.check_params(&params)?;
        Ok(Self { shape, params })
    }

    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            shape,
            params: ParamVector::zeros(shape.layout()),
        }
    }

    pub fn init<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Self {
        Self {
            shape,
            params: shape.init(rng),
        }
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Forward> {
        self.shape.forward(&self.params, inputs)
    }

    pub fn backward(&self, batch: &Batch) -> Result<ParamVector> {
        Ok(self.shape.loss_and_grad(&self.params, batch)?.1)
    }
}
