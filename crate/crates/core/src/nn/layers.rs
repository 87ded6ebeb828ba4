use rand::Rng;

use super::{Param, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer: `y = x W^T + b`, with `W` of shape out x in.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Option<Param>,
    input: Option<Tensor>,
}

impl Linear {
    pub fn new(weight: Param, bias: Option<Param>) -> Self {
        Self {
            weight,
            bias,
            input: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, bias: bool, rng: &mut R) -> Self {
        Self::new(Param::glorot(c_out, c_in, rng), bias.then(|| Param::zeros(1, c_out)))
    }

    pub fn c_in(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn c_out(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.c_in() {
            return Err(Error::ShapeMismatch(format!(
                "linear expects {} channels, got {}",
                self.c_in(),
                x.cols()
            )));
        }
        let mut y = x.matmul_nt(&self.weight.value);
        if let Some(b) = &self.bias {
            y.add_row(b.value.data());
        }
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or(Error::StateMissing("linear"))?;
        dy.expect_shape(x.rows(), self.c_out(), "linear upstream gradient")?;
        dy.matmul_tn_into(&x, &mut self.weight.grad);
        if let Some(b) = &mut self.bias {
            dy.sum_rows_into(b.grad.data_mut());
        }
        Ok(dy.matmul(&self.weight.value))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.weight];
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }
}

/// ELU with alpha = 1.
pub fn elu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v <= 0.0 {
            *v = v.exp_m1();
        }
    });
    y
}

pub fn elu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d *= v.exp();
        }
    }
    dx
}

#[derive(Clone, Debug, Default)]
pub struct Elu {
    input: Option<Tensor>,
}

impl Elu {
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        elu(x)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or(Error::StateMissing("elu"))?;
        Ok(elu_backward(&x, dy))
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` in training,
/// identity in evaluation.
#[derive(Clone, Debug)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor, train: bool, rng: &mut R) -> Tensor {
        if !train || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..x.data().len())
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        let mut y = x.clone();
        for (v, m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        match self.mask.take() {
            Some(mask) => {
                let mut dx = dy.clone();
                for (v, m) in dx.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                dx
            }
            None => dy.clone(),
        }
    }
}

/// Primal-graph control layer: `y_i = U x_i + W mean_{j ~ i} x_j + b`.
#[derive(Clone, Debug)]
pub struct MeanConv {
    pub u: Param,
    pub w: Param,
    pub bias: Option<Param>,
    cache: Option<(Tensor, Tensor)>,
}

impl MeanConv {
    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            u: Param::glorot(c_out, c_in, rng),
            w: Param::glorot(c_out, c_in, rng),
            bias: bias.then(|| Param::zeros(1, c_out)),
            cache: None,
        }
    }

    pub fn c_in(&self) -> usize {
        self.u.value.cols()
    }

    fn mean(x: &Tensor, adj: &[Vec<usize>]) -> Tensor {
        let mut m = Tensor::zeros(x.rows(), x.cols());
        for (i, nb) in adj.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let w = 1.0 / nb.len() as f64;
            let o = m.row_mut(i);
            for &j in nb {
                for (a, b) in o.iter_mut().zip(x.row(j)) {
                    *a += w * b;
                }
            }
        }
        m
    }

    pub fn forward(&mut self, x: &Tensor, adj: &[Vec<usize>]) -> Result<Tensor> {
        if x.cols() != self.c_in() || x.rows() != adj.len() {
            return Err(Error::ShapeMismatch("mean conv input".into()));
        }
        let m = Self::mean(x, adj);
        let mut y = x.matmul_nt(&self.u.value);
        y.add_assign(&m.matmul_nt(&self.w.value));
        if let Some(b) = &self.bias {
            y.add_row(b.value.data());
        }
        self.cache = Some((x.clone(), m));
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor, adj: &[Vec<usize>]) -> Result<Tensor> {
        let (x, m) = self.cache.take().ok_or(Error::StateMissing("meanconv"))?;
        dy.matmul_tn_into(&x, &mut self.u.grad);
        dy.matmul_tn_into(&m, &mut self.w.grad);
        if let Some(b) = &mut self.bias {
            dy.sum_rows_into(b.grad.data_mut());
        }
        let mut dx = dy.matmul(&self.u.value);
        let dm = dy.matmul(&self.w.value);
        for (i, nb) in adj.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let w = 1.0 / nb.len() as f64;
            let g = dm.row(i).to_vec();
            for &j in nb {
                for (a, b) in dx.row_mut(j).iter_mut().zip(&g) {
                    *a += w * b;
                }
            }
        }
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.u, &mut self.w];
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }
}
