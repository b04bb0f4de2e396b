//! Plain `h x w x c` tensor container shared by the oracles and the replay
//! paths. It carries data only, no layer semantics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: [usize; 3],
    /// Row-major `(h, w, c)` with `c` fastest.
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: [usize; 3]) -> Self {
        DenseTensor {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!("{} values for dims {dims:?}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("tensor contains non-finite values".into()));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for h in 0..dims[0] {
            for w in 0..dims[1] {
                for c in 0..dims[2] {
                    data.push(f(h, w, c));
                }
            }
        }
        DenseTensor { dims, data }
    }

    pub fn index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.dims[1] + w) * self.dims[2] + c
    }

    pub fn get(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[self.index(h, w, c)]
    }

    pub fn set(&mut self, h: usize, w: usize, c: usize, v: f64) {
        let i = self.index(h, w, c);
        self.data[i] = v;
    }

    /// Value at signed coordinates, zero outside the tensor.
    pub fn get_padded(&self, h: isize, w: isize, c: usize) -> f64 {
        if h < 0 || w < 0 || h as usize >= self.dims[0] || w as usize >= self.dims[1] {
            0.0
        } else {
            self.get(h as usize, w as usize, c)
        }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
