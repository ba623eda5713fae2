use super::NnError;

/// Dense row-major tensor of rank 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        assert!(!shape.is_empty() && shape.len() <= 2, "rank must be 1 or 2, got {}", shape.len());
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor, NnError> {
        if shape.is_empty() || shape.len() > 2 || shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Shape(format!("{} values do not fit shape {shape:?}", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn vector(data: Vec<f64>) -> Tensor {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Appends zero rows to a matrix.
    pub fn grow_rows(&mut self, extra: usize) {
        assert_eq!(self.shape.len(), 2, "only matrices grow rows");
        self.shape[0] += extra;
        self.data.resize(self.shape[0] * self.shape[1], 0.0);
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn check_finite(&self, what: &str) -> Result<(), NnError> {
        check_finite(&self.data, what)
    }
}

pub fn check_finite(values: &[f64], what: &str) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(what.to_string()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w · x` for a matrix `w`.
pub fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.cols(), x.len());
    (0..w.rows()).map(|i| dot(w.row(i), x)).collect()
}

/// `out += wᵀ · dy`.
pub fn matvec_t_acc(w: &Tensor, dy: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.rows(), dy.len());
    for (i, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, w.row(i), out);
        }
    }
}

/// `g += dy · xᵀ`.
pub fn outer_acc(g: &mut Tensor, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(g.rows(), dy.len());
    for (i, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(d, x, g.row_mut(i));
        }
    }
}

/// `y += a · x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn add_into(x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}
