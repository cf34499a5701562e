//! Regularized least-squares objectives and their (sub)gradients.
//!
//! `X` is always the `n × (d+1)` design matrix with the ones column
//! appended, so the bias is the last weight (row) and is penalized like any
//! other entry.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Ix1, Ix2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::{sign_shifted, Objective};

use super::Penalty;

/// Row norms below this are floored before inversion in [`sigma_rows`].
pub const ROW_NORM_FLOOR: f64 = 1e-7;

fn check_vector<F>(x: &ArrayView2<F>, y: &ArrayView1<F>, w: &ArrayView1<F>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::shape(
            "targets vs design rows",
            x.nrows(),
            y.len(),
        ));
    }
    if w.len() != x.ncols() {
        return Err(Error::shape(
            "weights vs design columns",
            format!("{} (design {}x{})", x.ncols(), x.nrows(), x.ncols()),
            w.len(),
        ));
    }
    Ok(())
}

fn check_matrix<F>(x: &ArrayView2<F>, y: &ArrayView2<F>, w: &ArrayView2<F>) -> Result<()> {
    if y.nrows() != x.nrows() {
        return Err(Error::shape(
            "targets vs design rows",
            format!("{}x{}", x.nrows(), w.ncols()),
            format!("{}x{}", y.nrows(), y.ncols()),
        ));
    }
    if w.nrows() != x.ncols() || w.ncols() != y.ncols() {
        return Err(Error::shape(
            "weights",
            format!("{}x{}", x.ncols(), y.ncols()),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    Ok(())
}

fn l1<'a, F: Scalar>(w: impl IntoIterator<Item = &'a F>) -> F {
    w.into_iter().fold(F::zero(), |acc, v| acc + v.abs())
}

/// `‖Y − Xw‖² + λ‖w‖₁`
pub fn l1ls_objective<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    w: ArrayView1<F>,
    lambda: F,
) -> Result<F> {
    check_vector(&x, &y, &w)?;
    Ok(vector_value(&x, &y, &w, lambda))
}

/// `−2Xᵀ(Y − Xw) + λ·sign(w)`, with `sign(0) = +1`.
pub fn l1ls_gradient<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    w: ArrayView1<F>,
    lambda: F,
) -> Result<Array1<F>> {
    check_vector(&x, &y, &w)?;
    Ok(vector_gradient(&x, &y, &w, lambda))
}

fn vector_value<F: Scalar>(x: &ArrayView2<F>, y: &ArrayView1<F>, w: &ArrayView1<F>, lambda: F) -> F {
    let r = y - &x.dot(w);
    r.dot(&r) + lambda * l1(w)
}

fn vector_gradient<F: Scalar>(
    x: &ArrayView2<F>,
    y: &ArrayView1<F>,
    w: &ArrayView1<F>,
    lambda: F,
) -> Array1<F> {
    let r = y - &x.dot(w);
    let two = F::lit(2.0);
    let mut g = x.t().dot(&r);
    g.zip_mut_with(w, |gj, &wj| *gj = -two * *gj + lambda * sign_shifted(wj));
    g
}

/// `Σᵢ ‖row i of W‖₂`
pub fn l21_norm<F: Scalar>(w: ArrayView2<F>) -> F {
    w.outer_iter()
        .map(|row| row.dot(&row).sqrt())
        .fold(F::zero(), |a, b| a + b)
}

/// Diagonal of Σ: `1 / max(‖row i‖₂, eps)`.
pub fn sigma_rows<F: Scalar>(w: ArrayView2<F>, eps: F) -> Array1<F> {
    w.outer_iter()
        .map(|row| F::one() / row.dot(&row).sqrt().max(eps))
        .collect()
}

/// Multi-class objective under either penalty.
pub fn penalized_objective<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
    penalty: Penalty,
) -> Result<F> {
    check_matrix(&x, &y, &w)?;
    Ok(matrix_value(&x, &y, &w, lambda, penalty))
}

pub fn penalized_gradient<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
    penalty: Penalty,
    eps: F,
) -> Result<Array2<F>> {
    check_matrix(&x, &y, &w)?;
    Ok(matrix_gradient(&x, &y, &w, lambda, penalty, eps))
}

/// `‖Y − XW‖²_F + λ·Σᵢⱼ|Wᵢⱼ|`
pub fn mcl1ls_objective<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
) -> Result<F> {
    penalized_objective(x, y, w, lambda, Penalty::L1)
}

/// `−2Xᵀ(Y − XW) + λ·sign(W)`
pub fn mcl1ls_gradient<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
) -> Result<Array2<F>> {
    penalized_gradient(x, y, w, lambda, Penalty::L1, F::lit(ROW_NORM_FLOOR))
}

/// `‖Y − XW‖²_F + λ·‖W‖₂,₁`
pub fn mcl21ls_objective<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
) -> Result<F> {
    penalized_objective(x, y, w, lambda, Penalty::L21)
}

/// `−2Xᵀ(Y − XW) + λ·ΣW` with `Σ = diag(sigma_rows(W))`.
pub fn mcl21ls_gradient<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    w: ArrayView2<F>,
    lambda: F,
) -> Result<Array2<F>> {
    penalized_gradient(x, y, w, lambda, Penalty::L21, F::lit(ROW_NORM_FLOOR))
}

fn matrix_value<F: Scalar>(
    x: &ArrayView2<F>,
    y: &ArrayView2<F>,
    w: &ArrayView2<F>,
    lambda: F,
    penalty: Penalty,
) -> F {
    let r = y - &x.dot(w);
    let loss = r.iter().fold(F::zero(), |a, &v| a + v * v);
    let reg = match penalty {
        Penalty::L1 => l1(w),
        Penalty::L21 => l21_norm(w.view()),
    };
    loss + lambda * reg
}

fn matrix_gradient<F: Scalar>(
    x: &ArrayView2<F>,
    y: &ArrayView2<F>,
    w: &ArrayView2<F>,
    lambda: F,
    penalty: Penalty,
    eps: F,
) -> Array2<F> {
    add_penalty_gradient(loss_gradient(x, y, w), w, lambda, penalty, eps)
}

fn loss_gradient<F: Scalar>(x: &ArrayView2<F>, y: &ArrayView2<F>, w: &ArrayView2<F>) -> Array2<F> {
    let r = y - &x.dot(w);
    let two = F::lit(2.0);
    x.t().dot(&r).mapv(|v| -two * v)
}

fn add_penalty_gradient<F: Scalar>(
    mut g: Array2<F>,
    w: &ArrayView2<F>,
    lambda: F,
    penalty: Penalty,
    eps: F,
) -> Array2<F> {
    match penalty {
        Penalty::L1 => g.zip_mut_with(w, |gij, &wij| *gij = *gij + lambda * sign_shifted(wij)),
        Penalty::L21 => {
            let sigma = sigma_rows(w.view(), eps);
            for ((mut grow, wrow), s) in g.axis_iter_mut(Axis(0)).zip(w.outer_iter()).zip(sigma) {
                grow.zip_mut_with(&wrow, |gij, &wij| *gij = *gij + lambda * s * wij);
            }
        }
    }
    g
}

/// `XᵀX`, `XᵀY` and `‖Y‖²`, used when rows outnumber columns. The loss is
/// `‖Y‖² − 2⟨W, XᵀY⟩ + ⟨W, XᵀXW⟩`, accumulated in f64 so f32 fits do not
/// lose the small residuals near convergence to cancellation.
struct Gram<F, T> {
    xtx: Array2<F>,
    xty: T,
    xtx64: Array2<f64>,
    xty64: Array2<f64>,
    yty: f64,
}

fn gram<F: Scalar, T>(x: &ArrayView2<F>, y: ArrayView2<F>, xty: T) -> Option<Gram<F, T>> {
    if x.nrows() <= x.ncols() {
        return None;
    }
    let x64 = x.mapv(|v| v.as_f64());
    let y64 = y.mapv(|v| v.as_f64());
    Some(Gram {
        xtx: x.t().dot(x),
        xty,
        xtx64: x64.t().dot(&x64),
        xty64: x64.t().dot(&y64),
        yty: y64.iter().map(|v| v * v).sum(),
    })
}

impl<F: Scalar, T> Gram<F, T> {
    fn loss<'w>(&self, w: ArrayView2<'w, F>) -> F {
        let w64 = w.mapv(|v| v.as_f64());
        let quad = (&w64 * &self.xtx64.dot(&w64)).sum();
        let cross = (&w64 * &self.xty64).sum();
        F::lit((self.yty - 2.0 * cross + quad).max(0.0))
    }
}

/// Binary objective bound to one batch, for the solver.
pub struct VectorObjective<'a, F> {
    x: ArrayView2<'a, F>,
    y: ArrayView1<'a, F>,
    lambda: F,
    gram: Option<Gram<F, Array1<F>>>,
}

impl<'a, F: Scalar> VectorObjective<'a, F> {
    pub fn new(x: ArrayView2<'a, F>, y: ArrayView1<'a, F>, lambda: F) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::shape("targets vs design rows", x.nrows(), y.len()));
        }
        let gram = gram(&x, y.insert_axis(Axis(1)), x.t().dot(&y));
        Ok(Self { x, y, lambda, gram })
    }
}

impl<F: Scalar> Objective<F, Ix1> for VectorObjective<'_, F> {
    fn value(&self, w: &Array1<F>) -> F {
        match &self.gram {
            Some(gm) => gm.loss(w.view().insert_axis(Axis(1))) + self.lambda * l1(w),
            None => vector_value(&self.x, &self.y, &w.view(), self.lambda),
        }
    }
    fn gradient(&self, w: &Array1<F>) -> Array1<F> {
        let Some(gm) = &self.gram else {
            return vector_gradient(&self.x, &self.y, &w.view(), self.lambda);
        };
        let two = F::lit(2.0);
        let mut g = gm.xtx.dot(w) - &gm.xty;
        g.zip_mut_with(w, |gj, &wj| *gj = two * *gj + self.lambda * sign_shifted(wj));
        g
    }
}

/// Multi-class objective bound to one batch, for the solver.
pub struct MatrixObjective<'a, F> {
    x: ArrayView2<'a, F>,
    y: ArrayView2<'a, F>,
    lambda: F,
    penalty: Penalty,
    eps: F,
    gram: Option<Gram<F, Array2<F>>>,
}

impl<'a, F: Scalar> MatrixObjective<'a, F> {
    pub fn new(
        x: ArrayView2<'a, F>,
        y: ArrayView2<'a, F>,
        lambda: F,
        penalty: Penalty,
    ) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(Error::shape("targets vs design rows", x.nrows(), y.nrows()));
        }
        let gram = gram(&x, y, x.t().dot(&y));
        Ok(Self {
            x,
            y,
            lambda,
            penalty,
            eps: F::lit(ROW_NORM_FLOOR),
            gram,
        })
    }
}

impl<F: Scalar> Objective<F, Ix2> for MatrixObjective<'_, F> {
    fn value(&self, w: &Array2<F>) -> F {
        let Some(gm) = &self.gram else {
            return matrix_value(&self.x, &self.y, &w.view(), self.lambda, self.penalty);
        };
        let reg = match self.penalty {
            Penalty::L1 => l1(w),
            Penalty::L21 => l21_norm(w.view()),
        };
        gm.loss(w.view()) + self.lambda * reg
    }
    fn gradient(&self, w: &Array2<F>) -> Array2<F> {
        let loss = match &self.gram {
            Some(gm) => (gm.xtx.dot(w) - &gm.xty).mapv(|v| F::lit(2.0) * v),
            None => loss_gradient(&self.x, &self.y, &w.view()),
        };
        add_penalty_gradient(loss, &w.view(), self.lambda, self.penalty, self.eps)
    }
}
