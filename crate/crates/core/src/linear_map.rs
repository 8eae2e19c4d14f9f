use crate::matrix::DenseMatrix;

/// A linear action on matrices, applied column by column, together with its
/// adjoint.
///
/// Callers check dimensions before invoking `forward`/`adjoint`; the
/// implementations may panic on mismatched inputs.
pub trait LinearMap {
    /// Row count of the matrices `forward` accepts.
    fn input_dim(&self) -> usize;

    /// Row count of the matrices `forward` returns.
    fn output_dim(&self) -> usize;

    fn forward(&self, x: &DenseMatrix) -> DenseMatrix;

    fn adjoint(&self, y: &DenseMatrix) -> DenseMatrix;
}

impl LinearMap for DenseMatrix {
    fn input_dim(&self) -> usize {
        self.cols()
    }

    fn output_dim(&self) -> usize {
        self.rows()
    }

    fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        self.matmul(x)
    }

    fn adjoint(&self, y: &DenseMatrix) -> DenseMatrix {
        self.tr_matmul(y)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        (**self).forward(x)
    }

    fn adjoint(&self, y: &DenseMatrix) -> DenseMatrix {
        (**self).adjoint(y)
    }
}

/// `outer ∘ inner`, evaluated lazily.
#[derive(Clone, Copy, Debug)]
pub struct Composed<A, B> {
    pub outer: A,
    pub inner: B,
}

impl<A: LinearMap, B: LinearMap> Composed<A, B> {
    pub fn new(outer: A, inner: B) -> Self {
        assert_eq!(outer.input_dim(), inner.output_dim(), "Composed: inner/outer mismatch");
        Composed { outer, inner }
    }
}

impl<A: LinearMap, B: LinearMap> LinearMap for Composed<A, B> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.outer.output_dim()
    }

    fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        self.outer.forward(&self.inner.forward(x))
    }

    fn adjoint(&self, y: &DenseMatrix) -> DenseMatrix {
        self.inner.adjoint(&self.outer.adjoint(y))
    }
}

/// `⟨forward(x), y⟩` and `⟨x, adjoint(y)⟩`; equal up to rounding for a correct adjoint.
pub fn dot_test<M: LinearMap + ?Sized>(map: &M, x: &DenseMatrix, y: &DenseMatrix) -> (f64, f64) {
    (map.forward(x).dot(y), x.dot(&map.adjoint(y)))
}
