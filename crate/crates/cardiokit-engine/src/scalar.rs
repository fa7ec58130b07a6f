//! Scalar abstraction: the numeric core is generic over f32/f64 through
//! num-traits, with the dense matmul kernel dispatched per type.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Element type for tensors and models. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Send + Sync + 'static + std::fmt::Debug + std::fmt::Display
{
    fn fromf(x: f64) -> Self;
    fn tof(self) -> f64;

    /// Dense row-major GEMM: `c = alpha * a(m x k) * b(k x n) + beta * c`.
    ///
    /// # Safety
    /// Pointers must reference buffers of at least m*k, k*n and m*n elements.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn fromf(x: f64) -> Self {
        x as f32
    }

    fn tof(self) -> f64 {
        f64::from(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn fromf(x: f64) -> Self {
        x
    }

    fn tof(self) -> f64 {
        self
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}
