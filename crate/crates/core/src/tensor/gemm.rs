//! Bounds-checked wrappers over `matrixmultiply`.

fn span(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! gemm_impl {
    ($name:ident, $t:ty, $kernel:path) => {
        #[allow(clippy::too_many_arguments)]
        pub(super) fn $name(
            m: usize,
            k: usize,
            n: usize,
            alpha: $t,
            a: (&[$t], usize, usize),
            b: (&[$t], usize, usize),
            beta: $t,
            c: (&mut [$t], usize, usize),
        ) {
            let (a, rsa, csa) = a;
            let (b, rsb, csb) = b;
            let (c, rsc, csc) = c;
            assert!(span(m, k, rsa, csa) <= a.len(), "gemm: lhs out of bounds");
            assert!(span(k, n, rsb, csb) <= b.len(), "gemm: rhs out of bounds");
            assert!(span(m, n, rsc, csc) <= c.len(), "gemm: output out of bounds");
            // SAFETY: every element addressed by the strides lies inside the
            // slices (checked above) and `c` is uniquely borrowed.
            unsafe {
                $kernel(
                    m,
                    k,
                    n,
                    alpha,
                    a.as_ptr(),
                    rsa as isize,
                    csa as isize,
                    b.as_ptr(),
                    rsb as isize,
                    csb as isize,
                    beta,
                    c.as_mut_ptr(),
                    rsc as isize,
                    csc as isize,
                )
            }
        }
    };
}

gemm_impl!(sgemm, f32, matrixmultiply::sgemm);
gemm_impl!(dgemm, f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product_with_transposed_rhs() {
        // a: 2×3, b stored as 2×3 and read transposed (3×2)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, -1.0, 2.0, 1.0, 0.0];
        let mut c = [0.0f64; 4];
        dgemm(2, 3, 2, 1.0, (&a, 3, 1), (&b, 1, 3), 0.0, (&mut c, 2, 1));
        assert_eq!(c, [-2.0, 4.0, -2.0, 13.0]);
    }
}
