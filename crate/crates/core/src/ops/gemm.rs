/// `c = a · b + beta · c` for row-major operands with explicit row strides.
///
/// `a` is `m × k`, `b` is `k × n`, `c` is `m × n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_row_stride: usize,
    b: &[f32],
    b_row_stride: usize,
    beta: f32,
    c: &mut [f32],
    c_row_stride: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= (m - 1) * a_row_stride + k);
    assert!(k == 0 || b.len() >= (k - 1) * b_row_stride + n);
    assert!(c.len() >= (m - 1) * c_row_stride + n);
    // Safety: the asserts above bound every element the kernel touches for
    // the given dimensions and strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_row_stride as isize,
            1,
            b.as_ptr(),
            b_row_stride as isize,
            1,
            beta,
            c.as_mut_ptr(),
            c_row_stride as isize,
            1,
        );
    }
}
