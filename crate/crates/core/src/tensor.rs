//! Axis-wise maps on dense tensors stored first axis fastest.

/// Applies `f` to every pencil along `axis`, changing that axis' extent
/// from `ext[axis]` to `out_len`.
pub(crate) fn map_axis<F>(input: &[f64], ext: &[usize], axis: usize, out_len: usize, f: F) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let stride: usize = ext[..axis].iter().product();
    let outer: usize = ext[axis + 1..].iter().product();
    let in_len = ext[axis];
    debug_assert_eq!(input.len(), stride * in_len * outer);
    let mut out = vec![0.0; stride * out_len * outer];
    let mut line = vec![0.0; in_len];
    let mut res = vec![0.0; out_len];
    for o in 0..outer {
        for s in 0..stride {
            let ibase = s + stride * in_len * o;
            let obase = s + stride * out_len * o;
            if stride == 1 {
                f(&input[ibase..ibase + in_len], &mut out[obase..obase + out_len]);
                continue;
            }
            for (k, v) in line.iter_mut().enumerate() {
                *v = input[ibase + k * stride];
            }
            f(&line, &mut res);
            for (k, v) in res.iter().enumerate() {
                out[obase + k * stride] = *v;
            }
        }
    }
    out
}
