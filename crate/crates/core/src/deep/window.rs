//! Sliding input windows over a feature matrix.
//!
//! The window for row `t` covers rows `t-L+1..=t`; positions before the
//! first row repeat row 0.

use ndarray::{Array2, ArrayView2};

/// Row order of a flattened `B × L × d` batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Row `t * B + b`: one contiguous `B × d` block per time step.
    TimeMajor,
    /// Row `b * L + t`: one contiguous `L × d` block per sample.
    BatchMajor,
}

/// Source row for position `j` of the window ending at `t`.
pub fn window_row(t: usize, j: usize, len: usize) -> usize {
    (t + j + 1).saturating_sub(len)
}

pub fn gather_windows(x: ArrayView2<f64>, ends: &[usize], len: usize, layout: Layout) -> Array2<f64> {
    let (b, d) = (ends.len(), x.ncols());
    let mut out = Array2::zeros((b * len, d));
    for (bi, &t) in ends.iter().enumerate() {
        for j in 0..len {
            let dst = match layout {
                Layout::TimeMajor => j * b + bi,
                Layout::BatchMajor => bi * len + j,
            };
            out.row_mut(dst).assign(&x.row(window_row(t, j, len)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn edge_padding_and_layouts() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let bm = gather_windows(x.view(), &[0, 3], 3, Layout::BatchMajor);
        assert_eq!(bm.column(0).to_vec(), vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        let tm = gather_windows(x.view(), &[0, 3], 3, Layout::TimeMajor);
        assert_eq!(tm.column(0).to_vec(), vec![0.0, 1.0, 0.0, 2.0, 0.0, 3.0]);
    }
}
