//! Supervised window generation: `input_width` consecutive steps predict
//! the final `label_width` steps of a window shifted by `shift`.

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("series too short: {n} rows < total window {total}")]
    TooShort { n: usize, total: usize },
    #[error("invalid window spec: {0}")]
    BadSpec(String),
    #[error("target column {col} out of range for {ncols} columns")]
    BadTarget { col: usize, ncols: usize },
}

/// Window geometry. The total window is `input_width + shift` steps and
/// the labels are its final `label_width` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub input_width: usize,
    pub label_width: usize,
    pub shift: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            input_width: 365,
            label_width: 365,
            shift: 1,
        }
    }
}

impl WindowSpec {
    pub fn total_window(&self) -> usize {
        self.input_width + self.shift
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.input_width < 1 || self.label_width < 1 || self.shift < 1 {
            return Err(WindowError::BadSpec(
                "input_width, label_width and shift must all be >= 1".into(),
            ));
        }
        if self.label_width > self.total_window() {
            return Err(WindowError::BadSpec(format!(
                "label_width {} exceeds total window {}",
                self.label_width,
                self.total_window()
            )));
        }
        Ok(())
    }
}

/// One supervised sample: `inputs` is input_width × feature_count,
/// `labels` is label_width × target_count.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
}

/// Slides a stride-1 window over the rows of `data`; labels take only the
/// `target_cols` columns. Windows are ordered by start index and the count
/// is `n − (input_width + shift) + 1`.
pub fn make_windows(
    data: ArrayView2<f64>,
    target_cols: &[usize],
    spec: &WindowSpec,
) -> Result<Vec<SampleWindow>, WindowError> {
    spec.validate()?;
    for &col in target_cols {
        if col >= data.ncols() {
            return Err(WindowError::BadTarget {
                col,
                ncols: data.ncols(),
            });
        }
    }
    let n = data.nrows();
    let total = spec.total_window();
    if n < total {
        return Err(WindowError::TooShort { n, total });
    }
    let label_start_off = total - spec.label_width;
    let count = n - total + 1;
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let inputs = data
            .slice(ndarray::s![s..s + spec.input_width, ..])
            .to_owned();
        let mut labels = Array2::zeros((spec.label_width, target_cols.len()));
        for (r, t) in (s + label_start_off..s + total).enumerate() {
            for (j, &col) in target_cols.iter().enumerate() {
                labels[[r, j]] = data[[t, col]];
            }
        }
        out.push(SampleWindow { inputs, labels });
    }
    Ok(out)
}

/// Splits windows into consecutive batches of `size` (last may be short).
pub fn batch(windows: &[SampleWindow], size: usize) -> Vec<&[SampleWindow]> {
    assert!(size >= 1, "batch size must be >= 1");
    windows.chunks(size).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn ramp(n: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, cols), |(i, j)| (i * cols + j) as f64)
    }

    #[test]
    fn default_spec_one_window_at_366() {
        let data = ramp(366, 2);
        let spec = WindowSpec::default();
        let w = make_windows(data.view(), &[0, 1], &spec).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].inputs.nrows(), 365);
        assert_eq!(w[0].labels.nrows(), 365);
    }

    #[test]
    fn default_spec_too_short_at_365() {
        let data = ramp(365, 2);
        assert!(matches!(
            make_windows(data.view(), &[0], &WindowSpec::default()),
            Err(WindowError::TooShort { .. })
        ));
    }

    #[test]
    fn small_spec_window_layout() {
        // n=10, (3,3,1): 7 windows; first inputs rows 0-2, labels rows 1-3
        let data = ramp(10, 1);
        let spec = WindowSpec {
            input_width: 3,
            label_width: 3,
            shift: 1,
        };
        let w = make_windows(data.view(), &[0], &spec).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[0].inputs.column(0).to_vec(), vec![0.0, 1.0, 2.0]);
        assert_eq!(w[0].labels.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(w[6].inputs.column(0).to_vec(), vec![6.0, 7.0, 8.0]);
        assert_eq!(w[6].labels.column(0).to_vec(), vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn label_alignment_shift() {
        // labels[t] equals inputs[t + shift] where they overlap
        let data = ramp(20, 1);
        let spec = WindowSpec {
            input_width: 5,
            label_width: 5,
            shift: 1,
        };
        for w in make_windows(data.view(), &[0], &spec).unwrap() {
            for t in 0..4 {
                assert_eq!(w.labels[[t, 0]], w.inputs[[t + 1, 0]]);
            }
        }
    }

    #[test]
    fn batch_division_with_remainder() {
        let data = ramp(133, 1);
        let spec = WindowSpec {
            input_width: 3,
            label_width: 3,
            shift: 1,
        };
        let w = make_windows(data.view(), &[0], &spec).unwrap();
        assert_eq!(w.len(), 130);
        let batches = batch(&w, 64);
        let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![64, 64, 2]);
    }

    #[test]
    fn batch_single_and_exact() {
        let data = ramp(4, 1);
        let spec = WindowSpec {
            input_width: 3,
            label_width: 3,
            shift: 1,
        };
        let w = make_windows(data.view(), &[0], &spec).unwrap();
        assert_eq!(batch(&w, 64).len(), 1);
        let data = ramp(67, 1);
        let w = make_windows(data.view(), &[0], &spec).unwrap();
        assert_eq!(w.len(), 64);
        let batches = batch(&w, 64);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 64);
    }

    #[test]
    fn reconstruction_from_overlapping_inputs() {
        let data = ramp(40, 3);
        let spec = WindowSpec {
            input_width: 7,
            label_width: 7,
            shift: 1,
        };
        let w = make_windows(data.view(), &[0], &spec).unwrap();
        // first row of each window, then the tail of the last window
        let mut rebuilt: Vec<Vec<f64>> = Vec::new();
        for win in &w {
            rebuilt.push(win.inputs.row(0).to_vec());
        }
        let last = &w[w.len() - 1];
        for r in 1..last.inputs.nrows() {
            rebuilt.push(last.inputs.row(r).to_vec());
        }
        // labels cover `shift` further rows beyond the inputs
        assert_eq!(rebuilt.len() + spec.shift, data.nrows());
        for (i, row) in rebuilt.iter().enumerate() {
            assert_eq!(row, &data.row(i).to_vec());
        }
    }

    #[test]
    fn rejects_bad_target_column() {
        let data = ramp(10, 2);
        let spec = WindowSpec {
            input_width: 3,
            label_width: 3,
            shift: 1,
        };
        assert!(matches!(
            make_windows(data.view(), &[5], &spec),
            Err(WindowError::BadTarget { .. })
        ));
    }

    proptest! {
        #[test]
        fn matches_brute_force_enumeration(
            n in 2usize..60,
            input_width in 1usize..12,
            label_width in 1usize..12,
            shift in 1usize..5,
        ) {
            let spec = WindowSpec { input_width, label_width, shift };
            prop_assume!(spec.validate().is_ok());
            let data = ramp(n, 2);
            let result = make_windows(data.view(), &[1], &spec);
            let total = input_width + shift;
            if n < total {
                let too_short = matches!(result, Err(WindowError::TooShort { .. }));
                prop_assert!(too_short);
            } else {
                let windows = result.unwrap();
                // brute force: enumerate every start index directly
                let mut count = 0;
                for s in 0..n {
                    if s + total > n {
                        continue;
                    }
                    let w = &windows[count];
                    for r in 0..input_width {
                        for c in 0..2 {
                            prop_assert_eq!(w.inputs[[r, c]], data[[s + r, c]]);
                        }
                    }
                    for r in 0..label_width {
                        let src = s + total - label_width + r;
                        prop_assert_eq!(w.labels[[r, 0]], data[[src, 1]]);
                    }
                    count += 1;
                }
                prop_assert_eq!(windows.len(), count);
                prop_assert_eq!(windows.len(), n - total + 1);
            }
        }
    }
}
