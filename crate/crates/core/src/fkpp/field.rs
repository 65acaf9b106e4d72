use serde::{Deserialize, Serialize};

/// Discretized `u(s, .)` on a window that may have been translated.
///
/// Node `i` sits at `left_edge + i * dx`. Outside the window `u` equals the
/// boundary values, which follow the spatially constant solution of the
/// reaction ODE (fixed at 1 and 0 for front-type data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkppField {
    pub values: Vec<f64>,
    pub left_edge: f64,
    pub dx: f64,
    pub time: f64,
    pub window_shift_total: f64,
    pub left_boundary: f64,
    pub right_boundary: f64,
}

impl FkppField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.left_edge + i as f64 * self.dx
    }

    pub fn right_edge(&self) -> f64 {
        self.x(self.values.len().saturating_sub(1))
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left_edge + self.right_edge())
    }

    /// Linear interpolation; boundary values outside the window.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return f64::NAN;
        }
        let pos = (x - self.left_edge) / self.dx;
        if pos < 0.0 {
            return self.left_boundary;
        }
        if pos >= (n - 1) as f64 {
            return if pos == (n - 1) as f64 {
                self.values[n - 1]
            } else {
                self.right_boundary
            };
        }
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// `P(max <= x)` when the field was started from Heaviside data.
    pub fn max_cdf(&self, x: f64) -> f64 {
        1.0 - self.value_at(x)
    }

    pub fn is_in_unit_range(&self) -> bool {
        self.values.iter().all(|u| (0.0..=1.0).contains(u))
    }

    /// Non-increasing in `x`, including the boundary values.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.left_boundary;
        for &u in self.values.iter().chain(std::iter::once(&self.right_boundary)) {
            if u > prev {
                return false;
            }
            prev = u;
        }
        true
    }

    /// Translate the window by `cells` grid cells (positive moves right),
    /// padding with the boundary value on the exposed side.
    pub fn shift_cells(&mut self, cells: isize) {
        let n = self.values.len();
        if cells == 0 || n == 0 {
            return;
        }
        let m = cells.unsigned_abs().min(n);
        if cells > 0 {
            self.values.drain(..m);
            self.values.resize(n, self.right_boundary);
        } else {
            self.values.truncate(n - m);
            let pad = std::iter::repeat_n(self.left_boundary, m);
            self.values.splice(0..0, pad);
        }
        let shift = cells as f64 * self.dx;
        self.left_edge += shift;
        self.window_shift_total += shift;
    }
}

/// Largest crossing of `level`, linearly interpolated between nodes.
///
/// Scans from the right, so flat segments at `level` resolve to their
/// rightmost point. Returns `None` when the field never crosses.
pub fn front_position(field: &FkppField, level: f64) -> Option<f64> {
    let v = &field.values;
    let n = v.len();
    if n == 0 {
        return None;
    }
    if v[n - 1] >= level && field.right_boundary < level {
        return Some(field.x(n - 1));
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let (a, b) = (v[i], v[i + 1]);
        if a >= level && b < level {
            let w = (a - level) / (a - b);
            return Some(field.x(i) + w * field.dx);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>, left: f64, dx: f64) -> FkppField {
        FkppField {
            values,
            left_edge: left,
            dx,
            time: 0.0,
            window_shift_total: 0.0,
            left_boundary: 1.0,
            right_boundary: 0.0,
        }
    }

    #[test]
    fn front_of_exact_step_is_on_grid() {
        let f = field(vec![1.0, 1.0, 1.0, 0.0, 0.0], -1.0, 0.5);
        // crossing between x=0 and x=0.5, u(0)=1 -> w = 0.5/1
        assert_eq!(front_position(&f, 1.0), Some(0.0));
        let g = field(vec![1.0, 1.0, 0.5, 0.0, 0.0], -1.0, 0.5);
        assert_eq!(front_position(&g, 0.5), Some(0.0));
    }

    #[test]
    fn front_of_linear_profile_is_midpoint() {
        let n = 11;
        let vals: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 / (n - 1) as f64).collect();
        let f = field(vals, 2.0, 0.3);
        let x = front_position(&f, 0.5).unwrap();
        assert!((x - (2.0 + 2.0 + 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn front_levels_are_ordered() {
        let vals: Vec<f64> = (0..200).map(|i| 1.0 / (1.0 + (0.1 * i as f64 - 10.0).exp())).collect();
        let f = field(vals, -10.0, 0.1);
        assert!(front_position(&f, 0.25).unwrap() >= front_position(&f, 0.75).unwrap());
    }

    #[test]
    fn flat_segment_resolves_to_rightmost() {
        let f = field(vec![1.0, 0.5, 0.5, 0.5, 0.0], 0.0, 1.0);
        assert_eq!(front_position(&f, 0.5), Some(3.0));
    }

    #[test]
    fn no_crossing_is_none() {
        let f = field(vec![0.0; 10], 0.0, 1.0);
        assert_eq!(front_position(&f, 0.5), None);
    }

    #[test]
    fn shifting_pads_with_boundaries() {
        let mut f = field(vec![1.0, 0.8, 0.2, 0.0], 0.0, 1.0);
        f.shift_cells(1);
        assert_eq!(f.values, vec![0.8, 0.2, 0.0, 0.0]);
        assert_eq!(f.left_edge, 1.0);
        f.shift_cells(-2);
        assert_eq!(f.values, vec![1.0, 1.0, 0.8, 0.2]);
        assert_eq!(f.left_edge, -1.0);
        assert_eq!(f.window_shift_total, -1.0);
    }

    #[test]
    fn interpolation_and_boundaries() {
        let f = field(vec![1.0, 0.5, 0.0], 0.0, 1.0);
        assert_eq!(f.value_at(0.5), 0.75);
        assert_eq!(f.value_at(-3.0), 1.0);
        assert_eq!(f.value_at(9.0), 0.0);
        assert_eq!(f.max_cdf(1.0), 0.5);
    }
}
