use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    /// `count` evenly spaced values from `min` to `max` inclusive.
    Range { min: f64, max: f64, count: usize },
    /// A single value, for slices.
    Fixed(f64),
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Range { min, max, count } => {
                let span = max - min;
                let last = (count - 1) as f64;
                (0..count)
                    .map(|i| if i + 1 == count { max } else { min + span * i as f64 / last })
                    .collect()
            }
            Axis::Fixed(v) => vec![v],
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Axis::Range { min, max, count } => {
                if count < 2 {
                    return Err(Error::invalid(format!("axis count must be >= 2, got {count}")));
                }
                if !(min < max) || !min.is_finite() || !max.is_finite() {
                    return Err(Error::invalid(format!("axis needs min < max, got [{min}, {max}]")));
                }
                Ok(())
            }
            Axis::Fixed(v) if v.is_finite() => Ok(()),
            Axis::Fixed(v) => Err(Error::invalid(format!("fixed axis value {v} not finite"))),
        }
    }

    fn refined(&self) -> Axis {
        match *self {
            Axis::Range { min, max, count } => Axis::Range {
                min,
                max,
                count: 2 * count - 1,
            },
            fixed => fixed,
        }
    }
}

/// A tensor grid in state space with an optional excluded ball around the
/// origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub axes: [Axis; 3],
    pub exclusion_radius: f64,
}

impl GridSpec {
    pub fn new(axes: [Axis; 3], exclusion_radius: f64) -> Result<Self> {
        for a in &axes {
            a.validate()?;
        }
        if !(exclusion_radius >= 0.0) {
            return Err(Error::invalid("exclusion radius must be non-negative"));
        }
        Ok(GridSpec {
            axes,
            exclusion_radius,
        })
    }

    /// `count³` points on `[min, max]³`.
    pub fn cube(min: f64, max: f64, count: usize, exclusion_radius: f64) -> Result<Self> {
        let a = Axis::Range { min, max, count };
        GridSpec::new([a, a, a], exclusion_radius)
    }

    /// The plane `x_axis = value` of a cube grid.
    pub fn slice(min: f64, max: f64, count: usize, axis: usize, value: f64, exclusion_radius: f64) -> Result<Self> {
        if axis > 2 {
            return Err(Error::invalid("slice axis must be 0, 1 or 2"));
        }
        let a = Axis::Range { min, max, count };
        let mut axes = [a, a, a];
        axes[axis] = Axis::Fixed(value);
        GridSpec::new(axes, exclusion_radius)
    }

    /// Same bounds with `2n − 1` points per ranged axis; every old point
    /// is kept.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            axes: self.axes.map(|a| a.refined()),
            exclusion_radius: self.exclusion_radius,
        }
    }

    pub fn axis_values(&self, i: usize) -> Vec<f64> {
        self.axes[i].values()
    }

    pub fn points(&self) -> Vec<Vector3<f64>> {
        let (a, b, c) = (self.axis_values(0), self.axis_values(1), self.axis_values(2));
        let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
        for &x in &a {
            for &y in &b {
                for &z in &c {
                    let p = Vector3::new(x, y, z);
                    if p.norm() >= self.exclusion_radius {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        let ax: Vec<String> = self
            .axes
            .iter()
            .map(|a| match a {
                Axis::Range { min, max, count } => format!("[{min},{max}]x{count}"),
                Axis::Fixed(v) => format!("={v}"),
            })
            .collect();
        format!("{} excl={}", ax.join(";"), self.exclusion_radius)
    }
}
