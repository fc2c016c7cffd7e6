//! Demonstration CSV: header `t,x,y,z[,qw,qx,qy,qz]`, uniform time spacing.

use std::io::Read;
use std::path::Path;

use super::DmpError;
use crate::stl::{SignalTrace, StlError};

#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub dt: f64,
    pub positions: Vec<[f64; 3]>,
    pub orientations: Option<Vec<[f64; 4]>>,
}

pub fn load_demo<R: Read>(reader: R) -> Result<Demo, DmpError> {
    let tr = SignalTrace::read_csv(reader)?;
    let col = |name: &str| tr.channel(name);
    let (x, y, z) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(StlError::InvalidTrace("demonstration needs x, y, z columns".into()).into()),
    };
    let positions = (0..tr.len()).map(|k| [x[k], y[k], z[k]]).collect();
    let orientations = match (col("qw"), col("qx"), col("qy"), col("qz")) {
        (Some(w), Some(a), Some(b), Some(c)) => Some((0..tr.len()).map(|k| [w[k], a[k], b[k], c[k]]).collect()),
        (None, None, None, None) => None,
        _ => return Err(StlError::InvalidTrace("partial quaternion columns".into()).into()),
    };
    Ok(Demo { dt: tr.dt(), positions, orientations })
}

pub fn load_demo_file(path: impl AsRef<Path>) -> Result<Demo, DmpError> {
    load_demo(std::fs::File::open(path)?)
}

impl Demo {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), DmpError> {
        let mut tr = SignalTrace::new(self.dt, self.positions.len())?;
        for (d, name) in ["x", "y", "z"].iter().enumerate() {
            tr.insert(*name, self.positions.iter().map(|p| p[d]).collect())?;
        }
        if let Some(qs) = &self.orientations {
            for (d, name) in ["qw", "qx", "qy", "qz"].iter().enumerate() {
                tr.insert(*name, qs.iter().map(|q| q[d]).collect())?;
            }
        }
        tr.write_csv(writer)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_positions_and_quaternions() {
        let text = "t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.1,1,2,3,1,0,0,0\n";
        let d = load_demo(text.as_bytes()).unwrap();
        assert_eq!(d.positions[1], [1.0, 2.0, 3.0]);
        assert!((d.dt - 0.1).abs() < 1e-12);
        assert_eq!(d.orientations.unwrap().len(), 2);
    }

    #[test]
    fn nan_row_is_rejected() {
        let text = "t,x,y,z\n0,0,0,0\n0.1,NaN,0,0\n";
        let err = load_demo(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains('2') || err.contains('1'), "{err}");
    }
}
