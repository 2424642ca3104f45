use std::io::Write;
use std::str::FromStr;

use crate::nn::MlpModel;
use crate::numerics::Matrix;
use crate::oodcore::{score_rows, ScoreKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        let all = [self.xmin, self.xmax, self.ymin, self.ymax];
        if all.iter().any(|v| !v.is_finite()) || !(self.xmax > self.xmin) || !(self.ymax > self.ymin) {
            return Err(Error::param(format!("degenerate grid bounds {self:?}")));
        }
        Ok(())
    }
}

impl FromStr for Bounds {
    type Err = Error;

    /// `xmin,xmax,ymin,ymax`
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::param(format!("bounds `{s}`: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::param(format!("bounds need 4 numbers, got `{s}`")));
        }
        let b = Bounds { xmin: v[0], xmax: v[1], ymin: v[2], ymax: v[3] };
        b.validate()?;
        Ok(b)
    }
}

/// Scores the model on a `resolution x resolution` lattice spanning `bounds`
/// (edges included). Rows are ordered with `x` varying fastest.
pub fn export_score_grid(
    model: &MlpModel,
    score_kind: ScoreKind,
    num_classes: usize,
    bounds: Bounds,
    resolution: usize,
) -> Result<Vec<[f64; 3]>> {
    bounds.validate()?;
    if resolution < 2 {
        return Err(Error::param(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let step = |lo: f64, hi: f64, i: usize| {
        if i == resolution - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        }
    };
    let mut values = Vec::with_capacity(2 * resolution * resolution);
    for iy in 0..resolution {
        let y = step(bounds.ymin, bounds.ymax, iy);
        for ix in 0..resolution {
            values.push(step(bounds.xmin, bounds.xmax, ix));
            values.push(y);
        }
    }
    let pts = Matrix::from_vec(resolution * resolution, 2, values)?;
    let scores = score_rows(&model.forward(&pts)?, score_kind, num_classes)?;
    Ok(pts.iter_rows().zip(scores).map(|(p, s)| [p[0], p[1], s]).collect())
}

/// Writes the lattice as `x,y,score`.
pub fn write_score_grid<W: Write>(grid: &[[f64; 3]], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y", "score"])?;
    for row in grid {
        wtr.serialize((row[0], row[1], row[2]))?;
    }
    wtr.flush()?;
    Ok(())
}
