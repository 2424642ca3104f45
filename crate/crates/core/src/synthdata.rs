//! The synthetic 2D world. Gaussian ID classes sit around the origin inside a
//! ring of auxiliary outlier components whose count is the diversity knob.
//! Held-out OOD test sets avoid the auxiliary components.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::numerics::{gaussian_sample, Matrix, RngState};
use crate::{Error, Result};

/// Geometry of the synthetic world. Every field can be overridden from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub num_classes: usize,
    pub r_id: f64,
    pub sigma_id: f64,
    pub r_aux: f64,
    pub sigma_aux: f64,
    pub phi_aux: f64,
    /// Components of the held-out test ring.
    pub test_ring_components: usize,
    pub phi_test: f64,
    pub far_inner: f64,
    pub far_outer: f64,
    /// Share of held-out ring points in the mixed test OOD set.
    pub test_ring_fraction: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            num_classes: 3,
            r_id: 3.0,
            sigma_id: 0.3,
            r_aux: 6.0,
            sigma_aux: 0.3,
            phi_aux: 0.0,
            test_ring_components: 10,
            // halfway between 10 auxiliary components, and half a step off the 1000-component grid
            phi_test: PI / 10.0 + PI / 1000.0,
            far_inner: 8.0,
            far_outer: 12.0,
            test_ring_fraction: 0.5,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be a finite value >= 0, got {v}")))
            }
        };
        if self.num_classes < 2 {
            return Err(Error::config("need at least 2 ID classes"));
        }
        nonneg("r_id", self.r_id)?;
        nonneg("sigma_id", self.sigma_id)?;
        nonneg("r_aux", self.r_aux)?;
        nonneg("sigma_aux", self.sigma_aux)?;
        nonneg("far_inner", self.far_inner)?;
        if !self.phi_aux.is_finite() || !self.phi_test.is_finite() {
            return Err(Error::config("phases must be finite"));
        }
        if self.test_ring_components == 0 {
            return Err(Error::config("test ring needs at least one component"));
        }
        if !(self.far_outer > self.far_inner) || !self.far_outer.is_finite() {
            return Err(Error::config("far-field annulus needs far_outer > far_inner"));
        }
        if !(0.0..=1.0).contains(&self.test_ring_fraction) {
            return Err(Error::config("test_ring_fraction must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn id_centers(&self) -> Vec<[f64; 2]> {
        ring(self.num_classes, self.r_id, 0.0)
    }

    pub fn aux_spec(&self, k: usize) -> Result<GmmSpec> {
        GmmSpec::equal(ring(k, self.r_aux, self.phi_aux), self.sigma_aux)
    }

    pub fn test_ring_spec(&self) -> Result<GmmSpec> {
        GmmSpec::equal(ring(self.test_ring_components, self.r_aux, self.phi_test), self.sigma_aux)
    }
}

/// `k` points equally spaced on a circle of radius `r`, starting at angle `phase`.
pub fn ring(k: usize, r: f64, phase: f64) -> Vec<[f64; 2]> {
    (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64 + phase;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Isotropic Gaussian mixture in the plane with a shared `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub means: Vec<[f64; 2]>,
    pub sigma: f64,
    pub weights: Vec<f64>,
}

impl GmmSpec {
    pub fn new(means: Vec<[f64; 2]>, sigma: f64, weights: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::param("mixture needs at least one component"));
        }
        if means.len() != weights.len() {
            return Err(Error::param("one weight per component required"));
        }
        // sigma == 0 is the degenerate point-mass mixture
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma must be >= 0, got {sigma}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::param("mixture weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { means, sigma, weights })
    }

    pub fn equal(means: Vec<[f64; 2]>, sigma: f64) -> Result<Self> {
        let k = means.len().max(1);
        Self::new(means, sigma, vec![1.0 / k as f64; k])
    }

    pub fn component_count(&self) -> usize {
        self.means.len()
    }

    fn pick(&self, rng: &mut RngState) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        self.weights.len() - 1
    }

    /// `m` i.i.d. draws, returned with the index of the generating component.
    pub fn sample(&self, m: usize, rng: &mut RngState) -> Result<(Matrix, Vec<usize>)> {
        let mut values = Vec::with_capacity(2 * m);
        let mut comps = Vec::with_capacity(m);
        for _ in 0..m {
            let j = self.pick(rng);
            values.extend(gaussian_sample(&self.means[j], self.sigma, rng)?);
            comps.push(j);
        }
        Ok((Matrix::from_vec(m, 2, values)?, comps))
    }
}

/// Uniform-by-area annulus centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    fn sample_point(&self, rng: &mut RngState) -> [f64; 2] {
        let (a2, b2) = (self.inner * self.inner, self.outer * self.outer);
        let r = (a2 + (b2 - a2) * rng.uniform()).sqrt();
        let t = 2.0 * PI * rng.uniform();
        [r * t.cos(), r * t.sin()]
    }
}

/// In-distribution points with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    points: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledSet {
    pub fn new(points: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if points.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} points but {} labels",
                points.rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::input(format!("label {bad} not below {num_classes}")));
        }
        Ok(Self { points, labels, num_classes })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: self.points.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Where an outlier set's points were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutlierSource {
    Mixture(GmmSpec),
    Annulus(Annulus),
    /// Per point: the ring with probability `ring_fraction`, else the annulus.
    HeldOut { ring: GmmSpec, annulus: Annulus, ring_fraction: f64 },
}

/// Unlabeled outliers. `component_count` is the diversity level.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSet {
    pub points: Matrix,
    pub component_count: usize,
    pub source: OutlierSource,
}

impl OutlierSet {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }
}

/// `n_per_class` points for each ID class; class `c` is centered at angle `2 pi c / K`.
pub fn make_id_dataset(n_per_class: usize, geom: &Geometry, rng: &mut RngState) -> Result<LabeledSet> {
    if n_per_class == 0 {
        return Err(Error::param("n_per_class must be >= 1"));
    }
    geom.validate()?;
    let centers = geom.id_centers();
    let mut values = Vec::with_capacity(2 * n_per_class * centers.len());
    let mut labels = Vec::with_capacity(n_per_class * centers.len());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            values.extend(gaussian_sample(center, geom.sigma_id, rng)?);
            labels.push(c);
        }
    }
    let points = Matrix::from_vec(labels.len(), 2, values)?;
    LabeledSet::new(points, labels, geom.num_classes)
}

/// `m` auxiliary outliers from `k` equal-weight components on the outlier ring.
pub fn make_aux_outliers(k: usize, m: usize, geom: &Geometry, rng: &mut RngState) -> Result<OutlierSet> {
    if k == 0 {
        return Err(Error::param("component count must be >= 1"));
    }
    if m < k {
        return Err(Error::param(format!("need at least one sample per component: m={m} < k={k}")));
    }
    geom.validate()?;
    let spec = geom.aux_spec(k)?;
    let (points, _) = spec.sample(m, rng)?;
    Ok(OutlierSet { points, component_count: k, source: OutlierSource::Mixture(spec) })
}

fn far_field(geom: &Geometry) -> Annulus {
    Annulus { inner: geom.far_inner, outer: geom.far_outer }
}

/// Held-out ring components only (interleaved with the auxiliary ring).
pub fn make_test_ring(m: usize, geom: &Geometry, rng: &mut RngState) -> Result<OutlierSet> {
    if m == 0 {
        return Err(Error::param("test OOD size must be >= 1"));
    }
    geom.validate()?;
    let spec = geom.test_ring_spec()?;
    let (points, _) = spec.sample(m, rng)?;
    Ok(OutlierSet {
        points,
        component_count: spec.component_count(),
        source: OutlierSource::Mixture(spec),
    })
}

/// Far-field annulus only.
pub fn make_test_far(m: usize, geom: &Geometry, rng: &mut RngState) -> Result<OutlierSet> {
    if m == 0 {
        return Err(Error::param("test OOD size must be >= 1"));
    }
    geom.validate()?;
    let annulus = far_field(geom);
    let values: Vec<f64> = (0..m).flat_map(|_| annulus.sample_point(rng)).collect();
    Ok(OutlierSet {
        points: Matrix::from_vec(m, 2, values)?,
        component_count: 1,
        source: OutlierSource::Annulus(annulus),
    })
}

/// Test OOD mixing the held-out ring and the far-field annulus.
pub fn make_test_ood(m: usize, geom: &Geometry, rng: &mut RngState) -> Result<OutlierSet> {
    if m == 0 {
        return Err(Error::param("test OOD size must be >= 1"));
    }
    geom.validate()?;
    let spec = geom.test_ring_spec()?;
    let annulus = far_field(geom);
    let mut values = Vec::with_capacity(2 * m);
    for _ in 0..m {
        if rng.uniform() < geom.test_ring_fraction {
            let (p, _) = spec.sample(1, rng)?;
            values.extend_from_slice(p.values());
        } else {
            values.extend(annulus.sample_point(rng));
        }
    }
    Ok(OutlierSet {
        points: Matrix::from_vec(m, 2, values)?,
        component_count: spec.component_count() + 1,
        source: OutlierSource::HeldOut {
            ring: spec,
            annulus,
            ring_fraction: geom.test_ring_fraction,
        },
    })
}

/// Writes `x,y,label` rows for an ID set.
pub fn write_labeled_csv<W: Write>(set: &LabeledSet, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y", "label"])?;
    for (p, y) in set.points().iter_rows().zip(set.labels()) {
        wtr.serialize((p[0], p[1], *y as i64))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `x,y,label` rows for outliers, all with label `-1`.
pub fn write_outliers_csv<W: Write>(set: &OutlierSet, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y", "label"])?;
    for p in set.points.iter_rows() {
        wtr.serialize((p[0], p[1], -1i64))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    label: i64,
}

/// Reads an `x,y,label` file. Returns the points and raw labels (`-1` = outlier).
pub fn read_points_csv<R: Read>(r: R) -> Result<(Matrix, Vec<i64>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "label"] {
        return Err(Error::input(format!("expected header x,y,label, got {headers:?}")));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.deserialize() {
        let row: PointRow = row?;
        values.push(row.x);
        values.push(row.y);
        labels.push(row.label);
    }
    Ok((Matrix::from_vec(labels.len(), 2, values)?, labels))
}

/// Reads an ID set written by [`write_labeled_csv`].
pub fn read_labeled_csv<R: Read>(r: R, num_classes: usize) -> Result<LabeledSet> {
    let (points, raw) = read_points_csv(r)?;
    let labels = raw
        .into_iter()
        .map(|y| usize::try_from(y).map_err(|_| Error::input(format!("negative label {y} in ID set"))))
        .collect::<Result<Vec<_>>>()?;
    LabeledSet::new(points, labels, num_classes)
}
