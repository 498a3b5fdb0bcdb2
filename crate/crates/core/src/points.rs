use std::collections::HashMap;

use crate::error::{Error, Result};

/// `n` points in `R^d` with unique external identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
    ids: Vec<String>,
}

impl PointCloud {
    pub fn new(rows: Vec<Vec<f64>>, ids: Vec<String>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("point cloud"))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Dimension { expected: dim, got: row.len() });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(coords, dim, ids)
    }

    /// Points with ids `"0"`, `"1"`, ...
    pub fn with_index_ids(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows, ids)
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize, ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("point dimension"));
        }
        if ids.is_empty() {
            return Err(Error::Empty("point cloud"));
        }
        if coords.len() != dim * ids.len() {
            return Err(Error::Dimension { expected: dim * ids.len(), got: coords.len() });
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i / dim));
        }
        let mut seen = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if seen.insert(id.as_str(), i).is_some() {
                return Err(Error::Support(format!("duplicate point id {id:?}")));
            }
        }
        Ok(Self { coords, dim, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}
