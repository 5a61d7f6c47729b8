use serde::{Deserialize, Serialize};

/// A batch of points in a `dim`-dimensional sample space, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    dim: usize,
    data: Vec<f64>,
}

impl Batch {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0, "batch dimension must be positive");
        assert_eq!(data.len() % dim, 0, "flat data length must be a multiple of dim");
        Batch { dim, data }
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Batch::new(dim, vec![0.0; dim * len])
    }

    /// `len` copies of one point.
    pub fn repeat(point: &[f64], len: usize) -> Self {
        let mut data = Vec::with_capacity(point.len() * len);
        for _ in 0..len {
            data.extend_from_slice(point);
        }
        Batch::new(point.len(), data)
    }

    pub fn from_rows<I, R>(dim: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim);
            data.extend_from_slice(r);
        }
        Batch::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
