use crate::galois::Field;

/// Incrementally maintained reduced row-echelon basis of coefficient vectors.
///
/// Tracks rank and which originals have become decodable: original `i` is
/// decodable once the unit vector `e_i` lies in the span, which for a fully
/// reduced basis means the pivot row of column `i` has no other nonzero entry.
#[derive(Debug, Clone)]
pub struct CoefficientBasis {
    field: &'static Field,
    width: usize,
    rows: Vec<Vec<u8>>,
    pivot_row: Vec<Option<usize>>,
    decodable: Vec<bool>,
    decodable_count: usize,
}

impl CoefficientBasis {
    pub fn new(field: &'static Field, width: usize) -> Self {
        Self {
            field,
            width,
            rows: Vec::with_capacity(width),
            pivot_row: vec![None; width],
            decodable: vec![false; width],
            decodable_count: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.width
    }

    pub fn decodable_count(&self) -> usize {
        self.decodable_count
    }

    pub fn is_decodable(&self, original: usize) -> bool {
        self.decodable[original]
    }

    /// Reduces `v` in place against the basis; returns true if it became zero.
    pub fn reduce(&self, v: &mut [u8]) -> bool {
        debug_assert_eq!(v.len(), self.width);
        for c in 0..self.width {
            if v[c] != 0 {
                if let Some(r) = self.pivot_row[c] {
                    let f = v[c];
                    self.field.axpy(v, f, &self.rows[r]);
                }
            }
        }
        v.iter().all(|&x| x == 0)
    }

    pub fn is_innovative(&self, coefficients: &[u8]) -> bool {
        let mut v = coefficients.to_vec();
        !self.reduce(&mut v)
    }

    /// Inserts a coefficient vector. Returns `None` when it is already in the
    /// span, otherwise the originals that became decodable because of it.
    pub fn insert(&mut self, coefficients: &[u8]) -> Option<Vec<usize>> {
        let mut v = coefficients.to_vec();
        if self.reduce(&mut v) {
            return None;
        }
        let pivot = v.iter().position(|&x| x != 0).expect("nonzero");
        let inv = self.field.inv_raw(v[pivot]);
        self.field.scale(&mut v, inv);
        let new_index = self.rows.len();
        let mut touched = vec![new_index];
        for (r, row) in self.rows.iter_mut().enumerate() {
            let f = row[pivot];
            if f != 0 {
                self.field.axpy(row, f, &v);
                touched.push(r);
            }
        }
        self.rows.push(v);
        self.pivot_row[pivot] = Some(new_index);

        let mut newly = Vec::new();
        for r in touched {
            let row = &self.rows[r];
            let mut nz = row.iter().enumerate().filter(|(_, &x)| x != 0);
            if let (Some((col, _)), None) = (nz.next(), nz.next()) {
                if !self.decodable[col] {
                    self.decodable[col] = true;
                    self.decodable_count += 1;
                    newly.push(col);
                }
            }
        }
        newly.sort_unstable();
        Some(newly)
    }
}
