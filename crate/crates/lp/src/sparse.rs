/// Compressed sparse storage, interpreted as either columns (CSC) or rows
/// (CSR) depending on how it was built.
#[derive(Clone, Debug, Default)]
pub(crate) struct Compressed {
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compressed {
    pub(crate) fn with_outer(outer: usize) -> Self {
        let mut start = Vec::with_capacity(outer + 1);
        start.push(0);
        Self {
            start,
            idx: Vec::new(),
            val: Vec::new(),
        }
    }

    /// Builds the outer-major form from `(outer, inner, value)` triplets.
    pub(crate) fn from_triplets(outer: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; outer + 1];
        for &(o, _, _) in triplets {
            counts[o + 1] += 1;
        }
        for i in 0..outer {
            counts[i + 1] += counts[i];
        }
        let start = counts.clone();
        let mut next = counts;
        let mut idx = vec![0; triplets.len()];
        let mut val = vec![0.0; triplets.len()];
        for &(o, i, v) in triplets {
            let k = next[o];
            idx[k] = i;
            val[k] = v;
            next[o] += 1;
        }
        Self { start, idx, val }
    }

    pub(crate) fn push(&mut self, inner: usize, value: f64) {
        self.idx.push(inner);
        self.val.push(value);
    }

    pub(crate) fn seal(&mut self) {
        self.start.push(self.idx.len());
    }

    #[inline]
    pub(crate) fn get(&self, outer: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.start[outer], self.start[outer + 1]);
        (&self.idx[s..e], &self.val[s..e])
    }

    pub(crate) fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub(crate) fn remap_inner(&mut self, map: &[usize]) {
        for i in &mut self.idx {
            *i = map[*i];
        }
    }

    /// The same matrix stored with outer and inner roles swapped.
    pub(crate) fn transpose(&self, inner: usize) -> Self {
        let outer = self.start.len() - 1;
        let mut triplets = Vec::with_capacity(self.idx.len());
        for o in 0..outer {
            let (ix, vx) = self.get(o);
            for (&i, &v) in ix.iter().zip(vx) {
                triplets.push((i, o, v));
            }
        }
        Self::from_triplets(inner, &triplets)
    }
}
