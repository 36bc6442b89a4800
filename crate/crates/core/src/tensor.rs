/// Dense cubical tensor: every index runs over `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    n: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor {
            n,
            rank,
            data: vec![0.0; n.pow(rank as u32)],
        }
    }

    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Tensor::zeros(n, rank);
        let mut idx = vec![0; rank];
        for k in 0..t.data.len() {
            t.data[k] = f(&idx);
            for slot in (0..rank).rev() {
                idx[slot] += 1;
                if idx[slot] < n {
                    break;
                }
                idx[slot] = 0;
            }
        }
        t
    }

    pub fn from_vec(n: usize, rank: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n.pow(rank as u32));
        Tensor { n, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    #[inline]
    pub fn at3(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }

    #[inline]
    pub fn at5(&self, a: usize, b: usize, c: usize, d: usize, e: usize) -> f64 {
        self.data[(((a * self.n + b) * self.n + c) * self.n + d) * self.n + e]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Contracts every slot with the frame: `out[i..] = sum T[a..] u[i][a] ...`,
    /// where `u[i]` are the frame vectors' components.
    pub fn in_frame(&self, u: &[Vec<f64>]) -> Tensor {
        let n = self.n;
        let mut cur = self.clone();
        for slot in 0..self.rank {
            let stride = n.pow((self.rank - 1 - slot) as u32);
            let mut next = Tensor::zeros(n, self.rank);
            for (o, out) in next.data.iter_mut().enumerate() {
                let i = (o / stride) % n;
                let base = o - i * stride;
                *out = (0..n).map(|a| u[i][a] * cur.data[base + a * stride]).sum();
            }
            cur = next;
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_fn_is_row_major() {
        let t = Tensor::from_fn(3, 3, |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64);
        assert_eq!(t.at3(2, 0, 1), 201.0);
        assert_eq!(t.get(&[1, 2, 0]), 120.0);
    }

    #[test]
    fn frame_change_matches_direct_sum() {
        let n = 3;
        let t = Tensor::from_fn(n, 3, |i| {
            (i[0] as f64 + 1.0) * (i[1] as f64 - 0.5) + i[2] as f64
        });
        let u = vec![
            vec![1.0, 0.5, 0.0],
            vec![0.0, 2.0, -1.0],
            vec![0.3, 0.0, 1.0],
        ];
        let f = t.in_frame(&u);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                s += t.at3(a, b, c) * u[i][a] * u[j][b] * u[k][c];
                            }
                        }
                    }
                    assert!((f.at3(i, j, k) - s).abs() < 1e-12);
                }
            }
        }
    }
}
