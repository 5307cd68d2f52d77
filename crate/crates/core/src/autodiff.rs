//! A small reverse-mode gradient tape over dense row-major matrices.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates adjoints.

use alloc::vec::Vec;

use crate::math::{exp, ln, log_add_exp, sigmoid, softplus, sqrt};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape does not match data");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, alloc::vec![0.0; rows * cols])
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(1, 1, alloc::vec![v])
    }

    pub fn column(values: Vec<f64>) -> Self {
        Self::new(values.len(), 1, values)
    }

    pub fn row(values: Vec<f64>) -> Self {
        Self::new(1, values.len(), values)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert!(self.same_shape(other), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    fn add_assign(&mut self, other: &Matrix) {
        assert!(self.same_shape(other), "shape mismatch");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    RepeatRows(Var),
    Column(Var, usize),
    MeanRows(Var),
    Sum(Var),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    SoftmaxRows(Var),
    LogAddExp(Var, Var),
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    values: Vec<Matrix>,
    ops: Vec<Op>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.values[v.0]
    }

    /// A parameter or a constant; the tape does not distinguish the two.
    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x / y);
        self.push(v, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| k * x);
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| x + k);
        self.push(v, Op::AddConst(a))
    }

    /// Repeats a `1 × c` row `rows` times.
    pub fn repeat_rows(&mut self, a: Var, rows: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.rows, 1, "repeat_rows expects a single row");
        let mut data = Vec::with_capacity(rows * m.cols);
        for _ in 0..rows {
            data.extend_from_slice(&m.data);
        }
        let v = Matrix::new(rows, m.cols, data);
        self.push(v, Op::RepeatRows(a))
    }

    /// `a + bias` with a `1 × c` bias broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let rows = self.value(a).rows;
        let b = self.repeat_rows(bias, rows);
        self.add(a, b)
    }

    pub fn column(&mut self, a: Var, j: usize) -> Var {
        let m = self.value(a);
        let v = Matrix::column((0..m.rows).map(|i| m.get(i, j)).collect());
        self.push(v, Op::Column(a, j))
    }

    /// Mean over rows, giving `1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = alloc::vec![0.0; m.cols];
        for r in 0..m.rows {
            for (o, v) in out.iter_mut().zip(&m.data[r * m.cols..(r + 1) * m.cols]) {
                *o += v;
            }
        }
        let k = m.rows as f64;
        out.iter_mut().for_each(|o| *o /= k);
        self.push(Matrix::row(out), Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).map(ln);
        self.push(v, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = m.clone();
        for row in out.data.chunks_exact_mut(m.cols) {
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|v| *v = exp(*v - top));
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn log_add_exp(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), log_add_exp);
        self.push(v, Op::LogAddExp(a, b))
    }

    /// Adjoints of every node with respect to the `1 × 1` node `out`.
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(
            (self.values[out.0].rows, self.values[out.0].cols),
            (1, 1),
            "backward needs a scalar output"
        );
        let mut grads: Vec<Option<Matrix>> = alloc::vec![None; out.0 + 1];
        grads[out.0] = Some(Matrix::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let y = &self.values[i];
            let mut give = |v: Var, d: Matrix| match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&d),
                slot => *slot = Some(d),
            };
            match self.ops[i] {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    give(a, g.matmul(&self.value(b).transpose()));
                    give(b, self.value(a).transpose().matmul(&g));
                }
                Op::Add(a, b) => {
                    give(a, g.clone());
                    give(b, g);
                }
                Op::Sub(a, b) => {
                    give(a, g.clone());
                    give(b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    give(a, g.zip(self.value(b), |d, y| d * y));
                    give(b, g.zip(self.value(a), |d, x| d * x));
                }
                Op::Div(a, b) => {
                    let bv = self.value(b);
                    give(a, g.zip(bv, |d, y| d / y));
                    let t = g.zip(y, |d, q| d * q);
                    give(b, t.zip(bv, |t, y| -t / y));
                }
                Op::Scale(a, k) => give(a, g.map(|d| k * d)),
                Op::AddConst(a) => give(a, g),
                Op::RepeatRows(a) => {
                    let mut acc = alloc::vec![0.0; g.cols];
                    for row in g.data.chunks_exact(g.cols) {
                        acc.iter_mut().zip(row).for_each(|(s, d)| *s += d);
                    }
                    give(a, Matrix::row(acc));
                }
                Op::Column(a, j) => {
                    let src = self.value(a);
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    for r in 0..src.rows {
                        d.data[r * src.cols + j] = g.data[r];
                    }
                    give(a, d);
                }
                Op::MeanRows(a) => {
                    let src = self.value(a);
                    let k = src.rows as f64;
                    let mut data = Vec::with_capacity(src.data.len());
                    for _ in 0..src.rows {
                        data.extend(g.data.iter().map(|d| d / k));
                    }
                    give(a, Matrix::new(src.rows, src.cols, data));
                }
                Op::Sum(a) => {
                    let src = self.value(a);
                    give(a, Matrix::new(src.rows, src.cols, alloc::vec![g.data[0]; src.data.len()]));
                }
                Op::Relu(a) => give(a, g.zip(self.value(a), |d, x| if x > 0.0 { d } else { 0.0 })),
                Op::Softplus(a) => give(a, g.zip(self.value(a), |d, x| d * sigmoid(x))),
                Op::Exp(a) => give(a, g.zip(y, |d, e| d * e)),
                Op::Ln(a) => give(a, g.zip(self.value(a), |d, x| d / x)),
                Op::Sqrt(a) => give(a, g.zip(y, |d, s| 0.5 * d / s)),
                Op::SoftmaxRows(a) => {
                    let mut d = g.clone();
                    for (drow, srow) in d.data.chunks_exact_mut(y.cols).zip(y.data.chunks_exact(y.cols)) {
                        let dot: f64 = drow.iter().zip(srow).map(|(a, b)| a * b).sum();
                        drow.iter_mut().zip(srow).for_each(|(dv, s)| *dv = s * (*dv - dot));
                    }
                    give(a, d);
                }
                Op::LogAddExp(a, b) => {
                    give(a, g.zip(&self.value(a).zip(y, |x, o| exp(x - o)), |d, w| d * w));
                    give(b, g.zip(&self.value(b).zip(y, |x, o| exp(x - o)), |d, w| d * w));
                }
            }
        }
        Gradients { grads }
    }
}

/// Adjoints produced by [`Tape::backward`]; only leaves keep theirs.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// The gradient for a leaf, or `None` when the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use std::vec;

    fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.standard_normal()).collect())
    }

    /// Checks every leaf entry of `build` against central differences.
    fn check(leaves: Vec<Matrix>, build: impl Fn(&mut Tape, &[Var]) -> Var) {
        let run = |ls: &[Matrix]| {
            let mut t = Tape::new();
            let vars: Vec<Var> = ls.iter().map(|m| t.leaf(m.clone())).collect();
            let out = build(&mut t, &vars);
            (t, vars, out)
        };
        let (t, vars, out) = run(&leaves);
        let g = t.backward(out);
        for (li, leaf) in leaves.iter().enumerate() {
            for k in 0..leaf.data.len() {
                let h = 1e-6;
                let mut plus = leaves.clone();
                plus[li].data[k] += h;
                let mut minus = leaves.clone();
                minus[li].data[k] -= h;
                let fp = { let (t, _, o) = run(&plus); t.value(o).data[0] };
                let fm = { let (t, _, o) = run(&minus); t.value(o).data[0] };
                let fd = (fp - fm) / (2.0 * h);
                let an = g.get(vars[li]).map_or(0.0, |m| m.data[k]);
                let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(err < 1e-6, "leaf {li} entry {k}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn matmul_bias_and_reductions() {
        let mut rng = SeededRng::new(1, 0);
        check(
            vec![random(4, 3, &mut rng), random(3, 2, &mut rng), random(1, 2, &mut rng)],
            |t, v| {
                let m = t.matmul(v[0], v[1]);
                let b = t.add_row(m, v[2]);
                let p = t.mean_rows(b);
                let q = t.mul(p, p);
                t.sum(q)
            },
        );
    }

    #[test]
    fn activations() {
        let mut rng = SeededRng::new(2, 0);
        check(vec![random(3, 4, &mut rng)], |t, v| {
            let r = t.relu(v[0]);
            let s = t.softplus(v[0]);
            let m = t.softmax_rows(v[0]);
            let c = t.column(m, 1);
            let a = t.add(r, s);
            let e = t.exp(a);
            let l = t.ln(e);
            let q = t.sqrt(e);
            let w = t.sub(l, q);
            let x = t.sum(w);
            let y = t.sum(c);
            let z = t.scale(y, 3.0);
            t.add(x, z)
        });
    }

    #[test]
    fn division_and_log_add_exp() {
        let mut rng = SeededRng::new(3, 0);
        let pos = Matrix::new(2, 2, vec![0.5, 1.5, 2.0, 0.7]);
        let leaves = vec![random(2, 2, &mut rng), pos, random(2, 2, &mut rng), random(1, 2, &mut rng)];
        check(leaves, |t, v| {
            let d = t.div(v[0], v[1]);
            let l = t.log_add_exp(d, v[2]);
            let c = t.add_const(l, 2.0);
            let s = t.repeat_rows(v[3], 2);
            let p = t.mul(c, s);
            t.sum(p)
        });
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::new(2, 3, vec![1000.0, 999.0, -5.0, 0.0, 0.0, 0.0]));
        let s = t.softmax_rows(a);
        for row in t.value(s).data.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(2.0));
        let b = t.leaf(Matrix::scalar(3.0));
        let c = t.mul(a, a);
        let g = t.backward(c);
        assert_eq!(g.get(a).unwrap().data, vec![4.0]);
        assert!(g.get(b).is_none());
    }
}
