//! A small vector-valued reverse-mode differentiation tape.
//!
//! Nodes hold flat `f64` vectors. Parameters live outside the tape in a
//! [`ParamSet`]; the tape only borrows them, and [`Graph::backward`]
//! accumulates parameter gradients into a separate [`Grads`] buffer, so a
//! model can be shared read-only between threads while each thread builds
//! its own graph.

use super::params::{Grads, ParamId, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    /// Whole parameter tensor used as a vector.
    Param(ParamId),
    /// One row of a matrix parameter.
    Lookup { param: ParamId, row: usize },
    /// `W x + b`.
    Affine { w: ParamId, b: ParamId, x: NodeId },
    Add(NodeId, NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    Tanh(NodeId),
    /// Fused LSTM cell. Input is the 4h gate pre-activation vector (order
    /// input, forget, candidate, output) and the previous cell state; output
    /// is `[h; c]`. `aux` stores the gate activations and `tanh(c)`.
    LstmCell { gates: NodeId, c_prev: Option<NodeId> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
    aux: Vec<f64>,
}

pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.push_aux(op, value, Vec::new())
    }

    fn push_aux(&mut self, op: Op, value: Vec<f64>, aux: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value, aux });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, param: ParamId) -> NodeId {
        let value = self.params.get(param).values.clone();
        self.push(Op::Param(param), value)
    }

    pub fn lookup(&mut self, param: ParamId, row: usize) -> NodeId {
        let value = self.params.get(param).row(row).to_vec();
        self.push(Op::Lookup { param, row }, value)
    }

    pub fn affine(&mut self, w: ParamId, b: ParamId, x: NodeId) -> NodeId {
        let wt = self.params.get(w);
        let (rows, cols) = (wt.shape[0], wt.shape[1]);
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), cols, "affine input width");
        let mut out = self.params.get(b).values.clone();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &wt.values[r * cols..(r + 1) * cols];
            *o += dot(row, xv);
        }
        debug_assert_eq!(out.len(), rows);
        self.push(Op::Affine { w, b, x }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add(a, b), value)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let len = parts.iter().map(|p| self.nodes[p.0].value.len()).sum();
        let mut value = Vec::with_capacity(len);
        for p in parts {
            value.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(Op::Concat(parts.to_vec()), value)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let value = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), value)
    }

    /// Returns the `[h; c]` node of one LSTM step.
    pub fn lstm_cell(&mut self, gates: NodeId, c_prev: Option<NodeId>) -> NodeId {
        let a = &self.nodes[gates.0].value;
        let h = a.len() / 4;
        let cp = c_prev.map(|c| &self.nodes[c.0].value);
        // aux: i, f, g, o, tanh(c)
        let mut aux = vec![0.0; 5 * h];
        let mut value = vec![0.0; 2 * h];
        for k in 0..h {
            let i = sigmoid(a[k]);
            let f = sigmoid(a[h + k]);
            let g = a[2 * h + k].tanh();
            let o = sigmoid(a[3 * h + k]);
            let c = f * cp.map_or(0.0, |c| c[k]) + i * g;
            let tc = c.tanh();
            aux[k] = i;
            aux[h + k] = f;
            aux[2 * h + k] = g;
            aux[3 * h + k] = o;
            aux[4 * h + k] = tc;
            value[k] = o * tc;
            value[h + k] = c;
        }
        self.push_aux(Op::LstmCell { gates, c_prev }, value, aux)
    }

    /// Reverse pass. `seeds` gives the gradient of the objective with
    /// respect to selected nodes; parameter gradients are added to `grads`.
    pub fn backward(&self, seeds: &[(NodeId, Vec<f64>)], grads: &mut Grads) {
        if seeds.is_empty() {
            return;
        }
        let mut g: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut last = 0;
        for (id, seed) in seeds {
            assert_eq!(seed.len(), self.nodes[id.0].value.len(), "seed width");
            accumulate(&mut g[id.0], seed);
            last = last.max(id.0);
        }

        for idx in (0..=last).rev() {
            let Some(dy) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (acc, d) in grads.get_mut(*p).iter_mut().zip(&dy) {
                        *acc += d;
                    }
                }
                Op::Lookup { param, row } => {
                    let width = dy.len();
                    let acc = &mut grads.get_mut(*param)[row * width..(row + 1) * width];
                    for (a, d) in acc.iter_mut().zip(&dy) {
                        *a += d;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wt = self.params.get(*w);
                    let cols = wt.shape[1];
                    let xv = &self.nodes[x.0].value;
                    {
                        let gw = grads.get_mut(*w);
                        for (r, &d) in dy.iter().enumerate() {
                            if d != 0.0 {
                                let row = &mut gw[r * cols..(r + 1) * cols];
                                for (a, xi) in row.iter_mut().zip(xv) {
                                    *a += d * xi;
                                }
                            }
                        }
                    }
                    for (a, d) in grads.get_mut(*b).iter_mut().zip(&dy) {
                        *a += d;
                    }
                    let gx = g[x.0].get_or_insert_with(|| vec![0.0; cols]);
                    for (r, &d) in dy.iter().enumerate() {
                        if d != 0.0 {
                            let row = &wt.values[r * cols..(r + 1) * cols];
                            for (a, wv) in gx.iter_mut().zip(row) {
                                *a += d * wv;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut g[a.0], &dy);
                    accumulate(&mut g[b.0], &dy);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        accumulate(&mut g[p.0], &dy[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.nodes[x.0].value.len();
                    let gx = g[x.0].get_or_insert_with(|| vec![0.0; len]);
                    for (a, d) in gx[*start..].iter_mut().zip(&dy) {
                        *a += d;
                    }
                }
                Op::Tanh(x) => {
                    let local: Vec<f64> = node
                        .value
                        .iter()
                        .zip(&dy)
                        .map(|(y, d)| d * (1.0 - y * y))
                        .collect();
                    accumulate(&mut g[x.0], &local);
                }
                Op::LstmCell { gates, c_prev } => {
                    let h = node.value.len() / 2;
                    let aux = &node.aux;
                    let cp = c_prev.map(|c| &self.nodes[c.0].value);
                    let mut da = vec![0.0; 4 * h];
                    let mut dcp = vec![0.0; h];
                    for k in 0..h {
                        let (i, f, gg, o, tc) =
                            (aux[k], aux[h + k], aux[2 * h + k], aux[3 * h + k], aux[4 * h + k]);
                        let dh = dy[k];
                        let dc = dy[h + k] + dh * o * (1.0 - tc * tc);
                        let c_old = cp.map_or(0.0, |c| c[k]);
                        da[k] = dc * gg * i * (1.0 - i);
                        da[h + k] = dc * c_old * f * (1.0 - f);
                        da[2 * h + k] = dc * i * (1.0 - gg * gg);
                        da[3 * h + k] = dh * tc * o * (1.0 - o);
                        dcp[k] = dc * f;
                    }
                    accumulate(&mut g[gates.0], &da);
                    if let Some(c) = c_prev {
                        accumulate(&mut g[c.0], &dcp);
                    }
                }
            }
        }
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, d: &[f64]) {
    match slot {
        Some(v) => {
            for (a, b) in v.iter_mut().zip(d) {
                *a += b;
            }
        }
        None => *slot = Some(d.to_vec()),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating
    // a single running sum.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        sum += a[i] * b[i];
    }
    sum
}
