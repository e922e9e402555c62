//! Model definition: shapes, parameters, joint states, and the energy
//! function.
//!
//! The model is a layered Boltzmann machine over binary visible units `v`,
//! `L` layers of binary hidden units `h^(1..L)`, and an optional one-of-k
//! label unit `y` attached to the top hidden layer:
//!
//! ```text
//! E(v,h,y) = - v^T W^(1) h^(1) - sum_l h^(l)T W^(l+1) h^(l+1)
//!            - h^(L)T W^(y) y - b_v^T v - sum_l b_h^(l)T h^(l) - b_y^T y
//! ```
//!
//! When centering offsets are present, every unit value `u` in the energy
//! is replaced by `u - beta_u`. [`to_uncentered`] folds the offsets into
//! the biases, producing an offset-free parameter set for the identical
//! distribution (energies shift by a state-independent constant).

use serde::{Deserialize, Serialize};

use crate::numerics::{logit, Matrix, Rng};
use crate::{Error, Result};

/// Layer layout of a model: `d` visible units, hidden layer sizes, and the
/// number of label classes (`k = 0` means no label unit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub d: usize,
    pub layer_sizes: Vec<usize>,
    pub k: usize,
}

impl ModelShape {
    pub fn new(d: usize, layer_sizes: Vec<usize>, k: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidConfig("visible count must be >= 1".into()));
        }
        if layer_sizes.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one hidden layer is required".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n < 1) {
            return Err(Error::InvalidConfig(
                "hidden layer sizes must be >= 1".into(),
            ));
        }
        Ok(ModelShape { d, layer_sizes, k })
    }

    /// Number of hidden layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn has_label(&self) -> bool {
        self.k > 0
    }

    /// Total count of binary units (visibles plus all hidden layers).
    pub fn total_binary_units(&self) -> usize {
        self.d + self.layer_sizes.iter().sum::<usize>()
    }

    fn describe(&self) -> String {
        format!("d={} layers={:?} k={}", self.d, self.layer_sizes, self.k)
    }
}

impl std::fmt::Display for ModelShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Centering offsets, one value per unit, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offsets {
    pub v: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

/// All trainable tensors of a model, plus optional centering offsets.
///
/// `w[0]` is `D x N_1` between `v` and `h^(1)`; `w[l]` is `N_l x N_{l+1}`;
/// `wy` is `N_L x k` between the top hidden layer and the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub shape: ModelShape,
    pub w: Vec<Matrix>,
    pub wy: Option<Matrix>,
    pub b_v: Vec<f64>,
    pub b_h: Vec<Vec<f64>>,
    pub b_y: Option<Vec<f64>>,
    pub offsets: Option<Offsets>,
}

/// How to initialize parameters.
#[derive(Debug, Clone)]
pub struct InitConfig {
    /// Weights are drawn from `uniform(-weight_scale, weight_scale)`.
    pub weight_scale: f64,
    /// Constant used for all biases.
    pub bias_value: f64,
    /// When set, visible biases are seeded at `logit` of these per-pixel
    /// means instead of `bias_value`.
    pub visible_bias_means: Option<Vec<f64>>,
    /// When set, the model is centered with these offsets.
    pub centering: Option<CenteringInit>,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            weight_scale: 0.05,
            bias_value: 0.0,
            visible_bias_means: None,
            centering: None,
        }
    }
}

/// Offset choices for a centered model. Hidden and label offsets default to
/// 0.5; visible offsets default to the data marginals when available.
#[derive(Debug, Clone)]
pub struct CenteringInit {
    pub visible: VisibleOffsets,
    pub hidden: f64,
    pub label: f64,
}

#[derive(Debug, Clone)]
pub enum VisibleOffsets {
    Constant(f64),
    Means(Vec<f64>),
}

impl Default for CenteringInit {
    fn default() -> Self {
        CenteringInit {
            visible: VisibleOffsets::Constant(0.5),
            hidden: 0.5,
            label: 0.5,
        }
    }
}

impl Params {
    /// All-zero parameters for a shape.
    pub fn zeros(shape: ModelShape) -> Self {
        let nl = shape.num_layers();
        let mut w = Vec::with_capacity(nl);
        w.push(Matrix::zeros(shape.d, shape.layer_sizes[0]));
        for l in 1..nl {
            w.push(Matrix::zeros(shape.layer_sizes[l - 1], shape.layer_sizes[l]));
        }
        let wy = if shape.has_label() {
            Some(Matrix::zeros(shape.layer_sizes[nl - 1], shape.k))
        } else {
            None
        };
        Params {
            b_v: vec![0.0; shape.d],
            b_h: shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            b_y: if shape.has_label() {
                Some(vec![0.0; shape.k])
            } else {
                None
            },
            w,
            wy,
            offsets: None,
            shape,
        }
    }

    /// Seeded initialization: weights uniform in `(-a, a)` drawn in a fixed
    /// order (each weight matrix row-major, then the label matrix), biases
    /// at constants.
    pub fn init(shape: ModelShape, rng: &mut Rng, cfg: &InitConfig) -> Result<Self> {
        let mut p = Params::zeros(shape.clone());
        let a = cfg.weight_scale;
        for w in &mut p.w {
            for entry in w.data_mut() {
                *entry = rng.uniform_range(-a, a);
            }
        }
        if let Some(wy) = &mut p.wy {
            for entry in wy.data_mut() {
                *entry = rng.uniform_range(-a, a);
            }
        }
        for b in &mut p.b_v {
            *b = cfg.bias_value;
        }
        if let Some(means) = &cfg.visible_bias_means {
            if means.len() != shape.d {
                return Err(Error::shape(
                    format!("{} visible means", shape.d),
                    format!("{}", means.len()),
                ));
            }
            for (b, &m) in p.b_v.iter_mut().zip(means) {
                *b = logit(m);
            }
        }
        for layer in &mut p.b_h {
            for b in layer.iter_mut() {
                *b = cfg.bias_value;
            }
        }
        if let Some(by) = &mut p.b_y {
            for b in by.iter_mut() {
                *b = cfg.bias_value;
            }
        }
        if let Some(c) = &cfg.centering {
            let v = match &c.visible {
                VisibleOffsets::Constant(x) => vec![*x; shape.d],
                VisibleOffsets::Means(m) => {
                    if m.len() != shape.d {
                        return Err(Error::shape(
                            format!("{} visible offsets", shape.d),
                            format!("{}", m.len()),
                        ));
                    }
                    m.clone()
                }
            };
            p.offsets = Some(Offsets {
                v,
                h: shape.layer_sizes.iter().map(|&n| vec![c.hidden; n]).collect(),
                y: if shape.has_label() {
                    Some(vec![c.label; shape.k])
                } else {
                    None
                },
            });
        }
        Ok(p)
    }

    pub fn num_layers(&self) -> usize {
        self.shape.num_layers()
    }

    /// Visible offsets or zeros.
    pub fn beta_v(&self) -> Option<&[f64]> {
        self.offsets.as_ref().map(|o| o.v.as_slice())
    }

    pub fn beta_h(&self, l: usize) -> Option<&[f64]> {
        self.offsets.as_ref().map(|o| o.h[l].as_slice())
    }

    pub fn beta_y(&self) -> Option<&[f64]> {
        self.offsets.as_ref().and_then(|o| o.y.as_deref())
    }

    /// Iterate over tensor identifiers in a fixed order.
    pub fn tensor_ids(&self) -> Vec<TensorId> {
        tensor_ids_for(&self.shape)
    }

    /// Flat view of one tensor (weight matrices are row-major).
    pub fn tensor(&self, id: TensorId) -> &[f64] {
        match id {
            TensorId::W(l) => self.w[l].data(),
            TensorId::Wy => self.wy.as_ref().expect("model has no label unit").data(),
            TensorId::BiasV => &self.b_v,
            TensorId::BiasH(l) => &self.b_h[l],
            TensorId::BiasY => self.b_y.as_ref().expect("model has no label unit"),
        }
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> &mut [f64] {
        match id {
            TensorId::W(l) => self.w[l].data_mut(),
            TensorId::Wy => self.wy.as_mut().expect("model has no label unit").data_mut(),
            TensorId::BiasV => &mut self.b_v,
            TensorId::BiasH(l) => &mut self.b_h[l],
            TensorId::BiasY => self.b_y.as_mut().expect("model has no label unit"),
        }
    }

    /// Apply `params += alpha * grad` without projection.
    pub fn add_scaled_gradient(&mut self, grad: &Gradient, alpha: f64) {
        for (w, g) in self.w.iter_mut().zip(&grad.w) {
            w.add_scaled(g, alpha);
        }
        if let (Some(wy), Some(gy)) = (&mut self.wy, &grad.wy) {
            wy.add_scaled(gy, alpha);
        }
        crate::numerics::axpy(alpha, &grad.b_v, &mut self.b_v);
        for (b, g) in self.b_h.iter_mut().zip(&grad.b_h) {
            crate::numerics::axpy(alpha, g, b);
        }
        if let (Some(b), Some(g)) = (&mut self.b_y, &grad.b_y) {
            crate::numerics::axpy(alpha, g, b);
        }
    }
}

/// Identifies one parameter tensor; used for coordinate-wise access in
/// gradient checks and for naming tensors in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorId {
    W(usize),
    Wy,
    BiasV,
    BiasH(usize),
    BiasY,
}

impl std::fmt::Display for TensorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TensorId::W(l) => write!(f, "w[{l}]"),
            TensorId::Wy => write!(f, "wy"),
            TensorId::BiasV => write!(f, "b_v"),
            TensorId::BiasH(l) => write!(f, "b_h[{l}]"),
            TensorId::BiasY => write!(f, "b_y"),
        }
    }
}

fn tensor_ids_for(shape: &ModelShape) -> Vec<TensorId> {
    let mut ids = Vec::new();
    for l in 0..shape.num_layers() {
        ids.push(TensorId::W(l));
    }
    if shape.has_label() {
        ids.push(TensorId::Wy);
    }
    ids.push(TensorId::BiasV);
    for l in 0..shape.num_layers() {
        ids.push(TensorId::BiasH(l));
    }
    if shape.has_label() {
        ids.push(TensorId::BiasY);
    }
    ids
}

/// Per-tensor gradient container with the same shapes as [`Params`].
/// Centering offsets are fixed reparameterization constants, not trainable,
/// so they carry no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Vec<Matrix>,
    pub wy: Option<Matrix>,
    pub b_v: Vec<f64>,
    pub b_h: Vec<Vec<f64>>,
    pub b_y: Option<Vec<f64>>,
}

impl Gradient {
    pub fn zeros(shape: &ModelShape) -> Self {
        let p = Params::zeros(shape.clone());
        Gradient {
            w: p.w,
            wy: p.wy,
            b_v: p.b_v,
            b_h: p.b_h,
            b_y: p.b_y,
        }
    }

    pub fn tensor(&self, id: TensorId) -> &[f64] {
        match id {
            TensorId::W(l) => self.w[l].data(),
            TensorId::Wy => self.wy.as_ref().expect("no label tensor").data(),
            TensorId::BiasV => &self.b_v,
            TensorId::BiasH(l) => &self.b_h[l],
            TensorId::BiasY => self.b_y.as_ref().expect("no label tensor"),
        }
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> &mut [f64] {
        match id {
            TensorId::W(l) => self.w[l].data_mut(),
            TensorId::Wy => self.wy.as_mut().expect("no label tensor").data_mut(),
            TensorId::BiasV => &mut self.b_v,
            TensorId::BiasH(l) => &mut self.b_h[l],
            TensorId::BiasY => self.b_y.as_mut().expect("no label tensor"),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &Gradient, alpha: f64) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            a.add_scaled(b, alpha);
        }
        if let (Some(a), Some(b)) = (&mut self.wy, &other.wy) {
            a.add_scaled(b, alpha);
        }
        crate::numerics::axpy(alpha, &other.b_v, &mut self.b_v);
        for (a, b) in self.b_h.iter_mut().zip(&other.b_h) {
            crate::numerics::axpy(alpha, b, a);
        }
        if let (Some(a), Some(b)) = (&mut self.b_y, &other.b_y) {
            crate::numerics::axpy(alpha, b, a);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for w in &mut self.w {
            w.scale(alpha);
        }
        if let Some(wy) = &mut self.wy {
            wy.scale(alpha);
        }
        for b in &mut self.b_v {
            *b *= alpha;
        }
        for layer in &mut self.b_h {
            for b in layer.iter_mut() {
                *b *= alpha;
            }
        }
        if let Some(by) = &mut self.b_y {
            for b in by.iter_mut() {
                *b *= alpha;
            }
        }
    }

    /// Name of the first tensor containing a non-finite entry, if any.
    pub fn find_non_finite(&self, shape: &ModelShape) -> Option<String> {
        for id in tensor_ids_for(shape) {
            if self.tensor(id).iter().any(|v| !v.is_finite()) {
                return Some(id.to_string());
            }
        }
        None
    }

    /// Largest absolute entry across all tensors.
    pub fn max_abs(&self, shape: &ModelShape) -> f64 {
        tensor_ids_for(shape)
            .into_iter()
            .flat_map(|id| self.tensor(id).iter().cloned())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A fully instantiated joint state: binary visibles and hiddens plus an
/// optional label class.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub v: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub y: Option<usize>,
}

impl FullState {
    pub fn zeros(shape: &ModelShape) -> Self {
        FullState {
            v: vec![0.0; shape.d],
            h: shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            y: if shape.has_label() { Some(0) } else { None },
        }
    }

    pub fn matches(&self, shape: &ModelShape) -> bool {
        self.v.len() == shape.d
            && self.h.len() == shape.num_layers()
            && self
                .h
                .iter()
                .zip(&shape.layer_sizes)
                .all(|(h, &n)| h.len() == n)
            && match self.y {
                Some(c) => shape.has_label() && c < shape.k,
                None => !shape.has_label(),
            }
    }

    /// One-hot encoding of the label, if present.
    pub fn y_onehot(&self, k: usize) -> Option<Vec<f64>> {
        self.y.map(|c| {
            let mut v = vec![0.0; k];
            v[c] = 1.0;
            v
        })
    }

    fn describe(&self) -> String {
        format!(
            "v len {}, h lens {:?}, y {:?}",
            self.v.len(),
            self.h.iter().map(Vec::len).collect::<Vec<_>>(),
            self.y
        )
    }
}

/// Subtract an optional offset vector from unit values.
pub(crate) fn centered(vals: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
    match offset {
        None => vals.to_vec(),
        Some(beta) => vals.iter().zip(beta).map(|(v, b)| v - b).collect(),
    }
}

/// Energy of a joint state under the given parameters.
pub fn energy(params: &Params, state: &FullState) -> Result<f64> {
    if !state.matches(&params.shape) {
        return Err(Error::shape(params.shape.describe(), state.describe()));
    }
    let y1hot = state.y_onehot(params.shape.k);
    Ok(energy_of_values(
        params,
        &state.v,
        &state.h,
        y1hot.as_deref(),
    ))
}

/// Energy evaluated on arbitrary real-valued unit vectors (binary states or
/// mean-field means). Shapes must already agree.
pub(crate) fn energy_of_values(
    params: &Params,
    v: &[f64],
    h: &[Vec<f64>],
    y: Option<&[f64]>,
) -> f64 {
    let nl = params.num_layers();
    let vc = centered(v, params.beta_v());
    let hc: Vec<Vec<f64>> = (0..nl)
        .map(|l| centered(&h[l], params.beta_h(l)))
        .collect();
    let mut e = 0.0;
    e -= crate::numerics::dot(&vc, &params.w[0].matvec(&hc[0]));
    for l in 1..nl {
        e -= crate::numerics::dot(&hc[l - 1], &params.w[l].matvec(&hc[l]));
    }
    if let (Some(wy), Some(yv)) = (&params.wy, y) {
        let yc = centered(yv, params.beta_y());
        e -= crate::numerics::dot(&hc[nl - 1], &wy.matvec(&yc));
        e -= crate::numerics::dot(params.b_y.as_ref().unwrap(), &yc);
    }
    e -= crate::numerics::dot(&params.b_v, &vc);
    for l in 0..nl {
        e -= crate::numerics::dot(&params.b_h[l], &hc[l]);
    }
    e
}

/// Fold centering offsets into the biases, producing an offset-free
/// parameter set that defines the identical probability distribution.
///
/// With `E(s) = -sum (s_a - beta_a) W_ab (s_b - beta_b) - sum b_a (s_a - beta_a)`,
/// collecting the terms linear in `s_a` gives the equivalent uncentered bias
/// `b'_a = b_a - sum_b W_ab beta_b` over the neighbors of `a`; energies then
/// differ only by a state-independent constant.
pub fn to_uncentered(params: &Params) -> Params {
    let Some(off) = &params.offsets else {
        return params.clone();
    };
    let nl = params.num_layers();
    let mut out = params.clone();
    // b_v' = b_v - W^(1) beta_h1
    let w1_bh1 = params.w[0].matvec(&off.h[0]);
    for (b, adj) in out.b_v.iter_mut().zip(&w1_bh1) {
        *b -= adj;
    }
    for l in 0..nl {
        // Below neighbor: v for l = 0, h^(l-1) otherwise.
        let below = if l == 0 {
            params.w[0].matvec_t(&off.v)
        } else {
            params.w[l].matvec_t(&off.h[l - 1])
        };
        for (b, adj) in out.b_h[l].iter_mut().zip(&below) {
            *b -= adj;
        }
        // Above neighbor: h^(l+1), or y at the top.
        if l + 1 < nl {
            let above = params.w[l + 1].matvec(&off.h[l + 1]);
            for (b, adj) in out.b_h[l].iter_mut().zip(&above) {
                *b -= adj;
            }
        } else if let (Some(wy), Some(by)) = (&params.wy, &off.y) {
            let above = wy.matvec(by);
            for (b, adj) in out.b_h[l].iter_mut().zip(&above) {
                *b -= adj;
            }
        }
    }
    if let Some(wy) = &params.wy {
        let adj = wy.matvec_t(&off.h[nl - 1]);
        for (b, a) in out.b_y.as_mut().unwrap().iter_mut().zip(&adj) {
            *b -= a;
        }
    }
    out.offsets = None;
    out
}

/// Pre-activation of hidden layer `l` (0-based): contributions from the
/// layer below (`v` for `l = 0`), the layer above (`h^(l+1)`, or `y` values
/// at the top when a label unit exists), and the bias. Offsets are
/// subtracted from the incoming values when the model is centered.
pub fn preact_hidden(
    params: &Params,
    l: usize,
    below: &[f64],
    above: Option<&[f64]>,
) -> Vec<f64> {
    let nl = params.num_layers();
    let below_c = if l == 0 {
        centered(below, params.beta_v())
    } else {
        centered(below, params.beta_h(l - 1))
    };
    let mut a = params.w[l].matvec_t(&below_c);
    if l + 1 < nl {
        let above = above.expect("missing layer above");
        let above_c = centered(above, params.beta_h(l + 1));
        let up = params.w[l + 1].matvec(&above_c);
        for (ai, ui) in a.iter_mut().zip(&up) {
            *ai += ui;
        }
    } else if let Some(wy) = &params.wy {
        let yv = above.expect("missing label values above top layer");
        let yc = centered(yv, params.beta_y());
        let up = wy.matvec(&yc);
        for (ai, ui) in a.iter_mut().zip(&up) {
            *ai += ui;
        }
    }
    for (ai, bi) in a.iter_mut().zip(&params.b_h[l]) {
        *ai += bi;
    }
    a
}

/// Pre-activation of the visible layer given `h^(1)` values.
pub fn preact_visible(params: &Params, h1: &[f64]) -> Vec<f64> {
    let h1c = centered(h1, params.beta_h(0));
    let mut a = params.w[0].matvec(&h1c);
    for (ai, bi) in a.iter_mut().zip(&params.b_v) {
        *ai += bi;
    }
    a
}

/// Pre-activation of the label unit given top hidden layer values.
pub fn preact_label(params: &Params, h_top: &[f64]) -> Vec<f64> {
    let nl = params.num_layers();
    let htc = centered(h_top, params.beta_h(nl - 1));
    let wy = params.wy.as_ref().expect("model has no label unit");
    let mut a = wy.matvec_t(&htc);
    for (ai, bi) in a.iter_mut().zip(params.b_y.as_ref().unwrap()) {
        *ai += bi;
    }
    a
}

/// Accumulate `weight * d(-E)/dW` for every weight matrix, evaluated at the
/// given unit values (binary samples or means — the caller is responsible
/// for any factorization assumption).
pub fn accumulate_edge_stats(
    params: &Params,
    v: &[f64],
    h: &[Vec<f64>],
    y: Option<&[f64]>,
    weight: f64,
    grad: &mut Gradient,
) {
    let nl = params.num_layers();
    let vc = centered(v, params.beta_v());
    let hc: Vec<Vec<f64>> = (0..nl)
        .map(|l| centered(&h[l], params.beta_h(l)))
        .collect();
    grad.w[0].add_outer(&vc, &hc[0], weight);
    for l in 1..nl {
        grad.w[l].add_outer(&hc[l - 1], &hc[l], weight);
    }
    if let (Some(gy), Some(yv)) = (&mut grad.wy, y) {
        let yc = centered(yv, params.beta_y());
        gy.add_outer(&hc[nl - 1], &yc, weight);
    }
}

/// Accumulate `weight * d(-E)/db` for every bias vector.
pub fn accumulate_bias_stats(
    params: &Params,
    v: &[f64],
    h: &[Vec<f64>],
    y: Option<&[f64]>,
    weight: f64,
    grad: &mut Gradient,
) {
    let nl = params.num_layers();
    let vc = centered(v, params.beta_v());
    crate::numerics::axpy(weight, &vc, &mut grad.b_v);
    for l in 0..nl {
        let hc = centered(&h[l], params.beta_h(l));
        crate::numerics::axpy(weight, &hc, &mut grad.b_h[l]);
    }
    if let (Some(gy), Some(yv)) = (&mut grad.b_y, y) {
        let yc = centered(yv, params.beta_y());
        crate::numerics::axpy(weight, &yc, gy);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_shape() -> ModelShape {
        ModelShape::new(3, vec![2, 2], 2).unwrap()
    }

    fn random_params(seed: u64, shape: ModelShape, scale: f64) -> Params {
        let mut rng = Rng::new(seed);
        let mut p = Params::init(
            shape,
            &mut rng,
            &InitConfig {
                weight_scale: scale,
                ..Default::default()
            },
        )
        .unwrap();
        for b in &mut p.b_v {
            *b = rng.uniform_range(-0.5, 0.5);
        }
        for layer in &mut p.b_h {
            for b in layer.iter_mut() {
                *b = rng.uniform_range(-0.5, 0.5);
            }
        }
        if let Some(by) = &mut p.b_y {
            for b in by.iter_mut() {
                *b = rng.uniform_range(-0.5, 0.5);
            }
        }
        p
    }

    fn random_state(seed: u64, shape: &ModelShape) -> FullState {
        let mut rng = Rng::new(seed);
        FullState {
            v: (0..shape.d)
                .map(|_| if rng.flip(0.5) { 1.0 } else { 0.0 })
                .collect(),
            h: shape
                .layer_sizes
                .iter()
                .map(|&n| {
                    (0..n)
                        .map(|_| if rng.flip(0.5) { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect(),
            y: if shape.has_label() {
                Some(rng.below(shape.k))
            } else {
                None
            },
        }
    }

    /// Second implementation of the energy as explicit scalar loops over
    /// unit pairs, used as an oracle.
    fn scalar_energy(p: &Params, s: &FullState) -> f64 {
        let beta = |off: Option<&[f64]>, i: usize| off.map_or(0.0, |o| o[i]);
        let nl = p.num_layers();
        let mut e = 0.0;
        for i in 0..p.shape.d {
            for j in 0..p.shape.layer_sizes[0] {
                e -= (s.v[i] - beta(p.beta_v(), i))
                    * p.w[0].get(i, j)
                    * (s.h[0][j] - beta(p.beta_h(0), j));
            }
        }
        for l in 1..nl {
            for i in 0..p.shape.layer_sizes[l - 1] {
                for j in 0..p.shape.layer_sizes[l] {
                    e -= (s.h[l - 1][i] - beta(p.beta_h(l - 1), i))
                        * p.w[l].get(i, j)
                        * (s.h[l][j] - beta(p.beta_h(l), j));
                }
            }
        }
        if let (Some(wy), Some(c)) = (&p.wy, s.y) {
            for i in 0..p.shape.layer_sizes[nl - 1] {
                for j in 0..p.shape.k {
                    let yj = if j == c { 1.0 } else { 0.0 };
                    e -= (s.h[nl - 1][i] - beta(p.beta_h(nl - 1), i))
                        * wy.get(i, j)
                        * (yj - beta(p.beta_y(), j));
                }
            }
            for j in 0..p.shape.k {
                let yj = if j == c { 1.0 } else { 0.0 };
                e -= p.b_y.as_ref().unwrap()[j] * (yj - beta(p.beta_y(), j));
            }
        }
        for i in 0..p.shape.d {
            e -= p.b_v[i] * (s.v[i] - beta(p.beta_v(), i));
        }
        for l in 0..nl {
            for j in 0..p.shape.layer_sizes[l] {
                e -= p.b_h[l][j] * (s.h[l][j] - beta(p.beta_h(l), j));
            }
        }
        e
    }

    #[test]
    fn zero_params_zero_energy() {
        let p = Params::zeros(tiny_shape());
        let s = random_state(3, &p.shape);
        assert_eq!(energy(&p, &s).unwrap(), 0.0);
    }

    #[test]
    fn single_weight_energy() {
        let mut p = Params::zeros(tiny_shape());
        p.w[0].set(0, 0, 2.0);
        let mut s = FullState::zeros(&p.shape);
        s.v[0] = 1.0;
        s.h[0][0] = 1.0;
        assert_eq!(energy(&p, &s).unwrap(), -2.0);
    }

    #[test]
    fn energy_matches_scalar_loop_oracle() {
        for seed in 0..10 {
            let p = random_params(seed, tiny_shape(), 0.8);
            let s = random_state(seed + 100, &p.shape);
            let fast = energy(&p, &s).unwrap();
            let slow = scalar_energy(&p, &s);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn energy_with_offsets_matches_scalar_loop_oracle() {
        for seed in 0..10 {
            let mut p = random_params(seed, tiny_shape(), 0.8);
            let mut rng = Rng::new(seed + 999);
            p.offsets = Some(Offsets {
                v: (0..p.shape.d).map(|_| rng.uniform()).collect(),
                h: p
                    .shape
                    .layer_sizes
                    .iter()
                    .map(|&n| (0..n).map(|_| rng.uniform()).collect())
                    .collect(),
                y: Some((0..p.shape.k).map(|_| rng.uniform()).collect()),
            });
            let s = random_state(seed + 200, &p.shape);
            let fast = energy(&p, &s).unwrap();
            let slow = scalar_energy(&p, &s);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn energy_shape_mismatch_is_error() {
        let p = Params::zeros(tiny_shape());
        let other = ModelShape::new(4, vec![2, 2], 2).unwrap();
        let s = FullState::zeros(&other);
        assert!(matches!(
            energy(&p, &s),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn energy_is_linear_in_each_parameter_tensor() {
        // With biases zeroed per tensor, scaling one tensor scales its
        // energy contribution linearly; check via the bilinear expansion.
        let p = random_params(5, tiny_shape(), 0.8);
        let s = random_state(55, &p.shape);
        let base = energy(&p, &s).unwrap();
        for id in p.tensor_ids() {
            let mut scaled = p.clone();
            for x in scaled.tensor_mut(id) {
                *x *= 2.0;
            }
            let e2 = energy(&scaled, &s).unwrap();
            // Contribution of tensor `id` is e2 - base; removing it entirely
            // must give base - (e2 - base).
            let mut zeroed = p.clone();
            for x in zeroed.tensor_mut(id) {
                *x = 0.0;
            }
            let e0 = energy(&zeroed, &s).unwrap();
            assert!(
                (e0 - (2.0 * base - e2)).abs() < 1e-10,
                "tensor {id} not linear"
            );
        }
    }

    #[test]
    fn to_uncentered_with_zero_offsets_is_identity() {
        let mut p = random_params(9, tiny_shape(), 0.8);
        p.offsets = Some(Offsets {
            v: vec![0.0; p.shape.d],
            h: p.shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            y: Some(vec![0.0; p.shape.k]),
        });
        let u = to_uncentered(&p);
        assert!(u.offsets.is_none());
        assert_eq!(u.w, p.w);
        assert_eq!(u.wy, p.wy);
        assert_eq!(u.b_v, p.b_v);
        assert_eq!(u.b_h, p.b_h);
        assert_eq!(u.b_y, p.b_y);
    }

    #[test]
    fn to_uncentered_shifts_energy_by_state_independent_constant() {
        let mut p = random_params(11, tiny_shape(), 0.8);
        p.offsets = Some(Offsets {
            v: vec![0.5; p.shape.d],
            h: p.shape.layer_sizes.iter().map(|&n| vec![0.5; n]).collect(),
            y: Some(vec![0.5; p.shape.k]),
        });
        let u = to_uncentered(&p);
        let mut reference: Option<f64> = None;
        for seed in 0..40 {
            let s = random_state(seed, &p.shape);
            let diff = energy(&p, &s).unwrap() - energy(&u, &s).unwrap();
            match reference {
                None => reference = Some(diff),
                Some(r) => assert!((diff - r).abs() < 1e-12, "diff {diff} vs {r}"),
            }
        }
    }

    #[test]
    fn init_zero_scale_gives_zero_weights() {
        let mut rng = Rng::new(1);
        let p = Params::init(
            tiny_shape(),
            &mut rng,
            &InitConfig {
                weight_scale: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.w.iter().all(|w| w.data().iter().all(|&x| x == 0.0)));
        assert!(p.wy.unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_same_seed_identical() {
        let cfg = InitConfig::default();
        let a = Params::init(tiny_shape(), &mut Rng::new(77), &cfg).unwrap();
        let b = Params::init(tiny_shape(), &mut Rng::new(77), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_weight_distribution_statistics() {
        // 1e5 draws from uniform(-a, a): mean within 3 sigma of 0 where
        // sigma_mean = a / sqrt(3) / sqrt(n); all inside the open interval.
        let shape = ModelShape::new(200, vec![250, 250], 0).unwrap();
        let mut rng = Rng::new(2024);
        let p = Params::init(shape, &mut rng, &InitConfig::default()).unwrap();
        let all: Vec<f64> = p
            .w
            .iter()
            .flat_map(|w| w.data().iter().cloned())
            .collect();
        assert!(all.len() >= 100_000);
        let a = 0.05;
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let three_sigma = 3.0 * a / 3.0f64.sqrt() / n.sqrt();
        assert!(mean.abs() < three_sigma, "mean {mean} vs {three_sigma}");
        assert!(all.iter().all(|&x| x > -a && x < a));
    }

    #[test]
    fn visible_bias_from_means() {
        let mut rng = Rng::new(5);
        let means = vec![0.25, 0.5, 0.9];
        let p = Params::init(
            ModelShape::new(3, vec![2], 0).unwrap(),
            &mut rng,
            &InitConfig {
                visible_bias_means: Some(means.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        for (b, m) in p.b_v.iter().zip(&means) {
            assert!((crate::numerics::sigmoid(*b) - m).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_validation() {
        assert!(ModelShape::new(0, vec![2], 0).is_err());
        assert!(ModelShape::new(2, vec![], 0).is_err());
        assert!(ModelShape::new(2, vec![0], 0).is_err());
        assert!(ModelShape::new(1, vec![1], 0).is_ok());
    }
}
