//! Per-snapshot variational graph encoder.
//!
//! Each snapshot is encoded by `k` attention-style propagation heads that
//! weight in-edges by a column softmax of trade volume (with random edge
//! dropout while training), a two-layer GCN branch over the normalized
//! adjacency, an averaging fusion with a residual skip, and a shared-trunk
//! pair of GCN heads producing the posterior mean and log standard deviation.
//! One [`EncoderParams`] set is shared by every snapshot of a window.

use crate::error::{Error, Result};
use crate::graphdata::GraphSnapshot;
use crate::numerics::{Mat, ParamId, ParamStore, Purpose, Rng, Tape, Var};

/// Bounds applied to the log standard deviation before exponentiation.
pub const LOG_SIGMA_CLAMP: (f64, f64) = (-10.0, 10.0);

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    /// Width of the observed node features.
    pub d_in: usize,
    /// Width of the learnable per-node embedding appended to the features.
    pub d_p: usize,
    pub d_hidden: usize,
    pub d_z: usize,
    /// Number of propagation heads.
    pub heads: usize,
    /// Propagation steps per head.
    pub layers: usize,
    /// Fraction of edges dropped per head while training.
    pub p_drop: f64,
    pub s_init: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_in: 4,
            d_p: 4,
            d_hidden: 32,
            d_z: 32,
            heads: 3,
            layers: 2,
            p_drop: 0.2,
            s_init: 1.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.d_in, self.d_p, self.d_hidden, self.d_z, self.heads, self.layers];
        if widths.contains(&0) {
            return Err(Error::Config(format!("encoder widths must be >= 1: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(Error::Config(format!("p_drop must lie in [0, 1), got {}", self.p_drop)));
        }
        Ok(())
    }
}

/// Parameters of one propagation head.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w_mlp: ParamId,
    pub b_mlp: ParamId,
    pub scale: ParamId,
    /// Per-layer logits of the propagation weight; the weight is their sigmoid.
    pub raw_alpha: Vec<ParamId>,
    /// Per-layer logits of the residual weight.
    pub raw_beta: Vec<ParamId>,
}

#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub x_p: ParamId,
    pub heads: Vec<HeadParams>,
    pub w_gcn0: ParamId,
    pub w_gcn1: ParamId,
    pub w_shared: ParamId,
    pub w_mu: ParamId,
    pub w_logsig: ParamId,
}

/// Uniform `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.uniform_in(-bound, bound))
}

impl EncoderParams {
    /// Registers freshly initialized encoder parameters for `n` nodes.
    pub fn init(store: &mut ParamStore, cfg: &EncoderConfig, n: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let d_x = cfg.d_in + cfg.d_p;
        let x_p = store.add("x_p", Mat::from_fn(n, cfg.d_p, |_, _| 0.01 * rng.normal()));
        let heads = (0..cfg.heads)
            .map(|h| HeadParams {
                w_mlp: store.add(format!("head{h}.w_mlp"), glorot(d_x, cfg.d_hidden, rng)),
                b_mlp: store.add(format!("head{h}.b_mlp"), Mat::zeros(1, cfg.d_hidden)),
                scale: store.add(format!("head{h}.scale"), Mat::scalar(cfg.s_init)),
                raw_alpha: (0..cfg.layers)
                    .map(|l| store.add(format!("head{h}.raw_alpha{l}"), Mat::scalar(0.0)))
                    .collect(),
                raw_beta: (0..cfg.layers)
                    .map(|l| store.add(format!("head{h}.raw_beta{l}"), Mat::scalar(0.0)))
                    .collect(),
            })
            .collect();
        Ok(Self {
            x_p,
            heads,
            w_gcn0: store.add("w_gcn0", glorot(d_x, cfg.d_hidden, rng)),
            w_gcn1: store.add("w_gcn1", glorot(cfg.d_hidden, cfg.d_hidden, rng)),
            w_shared: store.add("w_shared", glorot(cfg.d_hidden, cfg.d_hidden, rng)),
            w_mu: store.add("w_mu", glorot(cfg.d_hidden, cfg.d_z, rng)),
            w_logsig: store.add("w_logsig", glorot(cfg.d_hidden, cfg.d_z, rng)),
        })
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the row sums of `A + I`.
pub fn normalized_adjacency(a: &Mat) -> Mat {
    let n = a.rows();
    let mut out = a.clone();
    for i in 0..n {
        out[(i, i)] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / out.row(i).iter().sum::<f64>().sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    out
}

/// Snapshot matrices plus the precomputed normalized adjacency.
#[derive(Clone, Debug)]
pub struct EncoderInput {
    pub x: Mat,
    pub a: Mat,
    pub t: Mat,
    pub a_hat: Mat,
}

impl EncoderInput {
    pub fn new(x: Mat, a: Mat, t: Mat) -> Self {
        let a_hat = normalized_adjacency(&a);
        Self { x, a, t, a_hat }
    }

    pub fn from_snapshot(s: &GraphSnapshot) -> Self {
        Self::new(s.x.clone(), s.a.clone(), s.t.clone())
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

/// Posterior parameters and the latent sample, as tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct LatentDist {
    pub mu: Var,
    pub log_sigma: Var,
    pub z: Var,
}

/// Concatenates the observed features with the learnable node embedding.
pub fn build_input(tape: &mut Tape, store: &ParamStore, params: &EncoderParams, x: &Mat) -> Result<Var> {
    let xp = tape.param(store, params.x_p);
    if tape.shape(xp).0 != x.rows() {
        return Err(Error::Dimension {
            op: "build_input",
            lhs: x.shape(),
            rhs: tape.shape(xp),
        });
    }
    let xv = tape.constant(x.clone());
    tape.concat_cols(xv, xp)
}

/// Keeps each present edge independently with probability `1 - p_drop`.
pub fn drop_edges(a: &Mat, p_drop: f64, rng: &mut Rng) -> Mat {
    a.map(|v| if v != 0.0 && !rng.bernoulli(p_drop) { 1.0 } else { 0.0 })
}

/// One propagation head. `rng` selects train mode (edge dropout) when present.
pub fn dagan_head(
    tape: &mut Tape,
    store: &ParamStore,
    x_tilde: Var,
    input: &EncoderInput,
    head: &HeadParams,
    p_drop: f64,
    rng: Option<&mut Rng>,
) -> Result<Var> {
    let w = tape.param(store, head.w_mlp);
    let b = tape.param(store, head.b_mlp);
    let s = tape.param(store, head.scale);
    let lin = tape.matmul(x_tilde, w)?;
    let lin = tape.add_row_bias(lin, b)?;
    let act = tape.relu(lin)?;
    let m0 = tape.l2_normalize_rows(act, s)?;

    let mask = match rng {
        Some(r) if p_drop > 0.0 => drop_edges(&input.a, p_drop, r),
        _ => input.a.clone(),
    };
    let volumes = tape.constant(input.t.clone());
    let p = tape.masked_softmax_columns(volumes, &mask)?;

    let mut m = m0;
    for (ra, rb) in head.raw_alpha.iter().zip(&head.raw_beta) {
        let ra = tape.param(store, *ra);
        let rb = tape.param(store, *rb);
        let alpha = tape.sigmoid(ra)?;
        let beta = tape.sigmoid(rb)?;
        let pm = tape.matmul(p, m)?;
        let prop = tape.scale_by(pm, alpha)?;
        let skip = tape.scale_by(m0, beta)?;
        m = tape.add(prop, skip)?;
    }
    Ok(m)
}

/// `Â · h · w`, activation left to the caller.
pub fn gcn_layer(tape: &mut Tape, a_hat: Var, h: Var, w: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    tape.matmul(a_hat, hw)
}

/// `Â · ReLU(Â · X̃ · W0) · W1`.
pub fn gcn_branch(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    x_tilde: Var,
    a_hat: Var,
) -> Result<Var> {
    let w0 = tape.param(store, params.w_gcn0);
    let w1 = tape.param(store, params.w_gcn1);
    let h = gcn_layer(tape, a_hat, x_tilde, w0)?;
    let h = tape.relu(h)?;
    gcn_layer(tape, a_hat, h, w1)
}

/// `mean(h0, heads...) + h0`.
pub fn fuse(tape: &mut Tape, h0: Var, heads: &[Var]) -> Result<Var> {
    let mut all = Vec::with_capacity(heads.len() + 1);
    all.push(h0);
    all.extend_from_slice(heads);
    let avg = tape.mean_stack(&all)?;
    tape.add(avg, h0)
}

/// Shared GCN trunk followed by the mean and log-sigma GCN layers. `z` is
/// set to the mean; [`sample_z`] replaces it when sampling.
pub fn variational_heads(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    h: Var,
    a_hat: Var,
) -> Result<LatentDist> {
    let ws = tape.param(store, params.w_shared);
    let wm = tape.param(store, params.w_mu);
    let wl = tape.param(store, params.w_logsig);
    let g = gcn_layer(tape, a_hat, h, ws)?;
    let g = tape.relu(g)?;
    let mu = gcn_layer(tape, a_hat, g, wm)?;
    let ls = gcn_layer(tape, a_hat, g, wl)?;
    let log_sigma = tape.clamp(ls, LOG_SIGMA_CLAMP.0, LOG_SIGMA_CLAMP.1)?;
    Ok(LatentDist { mu, log_sigma, z: mu })
}

/// Reparameterized draw `μ + exp(logσ) ⊙ ε` in train mode; `μ` in eval mode.
pub fn sample_z(tape: &mut Tape, dist: &LatentDist, rng: Option<&mut Rng>) -> Result<Var> {
    let Some(rng) = rng else {
        return Ok(dist.mu);
    };
    let (r, c) = tape.shape(dist.mu);
    let eps = tape.constant(Mat::from_fn(r, c, |_, _| rng.normal()));
    let sigma = tape.exp(dist.log_sigma)?;
    let noise = tape.mul(sigma, eps)?;
    tape.add(dist.mu, noise)
}

/// `-½ Σ (1 + 2 logσ − μ² − e^{2 logσ})` over every entry, as a 1x1 node.
pub fn kl_divergence(tape: &mut Tape, dist: &LatentDist) -> Result<Var> {
    let count = tape.value(dist.mu).len() as f64;
    let mu_sq = tape.mul(dist.mu, dist.mu)?;
    let two_ls = tape.scale(dist.log_sigma, 2.0)?;
    let var = tape.exp(two_ls)?;
    let t = tape.add(mu_sq, var)?;
    let t = tape.sub(t, two_ls)?;
    let total = tape.sum(t)?;
    tape.affine(total, 0.5, -0.5 * count)
}

/// Output of [`encode_snapshot`].
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub z: Var,
    pub kl: Var,
    pub dist: LatentDist,
}

/// Full per-snapshot pipeline. `rng` selects train mode: per-head edge
/// dropout and latent sampling draw from it in a fixed order.
pub fn encode_snapshot(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    input: &EncoderInput,
    mut rng: Option<&mut Rng>,
) -> Result<Encoded> {
    if input.x.cols() != cfg.d_in {
        return Err(Error::Dimension {
            op: "encode_snapshot",
            lhs: input.x.shape(),
            rhs: (input.n(), cfg.d_in),
        });
    }
    let x_tilde = build_input(tape, store, params, &input.x)?;
    let a_hat = tape.constant(input.a_hat.clone());
    let mut heads = Vec::with_capacity(params.heads.len());
    for head in &params.heads {
        heads.push(dagan_head(
            tape,
            store,
            x_tilde,
            input,
            head,
            cfg.p_drop,
            rng.as_deref_mut(),
        )?);
    }
    let h0 = gcn_branch(tape, store, params, x_tilde, a_hat)?;
    let h = fuse(tape, h0, &heads)?;
    let mut dist = variational_heads(tape, store, params, h, a_hat)?;
    dist.z = sample_z(tape, &dist, rng)?;
    let kl = kl_divergence(tape, &dist)?;
    Ok(Encoded { z: dist.z, kl, dist })
}

/// Fresh encoder parameters from the `Init` sub-stream of `seed`.
pub fn init_encoder(store: &mut ParamStore, cfg: &EncoderConfig, n: usize, seed: u64) -> Result<EncoderParams> {
    let mut rng = Rng::new(seed).substream(Purpose::Init, 0, 0);
    EncoderParams::init(store, cfg, n, &mut rng)
}
