//! Temporal aggregation of a window of latent embeddings.
//!
//! A GRU runs over the per-snapshot embeddings of every node in parallel
//! (rows are nodes). Each hidden state is scored into a link-probability
//! matrix `σ(H Hᵀ)`, which is folded into an exponential moving average
//! memory. The final logits are the raw Gram matrix of the last hidden
//! state plus `beta_mix` times the memory.

use crate::encoder::glorot;
use crate::error::{Error, Result};
use crate::numerics::{Mat, ParamId, ParamStore, Rng, Tape, Var};

/// Which aggregator head to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// GRU plus momentum memory.
    Momentum,
    /// GRU alone; the memory term is dropped from the logits.
    PlainGru,
}

/// Gate weights in row convention: `X W + H U + b` with `X, H` of shape `N x d`.
#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    pub fn init(store: &mut ParamStore, d: usize, rng: &mut Rng) -> Self {
        let mut w = |store: &mut ParamStore, name: &str| store.add(name, glorot(d, d, rng));
        let w_z = w(store, "gru.w_z");
        let w_r = w(store, "gru.w_r");
        let w_h = w(store, "gru.w_h");
        let u_z = w(store, "gru.u_z");
        let u_r = w(store, "gru.u_r");
        let u_h = w(store, "gru.u_h");
        Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: store.add("gru.b_z", Mat::zeros(1, d)),
            b_r: store.add("gru.b_r", Mat::zeros(1, d)),
            b_h: store.add("gru.b_h", Mat::zeros(1, d)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TamaParams {
    pub gru: GruParams,
    /// Logit of the memory decay `γ`.
    pub raw_gamma: ParamId,
    pub beta_mix: ParamId,
    pub variant: Variant,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl TamaParams {
    /// `gamma_init` must lie in (0, 1).
    pub fn init(
        store: &mut ParamStore,
        d_z: usize,
        gamma_init: f64,
        beta_init: f64,
        variant: Variant,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !(gamma_init > 0.0 && gamma_init < 1.0) {
            return Err(Error::Config(format!(
                "gamma_init must lie in (0, 1), got {gamma_init}"
            )));
        }
        if !beta_init.is_finite() {
            return Err(Error::Config(format!("beta_init must be finite, got {beta_init}")));
        }
        let gru = GruParams::init(store, d_z, rng);
        let raw_gamma = store.add("raw_gamma", Mat::scalar(logit(gamma_init)));
        let beta = match variant {
            Variant::Momentum => beta_init,
            Variant::PlainGru => 0.0,
        };
        let beta_mix = store.add("beta_mix", Mat::scalar(beta));
        Ok(Self {
            gru,
            raw_gamma,
            beta_mix,
            variant,
        })
    }

    pub fn gamma(&self, store: &ParamStore) -> f64 {
        crate::numerics::sigmoid(store.value(self.raw_gamma).item())
    }
}

fn gate(tape: &mut Tape, x: Var, h: Var, w: Var, u: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let hu = tape.matmul(h, u)?;
    let s = tape.add(xw, hu)?;
    tape.add_row_bias(s, b)
}

/// One GRU step for every node row:
/// `z = σ(XW_z + HU_z + b_z)`, `r = σ(XW_r + HU_r + b_r)`,
/// `h̃ = tanh(XW_h + (r ⊙ H)U_h + b_h)`, `H' = (1 − z) ⊙ H + z ⊙ h̃`.
pub fn gru_cell(tape: &mut Tape, store: &ParamStore, p: &GruParams, x: Var, h: Var) -> Result<Var> {
    if tape.shape(x) != tape.shape(h) {
        return Err(Error::Dimension {
            op: "gru_cell",
            lhs: tape.shape(x),
            rhs: tape.shape(h),
        });
    }
    let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] =
        [p.w_z, p.w_r, p.w_h, p.u_z, p.u_r, p.u_h, p.b_z, p.b_r, p.b_h].map(|id| tape.param(store, id));
    let z = gate(tape, x, h, w_z, u_z, b_z)?;
    let z = tape.sigmoid(z)?;
    let r = gate(tape, x, h, w_r, u_r, b_r)?;
    let r = tape.sigmoid(r)?;
    let rh = tape.mul(r, h)?;
    let cand = gate(tape, x, rh, w_h, u_h, b_h)?;
    let cand = tape.tanh(cand)?;
    let keep = tape.rsub_const(1.0, z)?;
    let old = tape.mul(keep, h)?;
    let new = tape.mul(z, cand)?;
    tape.add(old, new)
}

/// Hidden states `H_1..H_w` from a zero initial state.
pub fn gru_sequence(tape: &mut Tape, store: &ParamStore, p: &GruParams, zs: &[Var]) -> Result<Vec<Var>> {
    let first = zs
        .first()
        .ok_or_else(|| Error::Config("gru_sequence needs at least one input".into()))?;
    let (n, d) = tape.shape(*first);
    let mut h = tape.constant(Mat::zeros(n, d));
    let mut out = Vec::with_capacity(zs.len());
    for &x in zs {
        h = gru_cell(tape, store, p, x, h)?;
        out.push(h);
    }
    Ok(out)
}

/// `σ(H Hᵀ)`.
pub fn score_adjacency(tape: &mut Tape, h: Var) -> Result<Var> {
    let g = tape.gram(h)?;
    tape.sigmoid(g)
}

/// `γ M + (1 − γ) Â` with `γ` a 1x1 node.
pub fn memory_update(tape: &mut Tape, m_prev: Var, a_hat: Var, gamma: Var) -> Result<Var> {
    let one_minus = tape.rsub_const(1.0, gamma)?;
    let kept = tape.scale_by(m_prev, gamma)?;
    let added = tape.scale_by(a_hat, one_minus)?;
    tape.add(kept, added)
}

/// Closed form `(1 − γ) Σ_k γ^k Â_{t−k}` of the iterated memory update.
pub fn memory_unfold_oracle(scores: &[Mat], gamma: f64) -> Result<Mat> {
    let last = scores
        .last()
        .ok_or_else(|| Error::Config("memory oracle needs at least one matrix".into()))?;
    let mut out = Mat::zeros(last.rows(), last.cols());
    let mut weight = 1.0 - gamma;
    for a in scores.iter().rev() {
        out.same_shape(a, "memory_unfold_oracle")?;
        out.add_assign(&a.scale(weight));
        weight *= gamma;
    }
    Ok(out)
}

/// Memory matrix carried outside a tape, for evaluation with cross-window
/// persistence.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState {
    pub m: Mat,
    pub steps: usize,
}

impl MemoryState {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: Mat::zeros(n, n),
            steps: 0,
        }
    }

    /// Plain-value version of [`memory_update`].
    pub fn update(&mut self, a_hat: &Mat, gamma: f64) -> Result<()> {
        self.m.same_shape(a_hat, "memory_update")?;
        self.m = self.m.zip_map(a_hat, |m, a| gamma * m + (1.0 - gamma) * a);
        self.steps += 1;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WindowOutput {
    pub logits: Var,
    /// Memory after the last step; absent for [`Variant::PlainGru`].
    pub memory: Option<Var>,
}

/// Aggregates the window embeddings into symmetric `N x N` link logits.
/// The memory starts from `initial_memory` (zeros when `None`).
pub fn forward_window(
    tape: &mut Tape,
    store: &ParamStore,
    params: &TamaParams,
    zs: &[Var],
    initial_memory: Option<&Mat>,
) -> Result<WindowOutput> {
    let hs = gru_sequence(tape, store, &params.gru, zs)?;
    let h_last = *hs.last().expect("non-empty sequence");
    let gram = tape.gram(h_last)?;
    if params.variant == Variant::PlainGru {
        return Ok(WindowOutput {
            logits: gram,
            memory: None,
        });
    }
    let n = tape.shape(h_last).0;
    let raw_gamma = tape.param(store, params.raw_gamma);
    let gamma = tape.sigmoid(raw_gamma)?;
    let mut m = tape.constant(initial_memory.cloned().unwrap_or_else(|| Mat::zeros(n, n)));
    for &h in &hs {
        let a_hat = score_adjacency(tape, h)?;
        m = memory_update(tape, m, a_hat, gamma)?;
    }
    let beta = tape.param(store, params.beta_mix);
    let mixed = tape.scale_by(m, beta)?;
    let logits = tape.add(gram, mixed)?;
    Ok(WindowOutput {
        logits,
        memory: Some(m),
    })
}
