use crate::encoder::{encode_snapshot, EncoderInput, EncoderParams};
use crate::error::{Error, Result};
use crate::graphdata::{window_ranges, TemporalDataset, WindowSample};
use crate::numerics::{adam_step, AdamState, Mat, ParamStore, Purpose, Rng, Tape, Var};
use crate::par;
use crate::tama::{forward_window, MemoryState, TamaParams, Variant};
use crate::training::metrics::EvalPairs;
use crate::training::{loss_total, symmetrize_target, ModelKind, TrainConfig};

/// Per-snapshot encoder inputs and symmetrized targets, shared by every run
/// on one dataset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub inputs: Vec<EncoderInput>,
    pub targets: Vec<Mat>,
    pub mask: Mat,
}

impl Prepared {
    pub fn new(ds: &TemporalDataset) -> Self {
        let inputs = ds.snapshots.iter().map(EncoderInput::from_snapshot).collect();
        let targets = ds.snapshots.iter().map(|s| symmetrize_target(&s.a).0).collect();
        let n = ds.n();
        let mask = symmetrize_target(&Mat::zeros(n, n)).1;
        Self { inputs, targets, mask }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.mask.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub model: ModelKind,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub final_loss: f64,
    pub losses: Vec<f64>,
    pub aucs: Vec<f64>,
    pub aps: Vec<f64>,
}

/// One seeded training run that can be advanced an epoch at a time.
pub struct Trainer<'a> {
    data: &'a Prepared,
    cfg: &'a TrainConfig,
    model: ModelKind,
    seed: u64,
    store: ParamStore,
    adam: AdamState,
    encoder: EncoderParams,
    tama: Option<TamaParams>,
    train_windows: Vec<WindowSample>,
    eval_window: WindowSample,
    eval_pairs: EvalPairs,
    losses: Vec<f64>,
    aucs: Vec<f64>,
    aps: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Prepared, cfg: &'a TrainConfig, model: ModelKind, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let s = data.len();
        let (train_windows, eval_window) = match model {
            // One snapshot in, the last training snapshot reconstructs itself;
            // evaluation scores the held-out final year.
            ModelKind::Static => {
                if s < 2 {
                    return Err(Error::Config(format!("static baseline needs >= 2 snapshots, got {s}")));
                }
                let train = WindowSample {
                    inputs: s - 2..s - 1,
                    target: s - 2,
                };
                let eval = WindowSample {
                    inputs: s - 2..s - 1,
                    target: s - 1,
                };
                (vec![train], eval)
            }
            _ => {
                if s < cfg.window + 2 {
                    return Err(Error::Config(format!(
                        "window {} needs at least {} snapshots, dataset has {s}",
                        cfg.window,
                        cfg.window + 2
                    )));
                }
                let mut all = window_ranges(s, cfg.window)?;
                let eval = all.pop().expect("at least two windows");
                (all, eval)
            }
        };

        let mut store = ParamStore::new();
        let mut init_rng = Rng::new(seed).substream(Purpose::Init, 0, 0);
        let encoder = EncoderParams::init(&mut store, &cfg.encoder, data.n(), &mut init_rng)?;
        let tama = match model {
            ModelKind::Static => None,
            ModelKind::Tama | ModelKind::Gru => {
                let variant = if model == ModelKind::Tama {
                    Variant::Momentum
                } else {
                    Variant::PlainGru
                };
                Some(TamaParams::init(
                    &mut store,
                    cfg.encoder.d_z,
                    cfg.gamma_init,
                    cfg.beta_init,
                    variant,
                    &mut init_rng,
                )?)
            }
        };
        let adam = AdamState::new(&store);
        let mut neg_rng = Rng::new(cfg.eval_seed).substream(Purpose::Negatives, 0, 0);
        let eval_pairs = EvalPairs::sample(&data.targets[eval_window.target], &mut neg_rng)?;
        Ok(Self {
            data,
            cfg,
            model,
            seed,
            store,
            adam,
            encoder,
            tama,
            train_windows,
            eval_window,
            eval_pairs,
            losses: Vec::new(),
            aucs: Vec::new(),
            aps: Vec::new(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.losses.len()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn tama_params(&self) -> Option<&TamaParams> {
        self.tama.as_ref()
    }

    /// Builds the logits of `window` on a fresh tape; returns the tape, the
    /// logits node and the per-snapshot KL nodes.
    fn forward(
        &self,
        window: &WindowSample,
        mut rng: Option<&mut Rng>,
        memory: Option<&Mat>,
    ) -> Result<(Tape, Var, Vec<Var>, Option<Var>)> {
        let mut tape = Tape::new();
        let mut zs = Vec::with_capacity(window.len());
        let mut kls = Vec::with_capacity(window.len());
        for t in window.inputs.clone() {
            let enc = encode_snapshot(
                &mut tape,
                &self.store,
                &self.encoder,
                &self.cfg.encoder,
                &self.data.inputs[t],
                rng.as_deref_mut(),
            )?;
            zs.push(enc.z);
            kls.push(enc.kl);
        }
        let (logits, mem) = match &self.tama {
            Some(tama) => {
                let out = forward_window(&mut tape, &self.store, tama, &zs, memory)?;
                (out.logits, out.memory)
            }
            None => (tape.gram(zs[0])?, None),
        };
        Ok((tape, logits, kls, mem))
    }

    /// Runs every training window once in chronological order, then
    /// evaluates. Returns `(mean window loss, auc, ap)`.
    pub fn step_epoch(&mut self) -> Result<(f64, f64, f64)> {
        let epoch = self.losses.len() as u32;
        let mut total = 0.0;
        for (k, window) in self.train_windows.clone().iter().enumerate() {
            let mut rng = Rng::new(self.seed).substream(Purpose::Train, epoch, k as u32);
            let (mut tape, logits, kls, _) = self.forward(window, Some(&mut rng), None)?;
            let loss = loss_total(
                &mut tape,
                logits,
                &self.data.targets[window.target],
                &self.data.mask,
                &kls,
                self.cfg.kl_weight,
                self.cfg.pos_weight,
            )?;
            total += tape.value(loss).item();
            let grads = tape.backward(loss)?;
            grads.accumulate_into(&tape, &mut self.store);
            adam_step(&mut self.store, &mut self.adam, self.cfg.lr)?;
        }
        let loss = total / self.train_windows.len() as f64;
        let (auc, ap) = self.evaluate()?;
        self.losses.push(loss);
        self.aucs.push(auc);
        self.aps.push(ap);
        Ok((loss, auc, ap))
    }

    /// Eval-mode logits for the held-out window.
    pub fn eval_logits(&self) -> Result<Mat> {
        let memory = if self.cfg.persist_memory && self.model == ModelKind::Tama {
            Some(self.carried_memory()?)
        } else {
            None
        };
        let (tape, logits, _, _) = self.forward(&self.eval_window, None, memory.as_ref())?;
        Ok(tape.value(logits).clone())
    }

    /// Memory accumulated over every training window, each starting from the
    /// previous window's final memory.
    fn carried_memory(&self) -> Result<Mat> {
        let mut state = MemoryState::zeros(self.data.n());
        for window in &self.train_windows {
            let (tape, _, _, mem) = self.forward(window, None, Some(&state.m))?;
            if let Some(m) = mem {
                state.m = tape.value(m).clone();
                state.steps += window.len();
            }
        }
        Ok(state.m)
    }

    /// Eval-mode logits of an arbitrary window, starting from zero memory.
    pub fn window_logits(&self, window: &WindowSample) -> Result<Mat> {
        let (tape, logits, _, _) = self.forward(window, None, None)?;
        Ok(tape.value(logits).clone())
    }

    pub fn train_windows(&self) -> &[WindowSample] {
        &self.train_windows
    }

    pub fn last_auc(&self) -> Option<f64> {
        self.aucs.last().copied()
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        self.eval_pairs.score(&self.eval_logits()?)
    }

    pub fn finish(self) -> Result<RunResult> {
        let (Some(&auc), Some(&ap), Some(&final_loss)) = (self.aucs.last(), self.aps.last(), self.losses.last()) else {
            return Err(Error::Config("finish called before any epoch".into()));
        };
        Ok(RunResult {
            model: self.model,
            seed: self.seed,
            auc,
            ap,
            final_loss,
            losses: self.losses,
            aucs: self.aucs,
            aps: self.aps,
        })
    }

    /// Trains for the configured number of epochs.
    pub fn run(mut self) -> Result<RunResult> {
        for _ in 0..self.cfg.epochs {
            self.step_epoch()?;
        }
        log::debug!(
            "{} seed {} done: auc {:.4}",
            self.model,
            self.seed,
            self.aucs.last().copied().unwrap_or(f64::NAN)
        );
        self.finish()
    }
}

/// One seeded run of a windowed model.
pub fn train_run(data: &Prepared, cfg: &TrainConfig, model: ModelKind, seed: u64) -> Result<RunResult> {
    Trainer::new(data, cfg, model, seed)?.run()
}

/// One seeded run of the encoder alone on the last training snapshot.
pub fn static_baseline_run(data: &Prepared, cfg: &TrainConfig, seed: u64) -> Result<RunResult> {
    train_run(data, cfg, ModelKind::Static, seed)
}

/// Runs every configured seed, in parallel when enabled; results are in seed order.
pub fn run_protocol(data: &Prepared, cfg: &TrainConfig, model: ModelKind) -> Result<Vec<RunResult>> {
    par::map(cfg.seeds.clone(), |seed| train_run(data, cfg, model, seed))
        .into_iter()
        .collect()
}
