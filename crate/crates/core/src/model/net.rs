//! The network itself: audio encoder, prefix assembly, decoder LM,
//! loss, and the full hand-written backward pass.
//!
//! Layout of one training sequence:
//!
//! ```text
//! [prompt tokens ... <speech marker expands to encoder rows> ...][target tokens]
//! ```
//!
//! The decoder runs causally over the whole sequence; the loss is the
//! mean cross-entropy of the target tokens only, each predicted from
//! the row immediately before it. Prompt rows carry no loss, so their
//! labels contribute exactly nothing to any gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{ModelConfig, ModelError};
use super::params::Params;
use crate::audio::Features;
use crate::nn;
use crate::vocab::SPEECH_ID;

/// One training item. `mel` is consulted only when the prompt contains
/// the speech marker; a marker without audio is an error, audio without
/// a marker is ignored.
pub(crate) struct Batch<'a> {
    pub mel: Option<&'a Features>,
    pub prompt: &'a [u32],
    pub target: &'a [u32],
}

/// Where each decoder row came from — needed to route input gradients.
#[derive(Clone, Copy)]
pub(crate) enum Slot {
    Tok(u32),
    Enc(usize),
}

fn add_into(acc: &mut [f64], delta: &[f64]) {
    for (a, d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

/// Adds `delta` into the gradient tensor `name`.
fn acc(grads: &mut Params, name: &str, delta: &[f64]) {
    add_into(grads.slice_mut(name), delta);
}

// ---------------------------------------------------------------------------
// Transformer block (shared by encoder and decoder)
// ---------------------------------------------------------------------------

/// Activations one pre-norm block must keep for its backward pass.
struct BlockCache {
    t: usize,
    ln1_y: Vec<f64>,
    ln1_xhat: Vec<f64>,
    ln1_rstd: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln2_y: Vec<f64>,
    ln2_xhat: Vec<f64>,
    ln2_rstd: Vec<f64>,
    pre: Vec<f64>,
    h: Vec<f64>,
}

/// x → x + Attn(LN(x)) → · + FFN(LN(·))
fn block_fwd(
    p: &Params,
    prefix: &str,
    x: Vec<f64>,
    t: usize,
    cfg: &ModelConfig,
    causal: bool,
) -> (Vec<f64>, BlockCache) {
    let w = cfg.width;
    let f = cfg.ffn;
    let name = |s: &str| format!("{prefix}.{s}");

    let (ln1_y, ln1_xhat, ln1_rstd) =
        nn::layernorm_fwd(&x, t, w, p.slice(&name("ln1.g")), p.slice(&name("ln1.b")));
    let q = nn::linear_fwd(&ln1_y, t, w, w, p.slice(&name("attn.q.w")), p.slice(&name("attn.q.b")));
    let k = nn::linear_fwd(&ln1_y, t, w, w, p.slice(&name("attn.k.w")), p.slice(&name("attn.k.b")));
    let v = nn::linear_fwd(&ln1_y, t, w, w, p.slice(&name("attn.v.w")), p.slice(&name("attn.v.b")));
    let (ctx, probs) = nn::attention_fwd(&q, &k, &v, t, w, cfg.heads, causal);
    let attn_out =
        nn::linear_fwd(&ctx, t, w, w, p.slice(&name("attn.o.w")), p.slice(&name("attn.o.b")));

    let mut x_mid = x;
    add_into(&mut x_mid, &attn_out);

    let (ln2_y, ln2_xhat, ln2_rstd) =
        nn::layernorm_fwd(&x_mid, t, w, p.slice(&name("ln2.g")), p.slice(&name("ln2.b")));
    let pre = nn::linear_fwd(&ln2_y, t, w, f, p.slice(&name("ffn.w1")), p.slice(&name("ffn.b1")));
    let h = nn::gelu_fwd(&pre);
    let ffn_out = nn::linear_fwd(&h, t, f, w, p.slice(&name("ffn.w2")), p.slice(&name("ffn.b2")));

    let mut y = x_mid.clone();
    add_into(&mut y, &ffn_out);

    let cache = BlockCache {
        t,
        ln1_y,
        ln1_xhat,
        ln1_rstd,
        q,
        k,
        v,
        probs,
        ctx,
        ln2_y,
        ln2_xhat,
        ln2_rstd,
        pre,
        h,
    };
    (y, cache)
}

fn block_bwd(
    p: &Params,
    prefix: &str,
    cache: &BlockCache,
    dy: &[f64],
    cfg: &ModelConfig,
    causal: bool,
    grads: &mut Params,
) -> Vec<f64> {
    let w = cfg.width;
    let f = cfg.ffn;
    let t = cache.t;
    let name = |s: &str| format!("{prefix}.{s}");

    // y = x_mid + ffn_out
    let mut dw2 = vec![0.0; w * f];
    let mut db2 = vec![0.0; w];
    let dh = nn::linear_bwd(&cache.h, t, f, w, p.slice(&name("ffn.w2")), dy, &mut dw2, &mut db2);
    let dpre = nn::gelu_bwd(&cache.pre, &dh);
    let mut dw1 = vec![0.0; f * w];
    let mut db1 = vec![0.0; f];
    let d_ln2_y =
        nn::linear_bwd(&cache.ln2_y, t, w, f, p.slice(&name("ffn.w1")), &dpre, &mut dw1, &mut db1);
    let mut dg2 = vec![0.0; w];
    let mut dbeta2 = vec![0.0; w];
    let mut d_x_mid = nn::layernorm_bwd(
        t,
        w,
        p.slice(&name("ln2.g")),
        &cache.ln2_xhat,
        &cache.ln2_rstd,
        &d_ln2_y,
        &mut dg2,
        &mut dbeta2,
    );
    add_into(&mut d_x_mid, dy); // residual around the FFN

    // x_mid = x + attn_out
    let mut dwo = vec![0.0; w * w];
    let mut dbo = vec![0.0; w];
    let d_ctx =
        nn::linear_bwd(&cache.ctx, t, w, w, p.slice(&name("attn.o.w")), &d_x_mid, &mut dwo, &mut dbo);
    let (dq, dk, dv) = nn::attention_bwd(
        &cache.q,
        &cache.k,
        &cache.v,
        t,
        w,
        cfg.heads,
        causal,
        &cache.probs,
        &d_ctx,
    );
    let mut dwq = vec![0.0; w * w];
    let mut dbq = vec![0.0; w];
    let mut d_ln1_y =
        nn::linear_bwd(&cache.ln1_y, t, w, w, p.slice(&name("attn.q.w")), &dq, &mut dwq, &mut dbq);
    let mut dwk = vec![0.0; w * w];
    let mut dbk = vec![0.0; w];
    add_into(
        &mut d_ln1_y,
        &nn::linear_bwd(&cache.ln1_y, t, w, w, p.slice(&name("attn.k.w")), &dk, &mut dwk, &mut dbk),
    );
    let mut dwv = vec![0.0; w * w];
    let mut dbv = vec![0.0; w];
    add_into(
        &mut d_ln1_y,
        &nn::linear_bwd(&cache.ln1_y, t, w, w, p.slice(&name("attn.v.w")), &dv, &mut dwv, &mut dbv),
    );
    let mut dg1 = vec![0.0; w];
    let mut dbeta1 = vec![0.0; w];
    let mut dx = nn::layernorm_bwd(
        t,
        w,
        p.slice(&name("ln1.g")),
        &cache.ln1_xhat,
        &cache.ln1_rstd,
        &d_ln1_y,
        &mut dg1,
        &mut dbeta1,
    );
    add_into(&mut dx, &d_x_mid); // residual around attention

    acc(grads, &name("ffn.w2"), &dw2);
    acc(grads, &name("ffn.b2"), &db2);
    acc(grads, &name("ffn.w1"), &dw1);
    acc(grads, &name("ffn.b1"), &db1);
    acc(grads, &name("ln2.g"), &dg2);
    acc(grads, &name("ln2.b"), &dbeta2);
    acc(grads, &name("attn.o.w"), &dwo);
    acc(grads, &name("attn.o.b"), &dbo);
    acc(grads, &name("attn.q.w"), &dwq);
    acc(grads, &name("attn.q.b"), &dbq);
    acc(grads, &name("attn.k.w"), &dwk);
    acc(grads, &name("attn.k.b"), &dbk);
    acc(grads, &name("attn.v.w"), &dwv);
    acc(grads, &name("attn.v.b"), &dbv);
    acc(grads, &name("ln1.g"), &dg1);
    acc(grads, &name("ln1.b"), &dbeta1);
    dx
}

// ---------------------------------------------------------------------------
// Audio encoder
// ---------------------------------------------------------------------------

pub(crate) struct EncCache {
    t0: usize,
    t1: usize,
    pub(crate) t2: usize,
    mel: Vec<f64>,
    conv1_pre: Vec<f64>,
    conv1_act: Vec<f64>,
    conv2_pre: Vec<f64>,
    blocks: Vec<BlockCache>,
    lnf_y: Vec<f64>,
    lnf_xhat: Vec<f64>,
    lnf_rstd: Vec<f64>,
}

/// Two strided convolutions with GELU, sinusoidal positions, the
/// encoder stack, a final norm, and the projection into decoder space.
/// Returns the `[t2 × width]` prefix and the backward cache.
pub(crate) fn encoder_fwd(
    p: &Params,
    cfg: &ModelConfig,
    mel: &[f64],
    t0: usize,
) -> (Vec<f64>, EncCache) {
    let w = cfg.width;
    let (s1, s2) = cfg.conv_strides;

    let conv1_pre =
        nn::conv1d_fwd(mel, t0, cfg.mel_dim(), w, cfg.kernel, s1, p.slice("enc.conv1.w"), p.slice("enc.conv1.b"));
    let t1 = nn::conv1d_out_len(t0, s1);
    let conv1_act = nn::gelu_fwd(&conv1_pre);
    let conv2_pre =
        nn::conv1d_fwd(&conv1_act, t1, w, w, cfg.kernel, s2, p.slice("enc.conv2.w"), p.slice("enc.conv2.b"));
    let t2 = nn::conv1d_out_len(t1, s2);

    let mut x = nn::gelu_fwd(&conv2_pre);
    add_into(&mut x, &nn::sinusoid_table(t2, w));

    let mut blocks = Vec::with_capacity(cfg.enc_layers);
    for l in 0..cfg.enc_layers {
        let (y, c) = block_fwd(p, &format!("enc.{l}"), x, t2, cfg, false);
        x = y;
        blocks.push(c);
    }
    let (lnf_y, lnf_xhat, lnf_rstd) =
        nn::layernorm_fwd(&x, t2, w, p.slice("enc.ln_out.g"), p.slice("enc.ln_out.b"));
    let enc_out = nn::linear_fwd(&lnf_y, t2, w, w, p.slice("proj.w"), p.slice("proj.b"));

    let cache = EncCache {
        t0,
        t1,
        t2,
        mel: mel.to_vec(),
        conv1_pre,
        conv1_act,
        conv2_pre,
        blocks,
        lnf_y,
        lnf_xhat,
        lnf_rstd,
    };
    (enc_out, cache)
}

fn encoder_bwd(
    p: &Params,
    cfg: &ModelConfig,
    cache: &EncCache,
    d_enc_out: &[f64],
    grads: &mut Params,
) {
    let w = cfg.width;
    let (s1, s2) = cfg.conv_strides;

    let mut dproj_w = vec![0.0; w * w];
    let mut dproj_b = vec![0.0; w];
    let d_lnf_y = nn::linear_bwd(
        &cache.lnf_y,
        cache.t2,
        w,
        w,
        p.slice("proj.w"),
        d_enc_out,
        &mut dproj_w,
        &mut dproj_b,
    );
    let mut dg = vec![0.0; w];
    let mut db = vec![0.0; w];
    let mut d_x = nn::layernorm_bwd(
        cache.t2,
        w,
        p.slice("enc.ln_out.g"),
        &cache.lnf_xhat,
        &cache.lnf_rstd,
        &d_lnf_y,
        &mut dg,
        &mut db,
    );
    acc(grads, "proj.w", &dproj_w);
    acc(grads, "proj.b", &dproj_b);
    acc(grads, "enc.ln_out.g", &dg);
    acc(grads, "enc.ln_out.b", &db);

    for l in (0..cfg.enc_layers).rev() {
        d_x = block_bwd(p, &format!("enc.{l}"), &cache.blocks[l], &d_x, cfg, false, grads);
    }

    // sinusoidal positions are constants, so d_x passes straight to the
    // second conv's activation
    let d_conv2_pre = nn::gelu_bwd(&cache.conv2_pre, &d_x);
    let mut dw2 = vec![0.0; w * w * cfg.kernel];
    let mut db2 = vec![0.0; w];
    let d_conv1_act = nn::conv1d_bwd(
        &cache.conv1_act,
        cache.t1,
        w,
        w,
        cfg.kernel,
        s2,
        p.slice("enc.conv2.w"),
        &d_conv2_pre,
        &mut dw2,
        &mut db2,
    );
    let d_conv1_pre = nn::gelu_bwd(&cache.conv1_pre, &d_conv1_act);
    let mut dw1 = vec![0.0; w * cfg.mel_dim() * cfg.kernel];
    let mut db1 = vec![0.0; w];
    // the gradient into the mel features is discarded — inputs are data
    let _ = nn::conv1d_bwd(
        &cache.mel,
        cache.t0,
        cfg.mel_dim(),
        w,
        cfg.kernel,
        s1,
        p.slice("enc.conv1.w"),
        &d_conv1_pre,
        &mut dw1,
        &mut db1,
    );
    acc(grads, "enc.conv2.w", &dw2);
    acc(grads, "enc.conv2.b", &db2);
    acc(grads, "enc.conv1.w", &dw1);
    acc(grads, "enc.conv1.b", &db1);
}

// ---------------------------------------------------------------------------
// Sequence assembly
// ---------------------------------------------------------------------------

/// Embeds a prompt, splicing the encoder output in place of the first
/// speech marker. Any further markers embed as ordinary tokens. Returns
/// rows WITHOUT position embeddings (callers add them), the slot map,
/// and the encoder cache when audio was consumed.
#[allow(clippy::type_complexity)]
pub(crate) fn assemble(
    p: &Params,
    cfg: &ModelConfig,
    mel: Option<&Features>,
    prompt: &[u32],
) -> Result<(Vec<f64>, Vec<Slot>, Option<EncCache>), ModelError> {
    let w = cfg.width;
    for &id in prompt {
        if id as usize >= cfg.vocab {
            return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab });
        }
    }
    let enc = if prompt.contains(&SPEECH_ID) {
        let mel = mel.ok_or(ModelError::MissingAudio)?;
        if mel.frames() > cfg.max_audio_frames {
            return Err(ModelError::AudioTooLong { frames: mel.frames(), max: cfg.max_audio_frames });
        }
        Some(encoder_fwd(p, cfg, mel.as_slice(), mel.frames()))
    } else {
        None
    };

    let tok_embed = p.slice("dec.tok_embed");
    let mut x = Vec::with_capacity((prompt.len() + 16) * w);
    let mut slots = Vec::with_capacity(prompt.len() + 16);
    let mut spliced = false;
    for &id in prompt {
        if id == SPEECH_ID && !spliced {
            if let Some((enc_out, cache)) = &enc {
                spliced = true;
                for r in 0..cache.t2 {
                    x.extend_from_slice(&enc_out[r * w..(r + 1) * w]);
                    slots.push(Slot::Enc(r));
                }
                continue;
            }
        }
        x.extend_from_slice(&tok_embed[id as usize * w..(id as usize + 1) * w]);
        slots.push(Slot::Tok(id));
    }
    Ok((x, slots, enc.map(|(_, c)| c)))
}

// ---------------------------------------------------------------------------
// Full forward pass with loss
// ---------------------------------------------------------------------------

struct RunState {
    loss: f64,
    /// expanded prompt length (loss rows start at p_len − 1)
    p_len: usize,
    n: usize,
    seq_len: usize,
    slots: Vec<Slot>,
    enc: Option<EncCache>,
    blocks: Vec<BlockCache>,
    lnf_xhat: Vec<f64>,
    lnf_rstd: Vec<f64>,
    /// gathered final-norm rows the logits were taken from, `[n × width]`
    loss_rows: Vec<f64>,
    /// softmax of the logits at the loss rows, `[n × vocab]`
    probs: Vec<f64>,
}

fn run(p: &Params, cfg: &ModelConfig, batch: &Batch<'_>) -> Result<RunState, ModelError> {
    let w = cfg.width;
    if batch.prompt.is_empty() || batch.target.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    for &id in batch.target {
        if id as usize >= cfg.vocab {
            return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab });
        }
    }

    let (mut x, mut slots, enc) = assemble(p, cfg, batch.mel, batch.prompt)?;
    let p_len = slots.len();
    if p_len == 0 {
        return Err(ModelError::EmptySequence);
    }
    let tok_embed = p.slice("dec.tok_embed");
    for &id in batch.target {
        x.extend_from_slice(&tok_embed[id as usize * w..(id as usize + 1) * w]);
        slots.push(Slot::Tok(id));
    }
    let seq_len = slots.len();
    if seq_len > cfg.max_seq_len {
        return Err(ModelError::SequenceTooLong { len: seq_len, max: cfg.max_seq_len });
    }
    add_into(&mut x, &p.slice("dec.pos_embed")[..seq_len * w]);

    let mut blocks = Vec::with_capacity(cfg.dec_layers);
    for l in 0..cfg.dec_layers {
        let (y, c) = block_fwd(p, &format!("dec.{l}"), x, seq_len, cfg, true);
        x = y;
        blocks.push(c);
    }
    let (lnf_y, lnf_xhat, lnf_rstd) =
        nn::layernorm_fwd(&x, seq_len, w, p.slice("dec.ln_out.g"), p.slice("dec.ln_out.b"));

    // Logits only where the loss lives: row p_len−1+j predicts target[j].
    let n = batch.target.len();
    let mut loss_rows = Vec::with_capacity(n * w);
    for j in 0..n {
        let row = p_len - 1 + j;
        loss_rows.extend_from_slice(&lnf_y[row * w..(row + 1) * w]);
    }
    let logits =
        nn::linear_fwd(&loss_rows, n, w, cfg.vocab, p.slice("dec.unembed.w"), p.slice("dec.unembed.b"));

    let mut probs = logits.clone();
    let mut loss = 0.0;
    for j in 0..n {
        let row = &mut probs[j * cfg.vocab..(j + 1) * cfg.vocab];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = crate::math::exp(*v - max);
            sum += *v;
        }
        let lse = max + crate::math::ln(sum);
        loss += lse - logits[j * cfg.vocab + batch.target[j] as usize];
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    loss /= n as f64;

    Ok(RunState {
        loss,
        p_len,
        n,
        seq_len,
        slots,
        enc,
        blocks,
        lnf_xhat,
        lnf_rstd,
        loss_rows,
        probs,
    })
}

/// Mean cross-entropy of the target under the model: the plain forward
/// pass behind [`probe::LossProbe`](super::probe::LossProbe) and the
/// finite-difference gradient checks.
pub(crate) fn loss(p: &Params, cfg: &ModelConfig, batch: &Batch<'_>) -> Result<f64, ModelError> {
    Ok(run(p, cfg, batch)?.loss)
}

/// Raw logits at the loss rows, `[target.len() × vocab]`. Test oracle.
#[cfg(test)]
pub(crate) fn loss_row_logits(
    p: &Params,
    cfg: &ModelConfig,
    batch: &Batch<'_>,
) -> Result<Vec<f64>, ModelError> {
    let st = run(p, cfg, batch)?;
    Ok(nn::linear_fwd(
        &st.loss_rows,
        st.n,
        cfg.width,
        cfg.vocab,
        p.slice("dec.unembed.w"),
        p.slice("dec.unembed.b"),
    ))
}

/// Logits for the next token after `ids`, i.e. at the very last row.
/// The reference path for greedy decoding (no KV cache). Test oracle.
#[cfg(test)]
pub(crate) fn last_row_logits(
    p: &Params,
    cfg: &ModelConfig,
    mel: Option<&Features>,
    ids: &[u32],
) -> Result<Vec<f64>, ModelError> {
    let w = cfg.width;
    let (mut x, slots, _enc) = assemble(p, cfg, mel, ids)?;
    let seq_len = slots.len();
    if seq_len == 0 {
        return Err(ModelError::EmptySequence);
    }
    if seq_len > cfg.max_seq_len {
        return Err(ModelError::SequenceTooLong { len: seq_len, max: cfg.max_seq_len });
    }
    add_into(&mut x, &p.slice("dec.pos_embed")[..seq_len * w]);
    for l in 0..cfg.dec_layers {
        let (y, _) = block_fwd(p, &format!("dec.{l}"), x, seq_len, cfg, true);
        x = y;
    }
    let (lnf_y, _, _) =
        nn::layernorm_fwd(&x, seq_len, w, p.slice("dec.ln_out.g"), p.slice("dec.ln_out.b"));
    let last = &lnf_y[(seq_len - 1) * w..seq_len * w];
    Ok(nn::linear_fwd(last, 1, w, cfg.vocab, p.slice("dec.unembed.w"), p.slice("dec.unembed.b")))
}

/// Forward + backward; gradients are ADDED into `grads` (callers zero
/// or batch-accumulate as they see fit). Returns the loss.
pub(crate) fn loss_and_grads(
    p: &Params,
    cfg: &ModelConfig,
    batch: &Batch<'_>,
    grads: &mut Params,
) -> Result<f64, ModelError> {
    let st = run(p, cfg, batch)?;
    let w = cfg.width;
    let v = cfg.vocab;

    // d loss / d logits = (softmax − one-hot) / n
    let mut dlogits = st.probs.clone();
    for j in 0..st.n {
        dlogits[j * v + batch.target[j] as usize] -= 1.0;
    }
    let inv_n = 1.0 / st.n as f64;
    for g in dlogits.iter_mut() {
        *g *= inv_n;
    }

    let mut dw_un = vec![0.0; v * w];
    let mut db_un = vec![0.0; v];
    let d_rows = nn::linear_bwd(
        &st.loss_rows,
        st.n,
        w,
        v,
        p.slice("dec.unembed.w"),
        &dlogits,
        &mut dw_un,
        &mut db_un,
    );
    acc(grads, "dec.unembed.w", &dw_un);
    acc(grads, "dec.unembed.b", &db_un);

    // scatter the gathered rows back into the full sequence
    let mut d_lnf_y = vec![0.0; st.seq_len * w];
    for j in 0..st.n {
        let row = st.p_len - 1 + j;
        d_lnf_y[row * w..(row + 1) * w].copy_from_slice(&d_rows[j * w..(j + 1) * w]);
    }

    let mut dg = vec![0.0; w];
    let mut db = vec![0.0; w];
    let mut d_x = nn::layernorm_bwd(
        st.seq_len,
        w,
        p.slice("dec.ln_out.g"),
        &st.lnf_xhat,
        &st.lnf_rstd,
        &d_lnf_y,
        &mut dg,
        &mut db,
    );
    acc(grads, "dec.ln_out.g", &dg);
    acc(grads, "dec.ln_out.b", &db);

    for l in (0..cfg.dec_layers).rev() {
        d_x = block_bwd(p, &format!("dec.{l}"), &st.blocks[l], &d_x, cfg, true, grads);
    }

    // input gradients: positions, token embeddings, encoder rows
    {
        let d_pos = grads.slice_mut("dec.pos_embed");
        add_into(&mut d_pos[..st.seq_len * w], &d_x);
    }
    let mut d_enc = st.enc.as_ref().map(|c| vec![0.0; c.t2 * w]);
    {
        let d_tok = grads.slice_mut("dec.tok_embed");
        for (row, slot) in st.slots.iter().enumerate() {
            let src = &d_x[row * w..(row + 1) * w];
            match slot {
                Slot::Tok(id) => {
                    add_into(&mut d_tok[*id as usize * w..(*id as usize + 1) * w], src)
                }
                Slot::Enc(r) => {
                    let d_enc = d_enc.as_mut().expect("encoder slot without encoder");
                    add_into(&mut d_enc[r * w..(r + 1) * w], src);
                }
            }
        }
    }
    if let (Some(cache), Some(d)) = (&st.enc, &d_enc) {
        encoder_bwd(p, cfg, cache, d, grads);
    }
    Ok(st.loss)
}
