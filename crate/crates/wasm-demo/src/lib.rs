//! Browser bindings for `www/index.html`. Every entry point takes plain
//! numbers or JSON and returns a JSON string.

use lobyitfl::adversary::{AdversarySpec, Attack, CorruptionMode, ProtocolAdversary};
use lobyitfl::discriminator::default_h;
use lobyitfl::field::Modulus;
use lobyitfl::flsim::aggregate::fltrust_poly_real;
use lobyitfl::protocol::{setup, Party, ProtocolParams, Submission, TrainContext};
use lobyitfl::rng::substream;
use lobyitfl::sss;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Shares `secret` among `n` parties with threshold `t` over `F_p`, then
/// reconstructs from the parties listed in `subset`.
pub fn share_demo(secret: u64, n: usize, t: usize, p: u64, seed: u64, subset: &[usize]) -> Result<Value, String> {
    let m = Modulus::new_u64(p).map_err(|e| e.to_string())?;
    let s = m.from_u64(secret);
    let shares = sss::share(&s, n, t, &mut substream(seed, &[])).map_err(|e| e.to_string())?;
    let picked: Vec<_> = shares.iter().filter(|sh| subset.contains(&sh.index)).cloned().collect();
    let rec = sss::reconstruct(&picked, t);
    Ok(json!({
        "modulus": p,
        "secret": s.to_u64(),
        "shares": shares.iter().map(|sh| json!([sh.index, sh.value.to_u64()])).collect::<Vec<_>>(),
        "subset": subset,
        "reconstructed": rec.as_ref().ok().and_then(|v| v.to_u64()),
        "error": rec.err().map(|e| e.to_string()),
    }))
}

/// The discriminator at cosine `x`: real value, ReLU, and the fixed-point
/// trust score at quantization `q` with coefficient scale `q_c`.
pub fn discriminator_demo(x: f64, q: u64, q_c: u64) -> Result<Value, String> {
    let h = default_h();
    let enc = h.encode(q_c, q).map_err(|e| e.to_string())?;
    // cosine numerator for two vectors of squared norm q^2
    let c = (x.clamp(-1.0, 1.0) * (q * q) as f64).round() as i64;
    Ok(json!({
        "x": x,
        "h": h.eval_real(x),
        "relu": x.max(0.0),
        "coefficients": h.coeffs(),
        "encoded": enc.hat,
        "fixed_point": enc.ts_real(&c.into()),
    }))
}

/// One secure round over `updates` (JSON array of equal-length arrays)
/// with root update `root`. Client `tamper` (1-based, 0 for none)
/// corrupts its norm-check share.
pub fn round_demo(updates: &str, root: &str, t: usize, q: u64, tamper: usize, seed: u64) -> Result<Value, String> {
    let ups: Vec<Vec<f64>> = serde_json::from_str(updates).map_err(|e| format!("updates: {e}"))?;
    let root: Vec<f64> = serde_json::from_str(root).map_err(|e| format!("root: {e}"))?;
    let n = ups.len();
    let d = root.len();
    if n == 0 || d == 0 || ups.iter().any(|u| u.len() != d) {
        return Err("need at least one update, all of the root's length".into());
    }
    if t >= n {
        return Err(format!("threshold t = {t} needs more than {t} clients"));
    }
    let params = ProtocolParams {
        n,
        t,
        d,
        eps: 0.02,
        eta: 1.0,
        h: default_h().encode(q, q).map_err(|e| e.to_string())?,
        seed,
    };
    let bits = params.modulus().bits();
    let mut session = setup(params, vec![0.0; d], 1, seed).map_err(|e| e.to_string())?;
    let spec = AdversarySpec {
        byzantine: if tamper > 0 { vec![tamper] } else { Vec::new() },
        attack: Attack::Corruption {
            mode: CorruptionMode::Value,
            phase: Some("norm_open".into()),
        },
        ..Default::default()
    };
    let mut hooks = ProtocolAdversary::new(&spec, seed);
    let mut trainer = |c: &TrainContext| Some(Submission::Real(ups[c.client - 1].clone()));
    let rep = session
        .run_iteration(&root, &mut trainer, &mut hooks)
        .map_err(|e| e.to_string())?;
    let o = &rep.outcome;
    let kept: Vec<Vec<f64>> = o.active.iter().map(|&i| ups[i - 1].clone()).collect();
    Ok(json!({
        "modulus_bits": bits,
        "active": o.active,
        "excluded": o.excluded.iter().map(|(c, p)| json!([c, p.name()])).collect::<Vec<_>>(),
        "secure": o.result.as_ref().ok().map(|r| r.aggregate.clone()),
        "error": o.result.as_ref().err().map(|e| e.to_string()),
        "plaintext": fltrust_poly_real(&kept, &root, &default_h()),
        "client_bytes": (1..=n).map(|i| rep.transcript.total(Party::Client(i))).collect::<Vec<_>>(),
        "federator_bytes": rep.transcript.total(Party::Federator),
        "messages": rep.transcript.records.len(),
    }))
}

fn out(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = shareDemo)]
pub fn share_demo_js(
    secret: u64,
    n: usize,
    t: usize,
    p: u64,
    seed: u64,
    subset: Vec<usize>,
) -> Result<String, JsError> {
    out(share_demo(secret, n, t, p, seed, &subset))
}

#[wasm_bindgen(js_name = discriminatorDemo)]
pub fn discriminator_demo_js(x: f64, q: u64, q_c: u64) -> Result<String, JsError> {
    out(discriminator_demo(x, q, q_c))
}

#[wasm_bindgen(js_name = roundDemo)]
pub fn round_demo_js(updates: &str, root: &str, t: usize, q: u64, tamper: usize, seed: u64) -> Result<String, JsError> {
    out(round_demo(updates, root, t, q, tamper, seed))
}
