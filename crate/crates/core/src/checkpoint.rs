//! Binary checkpoints.
//!
//! All integers and floats are little-endian; floats are raw IEEE-754 bit
//! patterns, so a load reproduces the saved state exactly.
//!
//! ```text
//! magic      8 bytes  "OPPOCKPT"
//! version    u32      currently 1
//! kind       u8       0 = policy only, 1 = full trainer state
//! layout     u32 segment count, then per segment:
//!            u32 name length, name (UTF-8), u64 offset, u32 rank, u64 dims...
//! theta      vector
//! -- kind 1 only --
//! momentum   vector
//! outer      u64 outer iterations applied
//! adam x2    actor then critic: u64 steps, u64 moment steps, f64 base lr,
//!            f64 eps, f64 beta1, f64 beta2, u8 anneal kind, u64 anneal
//!            total, vector m1, vector m2
//! shuffle    u64 key, u64 counter
//! iteration  u64
//! slots      u32 count, then per slot: vector env internals, u32 steps
//!            elapsed, u64 env rng key, u64 env rng counter, u64 clamp count,
//!            vector observation, f64 episode return, u32 episode length,
//!            u64 slot rng key, u64 slot rng counter
//! best       u8 present, then u64 eval index and vector parameters
//! aborted    u8
//! meta       u64 length, JSON {config, eval_points, diagnostics}
//! ```
//!
//! A vector is a u64 element count followed by that many f64 values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamState, Anneal};
use crate::config::RunConfig;
use crate::driver::{EvalPoint, IterationRecord, Trainer};
use crate::env::EnvState;
use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector, Segment};
use crate::rng::Stream;

pub const MAGIC: &[u8; 8] = b"OPPOCKPT";
pub const VERSION: u32 = 1;

const KIND_POLICY: u8 = 0;
const KIND_TRAINER: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    config: RunConfig,
    eval_points: Vec<EvalPoint>,
    diagnostics: Vec<IterationRecord>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn vec(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn stream(&mut self, s: &Stream) {
        self.u64(s.key);
        self.u64(s.counter);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n > left {
            return Err(Error::Format(format!("{what} length {n} exceeds remaining {left} bytes")));
        }
        Ok(n as usize)
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.len("vector")?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn stream(&mut self) -> Result<Stream> {
        Ok(Stream {
            key: self.u64()?,
            counter: self.u64()?,
        })
    }
}

fn write_header(w: &mut Writer, kind: u8, theta: &ParamVector) {
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(kind);
    let segs = theta.layout().segments();
    w.u32(segs.len() as u32);
    for s in segs {
        w.u32(s.name.len() as u32);
        w.bytes(s.name.as_bytes());
        w.u64(s.offset as u64);
        w.u32(s.shape.len() as u32);
        s.shape.iter().for_each(|d| w.u64(*d as u64));
    }
    w.vec(theta.as_slice());
}

fn read_header(r: &mut Reader) -> Result<(u8, ParamVector)> {
    let magic = r.take(8).map_err(|_| Error::Format("file too short for header".into()))?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    if kind != KIND_POLICY && kind != KIND_TRAINER {
        return Err(Error::Format(format!("unknown checkpoint kind {kind}")));
    }
    let nseg = r.u32()?;
    let mut segments = Vec::new();
    for _ in 0..nseg {
        let nlen = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| Error::Format("segment name is not UTF-8".into()))?
            .to_string();
        let offset = r.u64()? as usize;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_>>()?;
        segments.push(Segment { name, offset, shape });
    }
    let layout = Layout::from_segments(segments).map_err(|e| Error::Format(format!("layout table: {e}")))?;
    let data = r.vec()?;
    let theta = ParamVector::from_vec(std::sync::Arc::new(layout), data)
        .map_err(|e| Error::Format(format!("parameters: {e}")))?;
    Ok((kind, theta))
}

fn write_adam(w: &mut Writer, a: &AdamState) {
    w.u64(a.step_count);
    w.u64(a.moment_steps);
    w.f64(a.base_lr);
    w.f64(a.eps);
    w.f64(a.beta1);
    w.f64(a.beta2);
    match a.anneal {
        Anneal::None => {
            w.u8(0);
            w.u64(0);
        }
        Anneal::LinearToZero { total_updates } => {
            w.u8(1);
            w.u64(total_updates);
        }
    }
    w.vec(&a.m1);
    w.vec(&a.m2);
}

fn read_adam(r: &mut Reader) -> Result<AdamState> {
    let step_count = r.u64()?;
    let moment_steps = r.u64()?;
    let base_lr = r.f64()?;
    let eps = r.f64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let anneal = match (r.u8()?, r.u64()?) {
        (0, _) => Anneal::None,
        (1, total_updates) => Anneal::LinearToZero { total_updates },
        (k, _) => return Err(Error::Format(format!("unknown anneal kind {k}"))),
    };
    let m1 = r.vec()?;
    let m2 = r.vec()?;
    if m1.len() != m2.len() {
        return Err(Error::Format("adam moment lengths differ".into()));
    }
    Ok(AdamState {
        m1,
        m2,
        step_count,
        moment_steps,
        base_lr,
        anneal,
        eps,
        beta1,
        beta2,
    })
}

/// Serializes parameters alone.
pub fn policy_to_bytes(theta: &ParamVector) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    write_header(&mut w, KIND_POLICY, theta);
    w.0
}

/// Reads the parameters of either checkpoint kind.
pub fn policy_from_bytes(bytes: &[u8]) -> Result<ParamVector> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (kind, theta) = read_header(&mut r)?;
    if kind == KIND_POLICY && r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after policy".into()));
    }
    Ok(theta)
}

pub fn trainer_to_bytes(t: &Trainer) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    write_header(&mut w, KIND_TRAINER, &t.theta);
    w.vec(t.outer.momentum.as_slice());
    w.u64(t.outer.iteration);
    write_adam(&mut w, &t.opt.actor);
    write_adam(&mut w, &t.opt.critic);
    w.stream(&t.shuffle_rng);
    w.u64(t.iteration);
    w.u32(t.envs.slots.len() as u32);
    for s in &t.envs.slots {
        w.vec(&s.state.internal);
        w.u32(s.state.steps_elapsed);
        w.stream(&s.state.rng);
        w.u64(s.state.clamp_count);
        w.vec(&s.obs);
        w.f64(s.episode_return);
        w.u32(s.episode_len);
        w.stream(&s.rng);
    }
    match &t.best {
        Some((i, th)) => {
            w.u8(1);
            w.u64(*i as u64);
            w.vec(th.as_slice());
        }
        None => w.u8(0),
    }
    w.u8(t.nan_aborted as u8);
    let meta = Meta {
        config: t.cfg.clone(),
        eval_points: t.eval_points.clone(),
        diagnostics: t.diagnostics.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("meta serializes");
    w.u64(json.len() as u64);
    w.bytes(&json);
    w.0
}

pub fn trainer_from_bytes(bytes: &[u8]) -> Result<Trainer> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (kind, theta) = read_header(&mut r)?;
    if kind != KIND_TRAINER {
        return Err(Error::Format("policy-only checkpoint cannot resume training".into()));
    }
    let momentum = r.vec()?;
    let outer_iteration = r.u64()?;
    let actor = read_adam(&mut r)?;
    let critic = read_adam(&mut r)?;
    let shuffle_rng = r.stream()?;
    let iteration = r.u64()?;
    let nslots = r.u32()?;
    let mut slots = Vec::new();
    for _ in 0..nslots {
        let internal = r.vec()?;
        let steps_elapsed = r.u32()?;
        let env_rng = r.stream()?;
        let clamp_count = r.u64()?;
        let obs = r.vec()?;
        let episode_return = r.f64()?;
        let episode_len = r.u32()?;
        let rng = r.stream()?;
        slots.push((
            EnvState {
                internal,
                steps_elapsed,
                rng: env_rng,
                clamp_count,
            },
            obs,
            episode_return,
            episode_len,
            rng,
        ));
    }
    let best = match r.u8()? {
        0 => None,
        1 => {
            let i = r.u64()? as usize;
            let data = r.vec()?;
            Some((i, ParamVector::from_vec(theta.layout().clone(), data).map_err(|e| Error::Format(e.to_string()))?))
        }
        k => return Err(Error::Format(format!("bad best-policy flag {k}"))),
    };
    let nan_aborted = r.u8()? != 0;
    let mlen = r.len("meta")?;
    let meta: Meta = serde_json::from_slice(r.take(mlen)?).map_err(|e| Error::Format(format!("meta: {e}")))?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }

    let mut t = Trainer::new(meta.config)?;
    if t.theta.layout() != theta.layout() {
        return Err(Error::LayoutMismatch {
            left: t.theta.layout().to_string(),
            right: theta.layout().to_string(),
        });
    }
    if slots.len() != t.envs.slots.len() {
        return Err(Error::Format(format!("{} env slots stored, config has {}", slots.len(), t.envs.slots.len())));
    }
    if actor.len() != t.opt.actor.len() || critic.len() != t.opt.critic.len() {
        return Err(Error::Format("optimizer state does not match the network".into()));
    }
    t.outer.momentum = ParamVector::from_vec(theta.layout().clone(), momentum).map_err(|e| Error::Format(e.to_string()))?;
    t.outer.iteration = outer_iteration;
    t.theta = theta;
    t.opt.actor = actor;
    t.opt.critic = critic;
    t.shuffle_rng = shuffle_rng;
    t.iteration = iteration;
    for (slot, (state, obs, ret, len, rng)) in t.envs.slots.iter_mut().zip(slots) {
        slot.state = state;
        slot.obs = obs;
        slot.episode_return = ret;
        slot.episode_len = len;
        slot.rng = rng;
    }
    t.best = best;
    t.nan_aborted = nan_aborted;
    t.eval_points = meta.eval_points;
    t.diagnostics = meta.diagnostics;
    Ok(t)
}

pub fn save_trainer(path: &Path, t: &Trainer) -> Result<()> {
    std::fs::write(path, trainer_to_bytes(t))?;
    Ok(())
}

pub fn load_trainer(path: &Path) -> Result<Trainer> {
    trainer_from_bytes(&std::fs::read(path)?)
}

pub fn save_policy(path: &Path, theta: &ParamVector) -> Result<()> {
    std::fs::write(path, policy_to_bytes(theta))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<ParamVector> {
    policy_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_header() {
        assert!(matches!(policy_from_bytes(b"short"), Err(Error::Format(_))));
        let mut l = Layout::new();
        l.push("w", vec![2]);
        let th = ParamVector::from_vec(std::sync::Arc::new(l), vec![1.0, -0.0]).unwrap();
        let mut b = policy_to_bytes(&th);
        assert!(policy_from_bytes(&b).unwrap().bit_eq(&th));
        b[0] = b'X';
        assert!(matches!(policy_from_bytes(&b), Err(Error::Format(_))));
        let mut b = policy_to_bytes(&th);
        b[8] = 9;
        assert!(matches!(policy_from_bytes(&b), Err(Error::Format(_))));
        let b = policy_to_bytes(&th);
        assert!(matches!(policy_from_bytes(&b[..b.len() - 3]), Err(Error::Format(_))));
    }
}
