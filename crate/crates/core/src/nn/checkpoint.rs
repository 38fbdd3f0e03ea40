//! Binary checkpoint: both networks, the log-std vector and optimiser state.
//!
//! Layout (little endian): magic `FTCK`, u16 version, u8 mode, u32 obs_dim,
//! u32 act_dim, then policy net, log-std, critic net, value normaliser
//! (u64 count, f64 mean, f64 m2), policy optimiser, critic optimiser. Nets are a u32 layer count, u32 sizes and an f64
//! vector; vectors are a u64 length followed by the values.

use std::path::Path;

use thiserror::Error;

use super::{Adam, GaussianPolicy, Mlp, NnError, ValueNorm};
use crate::env::Mode;

const MAGIC: &[u8; 4] = b"FTCK";
pub const VERSION: u16 = 1;
const MAX_LAYERS: usize = 64;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub mode: Mode,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub value_norm: ValueNorm,
    pub pi_opt: Adam,
    pub v_opt: Adam,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
    fn net(&mut self, net: &Mlp) {
        self.u32(net.sizes().len());
        for s in net.sizes() {
            self.u32(*s);
        }
        self.vec(&net.params);
    }
    fn adam(&mut self, a: &Adam) {
        for x in [a.lr, a.beta1, a.beta2, a.eps] {
            self.f64(x);
        }
        self.u64(a.t);
        self.vec(&a.m);
        self.vec(&a.v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn vec(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u64()?;
        if n > (self.buf.len() / 8) as u64 {
            return Err(CheckpointError::Truncated);
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn net(&mut self) -> Result<Mlp, CheckpointError> {
        let n = self.u32()?;
        if !(2..=MAX_LAYERS).contains(&n) {
            return Err(CheckpointError::Malformed(format!("{n} layers")));
        }
        let sizes = (0..n).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        let params = self.vec()?;
        let expected = sizes.windows(2).try_fold(0usize, |acc, w| {
            acc.checked_add(w[0].checked_mul(w[1])?.checked_add(w[1])?)
        });
        if expected != Some(params.len()) {
            return Err(CheckpointError::Malformed(
                "parameter count does not match layer sizes".into(),
            ));
        }
        Ok(Mlp::from_parts(sizes, params)?)
    }
    fn adam(&mut self) -> Result<Adam, CheckpointError> {
        let (lr, beta1, beta2, eps) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
        let t = self.u64()?;
        let m = self.vec()?;
        let v = self.vec()?;
        if m.len() != v.len() {
            return Err(CheckpointError::Malformed(
                "optimiser moment lengths differ".into(),
            ));
        }
        Ok(Adam {
            lr,
            beta1,
            beta2,
            eps,
            t,
            m,
            v,
        })
    }
}

fn mode_tag(m: Mode) -> u8 {
    match m {
        Mode::Normal => 0,
        Mode::WarmHolding => 1,
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u8(mode_tag(self.mode));
        w.u32(self.obs_dim);
        w.u32(self.act_dim);
        w.net(&self.policy.mean);
        w.vec(&self.policy.log_std);
        w.net(&self.critic);
        w.u64(self.value_norm.count);
        w.f64(self.value_norm.mean);
        w.f64(self.value_norm.m2);
        w.adam(&self.pi_opt);
        w.adam(&self.v_opt);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf: bytes };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let mode = match r.u8()? {
            0 => Mode::Normal,
            1 => Mode::WarmHolding,
            t => return Err(CheckpointError::Malformed(format!("mode tag {t}"))),
        };
        let obs_dim = r.u32()?;
        let act_dim = r.u32()?;
        let mean = r.net()?;
        let log_std = r.vec()?;
        let critic = r.net()?;
        let value_norm = ValueNorm {
            count: r.u64()?,
            mean: r.f64()?,
            m2: r.f64()?,
        };
        let pi_opt = r.adam()?;
        let v_opt = r.adam()?;
        if !r.buf.is_empty() {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        let policy = GaussianPolicy { mean, log_std };
        let ck = Self {
            mode,
            obs_dim,
            act_dim,
            policy,
            critic,
            value_norm,
            pi_opt,
            v_opt,
        };
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<(), CheckpointError> {
        let bad = |m: &str| Err(CheckpointError::Malformed(m.into()));
        if self.policy.mean.input_dim() != self.obs_dim || self.critic.input_dim() != self.obs_dim {
            return bad("network input width differs from obs_dim");
        }
        if self.policy.mean.output_dim() != self.act_dim
            || self.policy.log_std.len() != self.act_dim
        {
            return bad("policy output width differs from act_dim");
        }
        if self.critic.output_dim() != 1 {
            return bad("critic must have one output");
        }
        if self.pi_opt.m.len() != self.policy.n_params()
            || self.v_opt.m.len() != self.critic.n_params()
        {
            return bad("optimiser state does not match parameter count");
        }
        let finite = self.policy.mean.params.iter().all(|v| v.is_finite())
            && self.policy.log_std.iter().all(|v| v.is_finite())
            && self.critic.params.iter().all(|v| v.is_finite());
        if !finite || !self.value_norm.is_valid() {
            return bad("non-finite parameters");
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
