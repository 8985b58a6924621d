//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic, u32 version, u32 header length, a JSON header with
//! the network specs and hyperparameters, then every parameter as a
//! little-endian f64 in the order actor, critic 1, critic 2, target 1,
//! target 2. Optimizer moments are not stored.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Sac, SacHyper};
use crate::nn::{Mlp, MlpSpec, Params};
use crate::{SacError, Scalar};

pub const MAGIC: &[u8; 8] = b"MECDCSAC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub scalar: String,
    pub actor: MlpSpec,
    pub critic: MlpSpec,
    pub hyper: SacHyper,
    pub updates: u64,
}

fn nets<T>(agent: &Sac<T>) -> [&Mlp<T>; 5] {
    [&agent.actor, &agent.critic1, &agent.critic2, &agent.target1, &agent.target2]
}

pub fn write<T: Scalar, W: Write>(agent: &Sac<T>, mut out: W) -> Result<(), SacError> {
    let header = Header {
        scalar: T::NAME.to_string(),
        actor: agent.actor.spec.clone(),
        critic: agent.critic1.spec.clone(),
        hyper: agent.hyper.clone(),
        updates: agent.updates,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for net in nets(agent) {
        for x in net.params.iter() {
            out.write_all(&x.to_f64().unwrap().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SacError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_net<T: Scalar, R: Read>(r: &mut R, spec: &MlpSpec) -> Result<Mlp<T>, SacError> {
    spec.validate()?;
    let mut params = Params::<T>::zeros(spec);
    let mut b = [0u8; 8];
    for x in params.iter_mut() {
        r.read_exact(&mut b)?;
        *x = T::from(f64::from_le_bytes(b)).unwrap();
    }
    Ok(Mlp {
        spec: spec.clone(),
        params,
    })
}

/// Restores an agent; `seed` seeds its sampling stream.
pub fn read<T: Scalar, R: Read>(mut input: R, seed: u64) -> Result<Sac<T>, SacError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SacError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(SacError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = read_u32(&mut input)? as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json)?;
    let actor = read_net(&mut input, &h.actor)?;
    let c1 = read_net(&mut input, &h.critic)?;
    let c2 = read_net(&mut input, &h.critic)?;
    let t1 = read_net(&mut input, &h.critic)?;
    let t2 = read_net(&mut input, &h.critic)?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(SacError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    let mut agent = Sac::from_networks(h.hyper, actor, c1, c2, Some((t1, t2)), ChaCha8Rng::seed_from_u64(seed));
    agent.updates = h.updates;
    Ok(agent)
}

pub fn save<T: Scalar>(agent: &Sac<T>, path: &Path) -> Result<(), SacError> {
    let f = std::fs::File::create(path).map_err(|e| SacError::Path(path.display().to_string(), e))?;
    write(agent, std::io::BufWriter::new(f))
}

pub fn load<T: Scalar>(path: &Path, seed: u64) -> Result<Sac<T>, SacError> {
    let f = std::fs::File::open(path).map_err(|e| SacError::Path(path.display().to_string(), e))?;
    read(std::io::BufReader::new(f), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ActionMode;

    fn agent() -> Sac<f32> {
        let h = SacHyper {
            hidden_dims: vec![8, 4],
            ..SacHyper::default()
        };
        Sac::new(5, 2, h, 3).unwrap()
    }

    #[test]
    fn round_trip_preserves_parameters() {
        let mut a = agent();
        a.updates = 17;
        a.target1.params.iter_mut().for_each(|x| *x *= 0.5);
        let mut buf = Vec::new();
        write(&a, &mut buf).unwrap();
        let mut b: Sac<f32> = read(buf.as_slice(), 0).unwrap();
        assert_eq!(b.actor, a.actor);
        assert_eq!(b.target1, a.target1);
        assert_eq!(b.critic2, a.critic2);
        assert_eq!(b.updates, 17);
        let s = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(a.sample_action(&s, ActionMode::Deterministic), b.sample_action(&s, ActionMode::Deterministic));
    }

    #[test]
    fn wider_scalar_loads_narrow_checkpoint() {
        let a = agent();
        let mut buf = Vec::new();
        write(&a, &mut buf).unwrap();
        let b: Sac<f64> = read(buf.as_slice(), 0).unwrap();
        assert_eq!(b.actor.num_params(), a.actor.num_params());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let a = agent();
        let mut buf = Vec::new();
        write(&a, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read::<f32, _>(bad.as_slice(), 0), Err(SacError::Checkpoint(_))));
        let mut v2 = buf.clone();
        v2[8] = 9;
        assert!(matches!(read::<f32, _>(v2.as_slice(), 0), Err(SacError::Checkpoint(_))));
        assert!(read::<f32, _>(&buf[..buf.len() - 3], 0).is_err());
        buf.push(0);
        assert!(read::<f32, _>(buf.as_slice(), 0).is_err());
    }
}
