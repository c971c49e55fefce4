//! Checkpoint container: 8-byte magic `MDNN0001`, a little-endian u32
//! length-prefixed textual architecture descriptor, then every parameter as
//! little-endian f32 in layer order — weights before biases, batch-norm as
//! (gamma, beta, running_mean, running_var).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::layers::Layer;
use crate::nn::network::Network;
use crate::nn::ModelSpec;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MDNN0001";

fn layer_param_vecs(layer: &Layer) -> Vec<&Vec<f64>> {
    match layer {
        Layer::Conv(c) => vec![&c.weights, &c.bias],
        Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var],
        Layer::Dense(d) => vec![&d.weights, &d.bias],
        _ => vec![],
    }
}

fn layer_param_vecs_mut(layer: &mut Layer) -> Vec<&mut Vec<f64>> {
    match layer {
        Layer::Conv(c) => vec![&mut c.weights, &mut c.bias],
        Layer::BatchNorm(bn) => {
            vec![&mut bn.gamma, &mut bn.beta, &mut bn.running_mean, &mut bn.running_var]
        }
        Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
        _ => vec![],
    }
}

pub fn checkpoint_to_bytes(net: &Network) -> Vec<u8> {
    let descriptor = net.spec().to_descriptor();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
    bytes.extend_from_slice(descriptor.as_bytes());
    for layer in &net.layers {
        for vec in layer_param_vecs(layer) {
            for &v in vec {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    bytes
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format("not an MDNN0001 checkpoint".to_string()));
    }
    let descriptor_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + descriptor_len {
        return Err(Error::format("checkpoint descriptor truncated".to_string()));
    }
    let descriptor = std::str::from_utf8(&bytes[12..12 + descriptor_len])
        .map_err(|_| Error::format("checkpoint descriptor is not UTF-8".to_string()))?;
    let spec = ModelSpec::from_descriptor(descriptor)?;
    let mut net = Network::build(&spec, 0)?;

    let mut payload = &bytes[12 + descriptor_len..];
    let expected: usize = net
        .layers
        .iter()
        .flat_map(|l| layer_param_vecs(l).into_iter().map(|v| v.len()))
        .sum();
    if payload.len() != expected * 4 {
        return Err(Error::format(format!(
            "checkpoint payload holds {} bytes, architecture needs {}",
            payload.len(),
            expected * 4
        )));
    }
    for layer in net.layers.iter_mut() {
        for vec in layer_param_vecs_mut(layer) {
            for slot in vec.iter_mut() {
                let (chunk, rest) = payload.split_at(4);
                payload = rest;
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::format("checkpoint contains non-finite parameters".to_string()));
                }
                *slot = f64::from(v);
            }
        }
    }
    Ok(net)
}

pub fn save_checkpoint(path: &Path, net: &Network) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&checkpoint_to_bytes(net))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    network_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{reference_model_spec, Tensor};

    #[test]
    fn roundtrip_preserves_behavior() {
        let spec = reference_model_spec(16);
        let net = Network::build(&spec, 42).unwrap();
        let bytes = checkpoint_to_bytes(&net);
        assert_eq!(&bytes[..8], b"MDNN0001");

        let restored = network_from_bytes(&bytes).unwrap();
        assert_eq!(restored.spec(), net.spec());

        // Parameters survive modulo the f32 storage rounding, so outputs of
        // the two networks agree tightly.
        let batch = Tensor::from_vec(
            vec![1, 1, 16, 16],
            (0..256).map(|i| (i % 11) as f64 / 11.0).collect(),
        )
        .unwrap();
        let a = net.forward_eval(&batch).unwrap();
        let b = restored.forward_eval(&batch).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let spec = reference_model_spec(16);
        let net = Network::build(&spec, 7).unwrap();
        assert_eq!(checkpoint_to_bytes(&net), checkpoint_to_bytes(&net));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        assert!(network_from_bytes(b"WRONGMAG").is_err());

        let spec = reference_model_spec(16);
        let net = Network::build(&spec, 1).unwrap();
        let bytes = checkpoint_to_bytes(&net);

        let mut truncated = bytes.clone();
        truncated.truncate(bytes.len() - 8);
        assert!(matches!(network_from_bytes(&truncated), Err(Error::Format(_))));

        let mut extended = bytes;
        extended.extend_from_slice(&[0u8; 4]);
        assert!(matches!(network_from_bytes(&extended), Err(Error::Format(_))));
    }
}
