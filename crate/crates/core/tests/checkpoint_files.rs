use kws::checkpoint::{self, CheckpointError, Metadata};
use kws::nn::Layer;
use kws::Network;

fn meta() -> Metadata {
    Metadata {
        epochs_completed: 12,
        best_val_accuracy: Some(0.875),
        seed: 17,
    }
}

#[test]
fn save_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::<f32>::reference(1);
    let (a, b) = (dir.path().join("a.kws"), dir.path().join("b.kws"));
    checkpoint::save(&net, &meta(), &a).unwrap();
    checkpoint::save(&net, &meta(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn layout_on_disk() {
    let net = Network::<f32>::reference(1);
    let bytes = checkpoint::to_bytes(&net, &meta());
    assert_eq!(&bytes[..4], b"KWS1");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
    assert_eq!(header["class_names"][8], "unknown");
    assert_eq!(header["metadata"]["epochs_completed"], 12);
    let names: Vec<&str> = header["tensors"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "conv1.weights", "conv1.biases", "bn1.gamma", "bn1.beta", "bn1.moving_mean", "bn1.moving_var",
            "conv2.weights", "conv2.biases", "bn2.gamma", "bn2.beta", "bn2.moving_mean", "bn2.moving_var",
            "dense1.weights", "dense1.biases", "dense2.weights", "dense2.biases",
        ]
    );
    let payload = &bytes[12 + hlen..];
    assert_eq!(payload.len(), 22_657 * 4);
    // The first payload value is conv1.weights[0].
    let Layer::Conv(c) = &net.layers()[0] else { panic!() };
    assert_eq!(f32::from_le_bytes(payload[..4].try_into().unwrap()).to_bits(), c.weights[0].to_bits());
}

#[test]
fn header_alone_rebuilds_the_spec() {
    let net = Network::<f32>::reference(1);
    let bytes = checkpoint::to_bytes(&net, &meta());
    let (_, offset) = checkpoint::read_header(&bytes).unwrap();
    // Header parsing succeeds with the payload stripped.
    let (header, _) = checkpoint::read_header(&bytes[..offset]).unwrap();
    assert_eq!(&header.spec, net.spec());
    assert!(matches!(
        checkpoint::from_bytes(&bytes[..offset]),
        Err(CheckpointError::TruncatedPayload { expected: 22_657, found: 0 })
    ));
}

#[test]
fn missing_file() {
    assert!(matches!(
        checkpoint::load("/definitely/not/here.kws"),
        Err(CheckpointError::Io { .. })
    ));
}
