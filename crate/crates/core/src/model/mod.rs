//! G-MobNet: fixed Gabor stem, spatially separable lower blocks, depthwise
//! separable upper blocks, attention after every convolution block.

mod config;
mod network;
mod report;
mod weights;

pub use config::{BlockSpec, NetConfig, StemSpec};
pub use network::{build_network, forward, LoadedModel, Network, ParamSpec, Stage, StageKind};
pub use report::{model_report, ModelReport, StageReport};
pub use weights::{WeightEntry, WeightStore};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::ConvKind;
    use crate::error::Error;
    use crate::gabor::BankSpec;
    use crate::tensor::Tensor;

    fn image(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[h, w, 1], |i| ((i[0] * 7 + i[1] * 3) % 10) as f64 / 10.0).unwrap()
    }

    #[test]
    fn default_is_nineteen_layers() {
        let net = build_network(&NetConfig::gmobnet_desk()).unwrap();
        assert_eq!(net.layer_count(), 19);
        let r = model_report(&net).unwrap();
        assert_eq!(r.layer_count, 19);
        assert_eq!(r.dropout_p, 0.4);
    }

    #[test]
    fn baseline_is_twenty_eight_layers() {
        let net = build_network(&NetConfig::mobilenet_baseline_desk()).unwrap();
        assert_eq!(net.layer_count(), 28);
    }

    #[test]
    fn zero_width_block_fails() {
        let mut cfg = NetConfig::gmobnet_desk();
        cfg.blocks[2].out_channels = 0;
        match build_network(&cfg) {
            Err(Error::InvalidArgument { field, .. }) => assert_eq!(field, "blocks[2].out_channels"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_dropout_names_field() {
        let cfg = NetConfig {
            dropout_p: 1.5,
            ..NetConfig::gmobnet_desk()
        };
        match build_network(&cfg) {
            Err(Error::InvalidArgument { field, .. }) => assert_eq!(field, "dropout_p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn indivisible_reduction_fails_at_build() {
        let mut cfg = NetConfig::gmobnet_desk();
        cfg.blocks[0].out_channels = 12;
        assert!(build_network(&cfg).is_err());
    }

    #[test]
    fn toy_param_count_by_hand() {
        // Gabor stem 2 filters (fixed) → one spatial block 2→4 with cbam r=2 → fc 4→3
        let cfg = NetConfig {
            input_h: 8,
            input_w: 8,
            stem: StemSpec::Gabor {
                bank: BankSpec {
                    n_orientations: 2,
                    wavelengths: vec![2.0],
                    ..BankSpec::default()
                },
                stride: 1,
                cbam: false,
            },
            blocks: vec![BlockSpec::new(ConvKind::SpatialSeparable, 4, 1, true)],
            dropout_p: 0.4,
            n_classes: 3,
            cbam_reduction: 2,
            ..NetConfig::gmobnet_desk()
        };
        let net = build_network(&cfg).unwrap();
        let r = model_report(&net).unwrap();
        let stem_bn = 2 * 2; // gamma, beta
        let col_row = 3 * 2 * 4 * 2;
        let block_bn = 2 * 4;
        let cbam = (4 * 2 + 2) + (2 * 4 + 4) + 7 * 7 * 2;
        let fc = 4 * 3 + 3;
        assert_eq!(r.trainable_params, stem_bn + col_row + block_bn + cbam + fc);
        // gabor kernels + running mean/var
        assert_eq!(r.fixed_params, 2 * 9 + 2 * 2 + 2 * 4);
        assert_eq!(r.layer_count, 3);

        let mut plain = cfg.clone();
        plain.blocks[0].cbam = false;
        let r2 = model_report(&build_network(&plain).unwrap()).unwrap();
        assert!(r2.trainable_params < r.trainable_params);
    }

    #[test]
    fn zero_head_gives_uniform() {
        let net = build_network(&NetConfig::gmobnet_desk()).unwrap();
        let mut w = WeightStore::random(&net, 3);
        for name in ["fc.weight", "fc.bias"] {
            w.get_mut(name).unwrap().values.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = forward(&net, &image(32, 32), &w).unwrap();
        assert!(p.iter().all(|&v| v == 0.1));
    }

    #[test]
    fn missing_weight_is_named() {
        let net = build_network(&NetConfig::gmobnet_desk()).unwrap();
        let full = WeightStore::random(&net, 1);
        let mut partial = WeightStore::new();
        for e in full.entries().iter().filter(|e| e.name != "block04.pw.weight") {
            partial
                .insert(e.name.clone(), e.shape.clone(), e.values.clone())
                .unwrap();
        }
        match forward(&net, &image(32, 32), &partial) {
            Err(Error::MissingWeight(n)) => assert_eq!(n, "block04.pw.weight"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_image_size() {
        let net = build_network(&NetConfig::gmobnet_desk()).unwrap();
        let w = WeightStore::random(&net, 1);
        assert!(matches!(forward(&net, &image(16, 16), &w), Err(Error::Dimension(_))));
    }

    #[test]
    fn weights_file_round_trip_and_validation() {
        let net = build_network(&NetConfig::gmobnet_desk()).unwrap();
        let w = WeightStore::random(&net, 11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        w.save(&path).unwrap();
        let back = WeightStore::load_for(&path, &net).unwrap();
        assert_eq!(back, w);

        let mut bad = w.clone();
        bad.get_mut("block02.row.weight").unwrap().shape = vec![1, 3, 32, 16];
        bad.save(&path).unwrap();
        match WeightStore::load_for(&path, &net) {
            Err(Error::WeightShape { name, .. }) => assert_eq!(name, "block02.row.weight"),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(WeightStore::load(&path), Err(Error::CorruptManifest { .. })));
    }
}
