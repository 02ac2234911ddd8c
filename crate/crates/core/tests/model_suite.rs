use aal_core::data::{AttributeSchema, CausalEdge};
use aal_core::model::*;
use aal_core::numerics::Tensor;
use aal_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn image_graph(seed: u64) -> ModelGraph {
    let schema = AttributeSchema::new(&["y", "bg", "fg"], &[4, 3, 5], &[false, false, true]).unwrap();
    let arch = Architecture::for_input(InputKind::Image { channels: 3, height: 8, width: 8 });
    ModelGraph::new(schema, arch, WeightTable::standard(3), CausalPrior::identity(3), seed).unwrap()
}

fn vector_graph(shared_d: bool) -> ModelGraph {
    let schema = AttributeSchema::new(&["y", "os"], &[3, 2], &[false, false]).unwrap();
    let mut arch = Architecture::for_input(InputKind::Vector { dim: 6 });
    arch.shared_d = shared_d;
    ModelGraph::new(schema, arch, WeightTable::standard(2), CausalPrior::identity(2), 3).unwrap()
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random()).collect()).unwrap()
}

fn assert_rows_normalized(t: &Tensor) {
    for i in 0..t.rows() {
        let s: f32 = t.row(i).iter().sum();
        assert!((s - 1.0).abs() <= 1e-6, "row {i} sums to {s}");
    }
}

#[test]
fn discriminator_grid_arity() {
    let g = vector_graph(false);
    let out = g.forward_stage1(&random(&[4, 6], 1)).unwrap();
    assert_eq!(out.d.len(), 2);
    assert!(out.d.iter().all(|row| row.len() == 2));
    for row in &out.d {
        for (j2, d) in row.iter().enumerate() {
            assert_eq!(d.shape(), &[4, g.schema.k(j2)]);
            assert_rows_normalized(d);
        }
    }
}

#[test]
fn identical_rows_give_identical_outputs() {
    let g = image_graph(1);
    let one = random(&[1, 3, 8, 8], 2);
    let mut data = one.data().to_vec();
    data.extend_from_slice(one.data());
    let out = g.forward_stage1(&Tensor::new(&[2, 3, 8, 8], data).unwrap()).unwrap();
    for row in &out.d {
        for d in row {
            assert_eq!(d.row(0), d.row(1));
        }
    }
}

#[test]
fn stage1_inference_is_d11() {
    let g = image_graph(4);
    let x = random(&[5, 3, 8, 8], 3);
    let full = g.forward_stage1(&x).unwrap();
    let scores = g.infer_stage1(&x).unwrap();
    assert_eq!(scores, full.d[0][0]);
    assert_rows_normalized(&scores);
    assert_eq!(image_graph(4).infer_stage1(&x).unwrap(), scores);
    assert_ne!(image_graph(5).infer_stage1(&x).unwrap(), scores);
}

#[test]
fn wrong_input_shape_is_dimension_error() {
    let g = image_graph(1);
    assert!(matches!(g.infer_stage1(&random(&[2, 3, 9, 8], 0)), Err(Error::Dimension(_))));
    let bad = vec![random(&[2, 31], 0), random(&[2, 32], 0), random(&[2, 32], 0)];
    assert!(matches!(g.forward_stage2(&bad), Err(Error::Dimension(_))));
}

#[test]
fn zero_transforms_reduce_to_recognition_bias() {
    let mut g = image_graph(2);
    for j in 0..3 {
        for id in g.t_ids(j) {
            let shape = g.params.value(id).shape().to_vec();
            *g.params.value_mut(id) = Tensor::zeros(&shape);
        }
    }
    let bias = g.params.id("r1.b").unwrap();
    *g.params.value_mut(bias) = Tensor::new(&[4], vec![0.5, -1.0, 0.0, 2.0]).unwrap();
    let feats: Vec<_> = (0..3).map(|j| random(&[3, 32], j)).collect();
    let out = g.forward_stage2(&feats).unwrap();
    assert!(out.u.data().iter().all(|&v| v == 0.0));
    let z: Vec<f64> = [0.5f64, -1.0, 0.0, 2.0].iter().map(|v| v.exp()).collect();
    let total: f64 = z.iter().sum();
    for i in 0..3 {
        for (c, &p) in out.r[0].row(i).iter().enumerate() {
            assert!((p as f64 - z[c] / total).abs() < 1e-6);
        }
    }
}

#[test]
fn summative_vector_is_ascending_sum() {
    let g = image_graph(6);
    let feats: Vec<_> = (0..3).map(|j| random(&[4, 32], 10 + j)).collect();
    let out = g.forward_stage2(&feats).unwrap();
    let expected: Vec<f32> =
        (0..out.u.len()).map(|i| (out.s[0].data()[i] + out.s[1].data()[i]) + out.s[2].data()[i]).collect();
    assert_eq!(out.u.data(), expected.as_slice());
    assert_eq!(g.forward_stage2(&feats).unwrap().u, out.u);
    for r in &out.r {
        assert_rows_normalized(r);
    }
}

#[test]
fn stage2_inference_composes_branch_one() {
    let g = image_graph(7);
    let x = random(&[3, 3, 8, 8], 8);
    let f1 = g.forward_stage1(&x).unwrap().f.remove(0);
    let feats = vec![f1.clone(), Tensor::zeros(f1.shape()), Tensor::zeros(f1.shape())];
    // With T_2, T_3 silenced, u reduces to s_1.
    let mut silenced = g.clone();
    for j in 1..3 {
        for id in silenced.t_ids(j) {
            let shape = silenced.params.value(id).shape().to_vec();
            *silenced.params.value_mut(id) = Tensor::zeros(&shape);
        }
    }
    let composed = silenced.forward_stage2(&feats).unwrap().r.remove(0);
    let scores = g.infer_stage2(&x).unwrap();
    assert_eq!(scores, composed);
    assert_rows_normalized(&scores);

    let single = g.infer_stage2(&x.select_rows(&[1]).unwrap()).unwrap();
    let pair = g.infer_stage2(&x.select_rows(&[0, 1]).unwrap()).unwrap();
    assert_eq!(single.row(0), pair.row(1));
}

#[test]
fn shared_discriminators_alias_parameters() {
    let g = vector_graph(true);
    for j2 in 0..2 {
        assert_eq!(g.d_ids(1, j2), g.d_ids(0, j2));
    }
    assert!(g.params.id("d2_1.w").is_err());
    let plain = vector_graph(false);
    assert_ne!(plain.d_ids(1, 0), plain.d_ids(0, 0));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut g = image_graph(9);
    g.prior = CausalPrior::from_edges(3, &[CausalEdge::new(3, 2)]).unwrap();
    let bytes = encode_checkpoint(&g).unwrap();
    let back = decode_checkpoint(&bytes, Some(&g.schema)).unwrap();
    for ((_, a), (_, b)) in g.params.iter().zip(back.params.iter()) {
        assert_eq!(a.name, b.name);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value));
    }
    assert_eq!(back.prior, g.prior);
    assert_eq!(back.weights, g.weights);
    let x = random(&[2, 3, 8, 8], 1);
    assert_eq!(back.infer_stage1(&x).unwrap(), g.infer_stage1(&x).unwrap());
    assert_eq!(back.infer_stage2(&x).unwrap(), g.infer_stage2(&x).unwrap());
    assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
}

#[test]
fn checkpoint_errors() {
    let g = vector_graph(false);
    let bytes = encode_checkpoint(&g).unwrap();
    let other = AttributeSchema::new(&["y", "os"], &[4, 2], &[false, false]).unwrap();
    assert!(matches!(decode_checkpoint(&bytes, Some(&other)), Err(Error::Schema(_))));
    assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3], None), Err(Error::Length(_))));
    assert!(matches!(decode_checkpoint(&bytes[..10], None), Err(Error::Length(_))));
    let mut bumped = bytes.clone();
    bumped[8] = 2;
    assert!(matches!(decode_checkpoint(&bumped, None), Err(Error::Format(_))));
    let mut bad = bytes;
    bad[0] = b'X';
    assert!(matches!(decode_checkpoint(&bad, None), Err(Error::Format(_))));
}

#[test]
fn full_size_image_graph_runs() {
    let schema = AttributeSchema::cmnist();
    let arch = Architecture::for_input(InputKind::Image { channels: 3, height: 28, width: 28 });
    let g = ModelGraph::new(schema, arch, WeightTable::standard(3), CausalPrior::identity(3), 1).unwrap();
    let out = g.forward_stage1(&random(&[2, 3, 28, 28], 4)).unwrap();
    assert_eq!(out.fc.shape(), &[2, 16 * 7 * 7]);
    assert_eq!(out.f[2].shape(), &[2, 32]);
}
