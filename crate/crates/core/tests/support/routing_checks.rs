//! Parameter-routing invariants, checked bit-exactly. Each check panics on violation.

use aal_core::data::{AttributeSchema, CausalEdge};
use aal_core::model::{Architecture, CausalPrior, InputKind, ModelGraph, WeightTable};
use aal_core::numerics::{optimizer_step, AdamConfig, ParamSet, Tensor, Trainable};
use aal_core::training::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schema3() -> AttributeSchema {
    AttributeSchema::new(&["y", "d", "s"], &[4, 2, 3], &[false, false, true]).unwrap()
}

fn graph_with(schema: AttributeSchema, prior: CausalPrior, weights: WeightTable, seed: u64) -> ModelGraph {
    let width = schema.width();
    assert_eq!(prior.width(), width);
    let arch = Architecture::for_input(InputKind::Vector { dim: 5 });
    ModelGraph::new(schema, arch, weights, prior, seed).unwrap()
}

fn graph(seed: u64) -> ModelGraph {
    graph_with(schema3(), CausalPrior::identity(3), WeightTable::standard(3), seed)
}

fn random_batch(schema: &AttributeSchema, n: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::new(&[n, 5], (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let labels = (0..schema.width()).map(|j| (0..n).map(|_| rng.random_range(0..schema.k(j))).collect()).collect();
    Batch { x, labels }
}

fn random_augmented(g: &ModelGraph, n: usize, seen: bool, seed: u64) -> AugmentedBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = g.arch.g_out;
    let features = (0..g.width())
        .map(|_| Tensor::new(&[n, width], (0..n * width).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let labels = (0..g.width()).map(|j| (0..n).map(|_| rng.random_range(0..g.schema.k(j))).collect()).collect();
    AugmentedBatch { features, labels, seen: vec![seen; n] }
}

fn changed(before: &ParamSet, after: &ParamSet) -> Trainable {
    before.iter().filter(|(id, p)| p.value.data() != after.value(*id).data()).map(|(id, _)| id).collect()
}

fn d_all(g: &ModelGraph) -> Trainable {
    let mut s = Trainable::new();
    for j in 0..g.width() {
        for j2 in 0..g.width() {
            s.extend(g.d_ids(j, j2));
        }
    }
    s
}

fn g_all(g: &ModelGraph) -> Trainable {
    (0..g.width()).flat_map(|j| g.g_ids(j)).collect()
}

fn apply_terms(g: &mut ModelGraph, batch: &Batch, terms: &[Term]) -> Trainable {
    let before = g.params.clone();
    let branches: Vec<usize> = (0..g.width()).collect();
    let (grads, _) = term_gradients(g, batch, &branches, terms).unwrap();
    optimizer_step(&mut g.params, &grads, &AdamConfig::default()).unwrap();
    changed(&before, &g.params)
}

pub fn attribute_update_leaves_off_diagonal_discriminators() {
    for seed in 0..4 {
        let mut g = graph(seed);
        let b = random_batch(&g.schema, 16, seed + 100);
        let moved = apply_terms(&mut g, &b, &[Term::Attribute]);
        for j in 0..3 {
            for j2 in (0..3).filter(|&j2| j2 != j) {
                assert!(moved.is_disjoint(&g.d_ids(j, j2)), "D_{j}{j2} moved");
            }
            assert!(moved.is_superset(&g.d_ids(j, j)));
            assert!(moved.is_superset(&g.g_ids(j)));
        }
        assert!(moved.is_superset(&g.p_ids()));
    }
}

pub fn discriminate_update_moves_only_off_diagonal_discriminators() {
    let mut g = graph(5);
    let b = random_batch(&g.schema, 16, 6);
    let moved = apply_terms(&mut g, &b, &[Term::Discriminate]);
    let mut expected = Trainable::new();
    for j in 0..3 {
        for j2 in (0..3).filter(|&j2| j2 != j) {
            expected.extend(g.d_ids(j, j2));
        }
    }
    assert_eq!(moved, expected);
}

pub fn reinforce_update_moves_only_backbone() {
    let mut g = graph(7);
    let b = random_batch(&g.schema, 16, 8);
    assert_eq!(apply_terms(&mut g, &b, &[Term::Reinforce]), g.p_ids());
}

pub fn eliminate_update_never_moves_discriminators() {
    let mut g = graph(9);
    let b = random_batch(&g.schema, 16, 10);
    let moved = apply_terms(&mut g, &b, &[Term::Eliminate]);
    assert!(moved.is_disjoint(&d_all(&g)));
    let mut expected = g.p_ids();
    expected.extend(g_all(&g));
    assert_eq!(moved, expected);
}

pub fn full_scheduling_unit_respects_adversarial_phase_routing() {
    let mut g = graph(11);
    let b = random_batch(&g.schema, 12, 12);
    let plan = Stage1Plan::all(3, true);
    let losses = stage1_step(&mut g, &b, &plan, 5, &AdamConfig::default()).unwrap();
    assert!(losses.attribute > 0.0 && losses.discriminate > 0.0 && losses.reinforce > 0.0 && losses.eliminate > 0.0);
    for j in 0..3 {
        for j2 in 0..3 {
            let steps = g.params.get(*g.d_ids(j, j2).iter().next().unwrap()).adam_step_count();
            assert_eq!(steps, 1, "D_{j}{j2} must only move in the discriminator phase");
        }
    }
    let p = *g.p_ids().iter().next().unwrap();
    assert_eq!(g.params.get(p).adam_step_count(), 6);
}

pub fn zero_prior_entry_removes_the_pair_exactly() {
    let masked = graph_with(schema3(), CausalPrior::from_edges(3, &[CausalEdge::new(2, 1)]).unwrap(), WeightTable::standard(3), 21);
    let mut zeroed_weights = WeightTable::standard(3);
    zeroed_weights.w_tilde[0][1] = 0.0;
    let zeroed = graph_with(schema3(), CausalPrior::identity(3), zeroed_weights, 21);
    let b = random_batch(&masked.schema, 16, 22);
    let branches = [0, 1, 2];

    let (dis, _) = term_gradients(&masked, &b, &branches, &[Term::Discriminate]).unwrap();
    for id in masked.d_ids(0, 1) {
        assert!(dis.get(id).is_none(), "masked discriminator received a gradient");
    }
    for term in [Term::Discriminate, Term::Eliminate] {
        let (a, la) = term_gradients(&masked, &b, &branches, &[term]).unwrap();
        let (z, lz) = term_gradients(&zeroed, &b, &branches, &[term]).unwrap();
        assert_eq!(la, lz);
        for (id, _) in masked.params.iter() {
            assert_eq!(a.dense(id, &masked.params).data(), z.dense(id, &zeroed.params).data(), "{}", masked.params.name(id));
        }
    }
}

pub fn seen_items_train_only_their_own_transform() {
    let mut g = graph(30);
    let batch = random_augmented(&g, 10, true, 31);
    let (grads, _) = stage2_gradients(&g, &batch, Routing::Additive, &[0]).unwrap();
    let touched: Trainable = grads.touched().collect();
    let mut expected = g.r_ids(0);
    expected.extend(g.t_ids(0));
    assert_eq!(touched, expected);

    let before = g.params.clone();
    stage2_step(&mut g, &batch, Routing::Additive, &AdamConfig::default()).unwrap();
    let moved = changed(&before, &g.params);
    let mut all = Trainable::new();
    for j in 0..3 {
        all.extend(g.t_ids(j));
        all.extend(g.r_ids(j));
    }
    assert_eq!(moved, all);
    assert!(moved.is_disjoint(&g.p_ids()) && moved.is_disjoint(&g_all(&g)) && moved.is_disjoint(&d_all(&g)));
}

pub fn unseen_items_train_the_other_transforms() {
    let schema = AttributeSchema::new(&["y", "bg"], &[3, 2], &[false, false]).unwrap();
    let mut g = graph_with(schema, CausalPrior::identity(2), WeightTable::standard(2), 40);
    let batch = random_augmented(&g, 8, false, 41);
    let before = g.params.clone();
    let (grads, _) = stage2_gradients(&g, &batch, Routing::Additive, &[1]).unwrap();
    optimizer_step(&mut g.params, &grads, &AdamConfig::default()).unwrap();
    let moved = changed(&before, &g.params);
    let mut expected = g.t_ids(0);
    expected.extend(g.r_ids(1));
    assert_eq!(moved, expected);
}

pub fn causal_edge_prunes_unseen_routing() {
    let g = graph_with(schema3(), CausalPrior::from_edges(3, &[CausalEdge::new(1, 2)]).unwrap(), WeightTable::standard(3), 50);
    assert_eq!(g.prior.s(0), &[2]);
    let batch = random_augmented(&g, 8, false, 51);
    let (grads, _) = stage2_gradients(&g, &batch, Routing::Additive, &[0]).unwrap();
    let touched: Trainable = grads.touched().collect();
    assert!(touched.is_disjoint(&g.t_ids(1)));
    assert!(touched.is_superset(&g.t_ids(2)));
    assert!(touched.is_disjoint(&g.t_ids(0)));
}

pub fn everything_routing_reaches_all_transforms() {
    let g = graph(60);
    for seen in [true, false] {
        let set = routed_set(&g, Routing::Everything, 0, seen);
        for j in 0..3 {
            assert!(set.is_superset(&g.t_ids(j)) && set.is_superset(&g.r_ids(j)));
        }
    }
}

pub const ALL: &[(&str, fn())] = &[
    ("attribute_update_leaves_off_diagonal_discriminators", attribute_update_leaves_off_diagonal_discriminators),
    ("discriminate_update_moves_only_off_diagonal_discriminators", discriminate_update_moves_only_off_diagonal_discriminators),
    ("reinforce_update_moves_only_backbone", reinforce_update_moves_only_backbone),
    ("eliminate_update_never_moves_discriminators", eliminate_update_never_moves_discriminators),
    ("full_scheduling_unit_respects_adversarial_phase_routing", full_scheduling_unit_respects_adversarial_phase_routing),
    ("zero_prior_entry_removes_the_pair_exactly", zero_prior_entry_removes_the_pair_exactly),
    ("seen_items_train_only_their_own_transform", seen_items_train_only_their_own_transform),
    ("unseen_items_train_the_other_transforms", unseen_items_train_the_other_transforms),
    ("causal_edge_prunes_unseen_routing", causal_edge_prunes_unseen_routing),
    ("everything_routing_reaches_all_transforms", everything_routing_reaches_all_transforms),
];
