//! Data-layer checks shared by the core tests and the acceptance run.

use aal_core::data::split::{CHECK_CLASS_GROUPS, CHECK_COMBINATIONS, CHECK_INDICES};
use aal_core::data::*;
use aal_core::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every split builder, across a few seeds and shapes, passes validation.
pub fn builder_outputs_validate() -> Result<usize, String> {
    let mut checked = 0;
    for seed in 0..3u64 {
        let src = GlyphDigits { seed, n_train: 3000, n_test: 600 };
        let schema = AttributeSchema::cmnist();
        let records = assign_colors(&src, seed);
        let split = build_cmnist_split(&records, &schema, &CmnistOptions::new(seed)).map_err(|e| e.to_string())?;
        let report = validate_gcdr(&split, &schema);
        if !report.passed() {
            return Err(format!("cmnist seed {seed}: {report}"));
        }
        checked += 1;

        let tab = AttributeSchema::new(&["y", "os", "device"], &[4 + seed as usize, 2, 3], &[false, false, true])
            .map_err(|e| e.to_string())?;
        let mut opts = TabularOptions::new(seed);
        if seed == 1 {
            opts.causal_edge = Some(CausalEdge::new(2, 1));
        }
        let data = generate_tabular(500, &tab, &opts).map_err(|e| e.to_string())?;
        let split = build_grouped_split(&data, 1, 0.1, seed).map_err(|e| e.to_string())?;
        let report = validate_gcdr(&split, &tab);
        if !report.passed() {
            return Err(format!("tabular seed {seed}: {report}"));
        }
        checked += 1;
    }
    Ok(checked)
}

fn entry(index: usize, role: Role, attrs: &[usize]) -> SplitEntry {
    SplitEntry { index, role, attrs: attrs.to_vec() }
}

/// Index overlap, combination overlap and class-group overlap are each
/// reported under their own check and nowhere else.
pub fn violation_families_rejected() -> Result<(), String> {
    let schema = AttributeSchema::new(&["y", "bg", "fg"], &[2, 2, 3], &[false, false, true]).unwrap();
    let base = vec![entry(0, Role::Train, &[1, 1, 1]), entry(1, Role::Train, &[2, 2, 1]), entry(2, Role::Test, &[1, 2, 1])];
    if !validate_gcdr(&GcdrSplit::new(base.clone()), &schema).passed() {
        return Err("baseline split rejected".into());
    }
    let cases = [
        (CHECK_INDICES, entry(0, Role::Test, &[2, 1, 2])),
        (CHECK_COMBINATIONS, entry(3, Role::Test, &[1, 1, 1])),
        (CHECK_CLASS_GROUPS, entry(3, Role::Train, &[1, 2, 2])),
    ];
    for (name, extra) in cases {
        let mut entries = base.clone();
        entries.push(extra);
        let report = validate_gcdr(&GcdrSplit::new(entries), &schema);
        let failing: Vec<_> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        if failing != [name] {
            return Err(format!("expected only `{name}` to fail, got {failing:?}"));
        }
    }
    Ok(())
}

/// Random byte images survive write → parse → write unchanged.
pub fn idx_round_trip(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let (n, r, c) = (rng.random_range(1..5), rng.random_range(1..12), rng.random_range(1..12));
        let bytes: Vec<u8> = (0..n * r * c).map(|_| rng.random()).collect();
        let t = Tensor::new(&[n, r, c], bytes.iter().map(|&b| b as f32 / 255.0).collect()).unwrap();
        let encoded = write_idx_images(&t).map_err(|e| e.to_string())?;
        let IdxData::Images(back) = parse_idx(&encoded).map_err(|e| e.to_string())? else {
            return Err("images decoded as labels".into());
        };
        let same_bits = back.shape() == t.shape()
            && back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same_bits || write_idx_images(&back).unwrap() != encoded {
            return Err(format!("round trip differs for {n}×{r}×{c}"));
        }
        let labels: Vec<u8> = (0..r).map(|_| rng.random_range(0..10)).collect();
        if parse_idx(&write_idx_labels(&labels)).map_err(|e| e.to_string())? != IdxData::Labels(labels) {
            return Err("label round trip differs".into());
        }
    }
    Ok(())
}

/// Largest deviation of colorize from the blend of its all-zero and all-one images.
pub fn colorize_affinity_error(cases: usize, seed: u64) -> f32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palettes = Palettes::default();
    let mut worst = 0.0f32;
    for _ in 0..cases {
        let (h, w) = (rng.random_range(1..9), rng.random_range(1..9));
        let (bg, fg) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let g: Vec<f32> = (0..h * w).map(|_| rng.random()).collect();
        let out = colorize(&Tensor::new(&[h, w], g.clone()).unwrap(), bg, fg, &palettes).unwrap();
        let zero = colorize(&Tensor::zeros(&[h, w]), bg, fg, &palettes).unwrap();
        let one = colorize(&Tensor::filled(&[h, w], 1.0), bg, fg, &palettes).unwrap();
        for (i, &v) in out.data().iter().enumerate() {
            let a = g[i % (h * w)];
            let expected = a * one.data()[i] + (1.0 - a) * zero.data()[i];
            worst = worst.max((v - expected).abs());
        }
    }
    worst
}
