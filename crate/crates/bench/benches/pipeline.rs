use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use fixseg::fixpoint;
use fixseg::harness::{gen_phantom, PhantomSpec};
use fixseg::metrics;
use fixseg::model::{OracleModel, OracleParams, SegModel, ViewModels};
use fixseg::volume::{self, Axis};
use fixseg::MarginSpec;

fn slicing(c: &mut Criterion) {
    let p = gen_phantom(&PhantomSpec::new([64, 64, 64], 1)).unwrap();
    let mut group = c.benchmark_group("slice_64");
    for axis in Axis::ALL {
        group.bench_function(axis.name(), |b| {
            b.iter(|| volume::slices(black_box(&p.volume), axis))
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let n = 64 * 64;
    let z: Vec<f32> = (0..n).map(|i| (i % 97) as f32 / 97.0).collect();
    let y: Vec<f32> = (0..n).map(|i| if i % 7 == 0 { 1.0 } else { 0.0 }).collect();
    c.bench_function("soft_dsc_gradient_4096", |b| {
        b.iter(|| metrics::soft_dsc_loss_and_gradient(black_box(&z), black_box(&y)).unwrap())
    });
}

fn refinement(c: &mut Criterion) {
    let p = gen_phantom(&PhantomSpec::new([64, 64, 64], 2)).unwrap();
    let truth = Arc::new(p.mask.clone());
    let fine = ViewModels::from_fn(|axis| {
        Box::new(OracleModel::new(OracleParams::new(0.05, 1, axis as u64), truth.clone()).unwrap())
            as Box<dyn SegModel>
    });
    let margins = MarginSpec::fixed(30);
    c.bench_function("refine_once_64", |b| {
        b.iter(|| fixpoint::refine_once(&p.volume, black_box(&p.mask), &fine, &margins).unwrap())
    });
    c.bench_function("coarse_segment_64", |b| {
        b.iter(|| fixpoint::coarse_segment(black_box(&p.volume), &fine).unwrap())
    });
}

criterion_group!(benches, slicing, gradient, refinement);
criterion_main!(benches);
