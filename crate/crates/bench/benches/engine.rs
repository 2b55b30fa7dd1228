use criterion::{black_box, criterion_group, criterion_main, Criterion};

use kufarev::chain::{boundary_chain, flow_forward};
use kufarev::foliation::winding_field;
use kufarev::measure::{local_energy, DensityKind};
use kufarev::transform::{distortion_identity, reverse_foliation, DistortionSettings, ReversalSettings};
use kufarev::{AnalyticGerm, Driver, GridSpec, HerglotzEvaluator, C64};
use kufarev_bench::{example, quick_flow};

fn herglotz(c: &mut Criterion) {
    let density = DensityKind::ExampleSin2.on_grid(256);
    let h = HerglotzEvaluator::from_density(&density).unwrap();
    c.bench_function("herglotz eval3", |b| b.iter(|| h.eval3(black_box(C64::new(0.3, -0.4)))));
    c.bench_function("local energy n=256", |b| b.iter(|| local_energy(black_box(&density)).unwrap()));
}

fn flows(c: &mut Criterion) {
    let driver = Driver::from_measure(&example(), 256).unwrap();
    let s = quick_flow(256);
    c.bench_function("flow forward t=1", |b| b.iter(|| flow_forward(&driver, black_box(C64::new(0.2, 0.3)), 1.0, &s).unwrap()));
    let mut g = c.benchmark_group("slow");
    g.sample_size(10);
    g.bench_function("boundary chain n=64", |b| b.iter(|| boundary_chain(&driver, 1.0, 64, &s).unwrap()));
    g.bench_function("winding field m=40", |b| b.iter(|| winding_field(&example(), GridSpec::unit_disk(40), &s, 1.0).unwrap()));
    g.finish();
}

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform");
    g.sample_size(10);
    let ds = DistortionSettings { n: 64, dt: 4e-3, sample_dt: 2e-2, flow: quick_flow(64), check_hull: false };
    let germ = AnalyticGerm::disk_moebius(C64::new(0.2, 0.1), 0.3).unwrap();
    g.bench_function("distortion n=64", |b| b.iter(|| distortion_identity(&example(), &germ, &ds).unwrap()));
    let rs = ReversalSettings { n: 64, dt: 5e-3, tail: 6.0 };
    g.bench_function("reversal n=64", |b| b.iter(|| reverse_foliation(&example(), &rs).unwrap()));
    g.finish();
}

criterion_group!(benches, herglotz, flows, transforms);
criterion_main!(benches);
