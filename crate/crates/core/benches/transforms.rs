use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use structcs::curvelet::{fdct_adjoint, fdct_forward, CurveletGeometry};
use structcs::dictionary::DictMode;
use structcs::grid::{dft2_unitary, sample};
use structcs::par;
use structcs::phantom::shepp_logan;
use structcs::recon::{reconstruct, Method, ReconConfig};
use structcs::sampling::SamplerConfig;
use structcs::wavelet::{ddwt4_forward, ddwt4_inverse};

// Each benchmark runs once inside a single-thread pool and once inside the
// default pool. Without the `parallel` feature both are sequential.
fn pools() -> Vec<(String, usize)> {
    vec![("1-thread".into(), 1), (format!("{}-thread", par::workers()), par::workers())]
}

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transforms");
    for n in [128usize, 256] {
        let img = shepp_logan(n, n);
        let geom = CurveletGeometry::for_shape(n, n).unwrap();
        for (label, threads) in pools() {
            g.bench_with_input(BenchmarkId::new(format!("ddwt4 round trip {label}"), n), &img, |b, img| {
                par::with_workers(threads, || b.iter(|| ddwt4_inverse(&ddwt4_forward(black_box(img), 4).unwrap())))
            });
            g.bench_with_input(BenchmarkId::new(format!("fdct round trip {label}"), n), &img, |b, img| {
                par::with_workers(threads, || {
                    b.iter(|| fdct_adjoint(&fdct_forward(black_box(img), &geom).unwrap(), &geom).unwrap())
                })
            });
        }
    }
    g.finish();
}

fn sweep_cells(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep cells");
    g.sample_size(10);
    let n = 64;
    let img = shepp_logan(n, n);
    let ksp = dft2_unitary(&img).unwrap();
    let cfg = ReconConfig { max_iters: 30, reweights: 1, ..ReconConfig::default().with_mode(DictMode::WavCurv) };
    let ext = cfg.required_fsr(n, n).unwrap();
    let cells: Vec<_> = (0..4u64)
        .map(|seed| {
            let m = SamplerConfig::laplacian(n * n / 4, 0.3, seed).with_fsr(Some(ext)).generate(n, n).unwrap();
            sample(&ksp, &m).unwrap()
        })
        .collect();
    for (label, threads) in pools() {
        g.bench_function(format!("4 S-BPD cells {label}"), |b| {
            par::with_workers(threads, || {
                b.iter(|| par::map(&cells, |m| reconstruct(m, Method::Sbpd, &cfg).unwrap().image.norm()))
            })
        });
    }
    g.finish();
}

criterion_group!(benches, transforms, sweep_cells);
criterion_main!(benches);
