use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sodium_recon::acquisition::*;
use sodium_recon::grid::norm2;
use sodium_recon::phantom::*;
use sodium_recon::recon::*;
use sodium_recon::{Dims, ImageVolume};

struct Problem {
    phantom: DigitalPhantom,
    truth: ImageVolume,
    prior: PriorImage,
    op: EncodingOperator,
    data: KSpaceData,
}

fn problem(spokes: usize, sigma: f64, mode: TrajectoryMode) -> Problem {
    let fine = Dims::new2(96, 96);
    let dims = Dims::new2(32, 32);
    let phantom = build_breast_phantom(fine, 2.0, &PhantomGeometry::default(), 3).unwrap();
    let truth = phantom.signal_at(dims).unwrap();
    let prior = render_prior(&phantom, fine, &Mismatch::None).unwrap();
    let coils = make_coils(dims, 4, 2).unwrap();
    let traj = make_radial_trajectory(spokes, 32, dims, mode, 0.2).unwrap();
    let clean = forward_model(&truth, &traj, &coils, EvalPath::Gridded).unwrap();
    let data = add_noise(&clean, sigma, 4).unwrap();
    let op = EncodingOperator::new(dims, &traj, &coils, EvalPath::Gridded).unwrap();
    Problem {
        phantom,
        truth,
        prior,
        op,
        data,
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(a).max(f64::MIN_POSITIVE)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn cfg(method: ReconMethod, iters: usize) -> ReconConfig {
    ReconConfig {
        max_outer_iters: iters,
        ..ReconConfig::for_method(method)
    }
}

#[test]
fn unregularised_full_sampling_recovers_the_phantom() {
    let p = problem(52, 0.0, TrajectoryMode::Uniform);
    let c = ReconConfig {
        alpha: 0.0,
        tol: 1e-7,
        ..cfg(ReconMethod::Tv, 300)
    };
    let r = reconstruct(&p.op, &p.data, &c, None, None).unwrap();
    let range = p.truth.max() - p.truth.min();
    let e = rmse(&r.image.data, &p.truth.data);
    assert!(e <= 0.01 * range, "rmse {e} vs range {range}");
}

#[test]
fn prior_free_degenerate_cases_match_tv() {
    let p = problem(24, 20.0, TrajectoryMode::DensityAdapted);
    let c = cfg(ReconMethod::Tv, 25);
    let tv = recon_admm_with(&p.op, &p.data, &c, &Regularizer::Tv).unwrap();
    let ones = Regularizer::Weighted(EdgeWeightMap::ones(p.op.dims));
    let w = recon_admm_with(&p.op, &p.data, &ReconConfig { method: ReconMethod::Wtv, ..c.clone() }, &ones).unwrap();
    assert!(rel_diff(&tv.image.data, &w.image.data) <= 1e-6);
    let pv = prior_on_grid(&p.prior, p.op.dims);
    let field = compute_dtv_field(&pv, default_eta(&pv), 0.0).unwrap();
    let d = recon_admm_with(
        &p.op,
        &p.data,
        &ReconConfig { method: ReconMethod::Dtv, ..c },
        &Regularizer::Directional(field),
    )
    .unwrap();
    assert!(rel_diff(&tv.image.data, &d.image.data) <= 1e-6);
}

#[test]
fn constant_prior_weights_reduce_to_tv() {
    let p = problem(24, 20.0, TrajectoryMode::DensityAdapted);
    let flat = PriorImage {
        values: ImageVolume::from_data(p.op.dims, [6.0; 3], sodium_recon::Units::Dimensionless, vec![0.5; 1024]).unwrap(),
        mismatch: Mismatch::None,
    };
    let c = cfg(ReconMethod::Tv, 15);
    let tv = reconstruct(&p.op, &p.data, &c, None, None).unwrap();
    let w = reconstruct(&p.op, &p.data, &ReconConfig { method: ReconMethod::Wtv, ..c }, Some(&flat), None).unwrap();
    assert_eq!(tv.image.data, w.image.data);
}

#[test]
fn agtv_saturated_threshold_ignores_the_prior() {
    let p = problem(24, 20.0, TrajectoryMode::DensityAdapted);
    let bm = BackgroundMask::from_phantom(&p.phantom, p.op.dims, 1);
    let c = ReconConfig {
        omega: 1.0,
        ..cfg(ReconMethod::AgTv, 30)
    };
    let with = recon_agtv_with(&p.op, &p.data, Some(&prior_on_grid(&p.prior, p.op.dims)), &bm, &c).unwrap();
    let without = recon_agtv_with(&p.op, &p.data, None, &bm, &c).unwrap();
    assert!(rel_diff(&without.image.data, &with.image.data) <= 1e-6);
}

#[test]
fn admm_objective_descends_and_beats_the_adjoint() {
    let p = problem(24, 20.0, TrajectoryMode::DensityAdapted);
    for m in [ReconMethod::Tv, ReconMethod::Wtv, ReconMethod::Dtv] {
        let c = cfg(m, 200);
        let r = reconstruct(&p.op, &p.data, &c, Some(&p.prior), None).unwrap();
        assert!(r.image.data.iter().all(|v| *v >= 0.0), "{m}");
        for w in r.log.records.windows(2).skip(4) {
            let up = (w[1].objective - w[0].objective) / w[0].objective.abs();
            assert!(up <= 1e-8, "{m}: objective rose by {up:e} at iteration {}", w[1].iteration);
        }
        let reg = regularizer_for(&c, Some(&prior_on_grid(&p.prior, p.op.dims))).unwrap();
        let adj = p.op.weighted_adjoint(&p.data.samples);
        let a = admm::objective(&p.op, &p.data.samples, &reg, r.alpha_data.unwrap(), &adj);
        assert!(r.log.last().unwrap().objective <= a, "{m}");
    }
}

#[test]
fn agtv_meets_the_residual_budget_and_clears_the_background() {
    let p = problem(32, 20.0, TrajectoryMode::DensityAdapted);
    let bm = BackgroundMask::from_phantom(&p.phantom, p.op.dims, 1);
    let c = cfg(ReconMethod::AgTv, 100);
    let r = reconstruct(&p.op, &p.data, &c, Some(&p.prior), Some(&bm)).unwrap();
    assert!(r.converged(), "{}", r.log.note);
    let s2 = r.sigma_sq.unwrap();
    assert!(r.log.last().unwrap().data_residual <= 1.05 * s2);
    let mean_over = |mask: &[bool]| {
        let v: Vec<f64> = r.image.data.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let breast = breast_mask(&p.phantom, p.op.dims);
    let bg = mean_over(&bm.voxels).abs();
    let fg = mean_over(&breast.voxels);
    assert!(bg <= 0.05 * fg, "background {bg} vs breast {fg}");
}

#[test]
fn infeasible_budget_is_flagged() {
    let p = problem(16, 20.0, TrajectoryMode::DensityAdapted);
    let c = ReconConfig {
        sigma_sq: Some(1e-9),
        ..cfg(ReconMethod::AgTv, 3)
    };
    let r = reconstruct(&p.op, &p.data, &c, Some(&p.prior), None).unwrap();
    assert!(!r.converged());
    assert!(r.log.note.contains("above budget"));
}

#[test]
fn non_convergence_is_reported() {
    let p = problem(16, 20.0, TrajectoryMode::DensityAdapted);
    let r = reconstruct(&p.op, &p.data, &cfg(ReconMethod::Tv, 2), None, None).unwrap();
    assert!(!r.converged());
    assert_eq!(r.log.records.len(), 2);
}

#[test]
fn reconstructions_are_deterministic() {
    let p = problem(16, 20.0, TrajectoryMode::DensityAdapted);
    let bm = BackgroundMask::from_phantom(&p.phantom, p.op.dims, 1);
    for m in ReconMethod::ALL {
        let c = cfg(m, 10);
        let a = reconstruct(&p.op, &p.data, &c, Some(&p.prior), Some(&bm)).unwrap();
        let b = reconstruct(&p.op, &p.data, &c, Some(&p.prior), Some(&bm)).unwrap();
        assert_eq!(a.image.data, b.image.data, "{m}");
    }
}

#[test]
fn adaptive_combine_differs_from_rss_by_a_smooth_gain() {
    let dims = Dims::new2(32, 32);
    let phantom = build_breast_phantom(Dims::new2(96, 96), 2.0, &PhantomGeometry::default(), 3).unwrap();
    let truth = phantom.signal_at(dims).unwrap();
    let coils = make_coils(dims, 6, 8).unwrap();
    let imgs: Vec<sodium_recon::ComplexVolume> = coils
        .maps
        .iter()
        .map(|s| sodium_recon::ComplexVolume {
            dims,
            voxel_size: truth.voxel_size,
            data: s.iter().zip(&truth.data).map(|(s, v)| s * v).collect(),
        })
        .collect();
    let adc = adaptive_combine(&imgs, 5).unwrap();
    let rss = rss_combine(&imgs).unwrap();
    let support = support_mask(&phantom, dims).eroded(1);
    let ratios: Vec<f64> = adc
        .data
        .iter()
        .zip(&rss.data)
        .zip(&support.voxels)
        .filter(|(_, m)| **m)
        .map(|((a, r), _)| a / r)
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64).sqrt();
    assert!(sd / mean <= 0.02, "cv {}", sd / mean);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let p = problem(16, 1.0, TrajectoryMode::DensityAdapted);
    let traj = make_radial_trajectory(12, 32, p.op.dims, TrajectoryMode::DensityAdapted, 0.2).unwrap();
    let coils = make_coils(p.op.dims, 4, 2).unwrap();
    assert!(recon_admm(&p.data, &traj, &coils, &cfg(ReconMethod::Tv, 2), None, EvalPath::Gridded).is_err());
    assert!(reconstruct(&p.op, &p.data, &cfg(ReconMethod::Dtv, 2), None, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn admm_output_is_nonnegative(seed in 0u64..1000, alpha in 0.0f64..5.0) {
        let dims = Dims::new2(16, 16);
        let traj = make_radial_trajectory(8, 16, dims, TrajectoryMode::DensityAdapted, 0.2).unwrap();
        let coils = make_coils(dims, 2, seed).unwrap();
        let op = EncodingOperator::new(dims, &traj, &coils, EvalPath::Gridded).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..op.n_measurements())
            .map(|_| num_complex::Complex64::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
            .collect();
        let data = KSpaceData {
            dims,
            voxel_size: [1.0; 3],
            n_coils: 2,
            samples,
            trajectory: traj,
            noise_sigma: 1.0,
            seed,
        };
        let c = ReconConfig { alpha, ..cfg(ReconMethod::Tv, 5) };
        let r = reconstruct(&op, &data, &c, None, None).unwrap();
        prop_assert!(r.image.data.iter().all(|v| *v >= 0.0));
    }
}
