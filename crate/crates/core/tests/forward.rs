use tsim::forward::*;
use tsim::grid::{downsample2, GridSpec, RealVolume};
use tsim::illumination::PatternConfig;
use tsim::optics::OpticalConfig;

fn setup() -> (OpticalConfig, PatternConfig, GridSpec, GridSpec) {
    let optics = OpticalConfig::standard(0.75, 2.7);
    let pattern = PatternConfig::from_optics(&optics);
    let fine = GridSpec::cubic(64, 40.0).unwrap();
    (optics, pattern, fine, fine.downsampled().unwrap())
}

fn small_star(fine: &GridSpec) -> RealVolume {
    let spec = PhantomSpec { spoke_length: 1.2, ..PhantomSpec::default() };
    make_star(&spec, fine).unwrap()
}

fn max_abs_diff(a: &RealVolume, b: &RealVolume) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn uniform_object_keeps_its_mean() {
    // A uniform object is still modulated (the visibility broadens the band
    // kernel into the missing cone), but with an integer number of pattern
    // periods across the grid each image keeps the object mean exactly and
    // the phase average is uniform.
    let (mut optics, _, fine, data) = setup();
    optics.u_m = 10.0 / (fine.nx as f64 * fine.dx_vox * 1e-3);
    let pattern = PatternConfig { orientations: vec![0.0, 90.0], ..PatternConfig::from_optics(&optics) };
    let f = RealVolume::constant(fine, 2.5);
    let acq = simulate(&f, &optics, &pattern, &data).unwrap();
    assert_eq!(acq.images.len(), 6);
    for img in &acq.images {
        assert!((img.mean() - 2.5).abs() < 1e-9, "{}", img.mean());
    }
    for o in 0..2 {
        for i in 0..data.len() {
            let m = (0..3).map(|p| acq.image(o, p).data()[i]).sum::<f64>() / 3.0;
            assert!((m - 2.5).abs() < 1e-9);
        }
    }
}

#[test]
fn phase_images_average_to_widefield() {
    let (optics, pattern, fine, data) = setup();
    let f = small_star(&fine);
    let acq = simulate(&f, &optics, &pattern, &data).unwrap();
    let wf = downsample2(&widefield(&f, &optics).unwrap()).unwrap();
    let peak = wf.max();
    for o in 0..3 {
        let mean: Vec<f64> = (0..wf.data().len())
            .map(|i| (0..3).map(|p| acq.image(o, p).data()[i]).sum::<f64>() / 3.0)
            .collect();
        let mean = RealVolume::new(data, mean).unwrap();
        assert!(max_abs_diff(&mean, &wf) <= 1e-9 * peak, "orientation {o}");
    }
    for img in &acq.images {
        assert!(img.min() >= 0.0);
    }
}

#[test]
fn zero_visibility_reduces_to_widefield() {
    let (optics, mut pattern, fine, data) = setup();
    pattern.force_zero_visibility = true;
    let f = small_star(&fine);
    let acq = simulate(&f, &optics, &pattern, &data).unwrap();
    let wf = downsample2(&widefield(&f, &optics).unwrap()).unwrap();
    for img in &acq.images {
        assert!(max_abs_diff(img, &wf) <= 1e-9 * wf.max());
    }
}

#[test]
fn modulation_beyond_cutoff_rejected() {
    let (mut optics, mut pattern, fine, data) = setup();
    optics.u_m = 6.0;
    pattern.u_m = 6.0;
    let f = RealVolume::constant(fine, 1.0);
    let err = simulate(&f, &optics, &pattern, &data).unwrap_err();
    assert!(err.to_string().contains("u_m"), "{err}");
}

#[test]
fn wrong_data_grid_rejected() {
    let (optics, pattern, fine, _) = setup();
    let f = RealVolume::constant(fine, 1.0);
    assert!(simulate(&f, &optics, &pattern, &fine).is_err());
}

#[test]
fn poisson_scale_reaches_target_snr() {
    let g = GridSpec::cubic(32, 40.0).unwrap();
    let v = RealVolume::from_fn(g, |x, y, z| 0.2 + ((x * 7 + y * 3 + z) % 11) as f64 / 5.0).unwrap();
    let mean_sqrt = v.data().iter().map(|x| x.sqrt()).sum::<f64>() / v.data().len() as f64;
    let s = photon_scale(mean_sqrt, 20.0).unwrap();
    assert!((s - (10.0 / mean_sqrt).powi(2)).abs() < 1e-12 * s);
    let scaled = v.scaled(s);
    assert!((measure_snr_db(&scaled).unwrap() - 20.0).abs() < 1e-9);

    // Empirical mean of sqrt of the counts is within 1% of 10 (slightly below, Jensen).
    let noisy = add_poisson(&v, Snr::Db(20.0), 11).unwrap();
    let counts = noisy.scaled(s);
    let emp = counts.data().iter().map(|x| x.sqrt()).sum::<f64>() / counts.data().len() as f64;
    assert!((emp - 10.0).abs() < 0.1, "{emp}");
}

#[test]
fn poisson_moments_for_constant_volume() {
    let g = GridSpec::cubic(32, 40.0).unwrap();
    let v = RealVolume::constant(g, 1.0);
    let noisy = add_poisson(&v, Snr::Db(20.0), 3).unwrap();
    let n = v.data().len() as f64;
    // s = 100: counts ~ Poisson(100), so the mean of counts/s has σ = 0.1/√N.
    let sigma = 0.1 / n.sqrt();
    assert!((noisy.mean() - 1.0).abs() < 3.0 * sigma, "{}", noisy.mean());
    for &x in noisy.data() {
        assert!((x * 100.0 - (x * 100.0).round()).abs() < 1e-9);
    }
}

#[test]
fn snr_examples() {
    let g = GridSpec::cubic(8, 40.0).unwrap();
    let v = RealVolume::constant(g, 10f64.powf(1.5));
    assert!((measure_snr_db(&v).unwrap() - 15.0).abs() < 1e-9);
    let w = RealVolume::constant(g, 7.0);
    let gain = measure_snr_db(&w.scaled(4.0)).unwrap() - measure_snr_db(&w).unwrap();
    assert!((gain - 20.0 * 2f64.log10()).abs() < 1e-12);
    assert!(measure_snr_db(&RealVolume::zeros(g)).is_err());
}

#[test]
fn acquisition_noise_is_reproducible_and_persists() {
    let (optics, pattern, fine, data) = setup();
    let f = small_star(&fine);
    let clean = simulate(&f, &optics, &pattern, &data).unwrap();
    let a = clean.with_noise(Snr::Db(20.0), 9).unwrap();
    let b = clean.with_noise(Snr::Db(20.0), 9).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.images[0], a.images[1]);

    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path(), None).unwrap();
    assert!(dir.path().join("img_o60_p2.tvol").exists());
    let back = AcquisitionSet::load(dir.path()).unwrap();
    assert_eq!(back, a);
    assert!(AcquisitionSet::load(&dir.path().join("missing")).is_err());
}
