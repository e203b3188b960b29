use pbv_core::transport::{
    depth_profile, simulate_implant, DamageMode, ImplantParams, Species, TargetMaterial,
};

fn lead_run(energy_ev: f64, n: usize, mode: DamageMode) -> pbv_core::transport::ImplantResult {
    let params = ImplantParams::new(Species::lead(), TargetMaterial::diamond(), energy_ev, n, 2024)
        .with_mode(mode)
        .with_threads(1);
    simulate_implant(&params).unwrap()
}

#[test]
fn mean_depth_increases_with_energy() {
    let depths: Vec<f64> = [100e3, 350e3, 700e3]
        .iter()
        .map(|&e| lead_run(e, 10_000, DamageMode::KinchinPease).mean_depth)
        .collect();
    assert!(depths[0] < depths[1] && depths[1] < depths[2], "{depths:?}");
}

#[test]
fn damage_modes_agree_within_factor_two() {
    let fast = lead_run(350e3, 300, DamageMode::KinchinPease).mean_vacancies_per_ion();
    let full = lead_run(350e3, 300, DamageMode::FullCascade).mean_vacancies_per_ion();
    let ratio = full / fast;
    assert!((0.5..=2.0).contains(&ratio), "full {full} vs kinchin-pease {fast}");
}

#[test]
fn lead_damages_far_more_than_nitrogen() {
    let lead = lead_run(350e3, 200, DamageMode::KinchinPease).mean_vacancies_per_ion();
    let params = ImplantParams::new(Species::nitrogen(), TargetMaterial::diamond(), 350e3, 200, 2024)
        .with_mode(DamageMode::KinchinPease)
        .with_threads(1);
    let nitrogen = simulate_implant(&params).unwrap().mean_vacancies_per_ion();
    assert!(lead > 4.0 * nitrogen, "lead {lead} vs nitrogen {nitrogen}");
}

#[test]
fn ion_profile_integrates_to_dose() {
    let result = lead_run(350e3, 2000, DamageMode::KinchinPease);
    let dose = 1e9;
    for bin in [0.1, 1.0, 2.5] {
        let profile = depth_profile(&result, bin, dose).unwrap();
        let integral: f64 = profile.ion_density_cm3.iter().sum::<f64>() * bin * 1e-7;
        let stopped = (result.n_ions - result.backscattered) as f64 / result.n_ions as f64;
        assert!(((integral - dose * stopped) / (dose * stopped)).abs() < 1e-6, "bin {bin}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ImplantParams::new(Species::lead(), TargetMaterial::diamond(), 200e3, 1100, 9)
        .with_mode(DamageMode::FullCascade);
    let serial = simulate_implant(&base.clone().with_threads(1)).unwrap();
    for threads in [2, 5] {
        let parallel = simulate_implant(&base.clone().with_threads(threads)).unwrap();
        assert_eq!(serial, parallel, "{threads} threads");
    }
}

#[test]
fn single_ion_run() {
    let r = lead_run(350e3, 1, DamageMode::FullCascade);
    assert_eq!(r.stop_depths.len() + r.backscattered, 1);
    assert_eq!(r.straggle, 0.0);
}
