use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{DepthTally, VACANCY_SCALE};
use super::scattering::{scattering_angle, ScatteringTable};
use super::screening::{universal_screening_length, COULOMB_EV_NM};
use super::stopping::{damage_energy, ElectronicStopping};
use super::{Particle, Species, TargetMaterial};
use crate::error::{Error, Result};

/// How displacement damage is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageMode {
    /// Every recoil above E_d is followed like the primary ion.
    FullCascade,
    /// Only the ion is followed; recoils are converted to displacements
    /// with the modified Kinchin-Pease formula.
    KinchinPease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScatteringMethod {
    /// Interpolated from a quadrature-built table (default).
    #[default]
    Tabulated,
    /// Quadrature for every collision.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplantParams {
    pub ion: Species,
    pub target: TargetMaterial,
    pub energy_ev: f64,
    pub n_ions: usize,
    pub seed: u64,
    pub mode: DamageMode,
    pub scattering: ScatteringMethod,
    /// `Some(1)` runs serially; `None` uses the global thread pool.
    pub threads: Option<usize>,
}

impl ImplantParams {
    pub fn new(ion: Species, target: TargetMaterial, energy_ev: f64, n_ions: usize, seed: u64) -> Self {
        ImplantParams {
            ion,
            target,
            energy_ev,
            n_ions,
            seed,
            mode: DamageMode::FullCascade,
            scattering: ScatteringMethod::Tabulated,
            threads: None,
        }
    }

    pub fn with_mode(mut self, mode: DamageMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplantResult {
    /// Final depth of every ion that came to rest inside the target.
    pub stop_depths: Vec<f64>,
    /// Ions that left through the surface.
    pub backscattered: usize,
    pub vacancies_per_ion: Vec<f64>,
    pub vacancy_tally: DepthTally,
    pub mean_depth: f64,
    /// Population standard deviation of `stop_depths`.
    pub straggle: f64,
    pub seed: u64,
    pub n_ions: usize,
    pub energy_ev: f64,
    pub mode: DamageMode,
    /// Beam energy above the Lindhard-Scharff validity bound.
    pub stopping_out_of_range: bool,
}

impl ImplantResult {
    pub fn mean_vacancies_per_ion(&self) -> f64 {
        self.vacancies_per_ion.iter().sum::<f64>() / self.n_ions.max(1) as f64
    }

    pub fn backscatter_fraction(&self) -> f64 {
        self.backscattered as f64 / self.n_ions.max(1) as f64
    }
}

/// Pair-dependent constants for a projectile species hitting target atoms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairKinematics {
    pub screening_length: f64,
    pub reduced_energy_per_ev: f64,
    pub mass_ratio: f64,
    pub max_transfer_factor: f64,
    pub stopping: ElectronicStopping,
}

impl PairKinematics {
    fn new(projectile: &Species, target: &TargetMaterial) -> Self {
        let (m1, m2) = (projectile.mass_amu, target.mass_amu);
        let a = universal_screening_length(projectile.z, target.z);
        PairKinematics {
            screening_length: a,
            reduced_energy_per_ev: a * m2 / (projectile.z * target.z * COULOMB_EV_NM * (m1 + m2)),
            mass_ratio: m1 / m2,
            max_transfer_factor: 4.0 * m1 * m2 / ((m1 + m2) * (m1 + m2)),
            stopping: ElectronicStopping::new(projectile, target),
        }
    }
}

/// Bookkeeping for one flight + collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CollisionRecord {
    pub energy_before: f64,
    pub electronic_loss: f64,
    pub transfer: f64,
    pub max_transfer: f64,
    pub energy_after: f64,
    pub theta_cm: f64,
    pub depth: f64,
    /// Direction of the recoil, only meaningful when `transfer > 0`.
    pub recoil_direction: [f64; 3],
}

pub(crate) enum Step {
    Collided(CollisionRecord),
    Escaped,
}

pub(crate) struct Transport<'a> {
    target: &'a TargetMaterial,
    ion_pair: PairKinematics,
    recoil_pair: PairKinematics,
    recoil_species: Species,
    flight_length: f64,
    max_impact: f64,
    table: Option<&'static ScatteringTable>,
    mode: DamageMode,
}

struct IonHistory {
    stop_depth: Option<f64>,
    vacancy_quanta: u64,
    vacancy_bins: Vec<(u32, u64)>,
}

impl<'a> Transport<'a> {
    pub(crate) fn new(
        ion: &Species,
        target: &'a TargetMaterial,
        mode: DamageMode,
        scattering: ScatteringMethod,
    ) -> Self {
        Transport {
            target,
            ion_pair: PairKinematics::new(ion, target),
            recoil_pair: PairKinematics::new(&target.species(), target),
            recoil_species: target.species(),
            flight_length: target.flight_length(),
            max_impact: target.max_impact_parameter(),
            table: match scattering {
                ScatteringMethod::Tabulated => Some(ScatteringTable::universal()),
                ScatteringMethod::Quadrature => None,
            },
            mode,
        }
    }

    fn angle(&self, eps: f64, b: f64) -> f64 {
        match self.table {
            Some(t) => t.angle(eps, b),
            None => scattering_angle(eps, b).unwrap_or(PI),
        }
    }

    /// Free flight with electronic loss, then one nuclear collision.
    pub(crate) fn step<R: Rng>(
        &self,
        particle: &mut Particle,
        is_ion: bool,
        rng: &mut R,
    ) -> Step {
        let pair = if is_ion { &self.ion_pair } else { &self.recoil_pair };
        let energy_before = particle.energy;
        let electronic_loss = (pair.stopping.power(energy_before) * self.flight_length).min(energy_before);
        particle.energy = energy_before - electronic_loss;
        for k in 0..3 {
            particle.position[k] += self.flight_length * particle.direction[k];
        }
        if particle.position[2] < 0.0 {
            let normal = particle.direction[2];
            if particle.energy * normal * normal > self.target.surface_binding {
                return Step::Escaped;
            }
            particle.position[2] = -particle.position[2];
            particle.direction[2] = -particle.direction[2];
        }

        let impact = self.max_impact * rng.random::<f64>().sqrt();
        let azimuth = 2.0 * PI * rng.random::<f64>();
        let eps = pair.reduced_energy_per_ev * particle.energy;
        let theta = if particle.energy > 0.0 {
            self.angle(eps, impact / pair.screening_length)
        } else {
            0.0
        };
        let max_transfer = pair.max_transfer_factor * particle.energy;
        let half = (0.5 * theta).sin();
        let transfer = (max_transfer * half * half).min(max_transfer);
        let energy_after = particle.energy - transfer;

        let psi = theta.sin().atan2(theta.cos() + pair.mass_ratio);
        let recoil_polar = 0.5 * (PI - theta);
        let recoil_direction = rotate(particle.direction, recoil_polar, azimuth + PI);
        particle.direction = rotate(particle.direction, psi, azimuth);
        particle.energy = energy_after;

        Step::Collided(CollisionRecord {
            energy_before,
            electronic_loss,
            transfer,
            max_transfer,
            energy_after,
            theta_cm: theta,
            depth: particle.position[2],
            recoil_direction,
        })
    }

    fn run_ion(&self, ion: Species, energy: f64, rng: &mut ChaCha8Rng) -> IonHistory {
        let ed = self.target.displacement_energy;
        let mut history = IonHistory {
            stop_depth: None,
            vacancy_quanta: 0,
            vacancy_bins: Vec::new(),
        };
        let mut recoils = Vec::new();
        let mut particle = Particle {
            species: ion,
            energy,
            position: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
        };

        while particle.energy >= ed {
            match self.step(&mut particle, true, rng) {
                Step::Escaped => return history,
                Step::Collided(c) => self.tally_recoil(&c, &mut history, &mut recoils, &particle),
            }
        }
        history.stop_depth = Some(particle.depth());

        while let Some(mut recoil) = recoils.pop() {
            while recoil.energy >= ed {
                match self.step(&mut recoil, false, rng) {
                    Step::Escaped => break,
                    Step::Collided(c) => self.tally_recoil(&c, &mut history, &mut recoils, &recoil),
                }
            }
        }
        history
    }

    fn tally_recoil(
        &self,
        c: &CollisionRecord,
        history: &mut IonHistory,
        recoils: &mut Vec<Particle>,
        projectile: &Particle,
    ) {
        let quanta = match self.mode {
            DamageMode::FullCascade if c.transfer > self.target.displacement_energy => {
                recoils.push(Particle {
                    species: self.recoil_species,
                    energy: c.transfer,
                    position: projectile.position,
                    direction: c.recoil_direction,
                });
                VACANCY_SCALE
            }
            DamageMode::FullCascade => 0,
            DamageMode::KinchinPease => kinchin_pease_quanta(c.transfer, self.target),
        };
        if quanta == 0 {
            return;
        }
        history.vacancy_quanta += quanta;
        let bin = DepthTally::bin_of(c.depth);
        match history.vacancy_bins.last_mut() {
            Some((b, q)) if *b == bin => *q += quanta,
            _ => history.vacancy_bins.push((bin, quanta)),
        }
    }
}

/// Modified Kinchin-Pease displacements for a recoil of energy `transfer`,
/// in fixed-point units of 1/`VACANCY_SCALE`.
pub(crate) fn kinchin_pease_quanta(transfer: f64, target: &TargetMaterial) -> u64 {
    let ed = target.displacement_energy;
    if transfer < ed {
        0
    } else if transfer < 2.0 * ed / 0.8 {
        VACANCY_SCALE
    } else {
        let nu = 0.8 * damage_energy(transfer, target) / (2.0 * ed);
        (nu * VACANCY_SCALE as f64).round() as u64
    }
}

/// Unit vector `dir` rotated by polar angle `polar` at azimuth `azimuth`.
pub(crate) fn rotate(dir: [f64; 3], polar: f64, azimuth: f64) -> [f64; 3] {
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    let [dx, dy, dz] = dir;
    let s = (1.0 - dz * dz).max(0.0).sqrt();
    let out = if s > 1e-10 {
        [
            dx * cp + sp * (dx * dz * ca - dy * sa) / s,
            dy * cp + sp * (dy * dz * ca + dx * sa) / s,
            dz * cp - s * sp * ca,
        ]
    } else {
        [sp * ca, sp * sa, dz.signum() * cp]
    };
    let norm = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    [out[0] / norm, out[1] / norm, out[2] / norm]
}

fn ion_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Number of ion histories materialized at once.
const CHUNK: usize = 512;

/// Monte Carlo implantation of `n_ions` ions.
///
/// Each ion draws from its own ChaCha stream keyed by (seed, ion index),
/// and vacancy tallies are integer sums, so the result does not depend on
/// the number of worker threads.
pub fn simulate_implant(params: &ImplantParams) -> Result<ImplantResult> {
    if params.n_ions == 0 {
        return Err(Error::domain("n_ions must be at least 1"));
    }
    if !(params.energy_ev > 0.0) || !params.energy_ev.is_finite() {
        return Err(Error::domain(format!(
            "beam energy must be positive, got {}",
            params.energy_ev
        )));
    }
    params.target.validate()?;
    Species::new(params.ion.z, params.ion.mass_amu)?;

    let transport = Transport::new(&params.ion, &params.target, params.mode, params.scattering);
    let run = |i: usize| {
        let mut rng = ion_rng(params.seed, i);
        transport.run_ion(params.ion, params.energy_ev, &mut rng)
    };

    let pool = match params.threads {
        Some(n) if n > 1 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?,
        ),
        _ => None,
    };
    let serial = params.threads == Some(1);

    let mut stop_depths = Vec::with_capacity(params.n_ions);
    let mut vacancies_per_ion = Vec::with_capacity(params.n_ions);
    let mut tally = DepthTally::default();
    let mut backscattered = 0;

    let mut start = 0;
    while start < params.n_ions {
        let end = (start + CHUNK).min(params.n_ions);
        let histories: Vec<IonHistory> = if serial {
            (start..end).map(run).collect()
        } else if let Some(pool) = &pool {
            pool.install(|| (start..end).into_par_iter().map(run).collect())
        } else {
            (start..end).into_par_iter().map(run).collect()
        };
        for h in histories {
            match h.stop_depth {
                Some(d) => stop_depths.push(d),
                None => backscattered += 1,
            }
            vacancies_per_ion.push(h.vacancy_quanta as f64 / VACANCY_SCALE as f64);
            for (bin, q) in h.vacancy_bins {
                tally.add(bin, q);
            }
        }
        start = end;
    }

    let (mean_depth, straggle) = mean_and_population_std(&stop_depths);
    let stopping_out_of_range = params.energy_ev > transport.ion_pair.stopping.validity_limit_ev;
    Ok(ImplantResult {
        stop_depths,
        backscattered,
        vacancies_per_ion,
        vacancy_tally: tally,
        mean_depth,
        straggle,
        seed: params.seed,
        n_ions: params.n_ions,
        energy_ev: params.energy_ev,
        mode: params.mode,
        stopping_out_of_range,
    })
}

fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
